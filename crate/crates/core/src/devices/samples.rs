use glam::DVec3;
use serde::{Deserialize, Serialize};

use crate::msgbus::codec::{ByteReader, ByteWriter, DecodeError, Wire};
use crate::physics::BodyId;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccelSample {
    pub stamp: u64,
    /// Proper acceleration in the mount frame (m/s²).
    pub proper_acceleration: DVec3,
}

impl Wire for AccelSample {
    const TYPE_TAG: &'static str = "AccelSample";

    fn encode(&self, w: &mut ByteWriter) {
        w.u64(self.stamp).vec3(self.proper_acceleration);
    }

    fn decode(r: &mut ByteReader<'_>) -> Result<Self, DecodeError> {
        Ok(Self {
            stamp: r.u64()?,
            proper_acceleration: r.vec3()?,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProximitySample {
    pub stamp: u64,
    /// `None` when nothing is within range.
    pub distance: Option<f64>,
}

impl Wire for ProximitySample {
    const TYPE_TAG: &'static str = "ProximitySample";

    fn encode(&self, w: &mut ByteWriter) {
        w.u64(self.stamp);
        match self.distance {
            Some(d) => w.u8(1).f64(d),
            None => w.u8(0).f64(0.0),
        };
    }

    fn decode(r: &mut ByteReader<'_>) -> Result<Self, DecodeError> {
        let stamp = r.u64()?;
        let flag = r.u8()?;
        let d = r.f64()?;
        let distance = match flag {
            0 => None,
            1 => Some(d),
            f => return Err(DecodeError::Invalid(format!("bad range flag {f}"))),
        };
        Ok(Self { stamp, distance })
    }
}

/// One contact touching a contact device's link during the last step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContactEvent {
    pub other: BodyId,
    /// World contact point (m).
    pub point: DVec3,
    /// World normal pointing from the other body into the mount link.
    pub normal: DVec3,
    /// Normal impulse over the step divided by dt (N).
    pub force: f64,
}

#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct ContactSample {
    pub stamp: u64,
    pub contacts: Vec<ContactEvent>,
}

impl ContactSample {
    pub fn total_force(&self) -> f64 {
        self.contacts.iter().map(|c| c.force).sum()
    }
}

impl Wire for ContactSample {
    const TYPE_TAG: &'static str = "ContactSample";

    fn encode(&self, w: &mut ByteWriter) {
        w.u64(self.stamp).u32(self.contacts.len() as u32);
        for c in &self.contacts {
            w.u32(c.other.0).vec3(c.point).vec3(c.normal).f64(c.force);
        }
    }

    fn decode(r: &mut ByteReader<'_>) -> Result<Self, DecodeError> {
        let stamp = r.u64()?;
        let n = r.u32()? as usize;
        // each event is 60 bytes; reject counts the buffer cannot hold
        if n > r.remaining() / 60 {
            return Err(DecodeError::Truncated(r.position()));
        }
        let mut contacts = Vec::with_capacity(n);
        for _ in 0..n {
            contacts.push(ContactEvent {
                other: BodyId(r.u32()?),
                point: r.vec3()?,
                normal: r.vec3()?,
                force: r.f64()?,
            });
        }
        Ok(Self { stamp, contacts })
    }
}

/// Row-major RGB8 image for one display.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DisplayFrame {
    pub display: String,
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<u8>,
}

impl DisplayFrame {
    /// `None` unless `pixels` holds exactly `width × height × 3` bytes.
    pub fn new(
        display: impl Into<String>,
        width: u32,
        height: u32,
        pixels: Vec<u8>,
    ) -> Option<Self> {
        (pixels.len() == width as usize * height as usize * 3).then(|| Self {
            display: display.into(),
            width,
            height,
            pixels,
        })
    }

    pub fn filled(display: impl Into<String>, width: u32, height: u32, rgb: [u8; 3]) -> Self {
        let pixels = rgb.repeat(width as usize * height as usize);
        Self {
            display: display.into(),
            width,
            height,
            pixels,
        }
    }

    pub fn pixel(&self, u: u32, v: u32) -> [u8; 3] {
        let i = (v as usize * self.width as usize + u as usize) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }
}

impl Wire for DisplayFrame {
    const TYPE_TAG: &'static str = "DisplayFrame";

    fn encode(&self, w: &mut ByteWriter) {
        w.str16(&self.display)
            .u32(self.width)
            .u32(self.height)
            .bytes32(&self.pixels);
    }

    fn decode(r: &mut ByteReader<'_>) -> Result<Self, DecodeError> {
        let display = r.str16()?;
        let (width, height) = (r.u32()?, r.u32()?);
        let pixels = r.bytes32()?;
        DisplayFrame::new(display, width, height, pixels)
            .ok_or_else(|| DecodeError::Invalid("pixel buffer does not match dimensions".into()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TouchPhase {
    Down,
    Move,
    Up,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TouchSource {
    ContactDerived,
    Ui,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TouchEvent {
    pub display: String,
    pub u: u32,
    pub v: u32,
    pub phase: TouchPhase,
    pub source: TouchSource,
}

impl Wire for TouchEvent {
    const TYPE_TAG: &'static str = "TouchEvent";

    fn encode(&self, w: &mut ByteWriter) {
        let phase = match self.phase {
            TouchPhase::Down => 0,
            TouchPhase::Move => 1,
            TouchPhase::Up => 2,
        };
        let source = match self.source {
            TouchSource::ContactDerived => 0,
            TouchSource::Ui => 1,
        };
        w.str16(&self.display)
            .u32(self.u)
            .u32(self.v)
            .u8(phase)
            .u8(source);
    }

    fn decode(r: &mut ByteReader<'_>) -> Result<Self, DecodeError> {
        let display = r.str16()?;
        let (u, v) = (r.u32()?, r.u32()?);
        let phase = match r.u8()? {
            0 => TouchPhase::Down,
            1 => TouchPhase::Move,
            2 => TouchPhase::Up,
            p => return Err(DecodeError::Invalid(format!("bad touch phase {p}"))),
        };
        let source = match r.u8()? {
            0 => TouchSource::ContactDerived,
            1 => TouchSource::Ui,
            s => return Err(DecodeError::Invalid(format!("bad touch source {s}"))),
        };
        Ok(Self {
            display,
            u,
            v,
            phase,
            source,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatteryState {
    pub stamp: u64,
    pub charge_fraction: f64,
    pub depleted: bool,
}

impl Wire for BatteryState {
    const TYPE_TAG: &'static str = "BatteryState";

    fn encode(&self, w: &mut ByteWriter) {
        w.u64(self.stamp)
            .f64(self.charge_fraction)
            .u8(self.depleted as u8);
    }

    fn decode(r: &mut ByteReader<'_>) -> Result<Self, DecodeError> {
        Ok(Self {
            stamp: r.u64()?,
            charge_fraction: r.f64()?,
            depleted: r.u8()? != 0,
        })
    }
}
