use glam::DVec3;
use serde::{Deserialize, Serialize};

use super::body::BodyId;
use super::math::Pose;
use crate::msgbus::codec::{ByteReader, ByteWriter, DecodeError, Wire};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BodySnapshot {
    pub id: BodyId,
    pub pose: Pose,
    pub linear_velocity: DVec3,
    pub angular_velocity: DVec3,
}

/// All body states after a step; published on `/world/state`.
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct WorldState {
    pub step: u64,
    /// Virtual time in seconds.
    pub time: f64,
    pub bodies: Vec<BodySnapshot>,
}

impl WorldState {
    pub fn body(&self, id: BodyId) -> Option<&BodySnapshot> {
        self.bodies.iter().find(|b| b.id == id)
    }
}

impl Wire for WorldState {
    const TYPE_TAG: &'static str = "WorldState";

    fn encode(&self, w: &mut ByteWriter) {
        w.u64(self.step)
            .f64(self.time)
            .u32(self.bodies.len() as u32);
        for b in &self.bodies {
            w.u32(b.id.0)
                .vec3(b.pose.position)
                .quat(b.pose.orientation)
                .vec3(b.linear_velocity)
                .vec3(b.angular_velocity);
        }
    }

    fn decode(r: &mut ByteReader<'_>) -> Result<Self, DecodeError> {
        let step = r.u64()?;
        let time = r.f64()?;
        let n = r.u32()? as usize;
        // each body is 108 bytes; reject counts the buffer cannot hold
        if n > r.remaining() / 108 {
            return Err(DecodeError::Invalid(format!(
                "body count {n} exceeds payload"
            )));
        }
        let mut bodies = Vec::with_capacity(n);
        for _ in 0..n {
            bodies.push(BodySnapshot {
                id: BodyId(r.u32()?),
                pose: Pose::new(r.vec3()?, r.quat()?),
                linear_velocity: r.vec3()?,
                angular_velocity: r.vec3()?,
            });
        }
        Ok(WorldState { step, time, bodies })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum WrenchDuration {
    /// Acts for exactly one step.
    Impulse,
    Seconds(f64),
}

/// External force and torque on a body; accepted on `/world/cmd/wrench`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WrenchCommand {
    pub body: BodyId,
    /// World frame, N.
    pub force: DVec3,
    /// World frame, N·m.
    pub torque: DVec3,
    /// Body frame; `None` means the center of mass.
    pub application_point: Option<DVec3>,
    pub duration: WrenchDuration,
}

impl WrenchCommand {
    pub fn force(body: BodyId, force: DVec3, duration: WrenchDuration) -> Self {
        Self {
            body,
            force,
            torque: DVec3::ZERO,
            application_point: None,
            duration,
        }
    }

    pub fn torque(body: BodyId, torque: DVec3, duration: WrenchDuration) -> Self {
        Self {
            body,
            force: DVec3::ZERO,
            torque,
            application_point: None,
            duration,
        }
    }

    pub fn at_point(mut self, point: DVec3) -> Self {
        self.application_point = Some(point);
        self
    }
}

impl Wire for WrenchCommand {
    const TYPE_TAG: &'static str = "WrenchCommand";

    fn encode(&self, w: &mut ByteWriter) {
        w.u32(self.body.0).vec3(self.force).vec3(self.torque);
        match self.application_point {
            Some(p) => w.u8(1).vec3(p),
            None => w.u8(0),
        };
        match self.duration {
            WrenchDuration::Impulse => w.u8(0),
            WrenchDuration::Seconds(s) => w.u8(1).f64(s),
        };
    }

    fn decode(r: &mut ByteReader<'_>) -> Result<Self, DecodeError> {
        let body = BodyId(r.u32()?);
        let force = r.vec3()?;
        let torque = r.vec3()?;
        let application_point = match r.u8()? {
            0 => None,
            1 => Some(r.vec3()?),
            t => return Err(DecodeError::Invalid(format!("bad point flag {t}"))),
        };
        let duration = match r.u8()? {
            0 => WrenchDuration::Impulse,
            1 => WrenchDuration::Seconds(r.f64()?),
            t => return Err(DecodeError::Invalid(format!("bad duration flag {t}"))),
        };
        Ok(Self {
            body,
            force,
            torque,
            application_point,
            duration,
        })
    }
}
