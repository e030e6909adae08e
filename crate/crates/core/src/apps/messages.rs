use serde::{Deserialize, Serialize};

use super::face::FaceId;
use crate::msgbus::codec::{ByteReader, ByteWriter, DecodeError, Wire};

fn read_face(r: &mut ByteReader<'_>) -> Result<FaceId, DecodeError> {
    let i = r.u8()?;
    FaceId::from_index(i).ok_or_else(|| DecodeError::Invalid(format!("bad face index {i}")))
}

/// The dice app settled on a new face; published on `/app/dice/<instance>/face`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiceResult {
    pub face: FaceId,
    pub value: u8,
}

impl Wire for DiceResult {
    const TYPE_TAG: &'static str = "DiceResult";

    fn encode(&self, w: &mut ByteWriter) {
        w.u8(self.face.index()).u8(self.value);
    }

    fn decode(r: &mut ByteReader<'_>) -> Result<Self, DecodeError> {
        Ok(Self {
            face: read_face(r)?,
            value: r.u8()?,
        })
    }
}

/// A face of a spawned cube, e.g. `s1.+x`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FaceRef {
    pub instance: String,
    pub face: FaceId,
}

impl FaceRef {
    pub fn new(instance: impl Into<String>, face: FaceId) -> Self {
        Self {
            instance: instance.into(),
            face,
        }
    }
}

impl std::fmt::Display for FaceRef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}.{}", self.instance, self.face)
    }
}

/// Current set of touching face pairs; published on `/app/neighbor/adjacency`
/// whenever it changes. Each pair is ordered and the list is sorted.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Adjacency {
    pub pairs: Vec<(FaceRef, FaceRef)>,
}

impl Wire for Adjacency {
    const TYPE_TAG: &'static str = "Adjacency";

    fn encode(&self, w: &mut ByteWriter) {
        w.u32(self.pairs.len() as u32);
        for (a, b) in &self.pairs {
            w.str16(&a.instance)
                .u8(a.face.index())
                .str16(&b.instance)
                .u8(b.face.index());
        }
    }

    fn decode(r: &mut ByteReader<'_>) -> Result<Self, DecodeError> {
        let n = r.u32()? as usize;
        // each pair takes at least 6 bytes
        if n > r.remaining() / 6 {
            return Err(DecodeError::Invalid(format!(
                "pair count {n} exceeds payload"
            )));
        }
        let mut pairs = Vec::with_capacity(n);
        for _ in 0..n {
            let a = FaceRef::new(r.str16()?, read_face(r)?);
            let b = FaceRef::new(r.str16()?, read_face(r)?);
            pairs.push((a, b));
        }
        Ok(Self { pairs })
    }
}

/// One squeeze episode of the marble; published on `/app/marble/squeeze`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SqueezeEvent {
    pub instance: String,
    pub stamp: u64,
    /// Force of the sample that completed the debounce (N).
    pub force: f64,
    /// Messages that were waiting when the ball was squeezed.
    pub unread: u64,
}

impl Wire for SqueezeEvent {
    const TYPE_TAG: &'static str = "SqueezeEvent";

    fn encode(&self, w: &mut ByteWriter) {
        w.str16(&self.instance)
            .u64(self.stamp)
            .f64(self.force)
            .u64(self.unread);
    }

    fn decode(r: &mut ByteReader<'_>) -> Result<Self, DecodeError> {
        Ok(Self {
            instance: r.str16()?,
            stamp: r.u64()?,
            force: r.f64()?,
            unread: r.u64()?,
        })
    }
}
