use glam::DVec3;
use serde::{Deserialize, Serialize};

/// Quasi-static gate on the accelerometer magnitude (m/s²).
pub const GATE: (f64, f64) = (8.3, 11.3);

/// Top two face scores closer than this fraction of the best are a tie.
pub const TIE_FRACTION: f64 = 0.15;

/// One of the six faces of a cube, named by its outward normal in the body frame.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FaceId {
    PosX,
    NegX,
    PosY,
    NegY,
    PosZ,
    NegZ,
}

impl FaceId {
    pub const ALL: [FaceId; 6] = [
        FaceId::PosX,
        FaceId::NegX,
        FaceId::PosY,
        FaceId::NegY,
        FaceId::PosZ,
        FaceId::NegZ,
    ];

    pub fn normal(self) -> DVec3 {
        match self {
            FaceId::PosX => DVec3::X,
            FaceId::NegX => DVec3::NEG_X,
            FaceId::PosY => DVec3::Y,
            FaceId::NegY => DVec3::NEG_Y,
            FaceId::PosZ => DVec3::Z,
            FaceId::NegZ => DVec3::NEG_Z,
        }
    }

    /// `+x`, `-x`, ...
    pub fn label(self) -> &'static str {
        match self {
            FaceId::PosX => "+x",
            FaceId::NegX => "-x",
            FaceId::PosY => "+y",
            FaceId::NegY => "-y",
            FaceId::PosZ => "+z",
            FaceId::NegZ => "-z",
        }
    }

    /// Conventional id of the display or sensor on this face (`px`, `nx`, ...).
    pub fn short(self) -> &'static str {
        match self {
            FaceId::PosX => "px",
            FaceId::NegX => "nx",
            FaceId::PosY => "py",
            FaceId::NegY => "ny",
            FaceId::PosZ => "pz",
            FaceId::NegZ => "nz",
        }
    }

    pub fn from_label(s: &str) -> Option<FaceId> {
        FaceId::ALL
            .into_iter()
            .find(|f| f.label() == s || f.short() == s)
    }

    pub fn index(self) -> u8 {
        self as u8
    }

    pub fn from_index(i: u8) -> Option<FaceId> {
        FaceId::ALL.get(i as usize).copied()
    }

    /// Die value: opposite faces sum to 7.
    pub fn pips(self) -> u8 {
        match self {
            FaceId::PosX => 1,
            FaceId::NegX => 6,
            FaceId::PosY => 2,
            FaceId::NegY => 5,
            FaceId::PosZ => 3,
            FaceId::NegZ => 4,
        }
    }

    pub fn opposite(self) -> FaceId {
        match self {
            FaceId::PosX => FaceId::NegX,
            FaceId::NegX => FaceId::PosX,
            FaceId::PosY => FaceId::NegY,
            FaceId::NegY => FaceId::PosY,
            FaceId::PosZ => FaceId::NegZ,
            FaceId::NegZ => FaceId::PosZ,
        }
    }
}

impl std::fmt::Display for FaceId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Face whose normal best matches the direction of `reaction`, or `None`
/// when the best two are within [`TIE_FRACTION`]. Depends only on direction.
pub fn face_of_direction(reaction: DVec3) -> Option<FaceId> {
    let len = reaction.length();
    if !len.is_finite() || len == 0.0 {
        return None;
    }
    let d = reaction / len;
    let mut scores: Vec<(f64, FaceId)> = FaceId::ALL
        .iter()
        .map(|&f| (f.normal().dot(d), f))
        .collect();
    scores.sort_by(|a, b| b.0.total_cmp(&a.0));
    let (best, face) = scores[0];
    let second = scores[1].0;
    (best - second >= TIE_FRACTION * best).then_some(face)
}

/// Face pointing up, judged from a gravity-reaction reading in the body
/// frame. `None` (indeterminate) outside the quasi-static gate or on an edge.
pub fn face_up(proper_acceleration: DVec3) -> Option<FaceId> {
    let g = proper_acceleration.length();
    if !(GATE.0..=GATE.1).contains(&g) {
        return None;
    }
    face_of_direction(proper_acceleration)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_aligned() {
        assert_eq!(face_up(DVec3::new(0.0, 0.0, 9.81)), Some(FaceId::PosZ));
        assert_eq!(face_up(DVec3::new(9.81, 0.0, 0.0)), Some(FaceId::PosX));
        assert_eq!(face_up(DVec3::new(0.0, -9.81, 0.0)), Some(FaceId::NegY));
    }

    #[test]
    fn edge_is_indeterminate() {
        let a = DVec3::new(1.0, 0.0, 1.0).normalize() * 9.81;
        assert_eq!(face_up(a), None);
    }

    #[test]
    fn gate() {
        assert_eq!(face_up(DVec3::new(0.0, 0.0, 8.0)), None);
        assert_eq!(face_up(DVec3::new(0.0, 0.0, 12.0)), None);
        assert_eq!(
            face_of_direction(DVec3::new(0.0, 0.0, 12.0)),
            Some(FaceId::PosZ)
        );
    }

    #[test]
    fn labels_round_trip() {
        for f in FaceId::ALL {
            assert_eq!(FaceId::from_label(f.label()), Some(f));
            assert_eq!(FaceId::from_label(f.short()), Some(f));
            assert_eq!(FaceId::from_index(f.index()), Some(f));
            assert_eq!(f.pips() + f.opposite().pips(), 7);
        }
    }
}
