use glam::{DMat3, DQuat, DVec3};
use serde::{Deserialize, Serialize};

/// Position (m) plus unit-quaternion orientation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub position: DVec3,
    pub orientation: DQuat,
}

impl Default for Pose {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl Pose {
    pub const IDENTITY: Pose = Pose {
        position: DVec3::ZERO,
        orientation: DQuat::IDENTITY,
    };

    pub fn new(position: DVec3, orientation: DQuat) -> Self {
        Self {
            position,
            orientation,
        }
    }

    pub fn from_position(position: DVec3) -> Self {
        Self::new(position, DQuat::IDENTITY)
    }

    /// `self ∘ other`: `other` expressed in `self`'s frame, mapped to the parent frame.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            position: self.position + self.orientation * other.position,
            orientation: (self.orientation * other.orientation).normalize(),
        }
    }

    pub fn inverse(&self) -> Pose {
        let inv = self.orientation.conjugate();
        Pose {
            position: -(inv * self.position),
            orientation: inv,
        }
    }

    pub fn transform_point(&self, p: DVec3) -> DVec3 {
        self.position + self.orientation * p
    }

    pub fn inverse_transform_point(&self, p: DVec3) -> DVec3 {
        self.orientation.conjugate() * (p - self.position)
    }

    pub fn rotation(&self) -> DMat3 {
        DMat3::from_quat(self.orientation)
    }

    pub fn is_finite(&self) -> bool {
        self.position.is_finite() && self.orientation.is_finite()
    }
}

/// Unit vectors `(t1, t2)` completing `n` to a right-handed orthonormal basis.
pub fn tangent_basis(n: DVec3) -> (DVec3, DVec3) {
    let t1 = if n.x.abs() >= 0.57735 {
        DVec3::new(n.y, -n.x, 0.0).normalize()
    } else {
        DVec3::new(0.0, n.z, -n.y).normalize()
    };
    (t1, n.cross(t1))
}

/// Rotation vector (axis * angle) of a unit quaternion, shortest arc.
pub fn rotation_vector(q: DQuat) -> DVec3 {
    let q = if q.w < 0.0 { -q } else { q };
    let v = DVec3::new(q.x, q.y, q.z);
    let s = v.length();
    if s < 1e-12 {
        return 2.0 * v;
    }
    let angle = 2.0 * s.atan2(q.w);
    v * (angle / s)
}

/// Inertia tensor rotated into the world frame: `R I Rᵀ`.
pub fn rotate_inertia(r: DMat3, inertia: DMat3) -> DMat3 {
    r * inertia * r.transpose()
}

/// Diagonal-safe inverse: zero stays zero (static bodies).
pub fn inverse_or_zero(m: DMat3) -> DMat3 {
    let det = m.determinant();
    if det.abs() < 1e-300 {
        DMat3::ZERO
    } else {
        m.inverse()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn compose_inverse_roundtrip() {
        let a = Pose::new(DVec3::new(1.0, 2.0, 3.0), DQuat::from_rotation_z(0.3));
        let b = Pose::new(DVec3::new(-0.5, 0.1, 0.0), DQuat::from_rotation_x(1.1));
        let c = a.compose(&b);
        let back = a.inverse().compose(&c);
        assert_relative_eq!(back.position.x, b.position.x, epsilon = 1e-12);
        assert_relative_eq!(
            back.orientation.dot(b.orientation).abs(),
            1.0,
            epsilon = 1e-12
        );
        let p = DVec3::new(0.3, -0.2, 0.9);
        let q = c.transform_point(p);
        assert!((c.inverse_transform_point(q) - p).length() < 1e-12);
    }

    #[test]
    fn basis_is_orthonormal() {
        for n in [
            DVec3::X,
            DVec3::Y,
            DVec3::Z,
            DVec3::new(1.0, 1.0, 1.0).normalize(),
            -DVec3::Z,
        ] {
            let (t1, t2) = tangent_basis(n);
            assert!(t1.dot(n).abs() < 1e-12 && t2.dot(n).abs() < 1e-12 && t1.dot(t2).abs() < 1e-12);
            assert_relative_eq!(t1.length(), 1.0, epsilon = 1e-12);
            assert_relative_eq!(t2.length(), 1.0, epsilon = 1e-12);
            assert!((t1.cross(t2) - n).length() < 1e-12);
        }
    }

    #[test]
    fn rotation_vector_of_axis_angle() {
        let q = DQuat::from_axis_angle(DVec3::Y, 0.7);
        assert!((rotation_vector(q) - DVec3::new(0.0, 0.7, 0.0)).length() < 1e-12);
        assert!((rotation_vector(-q) - DVec3::new(0.0, 0.7, 0.0)).length() < 1e-12);
    }
}
