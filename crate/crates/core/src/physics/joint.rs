use glam::{DQuat, DVec3};
use serde::{Deserialize, Serialize};

use super::body::{Body, BodyId};
use super::math::rotation_vector;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct JointId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum JointKind {
    Fixed,
    Revolute,
    Prismatic,
}

#[derive(Clone, Debug, PartialEq)]
pub struct JointDesc {
    pub kind: JointKind,
    pub parent: BodyId,
    pub child: BodyId,
    /// Unit axis in the parent frame.
    pub axis: DVec3,
    /// Anchor point in the parent frame.
    pub anchor: DVec3,
    /// Angle (rad) or displacement (m) bounds, relative to the configuration at creation.
    pub limits: Option<(f64, f64)>,
    /// Per-row impulse cap is `max_effort * dt`.
    pub max_effort: Option<f64>,
    pub damping: f64,
}

/// Runtime joint between two bodies in maximal coordinates.
#[derive(Clone, Debug)]
pub struct Joint {
    pub id: JointId,
    pub kind: JointKind,
    pub parent: BodyId,
    pub child: BodyId,
    pub limits: Option<(f64, f64)>,
    pub max_effort: Option<f64>,
    pub damping: f64,
    pub(crate) local_anchor_a: DVec3,
    pub(crate) local_anchor_b: DVec3,
    pub(crate) local_axis_a: DVec3,
    /// `q_parent⁻¹ q_child` at creation.
    pub(crate) rest_rotation: DQuat,
}

impl Joint {
    pub(crate) fn new(id: JointId, desc: &JointDesc, a: &Body, b: &Body) -> Self {
        let anchor_world = a.state.pose.transform_point(desc.anchor);
        Joint {
            id,
            kind: desc.kind,
            parent: desc.parent,
            child: desc.child,
            limits: desc.limits,
            max_effort: desc.max_effort,
            damping: desc.damping,
            local_anchor_a: desc.anchor,
            local_anchor_b: b.state.pose.inverse_transform_point(anchor_world),
            local_axis_a: desc.axis.normalize(),
            rest_rotation: (a.state.pose.orientation.conjugate() * b.state.pose.orientation)
                .normalize(),
        }
    }

    pub fn axis_world(&self, a: &Body) -> DVec3 {
        a.state.pose.orientation * self.local_axis_a
    }

    pub fn anchor_world_a(&self, a: &Body) -> DVec3 {
        a.state.pose.transform_point(self.local_anchor_a)
    }

    pub fn anchor_world_b(&self, b: &Body) -> DVec3 {
        b.state.pose.transform_point(self.local_anchor_b)
    }

    /// Rotation taking the child's rest orientation to its current one,
    /// expressed in the world frame.
    pub(crate) fn rotation_error(&self, a: &Body, b: &Body) -> DVec3 {
        let target = a.state.pose.orientation * self.rest_rotation;
        rotation_vector(b.state.pose.orientation * target.conjugate())
    }

    /// Joint coordinate: angle about the axis (revolute) or displacement along
    /// it (prismatic); zero at creation. Fixed joints report 0.
    pub fn position(&self, a: &Body, b: &Body) -> f64 {
        match self.kind {
            JointKind::Fixed => 0.0,
            JointKind::Revolute => {
                let d = a.state.pose.orientation.conjugate()
                    * b.state.pose.orientation
                    * self.rest_rotation.conjugate();
                let v = DVec3::new(d.x, d.y, d.z).dot(self.local_axis_a);
                let angle = 2.0 * v.atan2(d.w);
                // wrap into (-pi, pi]
                if angle > std::f64::consts::PI {
                    angle - std::f64::consts::TAU
                } else if angle <= -std::f64::consts::PI {
                    angle + std::f64::consts::TAU
                } else {
                    angle
                }
            }
            JointKind::Prismatic => self
                .axis_world(a)
                .dot(self.anchor_world_b(b) - self.anchor_world_a(a)),
        }
    }

    /// Position and angular error of the constrained degrees of freedom.
    pub fn constraint_error(&self, a: &Body, b: &Body) -> (f64, f64) {
        let d = self.anchor_world_b(b) - self.anchor_world_a(a);
        let axis = self.axis_world(a);
        match self.kind {
            JointKind::Fixed => (d.length(), self.rotation_error(a, b).length()),
            JointKind::Revolute => {
                let axis_b =
                    b.state.pose.orientation * (self.rest_rotation.conjugate() * self.local_axis_a);
                (d.length(), axis.cross(axis_b).length())
            }
            JointKind::Prismatic => (
                (d - axis * d.dot(axis)).length(),
                self.rotation_error(a, b).length(),
            ),
        }
    }
}
