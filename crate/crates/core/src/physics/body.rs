use glam::{DMat3, DVec3};
use serde::{Deserialize, Serialize};

use super::math::{inverse_or_zero, rotate_inertia, Pose};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BodyId(pub u32);

impl std::fmt::Display for BodyId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Collision shape in the body frame.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Shape {
    Sphere {
        radius: f64,
    },
    Box {
        half_extents: DVec3,
    },
    /// Axis along local z. Collides as its bounding box.
    Cylinder {
        radius: f64,
        half_length: f64,
    },
    /// Points `x` with `normal · x = offset` in the body frame; solid below.
    Plane {
        normal: DVec3,
        offset: f64,
    },
}

impl Shape {
    /// Box used for contacts and rays, if the shape collides as a box.
    pub fn collision_box(&self) -> Option<DVec3> {
        match *self {
            Shape::Box { half_extents } => Some(half_extents),
            Shape::Cylinder {
                radius,
                half_length,
            } => Some(DVec3::new(radius, radius, half_length)),
            _ => None,
        }
    }

    /// Inertia tensor of a uniform solid about its center; `None` for planes.
    pub fn solid_inertia(&self, mass: f64) -> Option<DMat3> {
        let d = match *self {
            Shape::Sphere { radius } => DVec3::splat(0.4 * mass * radius * radius),
            Shape::Box { half_extents: h } => {
                let s = h * h;
                DVec3::new(s.y + s.z, s.x + s.z, s.x + s.y) * (mass / 3.0)
            }
            Shape::Cylinder {
                radius,
                half_length,
            } => {
                let side = mass * (3.0 * radius * radius + 4.0 * half_length * half_length) / 12.0;
                DVec3::new(side, side, 0.5 * mass * radius * radius)
            }
            Shape::Plane { .. } => return None,
        };
        Some(DMat3::from_diagonal(d))
    }

    /// Conservative bounding radius about the body origin; infinite for planes.
    pub fn bounding_radius(&self) -> f64 {
        match *self {
            Shape::Sphere { radius } => radius,
            Shape::Plane { .. } => f64::INFINITY,
            _ => self.collision_box().map(|h| h.length()).unwrap_or(0.0),
        }
    }
}

/// Pose, velocities and the external load applied during the last step.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct RigidBodyState {
    pub pose: Pose,
    pub linear_velocity: DVec3,
    pub angular_velocity: DVec3,
    pub accumulated_force: DVec3,
    pub accumulated_torque: DVec3,
}

impl RigidBodyState {
    pub fn is_finite(&self) -> bool {
        self.pose.is_finite()
            && self.linear_velocity.is_finite()
            && self.angular_velocity.is_finite()
            && self.accumulated_force.is_finite()
            && self.accumulated_torque.is_finite()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BodyDesc {
    pub name: String,
    pub shape: Shape,
    /// 0 makes the body static.
    pub mass: f64,
    /// About the center of mass, body frame.
    pub inertia: DMat3,
    pub friction: f64,
    pub restitution: f64,
    pub pose: Pose,
    pub linear_velocity: DVec3,
    pub angular_velocity: DVec3,
    pub color: [u8; 3],
}

impl BodyDesc {
    pub fn new(name: impl Into<String>, shape: Shape, mass: f64, inertia: DMat3) -> Self {
        Self {
            name: name.into(),
            shape,
            mass,
            inertia,
            friction: 0.5,
            restitution: 0.0,
            pose: Pose::IDENTITY,
            linear_velocity: DVec3::ZERO,
            angular_velocity: DVec3::ZERO,
            color: [180, 180, 180],
        }
    }

    /// Dynamic body with uniform-density inertia.
    pub fn solid(name: impl Into<String>, shape: Shape, mass: f64) -> Self {
        let inertia = shape.solid_inertia(mass).unwrap_or(DMat3::ZERO);
        Self::new(name, shape, mass, inertia)
    }

    /// Immovable body.
    pub fn fixed(name: impl Into<String>, shape: Shape) -> Self {
        Self::new(name, shape, 0.0, DMat3::ZERO)
    }

    pub fn at(self, position: DVec3) -> Self {
        self.with_pose(Pose::from_position(position))
    }

    pub fn with_velocity(mut self, linear: DVec3, angular: DVec3) -> Self {
        self.linear_velocity = linear;
        self.angular_velocity = angular;
        self
    }

    pub fn with_color(mut self, color: [u8; 3]) -> Self {
        self.color = color;
        self
    }

    pub fn with_pose(mut self, pose: Pose) -> Self {
        self.pose = pose;
        self
    }

    pub fn with_material(mut self, friction: f64, restitution: f64) -> Self {
        self.friction = friction;
        self.restitution = restitution;
        self
    }
}

#[derive(Clone, Debug)]
pub struct Body {
    pub id: BodyId,
    pub name: String,
    pub shape: Shape,
    pub mass: f64,
    pub inv_mass: f64,
    pub inertia: DMat3,
    pub inv_inertia: DMat3,
    pub friction: f64,
    pub restitution: f64,
    pub color: [u8; 3],
    pub state: RigidBodyState,
    /// Center-of-mass acceleration over the last step.
    pub linear_acceleration: DVec3,
    pub angular_acceleration: DVec3,
    pub(crate) sleeping: bool,
    pub(crate) rest_time: f64,
    pub(crate) clamped_last_step: bool,
}

impl Body {
    pub(crate) fn from_desc(id: BodyId, desc: BodyDesc) -> Self {
        let is_static = desc.mass <= 0.0;
        Body {
            id,
            name: desc.name,
            shape: desc.shape,
            mass: if is_static { 0.0 } else { desc.mass },
            inv_mass: if is_static { 0.0 } else { 1.0 / desc.mass },
            inertia: if is_static { DMat3::ZERO } else { desc.inertia },
            inv_inertia: if is_static {
                DMat3::ZERO
            } else {
                inverse_or_zero(desc.inertia)
            },
            friction: desc.friction,
            restitution: desc.restitution,
            color: desc.color,
            state: RigidBodyState {
                pose: desc.pose,
                linear_velocity: if is_static {
                    DVec3::ZERO
                } else {
                    desc.linear_velocity
                },
                angular_velocity: if is_static {
                    DVec3::ZERO
                } else {
                    desc.angular_velocity
                },
                ..Default::default()
            },
            linear_acceleration: DVec3::ZERO,
            angular_acceleration: DVec3::ZERO,
            sleeping: false,
            rest_time: 0.0,
            clamped_last_step: false,
        }
    }

    pub fn is_static(&self) -> bool {
        self.inv_mass == 0.0
    }

    pub fn is_sleeping(&self) -> bool {
        self.sleeping
    }

    pub fn pose(&self) -> &Pose {
        &self.state.pose
    }

    pub fn world_inertia(&self) -> DMat3 {
        rotate_inertia(self.state.pose.rotation(), self.inertia)
    }

    pub fn world_inv_inertia(&self) -> DMat3 {
        rotate_inertia(self.state.pose.rotation(), self.inv_inertia)
    }

    pub fn angular_momentum(&self) -> DVec3 {
        self.world_inertia() * self.state.angular_velocity
    }

    pub fn linear_momentum(&self) -> DVec3 {
        self.state.linear_velocity * self.mass
    }

    /// Velocity of the material point currently at world position `p`.
    pub fn velocity_at(&self, p: DVec3) -> DVec3 {
        self.state.linear_velocity
            + self
                .state
                .angular_velocity
                .cross(p - self.state.pose.position)
    }

    /// Acceleration of the material point currently at world position `p`
    /// over the last step: `a + α×r + ω×(ω×r)`.
    pub fn acceleration_at(&self, p: DVec3) -> DVec3 {
        let r = p - self.state.pose.position;
        let w = self.state.angular_velocity;
        self.linear_acceleration + self.angular_acceleration.cross(r) + w.cross(w.cross(r))
    }
}
