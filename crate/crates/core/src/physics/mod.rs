//! Fixed-step rigid-body dynamics with contacts, friction, joints and wrenches.

mod body;
mod collide;
mod joint;
mod math;
mod ray;
mod solver;
mod state;
mod world;

use thiserror::Error;

pub use body::{Body, BodyDesc, BodyId, RigidBodyState, Shape};
pub use collide::Contact;
pub use joint::{Joint, JointDesc, JointId, JointKind};
pub use math::{rotation_vector, tangent_basis, Pose};
pub use ray::{ray_shape, RayHit};
pub use solver::SolverParams;
pub use state::{BodySnapshot, WorldState, WrenchCommand, WrenchDuration};
pub use world::{
    Instance, SleepParams, World, WorldConfig, DEFAULT_DT, DEFAULT_GRAVITY, MAX_ANGULAR_SPEED,
    MAX_LINEAR_SPEED,
};

pub const STATE_TOPIC: &str = "/world/state";
pub const WRENCH_TOPIC: &str = "/world/cmd/wrench";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhysicsError {
    #[error("no such body {0}")]
    NoSuchBody(BodyId),
    #[error("body {0} is static")]
    StaticBody(BodyId),
    #[error("wrench duration {0} s is shorter than one step")]
    InvalidDuration(f64),
    #[error("wrench has non-finite components")]
    NonFiniteCommand,
    #[error("invalid joint: {0}")]
    InvalidJoint(String),
    #[error("invalid shape: {0}")]
    InvalidShape(String),
    #[error("name already in use: {0}")]
    NameCollision(String),
    #[error("numerical divergence: {0}")]
    NumericalDivergence(String),
}
