//! Declarative scene and model descriptions, their text format and validation.
//!
//! The format is documented in `docs/scene-format.md`.

mod format;
mod spawn;
mod validate;

use std::collections::BTreeMap;
use std::fmt;

use glam::{DMat3, DVec3};
use thiserror::Error;

use crate::devices::{DeviceDescriptor, DisplaySpec};
use crate::physics::{JointKind, Pose, Shape, SolverParams, WorldConfig};

pub use format::{parse_scene, serialize_scene, SCENE_FORMAT_VERSION};
pub use spawn::{build_world, spawn, SpawnError};
pub use validate::{validate, validate_model, DiagCode, Diagnostic};

pub type GeometryPrimitive = Shape;

#[derive(Clone, Debug, PartialEq)]
pub enum InertiaSpec {
    /// Uniform-density solid computed from geometry and mass.
    Auto,
    Tensor(DMat3),
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinkSpec {
    pub name: String,
    pub geometry: GeometryPrimitive,
    /// kg; 0 makes the link static.
    pub mass: f64,
    pub inertia: InertiaSpec,
    pub friction: f64,
    pub restitution: f64,
    /// Pose relative to the model frame.
    pub pose: Pose,
    pub color: [u8; 3],
}

impl LinkSpec {
    pub fn is_static(&self) -> bool {
        self.mass == 0.0
    }

    pub fn inertia_tensor(&self) -> Result<DMat3, InertiaError> {
        match &self.inertia {
            InertiaSpec::Tensor(t) => Ok(*t),
            InertiaSpec::Auto => auto_inertia(&self.geometry, self.mass),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct JointSpec {
    pub name: String,
    pub kind: JointKind,
    pub parent: String,
    pub child: String,
    /// Unit axis in the parent link frame.
    pub axis: DVec3,
    /// Anchor in the parent link frame (m).
    pub anchor: DVec3,
    pub limits: Option<[f64; 2]>,
    pub max_effort: Option<f64>,
    pub damping: f64,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct ModelSpec {
    pub name: String,
    pub links: Vec<LinkSpec>,
    pub joints: Vec<JointSpec>,
    pub devices: Vec<DeviceDescriptor>,
    pub displays: Vec<DisplaySpec>,
}

impl ModelSpec {
    pub fn link(&self, name: &str) -> Option<&LinkSpec> {
        self.links.iter().find(|l| l.name == name)
    }

    pub fn device(&self, id: &str) -> Option<&DeviceDescriptor> {
        self.devices.iter().find(|d| d.id == id)
    }

    pub fn display(&self, id: &str) -> Option<&DisplaySpec> {
        self.displays.iter().find(|d| d.id == id)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WorldSpec {
    pub gravity: DVec3,
    pub dt: f64,
    pub seed: u64,
    pub solver: SolverParams,
}

impl WorldSpec {
    /// Physics configuration for this world; sleeping stays off.
    pub fn config(&self) -> WorldConfig {
        WorldConfig {
            gravity: self.gravity,
            dt: self.dt,
            solver: self.solver,
            sleeping: None,
        }
    }
}

impl Default for WorldSpec {
    fn default() -> Self {
        Self {
            gravity: crate::physics::DEFAULT_GRAVITY,
            dt: crate::physics::DEFAULT_DT,
            seed: 0,
            solver: SolverParams::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpawnSpec {
    pub model: String,
    pub name: String,
    pub pose: Pose,
}

/// A parsed `.scene` file.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct SceneSpec {
    pub world: WorldSpec,
    pub models: Vec<ModelSpec>,
    pub spawns: Vec<SpawnSpec>,
    /// Numeric parameters for application nodes, keyed by app then parameter.
    pub params: BTreeMap<String, BTreeMap<String, f64>>,
}

impl SceneSpec {
    pub fn model(&self, name: &str) -> Option<&ModelSpec> {
        self.models.iter().find(|m| m.name == name)
    }

    pub fn param(&self, app: &str, key: &str) -> Option<f64> {
        self.params.get(app)?.get(key).copied()
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self, SceneError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| SceneError::Io(format!("{}: {e}", path.as_ref().display())))?;
        parse_scene(&text)
    }
}

/// 1-based line and column.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Location {
    pub line: usize,
    pub column: usize,
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

fn at(location: &Option<Location>) -> String {
    location.map(|l| format!("{l}: ")).unwrap_or_default()
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum SceneError {
    #[error("{}syntax error: {message}", at(.location))]
    Syntax {
        location: Option<Location>,
        message: String,
    },
    #[error("{}unknown field `{field}`", at(.location))]
    UnknownField {
        location: Option<Location>,
        field: String,
    },
    #[error("{}bad unit: {message} (values are plain SI numbers)", at(.location))]
    BadUnit {
        location: Option<Location>,
        message: String,
    },
    #[error("{0}")]
    Io(String),
}

impl SceneError {
    pub fn location(&self) -> Option<Location> {
        match self {
            SceneError::Syntax { location, .. }
            | SceneError::UnknownField { location, .. }
            | SceneError::BadUnit { location, .. } => *location,
            SceneError::Io(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum InertiaError {
    #[error("mass must be positive")]
    ZeroMass,
    #[error("planes have no finite inertia")]
    Unbounded,
}

/// Inertia of a uniform solid about its center of mass.
pub fn auto_inertia(geometry: &GeometryPrimitive, mass: f64) -> Result<DMat3, InertiaError> {
    if !(mass > 0.0) {
        return Err(InertiaError::ZeroMass);
    }
    geometry.solid_inertia(mass).ok_or(InertiaError::Unbounded)
}
