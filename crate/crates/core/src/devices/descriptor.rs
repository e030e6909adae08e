use glam::DVec3;
use serde::{Deserialize, Serialize};

use crate::physics::Pose;

/// Kind-specific device parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum DeviceKind {
    /// Proper acceleration in the mount frame, Gaussian noise per axis (m/s²).
    Accelerometer { noise_sigma: f64 },
    /// Contacts touching the mount link, with average normal force.
    Contact,
    /// Single ray along the mount's local +x.
    Proximity { max_range: f64 },
    /// Linear drain: `idle_w` watts plus `cost_j` joules per published message.
    Battery {
        capacity_j: f64,
        cost_j: f64,
        idle_w: f64,
    },
    /// Sets the collision radius of a sphere link; reports the current radius.
    Radius,
}

impl DeviceKind {
    pub fn name(&self) -> &'static str {
        match self {
            DeviceKind::Accelerometer { .. } => "accelerometer",
            DeviceKind::Contact => "contact",
            DeviceKind::Proximity { .. } => "proximity",
            DeviceKind::Battery { .. } => "battery",
            DeviceKind::Radius => "radius",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviceDescriptor {
    pub id: String,
    pub kind: DeviceKind,
    /// Link the device is mounted on.
    pub link: String,
    /// Mount pose in the link frame.
    pub pose: Pose,
    /// Samples per second.
    pub rate: f64,
    /// Battery device powering this one, if any.
    pub battery: Option<String>,
}

/// A rectangular pixel display on a link face; optionally touch-sensitive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisplaySpec {
    pub id: String,
    pub link: String,
    pub width: u32,
    pub height: u32,
    /// Rectangle center in the link frame (m).
    pub center: DVec3,
    /// Outward unit normal in the link frame.
    pub normal: DVec3,
    /// Unit vector in the link frame pointing toward pixel row 0.
    pub up: DVec3,
    /// Physical width and height (m).
    pub size: [f64; 2],
    pub touch: bool,
    pub battery: Option<String>,
}

impl DisplaySpec {
    /// In-plane unit vector toward increasing pixel column.
    pub fn right(&self) -> DVec3 {
        self.up.cross(self.normal)
    }

    pub fn frame_len(&self) -> usize {
        self.width as usize * self.height as usize * 3
    }
}
