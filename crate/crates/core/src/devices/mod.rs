//! Virtual sensors and actuators, and the hardware-abstraction layer that
//! binds each device topic to exactly one backend.
//!
//! Device traffic lives under `/tui/<instance>/<device>/<channel>`, where the
//! channel is one of `sample`, `frame`, `touch`, `battery` or `cmd`.

mod battery;
mod descriptor;
pub mod display;
mod hal;
mod samples;
pub mod sensors;

use thiserror::Error;

pub use battery::Battery;
pub use descriptor::{DeviceDescriptor, DeviceKind, DisplaySpec};
pub use hal::{actuator_node, driver_node, Backend, BindingHandle, Hal, RATE_TOLERANCE};
pub use samples::{
    AccelSample, BatteryState, ContactEvent, ContactSample, DisplayFrame, ProximitySample,
    TouchEvent, TouchPhase, TouchSource,
};

use crate::msgbus::BusError;

pub const CH_SAMPLE: &str = "sample";
pub const CH_FRAME: &str = "frame";
pub const CH_TOUCH: &str = "touch";
pub const CH_BATTERY: &str = "battery";
pub const CH_CMD: &str = "cmd";

/// `/tui/<instance>/<device>/<channel>`
pub fn device_topic(instance: &str, device: &str, channel: &str) -> String {
    format!("/tui/{instance}/{device}/{channel}")
}

#[derive(Debug, Error)]
pub enum DeviceError {
    #[error("no such device: {0}")]
    NoSuchDevice(String),
    #[error("frame is {got:?}, display is {expected:?}")]
    DimensionMismatch {
        expected: (u32, u32),
        got: (u32, u32),
    },
    #[error("battery depleted: {0}")]
    BatteryDepleted(String),
    #[error("touch off the display surface: {0}")]
    OffSurface(String),
    #[error("already bound: {0}")]
    AlreadyBound(String),
    #[error("recorded rate {measured:.3} Hz does not match descriptor rate {descriptor} Hz")]
    RateMismatch { descriptor: f64, measured: f64 },
    #[error(transparent)]
    Bus(#[from] BusError),
}
