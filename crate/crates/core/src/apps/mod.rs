//! Application nodes re-creating the example interfaces. Each node is a
//! plain bus client that reads `/tui/...` device topics and writes
//! `/tui/.../cmd` and `/app/...` topics, nothing else.

mod dice;
mod face;
mod marble;
mod messages;
mod neighbor;
pub mod numeral;
mod top;

pub use dice::{DiceApp, DiceConfig};
pub use face::{face_of_direction, face_up, FaceId, GATE, TIE_FRACTION};
pub use marble::{
    ball_radius, squeeze_force, BallModelParams, MarbleApp, ParamsError, SqueezeDetector,
    RADIUS_STEP, SQUEEZE_SAMPLES,
};
pub use messages::{Adjacency, DiceResult, FaceRef, SqueezeEvent};
pub use neighbor::{proximity_faces, NeighborApp, NeighborDetector, DEBOUNCE, PAIR_TOLERANCE};
pub use top::{spinning_top_scenario, tilt_of, TopParams, TopReport};

use crate::msgbus::{Bus, BusError, VirtualClock};
use crate::scene::SceneSpec;

/// A bus client driven once per simulation step, after the devices publish.
pub trait AppNode: Send {
    /// Bus node id.
    fn name(&self) -> &str;
    fn spin(&mut self, clock: &VirtualClock) -> Result<(), BusError>;
}

/// Names accepted by [`build_app`].
pub const APP_NAMES: [&str; 3] = ["dice", "neighbor", "marble"];

/// Starts one named app for every matching instance of the scene.
pub fn build_app(name: &str, spec: &SceneSpec, bus: &Bus) -> Result<Vec<Box<dyn AppNode>>, String> {
    let mut out: Vec<Box<dyn AppNode>> = Vec::new();
    match name {
        "dice" => {
            for s in &spec.spawns {
                let model = spec.model(&s.model).ok_or("unknown model")?;
                if let Some(cfg) =
                    DiceConfig::from_model(&s.name, model).filter(|c| !c.displays.is_empty())
                {
                    out.push(Box::new(DiceApp::new(bus, cfg).map_err(|e| e.to_string())?));
                }
            }
        }
        "neighbor" => {
            let cubes: Vec<_> = spec
                .spawns
                .iter()
                .filter_map(|s| {
                    let faces = proximity_faces(spec.model(&s.model)?);
                    (!faces.is_empty()).then(|| (s.name.clone(), faces))
                })
                .collect();
            if !cubes.is_empty() {
                let threshold = spec.param("neighbor", "threshold").unwrap_or(0.02);
                out.push(Box::new(
                    NeighborApp::new(bus, &cubes, threshold).map_err(|e| e.to_string())?,
                ));
            }
        }
        "marble" => {
            let params = BallModelParams::from_scene(spec).map_err(|e| e.to_string())?;
            for s in &spec.spawns {
                let model = spec.model(&s.model).ok_or("unknown model")?;
                if let Some(app) = MarbleApp::from_model(bus, &s.name, model, params) {
                    out.push(Box::new(app.map_err(|e| e.to_string())?));
                }
            }
        }
        other => {
            return Err(format!(
                "unknown app `{other}` (known: {})",
                APP_NAMES.join(", ")
            ))
        }
    }
    Ok(out)
}

/// Apps a scene asks for: its `[params.<app>]` sections, plus `dice` for
/// any cube carrying an accelerometer and face displays.
pub fn default_apps(spec: &SceneSpec) -> Vec<&'static str> {
    let mut apps = Vec::new();
    let dice = spec.spawns.iter().any(|s| {
        spec.model(&s.model)
            .and_then(|m| DiceConfig::from_model(&s.name, m))
            .is_some_and(|c| c.displays.len() == 6)
    });
    if dice {
        apps.push("dice");
    }
    for name in ["neighbor", "marble"] {
        if spec.params.contains_key(name) {
            apps.push(name);
        }
    }
    apps
}
