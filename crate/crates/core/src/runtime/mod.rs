//! Orchestration: one [`Simulation`] owns the world and the step-boundary
//! command queue, [`run`] drives it from a [`RunConfig`].

mod command;
mod graph;
mod sim;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::atomic::AtomicBool;
use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

pub use command::{AckFn, Command, CommandAck, CommandSender};
pub use graph::{DeviceNode, DisplayNode, GeometryNode, LinkNode, ModelNode, SceneGraph};
pub use sim::{Simulation, RUNTIME_NODE, SCENE_GRAPH_TOPIC};

use crate::apps::{build_app, default_apps};
use crate::devices::DeviceError;
use crate::msgbus::{replay, BagFile, Bus, BusError, VirtualClock};
use crate::physics::PhysicsError;
use crate::scene::{validate, Diagnostic, SceneError, SceneSpec, SpawnError};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RunMode {
    /// As fast as possible; wall time is unrelated to virtual time.
    Stepped,
    /// Paced so that virtual time runs `factor` times wall time.
    Realtime(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct RecordSpec {
    pub patterns: Vec<String>,
    pub out: PathBuf,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReplaySpec {
    pub bag: PathBuf,
    pub remap: BTreeMap<String, String>,
    pub speed: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub scene_path: PathBuf,
    /// Virtual seconds; `None` runs until stopped.
    pub duration: Option<f64>,
    pub mode: RunMode,
    /// Overrides the scene's seed.
    pub seed: Option<u64>,
    /// Overrides the scene's step size.
    pub dt: Option<f64>,
    pub record: Option<RecordSpec>,
    pub replay: Option<ReplaySpec>,
    /// `/world/state` publish rate in Hz.
    pub snapshot_rate: f64,
    pub listen: Option<String>,
    /// App nodes to start; `None` picks them from the scene.
    pub apps: Option<Vec<String>>,
}

impl RunConfig {
    pub fn new(scene_path: impl Into<PathBuf>) -> Self {
        Self {
            scene_path: scene_path.into(),
            duration: None,
            mode: RunMode::Stepped,
            seed: None,
            dt: None,
            record: None,
            replay: None,
            snapshot_rate: 60.0,
            listen: None,
            apps: None,
        }
    }

    /// Checks the parts of the config that do not need the scene.
    pub fn check(&self) -> Result<(), RunError> {
        if let RunMode::Realtime(f) = self.mode {
            if !(f > 0.0 && f.is_finite()) {
                return Err(RunError::Config(format!(
                    "realtime factor must be > 0, got {f}"
                )));
            }
        }
        if let Some(d) = self.duration {
            if !(d >= 0.0 && d.is_finite()) {
                return Err(RunError::Config(format!(
                    "duration must be a non-negative number, got {d}"
                )));
            }
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(RunError::Config(format!("dt must be > 0, got {dt}")));
            }
        }
        if !(self.snapshot_rate > 0.0 && self.snapshot_rate.is_finite()) {
            return Err(RunError::Config(format!(
                "snapshot rate must be > 0, got {}",
                self.snapshot_rate
            )));
        }
        if let Some(r) = &self.replay {
            if !(r.speed > 0.0 && r.speed.is_finite()) {
                return Err(RunError::Config(format!(
                    "replay speed must be > 0, got {}",
                    r.speed
                )));
            }
        }
        Ok(())
    }

    /// Loads the scene, applies the overrides and validates it.
    pub fn load_scene(&self) -> Result<SceneSpec, RunError> {
        let mut spec = SceneSpec::load(&self.scene_path)?;
        if let Some(seed) = self.seed {
            spec.world.seed = seed;
        }
        if let Some(dt) = self.dt {
            spec.world.dt = dt;
        }
        let diags = validate(&spec);
        if !diags.is_empty() {
            return Err(RunError::Invalid(diags));
        }
        Ok(spec)
    }
}

/// Realtime pacing accuracy.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct Pacing {
    pub mean_lag_ms: f64,
    pub max_lag_ms: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct RunReport {
    pub steps: u64,
    pub wall_time: f64,
    pub virtual_time: f64,
    /// Messages published on the bus during the run.
    pub messages: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bag_path: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub records: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pacing: Option<Pacing>,
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error("scene has {} problem(s):\n{}", .0.len(), .0.iter().map(|d| format!("  {d}")).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<Diagnostic>),
    #[error(transparent)]
    Spawn(#[from] SpawnError),
    #[error("{0}")]
    Config(String),
    #[error("diverged after step {last_good_step}: {source}")]
    Divergence {
        last_good_step: u64,
        #[source]
        source: PhysicsError,
    },
    #[error(transparent)]
    Device(#[from] DeviceError),
    #[error(transparent)]
    Bus(#[from] BusError),
    #[error("{0}")]
    App(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl RunError {
    /// CLI exit code: 2 for bad input, 1 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Scene(_) | RunError::Invalid(_) | RunError::Config(_) => 2,
            _ => 1,
        }
    }
}

/// Everything [`run`] sets up before the first step.
pub struct Prepared {
    pub sim: Simulation,
    recorder: Option<(crate::msgbus::Recorder, PathBuf)>,
}

impl std::fmt::Debug for Prepared {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Prepared").field("sim", &self.sim).finish()
    }
}

/// Builds the simulation for `config`: scene, apps, replay bindings and
/// the recorder. Used by [`run`] and by the gateway.
pub fn prepare(config: &RunConfig, bus: Bus) -> Result<Prepared, RunError> {
    config.check()?;
    let spec = config.load_scene()?;
    let recorder = match &config.record {
        Some(r) => {
            let file = std::fs::File::create(&r.out)?;
            let patterns: Vec<&str> = r.patterns.iter().map(String::as_str).collect();
            Some((
                bus.record(&patterns, std::io::BufWriter::new(file))?,
                r.out.clone(),
            ))
        }
        None => None,
    };
    let mut sim = Simulation::new(spec.clone(), bus.clone(), config.snapshot_rate)?;
    if let Some(r) = &config.replay {
        let bag = BagFile::read_file(&r.bag)?;
        sim.attach_replay(&bag, &r.remap, r.speed)?;
    }
    sim.bind_remaining_virtual()?;
    let names: Vec<String> = match &config.apps {
        Some(a) => a.clone(),
        None => default_apps(&spec).into_iter().map(String::from).collect(),
    };
    for name in names {
        for node in build_app(&name, &spec, &bus).map_err(RunError::App)? {
            sim.add_node(node);
        }
    }
    Ok(Prepared { sim, recorder })
}

impl Prepared {
    /// Runs for the configured duration (or until `stop`), then writes the bag.
    pub fn run(self, config: &RunConfig, stop: &AtomicBool) -> Result<RunReport, RunError> {
        self.run_with(config, stop, |_| {})
    }

    /// [`Prepared::run`] with a hook called on the simulation thread after
    /// every loop iteration.
    pub fn run_with(
        mut self,
        config: &RunConfig,
        stop: &AtomicBool,
        after: impl FnMut(&mut Simulation),
    ) -> Result<RunReport, RunError> {
        let dt = self.sim.world().dt();
        let limit = config.duration.map(|d| (d / dt).round() as u64);
        let start_msgs = self.sim.bus().published_count();
        let wall = Instant::now();
        let result = self.sim.run_loop_with(limit, config.mode, stop, after);
        let mut report = RunReport {
            steps: self.sim.step_count(),
            wall_time: wall.elapsed().as_secs_f64(),
            virtual_time: self.sim.clock().now_secs(),
            messages: self.sim.bus().published_count() - start_msgs,
            ..Default::default()
        };
        if let Some((rec, path)) = self.recorder.take() {
            let bag = rec.stop()?;
            report.records = Some(bag.len());
            report.bag_path = Some(path);
        }
        let (_, pacing) = result?;
        report.pacing = pacing;
        Ok(report)
    }
}

/// Loads, runs and reports. Headless; see the `vtui` gateway for serving.
pub fn run(config: &RunConfig) -> Result<RunReport, RunError> {
    let prepared = prepare(config, Bus::new())?;
    let stop = Arc::new(AtomicBool::new(false));
    prepared.run(config, &stop)
}

/// Outcome of replaying a bag without a scene.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReplayReport {
    pub messages: usize,
    /// Virtual time the replay took, after speed scaling.
    pub virtual_duration: f64,
    pub recorded_duration: f64,
    pub speed: f64,
}

/// Re-publishes every record of `bag` on a fresh bus at `speed`.
pub fn replay_bag(
    bag: &BagFile,
    speed: f64,
    remap: &BTreeMap<String, String>,
) -> Result<ReplayReport, RunError> {
    if !(speed > 0.0 && speed.is_finite()) {
        return Err(RunError::Config(format!(
            "replay speed must be > 0, got {speed}"
        )));
    }
    let bus = Bus::new();
    let mut clock = VirtualClock::stepped();
    let stats = replay(&bus, bag, &mut clock, speed, remap)?;
    Ok(ReplayReport {
        messages: stats.messages_sent,
        virtual_duration: stats.virtual_duration as f64 * 1e-9,
        recorded_duration: bag.duration as f64 * 1e-9,
        speed,
    })
}
