use glam::{DQuat, DVec3};
use serde::Serialize;

use crate::msgbus::Bus;
use crate::physics::{Pose, WrenchCommand, WrenchDuration};
use crate::runtime::{Command, RunError, Simulation};
use crate::scene::SceneSpec;

/// Knobs for [`spinning_top_scenario`], read from `[params.top]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TopParams {
    pub instance: String,
    /// Link whose symmetry axis is the spin axis (its local +z).
    pub link: String,
    /// rad/s about the axis right after the impulse.
    pub spin: f64,
    /// Lean at spawn, about world x through the lowest link origin (rad).
    pub initial_tilt: f64,
    pub duration: f64,
    pub snapshot_interval: f64,
    /// Upward force at the compound center of mass (N).
    pub lift_force: f64,
    pub lift_time: f64,
}

impl Default for TopParams {
    fn default() -> Self {
        Self {
            instance: "top".into(),
            link: "wheel".into(),
            spin: 50.0,
            initial_tilt: 0.05,
            duration: 2.0,
            snapshot_interval: 0.05,
            lift_force: 8.0,
            lift_time: 0.1,
        }
    }
}

impl TopParams {
    pub fn from_scene(spec: &SceneSpec) -> Self {
        let d = Self::default();
        let p = |k: &str, v: f64| spec.param("top", k).unwrap_or(v);
        Self {
            spin: p("spin", d.spin),
            initial_tilt: p("initial_tilt", d.initial_tilt),
            duration: p("duration", d.duration),
            snapshot_interval: p("snapshot_interval", d.snapshot_interval),
            lift_force: p("lift_force", d.lift_force),
            lift_time: p("lift_time", d.lift_time),
            ..d
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TopReport {
    pub spin: f64,
    /// Sample times (s), one per snapshot interval.
    pub times: Vec<f64>,
    /// Axis tilt from vertical at each sample (rad).
    pub tilt: Vec<f64>,
    pub final_tilt: f64,
    pub max_tilt: f64,
    /// Commands in the order they were issued, with the step they landed on.
    pub script: Vec<(String, u64)>,
}

/// Angle between a pose's local +z and world +z.
pub fn tilt_of(pose: &Pose) -> f64 {
    (pose.orientation * DVec3::Z)
        .dot(DVec3::Z)
        .clamp(-1.0, 1.0)
        .acos()
}

/// Scripted top experiment: select the top, lift it with a wrench, give it
/// an angular impulse about its axis and let go, then watch the tilt.
/// Navigation is a camera move and has no headless equivalent.
pub fn spinning_top_scenario(spec: &SceneSpec, params: &TopParams) -> Result<TopReport, RunError> {
    let mut spec = spec.clone();
    let dt = spec.world.dt;
    let slot = spec
        .spawns
        .iter()
        .position(|s| s.name == params.instance)
        .ok_or_else(|| RunError::Config(format!("no spawn named `{}`", params.instance)))?;
    let model = spec
        .model(&spec.spawns[slot].model)
        .ok_or_else(|| RunError::Config(format!("unknown model `{}`", spec.spawns[slot].model)))?;
    let pivot = model
        .links
        .iter()
        .map(|l| l.pose.position)
        .min_by(|a, b| a.z.total_cmp(&b.z))
        .unwrap_or(DVec3::ZERO);
    let pose = &mut spec.spawns[slot].pose;
    let lean = DQuat::from_rotation_x(params.initial_tilt);
    let pivot_world = pose.transform_point(pivot);
    *pose = Pose::new(
        pivot_world + lean * (pose.position - pivot_world),
        lean * pose.orientation,
    );

    let interval = (params.snapshot_interval / dt).round().max(1.0) as u64;
    let total = (params.duration / dt).round() as u64;
    let mut sim = Simulation::new(spec, Bus::new(), 1.0 / (interval as f64 * dt))?;
    sim.bind_remaining_virtual()?;

    let inst = sim
        .world()
        .instance(&params.instance)
        .ok_or_else(|| RunError::Config(format!("no instance `{}`", params.instance)))?;
    let axis_body = *inst.links.get(&params.link).ok_or_else(|| {
        RunError::Config(format!(
            "`{}` has no link `{}`",
            params.instance, params.link
        ))
    })?;
    let bodies: Vec<_> = inst.links.values().copied().collect();
    let world = sim.world();
    let mass: f64 = bodies
        .iter()
        .map(|&b| world.body(b).expect("live").mass)
        .sum();
    let com = bodies
        .iter()
        .map(|&b| {
            let b = world.body(b).expect("live");
            b.state.pose.position * b.mass
        })
        .sum::<DVec3>()
        / mass;
    let wheel = world.body(axis_body).expect("live");
    let com_local = wheel.state.pose.inverse_transform_point(com);
    let i_axis = (wheel.inertia * DVec3::Z).z;

    let tx = sim.commands();
    let mut script = Vec::new();
    let mut issue = |sim: &mut Simulation, cmd: Command| {
        script.push((cmd.kind().to_string(), sim.step_count()));
        tx.send(cmd);
    };
    issue(&mut sim, Command::Select(Some(axis_body)));
    let lift = WrenchCommand::force(
        axis_body,
        DVec3::Z * params.lift_force,
        WrenchDuration::Seconds(params.lift_time.max(dt)),
    )
    .at_point(com_local);
    issue(
        &mut sim,
        Command::ApplyWrench {
            body: None,
            wrench: lift,
        },
    );
    let lift_steps = (params.lift_time.max(dt) / dt).round() as u64;

    let mut times = Vec::new();
    let mut tilt = Vec::new();
    while sim.step_count() < total {
        if sim.step_count() == lift_steps && params.spin != 0.0 {
            let axis = sim
                .world()
                .body(axis_body)
                .expect("live")
                .state
                .pose
                .orientation
                * DVec3::Z;
            let spin = WrenchCommand::torque(
                axis_body,
                axis * (i_axis * params.spin / dt),
                WrenchDuration::Impulse,
            );
            issue(
                &mut sim,
                Command::ApplyWrench {
                    body: None,
                    wrench: spin,
                },
            );
            issue(&mut sim, Command::Select(None));
        }
        sim.advance()?;
        if sim.step_count() % interval == 0 {
            times.push(sim.clock().now_secs());
            tilt.push(tilt_of(
                &sim.world().body(axis_body).expect("live").state.pose,
            ));
        }
    }
    Ok(TopReport {
        spin: params.spin,
        final_tilt: tilt.last().copied().unwrap_or(0.0),
        max_tilt: tilt.iter().copied().fold(0.0, f64::max),
        times,
        tilt,
        script,
    })
}
