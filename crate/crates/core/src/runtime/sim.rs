use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::{Duration, Instant};

use super::command::{Command, CommandAck, CommandSender};
use super::graph::SceneGraph;
use super::{Pacing, RunError, RunMode};
use crate::apps::AppNode;
use crate::devices::{
    device_topic, Backend, DeviceKind, Hal, TouchEvent, TouchSource, CH_BATTERY, CH_FRAME,
    CH_SAMPLE, CH_TOUCH,
};
use crate::msgbus::{
    secs_to_nanos, BagFile, Bus, PublisherHandle, Replayer, Subscription, VirtualClock, Wire,
};
use crate::physics::{BodyId, World, WorldState, WrenchCommand, STATE_TOPIC, WRENCH_TOPIC};
use crate::scene::{build_world, spawn, SceneSpec};

/// Node id of the runtime itself on the bus.
pub const RUNTIME_NODE: &str = "runtime";
/// Latched JSON [`SceneGraph`], re-published after every spawn.
pub const SCENE_GRAPH_TOPIC: &str = "/sim/scene_graph";

/// One world, its devices and app nodes, driven step by step.
pub struct Simulation {
    spec: SceneSpec,
    world: World,
    bus: Bus,
    hal: Hal,
    clock: VirtualClock,
    dt_ns: u64,
    nodes: Vec<Box<dyn AppNode>>,
    commands: CommandSender,
    paused: bool,
    manual_steps: u64,
    selected: Option<BodyId>,
    state_pub: PublisherHandle,
    graph_pub: PublisherHandle,
    wrench_sub: Subscription,
    snapshot_every: u64,
    replayer: Option<Replayer>,
}

impl std::fmt::Debug for Simulation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Simulation")
            .field("step", &self.world.step_count())
            .field("paused", &self.paused)
            .field(
                "nodes",
                &self
                    .nodes
                    .iter()
                    .map(|n| n.name().to_string())
                    .collect::<Vec<_>>(),
            )
            .finish()
    }
}

impl Simulation {
    /// Builds the world, registers every instance with the HAL and binds
    /// all devices to the virtual backend.
    pub fn new(spec: SceneSpec, bus: Bus, snapshot_rate: f64) -> Result<Self, RunError> {
        let world = build_world(&spec)?;
        let dt = world.dt();
        if !(snapshot_rate > 0.0 && snapshot_rate <= 1.0 / dt * (1.0 + 1e-9)) {
            return Err(RunError::Config(format!(
                "snapshot rate must be in (0, {}] Hz",
                1.0 / dt
            )));
        }
        let mut hal = Hal::new(bus.clone(), dt, spec.world.seed);
        for s in &spec.spawns {
            hal.register_instance(&world, &s.name, spec.model(&s.model).expect("validated"))?;
        }
        let state_pub = bus.advertise_typed::<WorldState>(RUNTIME_NODE, STATE_TOPIC)?;
        let graph_pub = bus.advertise_latched(RUNTIME_NODE, SCENE_GRAPH_TOPIC, String::TYPE_TAG)?;
        let wrench_sub = bus.subscribe_typed::<WrenchCommand>(RUNTIME_NODE, WRENCH_TOPIC, 256)?;
        let mut sim = Self {
            spec,
            world,
            bus,
            hal,
            clock: VirtualClock::stepped(),
            dt_ns: secs_to_nanos(dt),
            nodes: Vec::new(),
            commands: CommandSender::new(),
            paused: false,
            manual_steps: 0,
            selected: None,
            state_pub,
            graph_pub,
            wrench_sub,
            snapshot_every: ((1.0 / (snapshot_rate * dt)).round() as u64).max(1),
            replayer: None,
        };
        sim.publish_graph()?;
        Ok(sim)
    }

    /// Binds every still-unbound device to the virtual backend.
    pub fn bind_remaining_virtual(&mut self) -> Result<(), RunError> {
        let names: Vec<String> = self.world.instances().keys().cloned().collect();
        for n in names {
            self.hal.bind_all_virtual(&n)?;
        }
        Ok(())
    }

    /// Feeds a recording back in. Device streams found in the bag drive
    /// their devices through the HAL; the remaining topics are re-published
    /// as recorded at `speed`. Call before [`Simulation::bind_remaining_virtual`].
    pub fn attach_replay(
        &mut self,
        bag: &BagFile,
        remap: &BTreeMap<String, String>,
        speed: f64,
    ) -> Result<usize, RunError> {
        let mapped = |t: &String| remap.get(t).unwrap_or(t).clone();
        let in_bag: BTreeSet<String> = bag.records.iter().map(|r| mapped(&r.topic)).collect();
        let mut owned: BTreeSet<String> =
            [STATE_TOPIC.to_string(), SCENE_GRAPH_TOPIC.to_string()].into();
        let mut bound = 0;
        let instances: Vec<(String, String)> = self
            .world
            .instances()
            .iter()
            .map(|(n, i)| (n.clone(), i.model.clone()))
            .collect();
        for (inst, model) in instances {
            let model = self.spec.model(&model).expect("spawned from spec").clone();
            for d in &model.displays {
                owned.insert(device_topic(&inst, &d.id, CH_FRAME));
                owned.insert(device_topic(&inst, &d.id, CH_TOUCH));
            }
            for d in &model.devices {
                let channel = if matches!(d.kind, DeviceKind::Battery { .. }) {
                    CH_BATTERY
                } else {
                    CH_SAMPLE
                };
                let topic = device_topic(&inst, &d.id, channel);
                owned.insert(topic.clone());
                if in_bag.contains(&topic) {
                    let backend = Backend::Replay {
                        bag: bag.clone(),
                        remap: remap.clone(),
                    };
                    self.hal.bind(&inst, &d.id, backend)?;
                    bound += 1;
                }
            }
        }
        let rest: Vec<_> = bag
            .records
            .iter()
            .filter(|r| !owned.contains(&mapped(&r.topic)))
            .cloned()
            .collect();
        if !rest.is_empty() {
            self.replayer = Some(Replayer::new(
                &self.bus,
                &BagFile::from_records(rest),
                speed,
                remap,
            )?);
        }
        Ok(bound)
    }

    pub fn add_node(&mut self, node: Box<dyn AppNode>) {
        self.nodes.push(node);
    }

    pub fn node_names(&self) -> Vec<String> {
        self.nodes.iter().map(|n| n.name().to_string()).collect()
    }

    pub fn spec(&self) -> &SceneSpec {
        &self.spec
    }

    pub fn world(&self) -> &World {
        &self.world
    }

    /// Direct world access for scripted setups; running nodes are not told.
    pub fn world_mut(&mut self) -> &mut World {
        &mut self.world
    }

    pub fn bus(&self) -> &Bus {
        &self.bus
    }

    pub fn hal(&self) -> &Hal {
        &self.hal
    }

    pub fn hal_mut(&mut self) -> &mut Hal {
        &mut self.hal
    }

    pub fn clock(&self) -> &VirtualClock {
        &self.clock
    }

    pub fn commands(&self) -> CommandSender {
        self.commands.clone()
    }

    pub fn is_paused(&self) -> bool {
        self.paused
    }

    pub fn selected(&self) -> Option<BodyId> {
        self.selected
    }

    pub fn step_count(&self) -> u64 {
        self.world.step_count()
    }

    pub fn scene_graph(&self) -> SceneGraph {
        SceneGraph::build(&self.spec, &self.world)
    }

    fn publish_graph(&mut self) -> Result<(), RunError> {
        let json = serde_json::to_string(&self.scene_graph()).expect("scene graph serializes");
        self.graph_pub.publish_msg(&json, &self.clock)?;
        Ok(())
    }

    /// Applies every queued command. Called at step boundaries only.
    pub fn apply_commands(&mut self) {
        for (cmd, ack) in self.commands.take_all() {
            let kind = cmd.kind();
            let result = self.apply(cmd);
            if let Err(e) = &result {
                log::warn!("{kind}: {e}");
            }
            if let Some(ack) = ack {
                ack(CommandAck {
                    command: kind.to_string(),
                    step: self.world.step_count(),
                    ok: result.is_ok(),
                    error: result.err(),
                });
            }
        }
    }

    fn apply(&mut self, cmd: Command) -> Result<(), String> {
        match cmd {
            Command::ApplyWrench { body, mut wrench } => {
                wrench.body = body
                    .or(self.selected)
                    .ok_or("no body given and nothing selected")?;
                self.world.apply_wrench(&wrench).map_err(|e| e.to_string())
            }
            Command::Touch {
                instance,
                display,
                u,
                v,
                phase,
            } => {
                let event = TouchEvent {
                    display: display.clone(),
                    u,
                    v,
                    phase,
                    source: TouchSource::Ui,
                };
                self.hal
                    .publish_touch(&instance, &display, event, &self.clock)
                    .map_err(|e| e.to_string())
            }
            Command::Spawn { model, name, pose } => {
                let spec = self
                    .spec
                    .model(&model)
                    .ok_or_else(|| format!("unknown model `{model}`"))?
                    .clone();
                spawn(&mut self.world, &spec, pose, &name).map_err(|e| e.to_string())?;
                self.hal
                    .register_instance(&self.world, &name, &spec)
                    .map_err(|e| e.to_string())?;
                self.hal
                    .bind_all_virtual(&name)
                    .map_err(|e| e.to_string())?;
                self.publish_graph().map_err(|e| e.to_string())
            }
            Command::Pause => {
                self.paused = true;
                Ok(())
            }
            Command::Resume => {
                self.paused = false;
                self.manual_steps = 0;
                Ok(())
            }
            Command::StepN(n) => {
                self.paused = true;
                self.manual_steps += n;
                Ok(())
            }
            Command::Select(body) => {
                if let Some(id) = body {
                    let b = self.world.body(id).ok_or_else(|| format!("no body {id}"))?;
                    if b.is_static() {
                        return Err(format!("body {id} is static"));
                    }
                }
                self.selected = body;
                Ok(())
            }
        }
    }

    /// One physics step with device sampling, replay and app nodes.
    /// Queued commands are not applied; see [`Simulation::advance`].
    pub fn step(&mut self) -> Result<(), RunError> {
        self.step_inner(false)
    }

    fn step_inner(&mut self, manual: bool) -> Result<(), RunError> {
        self.hal.apply_commands(&mut self.world, &self.clock);
        for (_, w) in self.wrench_sub.drain_typed::<WrenchCommand>() {
            if let Err(e) = self.world.apply_wrench(&w) {
                log::warn!("wrench on {}: {e}", w.body);
            }
        }
        self.world.step().map_err(|source| RunError::Divergence {
            last_good_step: self.world.step_count(),
            source,
        })?;
        self.clock.tick(self.dt_ns);
        self.hal.after_step(&self.world, &self.clock)?;
        if let Some(r) = &mut self.replayer {
            r.pump(&self.clock)?;
        }
        for node in &mut self.nodes {
            node.spin(&self.clock)?;
        }
        if manual || self.world.step_count().is_multiple_of(self.snapshot_every) {
            self.state_pub
                .publish_msg(&self.world.snapshot(), &self.clock)?;
        }
        Ok(())
    }

    /// Applies queued commands, then steps unless paused. While paused only
    /// `step_n` budget is spent; those steps always publish a snapshot.
    /// Returns whether a step was taken.
    pub fn advance(&mut self) -> Result<bool, RunError> {
        self.apply_commands();
        if self.paused {
            if self.manual_steps == 0 {
                return Ok(false);
            }
            self.manual_steps -= 1;
            self.step_inner(true)?;
        } else {
            self.step_inner(false)?;
        }
        Ok(true)
    }

    /// Steps until `limit` steps have been taken (or forever), honoring
    /// pause, realtime pacing and `stop`. Returns the steps taken.
    pub fn run_loop(
        &mut self,
        limit: Option<u64>,
        mode: RunMode,
        stop: &AtomicBool,
    ) -> Result<(u64, Option<Pacing>), RunError> {
        self.run_loop_with(limit, mode, stop, |_| {})
    }

    /// [`Simulation::run_loop`] calling `after` on the simulation thread
    /// after every iteration, stepped or not.
    pub fn run_loop_with(
        &mut self,
        limit: Option<u64>,
        mode: RunMode,
        stop: &AtomicBool,
        mut after: impl FnMut(&mut Simulation),
    ) -> Result<(u64, Option<Pacing>), RunError> {
        let dt = self.world.dt();
        let mut taken = 0u64;
        let mut pacer = match mode {
            RunMode::Stepped => None,
            RunMode::Realtime(f) => Some(Pacer::new(dt / f)),
        };
        while limit.is_none_or(|l| taken < l) && !stop.load(Ordering::Relaxed) {
            if let Some(p) = &mut pacer {
                p.wait_turn();
            }
            let stepped = self.advance()?;
            after(self);
            if stepped {
                taken += 1;
            } else {
                if let Some(p) = &mut pacer {
                    p.rebase();
                }
                self.commands.wait(Duration::from_millis(20));
            }
        }
        Ok((taken, pacer.map(|p| p.stats())))
    }
}

/// Sleep-until-deadline pacing with drift correction: deadlines come from
/// a fixed base, so one late step does not delay the rest.
struct Pacer {
    period: Duration,
    base: Instant,
    ticks: u32,
    lag_total: Duration,
    lag_max: Duration,
    samples: u64,
}

impl Pacer {
    fn new(period_s: f64) -> Self {
        Self {
            period: Duration::from_secs_f64(period_s),
            base: Instant::now(),
            ticks: 0,
            lag_total: Duration::ZERO,
            lag_max: Duration::ZERO,
            samples: 0,
        }
    }

    fn wait_turn(&mut self) {
        let deadline = self.base + self.period * self.ticks;
        let now = Instant::now();
        if deadline > now {
            std::thread::sleep(deadline - now);
        } else {
            let lag = now - deadline;
            self.lag_total += lag;
            self.lag_max = self.lag_max.max(lag);
        }
        self.samples += 1;
        self.ticks += 1;
        // keep the multiplier small; rebasing does not move deadlines
        if self.ticks == 1 << 20 {
            self.base += self.period * self.ticks;
            self.ticks = 0;
        }
    }

    fn rebase(&mut self) {
        self.base = Instant::now();
        self.ticks = 0;
    }

    fn stats(&self) -> Pacing {
        Pacing {
            mean_lag_ms: if self.samples > 0 {
                self.lag_total.as_secs_f64() * 1e3 / self.samples as f64
            } else {
                0.0
            },
            max_lag_ms: self.lag_max.as_secs_f64() * 1e3,
        }
    }
}
