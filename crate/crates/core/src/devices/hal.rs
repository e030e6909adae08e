use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::battery::Battery;
use super::descriptor::{DeviceDescriptor, DeviceKind, DisplaySpec};
use super::display::map_touch;
use super::samples::{BatteryState, DisplayFrame, TouchEvent, TouchPhase, TouchSource};
use super::sensors::{sample_accelerometer, sample_contact, sample_proximity};
use super::{device_topic, DeviceError, CH_BATTERY, CH_CMD, CH_FRAME, CH_SAMPLE, CH_TOUCH};
use crate::msgbus::{
    BagFile, Bus, PublisherHandle, Subscription, VirtualClock, Wire, REPLAY_PREFIX,
};
use crate::physics::{BodyId, World};
use crate::scene::ModelSpec;

/// Replayed sample rates may differ from the descriptor by this fraction.
pub const RATE_TOLERANCE: f64 = 0.10;

const CMD_QUEUE_DEPTH: usize = 16;

/// Where a device's samples come from.
#[derive(Clone, Debug)]
pub enum Backend {
    /// Sampled from the physics world at the descriptor rate.
    Virtual,
    /// Re-published from a recording. `remap` maps recorded topic names to
    /// this device's topics.
    Replay {
        bag: BagFile,
        remap: BTreeMap<String, String>,
    },
    /// Raw payloads at offsets (ns) from the bind time, on the sample channel.
    Scripted(Vec<(u64, Vec<u8>)>),
}

impl Backend {
    pub fn replay(bag: BagFile) -> Self {
        Backend::Replay {
            bag,
            remap: BTreeMap::new(),
        }
    }

    pub fn scripted<T: Wire>(samples: impl IntoIterator<Item = (u64, T)>) -> Self {
        Backend::Scripted(
            samples
                .into_iter()
                .map(|(t, s)| (t, s.to_bytes()))
                .collect(),
        )
    }
}

/// Proof of an exclusive binding; pass back to [`Hal::unbind`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BindingHandle {
    pub instance: String,
    pub device: String,
    id: u64,
}

struct StreamRecord {
    due: u64,
    channel: &'static str,
    payload: Vec<u8>,
}

enum BackendState {
    Virtual {
        publishers: BTreeMap<&'static str, PublisherHandle>,
    },
    Stream {
        node: String,
        records: Vec<StreamRecord>,
        publishers: BTreeMap<&'static str, PublisherHandle>,
        cursor: usize,
    },
}

struct Binding {
    id: u64,
    state: BackendState,
}

struct DeviceSlot {
    instance: String,
    desc: DeviceDescriptor,
    body: BodyId,
    /// Steps between samples.
    period: u64,
    rng: ChaCha8Rng,
    battery: Option<Battery>,
    cmd: Option<Subscription>,
    binding: Option<Binding>,
    /// Messages published since the powering battery last ticked.
    published: u64,
}

struct DisplaySlot {
    instance: String,
    spec: DisplaySpec,
    body: BodyId,
    frame: Option<DisplayFrame>,
    frame_pub: PublisherHandle,
    touch_pub: PublisherHandle,
    cmd: Subscription,
    published: u64,
    /// Pixel under the current contact-derived touch.
    touching: Option<(u32, u32)>,
}

fn channels(kind: &DeviceKind) -> &'static [(&'static str, &'static str)] {
    match kind {
        DeviceKind::Accelerometer { .. } => &[(CH_SAMPLE, "AccelSample")],
        DeviceKind::Proximity { .. } => &[(CH_SAMPLE, "ProximitySample")],
        DeviceKind::Contact => &[(CH_SAMPLE, "ContactSample")],
        DeviceKind::Radius => &[(CH_SAMPLE, "Float64")],
        DeviceKind::Battery { .. } => &[(CH_BATTERY, "BatteryState")],
    }
}

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

/// Node id of the virtual driver for a device.
pub fn driver_node(instance: &str, device: &str) -> String {
    format!("hal/{instance}/{device}")
}

/// Node id owning a device's command subscription; it outlives bindings.
pub fn actuator_node(instance: &str, device: &str) -> String {
    format!("hal/{instance}/{device}/actuator")
}

/// Hardware-abstraction layer: owns every device topic of the spawned
/// instances and routes it to exactly one backend.
pub struct Hal {
    bus: Bus,
    seed: u64,
    dt: f64,
    now: u64,
    devices: BTreeMap<(String, String), DeviceSlot>,
    displays: BTreeMap<(String, String), DisplaySlot>,
    next_binding: u64,
}

impl std::fmt::Debug for Hal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Hal")
            .field("devices", &self.devices.keys().collect::<Vec<_>>())
            .field("displays", &self.displays.keys().collect::<Vec<_>>())
            .finish()
    }
}

impl Hal {
    pub fn new(bus: Bus, dt: f64, seed: u64) -> Self {
        Self {
            bus,
            seed,
            dt,
            now: 0,
            devices: BTreeMap::new(),
            displays: BTreeMap::new(),
            next_binding: 1,
        }
    }

    pub fn bus(&self) -> &Bus {
        &self.bus
    }

    /// Registers the devices and displays of a spawned instance. Devices
    /// start unbound; displays are always simulation-backed.
    pub fn register_instance(
        &mut self,
        world: &World,
        instance: &str,
        model: &ModelSpec,
    ) -> Result<(), DeviceError> {
        let inst = world
            .instance(instance)
            .ok_or_else(|| DeviceError::NoSuchDevice(format!("instance `{instance}`")))?;
        if self
            .devices
            .keys()
            .chain(self.displays.keys())
            .any(|(i, _)| i == instance)
        {
            return Err(DeviceError::AlreadyBound(format!(
                "instance `{instance}` is already registered"
            )));
        }
        let body_of = |link: &str| {
            inst.links
                .get(link)
                .copied()
                .ok_or_else(|| DeviceError::NoSuchDevice(format!("link `{link}` of `{instance}`")))
        };
        for desc in &model.devices {
            let body = body_of(&desc.link)?;
            let cmd = match desc.kind {
                DeviceKind::Radius => Some(self.bus.subscribe(
                    &actuator_node(instance, &desc.id),
                    &device_topic(instance, &desc.id, CH_CMD),
                    f64::TYPE_TAG,
                    CMD_QUEUE_DEPTH,
                )?),
                _ => None,
            };
            let battery = match desc.kind {
                DeviceKind::Battery {
                    capacity_j,
                    cost_j,
                    idle_w,
                } => Some(Battery::full(capacity_j, cost_j, idle_w)),
                _ => None,
            };
            let topic = device_topic(instance, &desc.id, channels(&desc.kind)[0].0);
            let period = (1.0 / (desc.rate * self.dt)).round().max(1.0) as u64;
            self.devices.insert(
                (instance.to_string(), desc.id.clone()),
                DeviceSlot {
                    instance: instance.to_string(),
                    desc: desc.clone(),
                    body,
                    period,
                    rng: ChaCha8Rng::seed_from_u64(self.seed ^ fnv1a(&topic)),
                    battery,
                    cmd,
                    binding: None,
                    published: 0,
                },
            );
        }
        for spec in &model.displays {
            let body = body_of(&spec.link)?;
            let node = driver_node(instance, &spec.id);
            let frame_pub = self.bus.advertise_latched(
                &node,
                &device_topic(instance, &spec.id, CH_FRAME),
                DisplayFrame::TYPE_TAG,
            )?;
            let touch_pub = self.bus.advertise(
                &node,
                &device_topic(instance, &spec.id, CH_TOUCH),
                TouchEvent::TYPE_TAG,
            )?;
            let cmd = self.bus.subscribe(
                &node,
                &device_topic(instance, &spec.id, CH_CMD),
                DisplayFrame::TYPE_TAG,
                CMD_QUEUE_DEPTH,
            )?;
            self.displays.insert(
                (instance.to_string(), spec.id.clone()),
                DisplaySlot {
                    instance: instance.to_string(),
                    spec: spec.clone(),
                    body,
                    frame: None,
                    frame_pub,
                    touch_pub,
                    cmd,
                    published: 0,
                    touching: None,
                },
            );
        }
        Ok(())
    }

    /// Binds every unbound device of `instance` to the virtual backend.
    pub fn bind_all_virtual(&mut self, instance: &str) -> Result<Vec<BindingHandle>, DeviceError> {
        let ids: Vec<String> = self
            .devices
            .values()
            .filter(|s| s.instance == instance && s.binding.is_none())
            .map(|s| s.desc.id.clone())
            .collect();
        ids.iter()
            .map(|id| self.bind(instance, id, Backend::Virtual))
            .collect()
    }

    pub fn descriptor(&self, instance: &str, device: &str) -> Option<&DeviceDescriptor> {
        self.devices
            .get(&(instance.to_string(), device.to_string()))
            .map(|s| &s.desc)
    }

    pub fn display_spec(&self, instance: &str, display: &str) -> Option<&DisplaySpec> {
        self.displays
            .get(&(instance.to_string(), display.to_string()))
            .map(|s| &s.spec)
    }

    /// `(instance, display)` pairs in sorted order.
    pub fn displays(&self) -> impl Iterator<Item = (&str, &DisplaySpec)> {
        self.displays
            .values()
            .map(|s| (s.instance.as_str(), &s.spec))
    }

    /// Attaches a backend. Exactly one backend may produce a device's topics.
    pub fn bind(
        &mut self,
        instance: &str,
        device: &str,
        backend: Backend,
    ) -> Result<BindingHandle, DeviceError> {
        let key = (instance.to_string(), device.to_string());
        let now = self.now;
        let dt = self.dt;
        let bus = self.bus.clone();
        let slot = self
            .devices
            .get_mut(&key)
            .ok_or_else(|| DeviceError::NoSuchDevice(format!("{instance}/{device}")))?;
        if slot.binding.is_some() {
            return Err(DeviceError::AlreadyBound(format!("{instance}/{device}")));
        }
        let chans = channels(&slot.desc.kind);
        let state = match backend {
            Backend::Virtual => {
                let node = driver_node(instance, device);
                let mut publishers = BTreeMap::new();
                for &(ch, tag) in chans {
                    publishers.insert(
                        ch,
                        bus.advertise(&node, &device_topic(instance, device, ch), tag)?,
                    );
                }
                BackendState::Virtual { publishers }
            }
            Backend::Replay { bag, remap } => {
                // the first record lands on the device's next sampling instant
                let dt_ns = (dt * 1e9).round() as u64;
                let origin = (now / dt_ns / slot.period + 1) * slot.period * dt_ns;
                let mut records = Vec::new();
                for rec in &bag.records {
                    let topic = remap.get(&rec.topic).unwrap_or(&rec.topic);
                    let Some(&(ch, tag)) = chans
                        .iter()
                        .find(|(ch, _)| *topic == device_topic(instance, device, ch))
                    else {
                        continue;
                    };
                    if rec.type_tag != tag {
                        return Err(DeviceError::Bus(crate::msgbus::BusError::TypeTagConflict {
                            topic: topic.clone(),
                            registered: tag.to_string(),
                            requested: rec.type_tag.clone(),
                        }));
                    }
                    records.push(StreamRecord {
                        due: origin + (rec.stamp - bag.start),
                        channel: ch,
                        payload: rec.payload.clone(),
                    });
                }
                check_rate(&records, slot.desc.rate, dt)?;
                let node = format!("{REPLAY_PREFIX}{}", driver_node(instance, device));
                stream_state(&bus, node, instance, device, chans, records)?
            }
            Backend::Scripted(samples) => {
                let (ch, _) = chans[0];
                let mut records: Vec<StreamRecord> = samples
                    .into_iter()
                    .map(|(t, payload)| StreamRecord {
                        due: now + t,
                        channel: ch,
                        payload,
                    })
                    .collect();
                records.sort_by_key(|r| r.due);
                let node = format!("script:{}", driver_node(instance, device));
                stream_state(&bus, node, instance, device, chans, records)?
            }
        };
        let id = self.next_binding;
        self.next_binding += 1;
        slot.binding = Some(Binding { id, state });
        Ok(BindingHandle {
            instance: instance.to_string(),
            device: device.to_string(),
            id,
        })
    }

    pub fn unbind(&mut self, handle: &BindingHandle) -> Result<(), DeviceError> {
        let key = (handle.instance.clone(), handle.device.clone());
        let slot = self.devices.get_mut(&key).ok_or_else(|| {
            DeviceError::NoSuchDevice(format!("{}/{}", handle.instance, handle.device))
        })?;
        match &slot.binding {
            Some(b) if b.id == handle.id => {}
            _ => {
                return Err(DeviceError::NoSuchDevice(format!(
                    "stale binding for {}/{}",
                    key.0, key.1
                )))
            }
        }
        let binding = slot.binding.take().expect("checked");
        let node = match binding.state {
            BackendState::Virtual { .. } => driver_node(&key.0, &key.1),
            BackendState::Stream { node, .. } => node,
        };
        self.bus.shutdown_node(&node);
        Ok(())
    }

    /// Turns contacts on touch displays into down/move/up events. The
    /// strongest contact on a display wins.
    fn contact_touches(&mut self, world: &World, clock: &VirtualClock) -> Result<(), DeviceError> {
        let mut events = Vec::new();
        for ((instance, id), slot) in &self.displays {
            if !slot.spec.touch {
                continue;
            }
            let Some(body) = world.body(slot.body) else {
                continue;
            };
            let best = world
                .last_contacts()
                .iter()
                .filter(|c| c.involves(slot.body) && c.applied_normal_impulse > 0.0)
                .filter_map(|c| {
                    map_touch(&slot.spec, &body.state.pose, c.point)
                        .ok()
                        .map(|px| (c.applied_normal_impulse, px))
                })
                .max_by(|a, b| a.0.total_cmp(&b.0))
                .map(|(_, px)| px);
            let phase = match (slot.touching, best) {
                (None, Some(_)) => TouchPhase::Down,
                (Some(old), Some(new)) if old != new => TouchPhase::Move,
                (Some(_), None) => TouchPhase::Up,
                _ => continue,
            };
            let (u, v) = best.or(slot.touching).expect("one side is set");
            events.push((
                instance.clone(),
                id.clone(),
                best,
                TouchEvent {
                    display: id.clone(),
                    u,
                    v,
                    phase,
                    source: TouchSource::ContactDerived,
                },
            ));
        }
        for (instance, id, now, event) in events {
            let key = (instance.clone(), id.clone());
            self.displays.get_mut(&key).expect("listed").touching = now;
            match self.publish_touch(&instance, &id, event, clock) {
                Ok(()) | Err(DeviceError::BatteryDepleted(_)) => {}
                Err(e) => return Err(e),
            }
        }
        Ok(())
    }

    fn battery_depleted(&self, instance: &str, battery: Option<&String>) -> bool {
        battery
            .and_then(|b| self.devices.get(&(instance.to_string(), b.clone())))
            .and_then(|s| s.battery)
            .is_some_and(|b| b.depleted)
    }

    pub fn battery_state(&self, instance: &str, battery: &str) -> Option<BatteryState> {
        let slot = self
            .devices
            .get(&(instance.to_string(), battery.to_string()))?;
        slot.battery.map(|b| BatteryState {
            stamp: self.now,
            charge_fraction: b.charge_fraction(),
            depleted: b.depleted,
        })
    }

    /// Recharges a battery device; wired devices resume once it holds charge.
    pub fn charge_battery(
        &mut self,
        instance: &str,
        battery: &str,
        amount_j: f64,
    ) -> Result<BatteryState, DeviceError> {
        let now = self.now;
        let slot = self
            .devices
            .get_mut(&(instance.to_string(), battery.to_string()))
            .ok_or_else(|| DeviceError::NoSuchDevice(format!("{instance}/{battery}")))?;
        let b = slot.battery.as_mut().ok_or_else(|| {
            DeviceError::NoSuchDevice(format!("{instance}/{battery} is not a battery"))
        })?;
        b.charge(amount_j);
        Ok(BatteryState {
            stamp: now,
            charge_fraction: b.charge_fraction(),
            depleted: b.depleted,
        })
    }

    /// Makes `frame` the display's current texture and re-publishes it.
    pub fn display_present(
        &mut self,
        instance: &str,
        display: &str,
        frame: DisplayFrame,
        clock: &VirtualClock,
    ) -> Result<(), DeviceError> {
        let key = (instance.to_string(), display.to_string());
        let battery = self
            .displays
            .get(&key)
            .ok_or_else(|| DeviceError::NoSuchDevice(format!("{instance}/{display}")))?
            .spec
            .battery
            .clone();
        if self.battery_depleted(instance, battery.as_ref()) {
            return Err(DeviceError::BatteryDepleted(format!(
                "{instance}/{display}"
            )));
        }
        let slot = self.displays.get_mut(&key).expect("checked");
        if frame.width != slot.spec.width
            || frame.height != slot.spec.height
            || frame.pixels.len() != slot.spec.frame_len()
        {
            return Err(DeviceError::DimensionMismatch {
                expected: (slot.spec.width, slot.spec.height),
                got: (frame.width, frame.height),
            });
        }
        let frame = DisplayFrame {
            display: display.to_string(),
            ..frame
        };
        slot.frame_pub.publish_msg(&frame, clock)?;
        slot.published += 1;
        slot.frame = Some(frame);
        Ok(())
    }

    /// Current texture of a display, if any frame was presented.
    pub fn display_frame(&self, instance: &str, display: &str) -> Option<&DisplayFrame> {
        self.displays
            .get(&(instance.to_string(), display.to_string()))?
            .frame
            .as_ref()
    }

    /// Maps a world point to a pixel and publishes the touch event.
    pub fn touch(
        &mut self,
        world: &World,
        instance: &str,
        display: &str,
        world_point: glam::DVec3,
        phase: TouchPhase,
        source: TouchSource,
        clock: &VirtualClock,
    ) -> Result<TouchEvent, DeviceError> {
        let key = (instance.to_string(), display.to_string());
        let slot = self
            .displays
            .get(&key)
            .ok_or_else(|| DeviceError::NoSuchDevice(format!("{instance}/{display}")))?;
        if !slot.spec.touch {
            return Err(DeviceError::NoSuchDevice(format!(
                "{instance}/{display} is not touch-sensitive"
            )));
        }
        let pose = world
            .body(slot.body)
            .ok_or_else(|| DeviceError::NoSuchDevice(format!("{instance}/{display}")))?
            .state
            .pose;
        let (u, v) = map_touch(&slot.spec, &pose, world_point)?;
        let event = TouchEvent {
            display: display.to_string(),
            u,
            v,
            phase,
            source,
        };
        self.publish_touch(instance, display, event.clone(), clock)?;
        Ok(event)
    }

    /// Publishes a touch already expressed in pixels (UI clicks).
    pub fn publish_touch(
        &mut self,
        instance: &str,
        display: &str,
        event: TouchEvent,
        clock: &VirtualClock,
    ) -> Result<(), DeviceError> {
        let key = (instance.to_string(), display.to_string());
        let battery = self
            .displays
            .get(&key)
            .ok_or_else(|| DeviceError::NoSuchDevice(format!("{instance}/{display}")))?
            .spec
            .battery
            .clone();
        if self.battery_depleted(instance, battery.as_ref()) {
            return Err(DeviceError::BatteryDepleted(format!(
                "{instance}/{display}"
            )));
        }
        let slot = self.displays.get_mut(&key).expect("checked");
        if event.u >= slot.spec.width || event.v >= slot.spec.height {
            return Err(DeviceError::OffSurface(format!(
                "pixel ({}, {}) outside the display",
                event.u, event.v
            )));
        }
        slot.touch_pub.publish_msg(&event, clock)?;
        slot.published += 1;
        Ok(())
    }

    /// Applies queued actuator commands. Call at a step boundary, before stepping.
    pub fn apply_commands(&mut self, world: &mut World, clock: &VirtualClock) {
        let mut frames = Vec::new();
        for ((instance, id), slot) in &self.displays {
            for (_, frame) in slot.cmd.drain_typed::<DisplayFrame>() {
                frames.push((instance.clone(), id.clone(), frame));
            }
        }
        for (instance, id, frame) in frames {
            if let Err(e) = self.display_present(&instance, &id, frame, clock) {
                log::warn!("display {instance}/{id}: {e}");
            }
        }
        let mut radii = Vec::new();
        for slot in self.devices.values() {
            if let Some(cmd) = &slot.cmd {
                for (_, r) in cmd.drain_typed::<f64>() {
                    radii.push((
                        slot.instance.clone(),
                        slot.desc.battery.clone(),
                        slot.body,
                        r,
                    ));
                }
            }
        }
        for (instance, battery, body, r) in radii {
            if self.battery_depleted(&instance, battery.as_ref()) {
                continue;
            }
            if let Err(e) = world.set_sphere_radius(body, r) {
                log::warn!("radius command on {instance}: {e}");
            }
        }
    }

    /// Samples, replays and drains batteries for the step that just ended.
    /// `clock` must already read the post-step time.
    pub fn after_step(&mut self, world: &World, clock: &VirtualClock) -> Result<(), DeviceError> {
        self.now = clock.now();
        let step = world.step_count();
        let stamp = clock.now();
        let depleted: Vec<(String, String)> = self
            .devices
            .iter()
            .filter(|(_, s)| s.battery.is_some_and(|b| b.depleted))
            .map(|(k, _)| k.clone())
            .collect();
        for slot in self.devices.values_mut() {
            if matches!(slot.desc.kind, DeviceKind::Battery { .. }) {
                continue;
            }
            if let Some(b) = &slot.desc.battery {
                if depleted.contains(&(slot.instance.clone(), b.clone())) {
                    continue;
                }
            }
            let Some(binding) = &mut slot.binding else {
                continue;
            };
            match &mut binding.state {
                BackendState::Virtual { publishers } => {
                    if !step.is_multiple_of(slot.period) {
                        continue;
                    }
                    let publisher = &publishers[CH_SAMPLE];
                    let m = &slot.desc.pose;
                    match slot.desc.kind {
                        DeviceKind::Accelerometer { noise_sigma } => {
                            let s = sample_accelerometer(
                                world,
                                slot.body,
                                m,
                                noise_sigma,
                                &mut slot.rng,
                                stamp,
                            )?;
                            publisher.publish_msg(&s, clock)?;
                        }
                        DeviceKind::Proximity { max_range } => {
                            let s = sample_proximity(world, slot.body, m, max_range, stamp)?;
                            publisher.publish_msg(&s, clock)?;
                        }
                        DeviceKind::Contact => {
                            let s = sample_contact(world, slot.body, stamp)?;
                            publisher.publish_msg(&s, clock)?;
                        }
                        DeviceKind::Radius => {
                            let r = match world.body(slot.body).map(|b| b.shape) {
                                Some(crate::physics::Shape::Sphere { radius }) => radius,
                                _ => 0.0,
                            };
                            publisher.publish_msg(&r, clock)?;
                        }
                        DeviceKind::Battery { .. } => unreachable!(),
                    }
                    slot.published += 1;
                }
                BackendState::Stream {
                    records,
                    publishers,
                    cursor,
                    ..
                } => {
                    while let Some(rec) = records.get(*cursor) {
                        if rec.due > clock.now() {
                            break;
                        }
                        publishers[rec.channel].publish(rec.payload.clone(), clock)?;
                        slot.published += 1;
                        *cursor += 1;
                    }
                }
            }
        }

        self.contact_touches(world, clock)?;

        // batteries drain by idle time and the traffic of their devices
        let mut traffic: BTreeMap<(String, String), u64> = BTreeMap::new();
        for slot in self.devices.values_mut() {
            if let Some(b) = &slot.desc.battery {
                *traffic
                    .entry((slot.instance.clone(), b.clone()))
                    .or_default() += slot.published;
            }
            slot.published = 0;
        }
        for slot in self.displays.values_mut() {
            if let Some(b) = &slot.spec.battery {
                *traffic
                    .entry((slot.instance.clone(), b.clone()))
                    .or_default() += slot.published;
            }
            slot.published = 0;
        }
        for (key, slot) in self.devices.iter_mut() {
            let Some(battery) = &mut slot.battery else {
                continue;
            };
            battery.tick(self.dt, traffic.get(key).copied().unwrap_or(0));
            let state = BatteryState {
                stamp,
                charge_fraction: battery.charge_fraction(),
                depleted: battery.depleted,
            };
            if let Some(binding) = &mut slot.binding {
                match &mut binding.state {
                    BackendState::Virtual { publishers } => {
                        if step.is_multiple_of(slot.period) {
                            publishers[CH_BATTERY].publish_msg(&state, clock)?;
                        }
                    }
                    BackendState::Stream {
                        records,
                        publishers,
                        cursor,
                        ..
                    } => {
                        while let Some(rec) = records.get(*cursor) {
                            if rec.due > clock.now() {
                                break;
                            }
                            publishers[rec.channel].publish(rec.payload.clone(), clock)?;
                            *cursor += 1;
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

fn stream_state(
    bus: &Bus,
    node: String,
    instance: &str,
    device: &str,
    chans: &[(&'static str, &'static str)],
    records: Vec<StreamRecord>,
) -> Result<BackendState, DeviceError> {
    let mut publishers = BTreeMap::new();
    for &(ch, tag) in chans {
        publishers.insert(
            ch,
            bus.advertise(&node, &device_topic(instance, device, ch), tag)?,
        );
    }
    Ok(BackendState::Stream {
        node,
        records,
        publishers,
        cursor: 0,
    })
}

/// Mean rate of a recorded stream against the descriptor rate.
fn check_rate(records: &[StreamRecord], rate: f64, dt: f64) -> Result<(), DeviceError> {
    if records.len() < 2 {
        return Ok(());
    }
    let span = (records[records.len() - 1].due - records[0].due) as f64 * 1e-9;
    // a single-step span cannot resolve rates above 1/dt
    if span < dt {
        return Err(DeviceError::RateMismatch {
            descriptor: rate,
            measured: f64::INFINITY,
        });
    }
    let measured = (records.len() - 1) as f64 / span;
    if (measured - rate).abs() > RATE_TOLERANCE * rate {
        return Err(DeviceError::RateMismatch {
            descriptor: rate,
            measured,
        });
    }
    Ok(())
}
