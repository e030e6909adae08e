use std::collections::BTreeMap;

use super::face::FaceId;
use super::messages::{Adjacency, FaceRef};
use super::AppNode;
use crate::devices::{device_topic, DeviceKind, ProximitySample, CH_SAMPLE};
use crate::msgbus::{Bus, BusError, PublisherHandle, Subscription, VirtualClock};
use crate::scene::ModelSpec;

/// Consecutive samples needed to switch a face between near and far.
pub const DEBOUNCE: u32 = 3;

/// Two adjacent faces pair up when their readings agree within this (m).
pub const PAIR_TOLERANCE: f64 = 2e-3;

#[derive(Clone, Copy, Debug, Default)]
struct Track {
    adjacent: bool,
    /// Samples in a row that disagree with `adjacent`.
    run: u32,
    last: Option<f64>,
}

/// Debounced per-face proximity state. A face turns adjacent after
/// [`DEBOUNCE`] readings within the threshold and turns back after
/// [`DEBOUNCE`] readings beyond it.
#[derive(Clone, Debug)]
pub struct NeighborDetector {
    pub threshold: f64,
    tracks: BTreeMap<FaceRef, Track>,
}

impl NeighborDetector {
    pub fn new(threshold: f64) -> Self {
        Self {
            threshold,
            tracks: BTreeMap::new(),
        }
    }

    /// Feeds one sample; returns true if the face changed state.
    pub fn update(&mut self, face: FaceRef, distance: Option<f64>) -> bool {
        let near = distance.is_some_and(|d| d <= self.threshold);
        let t = self.tracks.entry(face).or_default();
        t.last = distance;
        if near == t.adjacent {
            t.run = 0;
            return false;
        }
        t.run += 1;
        if t.run >= DEBOUNCE {
            t.adjacent = near;
            t.run = 0;
            return true;
        }
        false
    }

    pub fn is_adjacent(&self, face: &FaceRef) -> bool {
        self.tracks.get(face).is_some_and(|t| t.adjacent)
    }

    /// Adjacent faces with their latest reading.
    pub fn adjacent_faces(&self) -> Vec<(FaceRef, Option<f64>)> {
        self.tracks
            .iter()
            .filter(|(_, t)| t.adjacent)
            .map(|(f, t)| (f.clone(), t.last))
            .collect()
    }

    /// Adjacent faces of different cubes matched by agreeing distance,
    /// closest agreement first. Each face joins at most one pair.
    pub fn pairs(&self) -> Adjacency {
        let faces = self.adjacent_faces();
        let mut candidates = Vec::new();
        for (i, (a, da)) in faces.iter().enumerate() {
            for (b, db) in &faces[i + 1..] {
                if a.instance == b.instance {
                    continue;
                }
                let gap = match (da, db) {
                    (Some(x), Some(y)) => (x - y).abs(),
                    // a face that just went out of range keeps its pairing
                    _ => PAIR_TOLERANCE,
                };
                if gap <= PAIR_TOLERANCE {
                    candidates.push((gap, a.clone(), b.clone()));
                }
            }
        }
        candidates.sort_by(|x, y| {
            x.0.total_cmp(&y.0)
                .then_with(|| (&x.1, &x.2).cmp(&(&y.1, &y.2)))
        });
        let mut used = std::collections::BTreeSet::new();
        let mut pairs = Vec::new();
        for (_, a, b) in candidates {
            if used.contains(&a) || used.contains(&b) {
                continue;
            }
            used.insert(a.clone());
            used.insert(b.clone());
            pairs.push((a, b));
        }
        pairs.sort();
        Adjacency { pairs }
    }
}

/// Proximity sensors of every cube, turned into an adjacency set on
/// `/app/neighbor/adjacency`.
pub struct NeighborApp {
    name: String,
    detector: NeighborDetector,
    inputs: Vec<(FaceRef, Subscription)>,
    output: PublisherHandle,
    last: Option<Adjacency>,
}

/// Proximity devices of a model and the face each one looks out of.
pub fn proximity_faces(model: &ModelSpec) -> Vec<(String, FaceId)> {
    model
        .devices
        .iter()
        .filter(|d| matches!(d.kind, DeviceKind::Proximity { .. }))
        .filter_map(|d| {
            let link = model.link(&d.link)?;
            let ray = link.pose.orientation * (d.pose.orientation * glam::DVec3::X);
            let face = FaceId::ALL
                .into_iter()
                .find(|f| f.normal().dot(ray) > 1.0 - 1e-6)?;
            Some((d.id.clone(), face))
        })
        .collect()
}

impl NeighborApp {
    /// `cubes` lists each instance with its (device id, face) sensors.
    pub fn new(
        bus: &Bus,
        cubes: &[(String, Vec<(String, FaceId)>)],
        threshold: f64,
    ) -> Result<Self, BusError> {
        let name = "app/neighbor".to_string();
        let mut inputs = Vec::new();
        for (inst, sensors) in cubes {
            for (dev, face) in sensors {
                let sub = bus.subscribe_typed::<ProximitySample>(
                    &name,
                    &device_topic(inst, dev, CH_SAMPLE),
                    64,
                )?;
                inputs.push((FaceRef::new(inst.clone(), *face), sub));
            }
        }
        let output = bus.advertise_typed::<Adjacency>(&name, "/app/neighbor/adjacency")?;
        Ok(Self {
            name,
            detector: NeighborDetector::new(threshold),
            inputs,
            output,
            last: None,
        })
    }

    pub fn detector(&self) -> &NeighborDetector {
        &self.detector
    }
}

impl AppNode for NeighborApp {
    fn name(&self) -> &str {
        &self.name
    }

    fn spin(&mut self, clock: &VirtualClock) -> Result<(), BusError> {
        let mut batch: Vec<(u64, FaceRef, Option<f64>)> = Vec::new();
        for (face, sub) in &self.inputs {
            for (env, s) in sub.drain_typed::<ProximitySample>() {
                batch.push((env.stamp, face.clone(), s.distance));
            }
        }
        batch.sort_by(|a, b| (a.0, &a.1).cmp(&(b.0, &b.1)));
        let mut i = 0;
        while i < batch.len() {
            let stamp = batch[i].0;
            while i < batch.len() && batch[i].0 == stamp {
                let (_, face, d) = &batch[i];
                self.detector.update(face.clone(), *d);
                i += 1;
            }
            let now = self.detector.pairs();
            if self.last.as_ref() != Some(&now) {
                self.output.publish_msg(&now, clock)?;
                self.last = Some(now);
            }
        }
        Ok(())
    }
}
