use std::collections::BTreeMap;

use super::bag::BagFile;
use super::bus::{Bus, MessageEnvelope, PublisherHandle};
use super::clock::VirtualClock;
use super::BusError;

/// Prefix applied to the original publisher id of replayed messages.
pub const REPLAY_PREFIX: &str = "replay:";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ReplayStats {
    pub messages_sent: usize,
    /// Virtual time spanned by the replay, in nanoseconds.
    pub virtual_duration: u64,
}

/// Re-publishes bag records when the clock reaches their scaled offsets.
///
/// Record `i` is due at `origin + (stamp_i - bag.start) / speed`, where
/// `origin` is the clock reading at the first [`Replayer::pump`].
#[derive(Debug)]
pub struct Replayer {
    records: Vec<MessageEnvelope>,
    publishers: BTreeMap<(String, String), PublisherHandle>,
    start: u64,
    duration: u64,
    speed: f64,
    origin: Option<u64>,
    cursor: usize,
}

impl Replayer {
    /// Advertises every (remapped) topic of the bag under `replay:<node>`.
    pub fn new(
        bus: &Bus,
        bag: &BagFile,
        speed: f64,
        remap: &BTreeMap<String, String>,
    ) -> Result<Self, BusError> {
        if !(speed.is_finite() && speed > 0.0) {
            return Err(BusError::BadSpeed(speed));
        }
        let mut records = Vec::with_capacity(bag.records.len());
        let mut publishers = BTreeMap::new();
        for rec in &bag.records {
            let topic = remap
                .get(&rec.topic)
                .cloned()
                .unwrap_or_else(|| rec.topic.clone());
            let node = format!("{REPLAY_PREFIX}{}", rec.publisher);
            let key = (node.clone(), topic.clone());
            if let std::collections::btree_map::Entry::Vacant(e) = publishers.entry(key) {
                let handle = bus.advertise(&node, &topic, &rec.type_tag)?;
                e.insert(handle);
            }
            let mut rec = rec.clone();
            rec.topic = topic;
            rec.publisher = node;
            records.push(rec);
        }
        Ok(Self {
            records,
            publishers,
            start: bag.start,
            duration: bag.duration,
            speed,
            origin: None,
            cursor: 0,
        })
    }

    fn offset_of(&self, stamp: u64) -> u64 {
        ((stamp - self.start) as f64 / self.speed).round() as u64
    }

    /// Clock time at which the next pending record becomes due.
    pub fn next_due(&self) -> Option<u64> {
        let rec = self.records.get(self.cursor)?;
        Some(self.origin.unwrap_or(0) + self.offset_of(rec.stamp))
    }

    pub fn is_finished(&self) -> bool {
        self.cursor >= self.records.len()
    }

    pub fn sent(&self) -> usize {
        self.cursor
    }

    pub fn scaled_duration(&self) -> u64 {
        self.offset_of(self.start + self.duration)
    }

    /// Topics this replayer publishes on.
    pub fn topics(&self) -> impl Iterator<Item = &str> {
        self.publishers.keys().map(|(_, t)| t.as_str())
    }

    /// Publishes every record that is due at `clock.now()`. Returns how many were sent.
    pub fn pump(&mut self, clock: &VirtualClock) -> Result<usize, BusError> {
        let origin = *self.origin.get_or_insert(clock.now());
        let mut sent = 0;
        while let Some(rec) = self.records.get(self.cursor) {
            if origin + self.offset_of(rec.stamp) > clock.now() {
                break;
            }
            let handle = &self.publishers[&(rec.publisher.clone(), rec.topic.clone())];
            handle.publish(rec.payload.clone(), clock)?;
            self.cursor += 1;
            sent += 1;
        }
        Ok(sent)
    }
}

/// Replays a whole bag on a stepped clock, advancing the clock to each
/// record's due time.
pub fn replay(
    bus: &Bus,
    bag: &BagFile,
    clock: &mut VirtualClock,
    speed: f64,
    remap: &BTreeMap<String, String>,
) -> Result<ReplayStats, BusError> {
    let mut replayer = Replayer::new(bus, bag, speed, remap)?;
    let origin = clock.now();
    replayer.pump(clock)?;
    while let Some(due) = replayer.next_due() {
        clock.advance_to(due);
        replayer.pump(clock)?;
    }
    clock.advance_to(origin + replayer.scaled_duration());
    Ok(ReplayStats {
        messages_sent: replayer.sent(),
        virtual_duration: clock.now() - origin,
    })
}
