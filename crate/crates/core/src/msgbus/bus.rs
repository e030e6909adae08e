use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::io::Write;
use std::sync::{mpsc, Arc, Mutex, MutexGuard, Weak};
use std::time::Duration;

use super::bag::BagFile;
use super::clock::VirtualClock;
use super::codec::Wire;
use super::topic::{is_valid_topic, TopicPattern};
use super::BusError;

pub type NodeId = String;

/// Default subscriber queue depth.
pub const DEFAULT_QUEUE_DEPTH: usize = 64;

/// A typed, timestamped, sequence-numbered payload on a named topic.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MessageEnvelope {
    pub topic: String,
    pub type_tag: String,
    pub publisher: NodeId,
    /// Per-(publisher, topic) counter starting at 0.
    pub seq: u64,
    /// Virtual time in nanoseconds.
    pub stamp: u64,
    pub payload: Vec<u8>,
}

impl MessageEnvelope {
    pub fn decode<T: Wire>(&self) -> Result<T, BusError> {
        if self.type_tag != T::TYPE_TAG {
            return Err(BusError::TypeTagConflict {
                topic: self.topic.clone(),
                registered: self.type_tag.clone(),
                requested: T::TYPE_TAG.to_owned(),
            });
        }
        T::from_bytes(&self.payload).map_err(|e| BusError::Decode(e.to_string()))
    }
}

pub type ServiceFn = dyn Fn(&[u8]) -> Vec<u8> + Send + Sync;

struct SubscriberEntry {
    id: u64,
    node: NodeId,
    queue: Arc<Mutex<SubscriberQueue>>,
}

struct TopicEntry {
    type_tag: String,
    publishers: BTreeSet<NodeId>,
    subscribers: Vec<SubscriberEntry>,
    latched: Option<Arc<MessageEnvelope>>,
}

struct ServiceEntry {
    node: NodeId,
    handler: Arc<ServiceFn>,
}

pub(super) struct RecorderState {
    patterns: Vec<TopicPattern>,
    records: Vec<MessageEnvelope>,
}

#[derive(Default)]
struct Inner {
    topics: BTreeMap<String, TopicEntry>,
    seqs: BTreeMap<(NodeId, String), u64>,
    last_stamp: BTreeMap<NodeId, u64>,
    live_publishers: BTreeMap<u64, (NodeId, String)>,
    services: BTreeMap<String, ServiceEntry>,
    recorders: BTreeMap<u64, Arc<Mutex<RecorderState>>>,
    next_id: u64,
    published: u64,
}

impl Inner {
    fn next_id(&mut self) -> u64 {
        self.next_id += 1;
        self.next_id
    }

    fn ensure_topic(&mut self, topic: &str, type_tag: &str) -> Result<&mut TopicEntry, BusError> {
        if !is_valid_topic(topic) {
            return Err(BusError::BadTopicName(topic.to_owned()));
        }
        let entry = self
            .topics
            .entry(topic.to_owned())
            .or_insert_with(|| TopicEntry {
                type_tag: type_tag.to_owned(),
                publishers: BTreeSet::new(),
                subscribers: Vec::new(),
                latched: None,
            });
        if entry.type_tag != type_tag {
            return Err(BusError::TypeTagConflict {
                topic: topic.to_owned(),
                registered: entry.type_tag.clone(),
                requested: type_tag.to_owned(),
            });
        }
        Ok(entry)
    }
}

/// In-process publish/subscribe bus. Cloning yields another handle to the same bus.
#[derive(Clone, Default)]
pub struct Bus {
    inner: Arc<Mutex<Inner>>,
}

impl std::fmt::Debug for Bus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let inner = self.lock();
        f.debug_struct("Bus")
            .field("topics", &inner.topics.keys().collect::<Vec<_>>())
            .field("published", &inner.published)
            .finish()
    }
}

impl Bus {
    pub fn new() -> Self {
        Self::default()
    }

    fn lock(&self) -> MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Registers `node` as a publisher on `topic`. Repeated calls return fresh
    /// handles sharing the same sequence counter.
    pub fn advertise(
        &self,
        node: &str,
        topic: &str,
        type_tag: &str,
    ) -> Result<PublisherHandle, BusError> {
        self.advertise_inner(node, topic, type_tag, false)
    }

    /// Like [`Bus::advertise`], but the topic retains its last message and
    /// hands it to every later subscriber.
    pub fn advertise_latched(
        &self,
        node: &str,
        topic: &str,
        type_tag: &str,
    ) -> Result<PublisherHandle, BusError> {
        self.advertise_inner(node, topic, type_tag, true)
    }

    fn advertise_inner(
        &self,
        node: &str,
        topic: &str,
        type_tag: &str,
        latch: bool,
    ) -> Result<PublisherHandle, BusError> {
        let mut inner = self.lock();
        inner
            .ensure_topic(topic, type_tag)?
            .publishers
            .insert(node.to_owned());
        let id = inner.next_id();
        inner
            .live_publishers
            .insert(id, (node.to_owned(), topic.to_owned()));
        Ok(PublisherHandle {
            bus: Arc::downgrade(&self.inner),
            id,
            node: node.to_owned(),
            topic: topic.to_owned(),
            type_tag: type_tag.to_owned(),
            latch,
        })
    }

    pub fn advertise_typed<T: Wire>(
        &self,
        node: &str,
        topic: &str,
    ) -> Result<PublisherHandle, BusError> {
        self.advertise(node, topic, T::TYPE_TAG)
    }

    pub fn subscribe(
        &self,
        node: &str,
        topic: &str,
        type_tag: &str,
        queue_depth: usize,
    ) -> Result<Subscription, BusError> {
        if queue_depth == 0 {
            return Err(BusError::BadQueueDepth);
        }
        let mut inner = self.lock();
        let id = inner.next_id();
        let entry = inner.ensure_topic(topic, type_tag)?;
        let mut queue = SubscriberQueue::new(queue_depth);
        if let Some(latched) = &entry.latched {
            queue.push(latched.clone());
        }
        let queue = Arc::new(Mutex::new(queue));
        entry.subscribers.push(SubscriberEntry {
            id,
            node: node.to_owned(),
            queue: queue.clone(),
        });
        Ok(Subscription {
            bus: Arc::downgrade(&self.inner),
            id,
            topic: topic.to_owned(),
            queue,
        })
    }

    pub fn subscribe_typed<T: Wire>(
        &self,
        node: &str,
        topic: &str,
        queue_depth: usize,
    ) -> Result<Subscription, BusError> {
        self.subscribe(node, topic, T::TYPE_TAG, queue_depth)
    }

    /// Revokes every publisher handle and subscription and service owned by `node`.
    pub fn shutdown_node(&self, node: &str) {
        let mut inner = self.lock();
        inner.live_publishers.retain(|_, (n, _)| n != node);
        for entry in inner.topics.values_mut() {
            entry.publishers.remove(node);
            entry.subscribers.retain(|s| s.node != node);
        }
        inner.services.retain(|_, s| s.node != node);
    }

    pub fn type_tag_of(&self, topic: &str) -> Option<String> {
        self.lock().topics.get(topic).map(|t| t.type_tag.clone())
    }

    pub fn topics(&self) -> BTreeMap<String, String> {
        self.lock()
            .topics
            .iter()
            .map(|(k, v)| (k.clone(), v.type_tag.clone()))
            .collect()
    }

    /// Topics `node` currently subscribes to.
    pub fn subscriptions_of(&self, node: &str) -> BTreeSet<String> {
        self.lock()
            .topics
            .iter()
            .filter(|(_, e)| e.subscribers.iter().any(|s| s.node == node))
            .map(|(k, _)| k.clone())
            .collect()
    }

    /// Topics `node` has advertised.
    pub fn advertisements_of(&self, node: &str) -> BTreeSet<String> {
        self.lock()
            .topics
            .iter()
            .filter(|(_, e)| e.publishers.contains(node))
            .map(|(k, _)| k.clone())
            .collect()
    }

    pub fn publishers_of(&self, topic: &str) -> BTreeSet<NodeId> {
        self.lock()
            .topics
            .get(topic)
            .map(|e| e.publishers.clone())
            .unwrap_or_default()
    }

    /// Total envelopes published since the bus was created.
    pub fn published_count(&self) -> u64 {
        self.lock().published
    }

    /// Last retained message on a latched topic.
    pub fn latched(&self, topic: &str) -> Option<Arc<MessageEnvelope>> {
        self.lock()
            .topics
            .get(topic)
            .and_then(|t| t.latched.clone())
    }

    pub fn register_service<F>(
        &self,
        node: &str,
        name: &str,
        handler: F,
    ) -> Result<ServiceHandle, BusError>
    where
        F: Fn(&[u8]) -> Vec<u8> + Send + Sync + 'static,
    {
        if !is_valid_topic(name) {
            return Err(BusError::BadTopicName(name.to_owned()));
        }
        let mut inner = self.lock();
        if inner.services.contains_key(name) {
            return Err(BusError::DuplicateService(name.to_owned()));
        }
        inner.services.insert(
            name.to_owned(),
            ServiceEntry {
                node: node.to_owned(),
                handler: Arc::new(handler),
            },
        );
        Ok(ServiceHandle {
            bus: Arc::downgrade(&self.inner),
            name: name.to_owned(),
        })
    }

    /// Runs the handler once on a worker thread and waits at most `timeout`.
    pub fn call_service(
        &self,
        name: &str,
        request: &[u8],
        timeout: Duration,
    ) -> Result<Vec<u8>, BusError> {
        let handler = self
            .lock()
            .services
            .get(name)
            .map(|s| s.handler.clone())
            .ok_or_else(|| BusError::NoSuchService(name.to_owned()))?;
        let (tx, rx) = mpsc::sync_channel(1);
        let request = request.to_vec();
        std::thread::Builder::new()
            .name(format!("svc{name}"))
            .spawn(move || {
                let _ = tx.send(handler(&request));
            })
            .map_err(|e| BusError::ServiceFailed(format!("{name}: {e}")))?;
        match rx.recv_timeout(timeout) {
            Ok(resp) => Ok(resp),
            Err(mpsc::RecvTimeoutError::Timeout) => Err(BusError::Timeout {
                name: name.to_owned(),
                timeout,
            }),
            Err(mpsc::RecvTimeoutError::Disconnected) => {
                Err(BusError::ServiceFailed(format!("{name}: handler panicked")))
            }
        }
    }

    /// Starts capturing every envelope whose topic matches one of `patterns`.
    /// The bag is written to `sink` when the recorder is stopped.
    pub fn record<W: Write + Send + 'static>(
        &self,
        patterns: &[&str],
        sink: W,
    ) -> Result<Recorder, BusError> {
        let patterns = patterns
            .iter()
            .map(|p| TopicPattern::parse(p).ok_or_else(|| BusError::BadTopicName((*p).to_owned())))
            .collect::<Result<Vec<_>, _>>()?;
        let state = Arc::new(Mutex::new(RecorderState {
            patterns,
            records: Vec::new(),
        }));
        let mut inner = self.lock();
        let id = inner.next_id();
        inner.recorders.insert(id, state.clone());
        Ok(Recorder {
            bus: Arc::downgrade(&self.inner),
            id,
            state,
            sink: Some(Box::new(sink)),
        })
    }

    fn deliver(
        &self,
        handle: &PublisherHandle,
        payload: Vec<u8>,
        clock: &VirtualClock,
    ) -> Result<u64, BusError> {
        let mut inner = self.lock();
        if !inner.live_publishers.contains_key(&handle.id) {
            return Err(BusError::HandleRevoked);
        }
        let key = (handle.node.clone(), handle.topic.clone());
        let seq_slot = inner.seqs.entry(key).or_insert(0);
        let seq = *seq_slot;
        *seq_slot += 1;
        // Stamps never go backwards for one publisher, even if handed a stale clock.
        let last = inner.last_stamp.entry(handle.node.clone()).or_insert(0);
        let stamp = clock.now().max(*last);
        *last = stamp;
        inner.published += 1;

        let env = Arc::new(MessageEnvelope {
            topic: handle.topic.clone(),
            type_tag: handle.type_tag.clone(),
            publisher: handle.node.clone(),
            seq,
            stamp,
            payload,
        });
        for rec in inner.recorders.values() {
            let mut rec = rec.lock().unwrap_or_else(|e| e.into_inner());
            if rec.patterns.iter().any(|p| p.matches(&env.topic)) {
                rec.records.push((*env).clone());
            }
        }
        let entry = inner
            .topics
            .get_mut(&handle.topic)
            .expect("advertised topic exists");
        for sub in &entry.subscribers {
            sub.queue
                .lock()
                .unwrap_or_else(|e| e.into_inner())
                .push(env.clone());
        }
        if handle.latch {
            entry.latched = Some(env);
        }
        Ok(seq)
    }
}

/// Publishing side of an advertisement.
#[derive(Clone, Debug)]
pub struct PublisherHandle {
    bus: Weak<Mutex<Inner>>,
    id: u64,
    node: NodeId,
    topic: String,
    type_tag: String,
    latch: bool,
}

impl PublisherHandle {
    pub fn topic(&self) -> &str {
        &self.topic
    }

    pub fn node(&self) -> &str {
        &self.node
    }

    pub fn type_tag(&self) -> &str {
        &self.type_tag
    }

    /// Stamps with `clock.now()` and fans out synchronously to every current subscriber.
    pub fn publish(&self, payload: Vec<u8>, clock: &VirtualClock) -> Result<u64, BusError> {
        let bus = Bus {
            inner: self.bus.upgrade().ok_or(BusError::HandleRevoked)?,
        };
        bus.deliver(self, payload, clock)
    }

    pub fn publish_msg<T: Wire>(&self, msg: &T, clock: &VirtualClock) -> Result<u64, BusError> {
        debug_assert_eq!(self.type_tag, T::TYPE_TAG);
        self.publish(msg.to_bytes(), clock)
    }
}

#[derive(Debug)]
pub struct SubscriberQueue {
    depth: usize,
    messages: VecDeque<Arc<MessageEnvelope>>,
    drops: u64,
}

impl SubscriberQueue {
    fn new(depth: usize) -> Self {
        Self {
            depth,
            messages: VecDeque::with_capacity(depth.min(1024)),
            drops: 0,
        }
    }

    fn push(&mut self, env: Arc<MessageEnvelope>) {
        if self.messages.len() == self.depth {
            self.messages.pop_front();
            self.drops += 1;
        }
        self.messages.push_back(env);
    }
}

/// Receiving side of a subscription. Dropping it unsubscribes.
pub struct Subscription {
    bus: Weak<Mutex<Inner>>,
    id: u64,
    topic: String,
    queue: Arc<Mutex<SubscriberQueue>>,
}

impl std::fmt::Debug for Subscription {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Subscription")
            .field("topic", &self.topic)
            .finish()
    }
}

impl Subscription {
    fn queue(&self) -> MutexGuard<'_, SubscriberQueue> {
        self.queue.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn topic(&self) -> &str {
        &self.topic
    }

    pub fn drain(&self) -> Vec<Arc<MessageEnvelope>> {
        self.queue().messages.drain(..).collect()
    }

    pub fn try_recv(&self) -> Option<Arc<MessageEnvelope>> {
        self.queue().messages.pop_front()
    }

    pub fn len(&self) -> usize {
        self.queue().messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Messages discarded because the queue was full.
    pub fn drops(&self) -> u64 {
        self.queue().drops
    }

    /// Drains and decodes, skipping payloads that fail to decode.
    pub fn drain_typed<T: Wire>(&self) -> Vec<(Arc<MessageEnvelope>, T)> {
        self.drain()
            .into_iter()
            .filter_map(|env| match env.decode::<T>() {
                Ok(v) => Some((env, v)),
                Err(e) => {
                    log::warn!("dropping undecodable message on {}: {e}", env.topic);
                    None
                }
            })
            .collect()
    }
}

impl Drop for Subscription {
    fn drop(&mut self) {
        if let Some(inner) = self.bus.upgrade() {
            let mut inner = inner.lock().unwrap_or_else(|e| e.into_inner());
            if let Some(entry) = inner.topics.get_mut(&self.topic) {
                entry.subscribers.retain(|s| s.id != self.id);
            }
        }
    }
}

/// Unregisters the service when dropped.
#[derive(Debug)]
pub struct ServiceHandle {
    bus: Weak<Mutex<Inner>>,
    name: String,
}

impl ServiceHandle {
    pub fn name(&self) -> &str {
        &self.name
    }
}

impl Drop for ServiceHandle {
    fn drop(&mut self) {
        if let Some(inner) = self.bus.upgrade() {
            inner
                .lock()
                .unwrap_or_else(|e| e.into_inner())
                .services
                .remove(&self.name);
        }
    }
}

pub struct Recorder {
    bus: Weak<Mutex<Inner>>,
    id: u64,
    state: Arc<Mutex<RecorderState>>,
    sink: Option<Box<dyn Write + Send>>,
}

impl Recorder {
    pub fn record_count(&self) -> usize {
        self.state
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .records
            .len()
    }

    /// Detaches from the bus, writes the bag to the sink and returns it.
    pub fn stop(mut self) -> Result<BagFile, BusError> {
        self.detach();
        let records =
            std::mem::take(&mut self.state.lock().unwrap_or_else(|e| e.into_inner()).records);
        let bag = BagFile::from_records(records);
        if let Some(mut sink) = self.sink.take() {
            sink.write_all(&bag.to_bytes())
                .map_err(BusError::SinkWrite)?;
            sink.flush().map_err(BusError::SinkWrite)?;
        }
        Ok(bag)
    }

    fn detach(&mut self) {
        if let Some(inner) = self.bus.upgrade() {
            inner
                .lock()
                .unwrap_or_else(|e| e.into_inner())
                .recorders
                .remove(&self.id);
        }
    }
}

impl Drop for Recorder {
    fn drop(&mut self) {
        self.detach();
    }
}
