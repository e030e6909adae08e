//! In-process publish/subscribe middleware with services and bag record/replay.
//!
//! Every simulated device, application node, the gateway and replayed
//! devices talk over one [`Bus`]. Delivery is synchronous: `publish` returns
//! only after the envelope sits in every subscriber queue.

mod bag;
mod bus;
mod clock;
pub mod codec;
mod replay;
mod topic;

use std::time::Duration;

use thiserror::Error;

pub use bag::{BagFile, BagInfo, BAG_HEADER_LEN, BAG_MAGIC, BAG_VERSION};
pub use bus::{
    Bus, MessageEnvelope, NodeId, PublisherHandle, Recorder, ServiceHandle, Subscription,
    DEFAULT_QUEUE_DEPTH,
};
pub use clock::{secs_to_nanos, ClockMode, VirtualClock, NANOS_PER_SEC};
pub use codec::Wire;
pub use replay::{replay, ReplayStats, Replayer, REPLAY_PREFIX};
pub use topic::{is_valid_segment, is_valid_topic, TopicPattern};

#[derive(Debug, Error)]
pub enum BusError {
    #[error("bad topic name `{0}`")]
    BadTopicName(String),
    #[error("topic `{topic}` carries `{registered}`, not `{requested}`")]
    TypeTagConflict {
        topic: String,
        registered: String,
        requested: String,
    },
    #[error("publisher handle revoked")]
    HandleRevoked,
    #[error("queue depth must be at least 1")]
    BadQueueDepth,
    #[error("no such service `{0}`")]
    NoSuchService(String),
    #[error("service `{0}` is already registered")]
    DuplicateService(String),
    #[error("service `{name}` timed out after {timeout:?}")]
    Timeout { name: String, timeout: Duration },
    #[error("service call failed: {0}")]
    ServiceFailed(String),
    #[error("bag sink write failed: {0}")]
    SinkWrite(std::io::Error),
    #[error("corrupt bag: {0}")]
    BagCorrupt(String),
    #[error("replay speed must be positive, got {0}")]
    BadSpeed(f64),
    #[error("payload decode failed: {0}")]
    Decode(String),
}
