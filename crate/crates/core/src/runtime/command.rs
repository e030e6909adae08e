use std::collections::VecDeque;
use std::sync::{Arc, Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::devices::TouchPhase;
use crate::physics::{BodyId, Pose, WrenchCommand};

/// Requests that change the simulation. They are queued and applied, in
/// arrival order, at the next step boundary.
#[derive(Clone, Debug, PartialEq)]
pub enum Command {
    /// A wrench; `body: None` targets the selected body.
    ApplyWrench {
        body: Option<BodyId>,
        wrench: WrenchCommand,
    },
    /// A UI touch at pixel `(u, v)`.
    Touch {
        instance: String,
        display: String,
        u: u32,
        v: u32,
        phase: TouchPhase,
    },
    Spawn {
        model: String,
        name: String,
        pose: Pose,
    },
    Pause,
    Resume,
    /// Pauses, then runs exactly `n` more steps.
    StepN(u64),
    Select(Option<BodyId>),
}

impl Command {
    pub fn kind(&self) -> &'static str {
        match self {
            Command::ApplyWrench { .. } => "apply_wrench",
            Command::Touch { .. } => "touch",
            Command::Spawn { .. } => "spawn",
            Command::Pause => "pause",
            Command::Resume => "resume",
            Command::StepN(_) => "step_n",
            Command::Select(_) => "select",
        }
    }
}

/// Outcome of one command, tagged with the step count at which it was applied.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommandAck {
    pub command: String,
    pub step: u64,
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub type AckFn = Box<dyn FnOnce(CommandAck) + Send>;

struct Shared {
    queue: Mutex<VecDeque<(Command, Option<AckFn>)>>,
    wake: Condvar,
}

/// Cloneable handle for submitting commands from any thread.
#[derive(Clone)]
pub struct CommandSender {
    shared: Arc<Shared>,
}

impl std::fmt::Debug for CommandSender {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CommandSender")
            .field("pending", &self.pending())
            .finish()
    }
}

impl CommandSender {
    pub(crate) fn new() -> Self {
        Self {
            shared: Arc::new(Shared {
                queue: Mutex::new(VecDeque::new()),
                wake: Condvar::new(),
            }),
        }
    }

    pub fn send(&self, command: Command) {
        self.push(command, None);
    }

    /// Queues a command; `ack` runs on the simulation thread once it is applied.
    pub fn send_with_ack(&self, command: Command, ack: impl FnOnce(CommandAck) + Send + 'static) {
        self.push(command, Some(Box::new(ack)));
    }

    fn push(&self, command: Command, ack: Option<AckFn>) {
        self.shared
            .queue
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .push_back((command, ack));
        self.shared.wake.notify_all();
    }

    pub fn pending(&self) -> usize {
        self.shared
            .queue
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .len()
    }

    pub(crate) fn take_all(&self) -> Vec<(Command, Option<AckFn>)> {
        self.shared
            .queue
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .drain(..)
            .collect()
    }

    /// Blocks until a command arrives or `timeout` passes.
    pub fn wait(&self, timeout: Duration) {
        let q = self.shared.queue.lock().unwrap_or_else(|e| e.into_inner());
        if q.is_empty() {
            let _ = self.shared.wake.wait_timeout(q, timeout);
        }
    }
}
