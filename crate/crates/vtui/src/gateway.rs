//! WebSocket gateway. The simulation thread owns the world and feeds every
//! connection through a [`Tap`]; connection tasks only parse commands into
//! the step-boundary queue and write queued frames out.

use std::collections::{BTreeMap, VecDeque};
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};
use std::thread::JoinHandle;

use axum::extract::ws::{CloseFrame, Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::IntoResponse;
use axum::routing::get;
use axum::Router;
use futures_util::{SinkExt, StreamExt};
use tokio::sync::{oneshot, watch, Notify};

use vtui_core::devices::{DisplayFrame, TouchEvent};
use vtui_core::msgbus::Subscription;
use vtui_core::physics::{WorldState, STATE_TOPIC};
use vtui_core::runtime::{CommandSender, Simulation, SCENE_GRAPH_TOPIC};

use crate::protocol::{parse_client, ServerMessage, MAX_FRAME_BYTES, PROTOCOL_VERSION};

/// Per-connection queue bound. Beyond it the oldest `state_update` goes.
pub const OUTBOX_CAPACITY: usize = 256;
/// Close code for frames over [`MAX_FRAME_BYTES`].
pub const CLOSE_TOO_BIG: u16 = 1009;
const CLOSE_PROTOCOL: u16 = 1002;

#[derive(Debug)]
enum Outgoing {
    State(String),
    Other(String),
    Close(u16, String),
}

#[derive(Debug, Default)]
struct OutQueue {
    items: VecDeque<Outgoing>,
    states: usize,
    dropped_states: u64,
    closed: bool,
}

/// Frames waiting to be written to one connection.
#[derive(Debug)]
pub struct Outbox {
    queue: Mutex<OutQueue>,
    notify: Notify,
    greeted: watch::Sender<bool>,
}

impl Outbox {
    fn new() -> Self {
        Self {
            queue: Mutex::new(OutQueue::default()),
            notify: Notify::new(),
            greeted: watch::channel(false).0,
        }
    }

    fn lock(&self) -> MutexGuard<'_, OutQueue> {
        self.queue.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn push(&self, item: Outgoing) {
        let mut q = self.lock();
        if q.closed {
            return;
        }
        let is_state = matches!(item, Outgoing::State(_));
        if q.items.len() >= OUTBOX_CAPACITY {
            if q.states > 0 {
                let at = q
                    .items
                    .iter()
                    .position(|i| matches!(i, Outgoing::State(_)))
                    .expect("counted");
                q.items.remove(at);
                q.states -= 1;
                q.dropped_states += 1;
            } else if is_state {
                q.dropped_states += 1;
                return;
            }
        }
        q.states += usize::from(is_state);
        q.items.push_back(item);
        drop(q);
        self.notify.notify_one();
    }

    fn send(&self, msg: &ServerMessage) {
        let item = match msg {
            ServerMessage::StateUpdate { .. } => Outgoing::State(msg.to_json()),
            _ => Outgoing::Other(msg.to_json()),
        };
        self.push(item);
    }

    fn pop_all(&self) -> Vec<Outgoing> {
        let mut q = self.lock();
        q.states = 0;
        q.items.drain(..).collect()
    }

    /// `state_update` frames discarded because the client fell behind.
    pub fn dropped_states(&self) -> u64 {
        self.lock().dropped_states
    }

    fn is_greeted(&self) -> bool {
        *self.greeted.borrow()
    }
}

/// Registry of live connections.
#[derive(Debug, Default)]
pub struct Hub {
    conns: Mutex<BTreeMap<u64, Arc<Outbox>>>,
    next: AtomicU64,
}

impl Hub {
    fn lock(&self) -> MutexGuard<'_, BTreeMap<u64, Arc<Outbox>>> {
        self.conns.lock().unwrap_or_else(|e| e.into_inner())
    }

    fn connect(&self) -> (u64, Arc<Outbox>) {
        let id = self.next.fetch_add(1, Ordering::Relaxed);
        let outbox = Arc::new(Outbox::new());
        self.lock().insert(id, outbox.clone());
        (id, outbox)
    }

    fn disconnect(&self, id: u64) {
        if let Some(o) = self.lock().remove(&id) {
            o.lock().closed = true;
            o.notify.notify_one();
        }
    }

    pub fn connections(&self) -> usize {
        self.lock().len()
    }

    fn snapshot(&self) -> Vec<Arc<Outbox>> {
        self.lock().values().cloned().collect()
    }

    fn broadcast(&self, msg: &ServerMessage) {
        let mut json = None;
        for o in self.snapshot() {
            if o.is_greeted() {
                let text = json.get_or_insert_with(|| msg.to_json()).clone();
                o.push(match msg {
                    ServerMessage::StateUpdate { .. } => Outgoing::State(text),
                    _ => Outgoing::Other(text),
                });
            }
        }
    }
}

/// Simulation-side half of the gateway; call [`Tap::pump`] after every
/// loop iteration on the simulation thread.
pub struct Tap {
    hub: Arc<Hub>,
    states: Subscription,
    graph: Subscription,
    frames: Vec<(String, Subscription)>,
    touches: Vec<(String, Subscription)>,
}

impl std::fmt::Debug for Tap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Tap")
            .field("frames", &self.frames.len())
            .finish()
    }
}

const TAP_NODE: &str = "gateway";

impl Tap {
    pub fn new(hub: Arc<Hub>, sim: &Simulation) -> Self {
        let bus = sim.bus();
        let mut tap = Self {
            hub,
            states: bus
                .subscribe_typed::<WorldState>(TAP_NODE, STATE_TOPIC, 1024)
                .expect("state topic"),
            graph: bus
                .subscribe_typed::<String>(TAP_NODE, SCENE_GRAPH_TOPIC, 16)
                .expect("graph topic"),
            frames: Vec::new(),
            touches: Vec::new(),
        };
        tap.resubscribe(sim);
        tap.graph.drain();
        tap
    }

    fn resubscribe(&mut self, sim: &Simulation) {
        let bus = sim.bus();
        self.frames.clear();
        self.touches.clear();
        for m in sim.scene_graph().models {
            for d in m.displays {
                if let Ok(s) = bus.subscribe_typed::<DisplayFrame>(TAP_NODE, &d.frame_topic, 16) {
                    self.frames.push((m.instance.clone(), s));
                }
                if let Ok(s) = bus.subscribe_typed::<TouchEvent>(TAP_NODE, &d.touch_topic, 64) {
                    self.touches.push((m.instance.clone(), s));
                }
            }
        }
    }

    /// hello, scene_graph, the current frame of every display, then the
    /// latest state; only after that does the connection get broadcasts.
    fn greet(&self, sim: &Simulation, outbox: &Outbox) {
        let spec = sim.spec();
        let graph = sim.scene_graph();
        let mut frames = Vec::new();
        for m in &graph.models {
            for d in &m.displays {
                if let Some(f) = sim.hal().display_frame(&m.instance, &d.id) {
                    frames.push(ServerMessage::frame(&m.instance, f));
                }
            }
        }
        outbox.send(&ServerMessage::Hello {
            protocol_version: PROTOCOL_VERSION,
            dt: spec.world.dt,
            seed: spec.world.seed,
            step: sim.step_count(),
            paused: sim.is_paused(),
        });
        outbox.send(&ServerMessage::scene_graph(graph));
        for f in &frames {
            outbox.send(f);
        }
        outbox.send(&ServerMessage::state(&sim.world().snapshot()));
        outbox.greeted.send_replace(true);
    }

    pub fn pump(&mut self, sim: &Simulation) {
        if !self.graph.drain().is_empty() {
            self.resubscribe(sim);
            self.hub
                .broadcast(&ServerMessage::scene_graph(sim.scene_graph()));
        }
        for (_, s) in self.states.drain_typed::<WorldState>() {
            self.hub.broadcast(&ServerMessage::state(&s));
        }
        for (inst, sub) in &self.frames {
            for (_, f) in sub.drain_typed::<DisplayFrame>() {
                self.hub.broadcast(&ServerMessage::frame(inst, &f));
            }
        }
        for (inst, sub) in &self.touches {
            for (_, t) in sub.drain_typed::<TouchEvent>() {
                self.hub.broadcast(&ServerMessage::touch(inst, &t));
            }
        }
        for o in self.hub.snapshot() {
            if !o.is_greeted() {
                self.greet(sim, &o);
            }
        }
    }
}

#[derive(Clone)]
struct AppState {
    hub: Arc<Hub>,
    commands: CommandSender,
}

/// A running gateway server; dropping it shuts the server down.
pub struct Gateway {
    addr: SocketAddr,
    hub: Arc<Hub>,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<()>>,
}

impl std::fmt::Debug for Gateway {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Gateway").field("addr", &self.addr).finish()
    }
}

impl Gateway {
    /// Binds `listen` and serves `/ws` on a background runtime.
    pub fn start(listen: &str, commands: CommandSender) -> std::io::Result<Self> {
        let rt = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(2)
            .enable_all()
            .build()?;
        let std_listener = std::net::TcpListener::bind(listen)?;
        std_listener.set_nonblocking(true)?;
        let addr = std_listener.local_addr()?;
        let hub = Arc::new(Hub::default());
        let state = AppState {
            hub: hub.clone(),
            commands,
        };
        let (tx, rx) = oneshot::channel::<()>();
        let thread = std::thread::Builder::new()
            .name("gateway".into())
            .spawn(move || {
                rt.block_on(async move {
                    let listener = match tokio::net::TcpListener::from_std(std_listener) {
                        Ok(l) => l,
                        Err(e) => {
                            log::error!("gateway listener: {e}");
                            return;
                        }
                    };
                    let app = Router::new().route("/ws", get(upgrade)).with_state(state);
                    let server = axum::serve(listener, app).with_graceful_shutdown(async {
                        let _ = rx.await;
                    });
                    if let Err(e) = server.await {
                        log::error!("gateway: {e}");
                    }
                });
                rt.shutdown_background();
            })?;
        log::info!("gateway listening on ws://{addr}/ws");
        Ok(Self {
            addr,
            hub,
            shutdown: Some(tx),
            thread: Some(thread),
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn hub(&self) -> Arc<Hub> {
        self.hub.clone()
    }

    /// The simulation-side half; create it on the simulation thread.
    pub fn tap(&self, sim: &Simulation) -> Tap {
        Tap::new(self.hub.clone(), sim)
    }
}

impl Drop for Gateway {
    fn drop(&mut self) {
        for o in self.hub.snapshot() {
            o.push(Outgoing::Close(1001, "server shutting down".into()));
        }
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

async fn upgrade(State(state): State<AppState>, ws: WebSocketUpgrade) -> impl IntoResponse {
    // frames between 1 MiB and this cap are closed with 1009 by hand
    ws.max_message_size(4 * MAX_FRAME_BYTES)
        .on_upgrade(move |socket| connection(state, socket))
}

async fn connection(state: AppState, socket: WebSocket) {
    let (id, outbox) = state.hub.connect();
    let (mut sink, mut stream) = socket.split();

    let writer_box = outbox.clone();
    let writer = tokio::spawn(async move {
        loop {
            let items = writer_box.pop_all();
            if items.is_empty() {
                if writer_box.lock().closed {
                    break;
                }
                writer_box.notify.notified().await;
                continue;
            }
            for item in items {
                let res = match item {
                    Outgoing::State(t) | Outgoing::Other(t) => {
                        sink.send(Message::Text(t.into())).await
                    }
                    Outgoing::Close(code, reason) => {
                        let _ = sink
                            .send(Message::Close(Some(CloseFrame {
                                code,
                                reason: reason.into(),
                            })))
                            .await;
                        return;
                    }
                };
                if res.is_err() {
                    return;
                }
            }
        }
    });

    let mut greeted = outbox.greeted.subscribe();
    let _ = greeted.wait_for(|g| *g).await;
    while let Some(msg) = stream.next().await {
        let text = match msg {
            Ok(Message::Text(t)) => t,
            Ok(Message::Binary(b)) if b.len() > MAX_FRAME_BYTES => {
                outbox.push(Outgoing::Close(CLOSE_TOO_BIG, "frame exceeds 1 MiB".into()));
                break;
            }
            Ok(Message::Binary(_)) => {
                outbox.send(&ServerMessage::Error {
                    id: None,
                    code: crate::protocol::ErrorCode::MalformedJson,
                    detail: "binary frames are not accepted".into(),
                });
                continue;
            }
            Ok(Message::Close(_)) => break,
            Ok(_) => continue,
            Err(e) => {
                log::debug!("connection {id}: {e}");
                let reason = e.to_string();
                let code = match e.into_inner().downcast_ref::<tungstenite::Error>() {
                    Some(tungstenite::Error::Capacity(_)) => CLOSE_TOO_BIG,
                    _ => CLOSE_PROTOCOL,
                };
                outbox.push(Outgoing::Close(code, reason));
                break;
            }
        };
        if text.len() > MAX_FRAME_BYTES {
            outbox.push(Outgoing::Close(CLOSE_TOO_BIG, "frame exceeds 1 MiB".into()));
            break;
        }
        match parse_client(&text).and_then(|(m, cid)| {
            m.into_command()
                .map(|c| (c, cid.clone()))
                .map_err(|detail| crate::protocol::Rejection {
                    code: crate::protocol::ErrorCode::InvalidMessage,
                    detail,
                    id: cid,
                })
        }) {
            Ok((cmd, cid)) => {
                let reply = outbox.clone();
                state
                    .commands
                    .send_with_ack(cmd, move |ack| reply.send(&ServerMessage::ack(cid, ack)));
            }
            Err(r) => outbox.send(&ServerMessage::error(r)),
        }
    }
    state.hub.disconnect(id);
    let _ = writer.await;
}
