#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use futures_util::{SinkExt, StreamExt};
use serde_json::Value;
use tokio::net::TcpStream;
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{MaybeTlsStream, WebSocketStream};

use vtui::Gateway;
use vtui_core::msgbus::Bus;
use vtui_core::runtime::{prepare, RunConfig, RunError, RunMode, RunReport};

pub fn scene_file(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenes")
        .join(name)
}

/// A simulation thread with the gateway attached, on an ephemeral port.
pub struct Server {
    pub gateway: Option<Gateway>,
    stop: Arc<AtomicBool>,
    thread: Option<JoinHandle<Result<RunReport, RunError>>>,
}

impl Server {
    pub fn start(scene: &str, mode: RunMode) -> Self {
        let config = RunConfig {
            mode,
            snapshot_rate: 60.0,
            ..RunConfig::new(scene_file(scene))
        };
        let prepared = prepare(&config, Bus::new()).unwrap();
        let gateway = Gateway::start("127.0.0.1:0", prepared.sim.commands()).unwrap();
        let mut tap = gateway.tap(&prepared.sim);
        let stop = Arc::new(AtomicBool::new(false));
        let s = stop.clone();
        let thread =
            std::thread::spawn(move || prepared.run_with(&config, &s, |sim| tap.pump(sim)));
        Self {
            gateway: Some(gateway),
            stop,
            thread: Some(thread),
        }
    }

    pub fn url(&self) -> String {
        format!("ws://{}/ws", self.gateway.as_ref().unwrap().local_addr())
    }

    pub fn stop(&mut self) -> Option<RunReport> {
        self.stop.store(true, Ordering::Relaxed);
        let report = self.thread.take().map(|t| t.join().unwrap().unwrap());
        self.gateway.take();
        report
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

#[derive(Debug)]
pub enum Event {
    Json(Value),
    Closed(Option<u16>),
    Timeout,
}

pub struct Client {
    ws: WebSocketStream<MaybeTlsStream<TcpStream>>,
}

impl Client {
    pub async fn connect(url: &str) -> Self {
        let (ws, _) = tokio_tungstenite::connect_async(url).await.unwrap();
        Self { ws }
    }

    pub fn from_stream(ws: WebSocketStream<MaybeTlsStream<TcpStream>>) -> Self {
        Self { ws }
    }

    pub async fn send(&mut self, v: Value) {
        self.ws
            .send(Message::Text(v.to_string().into()))
            .await
            .unwrap();
    }

    pub async fn send_text(&mut self, t: String) {
        self.ws.send(Message::Text(t.into())).await.unwrap();
    }

    pub async fn next(&mut self, timeout: Duration) -> Event {
        loop {
            match tokio::time::timeout(timeout, self.ws.next()).await {
                Err(_) => return Event::Timeout,
                Ok(None) | Ok(Some(Err(_))) => return Event::Closed(None),
                Ok(Some(Ok(Message::Text(t)))) => {
                    return Event::Json(serde_json::from_str(&t).unwrap())
                }
                Ok(Some(Ok(Message::Close(f)))) => return Event::Closed(f.map(|f| f.code.into())),
                Ok(Some(Ok(_))) => continue,
            }
        }
    }

    /// Messages up to and including the first that satisfies `pred`.
    pub async fn until(&mut self, mut pred: impl FnMut(&Value) -> bool) -> Vec<Value> {
        let mut out = Vec::new();
        loop {
            match self.next(Duration::from_secs(10)).await {
                Event::Json(v) => {
                    let done = pred(&v);
                    out.push(v);
                    if done {
                        return out;
                    }
                }
                other => panic!(
                    "expected a message, got {other:?} after {} messages",
                    out.len()
                ),
            }
        }
    }

    /// Everything that arrives within `window`.
    pub async fn collect_for(&mut self, window: Duration) -> Vec<Value> {
        let deadline = tokio::time::Instant::now() + window;
        let mut out = Vec::new();
        loop {
            let left = deadline.saturating_duration_since(tokio::time::Instant::now());
            if left.is_zero() {
                return out;
            }
            match self.next(left).await {
                Event::Json(v) => out.push(v),
                _ => return out,
            }
        }
    }
}

pub fn is_type(v: &Value, t: &str) -> bool {
    v["type"] == t
}

pub fn is_ack(v: &Value, id: &str) -> bool {
    v["type"] == "ack" && v["id"] == id
}

pub fn steps_of(msgs: &[Value]) -> Vec<u64> {
    msgs.iter()
        .filter(|m| is_type(m, "state_update"))
        .map(|m| m["step"].as_u64().unwrap())
        .collect()
}

pub fn body_of(state: &Value, id: u64) -> &Value {
    state["bodies"]
        .as_array()
        .unwrap()
        .iter()
        .find(|b| b["id"] == id)
        .unwrap()
}
