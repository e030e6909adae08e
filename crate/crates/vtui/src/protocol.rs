//! WebSocket JSON protocol, version 1. See `docs/wire-protocol.md`.

use base64::Engine;
use glam::{DQuat, DVec3};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use vtui_core::devices::{DisplayFrame, TouchEvent, TouchPhase, TouchSource};
use vtui_core::physics::{BodyId, Pose, WorldState, WrenchCommand, WrenchDuration};
use vtui_core::runtime::{Command, CommandAck, ModelNode, SceneGraph};

pub const PROTOCOL_VERSION: u32 = 1;
/// Larger client frames close the connection with code 1009.
pub const MAX_FRAME_BYTES: usize = 1 << 20;

/// Messages a client may send.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClientMessage {
    ApplyWrench {
        /// Defaults to the selected body.
        #[serde(default)]
        body: Option<u32>,
        #[serde(default)]
        force: [f64; 3],
        #[serde(default)]
        torque: [f64; 3],
        /// Body frame; omitted means the center of mass.
        #[serde(default)]
        point: Option<[f64; 3]>,
        /// Seconds; omitted means a single step.
        #[serde(default)]
        duration: Option<f64>,
    },
    Touch {
        instance: String,
        display: String,
        u: u32,
        v: u32,
        #[serde(default = "default_phase")]
        phase: TouchPhase,
    },
    Spawn {
        model: String,
        name: String,
        #[serde(default)]
        position: [f64; 3],
        /// Quaternion `[x, y, z, w]`.
        #[serde(default = "identity_quat")]
        orientation: [f64; 4],
    },
    Pause {},
    Resume {},
    StepN {
        n: u64,
    },
    Select {
        body: Option<u32>,
    },
}

fn default_phase() -> TouchPhase {
    TouchPhase::Down
}

fn identity_quat() -> [f64; 4] {
    [0.0, 0.0, 0.0, 1.0]
}

impl ClientMessage {
    pub fn into_command(self) -> Result<Command, String> {
        Ok(match self {
            ClientMessage::ApplyWrench {
                body,
                force,
                torque,
                point,
                duration,
            } => {
                let duration = match duration {
                    None => WrenchDuration::Impulse,
                    Some(d) if d.is_finite() && d > 0.0 => WrenchDuration::Seconds(d),
                    Some(d) => return Err(format!("duration must be > 0, got {d}")),
                };
                Command::ApplyWrench {
                    body: body.map(BodyId),
                    wrench: WrenchCommand {
                        body: BodyId(body.unwrap_or(u32::MAX)),
                        force: DVec3::from_array(force),
                        torque: DVec3::from_array(torque),
                        application_point: point.map(DVec3::from_array),
                        duration,
                    },
                }
            }
            ClientMessage::Touch {
                instance,
                display,
                u,
                v,
                phase,
            } => Command::Touch {
                instance,
                display,
                u,
                v,
                phase,
            },
            ClientMessage::Spawn {
                model,
                name,
                position,
                orientation,
            } => {
                let q = DQuat::from_array(orientation);
                if !q.is_finite() || q.length() < 1e-9 {
                    return Err("orientation must be a non-zero quaternion".into());
                }
                Command::Spawn {
                    model,
                    name,
                    pose: Pose::new(DVec3::from_array(position), q.normalize()),
                }
            }
            ClientMessage::Pause {} => Command::Pause,
            ClientMessage::Resume {} => Command::Resume,
            ClientMessage::StepN { n } => Command::StepN(n),
            ClientMessage::Select { body } => Command::Select(body.map(BodyId)),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    MalformedJson,
    UnknownType,
    InvalidMessage,
    UnsupportedVersion,
}

/// A request the gateway could not accept, with the client's `id` if any.
#[derive(Clone, Debug, PartialEq)]
pub struct Rejection {
    pub code: ErrorCode,
    pub detail: String,
    pub id: Option<Value>,
}

const CLIENT_TYPES: [&str; 7] = [
    "apply_wrench",
    "touch",
    "spawn",
    "pause",
    "resume",
    "step_n",
    "select",
];

/// Parses one text frame into a message and the optional client `id`.
pub fn parse_client(text: &str) -> Result<(ClientMessage, Option<Value>), Rejection> {
    let reject = |code, detail: String, id| Rejection { code, detail, id };
    let mut value: Value = serde_json::from_str(text)
        .map_err(|e| reject(ErrorCode::MalformedJson, e.to_string(), None))?;
    let Some(obj) = value.as_object_mut() else {
        return Err(reject(
            ErrorCode::MalformedJson,
            "expected a JSON object".into(),
            None,
        ));
    };
    let id = obj.remove("id");
    if let Some(v) = obj.remove("protocol_version") {
        if v.as_u64() != Some(PROTOCOL_VERSION as u64) {
            return Err(reject(
                ErrorCode::UnsupportedVersion,
                format!("server speaks protocol_version {PROTOCOL_VERSION}, got {v}"),
                id,
            ));
        }
    }
    let kind = match obj.get("type") {
        Some(Value::String(s)) => s.clone(),
        _ => {
            return Err(reject(
                ErrorCode::InvalidMessage,
                "missing string field `type`".into(),
                id,
            ))
        }
    };
    if !CLIENT_TYPES.contains(&kind.as_str()) {
        return Err(reject(
            ErrorCode::UnknownType,
            format!("unknown message type `{kind}`"),
            id,
        ));
    }
    let msg = serde_json::from_value(value).map_err(|e| {
        reject(
            ErrorCode::InvalidMessage,
            format!("{kind}: {e}"),
            id.clone(),
        )
    })?;
    Ok((msg, id))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BodyState {
    pub id: u32,
    pub position: [f64; 3],
    /// Quaternion `[x, y, z, w]`.
    pub orientation: [f64; 4],
    pub linear_velocity: [f64; 3],
    pub angular_velocity: [f64; 3],
}

/// Messages the gateway sends.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Hello {
        protocol_version: u32,
        dt: f64,
        seed: u64,
        step: u64,
        paused: bool,
    },
    SceneGraph {
        protocol_version: u32,
        models: Vec<ModelNode>,
    },
    StateUpdate {
        step: u64,
        time: f64,
        bodies: Vec<BodyState>,
    },
    DisplayFrame {
        instance: String,
        display: String,
        width: u32,
        height: u32,
        /// Always `rgb8`: row-major, 3 bytes per pixel.
        encoding: String,
        /// Base64 (standard alphabet, padded).
        data: String,
    },
    Touch {
        instance: String,
        display: String,
        u: u32,
        v: u32,
        phase: TouchPhase,
        source: TouchSource,
    },
    Ack {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id: Option<Value>,
        command: String,
        step: u64,
        ok: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        error: Option<String>,
    },
    Error {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        id: Option<Value>,
        code: ErrorCode,
        detail: String,
    },
}

impl ServerMessage {
    pub fn scene_graph(g: SceneGraph) -> Self {
        ServerMessage::SceneGraph {
            protocol_version: PROTOCOL_VERSION,
            models: g.models,
        }
    }

    pub fn state(s: &WorldState) -> Self {
        ServerMessage::StateUpdate {
            step: s.step,
            time: s.time,
            bodies: s
                .bodies
                .iter()
                .map(|b| BodyState {
                    id: b.id.0,
                    position: b.pose.position.to_array(),
                    orientation: b.pose.orientation.to_array(),
                    linear_velocity: b.linear_velocity.to_array(),
                    angular_velocity: b.angular_velocity.to_array(),
                })
                .collect(),
        }
    }

    pub fn frame(instance: &str, f: &DisplayFrame) -> Self {
        ServerMessage::DisplayFrame {
            instance: instance.to_string(),
            display: f.display.clone(),
            width: f.width,
            height: f.height,
            encoding: "rgb8".into(),
            data: base64::engine::general_purpose::STANDARD.encode(&f.pixels),
        }
    }

    pub fn touch(instance: &str, t: &TouchEvent) -> Self {
        ServerMessage::Touch {
            instance: instance.to_string(),
            display: t.display.clone(),
            u: t.u,
            v: t.v,
            phase: t.phase,
            source: t.source,
        }
    }

    pub fn ack(id: Option<Value>, a: CommandAck) -> Self {
        ServerMessage::Ack {
            id,
            command: a.command,
            step: a.step,
            ok: a.ok,
            error: a.error,
        }
    }

    pub fn error(r: Rejection) -> Self {
        ServerMessage::Error {
            id: r.id,
            code: r.code,
            detail: r.detail,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("server messages serialize")
    }
}

/// Pixels of a `display_frame` message.
pub fn decode_frame_data(data: &str) -> Result<Vec<u8>, base64::DecodeError> {
    base64::engine::general_purpose::STANDARD.decode(data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_every_client_type() {
        let cases = [
            r#"{"type":"apply_wrench","body":3,"force":[0,0,20],"duration":0.05}"#,
            r#"{"type":"touch","instance":"cube","display":"pz","u":32,"v":32}"#,
            r#"{"type":"spawn","model":"display_cube","name":"c2","position":[0,0,0.5]}"#,
            r#"{"type":"pause"}"#,
            r#"{"type":"resume","protocol_version":1}"#,
            r#"{"type":"step_n","n":3,"id":"abc"}"#,
            r#"{"type":"select","body":null}"#,
        ];
        for c in cases {
            let (m, _) = parse_client(c).unwrap();
            m.into_command().unwrap();
        }
        let (m, id) = parse_client(r#"{"type":"step_n","n":3,"id":7}"#).unwrap();
        assert_eq!(m, ClientMessage::StepN { n: 3 });
        assert_eq!(id, Some(Value::from(7)));
    }

    #[test]
    fn wrench_defaults() {
        let (m, _) = parse_client(r#"{"type":"apply_wrench","torque":[0,0,1]}"#).unwrap();
        let Command::ApplyWrench { body, wrench } = m.into_command().unwrap() else {
            panic!()
        };
        assert_eq!(body, None);
        assert_eq!(wrench.duration, WrenchDuration::Impulse);
        assert_eq!(wrench.torque, DVec3::Z);
    }

    #[test]
    fn rejections() {
        assert_eq!(
            parse_client("{nope").unwrap_err().code,
            ErrorCode::MalformedJson
        );
        assert_eq!(
            parse_client("[1]").unwrap_err().code,
            ErrorCode::MalformedJson
        );
        assert_eq!(
            parse_client(r#"{"type":"fly"}"#).unwrap_err().code,
            ErrorCode::UnknownType
        );
        assert_eq!(
            parse_client(r#"{"n":1}"#).unwrap_err().code,
            ErrorCode::InvalidMessage
        );
        let r = parse_client(r#"{"type":"step_n","id":5}"#).unwrap_err();
        assert_eq!(
            (r.code, r.id),
            (ErrorCode::InvalidMessage, Some(Value::from(5)))
        );
        assert_eq!(
            parse_client(r#"{"type":"pause","protocol_version":2}"#)
                .unwrap_err()
                .code,
            ErrorCode::UnsupportedVersion
        );
        assert_eq!(
            parse_client(r#"{"type":"pause","extra":1}"#)
                .unwrap_err()
                .code,
            ErrorCode::InvalidMessage
        );
        let (m, _) = parse_client(r#"{"type":"apply_wrench","duration":-1}"#).unwrap();
        assert!(m.into_command().is_err());
    }

    #[test]
    fn server_messages_round_trip() {
        let f = DisplayFrame::new("pz", 2, 1, vec![1, 2, 3, 4, 5, 6]).unwrap();
        let m = ServerMessage::frame("cube", &f);
        let json = m.to_json();
        assert!(json.starts_with(r#"{"type":"display_frame""#));
        let back: ServerMessage = serde_json::from_str(&json).unwrap();
        let ServerMessage::DisplayFrame { data, .. } = &back else {
            panic!()
        };
        assert_eq!(decode_frame_data(data).unwrap(), f.pixels);
        assert_eq!(back, m);
    }
}
