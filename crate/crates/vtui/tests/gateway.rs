mod common;

use std::time::Duration;

use common::*;
use serde_json::json;
use vtui::protocol::decode_frame_data;
use vtui_core::runtime::RunMode;

async fn greeted(server: &Server) -> (Client, Vec<serde_json::Value>) {
    let mut c = Client::connect(&server.url()).await;
    let hello = c.until(|_| true).await;
    assert!(is_type(&hello[0], "hello"), "{:?}", hello[0]);
    let graph = c.until(|_| true).await;
    assert!(is_type(&graph[0], "scene_graph"), "{:?}", graph[0]);
    (c, vec![hello[0].clone(), graph[0].clone()])
}

#[tokio::test(flavor = "multi_thread")]
async fn greeting_carries_hello_graph_and_frames() {
    let server = Server::start("display_cube.scene", RunMode::Realtime(1.0));
    let (mut c, head) = greeted(&server).await;
    assert_eq!(head[0]["protocol_version"], 1);
    assert_eq!(head[0]["dt"], 0.001);
    assert_eq!(head[0]["seed"], 7);
    let cube = head[1]["models"]
        .as_array()
        .unwrap()
        .iter()
        .find(|m| m["instance"] == "cube")
        .unwrap();
    assert_eq!(cube["displays"].as_array().unwrap().len(), 6);
    // greeted before the dice app draws, the frames arrive as broadcasts
    let mut seen = std::collections::BTreeSet::new();
    let msgs = c
        .until(|m| {
            if is_type(m, "display_frame") {
                seen.insert(m["display"].as_str().unwrap().to_string());
            }
            seen.len() == 6
        })
        .await;
    for f in msgs.iter().filter(|m| is_type(m, "display_frame")) {
        assert_eq!(f["encoding"], "rgb8");
        assert_eq!(
            decode_frame_data(f["data"].as_str().unwrap())
                .unwrap()
                .len(),
            64 * 64 * 3
        );
    }
}

#[tokio::test(flavor = "multi_thread")]
async fn touch_is_echoed_with_ui_source() {
    let server = Server::start("display_cube.scene", RunMode::Realtime(1.0));
    let (mut c, _) = greeted(&server).await;
    c.send(
        json!({"type": "touch", "instance": "cube", "display": "pz", "u": 10, "v": 20, "id": 1}),
    )
    .await;
    let msgs = c.until(|m| is_type(m, "touch")).await;
    let t = msgs.last().unwrap();
    assert_eq!((t["u"].as_u64(), t["v"].as_u64()), (Some(10), Some(20)));
    assert_eq!(t["source"], "ui");
    assert!(msgs.iter().any(|m| is_ack(m, "1") || m["id"] == 1));
}

#[tokio::test(flavor = "multi_thread")]
async fn bad_commands_are_acked_with_errors() {
    let server = Server::start("display_cube.scene", RunMode::Realtime(1.0));
    let (mut c, _) = greeted(&server).await;
    c.send(json!({"type": "select", "body": 999, "id": "s"}))
        .await;
    let ack = c.until(|m| is_ack(m, "s")).await.pop().unwrap();
    assert_eq!(ack["ok"], false);
    assert!(ack["error"].as_str().is_some());
    c.send(
        json!({"type": "touch", "instance": "cube", "display": "nope", "u": 0, "v": 0, "id": "t"}),
    )
    .await;
    let ack = c.until(|m| is_ack(m, "t")).await.pop().unwrap();
    assert_eq!(ack["ok"], false);
}

#[tokio::test(flavor = "multi_thread")]
async fn invalid_and_versioned_messages() {
    let server = Server::start("display_cube.scene", RunMode::Realtime(1.0));
    let (mut c, _) = greeted(&server).await;
    c.send(json!({"type": "step_n", "n": "three", "id": 4}))
        .await;
    let e = c.until(|m| is_type(m, "error")).await.pop().unwrap();
    assert_eq!(e["code"], "invalid_message");
    assert_eq!(e["id"], 4);
    c.send(json!({"type": "pause", "protocol_version": 2}))
        .await;
    let e = c.until(|m| is_type(m, "error")).await.pop().unwrap();
    assert_eq!(e["code"], "unsupported_version");
    c.send(json!({"type": "pause", "protocol_version": 1, "id": "p"}))
        .await;
    let ack = c.until(|m| is_ack(m, "p")).await.pop().unwrap();
    assert_eq!(ack["ok"], true);
}

#[tokio::test(flavor = "multi_thread")]
async fn spawn_rebroadcasts_the_scene_graph_to_everyone() {
    let server = Server::start("display_cube.scene", RunMode::Realtime(1.0));
    let (mut a, _) = greeted(&server).await;
    let (mut b, _) = greeted(&server).await;
    a.send(json!({"type": "spawn", "model": "display_cube", "name": "cube2", "position": [0.3, 0.0, 0.03], "id": "sp"}))
        .await;
    let (mut acked, mut graphed) = (false, false);
    a.until(|m| {
        if is_ack(m, "sp") {
            assert_eq!(m["ok"], true, "{m}");
            acked = true;
        }
        graphed |= is_type(m, "scene_graph");
        acked && graphed
    })
    .await;
    let g = b.until(|m| is_type(m, "scene_graph")).await.pop().unwrap();
    let names: Vec<&str> = g["models"]
        .as_array()
        .unwrap()
        .iter()
        .map(|m| m["instance"].as_str().unwrap())
        .collect();
    assert!(names.contains(&"cube2"), "{names:?}");
    // the other client does not see the spawner's ack
    let rest = b.collect_for(Duration::from_millis(200)).await;
    assert!(!rest.iter().any(|m| is_type(m, "ack")));
}

#[tokio::test(flavor = "multi_thread")]
async fn binary_frames_get_an_error() {
    use futures_util::SinkExt;
    let server = Server::start("display_cube.scene", RunMode::Realtime(1.0));
    let (ws, _) = tokio_tungstenite::connect_async(server.url())
        .await
        .unwrap();
    let mut ws = ws;
    ws.send(tokio_tungstenite::tungstenite::Message::Binary(
        vec![1, 2, 3].into(),
    ))
    .await
    .unwrap();
    let mut c = Client::from_stream(ws);
    let e = c.until(|m| is_type(m, "error")).await.pop().unwrap();
    assert_eq!(e["code"], "malformed_json");
}

#[tokio::test(flavor = "multi_thread")]
async fn shutdown_closes_clients_with_going_away() {
    let mut server = Server::start("display_cube.scene", RunMode::Realtime(1.0));
    let (mut c, _) = greeted(&server).await;
    let report = tokio::task::spawn_blocking(move || server.stop())
        .await
        .unwrap()
        .unwrap();
    assert!(report.steps > 0);
    loop {
        match c.next(Duration::from_secs(5)).await {
            Event::Json(_) => continue,
            Event::Closed(code) => {
                assert_eq!(code, Some(1001));
                break;
            }
            Event::Timeout => panic!("connection stayed open"),
        }
    }
}

#[tokio::test(flavor = "multi_thread")]
async fn oversized_frames_close_with_1009() {
    let server = Server::start("display_cube.scene", RunMode::Realtime(1.0));
    for size in [vtui::protocol::MAX_FRAME_BYTES + 1, 5 << 20] {
        let (mut c, _) = greeted(&server).await;
        c.send_text("x".repeat(size)).await;
        loop {
            match c.next(Duration::from_secs(5)).await {
                Event::Json(_) => continue,
                Event::Closed(code) => {
                    assert_eq!(code, Some(1009), "{size} bytes");
                    break;
                }
                Event::Timeout => panic!("{size} bytes: still open"),
            }
        }
    }
}

/// A stepped run records the same bag whether or not a gateway with a
/// connected client is pumping alongside it.
#[test]
fn gateway_does_not_perturb_the_trajectory() {
    use std::sync::atomic::AtomicBool;
    use vtui::Gateway;
    use vtui_core::msgbus::{BagFile, Bus};
    use vtui_core::runtime::{prepare, RecordSpec, RunConfig};

    let dir = tempfile::tempdir().unwrap();
    let config = |name: &str| RunConfig {
        duration: Some(1.0),
        record: Some(RecordSpec {
            patterns: vec!["/**".into()],
            out: dir.path().join(name),
        }),
        ..RunConfig::new(scene_file("display_cube.scene"))
    };
    let stop = AtomicBool::new(false);

    let plain = config("plain.bag");
    prepare(&plain, Bus::new())
        .unwrap()
        .run(&plain, &stop)
        .unwrap();

    let served = config("served.bag");
    let prepared = prepare(&served, Bus::new()).unwrap();
    let gateway = Gateway::start("127.0.0.1:0", prepared.sim.commands()).unwrap();
    let url = format!("ws://{}/ws", gateway.local_addr());
    let mut tap = gateway.tap(&prepared.sim);
    let rt = tokio::runtime::Runtime::new().unwrap();
    let client = rt.spawn(async move {
        let mut c = Client::connect(&url).await;
        c.collect_for(Duration::from_secs(30)).await.len()
    });
    // wait for the connection before stepping
    while gateway.hub().connections() == 0 {
        std::thread::sleep(Duration::from_millis(5));
    }
    prepared
        .run_with(&served, &stop, |sim| tap.pump(sim))
        .unwrap();
    drop(gateway);
    let received = rt.block_on(client).unwrap();
    assert!(received > 10, "client saw {received} frames");

    let a = BagFile::read_file(dir.path().join("plain.bag"))
        .unwrap()
        .normalized();
    let b = BagFile::read_file(dir.path().join("served.bag"))
        .unwrap()
        .normalized();
    assert!(a.len() > 100);
    assert_eq!(a.to_bytes(), b.to_bytes());
}
