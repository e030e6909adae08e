mod common;

use std::process::{Command, Output};

use common::scene_file;
use vtui_core::msgbus::{BagFile, MessageEnvelope};

fn vtui(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vtui"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn field(text: &str, key: &str) -> f64 {
    let line = text
        .lines()
        .find(|l| l.starts_with(key))
        .unwrap_or_else(|| panic!("no {key} in {text}"));
    line[key.len()..]
        .trim()
        .trim_end_matches('s')
        .trim()
        .parse()
        .unwrap()
}

fn three_record_bag(dir: &std::path::Path) -> std::path::PathBuf {
    let bag = BagFile::from_records(
        (0..3)
            .map(|i| MessageEnvelope {
                topic: "/x/y".into(),
                type_tag: "Float64".into(),
                publisher: "p".into(),
                seq: i,
                stamp: i * 100_000_000,
                payload: (i as f64).to_le_bytes().to_vec(),
            })
            .collect(),
    );
    let path = dir.join("three.bag");
    bag.write_file(&path).unwrap();
    path
}

#[test]
fn validate_exit_codes() {
    let ok = vtui(&[
        "validate",
        scene_file("display_cube.scene").to_str().unwrap(),
    ]);
    assert_eq!(
        ok.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&ok.stderr)
    );
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.scene");
    std::fs::write(
        &bad,
        "scene_format = 1\n[[spawn]]\nmodel = \"nope\"\nname = \"a\"\n",
    )
    .unwrap();
    let out = vtui(&["validate", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty() || !out.stdout.is_empty());
    assert_eq!(
        vtui(&["validate", "/no/such/file.scene"]).status.code(),
        Some(2)
    );
}

#[test]
fn run_reports_steps() {
    let out = vtui(&[
        "run",
        "--scene",
        scene_file("display_cube.scene").to_str().unwrap(),
        "--duration",
        "0.5",
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(field(&stdout(&out), "steps:"), 500.0);
}

#[test]
fn bag_info_counts_records() {
    let dir = tempfile::tempdir().unwrap();
    let path = three_record_bag(dir.path());
    let out = vtui(&["bag", "info", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).starts_with("records: 3"), "{}", stdout(&out));
    assert!(stdout(&out).contains("/x/y"));
}

#[test]
fn replay_speed_halves_virtual_duration() {
    let dir = tempfile::tempdir().unwrap();
    let path = three_record_bag(dir.path());
    let p = path.to_str().unwrap();
    let one = stdout(&vtui(&["replay", p]));
    let two = stdout(&vtui(&["replay", p, "--speed", "2"]));
    assert_eq!(field(&one, "messages:"), 3.0);
    let (d1, d2) = (
        field(&one, "virtual_duration:"),
        field(&two, "virtual_duration:"),
    );
    assert!((d1 - 0.2).abs() < 1e-9, "{d1}");
    assert!((d2 - 0.1).abs() < 1e-9, "{d2}");
}

#[test]
fn record_writes_a_readable_bag() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("rec.bag");
    let o = vtui(&[
        "record",
        "--scene",
        scene_file("sifteo_pair.scene").to_str().unwrap(),
        "--duration",
        "0.3",
        "--record",
        "/tui/**",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let bag = BagFile::read_file(&out).unwrap();
    assert!(!bag.is_empty());
    assert!(bag.records.iter().all(|r| r.topic.starts_with("/tui/")));
}

#[test]
fn record_without_out_is_a_usage_error() {
    let o = vtui(&[
        "record",
        "--scene",
        scene_file("sifteo_pair.scene").to_str().unwrap(),
        "--record",
        "/**",
    ]);
    assert_eq!(o.status.code(), Some(2));
}
