//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! fails. Runs without a harness so the lines always print.

mod common;

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use glam::{DMat3, DQuat, DVec3};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use serde_json::json;

use common::*;
use vtui::protocol::MAX_FRAME_BYTES;
use vtui_core::apps::{
    build_app, face_up, spinning_top_scenario, Adjacency, FaceId, FaceRef, TopParams, DEBOUNCE,
};
use vtui_core::devices::{AccelSample, Backend, DeviceKind};
use vtui_core::msgbus::{BagFile, Bus, MessageEnvelope, VirtualClock};
use vtui_core::physics::*;
use vtui_core::runtime::{Command, RunMode, Simulation};
use vtui_core::scene::SceneSpec;

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn load(name: &str) -> SceneSpec {
    SceneSpec::load(scene_file(name)).unwrap()
}

fn sim_with(spec: &SceneSpec, bus: &Bus, apps: &[&str]) -> Simulation {
    let mut sim = Simulation::new(spec.clone(), bus.clone(), 60.0).unwrap();
    sim.bind_remaining_virtual().unwrap();
    for a in apps {
        for n in build_app(a, spec, bus).unwrap() {
            sim.add_node(n);
        }
    }
    sim
}

fn steps(sim: &mut Simulation, n: u64) {
    for _ in 0..n {
        sim.advance().unwrap();
    }
}

// ---- physics ----

fn free_fall() -> Outcome {
    let mut w = World::default();
    let id = w.add_body(
        BodyDesc::solid("s", Shape::Sphere { radius: 0.05 }, 1.0).at(DVec3::new(0.0, 0.0, 1.0)),
    );
    for _ in 0..400 {
        w.step().map_err(|e| e.to_string())?;
    }
    let fallen = 1.0 - w.body(id).unwrap().state.pose.position.z;
    let expected = 0.5 * 9.81 * 0.4 * 0.4;
    let err = (fallen - expected).abs() / expected;
    ensure!(err < 0.01, "fell {fallen:.5} m, expected {expected:.5} m");
    Ok(format!(
        "fell {fallen:.5} m vs {expected:.5} m ({:.3}%)",
        err * 100.0
    ))
}

fn restitution() -> Outcome {
    let (r, e, drop) = (0.05, 0.5, 1.0);
    let mut w = World::default();
    w.add_body(
        BodyDesc::fixed(
            "ground",
            Shape::Plane {
                normal: DVec3::Z,
                offset: 0.0,
            },
        )
        .with_material(0.5, e),
    );
    let id = w.add_body(
        BodyDesc::solid("ball", Shape::Sphere { radius: r }, 1.0)
            .at(DVec3::new(0.0, 0.0, drop + r))
            .with_material(0.5, e),
    );
    let (mut rising, mut apex) = (false, 0.0_f64);
    for _ in 0..3000 {
        w.step().map_err(|e| e.to_string())?;
        let b = w.body(id).unwrap();
        let vz = b.state.linear_velocity.z;
        rising |= vz > 0.0;
        if rising {
            apex = apex.max(b.state.pose.position.z - r);
            if vz < 0.0 {
                break;
            }
        }
    }
    // rebound speed e*v gives apex e^2 * h
    let ratio = apex / drop;
    ensure!(
        (ratio - e * e).abs() / (e * e) <= 0.10,
        "apex ratio {ratio:.4}"
    );
    Ok(format!("apex ratio {ratio:.4} vs {:.4}", e * e))
}

fn pendulum() -> Outcome {
    let length = 0.5;
    let a0 = 5f64.to_radians();
    let mut w = World::default();
    let pivot = w.add_body(
        BodyDesc::fixed("pivot", Shape::Sphere { radius: 0.005 }).at(DVec3::new(0.0, 0.0, 1.0)),
    );
    let bob = w.add_body(
        BodyDesc::solid("bob", Shape::Sphere { radius: 0.005 }, 1.0).at(DVec3::new(
            length * a0.sin(),
            0.0,
            1.0 - length * a0.cos(),
        )),
    );
    w.add_joint(JointDesc {
        kind: JointKind::Revolute,
        parent: pivot,
        child: bob,
        axis: DVec3::Y,
        anchor: DVec3::ZERO,
        limits: None,
        max_effort: None,
        damping: 0.0,
    })
    .map_err(|e| e.to_string())?;
    let mut crossings = Vec::new();
    let mut prev = w.body(bob).unwrap().state.pose.position.x;
    while crossings.len() < 4 && w.step_count() < 10_000 {
        w.step().map_err(|e| e.to_string())?;
        let x = w.body(bob).unwrap().state.pose.position.x;
        if prev > 0.0 && x <= 0.0 {
            crossings.push(w.time() - w.dt() * (1.0 - prev / (prev - x)));
        }
        prev = x;
    }
    ensure!(crossings.len() == 4, "only {} crossings", crossings.len());
    let period = (crossings[3] - crossings[0]) / 3.0;
    let expected = std::f64::consts::TAU * (length / 9.81).sqrt();
    let err = (period - expected).abs() / expected;
    ensure!(err < 0.03, "period {period:.4} s vs {expected:.4} s");
    Ok(format!(
        "period {period:.4} s vs {expected:.4} s ({:.2}%)",
        err * 100.0
    ))
}

fn angular_momentum() -> Outcome {
    let mut w = World::new(WorldConfig {
        gravity: DVec3::ZERO,
        ..Default::default()
    });
    let id = w.add_body(
        BodyDesc::solid(
            "box",
            Shape::Box {
                half_extents: DVec3::new(0.05, 0.1, 0.15),
            },
            1.0,
        )
        .with_velocity(DVec3::ZERO, DVec3::new(0.3, 0.2, 10.0)),
    );
    // L = R I R^T w from the body's own inertia, independent of the body accessor
    let momentum = |b: &Body| {
        let r = DMat3::from_quat(b.state.pose.orientation);
        r * b.inertia * r.transpose() * b.state.angular_velocity
    };
    let l0 = momentum(w.body(id).unwrap());
    for _ in 0..1000 {
        w.step().map_err(|e| e.to_string())?;
    }
    let l1 = momentum(w.body(id).unwrap());
    let drift = (l1 - l0).length() / l0.length();
    ensure!(drift < 0.02, "|dL|/|L| = {drift:.5}");
    Ok(format!("|dL|/|L| = {drift:.2e} over 1 s"))
}

// ---- determinism ----

fn scripted_run(spec: &SceneSpec) -> Vec<u8> {
    let bus = Bus::new();
    let rec = bus.record(&["/**"], std::io::sink()).unwrap();
    let mut sim = sim_with(spec, &bus, &["dice"]);
    let cube = sim.world().body_by_name("cube/body").unwrap().id;
    let tx = sim.commands();
    for k in 0..1500u64 {
        match k {
            100 => {
                let mut w = WrenchCommand::force(
                    cube,
                    DVec3::new(0.0, 0.0, 12.0),
                    WrenchDuration::Seconds(0.05),
                );
                w.torque = DVec3::new(0.004, 0.0015, 0.0);
                tx.send(Command::ApplyWrench {
                    body: Some(cube),
                    wrench: w,
                });
            }
            400 => tx.send(Command::Spawn {
                model: "display_cube".into(),
                name: "cube2".into(),
                pose: Pose::from_position(DVec3::new(0.2, 0.0, 0.2)),
            }),
            900 => tx.send(Command::Touch {
                instance: "cube".into(),
                display: "pz".into(),
                u: 5,
                v: 9,
                phase: vtui_core::devices::TouchPhase::Down,
            }),
            _ => {}
        }
        sim.advance().unwrap();
    }
    rec.stop().unwrap().normalized().to_bytes()
}

fn determinism() -> Outcome {
    let mut spec = load("display_cube.scene");
    spec.world.seed = 1234;
    // noise on, so the seed matters
    for d in spec.models.iter_mut().flat_map(|m| m.devices.iter_mut()) {
        if let DeviceKind::Accelerometer { noise_sigma } = &mut d.kind {
            *noise_sigma = 0.05;
        }
    }
    let a = scripted_run(&spec);
    let b = scripted_run(&spec);
    ensure!(a.len() > 10_000, "bag too small: {} bytes", a.len());
    ensure!(a == b, "normalized bags differ");
    spec.world.seed = 1235;
    let c = scripted_run(&spec);
    ensure!(c != a, "seed has no effect on a noisy run");
    Ok(format!("two runs, {} bytes each, bit-identical", a.len()))
}

// ---- bus ----

fn bus_fifo_drop_oldest(runner: &mut TestRunner) -> Result<(), String> {
    let strategy = (
        prop::collection::vec((0usize..3, prop::bool::weighted(0.15)), 0..150),
        1usize..10,
    );
    runner
        .run(&strategy, |(ops, depth)| {
            let bus = Bus::new();
            let pubs: Vec<_> = (0..3)
                .map(|p| bus.advertise(&format!("n{p}"), "/q", "T").unwrap())
                .collect();
            let sub = bus.subscribe("s", "/q", "T", depth).unwrap();
            let clock = VirtualClock::stepped();
            let mut model: VecDeque<(String, u64)> = VecDeque::new();
            let (mut drops, mut sent) = (0u64, [0u64; 3]);
            let mut seen = Vec::new();
            for (p, drain) in ops {
                if drain {
                    let got: Vec<_> = sub
                        .drain()
                        .into_iter()
                        .map(|e| (e.publisher.clone(), e.seq))
                        .collect();
                    prop_assert_eq!(&got, &model.drain(..).collect::<Vec<_>>());
                    seen.extend(got);
                } else {
                    let seq = pubs[p].publish(vec![], &clock).unwrap();
                    prop_assert_eq!(seq, sent[p]);
                    sent[p] += 1;
                    if model.len() == depth {
                        model.pop_front();
                        drops += 1;
                    }
                    model.push_back((format!("n{p}"), seq));
                }
            }
            seen.extend(
                sub.drain()
                    .into_iter()
                    .map(|e| (e.publisher.clone(), e.seq)),
            );
            prop_assert_eq!(sub.drops(), drops);
            prop_assert_eq!(seen.len() as u64 + drops, sent.iter().sum::<u64>());
            let mut last: BTreeMap<String, u64> = BTreeMap::new();
            for (p, s) in seen {
                if let Some(&l) = last.get(&p) {
                    prop_assert!(s > l, "publisher {} reordered", p);
                }
                last.insert(p, s);
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

fn bus_bag_round_trip(runner: &mut TestRunner) -> Result<(), String> {
    let strategy = prop::collection::vec(
        (
            0usize..4,
            "[a-z]{1,6}",
            0u64..100,
            any::<u64>(),
            prop::collection::vec(any::<u8>(), 0..48),
        ),
        0..30,
    );
    runner
        .run(&strategy, |recs| {
            let bag = BagFile::from_records(
                recs.into_iter()
                    .map(|(t, publisher, seq, stamp, payload)| MessageEnvelope {
                        topic: format!("/t{t}"),
                        type_tag: format!("T{t}"),
                        publisher,
                        seq,
                        stamp,
                        payload,
                    })
                    .collect(),
            );
            let bytes = bag.to_bytes();
            let back =
                BagFile::from_bytes(&bytes).map_err(|e| TestCaseError::fail(e.to_string()))?;
            prop_assert_eq!(&back, &bag);
            prop_assert_eq!(back.to_bytes(), bytes);
            Ok(())
        })
        .map_err(|e| e.to_string())
}

fn bus_properties() -> Outcome {
    let cases = 1000;
    let config = Config {
        failure_persistence: None,
        ..Config::with_cases(cases)
    };
    bus_fifo_drop_oldest(&mut TestRunner::new(config.clone()))?;
    bus_bag_round_trip(&mut TestRunner::new(config))?;
    Ok(format!(
        "FIFO/drop-oldest and bag round-trip, {cases} cases each"
    ))
}

// ---- HAL ----

fn hal_transparency() -> Outcome {
    let spec = load("display_cube.scene");
    let accel = "/tui/cube/accel/sample";

    let bus = Bus::new();
    let rec = bus
        .record(&[accel, "/app/**", "/tui/cube/*/cmd"], std::io::sink())
        .unwrap();
    let mut a = sim_with(&spec, &bus, &["dice"]);
    // settle and report +z first, then tip the cube onto another face
    steps(&mut a, 400);
    let cube = a.world().body_by_name("cube/body").unwrap().id;
    let mut w = WrenchCommand::force(
        cube,
        DVec3::new(0.0, 0.0, 4.0),
        WrenchDuration::Seconds(0.05),
    );
    w.torque = DVec3::new(0.004, 0.0, 0.0);
    a.commands().send(Command::ApplyWrench {
        body: Some(cube),
        wrench: w,
    });
    steps(&mut a, 3600);
    let bag_a = rec.stop().unwrap();

    // run B never throws the cube; its accelerometer is the recording
    let bus = Bus::new();
    let rec = bus
        .record(&["/app/**", "/tui/cube/*/cmd"], std::io::sink())
        .unwrap();
    let mut b = Simulation::new(spec.clone(), bus.clone(), 60.0).unwrap();
    let recorded = BagFile::from_records(bag_a.records_on(accel).cloned().collect());
    b.hal_mut()
        .bind("cube", "accel", Backend::replay(recorded))
        .unwrap();
    b.bind_remaining_virtual().unwrap();
    for n in build_app("dice", &spec, &bus).unwrap() {
        b.add_node(n);
    }
    steps(&mut b, 4000);
    let bag_b = rec.stop().unwrap();

    let outputs = |bag: &BagFile| {
        BagFile::from_records(
            bag.records
                .iter()
                .filter(|r| r.topic != accel)
                .cloned()
                .collect(),
        )
        .normalized()
    };
    let (na, nb) = (outputs(&bag_a), outputs(&bag_b));
    let faces = na.records_on("/app/dice/cube/face").count();
    ensure!(faces >= 2, "dice published {faces} results");
    ensure!(
        na.to_bytes() == nb.to_bytes(),
        "app bags differ: {} vs {} records",
        na.len(),
        nb.len()
    );
    Ok(format!(
        "{} app records identical, {faces} dice results",
        na.len()
    ))
}

// ---- face_up and accelerometer ----

fn rotations() -> Vec<DMat3> {
    let mut out = Vec::new();
    for perm in [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ] {
        for signs in 0..8u32 {
            let mut cols = [DVec3::ZERO; 3];
            for (c, &row) in perm.iter().enumerate() {
                cols[c][row] = if signs >> c & 1 == 1 { -1.0 } else { 1.0 };
            }
            let m = DMat3::from_cols(cols[0], cols[1], cols[2]);
            if m.determinant() > 0.0 {
                out.push(m);
            }
        }
    }
    out
}

fn last_accel(sim: &mut Simulation, n: u64) -> DVec3 {
    let sub = sim
        .bus()
        .subscribe_typed::<AccelSample>("acceptance", "/tui/cube/accel/sample", 1024)
        .unwrap();
    steps(sim, n);
    sub.drain_typed::<AccelSample>()
        .last()
        .expect("accelerometer published")
        .1
        .proper_acceleration
}

fn face_up_and_accelerometer() -> Outcome {
    let spec = load("display_cube.scene");
    let rots = rotations();
    ensure!(rots.len() == 24, "{} rotations", rots.len());
    let (mut matched, mut worst) = (0, 0.0_f64);
    for r in &rots {
        let mut s = spec.clone();
        s.spawns[1].pose = Pose::new(DVec3::new(0.0, 0.0, 0.03), DQuat::from_mat3(r));
        let mut sim = sim_with(&s, &Bus::new(), &[]);
        let a = last_accel(&mut sim, 300);
        worst = worst.max((a.length() - 9.81).abs());
        // brute force: the body axis this rotation sends to world +z
        let oracle = FaceId::ALL
            .into_iter()
            .find(|f| (*r * f.normal()).z > 0.5)
            .unwrap();
        matched += usize::from(face_up(a) == Some(oracle));
    }
    ensure!(matched == 24, "face_up matched {matched}/24");
    ensure!(worst <= 1e-6, "| |a| - 9.81 | = {worst:.2e} at rest");

    let mut s = spec.clone();
    s.spawns[1].pose = Pose::from_position(DVec3::new(0.0, 0.0, 5.0));
    let mut sim = sim_with(&s, &Bus::new(), &[]);
    let falling = last_accel(&mut sim, 200).length();
    ensure!(falling <= 1e-9, "free fall reads {falling:.2e}");
    Ok(format!(
        "24/24, rest error {worst:.1e}, free fall {falling:.1e} m/s^2"
    ))
}

// ---- neighbor ----

fn final_pairs(spec: SceneSpec) -> Vec<(FaceRef, FaceRef)> {
    let bus = Bus::new();
    let mut sim = sim_with(&spec, &bus, &["neighbor"]);
    let sub = bus
        .subscribe_typed::<Adjacency>("acceptance", "/app/neighbor/adjacency", 256)
        .unwrap();
    steps(&mut sim, 300);
    sub.drain_typed::<Adjacency>()
        .last()
        .map(|a| a.1.pairs.clone())
        .unwrap_or_default()
}

fn neighbor() -> Outcome {
    let base = load("sifteo_pair.scene");
    let threshold = 0.02;
    let half = 0.0215;
    for gap in [0.005, 0.01, 0.019, 0.021, 0.05, 0.2] {
        let mut s = base.clone();
        s.spawns[2].pose.position.x = 2.0 * half + gap;
        let pairs = final_pairs(s);
        let want = gap <= threshold;
        ensure!(pairs.is_empty() != want, "gap {gap}: pairs {pairs:?}");
        if want {
            let expected = vec![(
                FaceRef::new("s1", FaceId::PosX),
                FaceRef::new("s2", FaceId::NegX),
            )];
            ensure!(pairs == expected, "gap {gap}: pairs {pairs:?}");
        }
    }

    // slide s2 along y past s1 at a 1 cm gap
    let mut s = base.clone();
    s.world.gravity = DVec3::ZERO;
    let (x2, y0, speed) = (2.0 * half + 0.01, -0.06, 0.1);
    s.spawns[2].pose.position = DVec3::new(x2, y0, 0.012);
    let bus = Bus::new();
    let mut sim = sim_with(&s, &bus, &["neighbor"]);
    let sub = bus
        .subscribe_typed::<Adjacency>("acceptance", "/app/neighbor/adjacency", 4096)
        .unwrap();
    let s2 = sim.world().body_by_name("s2/body").unwrap().id;
    let dt = sim.world().dt();
    let total = (0.12 / speed / dt).round() as u64;
    let mut sensed = Vec::new();
    for k in 1..=total {
        let y = y0 + speed * dt * (k - 1) as f64;
        sim.world_mut().body_mut(s2).unwrap().state.pose.position = DVec3::new(x2, y, 0.012);
        sim.world_mut()
            .set_velocity(s2, DVec3::new(0.0, speed, 0.0), DVec3::ZERO)
            .unwrap();
        sim.advance().unwrap();
        // proximity sensors sample at 50 Hz
        if k % 20 == 0 {
            let y_now = sim.world().body(s2).unwrap().state.pose.position.y;
            sensed.push((sim.clock().now(), y_now.abs() <= half));
        }
    }
    let mut expected = Vec::new();
    let (mut on, mut run) = (false, 0);
    for &(t, c) in &sensed {
        run = if c != on { run + 1 } else { 0 };
        if run == DEBOUNCE {
            on = c;
            run = 0;
            expected.push((t, on));
        }
    }
    let changes: Vec<(u64, bool)> = sub
        .drain_typed::<Adjacency>()
        .into_iter()
        .map(|(e, a)| (e.stamp, !a.pairs.is_empty()))
        .skip_while(|c| !c.1)
        .collect();
    ensure!(expected.len() == 2, "oracle saw {} changes", expected.len());
    ensure!(
        changes == expected,
        "adjacency changes {changes:?}, expected {expected:?}"
    );
    let held = (changes[1].0 - changes[0].0) / 20_000_000;
    ensure!(held >= 3, "pair held only {held} samples");
    Ok(format!(
        "gap sweep matches threshold {threshold} m; slide-past: 1 on, 1 off, held {held} samples"
    ))
}

// ---- spinning top ----

fn spinning_top() -> Outcome {
    let spec = load("top.scene");
    let p = TopParams::from_scene(&spec);
    let spun = spinning_top_scenario(&spec, &p).map_err(|e| e.to_string())?;
    let still = spinning_top_scenario(
        &spec,
        &TopParams {
            spin: 0.0,
            ..p.clone()
        },
    )
    .map_err(|e| e.to_string())?;
    let (a, b) = (spun.final_tilt.to_degrees(), still.final_tilt.to_degrees());
    ensure!(a < b, "spun {a:.2} deg, unspun {b:.2} deg");
    Ok(format!(
        "tilt at t={} s: spun {a:.2} deg < unspun {b:.2} deg",
        p.duration
    ))
}

// ---- gateway ----

async fn gateway_script(url: &str) -> Outcome {
    let mut c = Client::connect(url).await;
    let hello = c.until(|_| true).await.remove(0);
    ensure!(
        is_type(&hello, "hello") && hello["protocol_version"] == 1,
        "first frame {hello}"
    );
    let graph = c.until(|_| true).await.remove(0);
    ensure!(is_type(&graph, "scene_graph"), "second frame {graph}");
    let cube = graph["models"]
        .as_array()
        .unwrap()
        .iter()
        .find(|m| m["instance"] == "cube")
        .unwrap();
    ensure!(
        cube["displays"].as_array().unwrap().len() == 6,
        "cube displays"
    );
    let body = cube["links"][0]["body"].as_u64().unwrap();

    c.send(json!({"type": "pause", "id": "pause"})).await;
    let msgs = c.until(|m| is_ack(m, "pause")).await;
    let s0 = msgs.last().unwrap()["step"].as_u64().unwrap();
    let idle = c.collect_for(Duration::from_millis(200)).await;
    ensure!(
        steps_of(&msgs)
            .iter()
            .chain(steps_of(&idle).iter())
            .all(|&s| s <= s0),
        "states after pause"
    );

    // queued while paused: applied at the boundary before step s0 + 1
    c.send(json!({"type": "apply_wrench", "body": body, "force": [0, 0, 20], "duration": 0.05, "id": "w"})).await;
    let ack = c.until(|m| is_ack(m, "w")).await.pop().unwrap();
    ensure!(ack["ok"] == true && ack["step"] == s0, "wrench ack {ack}");
    for k in 1..=3 {
        c.send(json!({"type": "step_n", "n": 1, "id": format!("s{k}")}))
            .await;
    }
    let mut msgs = c.until(|m| is_ack(m, "s3")).await;
    msgs.extend(c.collect_for(Duration::from_millis(300)).await);
    let got = steps_of(&msgs);
    ensure!(
        got == vec![s0 + 1, s0 + 2, s0 + 3],
        "step_n x3 gave states {got:?} after {s0}"
    );
    let first = msgs
        .iter()
        .find(|m| m["step"] == s0 + 1 && is_type(m, "state_update"))
        .unwrap();
    let vz = body_of(first, body)["linear_velocity"][2].as_f64().unwrap();
    ensure!(vz > 0.1, "vz {vz} at the first step after the wrench");

    c.send(json!({"type": "step_n", "n": 40, "id": "s40"}))
        .await;
    let mut msgs = c.until(|m| is_ack(m, "s40")).await;
    msgs.extend(
        c.until(|m| is_type(m, "state_update") && m["step"] == s0 + 43)
            .await,
    );
    let got = steps_of(&msgs);
    ensure!(
        got == (s0 + 4..=s0 + 43).collect::<Vec<_>>(),
        "step_n 40 gave {} states",
        got.len()
    );
    let z0 = body_of(first, body)["position"][2].as_f64().unwrap();
    let z1 = body_of(msgs.last().unwrap(), body)["position"][2]
        .as_f64()
        .unwrap();
    ensure!(z1 > z0 + 0.05, "cube rose {:.4} m", z1 - z0);

    c.send_text("{not json".into()).await;
    let e = c.until(|m| is_type(m, "error")).await.pop().unwrap();
    ensure!(e["code"] == "malformed_json", "{e}");
    c.send(json!({"type": "teleport", "id": "t"})).await;
    let e = c.until(|m| is_type(m, "error")).await.pop().unwrap();
    ensure!(e["code"] == "unknown_type" && e["id"] == "t", "{e}");
    c.send(json!({"type": "resume", "id": "r"})).await;
    c.until(|m| is_ack(m, "r")).await;
    let moving = c
        .until(|m| is_type(m, "state_update") && m["step"].as_u64().unwrap() > s0 + 100)
        .await;
    let live = steps_of(&moving);
    ensure!(
        live.windows(2).all(|w| w[1] > w[0]),
        "steps not monotonic after resume"
    );

    c.send_text("x".repeat(MAX_FRAME_BYTES + 1)).await;
    let deadline = Instant::now() + Duration::from_secs(5);
    loop {
        ensure!(Instant::now() < deadline, "no close after oversized frame");
        match c.next(Duration::from_secs(5)).await {
            Event::Json(_) => continue,
            Event::Closed(code) => {
                ensure!(code == Some(1009), "closed with {code:?}");
                break;
            }
            Event::Timeout => return Err("no close after oversized frame".into()),
        }
    }
    Ok(format!(
        "hello, scene_graph, pause at {s0}, wrench acked at {s0}, step_n exact, errors, 1009"
    ))
}

fn gateway() -> Outcome {
    let server = Server::start("display_cube.scene", RunMode::Realtime(1.0));
    let rt = tokio::runtime::Runtime::new().unwrap();
    rt.block_on(async {
        tokio::time::timeout(Duration::from_secs(60), gateway_script(&server.url()))
            .await
            .unwrap_or_else(|_| Err("timed out".into()))
    })
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("free-fall accuracy", free_fall),
        ("restitution apex ratio", restitution),
        ("pendulum period", pendulum),
        ("angular momentum conservation", angular_momentum),
        ("determinism", determinism),
        ("bus properties", bus_properties),
        ("HAL transparency", hal_transparency),
        ("face_up and accelerometer", face_up_and_accelerometer),
        ("Sifteo neighbor detection", neighbor),
        ("spinning top", spinning_top),
        ("gateway conformance", gateway),
    ];
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = BTreeSet::new();
    for (name, check) in criteria {
        let started = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail} [{secs:.1} s]"),
            Err(why) => {
                println!("FAIL  {name}: {why} [{secs:.1} s]");
                failed.insert(name);
            }
        }
    }
    println!(
        "{} passed, {} failed",
        criteria.len() - failed.len(),
        failed.len()
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
