use std::path::PathBuf;

use glam::{DMat3, DQuat, DVec3};
use proptest::prelude::*;
use vtui_core::devices::{DeviceDescriptor, DeviceKind, DisplaySpec};
use vtui_core::physics::{JointKind, Pose, Shape, SolverParams, World};
use vtui_core::scene::*;

fn scene_file(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenes")
        .join(name)
}

const MINIMAL: &str = r#"
scene_format = 1

[[model]]
name = "ground"
[[model.link]]
name = "plane"
geometry = { plane = { normal = [0.0, 0.0, 1.0], offset = 0.0 } }
mass = 0.0

[[model]]
name = "cube"
[[model.link]]
name = "body"
geometry = { box = [0.025, 0.025, 0.025] }
mass = 0.1
"#;

fn codes(spec: &SceneSpec) -> Vec<DiagCode> {
    validate(spec).into_iter().map(|d| d.code).collect()
}

#[test]
fn minimal_scene_has_two_links() {
    let spec = parse_scene(MINIMAL).unwrap();
    let links: usize = spec.models.iter().map(|m| m.links.len()).sum();
    assert_eq!(links, 2);
    assert!(spec.model("ground").unwrap().links[0].is_static());
    assert_eq!(spec.model("cube").unwrap().links[0].mass, 0.1);
    assert!(validate(&spec).is_empty());
}

#[test]
fn joint_to_missing_link_is_reported() {
    let text = format!(
        "{MINIMAL}\n[[model.joint]]\nname = \"j\"\ntype = \"revolute\"\nparent = \"body\"\nchild = \"lid\"\n"
    );
    let spec = parse_scene(&text).unwrap();
    let diags = validate(&spec);
    assert_eq!(diags.len(), 1, "{diags:?}");
    assert_eq!(diags[0].code, DiagCode::UnknownLink);
    assert!(diags[0].message.contains("unknown link"), "{}", diags[0]);
}

#[test]
fn shipped_scenes_validate_clean() {
    for name in [
        "display_cube.scene",
        "sifteo_pair.scene",
        "io_cube.scene",
        "marble.scene",
        "top.scene",
    ] {
        let spec = SceneSpec::load(scene_file(name)).unwrap_or_else(|e| panic!("{name}: {e}"));
        let diags = validate(&spec);
        assert!(diags.is_empty(), "{name}: {diags:?}");
        build_world(&spec).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}

#[test]
fn display_cube_has_six_displays_and_an_accelerometer() {
    let spec = SceneSpec::load(scene_file("display_cube.scene")).unwrap();
    let cube = spec.model("display_cube").unwrap();
    assert_eq!(cube.links.len(), 1);
    assert_eq!(cube.displays.len(), 6);
    let accels = cube
        .devices
        .iter()
        .filter(|d| matches!(d.kind, DeviceKind::Accelerometer { .. }))
        .count();
    assert_eq!(accels, 1);
    // every face normal appears once
    let mut normals: Vec<[i32; 3]> = cube
        .displays
        .iter()
        .map(|d| [d.normal.x as i32, d.normal.y as i32, d.normal.z as i32])
        .collect();
    normals.sort();
    normals.dedup();
    assert_eq!(normals.len(), 6);
}

#[test]
fn sifteo_pair_validates_with_no_diagnostics() {
    let spec = SceneSpec::load(scene_file("sifteo_pair.scene")).unwrap();
    assert_eq!(validate(&spec), vec![]);
    assert_eq!(
        spec.spawns.iter().filter(|s| s.model == "sifteo").count(),
        2
    );
}

#[test]
fn joint_loop_is_diagnosed() {
    let text = r#"
scene_format = 1
[[model]]
name = "m"
[[model.link]]
name = "a"
geometry = { sphere = 0.1 }
mass = 1.0
[[model.link]]
name = "b"
geometry = { sphere = 0.1 }
mass = 1.0
[[model.joint]]
name = "ab"
type = "fixed"
parent = "a"
child = "b"
[[model.joint]]
name = "ba"
type = "fixed"
parent = "b"
child = "a"
"#;
    let spec = parse_scene(text).unwrap();
    assert!(
        codes(&spec).contains(&DiagCode::JointLoop),
        "{:?}",
        validate(&spec)
    );
}

#[test]
fn restitution_out_of_range_is_diagnosed() {
    let text = MINIMAL.replace("mass = 0.1", "mass = 0.1\nrestitution = 1.5");
    let spec = parse_scene(&text).unwrap();
    let diags = validate(&spec);
    assert_eq!(diags.len(), 1, "{diags:?}");
    assert_eq!(diags[0].code, DiagCode::Range);
    assert_eq!(diags[0].code.as_str(), "RANGE");
}

#[test]
fn static_child_and_bad_axis_are_diagnosed() {
    let text = r#"
scene_format = 1
[[model]]
name = "m"
[[model.link]]
name = "base"
geometry = { box = [0.1, 0.1, 0.1] }
mass = 1.0
[[model.link]]
name = "wall"
geometry = { box = [0.1, 0.1, 0.1] }
mass = 0.0
[[model.joint]]
name = "j"
type = "revolute"
parent = "base"
child = "wall"
axis = [0.0, 0.0, 2.0]
"#;
    let spec = parse_scene(text).unwrap();
    let found = codes(&spec);
    assert!(found.contains(&DiagCode::StaticChild), "{found:?}");
    assert!(found.contains(&DiagCode::NotUnit), "{found:?}");
}

#[test]
fn sliding_is_an_alias_for_prismatic() {
    let text = r#"
scene_format = 1
[[model]]
name = "m"
[[model.link]]
name = "a"
geometry = { box = [0.1, 0.1, 0.1] }
mass = 1.0
[[model.link]]
name = "b"
geometry = { box = [0.1, 0.1, 0.1] }
mass = 1.0
[[model.joint]]
name = "j"
type = "sliding"
parent = "a"
child = "b"
axis = [1.0, 0.0, 0.0]
limits = [0.0, 0.2]
"#;
    let spec = parse_scene(text).unwrap();
    assert_eq!(spec.models[0].joints[0].kind, JointKind::Prismatic);
}

#[test]
fn bad_unit_reports_location() {
    let text = MINIMAL.replace("mass = 0.1", "mass = \"100 g\"");
    match parse_scene(&text) {
        Err(SceneError::BadUnit { location, .. }) => {
            let loc = location.expect("location");
            assert_eq!(loc.line, 16);
        }
        other => panic!("expected BadUnit, got {other:?}"),
    }
}

#[test]
fn unknown_field_reports_name_and_location() {
    let text = MINIMAL.replace("mass = 0.1", "mass = 0.1\ncolour = [1, 2, 3]");
    match parse_scene(&text) {
        Err(SceneError::UnknownField { location, field }) => {
            assert_eq!(field, "colour");
            assert_eq!(location.expect("location").line, 17);
        }
        other => panic!("expected UnknownField, got {other:?}"),
    }
}

#[test]
fn syntax_error_reports_location() {
    let text = MINIMAL.replace("[0.025, 0.025, 0.025]", "[0.025, 0.025");
    match parse_scene(&text) {
        Err(SceneError::Syntax { location, .. }) => {
            let location = location.expect("location");
            assert_eq!(location.line, 15);
            assert!(location.column > 1);
        }
        other => panic!("expected Syntax, got {other:?}"),
    }
}

#[test]
fn wrong_format_version_is_rejected() {
    let text = MINIMAL.replace("scene_format = 1", "scene_format = 2");
    assert!(parse_scene(&text).is_err());
}

#[test]
fn auto_inertia_closed_forms() {
    let cube = auto_inertia(
        &Shape::Box {
            half_extents: DVec3::splat(0.5),
        },
        1.0,
    )
    .unwrap();
    assert!((cube - DMat3::from_diagonal(DVec3::splat(1.0 / 6.0))).abs_diff_eq(DMat3::ZERO, 1e-12));

    let sphere = auto_inertia(&Shape::Sphere { radius: 0.5 }, 2.0).unwrap();
    assert!(sphere.abs_diff_eq(DMat3::from_diagonal(DVec3::splat(0.2)), 1e-12));

    assert_eq!(
        auto_inertia(&Shape::Sphere { radius: 0.5 }, 0.0),
        Err(InertiaError::ZeroMass)
    );
    assert!(auto_inertia(
        &Shape::Plane {
            normal: DVec3::Z,
            offset: 0.0
        },
        1.0
    )
    .is_err());
}

/// Midpoint rule in cylindrical coordinates over the solid cylinder.
fn integrate_cylinder(r: f64, half_length: f64, mass: f64) -> DVec3 {
    let (nr, nt, nz) = (200, 64, 200);
    let volume = std::f64::consts::PI * r * r * 2.0 * half_length;
    let density = mass / volume;
    let (dr, dt, dz) = (
        r / nr as f64,
        std::f64::consts::TAU / nt as f64,
        2.0 * half_length / nz as f64,
    );
    let mut acc = DVec3::ZERO;
    for i in 0..nr {
        let rho = (i as f64 + 0.5) * dr;
        for j in 0..nt {
            let th = (j as f64 + 0.5) * dt;
            let (x, y) = (rho * th.cos(), rho * th.sin());
            for k in 0..nz {
                let z = -half_length + (k as f64 + 0.5) * dz;
                let dm = density * rho * dr * dt * dz;
                acc += DVec3::new(y * y + z * z, x * x + z * z, x * x + y * y) * dm;
            }
        }
    }
    acc
}

#[test]
fn auto_inertia_cylinder_matches_volume_integral() {
    let t = auto_inertia(
        &Shape::Cylinder {
            radius: 0.1,
            half_length: 0.2,
        },
        1.0,
    )
    .unwrap();
    let numeric = integrate_cylinder(0.1, 0.2, 1.0);
    for (i, want) in numeric.to_array().into_iter().enumerate() {
        let got = t.col(i)[i];
        assert!(
            (got - want).abs() / want < 1e-4,
            "axis {i}: {got} vs {want}"
        );
    }
    assert!((t.col(0)[0] - 0.015833333333).abs() < 1e-9);
    assert!((t.col(2)[2] - 0.005).abs() < 1e-12);
}

fn load_world(name: &str) -> (SceneSpec, World) {
    let spec = SceneSpec::load(scene_file(name)).unwrap();
    let world = World::new(spec.world.config());
    (spec, world)
}

#[test]
fn spawning_twice_gives_disjoint_instances() {
    let (spec, mut world) = load_world("display_cube.scene");
    let model = spec.model("display_cube").unwrap();
    let c1 = spawn(
        &mut world,
        model,
        Pose::from_position(DVec3::new(0.0, 0.0, 0.1)),
        "c1",
    )
    .unwrap();
    let c2 = spawn(
        &mut world,
        model,
        Pose::from_position(DVec3::new(0.5, 0.0, 0.1)),
        "c2",
    )
    .unwrap();
    let b1: Vec<_> = c1.links.values().collect();
    let b2: Vec<_> = c2.links.values().collect();
    assert!(b1.iter().all(|b| !b2.contains(b)));
    let n1 = &world.body(*b1[0]).unwrap().name;
    let n2 = &world.body(*b2[0]).unwrap().name;
    assert_eq!(n1, "c1/body");
    assert_eq!(n2, "c2/body");
}

#[test]
fn spawn_at_identity_keeps_link_pose() {
    let (spec, mut world) = load_world("top.scene");
    let model = spec.model("top").unwrap();
    let inst = spawn(&mut world, model, Pose::IDENTITY, "t").unwrap();
    for link in &model.links {
        let body = world.body(inst.links[&link.name]).unwrap();
        assert_eq!(body.state.pose, link.pose, "{}", link.name);
    }
}

#[test]
fn spawn_composes_instance_pose() {
    let (spec, mut world) = load_world("top.scene");
    let model = spec.model("top").unwrap();
    let pose = Pose::new(DVec3::new(1.0, 2.0, 0.0), DQuat::from_rotation_z(0.5));
    let inst = spawn(&mut world, model, pose, "t").unwrap();
    let wheel = world.body(inst.links["wheel"]).unwrap();
    let want = pose.transform_point(model.link("wheel").unwrap().pose.position);
    assert!((wheel.state.pose.position - want).length() < 1e-12);
}

#[test]
fn spawn_name_collision() {
    let (spec, mut world) = load_world("display_cube.scene");
    let model = spec.model("display_cube").unwrap();
    spawn(&mut world, model, Pose::IDENTITY, "c1").unwrap();
    let count = world.bodies().len();
    assert!(matches!(
        spawn(&mut world, model, Pose::IDENTITY, "c1"),
        Err(SpawnError::NameCollision(_))
    ));
    assert_eq!(world.bodies().len(), count);
}

#[test]
fn spawn_rejects_invalid_model() {
    let mut spec = parse_scene(MINIMAL).unwrap();
    spec.models[1].links[0].restitution = 2.0;
    let mut world = World::new(spec.world.config());
    assert!(matches!(
        spawn(&mut world, &spec.models[1], Pose::IDENTITY, "x"),
        Err(SpawnError::ValidationFailed(_))
    ));
}

#[test]
fn shipped_scenes_survive_serialize_round_trip() {
    for name in [
        "display_cube.scene",
        "sifteo_pair.scene",
        "io_cube.scene",
        "marble.scene",
        "top.scene",
    ] {
        let spec = SceneSpec::load(scene_file(name)).unwrap();
        let again = parse_scene(&serialize_scene(&spec)).unwrap();
        assert_eq!(spec, again, "{name}");
    }
}

// ---- generated specs

fn finite(lo: f64, hi: f64) -> impl Strategy<Value = f64> {
    lo..hi
}

fn vec3(lo: f64, hi: f64) -> impl Strategy<Value = DVec3> {
    (finite(lo, hi), finite(lo, hi), finite(lo, hi)).prop_map(|(x, y, z)| DVec3::new(x, y, z))
}

fn unit() -> impl Strategy<Value = DVec3> {
    vec3(-1.0, 1.0)
        .prop_filter("non-zero", |v| v.length() > 0.1)
        .prop_map(|v| v.normalize())
}

fn pose() -> impl Strategy<Value = Pose> {
    prop_oneof![
        Just(Pose::IDENTITY),
        (vec3(-2.0, 2.0), unit(), finite(-3.0, 3.0))
            .prop_map(|(p, axis, angle)| Pose::new(p, DQuat::from_axis_angle(axis, angle))),
    ]
}

fn geometry() -> impl Strategy<Value = Shape> {
    prop_oneof![
        finite(0.001, 1.0).prop_map(|radius| Shape::Sphere { radius }),
        vec3(0.001, 1.0).prop_map(|half_extents| Shape::Box { half_extents }),
        (finite(0.001, 1.0), finite(0.001, 1.0)).prop_map(|(radius, half_length)| {
            Shape::Cylinder {
                radius,
                half_length,
            }
        }),
    ]
}

fn link(name: String) -> impl Strategy<Value = LinkSpec> {
    (
        geometry(),
        finite(0.01, 10.0),
        prop::bool::ANY,
        finite(0.0, 2.0),
        finite(0.0, 1.0),
        pose(),
        any::<[u8; 3]>(),
    )
        .prop_map(
            move |(geometry, mass, explicit, friction, restitution, pose, color)| LinkSpec {
                name: name.clone(),
                inertia: if explicit {
                    InertiaSpec::Tensor(geometry.solid_inertia(mass).unwrap())
                } else {
                    InertiaSpec::Auto
                },
                geometry,
                mass,
                friction,
                restitution,
                pose,
                color,
            },
        )
}

fn joint(name: String, parent: String, child: String) -> impl Strategy<Value = JointSpec> {
    (
        prop_oneof![
            Just(JointKind::Fixed),
            Just(JointKind::Revolute),
            Just(JointKind::Prismatic)
        ],
        unit(),
        vec3(-1.0, 1.0),
        prop::option::of((finite(-1.0, 0.0), finite(0.0, 1.0)).prop_map(|(a, b)| [a, b])),
        prop::option::of(finite(0.1, 100.0)),
        finite(0.0, 5.0),
    )
        .prop_map(
            move |(kind, axis, anchor, limits, max_effort, damping)| JointSpec {
                name: name.clone(),
                kind,
                parent: parent.clone(),
                child: child.clone(),
                axis,
                anchor,
                limits: if kind == JointKind::Fixed {
                    None
                } else {
                    limits
                },
                max_effort,
                damping,
            },
        )
}

fn device(id: String, link: String) -> impl Strategy<Value = DeviceDescriptor> {
    (
        prop_oneof![
            finite(0.0, 1.0).prop_map(|noise_sigma| DeviceKind::Accelerometer { noise_sigma }),
            Just(DeviceKind::Contact),
            finite(0.01, 2.0).prop_map(|max_range| DeviceKind::Proximity { max_range }),
            Just(DeviceKind::Radius),
        ],
        prop_oneof![Just(10.0), Just(100.0), Just(500.0)],
        pose(),
    )
        .prop_map(move |(kind, rate, pose)| DeviceDescriptor {
            id: id.clone(),
            kind,
            link: link.clone(),
            pose,
            rate,
            battery: None,
        })
}

fn model(index: usize) -> impl Strategy<Value = ModelSpec> {
    (1usize..4)
        .prop_flat_map(move |n| {
            let links: Vec<_> = (0..n).map(|i| link(format!("l{i}"))).collect();
            let joints: Vec<_> = (1..n)
                .map(|i| joint(format!("j{i}"), format!("l{}", i - 1), format!("l{i}")))
                .collect();
            let devices = prop::collection::vec(0..n, 0..3);
            (links, joints, devices)
        })
        .prop_flat_map(move |(links, joints, mounts)| {
            let devices: Vec<_> = mounts
                .iter()
                .enumerate()
                .map(|(i, m)| device(format!("d{i}"), format!("l{m}")))
                .collect();
            let display = prop::option::of((1u32..256, 1u32..256, finite(0.01, 0.5)));
            (Just(links), Just(joints), devices, display)
        })
        .prop_map(move |(links, joints, devices, display)| ModelSpec {
            name: format!("m{index}"),
            displays: display
                .map(|(width, height, s)| DisplaySpec {
                    id: "screen".into(),
                    link: links[0].name.clone(),
                    width,
                    height,
                    center: DVec3::new(0.0, 0.0, 0.1),
                    normal: DVec3::Z,
                    up: DVec3::Y,
                    size: [s, s],
                    touch: width % 2 == 0,
                    battery: None,
                })
                .into_iter()
                .collect(),
            links,
            joints,
            devices,
        })
}

fn scene() -> impl Strategy<Value = SceneSpec> {
    (
        prop::collection::vec(Just(()), 1..3).prop_flat_map(|v| {
            v.iter()
                .enumerate()
                .map(|(i, _)| model(i))
                .collect::<Vec<_>>()
        }),
        vec3(-20.0, 20.0),
        prop_oneof![Just(0.001), Just(0.002), Just(0.0005)],
        any::<u64>(),
        prop::bool::ANY,
        prop::collection::btree_map("[a-z]{1,6}", finite(-100.0, 100.0), 0..3),
    )
        .prop_flat_map(|(models, gravity, dt, seed, tuned, params)| {
            let spawns = prop::collection::vec((0..models.len(), pose()), 0..3);
            (
                Just(models),
                Just(gravity),
                Just(dt),
                Just(seed),
                Just(tuned),
                Just(params),
                spawns,
            )
        })
        .prop_map(
            |(models, gravity, dt, seed, tuned, params, spawns)| SceneSpec {
                world: WorldSpec {
                    gravity,
                    dt,
                    seed,
                    solver: if tuned {
                        SolverParams {
                            iterations: 20,
                            baumgarte: 0.1,
                            ..SolverParams::default()
                        }
                    } else {
                        SolverParams::default()
                    },
                },
                spawns: spawns
                    .into_iter()
                    .enumerate()
                    .map(|(i, (m, pose))| SpawnSpec {
                        model: models[m].name.clone(),
                        name: format!("i{i}"),
                        pose,
                    })
                    .collect(),
                models,
                params: if params.is_empty() {
                    Default::default()
                } else {
                    [("app".to_string(), params)].into_iter().collect()
                },
            },
        )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn parse_of_serialize_is_identity(spec in scene()) {
        let text = serialize_scene(&spec);
        let back = parse_scene(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
        prop_assert_eq!(back, spec);
    }

    #[test]
    fn auto_inertia_is_spd(shape in geometry(), mass in 1e-3f64..100.0) {
        let t = auto_inertia(&shape, mass).unwrap();
        // symmetric
        prop_assert!((t - t.transpose()).abs_diff_eq(DMat3::ZERO, 1e-15));
        // leading principal minors positive (Sylvester)
        let m1 = t.col(0)[0];
        let m2 = t.col(0)[0] * t.col(1)[1] - t.col(1)[0] * t.col(0)[1];
        prop_assert!(m1 > 0.0 && m2 > 0.0 && t.determinant() > 0.0);
        // triangle inequality holds for any physical inertia
        let d = [t.col(0)[0], t.col(1)[1], t.col(2)[2]];
        for i in 0..3 {
            prop_assert!(d[i] <= d[(i + 1) % 3] + d[(i + 2) % 3] + 1e-15);
        }
    }
}
