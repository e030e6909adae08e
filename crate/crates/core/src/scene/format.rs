use std::collections::BTreeMap;
use std::fmt;

use glam::{DMat3, DQuat, DVec3, EulerRot};
use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};
use toml::Spanned;

use super::{
    InertiaSpec, JointSpec, LinkSpec, Location, ModelSpec, SceneError, SceneSpec, SpawnSpec,
    WorldSpec,
};
use crate::devices::{DeviceDescriptor, DeviceKind, DisplaySpec};
use crate::physics::{JointKind, Pose, Shape, SolverParams};

pub const SCENE_FORMAT_VERSION: i64 = 1;

const BAD_UNIT: &str = "bad unit";

/// A plain number. Strings such as `"5 cm"` are rejected as bad units.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Num(f64);

impl<'de> Deserialize<'de> for Num {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Num;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Num, E> {
                Ok(Num(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Num, E> {
                Ok(Num(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Num, E> {
                Ok(Num(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Num, E> {
                Err(E::custom(format!("{BAD_UNIT}: {v:?} is not a number")))
            }
        }
        d.deserialize_any(V)
    }
}

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.0)
    }
}

type V3 = [Num; 3];

fn v3(v: V3) -> DVec3 {
    DVec3::new(v[0].0, v[1].0, v[2].0)
}

fn to_v3(v: DVec3) -> V3 {
    [Num(v.x), Num(v.y), Num(v.z)]
}

#[derive(Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    scene_format: Spanned<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    world: Option<RawWorld>,
    #[serde(default, rename = "model", skip_serializing_if = "Vec::is_empty")]
    models: Vec<RawModel>,
    #[serde(default, rename = "spawn", skip_serializing_if = "Vec::is_empty")]
    spawns: Vec<RawSpawn>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    params: BTreeMap<String, BTreeMap<String, Num>>,
}

#[derive(Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawWorld {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gravity: Option<V3>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dt: Option<Num>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    solver: Option<RawSolver>,
}

#[derive(Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    iterations: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    baumgarte: Option<Num>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    slop: Option<Num>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    restitution_threshold: Option<Num>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    warm_starting: Option<bool>,
}

#[derive(Deserialize, Serialize, Default)]
#[serde(deny_unknown_fields)]
struct RawPose {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    position: Option<V3>,
    /// `[w, x, y, z]`
    #[serde(default, skip_serializing_if = "Option::is_none")]
    orientation: Option<[Num; 4]>,
    /// Roll, pitch, yaw (rad), applied as Rz(yaw)·Ry(pitch)·Rx(roll).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rpy: Option<V3>,
}

#[derive(Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    name: String,
    #[serde(default, rename = "link", skip_serializing_if = "Vec::is_empty")]
    links: Vec<Spanned<RawLink>>,
    #[serde(default, rename = "joint", skip_serializing_if = "Vec::is_empty")]
    joints: Vec<Spanned<RawJoint>>,
    #[serde(default, rename = "device", skip_serializing_if = "Vec::is_empty")]
    devices: Vec<Spanned<RawDevice>>,
    #[serde(default, rename = "display", skip_serializing_if = "Vec::is_empty")]
    displays: Vec<Spanned<RawDisplay>>,
}

#[derive(Deserialize, Serialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
enum RawGeometry {
    Box(V3),
    Sphere(Num),
    Cylinder { radius: Num, half_length: Num },
    Plane { normal: V3, offset: Num },
}

#[derive(Deserialize, Serialize)]
#[serde(untagged)]
enum RawInertia {
    Keyword(String),
    Diagonal(V3),
    Full([V3; 3]),
}

#[derive(Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawLink {
    name: String,
    geometry: RawGeometry,
    mass: Num,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    inertia: Option<RawInertia>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    friction: Option<Num>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    restitution: Option<Num>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pose: Option<RawPose>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    color: Option<[u8; 3]>,
}

#[derive(Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawJoint {
    name: String,
    #[serde(rename = "type")]
    kind: String,
    parent: String,
    child: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    axis: Option<V3>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    anchor: Option<V3>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    limits: Option<[Num; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    max_effort: Option<Num>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    damping: Option<Num>,
}

#[derive(Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawDevice {
    id: String,
    kind: String,
    link: String,
    rate: Num,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pose: Option<RawPose>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    battery: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    noise_sigma: Option<Num>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    max_range: Option<Num>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    capacity_j: Option<Num>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cost_j: Option<Num>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    idle_w: Option<Num>,
}

#[derive(Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawDisplay {
    id: String,
    link: String,
    width: u32,
    height: u32,
    center: V3,
    normal: V3,
    up: V3,
    size: [Num; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    touch: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    battery: Option<String>,
}

#[derive(Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawSpawn {
    model: String,
    name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pose: Option<RawPose>,
}

/// Byte offset to 1-based line/column (columns count chars).
fn locate(text: &str, offset: usize) -> Location {
    let offset = offset.min(text.len());
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let line_start = before.rfind('\n').map(|i| i + 1).unwrap_or(0);
    Location {
        line,
        column: before[line_start..].chars().count() + 1,
    }
}

fn classify(text: &str, err: toml::de::Error) -> SceneError {
    let location = err.span().map(|s| locate(text, s.start));
    let message = err.message().trim().to_string();
    if let Some(rest) = message.strip_prefix("unknown field `") {
        let field = rest.split('`').next().unwrap_or_default().to_string();
        SceneError::UnknownField { location, field }
    } else if let Some(pos) = message.find(BAD_UNIT) {
        let detail = message[pos + BAD_UNIT.len()..]
            .trim_start_matches(':')
            .trim()
            .to_string();
        SceneError::BadUnit {
            location,
            message: detail,
        }
    } else {
        SceneError::Syntax { location, message }
    }
}

fn semantic(text: &str, span: std::ops::Range<usize>, message: String) -> SceneError {
    SceneError::Syntax {
        location: Some(locate(text, span.start)),
        message,
    }
}

fn pose_from(raw: Option<RawPose>) -> Result<Pose, String> {
    let raw = raw.unwrap_or_default();
    let position = raw.position.map(v3).unwrap_or(DVec3::ZERO);
    let orientation = match (raw.orientation, raw.rpy) {
        (Some(_), Some(_)) => {
            return Err("pose takes either `orientation` or `rpy`, not both".into())
        }
        (Some(q), None) => DQuat::from_xyzw(q[1].0, q[2].0, q[3].0, q[0].0),
        (None, Some(r)) => DQuat::from_euler(EulerRot::ZYX, r[2].0, r[1].0, r[0].0),
        (None, None) => DQuat::IDENTITY,
    };
    Ok(Pose::new(position, orientation))
}

fn pose_to(p: &Pose) -> Option<RawPose> {
    if *p == Pose::IDENTITY {
        return None;
    }
    let q = p.orientation;
    Some(RawPose {
        position: (p.position != DVec3::ZERO).then(|| to_v3(p.position)),
        orientation: (q != DQuat::IDENTITY).then_some([Num(q.w), Num(q.x), Num(q.y), Num(q.z)]),
        rpy: None,
    })
}

fn joint_kind(s: &str) -> Option<JointKind> {
    match s {
        "fixed" => Some(JointKind::Fixed),
        "revolute" => Some(JointKind::Revolute),
        // "sliding" is an alias of prismatic
        "prismatic" | "sliding" => Some(JointKind::Prismatic),
        _ => None,
    }
}

fn joint_kind_name(k: JointKind) -> &'static str {
    match k {
        JointKind::Fixed => "fixed",
        JointKind::Revolute => "revolute",
        JointKind::Prismatic => "prismatic",
    }
}

fn link_from(text: &str, raw: Spanned<RawLink>) -> Result<LinkSpec, SceneError> {
    let span = raw.span();
    let raw = raw.into_inner();
    let geometry = match raw.geometry {
        RawGeometry::Box(h) => Shape::Box {
            half_extents: v3(h),
        },
        RawGeometry::Sphere(r) => Shape::Sphere { radius: r.0 },
        RawGeometry::Cylinder {
            radius,
            half_length,
        } => Shape::Cylinder {
            radius: radius.0,
            half_length: half_length.0,
        },
        RawGeometry::Plane { normal, offset } => Shape::Plane {
            normal: v3(normal),
            offset: offset.0,
        },
    };
    let inertia = match raw.inertia {
        None => InertiaSpec::Auto,
        Some(RawInertia::Keyword(k)) if k == "auto" => InertiaSpec::Auto,
        Some(RawInertia::Keyword(k)) => {
            return Err(semantic(
                text,
                span,
                format!(
                    "link `{}`: inertia must be \"auto\" or numbers, got {k:?}",
                    raw.name
                ),
            ))
        }
        Some(RawInertia::Diagonal(d)) => InertiaSpec::Tensor(DMat3::from_diagonal(v3(d))),
        Some(RawInertia::Full(rows)) => {
            InertiaSpec::Tensor(DMat3::from_cols(v3(rows[0]), v3(rows[1]), v3(rows[2])).transpose())
        }
    };
    Ok(LinkSpec {
        pose: pose_from(raw.pose)
            .map_err(|m| semantic(text, span.clone(), format!("link `{}`: {m}", raw.name)))?,
        name: raw.name,
        geometry,
        mass: raw.mass.0,
        inertia,
        friction: raw.friction.map(|n| n.0).unwrap_or(0.5),
        restitution: raw.restitution.map(|n| n.0).unwrap_or(0.0),
        color: raw.color.unwrap_or([180, 180, 180]),
    })
}

fn joint_from(text: &str, raw: Spanned<RawJoint>) -> Result<JointSpec, SceneError> {
    let span = raw.span();
    let raw = raw.into_inner();
    let kind = joint_kind(&raw.kind).ok_or_else(|| {
        semantic(
            text,
            span,
            format!(
                "joint `{}`: unknown type {:?} (fixed, revolute, prismatic, sliding)",
                raw.name, raw.kind
            ),
        )
    })?;
    Ok(JointSpec {
        name: raw.name,
        kind,
        parent: raw.parent,
        child: raw.child,
        axis: raw.axis.map(v3).unwrap_or(DVec3::Z),
        anchor: raw.anchor.map(v3).unwrap_or(DVec3::ZERO),
        limits: raw.limits.map(|l| [l[0].0, l[1].0]),
        max_effort: raw.max_effort.map(|n| n.0),
        damping: raw.damping.map(|n| n.0).unwrap_or(0.0),
    })
}

fn device_from(text: &str, raw: Spanned<RawDevice>) -> Result<DeviceDescriptor, SceneError> {
    let span = raw.span();
    let raw = raw.into_inner();
    let err = |m: String| semantic(text, span.clone(), format!("device `{}`: {m}", raw.id));
    let unexpected = |present: &[(&str, bool)]| -> Result<(), SceneError> {
        match present.iter().find(|(_, p)| *p) {
            Some((field, _)) => Err(SceneError::UnknownField {
                location: Some(locate(text, span.start)),
                field: field.to_string(),
            }),
            None => Ok(()),
        }
    };
    let need = |v: Option<Num>, field: &str| {
        v.map(|n| n.0)
            .ok_or_else(|| err(format!("missing `{field}`")))
    };
    let kind = match raw.kind.as_str() {
        "accelerometer" => {
            unexpected(&[
                ("max_range", raw.max_range.is_some()),
                ("capacity_j", raw.capacity_j.is_some()),
                ("cost_j", raw.cost_j.is_some()),
                ("idle_w", raw.idle_w.is_some()),
            ])?;
            DeviceKind::Accelerometer {
                noise_sigma: raw.noise_sigma.map(|n| n.0).unwrap_or(0.0),
            }
        }
        "proximity" => {
            unexpected(&[
                ("noise_sigma", raw.noise_sigma.is_some()),
                ("capacity_j", raw.capacity_j.is_some()),
                ("cost_j", raw.cost_j.is_some()),
                ("idle_w", raw.idle_w.is_some()),
            ])?;
            DeviceKind::Proximity {
                max_range: need(raw.max_range, "max_range")?,
            }
        }
        "battery" => {
            unexpected(&[
                ("noise_sigma", raw.noise_sigma.is_some()),
                ("max_range", raw.max_range.is_some()),
            ])?;
            DeviceKind::Battery {
                capacity_j: need(raw.capacity_j, "capacity_j")?,
                cost_j: raw.cost_j.map(|n| n.0).unwrap_or(0.0),
                idle_w: raw.idle_w.map(|n| n.0).unwrap_or(0.0),
            }
        }
        "contact" | "radius" => {
            unexpected(&[
                ("noise_sigma", raw.noise_sigma.is_some()),
                ("max_range", raw.max_range.is_some()),
                ("capacity_j", raw.capacity_j.is_some()),
                ("cost_j", raw.cost_j.is_some()),
                ("idle_w", raw.idle_w.is_some()),
            ])?;
            if raw.kind == "contact" {
                DeviceKind::Contact
            } else {
                DeviceKind::Radius
            }
        }
        other => {
            return Err(err(format!(
                "unknown kind {other:?} (accelerometer, contact, proximity, battery, radius)"
            )))
        }
    };
    Ok(DeviceDescriptor {
        pose: pose_from(raw.pose).map_err(err)?,
        id: raw.id,
        kind,
        link: raw.link,
        rate: raw.rate.0,
        battery: raw.battery,
    })
}

fn display_from(raw: Spanned<RawDisplay>) -> DisplaySpec {
    let raw = raw.into_inner();
    DisplaySpec {
        id: raw.id,
        link: raw.link,
        width: raw.width,
        height: raw.height,
        center: v3(raw.center),
        normal: v3(raw.normal),
        up: v3(raw.up),
        size: [raw.size[0].0, raw.size[1].0],
        touch: raw.touch.unwrap_or(false),
        battery: raw.battery,
    }
}

/// Parses `.scene` text. Structural problems are errors; semantic problems
/// are left to [`super::validate`].
pub fn parse_scene(text: &str) -> Result<SceneSpec, SceneError> {
    let raw: RawFile = toml::from_str(text).map_err(|e| classify(text, e))?;
    if *raw.scene_format.get_ref() != SCENE_FORMAT_VERSION {
        return Err(semantic(
            text,
            raw.scene_format.span(),
            format!(
                "unsupported scene_format {} (expected {SCENE_FORMAT_VERSION})",
                raw.scene_format.get_ref()
            ),
        ));
    }

    let mut world = WorldSpec::default();
    if let Some(w) = raw.world {
        if let Some(g) = w.gravity {
            world.gravity = v3(g);
        }
        if let Some(dt) = w.dt {
            world.dt = dt.0;
        }
        if let Some(seed) = w.seed {
            world.seed = seed;
        }
        if let Some(s) = w.solver {
            let d = SolverParams::default();
            world.solver = SolverParams {
                iterations: s.iterations.unwrap_or(d.iterations),
                baumgarte: s.baumgarte.map(|n| n.0).unwrap_or(d.baumgarte),
                slop: s.slop.map(|n| n.0).unwrap_or(d.slop),
                restitution_threshold: s
                    .restitution_threshold
                    .map(|n| n.0)
                    .unwrap_or(d.restitution_threshold),
                warm_starting: s.warm_starting.unwrap_or(d.warm_starting),
            };
        }
    }

    let mut models = Vec::with_capacity(raw.models.len());
    for m in raw.models {
        models.push(ModelSpec {
            name: m.name,
            links: m
                .links
                .into_iter()
                .map(|l| link_from(text, l))
                .collect::<Result<_, _>>()?,
            joints: m
                .joints
                .into_iter()
                .map(|j| joint_from(text, j))
                .collect::<Result<_, _>>()?,
            devices: m
                .devices
                .into_iter()
                .map(|d| device_from(text, d))
                .collect::<Result<_, _>>()?,
            displays: m.displays.into_iter().map(display_from).collect(),
        });
    }

    let mut spawns = Vec::with_capacity(raw.spawns.len());
    for s in raw.spawns {
        let pose = pose_from(s.pose).map_err(|m| SceneError::Syntax {
            location: None,
            message: format!("spawn `{}`: {m}", s.name),
        })?;
        spawns.push(SpawnSpec {
            model: s.model,
            name: s.name,
            pose,
        });
    }

    let params = raw
        .params
        .into_iter()
        .map(|(app, table)| (app, table.into_iter().map(|(k, v)| (k, v.0)).collect()))
        .collect();

    Ok(SceneSpec {
        world,
        models,
        spawns,
        params,
    })
}

fn spanned<T>(v: T) -> Spanned<T> {
    Spanned::new(0..0, v)
}

/// Writes a spec in canonical form; `parse_scene` of the result equals `spec`.
pub fn serialize_scene(spec: &SceneSpec) -> String {
    let d = SolverParams::default();
    let s = &spec.world.solver;
    let raw = RawFile {
        scene_format: spanned(SCENE_FORMAT_VERSION),
        world: Some(RawWorld {
            gravity: Some(to_v3(spec.world.gravity)),
            dt: Some(Num(spec.world.dt)),
            seed: Some(spec.world.seed),
            solver: (s != &d).then_some(RawSolver {
                iterations: Some(s.iterations),
                baumgarte: Some(Num(s.baumgarte)),
                slop: Some(Num(s.slop)),
                restitution_threshold: Some(Num(s.restitution_threshold)),
                warm_starting: Some(s.warm_starting),
            }),
        }),
        models: spec.models.iter().map(model_to).collect(),
        spawns: spec
            .spawns
            .iter()
            .map(|s| RawSpawn {
                model: s.model.clone(),
                name: s.name.clone(),
                pose: pose_to(&s.pose),
            })
            .collect(),
        params: spec
            .params
            .iter()
            .map(|(app, t)| {
                (
                    app.clone(),
                    t.iter().map(|(k, v)| (k.clone(), Num(*v))).collect(),
                )
            })
            .collect(),
    };
    toml::to_string(&raw).expect("scene serializes")
}

fn model_to(m: &ModelSpec) -> RawModel {
    RawModel {
        name: m.name.clone(),
        links: m
            .links
            .iter()
            .map(|l| {
                spanned(RawLink {
                    name: l.name.clone(),
                    geometry: match l.geometry {
                        Shape::Box { half_extents } => RawGeometry::Box(to_v3(half_extents)),
                        Shape::Sphere { radius } => RawGeometry::Sphere(Num(radius)),
                        Shape::Cylinder {
                            radius,
                            half_length,
                        } => RawGeometry::Cylinder {
                            radius: Num(radius),
                            half_length: Num(half_length),
                        },
                        Shape::Plane { normal, offset } => RawGeometry::Plane {
                            normal: to_v3(normal),
                            offset: Num(offset),
                        },
                    },
                    mass: Num(l.mass),
                    inertia: Some(match &l.inertia {
                        InertiaSpec::Auto => RawInertia::Keyword("auto".into()),
                        InertiaSpec::Tensor(t) => {
                            let r = t.transpose();
                            RawInertia::Full([to_v3(r.x_axis), to_v3(r.y_axis), to_v3(r.z_axis)])
                        }
                    }),
                    friction: Some(Num(l.friction)),
                    restitution: Some(Num(l.restitution)),
                    pose: pose_to(&l.pose),
                    color: Some(l.color),
                })
            })
            .collect(),
        joints: m
            .joints
            .iter()
            .map(|j| {
                spanned(RawJoint {
                    name: j.name.clone(),
                    kind: joint_kind_name(j.kind).into(),
                    parent: j.parent.clone(),
                    child: j.child.clone(),
                    axis: Some(to_v3(j.axis)),
                    anchor: Some(to_v3(j.anchor)),
                    limits: j.limits.map(|l| [Num(l[0]), Num(l[1])]),
                    max_effort: j.max_effort.map(Num),
                    damping: Some(Num(j.damping)),
                })
            })
            .collect(),
        devices: m
            .devices
            .iter()
            .map(|d| {
                let mut raw = RawDevice {
                    id: d.id.clone(),
                    kind: d.kind.name().into(),
                    link: d.link.clone(),
                    rate: Num(d.rate),
                    pose: pose_to(&d.pose),
                    battery: d.battery.clone(),
                    noise_sigma: None,
                    max_range: None,
                    capacity_j: None,
                    cost_j: None,
                    idle_w: None,
                };
                match d.kind {
                    DeviceKind::Accelerometer { noise_sigma } => {
                        raw.noise_sigma = Some(Num(noise_sigma))
                    }
                    DeviceKind::Proximity { max_range } => raw.max_range = Some(Num(max_range)),
                    DeviceKind::Battery {
                        capacity_j,
                        cost_j,
                        idle_w,
                    } => {
                        raw.capacity_j = Some(Num(capacity_j));
                        raw.cost_j = Some(Num(cost_j));
                        raw.idle_w = Some(Num(idle_w));
                    }
                    DeviceKind::Contact | DeviceKind::Radius => {}
                }
                spanned(raw)
            })
            .collect(),
        displays: m
            .displays
            .iter()
            .map(|d| {
                spanned(RawDisplay {
                    id: d.id.clone(),
                    link: d.link.clone(),
                    width: d.width,
                    height: d.height,
                    center: to_v3(d.center),
                    normal: to_v3(d.normal),
                    up: to_v3(d.up),
                    size: [Num(d.size[0]), Num(d.size[1])],
                    touch: Some(d.touch),
                    battery: d.battery.clone(),
                })
            })
            .collect(),
    }
}
