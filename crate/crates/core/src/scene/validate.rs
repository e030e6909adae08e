use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use glam::{DMat3, DVec3};

use super::{InertiaSpec, ModelSpec, SceneSpec};
use crate::devices::DeviceKind;
use crate::msgbus::is_valid_segment;
use crate::physics::{JointKind, Pose, Shape};

const UNIT_TOL: f64 = 1e-9;

/// Machine-readable diagnostic codes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DiagCode {
    UnknownLink,
    UnknownModel,
    UnknownBattery,
    DuplicateName,
    BadName,
    JointLoop,
    MultiParent,
    SelfJoint,
    StaticChild,
    StaticMount,
    Range,
    NotUnit,
    NotOrthogonal,
    InertiaNotSpd,
    RateDt,
    DynamicPlane,
}

impl DiagCode {
    pub fn as_str(&self) -> &'static str {
        match self {
            DiagCode::UnknownLink => "UNKNOWN_LINK",
            DiagCode::UnknownModel => "UNKNOWN_MODEL",
            DiagCode::UnknownBattery => "UNKNOWN_BATTERY",
            DiagCode::DuplicateName => "DUPLICATE_NAME",
            DiagCode::BadName => "BAD_NAME",
            DiagCode::JointLoop => "JOINT_LOOP",
            DiagCode::MultiParent => "MULTI_PARENT",
            DiagCode::SelfJoint => "SELF_JOINT",
            DiagCode::StaticChild => "STATIC_CHILD",
            DiagCode::StaticMount => "STATIC_MOUNT",
            DiagCode::Range => "RANGE",
            DiagCode::NotUnit => "NOT_UNIT",
            DiagCode::NotOrthogonal => "NOT_ORTHOGONAL",
            DiagCode::InertiaNotSpd => "INERTIA_NOT_SPD",
            DiagCode::RateDt => "RATE_DT",
            DiagCode::DynamicPlane => "DYNAMIC_PLANE",
        }
    }
}

impl fmt::Display for DiagCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Diagnostic {
    pub code: DiagCode,
    /// Where the problem is, e.g. `model cube / joint hinge`.
    pub path: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} [{}]: {}", self.path, self.code, self.message)
    }
}

struct Diags(Vec<Diagnostic>);

impl Diags {
    fn push(&mut self, code: DiagCode, path: &str, message: impl Into<String>) {
        self.0.push(Diagnostic {
            code,
            path: path.to_string(),
            message: message.into(),
        });
    }

    fn range(&mut self, ok: bool, path: &str, what: &str, value: impl fmt::Display) {
        if !ok {
            self.push(
                DiagCode::Range,
                path,
                format!("{what} out of range: {value}"),
            );
        }
    }

    fn unit(&mut self, v: DVec3, path: &str, what: &str) {
        if !v.is_finite() || (v.length() - 1.0).abs() > UNIT_TOL {
            self.push(
                DiagCode::NotUnit,
                path,
                format!("{what} must be a unit vector, got {v}"),
            );
        }
    }

    fn pose(&mut self, p: &Pose, path: &str) {
        if !p.position.is_finite() {
            self.push(DiagCode::Range, path, "pose position is not finite");
        }
        let q = p.orientation;
        if !q.is_finite() || (q.length() - 1.0).abs() > UNIT_TOL {
            self.push(
                DiagCode::NotUnit,
                path,
                format!(
                    "orientation must be a unit quaternion (|q| = {})",
                    q.length()
                ),
            );
        }
    }

    fn name(&mut self, name: &str, path: &str) {
        if !is_valid_segment(name) {
            self.push(
                DiagCode::BadName,
                path,
                format!("name {name:?} must match [a-z0-9_]+"),
            );
        }
    }
}

fn positive(v: f64) -> bool {
    v.is_finite() && v > 0.0
}

fn is_spd(m: &DMat3) -> bool {
    let sym = (0..3).all(|i| {
        (0..3).all(|j| (m.col(j)[i] - m.col(i)[j]).abs() <= 1e-12 * m.col(i)[i].abs().max(1.0))
    });
    if !sym || !m.is_finite() {
        return false;
    }
    // leading principal minors
    let a = m.col(0)[0];
    let b = m.col(0)[0] * m.col(1)[1] - m.col(1)[0] * m.col(0)[1];
    a > 0.0 && b > 0.0 && m.determinant() > 0.0
}

/// Checks one model; `dt` is used for the rate divisibility rule.
pub fn validate_model(model: &ModelSpec, dt: f64) -> Vec<Diagnostic> {
    let mut d = Diags(Vec::new());
    check_model(&mut d, model, dt);
    d.0
}

fn check_model(d: &mut Diags, model: &ModelSpec, dt: f64) {
    let mp = format!("model {}", model.name);
    d.name(&model.name, &mp);

    let mut links: BTreeMap<&str, bool> = BTreeMap::new();
    for l in &model.links {
        let p = format!("{mp} / link {}", l.name);
        d.name(&l.name, &p);
        if links.insert(&l.name, l.is_static()).is_some() {
            d.push(DiagCode::DuplicateName, &p, "duplicate link name");
        }
        match l.geometry {
            Shape::Box { half_extents: h } => {
                d.range(
                    h.is_finite() && h.min_element() > 0.0,
                    &p,
                    "box half extents",
                    h,
                );
            }
            Shape::Sphere { radius } => d.range(positive(radius), &p, "sphere radius", radius),
            Shape::Cylinder {
                radius,
                half_length,
            } => {
                d.range(positive(radius), &p, "cylinder radius", radius);
                d.range(
                    positive(half_length),
                    &p,
                    "cylinder half_length",
                    half_length,
                );
            }
            Shape::Plane { normal, offset } => {
                d.unit(normal, &p, "plane normal");
                d.range(offset.is_finite(), &p, "plane offset", offset);
                if l.mass != 0.0 {
                    d.push(
                        DiagCode::DynamicPlane,
                        &p,
                        "plane links must be static (mass 0)",
                    );
                }
            }
        }
        d.range(l.mass.is_finite() && l.mass >= 0.0, &p, "mass", l.mass);
        d.range(
            l.friction.is_finite() && l.friction >= 0.0,
            &p,
            "friction",
            l.friction,
        );
        d.range(
            (0.0..=1.0).contains(&l.restitution),
            &p,
            "restitution",
            l.restitution,
        );
        d.pose(&l.pose, &p);
        if let InertiaSpec::Tensor(t) = &l.inertia {
            if l.mass > 0.0 && !is_spd(t) {
                d.push(
                    DiagCode::InertiaNotSpd,
                    &p,
                    "inertia tensor must be symmetric positive-definite",
                );
            }
        }
    }

    let mut names: BTreeSet<&str> = BTreeSet::new();
    let mut parent_of: BTreeMap<&str, &str> = BTreeMap::new();
    let mut edges: Vec<(&str, &str)> = Vec::new();
    for j in &model.joints {
        let p = format!("{mp} / joint {}", j.name);
        d.name(&j.name, &p);
        if !names.insert(&j.name) {
            d.push(DiagCode::DuplicateName, &p, "duplicate joint name");
        }
        let mut endpoints_ok = true;
        for (role, link) in [("parent", &j.parent), ("child", &j.child)] {
            if !links.contains_key(link.as_str()) {
                d.push(
                    DiagCode::UnknownLink,
                    &p,
                    format!("unknown link `{link}` as {role}"),
                );
                endpoints_ok = false;
            }
        }
        if j.parent == j.child {
            d.push(
                DiagCode::SelfJoint,
                &p,
                "parent and child are the same link",
            );
            endpoints_ok = false;
        }
        if links.get(j.child.as_str()) == Some(&true) {
            d.push(
                DiagCode::StaticChild,
                &p,
                format!("static link `{}` cannot be a joint child", j.child),
            );
        }
        d.unit(j.axis, &p, "axis");
        d.range(j.anchor.is_finite(), &p, "anchor", j.anchor);
        if let Some([lo, hi]) = j.limits {
            d.range(
                lo.is_finite() && hi.is_finite() && lo <= hi,
                &p,
                "limits",
                format!("[{lo}, {hi}]"),
            );
            if j.kind == JointKind::Fixed {
                d.push(DiagCode::Range, &p, "fixed joints take no limits");
            }
        }
        if let Some(e) = j.max_effort {
            d.range(positive(e), &p, "max_effort", e);
        }
        d.range(
            j.damping.is_finite() && j.damping >= 0.0,
            &p,
            "damping",
            j.damping,
        );
        if endpoints_ok {
            if parent_of.insert(&j.child, &j.parent).is_some() {
                d.push(
                    DiagCode::MultiParent,
                    &p,
                    format!("link `{}` already has a parent joint", j.child),
                );
            }
            edges.push((&j.parent, &j.child));
        }
    }
    if has_cycle(&edges) {
        d.push(
            DiagCode::JointLoop,
            &mp,
            "joints form a loop; the joint graph must be a forest",
        );
    }

    let batteries: BTreeSet<&str> = model
        .devices
        .iter()
        .filter(|dev| matches!(dev.kind, DeviceKind::Battery { .. }))
        .map(|dev| dev.id.as_str())
        .collect();
    let mut ids: BTreeSet<&str> = BTreeSet::new();
    for dev in &model.devices {
        let p = format!("{mp} / device {}", dev.id);
        d.name(&dev.id, &p);
        if !ids.insert(&dev.id) {
            d.push(DiagCode::DuplicateName, &p, "duplicate device id");
        }
        match links.get(dev.link.as_str()) {
            None => d.push(
                DiagCode::UnknownLink,
                &p,
                format!("unknown link `{}`", dev.link),
            ),
            Some(true)
                if matches!(
                    dev.kind,
                    DeviceKind::Accelerometer { .. } | DeviceKind::Radius
                ) =>
            {
                d.push(
                    DiagCode::StaticMount,
                    &p,
                    "must be mounted on a dynamic link",
                )
            }
            _ => {}
        }
        if dev.kind == DeviceKind::Radius {
            if let Some(l) = model.link(&dev.link) {
                if !matches!(l.geometry, Shape::Sphere { .. }) {
                    d.push(DiagCode::Range, &p, "radius actuator needs a sphere link");
                }
            }
        }
        d.pose(&dev.pose, &p);
        check_rate(d, dev.rate, dt, &p);
        match dev.kind {
            DeviceKind::Accelerometer { noise_sigma } => d.range(
                noise_sigma.is_finite() && noise_sigma >= 0.0,
                &p,
                "noise_sigma",
                noise_sigma,
            ),
            DeviceKind::Proximity { max_range } => {
                d.range(positive(max_range), &p, "max_range", max_range)
            }
            DeviceKind::Battery {
                capacity_j,
                cost_j,
                idle_w,
            } => {
                d.range(positive(capacity_j), &p, "capacity_j", capacity_j);
                d.range(cost_j.is_finite() && cost_j >= 0.0, &p, "cost_j", cost_j);
                d.range(idle_w.is_finite() && idle_w >= 0.0, &p, "idle_w", idle_w);
            }
            DeviceKind::Contact | DeviceKind::Radius => {}
        }
        check_battery(d, dev.battery.as_deref(), &batteries, &p);
    }
    for disp in &model.displays {
        let p = format!("{mp} / display {}", disp.id);
        d.name(&disp.id, &p);
        if !ids.insert(&disp.id) {
            d.push(DiagCode::DuplicateName, &p, "duplicate device id");
        }
        if !links.contains_key(disp.link.as_str()) {
            d.push(
                DiagCode::UnknownLink,
                &p,
                format!("unknown link `{}`", disp.link),
            );
        }
        d.range(
            disp.width > 0 && disp.height > 0,
            &p,
            "pixel size",
            format!("{}x{}", disp.width, disp.height),
        );
        d.range(
            positive(disp.size[0]) && positive(disp.size[1]),
            &p,
            "size",
            format!("{:?}", disp.size),
        );
        d.range(disp.center.is_finite(), &p, "center", disp.center);
        d.unit(disp.normal, &p, "normal");
        d.unit(disp.up, &p, "up");
        if disp.normal.dot(disp.up).abs() > 1e-9 {
            d.push(
                DiagCode::NotOrthogonal,
                &p,
                "up must be perpendicular to normal",
            );
        }
        check_battery(d, disp.battery.as_deref(), &batteries, &p);
    }
}

fn check_battery(d: &mut Diags, battery: Option<&str>, batteries: &BTreeSet<&str>, path: &str) {
    if let Some(b) = battery {
        if !batteries.contains(b) {
            d.push(
                DiagCode::UnknownBattery,
                path,
                format!("`{b}` is not a battery device of this model"),
            );
        }
    }
}

fn check_rate(d: &mut Diags, rate: f64, dt: f64, path: &str) {
    if !(rate > 0.0 && rate <= 1000.0) {
        d.push(
            DiagCode::Range,
            path,
            format!("rate {rate} Hz outside (0, 1000]"),
        );
        return;
    }
    if dt > 0.0 {
        let period = 1.0 / (rate * dt);
        if (period - period.round()).abs() > 1e-6 || period.round() < 1.0 {
            d.push(
                DiagCode::RateDt,
                path,
                format!(
                    "rate {rate} Hz does not divide the step rate {} Hz",
                    1.0 / dt
                ),
            );
        }
    }
}

fn has_cycle(edges: &[(&str, &str)]) -> bool {
    // union-find; an edge inside one component closes a loop
    let mut parent: BTreeMap<&str, &str> = BTreeMap::new();
    fn find<'a>(parent: &mut BTreeMap<&'a str, &'a str>, x: &'a str) -> &'a str {
        let mut r = x;
        while let Some(&p) = parent.get(r) {
            if p == r {
                break;
            }
            r = p;
        }
        parent.insert(x, r);
        r
    }
    for &(a, b) in edges {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra == rb {
            return true;
        }
        parent.insert(ra, rb);
    }
    false
}

/// All problems in a scene; empty means it is valid.
pub fn validate(spec: &SceneSpec) -> Vec<Diagnostic> {
    let mut d = Diags(Vec::new());
    let w = &spec.world;
    d.range(positive(w.dt) && w.dt <= 0.1, "world", "dt", w.dt);
    d.range(w.gravity.is_finite(), "world", "gravity", w.gravity);
    d.range(
        w.solver.iterations > 0,
        "world",
        "solver iterations",
        w.solver.iterations,
    );
    d.range(
        (0.0..=1.0).contains(&w.solver.baumgarte),
        "world",
        "baumgarte",
        w.solver.baumgarte,
    );
    d.range(
        w.solver.slop.is_finite() && w.solver.slop >= 0.0,
        "world",
        "slop",
        w.solver.slop,
    );

    let mut models = BTreeSet::new();
    for m in &spec.models {
        if !models.insert(m.name.as_str()) {
            d.push(
                DiagCode::DuplicateName,
                &format!("model {}", m.name),
                "duplicate model name",
            );
        }
        check_model(&mut d, m, w.dt);
    }
    let mut instances = BTreeSet::new();
    for s in &spec.spawns {
        let p = format!("spawn {}", s.name);
        d.name(&s.name, &p);
        if !instances.insert(s.name.as_str()) {
            d.push(DiagCode::DuplicateName, &p, "duplicate instance name");
        }
        if !models.contains(s.model.as_str()) {
            d.push(
                DiagCode::UnknownModel,
                &p,
                format!("unknown model `{}`", s.model),
            );
        }
        d.pose(&s.pose, &p);
    }
    for (app, table) in &spec.params {
        for (k, v) in table {
            d.range(v.is_finite(), &format!("params {app}"), k, v);
        }
    }
    d.0
}
