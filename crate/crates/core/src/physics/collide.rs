//! Narrow-phase contact generation for sphere, box and plane shapes.

use glam::DVec3;
use serde::{Deserialize, Serialize};

use super::body::{Body, BodyId, Shape};

/// One contact point. `normal` points from `body_a` to `body_b`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Contact {
    pub body_a: BodyId,
    pub body_b: BodyId,
    pub point: DVec3,
    pub normal: DVec3,
    pub penetration: f64,
    /// Total normal impulse applied by the solver in the step that produced it.
    pub applied_normal_impulse: f64,
    /// Magnitude of the tangential impulse applied in that step.
    pub applied_friction_impulse: f64,
}

impl Contact {
    pub fn involves(&self, id: BodyId) -> bool {
        self.body_a == id || self.body_b == id
    }

    pub fn other(&self, id: BodyId) -> BodyId {
        if self.body_a == id {
            self.body_b
        } else {
            self.body_a
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct RawContact {
    pub point: DVec3,
    pub normal: DVec3,
    pub penetration: f64,
}

impl RawContact {
    fn flipped(self) -> Self {
        Self {
            normal: -self.normal,
            ..self
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct Obb {
    pub center: DVec3,
    pub axes: [DVec3; 3],
    pub half: DVec3,
}

impl Obb {
    pub fn of(body: &Body, half: DVec3) -> Self {
        let r = body.state.pose.rotation();
        Obb {
            center: body.state.pose.position,
            axes: [r.x_axis, r.y_axis, r.z_axis],
            half,
        }
    }

    fn projected_radius(&self, l: DVec3) -> f64 {
        (0..3)
            .map(|i| self.half[i] * self.axes[i].dot(l).abs())
            .sum()
    }

    pub fn to_local(&self, p: DVec3) -> DVec3 {
        let d = p - self.center;
        DVec3::new(
            d.dot(self.axes[0]),
            d.dot(self.axes[1]),
            d.dot(self.axes[2]),
        )
    }

    pub fn to_world(&self, p: DVec3) -> DVec3 {
        self.center + self.axes[0] * p.x + self.axes[1] * p.y + self.axes[2] * p.z
    }

    pub fn corners(&self) -> [DVec3; 8] {
        let mut out = [DVec3::ZERO; 8];
        for (i, c) in out.iter_mut().enumerate() {
            let sx = if i & 1 == 0 { -1.0 } else { 1.0 };
            let sy = if i & 2 == 0 { -1.0 } else { 1.0 };
            let sz = if i & 4 == 0 { -1.0 } else { 1.0 };
            *c = self.to_world(DVec3::new(
                sx * self.half.x,
                sy * self.half.y,
                sz * self.half.z,
            ));
        }
        out
    }
}

/// World-frame plane `n · x = d` of a plane-shaped body.
pub(crate) fn world_plane(body: &Body, normal: DVec3, offset: f64) -> (DVec3, f64) {
    let pose = &body.state.pose;
    let n = (pose.orientation * normal).normalize();
    (n, n.dot(pose.position) + offset)
}

enum Kind {
    Sphere(f64),
    Box(DVec3),
    Plane(DVec3, f64),
}

fn kind(body: &Body) -> Kind {
    match body.shape {
        Shape::Sphere { radius } => Kind::Sphere(radius),
        Shape::Plane { normal, offset } => {
            let (n, d) = world_plane(body, normal, offset);
            Kind::Plane(n, d)
        }
        other => Kind::Box(other.collision_box().expect("box-like shape")),
    }
}

/// Contacts between two bodies, normals pointing from `a` to `b`.
pub(crate) fn collide(a: &Body, b: &Body) -> Vec<RawContact> {
    let (ra, rb) = (a.shape.bounding_radius(), b.shape.bounding_radius());
    if ra.is_finite() && rb.is_finite() {
        let d = (b.state.pose.position - a.state.pose.position).length();
        if d > ra + rb {
            return Vec::new();
        }
    }
    let flip = |v: Vec<RawContact>| v.into_iter().map(RawContact::flipped).collect();
    match (kind(a), kind(b)) {
        (Kind::Sphere(r1), Kind::Sphere(r2)) => {
            sphere_sphere(a.state.pose.position, r1, b.state.pose.position, r2)
                .into_iter()
                .collect()
        }
        (Kind::Plane(n, d), Kind::Sphere(r)) => plane_sphere(n, d, b.state.pose.position, r)
            .into_iter()
            .collect(),
        (Kind::Sphere(r), Kind::Plane(n, d)) => flip(
            plane_sphere(n, d, a.state.pose.position, r)
                .into_iter()
                .collect(),
        ),
        (Kind::Box(h), Kind::Sphere(r)) => box_sphere(&Obb::of(a, h), b.state.pose.position, r)
            .into_iter()
            .collect(),
        (Kind::Sphere(r), Kind::Box(h)) => flip(
            box_sphere(&Obb::of(b, h), a.state.pose.position, r)
                .into_iter()
                .collect(),
        ),
        (Kind::Plane(n, d), Kind::Box(h)) => plane_box(n, d, &Obb::of(b, h)),
        (Kind::Box(h), Kind::Plane(n, d)) => flip(plane_box(n, d, &Obb::of(a, h))),
        (Kind::Box(h1), Kind::Box(h2)) => box_box(&Obb::of(a, h1), &Obb::of(b, h2)),
        (Kind::Plane(..), Kind::Plane(..)) => Vec::new(),
    }
}

pub(crate) fn sphere_sphere(ca: DVec3, ra: f64, cb: DVec3, rb: f64) -> Option<RawContact> {
    let d = cb - ca;
    let dist = d.length();
    let pen = ra + rb - dist;
    if pen < 0.0 {
        return None;
    }
    let normal = if dist > 1e-12 { d / dist } else { DVec3::Z };
    Some(RawContact {
        point: ca + normal * (ra - 0.5 * pen),
        normal,
        penetration: pen,
    })
}

/// Plane is the first body: the normal is the plane normal.
pub(crate) fn plane_sphere(n: DVec3, d: f64, c: DVec3, r: f64) -> Option<RawContact> {
    let dist = n.dot(c) - d - r;
    (dist <= 0.0).then(|| RawContact {
        point: c - n * r,
        normal: n,
        penetration: -dist,
    })
}

/// Corners of the box on or below the plane, at most the four deepest.
pub(crate) fn plane_box(n: DVec3, d: f64, b: &Obb) -> Vec<RawContact> {
    let mut out: Vec<RawContact> = b
        .corners()
        .into_iter()
        .filter_map(|c| {
            let dist = n.dot(c) - d;
            (dist <= 0.0).then_some(RawContact {
                point: c,
                normal: n,
                penetration: -dist,
            })
        })
        .collect();
    if out.len() > 4 {
        out.sort_by(|x, y| y.penetration.total_cmp(&x.penetration));
        out.truncate(4);
    }
    out
}

/// Box is the first body.
pub(crate) fn box_sphere(b: &Obb, c: DVec3, r: f64) -> Option<RawContact> {
    let local = b.to_local(c);
    let clamped = local.clamp(-b.half, b.half);
    if clamped != local {
        let d = local - clamped;
        let dist = d.length();
        if dist > r {
            return None;
        }
        let n_local = d / dist;
        let normal = b.to_world(n_local) - b.center;
        return Some(RawContact {
            point: b.to_world(clamped),
            normal,
            penetration: r - dist,
        });
    }
    // center inside the box: push out through the nearest face
    let depth = b.half - local.abs();
    let axis = if depth.x <= depth.y && depth.x <= depth.z {
        0
    } else if depth.y <= depth.z {
        1
    } else {
        2
    };
    let sign = if local[axis] >= 0.0 { 1.0 } else { -1.0 };
    let normal = b.axes[axis] * sign;
    let mut on_face = local;
    on_face[axis] = b.half[axis] * sign;
    Some(RawContact {
        point: b.to_world(on_face),
        normal,
        penetration: r + depth[axis],
    })
}

fn separation(a: &Obb, b: &Obb, t: DVec3, l: DVec3) -> f64 {
    t.dot(l).abs() - a.projected_radius(l) - b.projected_radius(l)
}

fn sign_of(x: f64) -> f64 {
    if x < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Separating-axis test over the 15 candidate axes, then a clipped face
/// manifold (up to 4 points) or a single edge-edge point.
pub(crate) fn box_box(a: &Obb, b: &Obb) -> Vec<RawContact> {
    let t = b.center - a.center;

    let mut best_a = (f64::NEG_INFINITY, 0);
    for i in 0..3 {
        let s = separation(a, b, t, a.axes[i]);
        if s > 0.0 {
            return Vec::new();
        }
        if s > best_a.0 {
            best_a = (s, i);
        }
    }
    let mut best_b = (f64::NEG_INFINITY, 0);
    for j in 0..3 {
        let s = separation(a, b, t, b.axes[j]);
        if s > 0.0 {
            return Vec::new();
        }
        if s > best_b.0 {
            best_b = (s, j);
        }
    }
    let mut best_edge: Option<(f64, usize, usize, DVec3)> = None;
    for i in 0..3 {
        for j in 0..3 {
            let l = a.axes[i].cross(b.axes[j]);
            let len = l.length();
            if len < 1e-6 {
                continue;
            }
            let l = l / len;
            let s = separation(a, b, t, l);
            if s > 0.0 {
                return Vec::new();
            }
            if best_edge.is_none_or(|(bs, ..)| s > bs) {
                best_edge = Some((s, i, j, l));
            }
        }
    }

    // prefer face axes unless an edge axis is clearly shallower
    let face_sep = best_a.0.max(best_b.0);
    if let Some((s, i, j, l)) = best_edge {
        if s > 0.95 * face_sep + 1e-5 {
            let n = l * sign_of(t.dot(l));
            return vec![edge_contact(a, b, i, j, n, s)];
        }
    }
    if best_b.0 > 0.95 * best_a.0 + 1e-5 {
        let n = b.axes[best_b.1] * sign_of(-t.dot(b.axes[best_b.1]));
        // computed from B towards A; flip back to A -> B
        face_contacts(b, a, best_b.1, n)
            .into_iter()
            .map(RawContact::flipped)
            .collect()
    } else {
        let n = a.axes[best_a.1] * sign_of(t.dot(a.axes[best_a.1]));
        face_contacts(a, b, best_a.1, n)
    }
}

fn edge_contact(a: &Obb, b: &Obb, i: usize, j: usize, n: DVec3, sep: f64) -> RawContact {
    let mut pa = a.center;
    let mut pb = b.center;
    for k in 0..3 {
        if k != i {
            pa += a.axes[k] * (a.half[k] * sign_of(a.axes[k].dot(n)));
        }
        if k != j {
            pb += b.axes[k] * (b.half[k] * sign_of(-b.axes[k].dot(n)));
        }
    }
    let (da, db) = (a.axes[i], b.axes[j]);
    let r = pa - pb;
    let bb = da.dot(db);
    let c = da.dot(r);
    let f = db.dot(r);
    let denom = 1.0 - bb * bb;
    let (s, u) = if denom.abs() < 1e-12 {
        (0.0, 0.0)
    } else {
        ((bb * f - c) / denom, (f - bb * c) / denom)
    };
    let s = s.clamp(-a.half[i], a.half[i]);
    let u = u.clamp(-b.half[j], b.half[j]);
    let point = 0.5 * ((pa + da * s) + (pb + db * u));
    RawContact {
        point,
        normal: n,
        penetration: -sep,
    }
}

/// `reference` face `axis` with outward normal `n` (towards `incident`).
fn face_contacts(reference: &Obb, incident: &Obb, axis: usize, n: DVec3) -> Vec<RawContact> {
    // incident face: most anti-parallel to n
    let mut j = 0;
    let mut best = -1.0;
    for k in 0..3 {
        let d = incident.axes[k].dot(n).abs();
        if d > best {
            best = d;
            j = k;
        }
    }
    let inc_normal = incident.axes[j] * -sign_of(incident.axes[j].dot(n));
    let face_center = incident.center + inc_normal * incident.half[j];
    let (k1, k2) = ((j + 1) % 3, (j + 2) % 3);
    let e1 = incident.axes[k1] * incident.half[k1];
    let e2 = incident.axes[k2] * incident.half[k2];
    let mut poly = vec![
        face_center + e1 + e2,
        face_center - e1 + e2,
        face_center - e1 - e2,
        face_center + e1 - e2,
    ];

    for k in [(axis + 1) % 3, (axis + 2) % 3] {
        let u = reference.axes[k];
        let h = reference.half[k];
        poly = clip(&poly, u, h, reference.center);
        poly = clip(&poly, -u, h, reference.center);
        if poly.is_empty() {
            return Vec::new();
        }
    }

    let h = reference.half[axis];
    let mut out: Vec<RawContact> = poly
        .into_iter()
        .filter_map(|p| {
            let s = n.dot(p - reference.center) - h;
            (s <= 0.0).then_some(RawContact {
                point: p,
                normal: n,
                penetration: -s,
            })
        })
        .collect();
    if out.len() > 4 {
        out = reduce_manifold(out);
    }
    out
}

/// Keeps points with `dir · (p - origin) <= offset`.
fn clip(poly: &[DVec3], dir: DVec3, offset: f64, origin: DVec3) -> Vec<DVec3> {
    let mut out = Vec::with_capacity(poly.len() + 1);
    for (idx, &p) in poly.iter().enumerate() {
        let q = poly[(idx + 1) % poly.len()];
        let dp = dir.dot(p - origin) - offset;
        let dq = dir.dot(q - origin) - offset;
        if dp <= 0.0 {
            out.push(p);
        }
        if (dp < 0.0 && dq > 0.0) || (dp > 0.0 && dq < 0.0) {
            let t = dp / (dp - dq);
            out.push(p + (q - p) * t);
        }
    }
    out
}

/// Deepest point, the point farthest from it, then the two points spanning
/// the largest area on either side.
fn reduce_manifold(points: Vec<RawContact>) -> Vec<RawContact> {
    let n = points[0].normal;
    let first = (0..points.len())
        .max_by(|&x, &y| {
            points[x]
                .penetration
                .total_cmp(&points[y].penetration)
                .then(y.cmp(&x))
        })
        .unwrap();
    let p0 = points[first].point;
    let second = (0..points.len())
        .max_by(|&x, &y| {
            (points[x].point - p0)
                .length_squared()
                .total_cmp(&(points[y].point - p0).length_squared())
                .then(y.cmp(&x))
        })
        .unwrap();
    let p1 = points[second].point;
    let area = |i: usize| (p1 - p0).cross(points[i].point - p0).dot(n);
    let third = (0..points.len())
        .max_by(|&x, &y| area(x).total_cmp(&area(y)).then(y.cmp(&x)))
        .unwrap();
    let fourth = (0..points.len())
        .min_by(|&x, &y| area(x).total_cmp(&area(y)).then(x.cmp(&y)))
        .unwrap();
    let mut keep = vec![first, second, third, fourth];
    keep.sort_unstable();
    keep.dedup();
    keep.into_iter().map(|i| points[i]).collect()
}
