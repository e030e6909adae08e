//! Sequential-impulse (projected Gauss-Seidel) velocity solver.

use std::collections::BTreeMap;

use glam::{DMat3, DVec3};

use super::body::{Body, BodyId};
use super::collide::Contact;
use super::joint::{Joint, JointKind};
use super::math::tangent_basis;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverParams {
    pub iterations: u32,
    /// Fraction of positional error fed back per step.
    pub baumgarte: f64,
    /// Penetration allowed without correction (m).
    pub slop: f64,
    /// Approach speeds below this do not bounce (m/s).
    pub restitution_threshold: f64,
    pub warm_starting: bool,
}

impl Default for SolverParams {
    fn default() -> Self {
        Self {
            iterations: 10,
            baumgarte: 0.2,
            slop: 1e-3,
            restitution_threshold: 0.2,
            warm_starting: true,
        }
    }
}

/// Velocity-level view of one body during solving.
#[derive(Clone, Copy, Debug)]
pub(crate) struct SolverBody {
    pub x: DVec3,
    pub v: DVec3,
    pub w: DVec3,
    pub inv_mass: f64,
    pub inv_inertia: DMat3,
}

impl SolverBody {
    pub fn of(body: &Body, frozen: bool) -> Self {
        let dynamic = !body.is_static() && !frozen;
        SolverBody {
            x: body.state.pose.position,
            v: body.state.linear_velocity,
            w: body.state.angular_velocity,
            inv_mass: if dynamic { body.inv_mass } else { 0.0 },
            inv_inertia: if dynamic {
                body.world_inv_inertia()
            } else {
                DMat3::ZERO
            },
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Row {
    a: usize,
    b: usize,
    ja_lin: DVec3,
    ja_ang: DVec3,
    jb_lin: DVec3,
    jb_ang: DVec3,
    mass: f64,
    target: f64,
    lo: f64,
    hi: f64,
    accum: f64,
}

impl Row {
    #[allow(clippy::too_many_arguments)]
    fn new(
        bodies: &[SolverBody],
        a: usize,
        b: usize,
        ja_lin: DVec3,
        ja_ang: DVec3,
        jb_lin: DVec3,
        jb_ang: DVec3,
        target: f64,
    ) -> Self {
        let (ba, bb) = (&bodies[a], &bodies[b]);
        let k = ba.inv_mass * ja_lin.length_squared()
            + ja_ang.dot(ba.inv_inertia * ja_ang)
            + bb.inv_mass * jb_lin.length_squared()
            + jb_ang.dot(bb.inv_inertia * jb_ang);
        Row {
            a,
            b,
            ja_lin,
            ja_ang,
            jb_lin,
            jb_ang,
            mass: if k > 1e-300 { 1.0 / k } else { 0.0 },
            target,
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
            accum: 0.0,
        }
    }

    fn velocity(&self, bodies: &[SolverBody]) -> f64 {
        let (ba, bb) = (&bodies[self.a], &bodies[self.b]);
        self.ja_lin.dot(ba.v)
            + self.ja_ang.dot(ba.w)
            + self.jb_lin.dot(bb.v)
            + self.jb_ang.dot(bb.w)
    }

    fn apply(&self, bodies: &mut [SolverBody], impulse: f64) {
        let ba = &mut bodies[self.a];
        ba.v += self.ja_lin * (ba.inv_mass * impulse);
        ba.w += ba.inv_inertia * (self.ja_ang * impulse);
        let bb = &mut bodies[self.b];
        bb.v += self.jb_lin * (bb.inv_mass * impulse);
        bb.w += bb.inv_inertia * (self.jb_ang * impulse);
    }

    fn solve(&mut self, bodies: &mut [SolverBody]) {
        if self.mass == 0.0 {
            return;
        }
        let delta = -self.mass * (self.velocity(bodies) - self.target);
        let next = (self.accum + delta).clamp(self.lo, self.hi);
        let applied = next - self.accum;
        self.accum = next;
        self.apply(bodies, applied);
    }
}

/// All rows of one joint solved together through their dense effective-mass
/// matrix. A unilateral limit row that would pull is released and the
/// remaining rows are re-solved.
#[derive(Clone, Debug)]
struct JointSystem {
    rows: Vec<Row>,
    k: Vec<f64>,
}

impl JointSystem {
    fn new(bodies: &[SolverBody], rows: Vec<Row>) -> Self {
        let n = rows.len();
        let mut k = vec![0.0; n * n];
        for (i, ri) in rows.iter().enumerate() {
            for (j, rj) in rows.iter().enumerate() {
                let (ba, bb) = (&bodies[ri.a], &bodies[ri.b]);
                k[i * n + j] = ba.inv_mass * ri.ja_lin.dot(rj.ja_lin)
                    + ri.ja_ang.dot(ba.inv_inertia * rj.ja_ang)
                    + bb.inv_mass * ri.jb_lin.dot(rj.jb_lin)
                    + ri.jb_ang.dot(bb.inv_inertia * rj.jb_ang);
            }
        }
        JointSystem { rows, k }
    }

    fn solve(&mut self, bodies: &mut [SolverBody]) {
        let n = self.rows.len();
        let rhs: Vec<f64> = self
            .rows
            .iter()
            .map(|r| r.target - r.velocity(bodies))
            .collect();
        let all: Vec<usize> = (0..n).collect();
        let mut delta = solve_subsystem(&self.k, n, &all, &rhs);
        for (u, row) in self.rows.iter().enumerate() {
            if row.lo == 0.0 && row.accum + delta[u] < 0.0 {
                // release the limit and solve the rest with its impulse removed
                let fixed = -row.accum;
                let others: Vec<usize> = (0..n).filter(|&i| i != u).collect();
                let reduced: Vec<f64> =
                    (0..n).map(|i| rhs[i] - self.k[i * n + u] * fixed).collect();
                delta = solve_subsystem(&self.k, n, &others, &reduced);
                delta[u] = fixed;
                break;
            }
        }
        for (i, row) in self.rows.iter_mut().enumerate() {
            let next = (row.accum + delta[i]).clamp(row.lo, row.hi);
            let applied = next - row.accum;
            row.accum = next;
            row.apply(bodies, applied);
        }
    }
}

/// Solves `K[idx,idx] x = rhs[idx]` by Gaussian elimination with partial
/// pivoting; unused and degenerate components come back as zero.
fn solve_subsystem(k: &[f64], n: usize, idx: &[usize], rhs: &[f64]) -> Vec<f64> {
    let m = idx.len();
    let mut a = vec![0.0; m * (m + 1)];
    let mut scale = 0.0_f64;
    for (r, &i) in idx.iter().enumerate() {
        for (c, &j) in idx.iter().enumerate() {
            a[r * (m + 1) + c] = k[i * n + j];
        }
        a[r * (m + 1) + m] = rhs[i];
        scale = scale.max(k[i * n + i].abs());
    }
    let tol = 1e-12 * scale.max(f64::MIN_POSITIVE);
    let mut pivot_of = vec![None; m];
    let mut row = 0;
    for col in 0..m {
        let best = (row..m).max_by(|&x, &y| {
            a[x * (m + 1) + col]
                .abs()
                .total_cmp(&a[y * (m + 1) + col].abs())
        });
        let Some(p) = best else { break };
        if a[p * (m + 1) + col].abs() <= tol {
            continue;
        }
        for c in 0..=m {
            a.swap(p * (m + 1) + c, row * (m + 1) + c);
        }
        for r in 0..m {
            if r != row {
                let f = a[r * (m + 1) + col] / a[row * (m + 1) + col];
                if f != 0.0 {
                    for c in col..=m {
                        a[r * (m + 1) + c] -= f * a[row * (m + 1) + c];
                    }
                }
            }
        }
        pivot_of[col] = Some(row);
        row += 1;
    }
    let mut out = vec![0.0; n];
    for (col, &i) in idx.iter().enumerate() {
        if let Some(r) = pivot_of[col] {
            out[i] = a[r * (m + 1) + m] / a[r * (m + 1) + col];
        }
    }
    out
}

/// Impulses remembered between steps for warm starting.
#[derive(Clone, Copy, Debug)]
pub(crate) struct CachedContact {
    pub point: DVec3,
    pub normal_impulse: f64,
    pub tangent_impulse: DVec3,
}

pub(crate) type ContactCache = BTreeMap<(BodyId, BodyId), Vec<CachedContact>>;

const WARM_MATCH_DISTANCE: f64 = 5e-3;

struct ContactRow {
    index: usize,
    normal: Row,
    t1: Row,
    t2: Row,
    mu: f64,
}

pub(crate) struct SolveInput<'a> {
    pub bodies: &'a mut [SolverBody],
    pub index_of: &'a dyn Fn(BodyId) -> usize,
    pub materials: &'a dyn Fn(usize) -> (f64, f64),
    pub contacts: &'a mut [Contact],
    pub joints: &'a [Joint],
    pub frames: &'a [JointFrame],
    pub cache: &'a mut ContactCache,
    pub params: &'a SolverParams,
    pub dt: f64,
}

fn body_rows_for_point(
    bodies: &[SolverBody],
    a: usize,
    b: usize,
    ra: DVec3,
    rb: DVec3,
    dir: DVec3,
    target: f64,
) -> Row {
    Row::new(
        bodies,
        a,
        b,
        -dir,
        -ra.cross(dir),
        dir,
        rb.cross(dir),
        target,
    )
}

pub(crate) fn solve(input: SolveInput<'_>) {
    let SolveInput {
        bodies,
        index_of,
        materials,
        contacts,
        joints,
        frames,
        cache,
        params,
        dt,
    } = input;
    let beta_dt = params.baumgarte / dt;

    // ---- joints
    let mut systems: Vec<JointSystem> = Vec::new();
    for (ji, joint) in joints.iter().enumerate() {
        let (a, b) = (index_of(joint.parent), index_of(joint.child));
        let mut rows = Vec::new();
        prepare_joint(bodies, a, b, joint, &frames[ji], beta_dt, &mut rows);
        if let Some(cap) = joint.max_effort {
            let cap = cap * dt;
            for row in &mut rows {
                row.lo = row.lo.max(-cap);
                row.hi = row.hi.min(cap);
            }
        }
        systems.push(JointSystem::new(bodies, rows));
    }

    // ---- contacts
    let mut contact_rows: Vec<ContactRow> = Vec::with_capacity(contacts.len());
    let mut used: BTreeMap<(BodyId, BodyId), Vec<bool>> = BTreeMap::new();
    for (index, c) in contacts.iter().enumerate() {
        let (a, b) = (index_of(c.body_a), index_of(c.body_b));
        let (ba, bb) = (bodies[a], bodies[b]);
        let ra = c.point - ba.x;
        let rb = c.point - bb.x;
        let n = c.normal;
        let (t1, t2) = tangent_basis(n);
        let (fa, ea) = materials(a);
        let (fb, eb) = materials(b);
        let mu = (fa * fb).sqrt();
        let e = ea.max(eb);

        let vrel = (bb.v + bb.w.cross(rb)) - (ba.v + ba.w.cross(ra));
        let vn = vrel.dot(n);
        let bias = beta_dt * (c.penetration - params.slop).max(0.0);
        let bounce = if vn < -params.restitution_threshold {
            -e * vn
        } else {
            0.0
        };

        let mut normal = body_rows_for_point(bodies, a, b, ra, rb, n, bias.max(bounce));
        normal.lo = 0.0;
        let t1r = body_rows_for_point(bodies, a, b, ra, rb, t1, 0.0);
        let t2r = body_rows_for_point(bodies, a, b, ra, rb, t2, 0.0);
        contact_rows.push(ContactRow {
            index,
            normal,
            t1: t1r,
            t2: t2r,
            mu,
        });

        if params.warm_starting {
            if let Some(prev) = cache.get(&(c.body_a, c.body_b)) {
                let flags = used
                    .entry((c.body_a, c.body_b))
                    .or_insert_with(|| vec![false; prev.len()]);
                let best = prev
                    .iter()
                    .enumerate()
                    .filter(|(i, p)| {
                        !flags[*i] && (p.point - c.point).length() < WARM_MATCH_DISTANCE
                    })
                    .min_by(|x, y| {
                        (x.1.point - c.point)
                            .length()
                            .total_cmp(&(y.1.point - c.point).length())
                    });
                if let Some((i, p)) = best {
                    flags[i] = true;
                    let row = contact_rows.last_mut().unwrap();
                    row.normal.accum = p.normal_impulse;
                    row.t1.accum = p.tangent_impulse.dot(t1);
                    row.t2.accum = p.tangent_impulse.dot(t2);
                    // re-project onto the current cone
                    let limit = row.mu * row.normal.accum;
                    let len = (row.t1.accum * row.t1.accum + row.t2.accum * row.t2.accum).sqrt();
                    if len > limit && len > 0.0 {
                        row.t1.accum *= limit / len;
                        row.t2.accum *= limit / len;
                    }
                }
            }
        }
    }

    // joints start cold: carrying their Baumgarte impulses across steps
    // destabilizes stars of heavy links on a light hub
    if params.warm_starting {
        for cr in &contact_rows {
            cr.normal.apply(bodies, cr.normal.accum);
            cr.t1.apply(bodies, cr.t1.accum);
            cr.t2.apply(bodies, cr.t2.accum);
        }
    }

    // joint damping acts once per step on the free coordinate
    for (ji, joint) in joints.iter().enumerate() {
        if joint.damping > 0.0 && joint.kind != JointKind::Fixed {
            let (a, b) = (index_of(joint.parent), index_of(joint.child));
            let row = free_axis_row(bodies, a, b, joint, &frames[ji]);
            if row.mass > 0.0 {
                let v = row.velocity(bodies);
                // never reverse the relative motion
                let wanted = -joint.damping * v * dt;
                let limit = row.mass * v.abs();
                row.apply(bodies, wanted.clamp(-limit, limit));
            }
        }
    }

    for _ in 0..params.iterations {
        for system in &mut systems {
            system.solve(bodies);
        }
        for cr in &mut contact_rows {
            cr.normal.solve(bodies);
            solve_friction(cr, bodies);
            debug_assert!(
                (cr.t1.accum.powi(2) + cr.t2.accum.powi(2)).sqrt()
                    <= cr.mu * cr.normal.accum * (1.0 + 1e-9) + 1e-12,
                "friction impulse outside the cone"
            );
        }
    }

    // ---- write back
    cache.clear();
    for cr in &contact_rows {
        let c = &mut contacts[cr.index];
        let tangent = cr.t1.jb_lin * cr.t1.accum + cr.t2.jb_lin * cr.t2.accum;
        c.applied_normal_impulse = cr.normal.accum;
        c.applied_friction_impulse = tangent.length();
        cache
            .entry((c.body_a, c.body_b))
            .or_default()
            .push(CachedContact {
                point: c.point,
                normal_impulse: cr.normal.accum,
                tangent_impulse: tangent,
            });
    }
}

/// Two tangent rows projected jointly onto the disc of radius `mu * normal impulse`.
fn solve_friction(cr: &mut ContactRow, bodies: &mut [SolverBody]) {
    let limit = cr.mu * cr.normal.accum;
    let d1 = if cr.t1.mass > 0.0 {
        -cr.t1.mass * cr.t1.velocity(bodies)
    } else {
        0.0
    };
    let d2 = if cr.t2.mass > 0.0 {
        -cr.t2.mass * cr.t2.velocity(bodies)
    } else {
        0.0
    };
    let (mut n1, mut n2) = (cr.t1.accum + d1, cr.t2.accum + d2);
    let len = (n1 * n1 + n2 * n2).sqrt();
    if len > limit {
        let s = if len > 0.0 { limit / len } else { 0.0 };
        n1 *= s;
        n2 *= s;
    }
    let (a1, a2) = (n1 - cr.t1.accum, n2 - cr.t2.accum);
    cr.t1.accum = n1;
    cr.t2.accum = n2;
    cr.t1.apply(bodies, a1);
    cr.t2.apply(bodies, a2);
}

fn free_axis_row(bodies: &[SolverBody], a: usize, b: usize, joint: &Joint, f: &JointFrame) -> Row {
    match joint.kind {
        JointKind::Revolute => {
            Row::new(bodies, a, b, DVec3::ZERO, -f.axis, DVec3::ZERO, f.axis, 0.0)
        }
        _ => body_rows_for_point(
            bodies,
            a,
            b,
            f.anchor_b - bodies[a].x,
            f.anchor_b - bodies[b].x,
            f.axis,
            0.0,
        ),
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct JointFrame {
    pub anchor_a: DVec3,
    pub anchor_b: DVec3,
    pub axis: DVec3,
    pub axis_b: DVec3,
    pub rotation_error: DVec3,
    pub position: f64,
}

fn prepare_joint(
    bodies: &[SolverBody],
    a: usize,
    b: usize,
    joint: &Joint,
    f: &JointFrame,
    beta_dt: f64,
    rows: &mut Vec<Row>,
) {
    let (xa, xb) = (bodies[a].x, bodies[b].x);
    let d = f.anchor_b - f.anchor_a;

    match joint.kind {
        JointKind::Fixed | JointKind::Revolute => {
            let ra = f.anchor_a - xa;
            let rb = f.anchor_b - xb;
            for dir in [DVec3::X, DVec3::Y, DVec3::Z] {
                let row = body_rows_for_point(bodies, a, b, ra, rb, dir, -beta_dt * d.dot(dir));
                rows.push(row);
            }
        }
        JointKind::Prismatic => {
            let (t1, t2) = tangent_basis(f.axis);
            let ra = f.anchor_b - xa;
            let rb = f.anchor_b - xb;
            for dir in [t1, t2] {
                let row = body_rows_for_point(bodies, a, b, ra, rb, dir, -beta_dt * d.dot(dir));
                rows.push(row);
            }
        }
    }

    match joint.kind {
        JointKind::Fixed | JointKind::Prismatic => {
            for dir in [DVec3::X, DVec3::Y, DVec3::Z] {
                let row = Row::new(
                    bodies,
                    a,
                    b,
                    DVec3::ZERO,
                    -dir,
                    DVec3::ZERO,
                    dir,
                    -beta_dt * f.rotation_error.dot(dir),
                );
                rows.push(row);
            }
        }
        JointKind::Revolute => {
            let (t1, t2) = tangent_basis(f.axis);
            let err = f.axis.cross(f.axis_b);
            for dir in [t1, t2] {
                let row = Row::new(
                    bodies,
                    a,
                    b,
                    DVec3::ZERO,
                    -dir,
                    DVec3::ZERO,
                    dir,
                    -beta_dt * err.dot(dir),
                );
                rows.push(row);
            }
        }
    }

    if let (Some((lower, upper)), true) = (joint.limits, joint.kind != JointKind::Fixed) {
        let pos = f.position;
        let side: i8 = if pos <= lower {
            -1
        } else if pos >= upper {
            1
        } else {
            0
        };
        if side != 0 {
            // sign = +1 pushes the coordinate up (lower limit), -1 pushes it down
            let sign = if side < 0 { 1.0 } else { -1.0 };
            let violation = if side < 0 { lower - pos } else { pos - upper };
            let axis = f.axis * sign;
            let mut row = match joint.kind {
                JointKind::Revolute => Row::new(
                    bodies,
                    a,
                    b,
                    DVec3::ZERO,
                    -axis,
                    DVec3::ZERO,
                    axis,
                    beta_dt * violation,
                ),
                _ => body_rows_for_point(
                    bodies,
                    a,
                    b,
                    f.anchor_b - xa,
                    f.anchor_b - xb,
                    axis,
                    beta_dt * violation,
                ),
            };
            row.lo = 0.0;
            rows.push(row);
        }
    }
}

/// Per-joint world-frame quantities for the current poses.
pub(crate) fn joint_frames<'b>(
    joints: &[Joint],
    body: &dyn Fn(BodyId) -> &'b Body,
) -> Vec<JointFrame> {
    joints
        .iter()
        .map(|j| {
            let (a, b) = (body(j.parent), body(j.child));
            JointFrame {
                anchor_a: j.anchor_world_a(a),
                anchor_b: j.anchor_world_b(b),
                axis: j.axis_world(a),
                axis_b: b.state.pose.orientation * (j.rest_rotation.conjugate() * j.local_axis_a),
                rotation_error: j.rotation_error(a, b),
                position: j.position(a, b),
            }
        })
        .collect()
}
