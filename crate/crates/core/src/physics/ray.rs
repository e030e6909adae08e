use glam::DVec3;

use super::body::{Body, BodyId, Shape};
use super::collide::{world_plane, Obb};
use super::world::World;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RayHit {
    pub body: BodyId,
    pub distance: f64,
    pub point: DVec3,
}

/// Distance along a unit ray to the first entry into `body`'s shape.
/// Rays that start inside a shape do not hit it.
pub fn ray_shape(body: &Body, origin: DVec3, dir: DVec3) -> Option<f64> {
    match body.shape {
        Shape::Sphere { radius } => {
            let oc = origin - body.state.pose.position;
            let c = oc.length_squared() - radius * radius;
            if c < 0.0 {
                return None;
            }
            let b = oc.dot(dir);
            let disc = b * b - c;
            if disc < 0.0 {
                return None;
            }
            let t = -b - disc.sqrt();
            (t >= 0.0).then_some(t)
        }
        Shape::Plane { normal, offset } => {
            let (n, d) = world_plane(body, normal, offset);
            let height = n.dot(origin) - d;
            let rate = n.dot(dir);
            if height < 0.0 || rate >= 0.0 {
                return None;
            }
            Some(height / -rate)
        }
        other => {
            let half = other.collision_box()?;
            let obb = Obb::of(body, half);
            let o = obb.to_local(origin);
            let r = DVec3::new(
                obb.axes[0].dot(dir),
                obb.axes[1].dot(dir),
                obb.axes[2].dot(dir),
            );
            let (mut t_in, mut t_out) = (f64::NEG_INFINITY, f64::INFINITY);
            for k in 0..3 {
                if r[k].abs() < 1e-15 {
                    if o[k].abs() > half[k] {
                        return None;
                    }
                    continue;
                }
                let t1 = (-half[k] - o[k]) / r[k];
                let t2 = (half[k] - o[k]) / r[k];
                t_in = t_in.max(t1.min(t2));
                t_out = t_out.min(t1.max(t2));
            }
            (t_in <= t_out && t_in >= 0.0).then_some(t_in)
        }
    }
}

impl World {
    /// Nearest hit within `max_range`; equal distances go to the lower body id.
    pub fn raycast(
        &self,
        origin: DVec3,
        direction: DVec3,
        max_range: f64,
        exclude: &[BodyId],
    ) -> Option<RayHit> {
        let dir = direction.normalize_or_zero();
        if dir == DVec3::ZERO || !origin.is_finite() {
            return None;
        }
        let mut best: Option<RayHit> = None;
        for body in self.bodies() {
            if exclude.contains(&body.id) {
                continue;
            }
            if let Some(t) = ray_shape(body, origin, dir) {
                if t <= max_range && best.is_none_or(|b| t < b.distance) {
                    best = Some(RayHit {
                        body: body.id,
                        distance: t,
                        point: origin + dir * t,
                    });
                }
            }
        }
        best
    }
}
