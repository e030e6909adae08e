use glam::DVec3;

use super::descriptor::DisplaySpec;
use super::DeviceError;
use crate::physics::Pose;

/// Largest distance from the display plane still accepted as a touch (m).
pub const TOUCH_TOLERANCE: f64 = 5e-3;

/// Pixel under `world_point` for a display on a link at `link_pose`.
/// Pixel (0, 0) is the top-left corner; columns grow along `up × normal`.
pub fn map_touch(
    spec: &DisplaySpec,
    link_pose: &Pose,
    world_point: DVec3,
) -> Result<(u32, u32), DeviceError> {
    let local = link_pose.inverse_transform_point(world_point) - spec.center;
    let off = local.dot(spec.normal);
    if !off.is_finite() || off.abs() > TOUCH_TOLERANCE {
        return Err(DeviceError::OffSurface(format!(
            "{:.4} m from the display plane",
            off
        )));
    }
    let [w, h] = spec.size;
    let x = local.dot(spec.right()) + 0.5 * w;
    let y = 0.5 * h - local.dot(spec.up);
    let eps = 1e-9 * w.max(h);
    if x < -eps || x > w + eps || y < -eps || y > h + eps {
        return Err(DeviceError::OffSurface(
            "outside the display rectangle".into(),
        ));
    }
    let u = ((x / w * spec.width as f64).floor().max(0.0) as u32).min(spec.width - 1);
    let v = ((y / h * spec.height as f64).floor().max(0.0) as u32).min(spec.height - 1);
    Ok((u, v))
}

/// World position of the center of pixel `(u, v)`; inverse of [`map_touch`].
pub fn pixel_center(spec: &DisplaySpec, link_pose: &Pose, u: u32, v: u32) -> DVec3 {
    let [w, h] = spec.size;
    let x = (u as f64 + 0.5) / spec.width as f64 * w - 0.5 * w;
    let y = 0.5 * h - (v as f64 + 0.5) / spec.height as f64 * h;
    link_pose.transform_point(spec.center + spec.right() * x + spec.up * y)
}
