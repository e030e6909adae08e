use glam::DVec3;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::samples::{AccelSample, ContactEvent, ContactSample, ProximitySample};
use super::DeviceError;
use crate::physics::{Body, BodyId, Pose, World};

fn host(world: &World, body: BodyId) -> Result<&Body, DeviceError> {
    world
        .body(body)
        .ok_or(DeviceError::NoSuchDevice(format!("body {body}")))
}

/// World pose of a device mounted at `mount` (link frame) on `body`.
pub fn mount_world_pose(world: &World, body: BodyId, mount: &Pose) -> Result<Pose, DeviceError> {
    Ok(host(world, body)?.state.pose.compose(mount))
}

/// Proper acceleration at the mount, `Rᵀ(a_world − g)`, plus per-axis
/// Gaussian noise when `noise_sigma > 0`.
pub fn sample_accelerometer<R: Rng + ?Sized>(
    world: &World,
    body: BodyId,
    mount: &Pose,
    noise_sigma: f64,
    rng: &mut R,
    stamp: u64,
) -> Result<AccelSample, DeviceError> {
    let b = host(world, body)?;
    let pose = b.state.pose.compose(mount);
    let a_world = b.acceleration_at(pose.position);
    let mut a = pose.orientation.conjugate() * (a_world - world.config().gravity);
    if noise_sigma > 0.0 {
        let n = Normal::new(0.0, noise_sigma).expect("finite sigma");
        a += DVec3::new(n.sample(rng), n.sample(rng), n.sample(rng));
    }
    Ok(AccelSample {
        stamp,
        proper_acceleration: a,
    })
}

/// Single ray from the mount along its local +x, ignoring the host body.
pub fn sample_proximity(
    world: &World,
    body: BodyId,
    mount: &Pose,
    max_range: f64,
    stamp: u64,
) -> Result<ProximitySample, DeviceError> {
    let pose = mount_world_pose(world, body, mount)?;
    let dir = pose.orientation * DVec3::X;
    let distance = world
        .raycast(pose.position, dir, max_range, &[body])
        .map(|hit| hit.distance);
    Ok(ProximitySample { stamp, distance })
}

/// Contacts of the last step that touch `body`, with impulse/dt as force.
pub fn sample_contact(
    world: &World,
    body: BodyId,
    stamp: u64,
) -> Result<ContactSample, DeviceError> {
    host(world, body)?;
    let dt = world.dt();
    let contacts = world
        .last_contacts()
        .iter()
        .filter(|c| c.involves(body))
        .map(|c| ContactEvent {
            other: c.other(body),
            point: c.point,
            normal: if c.body_b == body {
                c.normal
            } else {
                -c.normal
            },
            force: c.applied_normal_impulse / dt,
        })
        .collect();
    Ok(ContactSample { stamp, contacts })
}
