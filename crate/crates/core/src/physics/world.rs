use std::collections::BTreeMap;

use glam::{DQuat, DVec3};

use super::body::{Body, BodyDesc, BodyId, Shape};
use super::collide::{collide, Contact};
use super::joint::{Joint, JointDesc, JointId};
use super::solver::{self, ContactCache, SolveInput, SolverBody, SolverParams};
use super::state::{BodySnapshot, WorldState};
use super::{PhysicsError, WrenchCommand, WrenchDuration};

pub const DEFAULT_GRAVITY: DVec3 = DVec3::new(0.0, 0.0, -9.81);
pub const DEFAULT_DT: f64 = 1e-3;
pub const MAX_LINEAR_SPEED: f64 = 100.0;
pub const MAX_ANGULAR_SPEED: f64 = 100.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SleepParams {
    pub linear_threshold: f64,
    pub angular_threshold: f64,
    pub time: f64,
}

impl Default for SleepParams {
    fn default() -> Self {
        Self {
            linear_threshold: 1e-3,
            angular_threshold: 1e-2,
            time: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WorldConfig {
    pub gravity: DVec3,
    pub dt: f64,
    pub solver: SolverParams,
    /// `None` disables sleeping.
    pub sleeping: Option<SleepParams>,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            gravity: DEFAULT_GRAVITY,
            dt: DEFAULT_DT,
            solver: SolverParams::default(),
            sleeping: None,
        }
    }
}

/// Bodies and joints created by one spawned model instance.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Instance {
    pub model: String,
    pub links: BTreeMap<String, BodyId>,
    pub joints: BTreeMap<String, JointId>,
}

#[derive(Clone, Debug)]
struct ActiveWrench {
    body: BodyId,
    force: DVec3,
    torque: DVec3,
    point: Option<DVec3>,
    steps_left: u64,
}

#[derive(Clone, Debug)]
pub struct World {
    config: WorldConfig,
    bodies: Vec<Body>,
    joints: Vec<Joint>,
    wrenches: Vec<ActiveWrench>,
    contacts: Vec<Contact>,
    cache: ContactCache,
    instances: BTreeMap<String, Instance>,
    step_count: u64,
}

impl Default for World {
    fn default() -> Self {
        Self::new(WorldConfig::default())
    }
}

impl World {
    pub fn new(config: WorldConfig) -> Self {
        World {
            config,
            bodies: Vec::new(),
            joints: Vec::new(),
            wrenches: Vec::new(),
            contacts: Vec::new(),
            cache: ContactCache::new(),
            instances: BTreeMap::new(),
            step_count: 0,
        }
    }

    pub fn config(&self) -> &WorldConfig {
        &self.config
    }

    pub fn dt(&self) -> f64 {
        self.config.dt
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    /// Elapsed virtual time, `step_count * dt`.
    pub fn time(&self) -> f64 {
        self.step_count as f64 * self.config.dt
    }

    pub fn add_body(&mut self, desc: BodyDesc) -> BodyId {
        let id = BodyId(self.bodies.len() as u32);
        self.bodies.push(Body::from_desc(id, desc));
        id
    }

    pub fn add_joint(&mut self, desc: JointDesc) -> Result<JointId, PhysicsError> {
        let a = self
            .body(desc.parent)
            .ok_or(PhysicsError::NoSuchBody(desc.parent))?;
        let b = self
            .body(desc.child)
            .ok_or(PhysicsError::NoSuchBody(desc.child))?;
        if desc.parent == desc.child {
            return Err(PhysicsError::InvalidJoint(
                "joint connects a body to itself".into(),
            ));
        }
        if !(desc.axis.length() > 1e-9) || !desc.axis.is_finite() || !desc.anchor.is_finite() {
            return Err(PhysicsError::InvalidJoint(
                "axis must be a finite nonzero vector".into(),
            ));
        }
        let id = JointId(self.joints.len() as u32);
        let joint = Joint::new(id, &desc, a, b);
        self.joints.push(joint);
        Ok(id)
    }

    pub fn body(&self, id: BodyId) -> Option<&Body> {
        self.bodies.get(id.0 as usize)
    }

    pub fn body_mut(&mut self, id: BodyId) -> Option<&mut Body> {
        self.bodies.get_mut(id.0 as usize)
    }

    pub fn body_by_name(&self, name: &str) -> Option<&Body> {
        self.bodies.iter().find(|b| b.name == name)
    }

    pub fn bodies(&self) -> &[Body] {
        &self.bodies
    }

    pub fn joint(&self, id: JointId) -> Option<&Joint> {
        self.joints.get(id.0 as usize)
    }

    pub fn joints(&self) -> &[Joint] {
        &self.joints
    }

    /// Joint coordinate (angle or displacement) for the current poses.
    pub fn joint_position(&self, id: JointId) -> Option<f64> {
        let j = self.joint(id)?;
        Some(j.position(
            &self.bodies[j.parent.0 as usize],
            &self.bodies[j.child.0 as usize],
        ))
    }

    /// Positional and angular error of the constrained directions.
    pub fn joint_error(&self, id: JointId) -> Option<(f64, f64)> {
        let j = self.joint(id)?;
        Some(j.constraint_error(
            &self.bodies[j.parent.0 as usize],
            &self.bodies[j.child.0 as usize],
        ))
    }

    /// Contacts found during the last step, with the impulses the solver applied.
    pub fn last_contacts(&self) -> &[Contact] {
        &self.contacts
    }

    pub fn instances(&self) -> &BTreeMap<String, Instance> {
        &self.instances
    }

    pub fn instance(&self, name: &str) -> Option<&Instance> {
        self.instances.get(name)
    }

    pub fn register_instance(
        &mut self,
        name: &str,
        instance: Instance,
    ) -> Result<(), PhysicsError> {
        if self.instances.contains_key(name) {
            return Err(PhysicsError::NameCollision(name.to_string()));
        }
        self.instances.insert(name.to_string(), instance);
        Ok(())
    }

    /// Changes a sphere's radius in place (used by the marble actuator).
    pub fn set_sphere_radius(&mut self, id: BodyId, radius: f64) -> Result<(), PhysicsError> {
        let body = self.body_mut(id).ok_or(PhysicsError::NoSuchBody(id))?;
        match &mut body.shape {
            Shape::Sphere { radius: r } if radius > 0.0 && radius.is_finite() => {
                *r = radius;
                body.sleeping = false;
                body.rest_time = 0.0;
                Ok(())
            }
            _ => Err(PhysicsError::InvalidShape(format!(
                "body {id} cannot take radius {radius}"
            ))),
        }
    }

    pub fn set_velocity(
        &mut self,
        id: BodyId,
        linear: DVec3,
        angular: DVec3,
    ) -> Result<(), PhysicsError> {
        let body = self.body_mut(id).ok_or(PhysicsError::NoSuchBody(id))?;
        if body.is_static() {
            return Err(PhysicsError::StaticBody(id));
        }
        body.state.linear_velocity = linear;
        body.state.angular_velocity = angular;
        body.sleeping = false;
        body.rest_time = 0.0;
        Ok(())
    }

    /// Queues a wrench; it acts from the next step on.
    pub fn apply_wrench(&mut self, cmd: &WrenchCommand) -> Result<(), PhysicsError> {
        let dt = self.config.dt;
        let body = self
            .body_mut(cmd.body)
            .ok_or(PhysicsError::NoSuchBody(cmd.body))?;
        if body.is_static() {
            return Err(PhysicsError::StaticBody(cmd.body));
        }
        let steps = match cmd.duration {
            WrenchDuration::Impulse => 1,
            WrenchDuration::Seconds(d) => {
                if !d.is_finite() || d < dt * (1.0 - 1e-9) {
                    return Err(PhysicsError::InvalidDuration(d));
                }
                (d / dt).round().max(1.0) as u64
            }
        };
        if !cmd.force.is_finite()
            || !cmd.torque.is_finite()
            || !cmd.application_point.is_none_or(|p| p.is_finite())
        {
            return Err(PhysicsError::NonFiniteCommand);
        }
        body.sleeping = false;
        body.rest_time = 0.0;
        self.wrenches.push(ActiveWrench {
            body: cmd.body,
            force: cmd.force,
            torque: cmd.torque,
            point: cmd.application_point,
            steps_left: steps,
        });
        Ok(())
    }

    /// Total torque a command produces about the body's center of mass at its current pose.
    pub fn wrench_torque(&self, cmd: &WrenchCommand) -> Option<DVec3> {
        let body = self.body(cmd.body)?;
        let lever = cmd
            .application_point
            .map(|p| body.state.pose.orientation * p)
            .unwrap_or(DVec3::ZERO);
        Some(cmd.torque + lever.cross(cmd.force))
    }

    /// Contacts for the current poses, ordered by `(min id, max id)`.
    pub fn detect_contacts(&self) -> Vec<Contact> {
        let mut out = Vec::new();
        for (i, a) in self.bodies.iter().enumerate() {
            for b in &self.bodies[i + 1..] {
                if (a.is_static() || a.sleeping) && (b.is_static() || b.sleeping) {
                    continue;
                }
                for raw in collide(a, b) {
                    out.push(Contact {
                        body_a: a.id,
                        body_b: b.id,
                        point: raw.point,
                        normal: raw.normal,
                        penetration: raw.penetration.max(0.0),
                        applied_normal_impulse: 0.0,
                        applied_friction_impulse: 0.0,
                    });
                }
            }
        }
        out
    }

    /// Advances one `dt`. On failure the world is left as it was before the call.
    pub fn step(&mut self) -> Result<(), PhysicsError> {
        let backup = self.clone();
        match self.step_inner() {
            Ok(()) => Ok(()),
            Err(e) => {
                *self = backup;
                Err(e)
            }
        }
    }

    fn step_inner(&mut self) -> Result<(), PhysicsError> {
        let dt = self.config.dt;
        let gravity = self.config.gravity;
        let n = self.bodies.len();

        let mut force = vec![DVec3::ZERO; n];
        let mut torque = vec![DVec3::ZERO; n];
        for w in &self.wrenches {
            let i = w.body.0 as usize;
            let body = &self.bodies[i];
            force[i] += w.force;
            torque[i] += w.torque;
            if let Some(p) = w.point {
                torque[i] += (body.state.pose.orientation * p).cross(w.force);
            }
        }

        let before: Vec<(DVec3, DVec3)> = self
            .bodies
            .iter()
            .map(|b| (b.state.linear_velocity, b.state.angular_velocity))
            .collect();

        for (i, body) in self.bodies.iter_mut().enumerate() {
            if body.is_static() || body.sleeping {
                body.state.accumulated_force = DVec3::ZERO;
                body.state.accumulated_torque = DVec3::ZERO;
                continue;
            }
            let f = gravity * body.mass + force[i];
            let tau = torque[i];
            let inertia = body.world_inertia();
            let inv_inertia = body.world_inv_inertia();
            let w = body.state.angular_velocity;
            body.state.linear_velocity += f * (body.inv_mass * dt);
            body.state.angular_velocity += inv_inertia * (tau - w.cross(inertia * w)) * dt;
            body.state.accumulated_force = f;
            body.state.accumulated_torque = tau;
        }

        let mut contacts = self.detect_contacts();
        self.wake_touched(&contacts);

        let mut solver_bodies: Vec<SolverBody> = self
            .bodies
            .iter()
            .map(|b| SolverBody::of(b, b.sleeping))
            .collect();
        let frames = solver::joint_frames(&self.joints, &|id| &self.bodies[id.0 as usize]);
        let materials: Vec<(f64, f64)> = self
            .bodies
            .iter()
            .map(|b| (b.friction, b.restitution))
            .collect();
        solver::solve(SolveInput {
            bodies: &mut solver_bodies,
            index_of: &|id: BodyId| id.0 as usize,
            materials: &|i| materials[i],
            contacts: &mut contacts,
            joints: &self.joints,
            frames: &frames,
            cache: &mut self.cache,
            params: &self.config.solver,
            dt,
        });

        for (body, sb) in self.bodies.iter_mut().zip(&solver_bodies) {
            if body.is_static() || body.sleeping {
                continue;
            }
            let (mut v, mut w) = (sb.v, sb.w);
            if !v.is_finite() || !w.is_finite() {
                return Err(PhysicsError::NumericalDivergence(format!(
                    "non-finite velocity on body {}",
                    body.name
                )));
            }
            let clamped = v.length() > MAX_LINEAR_SPEED || w.length() > MAX_ANGULAR_SPEED;
            if clamped {
                if body.clamped_last_step {
                    return Err(PhysicsError::NumericalDivergence(format!(
                        "body {} exceeded the velocity clamp on consecutive steps",
                        body.name
                    )));
                }
                v = v.clamp_length_max(MAX_LINEAR_SPEED);
                w = w.clamp_length_max(MAX_ANGULAR_SPEED);
            }
            body.clamped_last_step = clamped;
            body.state.linear_velocity = v;
            body.state.angular_velocity = w;

            let pose = &mut body.state.pose;
            pose.position += v * dt;
            let spin = DQuat::from_xyzw(w.x, w.y, w.z, 0.0) * pose.orientation;
            let q = pose.orientation;
            pose.orientation = DQuat::from_xyzw(
                q.x + 0.5 * spin.x * dt,
                q.y + 0.5 * spin.y * dt,
                q.z + 0.5 * spin.z * dt,
                q.w + 0.5 * spin.w * dt,
            )
            .normalize();
            if !body.state.is_finite() {
                return Err(PhysicsError::NumericalDivergence(format!(
                    "non-finite pose on body {}",
                    body.name
                )));
            }
        }

        for (body, (v0, w0)) in self.bodies.iter_mut().zip(before) {
            if body.is_static() || body.sleeping {
                body.linear_acceleration = DVec3::ZERO;
                body.angular_acceleration = DVec3::ZERO;
            } else {
                body.linear_acceleration = (body.state.linear_velocity - v0) / dt;
                body.angular_acceleration = (body.state.angular_velocity - w0) / dt;
            }
        }

        if let Some(sleep) = self.config.sleeping {
            self.update_sleep(&sleep);
        }

        for w in &mut self.wrenches {
            w.steps_left -= 1;
        }
        self.wrenches.retain(|w| w.steps_left > 0);
        self.contacts = contacts;
        self.step_count += 1;
        Ok(())
    }

    fn wake_touched(&mut self, contacts: &[Contact]) {
        if self.config.sleeping.is_none() {
            return;
        }
        let threshold = self.config.sleeping.unwrap().linear_threshold;
        for c in contacts {
            let (a, b) = (c.body_a.0 as usize, c.body_b.0 as usize);
            let moving = |body: &Body| {
                !body.is_static()
                    && !body.sleeping
                    && body.state.linear_velocity.length() > threshold
            };
            if (self.bodies[a].sleeping && moving(&self.bodies[b]))
                || (self.bodies[b].sleeping && moving(&self.bodies[a]))
            {
                for i in [a, b] {
                    self.bodies[i].sleeping = false;
                    self.bodies[i].rest_time = 0.0;
                }
            }
        }
    }

    fn update_sleep(&mut self, sleep: &SleepParams) {
        let dt = self.config.dt;
        for body in &mut self.bodies {
            if body.is_static() || body.sleeping {
                continue;
            }
            if body.state.linear_velocity.length() < sleep.linear_threshold
                && body.state.angular_velocity.length() < sleep.angular_threshold
            {
                body.rest_time += dt;
            } else {
                body.rest_time = 0.0;
            }
        }
        // jointed bodies rest together
        for j in &self.joints {
            let (a, b) = (j.parent.0 as usize, j.child.0 as usize);
            let rest = |body: &Body| body.is_static() || body.sleeping || body.rest_time > 0.0;
            if !rest(&self.bodies[a]) || !rest(&self.bodies[b]) {
                self.bodies[a].rest_time = 0.0;
                self.bodies[b].rest_time = 0.0;
            }
        }
        for body in &mut self.bodies {
            if !body.is_static() && !body.sleeping && body.rest_time >= sleep.time {
                body.sleeping = true;
                body.state.linear_velocity = DVec3::ZERO;
                body.state.angular_velocity = DVec3::ZERO;
            }
        }
    }

    /// Copy of all body states, suitable for publishing.
    pub fn snapshot(&self) -> WorldState {
        WorldState {
            step: self.step_count,
            time: self.time(),
            bodies: self
                .bodies
                .iter()
                .map(|b| BodySnapshot {
                    id: b.id,
                    pose: b.state.pose,
                    linear_velocity: b.state.linear_velocity,
                    angular_velocity: b.state.angular_velocity,
                })
                .collect(),
        }
    }
}
