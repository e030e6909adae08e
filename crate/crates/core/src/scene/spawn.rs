use std::collections::BTreeMap;

use thiserror::Error;

use super::validate::{validate, validate_model, Diagnostic};
use super::{ModelSpec, SceneSpec};
use crate::physics::{BodyDesc, Instance, JointDesc, PhysicsError, Pose, World};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpawnError {
    #[error("instance name `{0}` is already in use")]
    NameCollision(String),
    #[error("model failed validation: {}", .0.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; "))]
    ValidationFailed(Vec<Diagnostic>),
}

/// Adds one instance of `model` to the world at `pose`. Bodies are named
/// `<instance>/<link>`.
pub fn spawn(
    world: &mut World,
    model: &ModelSpec,
    pose: Pose,
    instance: &str,
) -> Result<Instance, SpawnError> {
    if world.instance(instance).is_some() {
        return Err(SpawnError::NameCollision(instance.to_string()));
    }
    let mut diags = validate_model(model, world.dt());
    if !crate::msgbus::is_valid_segment(instance) {
        diags.push(Diagnostic {
            code: super::DiagCode::BadName,
            path: format!("instance {instance}"),
            message: "instance names must match [a-z0-9_]+".into(),
        });
    }
    if !diags.is_empty() {
        return Err(SpawnError::ValidationFailed(diags));
    }

    let mut links = BTreeMap::new();
    for link in &model.links {
        let inertia = if link.is_static() {
            glam::DMat3::ZERO
        } else {
            link.inertia_tensor().expect("validated")
        };
        let desc = BodyDesc::new(
            format!("{instance}/{}", link.name),
            link.geometry,
            link.mass,
            inertia,
        )
        .with_pose(pose.compose(&link.pose))
        .with_material(link.friction, link.restitution)
        .with_color(link.color);
        links.insert(link.name.clone(), world.add_body(desc));
    }
    let mut joints = BTreeMap::new();
    for j in &model.joints {
        let id = world
            .add_joint(JointDesc {
                kind: j.kind,
                parent: links[&j.parent],
                child: links[&j.child],
                axis: j.axis,
                anchor: j.anchor,
                limits: j.limits.map(|[lo, hi]| (lo, hi)),
                max_effort: j.max_effort,
                damping: j.damping,
            })
            .expect("validated joint");
        joints.insert(j.name.clone(), id);
    }
    let record = Instance {
        model: model.name.clone(),
        links,
        joints,
    };
    world
        .register_instance(instance, record.clone())
        .map_err(|e| match e {
            PhysicsError::NameCollision(n) => SpawnError::NameCollision(n),
            other => unreachable!("{other}"),
        })?;
    Ok(record)
}

/// Validates a scene and builds its world with every `[[spawn]]` entry.
pub fn build_world(spec: &SceneSpec) -> Result<World, SpawnError> {
    let diags = validate(spec);
    if !diags.is_empty() {
        return Err(SpawnError::ValidationFailed(diags));
    }
    let mut world = World::new(spec.world.config());
    for s in &spec.spawns {
        let model = spec.model(&s.model).expect("validated");
        spawn(&mut world, model, s.pose, &s.name)?;
    }
    Ok(world)
}
