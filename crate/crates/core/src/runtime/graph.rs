use serde::{Deserialize, Serialize};

use crate::devices::{device_topic, CH_BATTERY, CH_FRAME, CH_SAMPLE, CH_TOUCH};
use crate::physics::{Shape, World};
use crate::scene::SceneSpec;

/// Everything a renderer needs to draw the world, minus the moving poses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneGraph {
    pub models: Vec<ModelNode>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelNode {
    pub instance: String,
    pub model: String,
    pub links: Vec<LinkNode>,
    pub displays: Vec<DisplayNode>,
    pub devices: Vec<DeviceNode>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinkNode {
    pub name: String,
    pub body: u32,
    pub geometry: GeometryNode,
    pub color: [u8; 3],
    pub mass: f64,
    pub is_static: bool,
    pub position: [f64; 3],
    /// Quaternion `[x, y, z, w]`.
    pub orientation: [f64; 4],
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum GeometryNode {
    Box { half_extents: [f64; 3] },
    Sphere { radius: f64 },
    Cylinder { radius: f64, half_length: f64 },
    Plane { normal: [f64; 3], offset: f64 },
}

impl From<Shape> for GeometryNode {
    fn from(s: Shape) -> Self {
        match s {
            Shape::Box { half_extents } => GeometryNode::Box {
                half_extents: half_extents.to_array(),
            },
            Shape::Sphere { radius } => GeometryNode::Sphere { radius },
            Shape::Cylinder {
                radius,
                half_length,
            } => GeometryNode::Cylinder {
                radius,
                half_length,
            },
            Shape::Plane { normal, offset } => GeometryNode::Plane {
                normal: normal.to_array(),
                offset,
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisplayNode {
    pub id: String,
    pub link: String,
    pub body: u32,
    pub width: u32,
    pub height: u32,
    /// Link frame.
    pub center: [f64; 3],
    pub normal: [f64; 3],
    pub up: [f64; 3],
    pub size: [f64; 2],
    pub touch: bool,
    pub frame_topic: String,
    pub touch_topic: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviceNode {
    pub id: String,
    pub kind: String,
    pub link: String,
    pub rate: f64,
    pub topic: String,
}

impl SceneGraph {
    /// Graph of every spawned instance, in instance-name order.
    pub fn build(spec: &SceneSpec, world: &World) -> SceneGraph {
        let mut models = Vec::new();
        for (name, inst) in world.instances() {
            let Some(model) = spec.model(&inst.model) else {
                continue;
            };
            let links = model
                .links
                .iter()
                .filter_map(|l| {
                    let id = *inst.links.get(&l.name)?;
                    let body = world.body(id)?;
                    Some(LinkNode {
                        name: l.name.clone(),
                        body: id.0,
                        geometry: body.shape.into(),
                        color: l.color,
                        mass: l.mass,
                        is_static: body.is_static(),
                        position: body.state.pose.position.to_array(),
                        orientation: body.state.pose.orientation.to_array(),
                    })
                })
                .collect();
            let displays = model
                .displays
                .iter()
                .filter_map(|d| {
                    Some(DisplayNode {
                        id: d.id.clone(),
                        link: d.link.clone(),
                        body: inst.links.get(&d.link)?.0,
                        width: d.width,
                        height: d.height,
                        center: d.center.to_array(),
                        normal: d.normal.to_array(),
                        up: d.up.to_array(),
                        size: d.size,
                        touch: d.touch,
                        frame_topic: device_topic(name, &d.id, CH_FRAME),
                        touch_topic: device_topic(name, &d.id, CH_TOUCH),
                    })
                })
                .collect();
            let devices = model
                .devices
                .iter()
                .map(|d| {
                    let channel = if matches!(d.kind, crate::devices::DeviceKind::Battery { .. }) {
                        CH_BATTERY
                    } else {
                        CH_SAMPLE
                    };
                    DeviceNode {
                        id: d.id.clone(),
                        kind: d.kind.name().to_string(),
                        link: d.link.clone(),
                        rate: d.rate,
                        topic: device_topic(name, &d.id, channel),
                    }
                })
                .collect();
            models.push(ModelNode {
                instance: name.clone(),
                model: inst.model.clone(),
                links,
                displays,
                devices,
            });
        }
        SceneGraph { models }
    }

    pub fn model(&self, instance: &str) -> Option<&ModelNode> {
        self.models.iter().find(|m| m.instance == instance)
    }
}
