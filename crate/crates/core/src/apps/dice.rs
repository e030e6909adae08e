use std::collections::BTreeMap;

use super::face::{face_up, FaceId};
use super::messages::DiceResult;
use super::numeral::render_numeral;
use super::AppNode;
use crate::devices::{device_topic, AccelSample, DisplayFrame, CH_CMD, CH_SAMPLE};
use crate::msgbus::{Bus, BusError, PublisherHandle, Subscription, VirtualClock};
use crate::scene::ModelSpec;

const UP_FG: [u8; 3] = [255, 255, 255];
const UP_BG: [u8; 3] = [200, 30, 40];
const IDLE_FG: [u8; 3] = [90, 90, 90];
const IDLE_BG: [u8; 3] = [16, 16, 16];

#[derive(Clone, Debug, PartialEq)]
pub struct DiceConfig {
    pub instance: String,
    pub accel: String,
    /// Display on each face with its pixel size.
    pub displays: BTreeMap<FaceId, (String, u32, u32)>,
    /// Identical face readings in a row before a result is reported.
    pub settle_samples: u32,
}

impl DiceConfig {
    /// Uses the model's first accelerometer and the displays whose outward
    /// normal is a body axis.
    pub fn from_model(instance: &str, model: &ModelSpec) -> Option<Self> {
        let accel = model
            .devices
            .iter()
            .find(|d| matches!(d.kind, crate::devices::DeviceKind::Accelerometer { .. }))?;
        let mut displays = BTreeMap::new();
        for d in &model.displays {
            let link = model.link(&d.link)?;
            let normal = link.pose.orientation * d.normal;
            if let Some(face) = FaceId::ALL
                .into_iter()
                .find(|f| f.normal().dot(normal) > 1.0 - 1e-9)
            {
                displays
                    .entry(face)
                    .or_insert((d.id.clone(), d.width, d.height));
            }
        }
        Some(Self {
            instance: instance.to_string(),
            accel: accel.id.clone(),
            displays,
            settle_samples: 20,
        })
    }
}

/// Turns a cube into a die: shows each face's pip count and highlights the
/// face that comes to rest on top.
pub struct DiceApp {
    name: String,
    config: DiceConfig,
    accel: Subscription,
    result: PublisherHandle,
    screens: BTreeMap<FaceId, PublisherHandle>,
    started: bool,
    candidate: Option<FaceId>,
    streak: u32,
    up: Option<FaceId>,
}

impl DiceApp {
    pub fn new(bus: &Bus, config: DiceConfig) -> Result<Self, BusError> {
        let name = format!("app/dice/{}", config.instance);
        let inst = &config.instance;
        let accel = bus.subscribe_typed::<AccelSample>(
            &name,
            &device_topic(inst, &config.accel, CH_SAMPLE),
            256,
        )?;
        let result = bus.advertise_typed::<DiceResult>(&name, &format!("/app/dice/{inst}/face"))?;
        let mut screens = BTreeMap::new();
        for (face, (id, _, _)) in &config.displays {
            screens.insert(
                *face,
                bus.advertise_typed::<DisplayFrame>(&name, &device_topic(inst, id, CH_CMD))?,
            );
        }
        Ok(Self {
            name,
            config,
            accel,
            result,
            screens,
            started: false,
            candidate: None,
            streak: 0,
            up: None,
        })
    }

    /// Face currently reported as up.
    pub fn up(&self) -> Option<FaceId> {
        self.up
    }

    pub fn frame_for(&self, face: FaceId, up: bool) -> Option<DisplayFrame> {
        let (id, w, h) = self.config.displays.get(&face)?;
        let (fg, bg) = if up {
            (UP_FG, UP_BG)
        } else {
            (IDLE_FG, IDLE_BG)
        };
        Some(render_numeral(id, *w, *h, face.pips(), fg, bg))
    }

    fn show(&self, face: FaceId, up: bool, clock: &VirtualClock) -> Result<(), BusError> {
        if let (Some(frame), Some(screen)) = (self.frame_for(face, up), self.screens.get(&face)) {
            screen.publish_msg(&frame, clock)?;
        }
        Ok(())
    }
}

impl AppNode for DiceApp {
    fn name(&self) -> &str {
        &self.name
    }

    fn spin(&mut self, clock: &VirtualClock) -> Result<(), BusError> {
        if !self.started {
            self.started = true;
            for face in FaceId::ALL {
                self.show(face, false, clock)?;
            }
        }
        for (_, s) in self.accel.drain_typed::<AccelSample>() {
            let reading = face_up(s.proper_acceleration);
            if reading.is_some() && reading == self.candidate {
                self.streak += 1;
            } else {
                self.candidate = reading;
                self.streak = u32::from(reading.is_some());
            }
            let Some(face) = self.candidate else { continue };
            if self.streak >= self.config.settle_samples && self.up != Some(face) {
                if let Some(old) = self.up.replace(face) {
                    self.show(old, false, clock)?;
                }
                self.show(face, true, clock)?;
                self.result.publish_msg(
                    &DiceResult {
                        face,
                        value: face.pips(),
                    },
                    clock,
                )?;
            }
        }
        Ok(())
    }
}
