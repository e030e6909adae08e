use thiserror::Error;

use super::messages::SqueezeEvent;
use super::AppNode;
use crate::devices::{device_topic, ContactSample, DeviceKind, CH_CMD, CH_SAMPLE};
use crate::msgbus::{Bus, BusError, PublisherHandle, Subscription, VirtualClock, NANOS_PER_SEC};
use crate::scene::{ModelSpec, SceneSpec};

/// Samples above the threshold in a row that make a squeeze.
pub const SQUEEZE_SAMPLES: u32 = 3;

/// Radius changes smaller than this are not sent to the ball (m).
pub const RADIUS_STEP: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BallModelParams {
    pub r0: f64,
    /// Growth per doubling of the unread count.
    pub growth: f64,
    /// Decay time constant (s).
    pub tau: f64,
    pub r_min: f64,
    pub r_max: f64,
    /// Contact force that counts as a squeeze (N).
    pub squeeze_threshold: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum ParamsError {
    #[error("missing parameter `{0}`")]
    Missing(&'static str),
    #[error("need r_min <= r0 <= r_max and tau > 0")]
    Range,
}

impl BallModelParams {
    pub fn validated(self) -> Result<Self, ParamsError> {
        let ok =
            self.r_min <= self.r0 && self.r0 <= self.r_max && self.tau > 0.0 && self.r_min > 0.0;
        ok.then_some(self).ok_or(ParamsError::Range)
    }

    /// Reads `[params.marble]`.
    pub fn from_scene(spec: &SceneSpec) -> Result<Self, ParamsError> {
        let get = |k: &'static str| spec.param("marble", k).ok_or(ParamsError::Missing(k));
        Self {
            r0: get("r0")?,
            growth: get("growth")?,
            tau: get("tau")?,
            r_min: get("r_min")?,
            r_max: get("r_max")?,
            squeeze_threshold: get("squeeze_threshold")?,
        }
        .validated()
    }
}

/// `clamp(r0·(1 + growth·log2(1+n))·exp(−t/τ), r_min, r_max)`
pub fn ball_radius(n_messages: u64, t_since_last: f64, p: &BallModelParams) -> f64 {
    let grow = 1.0 + p.growth * (1.0 + n_messages as f64).log2();
    (p.r0 * grow * (-t_since_last / p.tau).exp()).clamp(p.r_min, p.r_max)
}

/// One event per run of at least [`SQUEEZE_SAMPLES`] forces above threshold.
#[derive(Clone, Debug)]
pub struct SqueezeDetector {
    pub threshold: f64,
    run: u32,
}

impl SqueezeDetector {
    pub fn new(threshold: f64) -> Self {
        Self { threshold, run: 0 }
    }

    /// Returns true on the sample that completes a new episode.
    pub fn update(&mut self, force: f64) -> bool {
        if force > self.threshold {
            self.run = self.run.saturating_add(1);
            self.run == SQUEEZE_SAMPLES
        } else {
            self.run = 0;
            false
        }
    }
}

/// Strongest single contact in a sample: a ball pressed onto the ground
/// feels the press plus its own weight at the bottom.
pub fn squeeze_force(sample: &ContactSample) -> f64 {
    sample.contacts.iter().map(|c| c.force).fold(0.0, f64::max)
}

/// The marble answering machine: any message on `/app/marble/inbox` makes
/// the ball grow, silence makes it shrink, and squeezing it reads the
/// messages, reported on `/app/marble/squeeze`.
pub struct MarbleApp {
    name: String,
    instance: String,
    params: BallModelParams,
    contact: Subscription,
    inbox: Subscription,
    radius: PublisherHandle,
    squeeze: PublisherHandle,
    detector: SqueezeDetector,
    unread: u64,
    last_message: u64,
    last_radius: Option<f64>,
}

impl MarbleApp {
    pub fn new(
        bus: &Bus,
        instance: &str,
        contact_device: &str,
        radius_device: &str,
        params: BallModelParams,
    ) -> Result<Self, BusError> {
        let name = format!("app/marble/{instance}");
        Ok(Self {
            contact: bus.subscribe_typed::<ContactSample>(
                &name,
                &device_topic(instance, contact_device, CH_SAMPLE),
                64,
            )?,
            inbox: bus.subscribe_typed::<String>(&name, "/app/marble/inbox", 256)?,
            radius: bus
                .advertise_typed::<f64>(&name, &device_topic(instance, radius_device, CH_CMD))?,
            squeeze: bus.advertise_typed::<SqueezeEvent>(&name, "/app/marble/squeeze")?,
            name,
            instance: instance.to_string(),
            detector: SqueezeDetector::new(params.squeeze_threshold),
            params,
            unread: 0,
            last_message: 0,
            last_radius: None,
        })
    }

    /// Finds the contact and radius devices of a marble model.
    pub fn from_model(
        bus: &Bus,
        instance: &str,
        model: &ModelSpec,
        params: BallModelParams,
    ) -> Option<Result<Self, BusError>> {
        let contact = model
            .devices
            .iter()
            .find(|d| d.kind == DeviceKind::Contact)?;
        let radius = model
            .devices
            .iter()
            .find(|d| d.kind == DeviceKind::Radius)?;
        Some(Self::new(bus, instance, &contact.id, &radius.id, params))
    }

    pub fn unread(&self) -> u64 {
        self.unread
    }

    pub fn radius(&self) -> Option<f64> {
        self.last_radius
    }
}

impl AppNode for MarbleApp {
    fn name(&self) -> &str {
        &self.name
    }

    fn spin(&mut self, clock: &VirtualClock) -> Result<(), BusError> {
        for env in self.inbox.drain() {
            self.unread += 1;
            self.last_message = env.stamp;
        }
        for (env, sample) in self.contact.drain_typed::<ContactSample>() {
            let force = squeeze_force(&sample);
            if self.detector.update(force) {
                let event = SqueezeEvent {
                    instance: self.instance.clone(),
                    stamp: env.stamp,
                    force,
                    unread: self.unread,
                };
                self.squeeze.publish_msg(&event, clock)?;
                self.unread = 0;
            }
        }
        let t = clock.now().saturating_sub(self.last_message) as f64 / NANOS_PER_SEC as f64;
        let r = ball_radius(self.unread, t, &self.params);
        if self
            .last_radius
            .is_none_or(|last| (r - last).abs() >= RADIUS_STEP)
        {
            self.radius.publish_msg(&r, clock)?;
            self.last_radius = Some(r);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> BallModelParams {
        BallModelParams {
            r0: 0.05,
            growth: 0.1,
            tau: 600.0,
            r_min: 0.03,
            r_max: 0.10,
            squeeze_threshold: 5.0,
        }
    }

    #[test]
    fn identity_and_floor() {
        assert_eq!(ball_radius(0, 0.0, &params()), 0.05);
        assert_eq!(ball_radius(0, 1e9, &params()), 0.03);
        assert_eq!(ball_radius(1 << 40, 0.0, &params()), 0.10);
    }

    #[test]
    fn episodes() {
        let mut d = SqueezeDetector::new(5.0);
        let forces = [
            1.0, 6.0, 6.0, 6.0, 6.0, 6.0, 1.0, 7.0, 7.0, 1.0, 8.0, 8.0, 8.0,
        ];
        let events: usize = forces.iter().filter(|&&f| d.update(f)).count();
        assert_eq!(events, 2);
    }

    #[test]
    fn params_checked() {
        let mut p = params();
        p.r0 = 0.2;
        assert_eq!(p.validated(), Err(ParamsError::Range));
    }
}
