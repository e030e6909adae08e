//! Display Cube in the browser: the dice app over a simulated cube, with
//! throw, tip and touch controls. [`CubeDemo`] holds the logic and runs
//! natively; [`WebDemo`] is the JavaScript-facing wrapper.

use glam::DVec3;
use wasm_bindgen::prelude::*;

use vtui_core::apps::{build_app, DiceResult, FaceId};
use vtui_core::devices::{device_topic, TouchEvent, TouchPhase, CH_TOUCH};
use vtui_core::msgbus::{Bus, Subscription};
use vtui_core::physics::{BodyId, WrenchCommand, WrenchDuration};
use vtui_core::runtime::{Command, Simulation};
use vtui_core::scene::{parse_scene, SceneSpec};

pub const SCENE: &str = include_str!("../../../scenes/display_cube.scene");
const INSTANCE: &str = "cube";
/// Display ids in [`FaceId::ALL`] order.
pub const DISPLAYS: [&str; 6] = ["px", "nx", "py", "ny", "pz", "nz"];

pub struct CubeDemo {
    spec: SceneSpec,
    sim: Simulation,
    cube: BodyId,
    results: Subscription,
    touches: Vec<Subscription>,
    last_result: Option<DiceResult>,
    last_touch: Option<TouchEvent>,
    throws: u64,
}

impl CubeDemo {
    pub fn new() -> Result<Self, String> {
        let spec = parse_scene(SCENE).map_err(|e| e.to_string())?;
        Self::with_spec(spec)
    }

    pub fn with_spec(spec: SceneSpec) -> Result<Self, String> {
        let bus = Bus::new();
        let mut sim =
            Simulation::new(spec.clone(), bus.clone(), 60.0).map_err(|e| e.to_string())?;
        sim.bind_remaining_virtual().map_err(|e| e.to_string())?;
        for node in build_app("dice", &spec, &bus)? {
            sim.add_node(node);
        }
        let cube = sim
            .world()
            .body_by_name("cube/body")
            .ok_or("no cube/body")?
            .id;
        let results = bus
            .subscribe_typed::<DiceResult>("web", &format!("/app/dice/{INSTANCE}/face"), 16)
            .map_err(|e| e.to_string())?;
        let touches = DISPLAYS
            .iter()
            .map(|d| {
                bus.subscribe_typed::<TouchEvent>("web", &device_topic(INSTANCE, d, CH_TOUCH), 16)
            })
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        Ok(Self {
            spec,
            sim,
            cube,
            results,
            touches,
            last_result: None,
            last_touch: None,
            throws: 0,
        })
    }

    /// Advances by `seconds` of virtual time, rounded down to whole steps.
    pub fn advance(&mut self, seconds: f64) -> Result<u64, String> {
        let dt = self.sim.world().dt();
        let n = (seconds.max(0.0) / dt + 1e-9).floor() as u64;
        for _ in 0..n {
            self.sim.advance().map_err(|e| e.to_string())?;
        }
        if let Some((_, r)) = self.results.drain_typed::<DiceResult>().pop() {
            self.last_result = Some(r);
        }
        for s in &self.touches {
            if let Some((_, t)) = s.drain_typed::<TouchEvent>().pop() {
                self.last_touch = Some(t);
            }
        }
        Ok(n)
    }

    /// Tosses the cube up with a spin; `seed` varies the spin axis.
    pub fn throw(&mut self, seed: u32) {
        self.throws += 1;
        let a = (seed as f64 * 2.399_963).rem_euclid(std::f64::consts::TAU);
        let torque = DVec3::new(a.cos(), a.sin(), 0.3) * 0.004;
        self.push(DVec3::new(0.0, 0.0, 8.0), torque);
    }

    /// Rolls the cube a quarter turn about the body x axis.
    pub fn tip(&mut self) {
        let axis = self
            .sim
            .world()
            .body(self.cube)
            .map(|b| b.state.pose.orientation * DVec3::X)
            .unwrap_or(DVec3::X);
        self.push(DVec3::new(0.0, 0.0, 4.0), axis * 0.004);
    }

    fn push(&mut self, force: DVec3, torque: DVec3) {
        let mut w = WrenchCommand::force(self.cube, force, WrenchDuration::Seconds(0.05));
        w.torque = torque;
        self.sim.commands().send(Command::ApplyWrench {
            body: Some(self.cube),
            wrench: w,
        });
    }

    pub fn touch(&mut self, display: &str, u: u32, v: u32) {
        self.sim.commands().send(Command::Touch {
            instance: INSTANCE.into(),
            display: display.into(),
            u,
            v,
            phase: TouchPhase::Down,
        });
    }

    pub fn reset(&mut self) -> Result<(), String> {
        *self = Self::with_spec(self.spec.clone())?;
        Ok(())
    }

    pub fn up_face(&self) -> Option<FaceId> {
        self.last_result.as_ref().map(|r| r.face)
    }

    pub fn value(&self) -> u8 {
        self.last_result.as_ref().map_or(0, |r| r.value)
    }

    pub fn last_touch(&self) -> Option<&TouchEvent> {
        self.last_touch.as_ref()
    }

    pub fn time(&self) -> f64 {
        self.sim.world().time()
    }

    pub fn simulation(&self) -> &Simulation {
        &self.sim
    }

    /// Height of the cube center above the ground (m).
    pub fn altitude(&self) -> f64 {
        self.sim
            .world()
            .body(self.cube)
            .map_or(0.0, |b| b.state.pose.position.z)
    }

    /// RGBA pixels of a display, ready for `ImageData`.
    pub fn frame_rgba(&self, display: &str) -> Vec<u8> {
        let Some(f) = self.sim.hal().display_frame(INSTANCE, display) else {
            return Vec::new();
        };
        f.pixels
            .chunks_exact(3)
            .flat_map(|p| [p[0], p[1], p[2], 255])
            .collect()
    }

    pub fn display_size(&self) -> (u32, u32) {
        self.sim
            .hal()
            .display_frame(INSTANCE, DISPLAYS[0])
            .map_or((64, 64), |f| (f.width, f.height))
    }
}

#[wasm_bindgen]
pub struct WebDemo(CubeDemo);

#[wasm_bindgen]
impl WebDemo {
    #[wasm_bindgen(constructor)]
    pub fn new() -> Result<WebDemo, JsError> {
        CubeDemo::new().map(WebDemo).map_err(|e| JsError::new(&e))
    }

    pub fn advance(&mut self, seconds: f64) -> Result<u32, JsError> {
        self.0
            .advance(seconds)
            .map(|n| n as u32)
            .map_err(|e| JsError::new(&e))
    }

    pub fn throw(&mut self, seed: u32) {
        self.0.throw(seed);
    }

    pub fn tip(&mut self) {
        self.0.tip();
    }

    pub fn touch(&mut self, display: &str, u: u32, v: u32) {
        self.0.touch(display, u, v);
    }

    pub fn reset(&mut self) -> Result<(), JsError> {
        self.0.reset().map_err(|e| JsError::new(&e))
    }

    /// Display id of the face that is up, or an empty string before the
    /// first result.
    pub fn up_display(&self) -> String {
        self.0
            .up_face()
            .map(|f| DISPLAYS[f.index() as usize].to_string())
            .unwrap_or_default()
    }

    pub fn value(&self) -> u8 {
        self.0.value()
    }

    pub fn last_touch(&self) -> String {
        self.0
            .last_touch()
            .map(|t| format!("{} ({}, {})", t.display, t.u, t.v))
            .unwrap_or_default()
    }

    pub fn time(&self) -> f64 {
        self.0.time()
    }

    pub fn altitude(&self) -> f64 {
        self.0.altitude()
    }

    pub fn frame_rgba(&self, display: &str) -> Vec<u8> {
        self.0.frame_rgba(display)
    }

    pub fn width(&self) -> u32 {
        self.0.display_size().0
    }

    pub fn height_px(&self) -> u32 {
        self.0.display_size().1
    }

    pub fn displays() -> Vec<String> {
        DISPLAYS.iter().map(|d| d.to_string()).collect()
    }
}
