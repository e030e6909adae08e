use std::time::Duration;

pub const NANOS_PER_SEC: u64 = 1_000_000_000;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ClockMode {
    /// Time moves only through [`VirtualClock::tick`] / [`VirtualClock::advance_to`].
    Stepped,
    /// Virtual time tracks wall time multiplied by the factor.
    RealtimeScaled(f64),
}

/// Virtual time in nanoseconds. Never moves backwards.
#[derive(Clone, Debug, PartialEq)]
pub struct VirtualClock {
    now: u64,
    mode: ClockMode,
}

impl Default for VirtualClock {
    fn default() -> Self {
        Self::stepped()
    }
}

impl VirtualClock {
    pub fn stepped() -> Self {
        Self {
            now: 0,
            mode: ClockMode::Stepped,
        }
    }

    /// Panics if `factor` is not a positive finite number.
    pub fn realtime(factor: f64) -> Self {
        assert!(
            factor.is_finite() && factor > 0.0,
            "realtime factor must be > 0"
        );
        Self {
            now: 0,
            mode: ClockMode::RealtimeScaled(factor),
        }
    }

    pub fn mode(&self) -> ClockMode {
        self.mode
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn now_secs(&self) -> f64 {
        self.now as f64 / NANOS_PER_SEC as f64
    }

    pub fn tick(&mut self, dt_ns: u64) {
        self.now += dt_ns;
    }

    /// Moves to `t` if it lies in the future; earlier targets are ignored.
    pub fn advance_to(&mut self, t: u64) {
        self.now = self.now.max(t);
    }

    /// Realtime mode only: catch up with `wall_elapsed` scaled by the factor.
    pub fn sync_wall(&mut self, wall_elapsed: Duration) {
        if let ClockMode::RealtimeScaled(factor) = self.mode {
            let target = (wall_elapsed.as_nanos() as f64 * factor) as u64;
            self.advance_to(target);
        }
    }
}

pub fn secs_to_nanos(secs: f64) -> u64 {
    (secs * NANOS_PER_SEC as f64).round() as u64
}
