/// Linear battery: idle watts plus a fixed cost per published message.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Battery {
    pub capacity_j: f64,
    pub cost_j: f64,
    pub idle_w: f64,
    pub charge_j: f64,
    pub depleted: bool,
}

impl Battery {
    pub fn full(capacity_j: f64, cost_j: f64, idle_w: f64) -> Self {
        Self {
            capacity_j,
            cost_j,
            idle_w,
            charge_j: capacity_j,
            depleted: capacity_j <= 0.0,
        }
    }

    pub fn charge_fraction(&self) -> f64 {
        if self.capacity_j > 0.0 {
            (self.charge_j / self.capacity_j).clamp(0.0, 1.0)
        } else {
            0.0
        }
    }

    /// Drains for `dt` seconds of idle time and `messages` published messages.
    pub fn tick(&mut self, dt: f64, messages: u64) {
        if self.depleted {
            return;
        }
        self.charge_j -= self.idle_w * dt + self.cost_j * messages as f64;
        if self.charge_j <= 0.0 {
            self.charge_j = 0.0;
            self.depleted = true;
        }
    }

    /// Adds up to `amount_j`, never beyond capacity.
    pub fn charge(&mut self, amount_j: f64) {
        if amount_j > 0.0 {
            self.charge_j = (self.charge_j + amount_j).min(self.capacity_j);
        }
        self.depleted = self.charge_j <= 0.0;
    }
}
