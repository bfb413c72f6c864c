use serde::{Deserialize, Serialize};

/// A badge's local clock relative to true (hub) time.
///
/// `badge = true + offset + drift_ppm * 1e-6 * (true - reference_ts)`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BadgeClock {
    pub offset_ms: f64,
    pub drift_ppm: f64,
    pub reference_ts: i64,
}

impl BadgeClock {
    pub fn new(offset_ms: f64, drift_ppm: f64, reference_ts: i64) -> Self {
        Self {
            offset_ms,
            drift_ppm,
            reference_ts,
        }
    }

    pub fn ideal(reference_ts: i64) -> Self {
        Self::new(0.0, 0.0, reference_ts)
    }

    fn rate(&self) -> f64 {
        1.0 + self.drift_ppm * 1e-6
    }

    pub fn badge_time(&self, true_ts: f64) -> f64 {
        true_ts + self.offset_ms + self.drift_ppm * 1e-6 * (true_ts - self.reference_ts as f64)
    }

    /// Integer ms reading, as a badge would report it.
    pub fn read(&self, true_ts: i64) -> i64 {
        self.badge_time(true_ts as f64).round() as i64
    }

    pub fn true_time(&self, badge_ts: f64) -> f64 {
        self.reference_ts as f64
            + (badge_ts - self.reference_ts as f64 - self.offset_ms) / self.rate()
    }

    /// Badge minus true time at `true_ts`.
    pub fn skew_at(&self, true_ts: f64) -> f64 {
        self.badge_time(true_ts) - true_ts
    }

    pub fn adjust(&mut self, delta_ms: f64) {
        self.offset_ms += delta_ms;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_pair() {
        let c = BadgeClock::new(1500.0, 20.0, 1_000_000);
        for t in [1_000_000.0, 1_600_000.0, 9e6] {
            assert!((c.true_time(c.badge_time(t)) - t).abs() < 1e-6);
        }
    }

    #[test]
    fn drift_accumulates_linearly() {
        let c = BadgeClock::new(0.0, 20.0, 0);
        assert!((c.skew_at(600_000.0) - 12.0).abs() < 1e-9);
    }
}
