//! Simulated clock and its parametric cost model.
//!
//! Unit costs replace wall-clock timing so that parallelism effects are
//! hardware-independent: parallel work advances the clock by the maximum
//! of its members' durations, sequential work by the sum. The default
//! constants are declared arbitrary units; only orderings between
//! protocols are meaningful, never absolute values.

use serde::{Deserialize, Serialize};

/// Unit costs of compute and messaging.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub t_fwd_per_sample: f64,
    pub t_bwd_per_sample: f64,
    pub t_agg_per_param: f64,
    pub t_msg_fixed: f64,
    pub t_msg_per_byte: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel {
            t_fwd_per_sample: 1.0,
            t_bwd_per_sample: 2.0,
            t_agg_per_param: 1e-6,
            t_msg_fixed: 5.0,
            t_msg_per_byte: 1e-6,
        }
    }
}

impl CostModel {
    /// Cost of one forward+backward pass over `samples` rows.
    pub fn train_cost(&self, samples: usize) -> f64 {
        (self.t_fwd_per_sample + self.t_bwd_per_sample) * samples as f64
    }

    pub fn message_cost(&self, payload_bytes: usize) -> f64 {
        self.t_msg_fixed + self.t_msg_per_byte * payload_bytes as f64
    }

    pub fn aggregation_cost(&self, param_count: usize) -> f64 {
        self.t_agg_per_param * param_count as f64
    }
}

/// Monotone simulated clock.
#[derive(Debug, Clone)]
pub struct SimClock {
    now: f64,
    pub cost: CostModel,
}

impl SimClock {
    pub fn new(cost: CostModel) -> Self {
        SimClock { now: 0.0, cost }
    }

    pub fn now(&self) -> f64 {
        self.now
    }

    pub fn advance(&mut self, dt: f64) {
        debug_assert!(dt >= 0.0 && dt.is_finite(), "clock step {dt}");
        self.now += dt;
    }

    /// Elapses a window of concurrent work: the clock moves by the maximum
    /// duration. An empty window is a no-op; sequential callers pass
    /// singleton slices.
    pub fn parallel_elapse(&mut self, durations: &[f64]) {
        let max = durations.iter().copied().fold(0.0, f64::max);
        self.advance(max);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_window_costs_the_max() {
        let mut clock = SimClock::new(CostModel::default());
        clock.parallel_elapse(&[3.0, 5.0]);
        assert_eq!(clock.now(), 5.0);
        clock.parallel_elapse(&[4.0]);
        assert_eq!(clock.now(), 9.0);
        clock.parallel_elapse(&[0.0, 0.0, 0.0]);
        assert_eq!(clock.now(), 9.0);
        clock.parallel_elapse(&[]);
        assert_eq!(clock.now(), 9.0);
    }

    #[test]
    fn message_cost_arithmetic() {
        let cost = CostModel {
            t_msg_per_byte: 1e-9,
            ..CostModel::default()
        };
        assert_eq!(cost.message_cost(0), 5.0);
        assert!((cost.message_cost(1_000_000) - (5.0 + 1e-3)).abs() < 1e-15);
    }
}
