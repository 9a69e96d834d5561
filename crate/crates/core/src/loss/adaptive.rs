//! Loss-balancing weights driven by running averages of the term values.

use super::N_BALANCED;

pub const BETA: f64 = 0.2;
pub const ALPHA: f64 = 0.1;
pub const EPS: f64 = 1e-6;

/// Exponential averages and smoothed weights of the balanced terms.
///
/// Inactive terms (no sample points) keep weight 1 and are left out of the
/// averages, so the mean over all balanced weights stays 1.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdaptiveState {
    pub ema: [f64; N_BALANCED],
    pub weights: [f64; N_BALANCED],
}

impl Default for AdaptiveState {
    fn default() -> Self {
        Self {
            ema: [0.0; N_BALANCED],
            weights: [1.0; N_BALANCED],
        }
    }
}

impl AdaptiveState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Advances the averages with the current term values and returns the
    /// new weights.
    pub fn update(&mut self, values: &[f64; N_BALANCED], active: &[bool; N_BALANCED]) -> [f64; N_BALANCED] {
        let n_active = active.iter().filter(|&&a| a).count();
        if n_active == 0 {
            return self.weights;
        }
        for j in 0..N_BALANCED {
            if active[j] {
                self.ema[j] = (1.0 - BETA) * self.ema[j] + BETA * values[j];
            }
        }
        let mean_ema = (0..N_BALANCED)
            .filter(|&j| active[j])
            .map(|j| self.ema[j])
            .sum::<f64>()
            / n_active as f64;
        if mean_ema > 0.0 {
            for j in 0..N_BALANCED {
                if active[j] {
                    let r = self.ema[j] / mean_ema;
                    let raw = 1.0 / (r + EPS);
                    self.weights[j] = (1.0 - ALPHA) * self.weights[j] + ALPHA * raw;
                }
            }
        }
        let mean_w = (0..N_BALANCED)
            .filter(|&j| active[j])
            .map(|j| self.weights[j])
            .sum::<f64>()
            / n_active as f64;
        for j in 0..N_BALANCED {
            self.weights[j] = if active[j] { self.weights[j] / mean_w } else { 1.0 };
        }
        self.weights
    }
}
