use nalgebra::Complex;
use serde::{Deserialize, Serialize};

use super::MorError;

/// Default number of quadrature nodes.
pub const DEFAULT_NODES: usize = 200;
/// Cap of the automatic node doubling.
pub const MAX_NODES: usize = 1600;

/// Frequency range `[W_l, W_h]` in rad/s and its quadrature resolution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrequencyWindow {
    pub low: f64,
    pub high: f64,
    pub nodes: usize,
}

impl FrequencyWindow {
    pub fn new(low: f64, high: f64) -> Result<Self, MorError> {
        if !(low >= 0.0 && high > low && high.is_finite()) {
            return Err(MorError::InvalidWindow(format!("need 0 <= W_l < W_h, got [{low}, {high}]")));
        }
        Ok(FrequencyWindow { low, high, nodes: DEFAULT_NODES })
    }

    pub fn with_nodes(self, nodes: usize) -> Self {
        FrequencyWindow { nodes, ..self }
    }

    /// Quadrature nodes: one linearly spaced segment from `W_l` up to
    /// `10⁻³ W_h` (if `W_l` lies below it) followed by logarithmically spaced
    /// nodes up to `W_h`.
    pub fn frequencies(&self) -> Vec<f64> {
        let n = self.nodes.max(2);
        let split = (self.high * 1e-3).max(self.low);
        let mut out = Vec::with_capacity(n);
        if self.low < split {
            let n_lin = (n / 10).max(2);
            for k in 0..n_lin {
                out.push(self.low + (split - self.low) * k as f64 / (n_lin - 1) as f64);
            }
            let n_log = n - n_lin + 1;
            let (a, b) = (split.ln(), self.high.ln());
            for k in 1..n_log {
                out.push((a + (b - a) * k as f64 / (n_log - 1) as f64).exp());
            }
        } else {
            let (a, b) = (self.low.ln(), self.high.ln());
            for k in 0..n {
                out.push((a + (b - a) * k as f64 / (n - 1) as f64).exp());
            }
        }
        *out.last_mut().unwrap() = self.high;
        out
    }

    /// Composite trapezoid weights for `(1/2π) ∫ f dω` on [`Self::frequencies`].
    pub fn weights(&self) -> Vec<f64> {
        let w = self.frequencies();
        let mut out = vec![0.0; w.len()];
        for k in 0..w.len() - 1 {
            let h = (w[k + 1] - w[k]) / (4.0 * std::f64::consts::PI);
            out[k] += h;
            out[k + 1] += h;
        }
        out
    }

    /// Doubles the node count until the squared norm of `f` changes by less
    /// than 0.1%, up to [`MAX_NODES`]. `f` maps frequencies to `‖H(iω)‖²`.
    pub fn calibrated(&self, f: impl Fn(&[f64]) -> Vec<f64>) -> Self {
        let integrate = |w: &FrequencyWindow| {
            let vals = f(&w.frequencies());
            w.weights().iter().zip(vals).map(|(a, b)| a * b).sum::<f64>()
        };
        let mut current = *self;
        let mut value = integrate(&current);
        while current.nodes < MAX_NODES {
            let finer = current.with_nodes((current.nodes * 2).min(MAX_NODES));
            let fine_value = integrate(&finer);
            let change = (fine_value - value).abs() / fine_value.abs().max(f64::MIN_POSITIVE);
            if change < 1e-3 {
                break;
            }
            current = finer;
            value = fine_value;
        }
        current
    }
}

/// Squared weighted H2 norm `(1/2π) ∫_W ‖H(iω)‖_F² dω` from samples at the
/// window's quadrature nodes.
pub fn weighted_h2_norm_squared(window: &FrequencyWindow, samples: &[Vec<Complex<f64>>]) -> Result<f64, MorError> {
    if window.nodes < 2 {
        return Err(MorError::InvalidWindow("at least two quadrature nodes are required".into()));
    }
    let weights = window.weights();
    if samples.len() != weights.len() {
        return Err(MorError::Dimension(format!("{} samples for {} nodes", samples.len(), weights.len())));
    }
    Ok(weights.iter().zip(samples).map(|(w, h)| w * h.iter().map(|v| v.norm_sqr()).sum::<f64>()).sum())
}

pub fn weighted_h2_norm(window: &FrequencyWindow, samples: &[Vec<Complex<f64>>]) -> Result<f64, MorError> {
    weighted_h2_norm_squared(window, samples).map(f64::sqrt)
}
