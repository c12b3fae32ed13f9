use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::SimulationError;

/// Sampling density of the admissibility checks.
const CHECK_POINTS: usize = 1000;

/// Bounds of the admissible input set: range `[u_l, u_h]`, slope `u_d` and
/// maximal frequency `ω̂`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Admissibility {
    pub u_low: f64,
    pub u_high: f64,
    pub max_slope: f64,
    pub max_frequency: f64,
}

impl Default for Admissibility {
    /// Range `[0.19, 0.6]` GJ/m³, top frequency of a 14000 s period and a
    /// slope bound admitting both reference signals (the out-of-sample signal
    /// dips to 0.1964).
    fn default() -> Self {
        Admissibility { u_low: 0.19, u_high: 0.6, max_slope: 1e-4, max_frequency: 2.0 * PI / 14_000.0 }
    }
}

/// Periodic supply density `u(t) = c₀ + Σ_i a_i cos(iωt) + b_i sin(iωt)` in
/// GJ/m³.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputSignal {
    pub c0: f64,
    /// `(a_i, b_i)` for harmonics `i = 1..=m`.
    pub harmonics: Vec<(f64, f64)>,
    /// Base angular frequency `ω` in rad/s.
    pub omega: f64,
    pub bounds: Admissibility,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalKind {
    InSample,
    OutOfSample,
}

impl InputSignal {
    pub fn constant(c0: f64, bounds: Admissibility) -> Self {
        InputSignal { c0, harmonics: Vec::new(), omega: bounds.max_frequency, bounds }
    }

    /// From amplitude/phase pairs `c_i cos(iωt + β_i)`.
    pub fn from_phases(c0: f64, terms: &[(f64, f64)], omega: f64, bounds: Admissibility) -> Self {
        let harmonics = terms.iter().map(|&(c, beta)| (c * beta.cos(), -c * beta.sin())).collect();
        InputSignal { c0, harmonics, omega, bounds }
    }

    pub fn value(&self, t: f64) -> f64 {
        self.harmonics.iter().enumerate().fold(self.c0, |u, (i, &(a, b))| {
            let x = (i + 1) as f64 * self.omega * t;
            u + a * x.cos() + b * x.sin()
        })
    }

    pub fn derivative(&self, t: f64) -> f64 {
        self.harmonics.iter().enumerate().fold(0.0, |du, (i, &(a, b))| {
            let k = (i + 1) as f64 * self.omega;
            let x = k * t;
            du + k * (b * x.cos() - a * x.sin())
        })
    }

    /// Highest contributing angular frequency `mω` (0 for a constant).
    pub fn max_frequency(&self) -> f64 {
        self.harmonics.iter().rposition(|&(a, b)| a != 0.0 || b != 0.0).map_or(0.0, |i| (i + 1) as f64 * self.omega)
    }

    pub fn period(&self) -> f64 {
        2.0 * PI / self.omega
    }

    /// Checks frequency, range and slope bounds on a grid of 1000 points per
    /// period.
    pub fn check(&self) -> Result<(), SimulationError> {
        let b = &self.bounds;
        let violation =
            |bound: &str, t: f64, value: f64| SimulationError::Inadmissible { bound: bound.to_string(), t, value };
        if self.max_frequency() > b.max_frequency * (1.0 + 1e-12) {
            return Err(violation("max_frequency", 0.0, self.max_frequency()));
        }
        let period = self.period();
        for k in 0..CHECK_POINTS {
            let t = period * k as f64 / CHECK_POINTS as f64;
            let u = self.value(t);
            if u < b.u_low - 1e-12 {
                return Err(violation("u_low", t, u));
            }
            if u > b.u_high + 1e-12 {
                return Err(violation("u_high", t, u));
            }
            let du = self.derivative(t);
            if du.abs() > b.max_slope * (1.0 + 1e-12) {
                return Err(violation("max_slope", t, du));
            }
        }
        Ok(())
    }
}

/// The reference signals with the default bounds: the in-sample signal
/// `0.4 + 0.2 cos(ωt)` with period 14000 s and the two-harmonic out-of-sample
/// signal with period 28000 s.
pub fn make_signal(kind: SignalKind) -> Result<InputSignal, SimulationError> {
    let bounds = Admissibility::default();
    let signal = match kind {
        SignalKind::InSample => {
            InputSignal { c0: 0.4, harmonics: vec![(0.2, 0.0)], omega: 2.0 * PI / 14_000.0, bounds }
        }
        SignalKind::OutOfSample => {
            let (c0, c1, c2) = (0.37, -0.078, 0.089);
            let (s1, s2) = (c1, -c1);
            InputSignal { c0, harmonics: vec![(c1, s1), (c2, s2)], omega: 2.0 * PI / 28_000.0, bounds }
        }
    };
    signal.check()?;
    Ok(signal)
}

/// Worst case training signal: reaches `u_l` and `u_h` and has its top
/// harmonic at `ω̂ = mω`.
///
/// Built as a cosine at the base frequency plus a 10 % ripple at `ω̂`,
/// affinely rescaled so that the sampled extrema hit the bounds exactly.
pub fn training_signal(bounds: Admissibility, m: usize) -> Result<InputSignal, SimulationError> {
    let Admissibility { u_low, u_high, max_frequency, max_slope } = bounds;
    if !(u_low < u_high) || !(max_frequency > 0.0) || m == 0 {
        return Err(SimulationError::InvalidScenario(format!(
            "training signal needs u_l < u_h, ω̂ > 0 and m ≥ 1 (got [{u_low}, {u_high}], {max_frequency}, {m})"
        )));
    }
    let omega = max_frequency / m as f64;
    let mut shape = vec![(1.0, 0.0); 1];
    if m > 1 {
        shape.resize(m, (0.0, 0.0));
        shape[m - 1] = (0.1, 0.0);
    }
    let raw = InputSignal { c0: 0.0, harmonics: shape, omega, bounds };
    let (lo, hi) = extrema(&raw);
    let scale = (u_high - u_low) / (hi - lo);
    let signal = InputSignal {
        c0: u_low - scale * lo,
        harmonics: raw.harmonics.iter().map(|&(a, b)| (a * scale, b * scale)).collect(),
        omega,
        bounds,
    };
    let slope = (0..CHECK_POINTS)
        .map(|k| signal.derivative(signal.period() * k as f64 / CHECK_POINTS as f64).abs())
        .fold(0.0, f64::max);
    if slope > max_slope {
        return Err(SimulationError::Inadmissible { bound: "max_slope".into(), t: f64::NAN, value: slope });
    }
    signal.check()?;
    Ok(signal)
}

/// Minimum and maximum over one period, by dense sampling refined with a
/// golden-section search around the best samples.
fn extrema(signal: &InputSignal) -> (f64, f64) {
    let n = 20 * CHECK_POINTS;
    let period = signal.period();
    let dt = period / n as f64;
    let samples: Vec<f64> = (0..n).map(|k| signal.value(k as f64 * dt)).collect();
    let argmin = (0..n).min_by(|&a, &b| samples[a].total_cmp(&samples[b])).unwrap();
    let argmax = (0..n).max_by(|&a, &b| samples[a].total_cmp(&samples[b])).unwrap();
    let refine = |center: usize, sign: f64| {
        let f = |t: f64| sign * signal.value(t);
        let (mut a, mut b) = ((center as f64 - 1.0) * dt, (center as f64 + 1.0) * dt);
        let g = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..80 {
            let (x1, x2) = (b - g * (b - a), a + g * (b - a));
            if f(x1) < f(x2) {
                b = x2;
            } else {
                a = x1;
            }
        }
        sign * f(0.5 * (a + b)).min(sign * samples[center])
    };
    (refine(argmin, 1.0), refine(argmax, -1.0))
}
