use log::debug;
use nalgebra::{Complex, DMatrix, DVector};

use super::{FrequencyWindow, FullSystem, MorError, TransferSamples};
use crate::linalg::{ColumnBasis, HessenbergTransfer};

#[derive(Clone, Debug)]
pub struct IrkaConfig {
    /// Number of initial interpolation points.
    pub initial_points: usize,
    /// Fixed-point sweeps per point count.
    pub max_sweeps: usize,
    /// Local error bound `δ̄`.
    pub local_bound: f64,
    /// Relative change of the points below which the iteration stops.
    pub tolerance: f64,
}

impl Default for IrkaConfig {
    fn default() -> Self {
        IrkaConfig { initial_points: 4, max_sweeps: 15, local_bound: 5e-3, tolerance: 1e-6 }
    }
}

/// One fixed-point sweep: state dimension and local error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepRecord {
    pub order: usize,
    pub delta: f64,
}

/// Local interpolation space of one anchor flow.
#[derive(Clone, Debug)]
pub struct InterpolationSpace {
    /// Interpolation points with `Im σ ≥ 0`; complex points stand for a
    /// conjugate pair.
    pub sigma: Vec<Complex<f64>>,
    /// Tangential directions. With a single input they only rescale columns.
    pub directions: Vec<Complex<f64>>,
    /// Realified resolvent columns `[Re x, Im x]`.
    pub raw: DMatrix<f64>,
    /// Orthonormal basis of `raw`.
    pub basis: DMatrix<f64>,
    pub delta: f64,
    pub window: FrequencyWindow,
    pub trace: Vec<SweepRecord>,
}

impl InterpolationSpace {
    pub fn order(&self) -> usize {
        self.basis.ncols()
    }
}

/// `r` real points log-spaced on `[max(W_l, 10⁻³ W_h), W_h]`.
pub fn initial_points(window: &FrequencyWindow, r: usize) -> Vec<Complex<f64>> {
    let lo = window.low.max(1e-3 * window.high).ln();
    let hi = window.high.ln();
    (0..r)
        .map(|k| {
            let t = if r == 1 { 1.0 } else { k as f64 / (r - 1) as f64 };
            Complex::new((lo + (hi - lo) * t).exp(), 0.0)
        })
        .collect()
}

fn dimension(sigma: &[Complex<f64>]) -> usize {
    sigma.iter().map(|s| if s.im > 0.0 { 2 } else { 1 }).sum()
}

struct Sweep {
    sigma: Vec<Complex<f64>>,
    directions: Vec<Complex<f64>>,
    raw: DMatrix<f64>,
    basis: DMatrix<f64>,
    delta: f64,
    pointwise: Vec<f64>,
}

fn build_columns(
    system: &FullSystem,
    sigma: &[Complex<f64>],
    directions: &[Complex<f64>],
) -> Result<DMatrix<f64>, MorError> {
    let n = system.n_states();
    let mut cols: Vec<DVector<f64>> = Vec::new();
    for (s, b) in sigma.iter().zip(directions) {
        let x = system.resolvent_column(*s)?;
        let x: Vec<Complex<f64>> = x.into_iter().map(|v| v * b).collect();
        cols.push(DVector::from_iterator(n, x.iter().map(|v| v.re)));
        if s.im > 0.0 {
            cols.push(DVector::from_iterator(n, x.iter().map(|v| v.im)));
        }
    }
    Ok(DMatrix::from_columns(&cols))
}

/// Mirrors reduced poles into the right half-plane, one point per conjugate
/// pair. Poles on or right of the imaginary axis are reflected with a floor.
fn mirrored_points(a: &DMatrix<f64>, floor: f64) -> Vec<Complex<f64>> {
    let eig = a.complex_eigenvalues();
    let mut out = Vec::new();
    for lam in eig.iter() {
        let tol = 1e-10 * lam.norm().max(f64::MIN_POSITIVE);
        if lam.im < -tol {
            continue;
        }
        let im = if lam.im.abs() <= tol { 0.0 } else { lam.im };
        let re = if lam.re < 0.0 { -lam.re } else { lam.re.abs().max(floor) };
        out.push(Complex::new(re.max(floor), im));
    }
    out.sort_by(|x, y| x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im)));
    out
}

/// `y* b̃` for the left eigenvector `y` of `a` belonging to `λ = -σ̄`-mirror,
/// computed by two steps of inverse iteration.
fn tangential_direction(a: &DMatrix<f64>, b: &DVector<f64>, sigma: Complex<f64>) -> Complex<f64> {
    let r = a.nrows();
    let lam = -sigma;
    let shift = lam.conj() + Complex::new(1e-10 * lam.norm().max(1e-300), 0.0);
    let at = a.transpose().map(|v| Complex::new(v, 0.0)) - DMatrix::from_diagonal_element(r, r, shift);
    let lu = at.lu();
    let mut y = DVector::from_element(r, Complex::new(1.0, 0.0));
    for _ in 0..2 {
        match lu.solve(&y) {
            Some(z) if z.iter().all(|v| v.re.is_finite() && v.im.is_finite()) => {
                let nrm = z.norm();
                if nrm == 0.0 {
                    return Complex::new(1.0, 0.0);
                }
                y = z / Complex::new(nrm, 0.0);
            }
            _ => return Complex::new(1.0, 0.0),
        }
    }
    let d: Complex<f64> = y.iter().zip(b.iter()).map(|(yk, bk)| yk.conj() * bk).sum();
    if d.norm() <= 1e-14 * b.norm() {
        Complex::new(1.0, 0.0)
    } else {
        d / d.norm()
    }
}

fn sweep(
    system: &FullSystem,
    samples: &TransferSamples,
    sigma: &[Complex<f64>],
    directions: &[Complex<f64>],
) -> Result<(Sweep, DMatrix<f64>, DVector<f64>), MorError> {
    let raw = build_columns(system, sigma, directions)?;
    let mut cb = ColumnBasis::new(system.n_states());
    cb.push_columns(&raw);
    let basis = cb.q();
    let (ar, br, cr) = system.project(&basis);
    let ht = HessenbergTransfer::new(&ar, &br, &cr);
    let (delta, pointwise) = match samples.relative_error(&ht) {
        Ok(r) => r,
        Err(MorError::SingularShift { .. }) => (f64::INFINITY, vec![f64::INFINITY; samples.values.len()]),
        Err(e) => return Err(e),
    };
    Ok((Sweep { sigma: sigma.to_vec(), directions: directions.to_vec(), raw, basis, delta, pointwise }, ar, br))
}

fn converged(old: &[Complex<f64>], new: &[Complex<f64>], tol: f64) -> bool {
    old.len() == new.len() && old.iter().zip(new).all(|(a, b)| (a - b).norm() <= tol * a.norm().max(b.norm()))
}

/// Weighted IRKA at fixed flows: interpolation points are moved to the
/// mirrored reduced poles; the sweep with the smallest weighted error is
/// kept. If it misses the local bound, points are added at the frequencies
/// with the largest pointwise error and the iteration restarts.
pub fn weighted_irka(
    system: &FullSystem,
    samples: &TransferSamples,
    sigma0: &[Complex<f64>],
    config: &IrkaConfig,
) -> Result<InterpolationSpace, MorError> {
    if sigma0.is_empty() {
        return Err(MorError::EmptyInput("initial interpolation points".into()));
    }
    if let Some(s) = sigma0.iter().find(|s| !(s.re > 0.0)) {
        return Err(MorError::InvalidWindow(format!("initial point {s} is not in the open right half-plane")));
    }
    let n = system.n_states();
    let window = samples.window;
    let floor = 1e-6 * window.high;
    let freqs = window.frequencies();
    let mut points: Vec<Complex<f64>> = sigma0.iter().map(|s| if s.im < 0.0 { s.conj() } else { *s }).collect();
    let mut trace = Vec::new();

    loop {
        let mut best: Option<Sweep> = None;
        let mut sigma = points.clone();
        let mut directions = vec![Complex::new(1.0, 0.0); sigma.len()];
        for _ in 0..config.max_sweeps.max(1) {
            let (current, ar, br) = sweep(system, samples, &sigma, &directions)?;
            trace.push(SweepRecord { order: current.basis.ncols(), delta: current.delta });
            debug!(target: "hydronet::irka", "order={} delta={:e}", current.basis.ncols(), current.delta);
            let next = mirrored_points(&ar, floor);
            if best.as_ref().map_or(true, |b| current.delta < b.delta) {
                best = Some(current);
            }
            if next.is_empty() {
                break;
            }
            let next_dirs = next.iter().map(|&s| tangential_direction(&ar, &br, s)).collect();
            let done = converged(&sigma, &next, config.tolerance);
            sigma = next;
            directions = next_dirs;
            if done {
                break;
            }
        }
        let best = best.expect("at least one sweep");
        if best.delta < config.local_bound {
            return Ok(InterpolationSpace {
                sigma: best.sigma,
                directions: best.directions,
                raw: best.raw,
                basis: best.basis,
                delta: best.delta,
                window,
                trace,
            });
        }

        // grow: add points where the best reduced model is worst
        let grow = (best.sigma.len() / 4).max(2);
        let mut idx: Vec<usize> = (0..freqs.len()).collect();
        idx.sort_by(|&a, &b| best.pointwise[b].total_cmp(&best.pointwise[a]));
        let mut added: Vec<usize> = Vec::new();
        for i in idx {
            if added.len() == grow {
                break;
            }
            if added.iter().all(|&j| i.abs_diff(j) > 2) {
                added.push(i);
            }
        }
        let mut next = best.sigma.clone();
        for i in added {
            // `iω`, nudged off the imaginary axis
            next.push(Complex::new(floor, freqs[i]));
        }
        if dimension(&next) > n / 2 {
            return Err(MorError::IrkaGrowth { order: dimension(&next), delta: best.delta, trace });
        }
        points = next;
    }
}
