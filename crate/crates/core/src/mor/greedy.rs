use std::collections::BTreeSet;

use log::info;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::{
    initial_points, weighted_irka, FrequencyWindow, FullSystem, InterpolationSpace, IrkaConfig, MorError, ReducedModel,
    TransferSamples,
};
use crate::linalg::ColumnBasis;
use crate::transport::{Discretization, SignPattern};

/// Orthonormal global basis and where it came from.
#[derive(Clone, Debug)]
pub struct GalerkinProjection {
    pub basis: DMatrix<f64>,
    /// Indices of the contributing anchors in the candidate set.
    pub anchors: Vec<usize>,
    pub decay: f64,
}

impl GalerkinProjection {
    pub fn order(&self) -> usize {
        self.basis.ncols()
    }
}

/// Stacks the raw spaces (columns scaled to unit length) and keeps the left
/// singular vectors with `σ_j ≥ σ_max · 10^(-decay)`.
pub fn svd_combine(spaces: &[&DMatrix<f64>], decay: f64) -> Result<GalerkinProjection, MorError> {
    let first = spaces.first().ok_or_else(|| MorError::EmptyInput("no spaces to combine".into()))?;
    let mut basis = ColumnBasis::new(first.nrows());
    for s in spaces {
        if s.nrows() != first.nrows() {
            return Err(MorError::Dimension(format!("spaces of dimension {} and {}", first.nrows(), s.nrows())));
        }
        basis.push_columns(s);
    }
    Ok(GalerkinProjection { basis: basis.truncated_svd(decay), anchors: (0..spaces.len()).collect(), decay })
}

/// Appends `extra` to the orthonormal `v` unless it already lies in its span.
pub fn with_direction(v: DMatrix<f64>, extra: &DVector<f64>) -> DMatrix<f64> {
    let mut w = extra / extra.norm();
    for _ in 0..2 {
        let c = v.transpose() * &w;
        w -= &v * c;
    }
    let rest = w.norm();
    if rest <= 1e-10 {
        return v;
    }
    let k = v.ncols();
    let mut out = v.resize_horizontally(k + 1, 0.0);
    out.set_column(k, &(w / rest));
    out
}

#[derive(Clone, Debug)]
pub struct GreedyConfig {
    /// Global error bound `Δ̄`.
    pub global_bound: f64,
    /// SVD decay order `s`.
    pub svd_decay: f64,
    pub irka: IrkaConfig,
    /// Number of greedy initializations (spread over the candidate set).
    pub initializations: usize,
    /// Always include the constant steady state direction.
    pub include_constant: bool,
}

impl Default for GreedyConfig {
    fn default() -> Self {
        GreedyConfig {
            global_bound: 1e-2,
            svd_decay: 8.0,
            irka: IrkaConfig::default(),
            initializations: 4,
            include_constant: true,
        }
    }
}

/// One greedy step: reduced order and worst error over the candidates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScatterPoint {
    pub initialization: usize,
    pub step: usize,
    pub order: usize,
    pub delta: f64,
}

#[derive(Clone, Debug)]
pub struct GreedyResult {
    pub projection: GalerkinProjection,
    pub model: ReducedModel,
    /// `Δ^δ = max_q δ_q` for the returned projection.
    pub delta: f64,
    /// `δ_q` per candidate.
    pub errors: Vec<f64>,
    pub scatter: Vec<ScatterPoint>,
    pub spaces: Vec<InterpolationSpace>,
    pub window: FrequencyWindow,
}

/// Candidate flows with their full-order data.
struct Candidate {
    q: Vec<f64>,
    pattern: SignPattern,
    samples: TransferSamples,
}

/// Per-candidate relative errors of a reduced model.
pub fn candidate_errors(
    model: &ReducedModel,
    snapshots: &[Vec<f64>],
    patterns: &[SignPattern],
    samples: &[TransferSamples],
) -> Result<Vec<f64>, MorError> {
    snapshots
        .par_iter()
        .zip(patterns)
        .zip(samples)
        .map(|((q, p), s)| {
            let fam =
                model.family_index(p).ok_or_else(|| MorError::Provenance(format!("no family for pattern {p}")))?;
            let sys = model.evaluate(fam, q);
            match s.relative_error(&sys.transfer()) {
                Ok((d, _)) => Ok(d),
                Err(MorError::SingularShift { .. }) => Ok(f64::INFINITY),
                Err(e) => Err(e),
            }
        })
        .collect()
}

/// `δ_q` of `model` over the flows `snapshots`, recomputed from scratch on
/// `window`.
pub fn recompute_errors(
    disc: &Discretization,
    model: &ReducedModel,
    snapshots: &[Vec<f64>],
    window: &FrequencyWindow,
) -> Result<Vec<f64>, MorError> {
    let mut model = model.clone();
    let mut patterns = Vec::with_capacity(snapshots.len());
    let mut samples = Vec::with_capacity(snapshots.len());
    for q in snapshots {
        let flows = disc.basis.edge_flows(q);
        let pattern = SignPattern::from_flows(&flows);
        let assembled = disc.operator(&pattern)?;
        samples.push(TransferSamples::of_full(&FullSystem::at(&assembled.1, &flows)?, window)?);
        model.ensure_pattern(disc, &pattern)?;
        patterns.push(pattern);
    }
    candidate_errors(&model, snapshots, &patterns, &samples)
}

/// Frequency greedy over the candidate flows `snapshots` (independent flow
/// vectors). Returns the projection with the smallest order among all
/// initializations that reach `Δ̄`.
pub fn frequency_greedy(
    disc: &Discretization,
    snapshots: &[Vec<f64>],
    window: &FrequencyWindow,
    config: &GreedyConfig,
) -> Result<GreedyResult, MorError> {
    if snapshots.is_empty() {
        return Err(MorError::EmptyInput("candidate flow set is empty".into()));
    }
    let edge_flows: Vec<Vec<f64>> = snapshots.iter().map(|q| disc.basis.edge_flows(q)).collect();
    let patterns: Vec<SignPattern> = edge_flows.iter().map(|f| SignPattern::from_flows(f)).collect();
    let systems = snapshots
        .par_iter()
        .zip(&edge_flows)
        .zip(&patterns)
        .map(|((_, f), p)| {
            let assembled = disc.operator(p)?;
            FullSystem::at(&assembled.1, f)
        })
        .collect::<Result<Vec<_>, MorError>>()?;

    let norm_sq = |sys: &FullSystem, freqs: &[f64]| -> Vec<f64> {
        freqs
            .par_iter()
            .map(|&w| {
                sys.transfer(nalgebra::Complex::new(0.0, w))
                    .map(|h| h.iter().map(|v| v.norm_sqr()).sum())
                    .unwrap_or(f64::INFINITY)
            })
            .collect()
    };
    let window = window.calibrated(|freqs| norm_sq(&systems[0], freqs));
    info!(target: "hydronet::greedy", "quadrature nodes: {}", window.nodes);

    let candidates: Vec<Candidate> = systems
        .par_iter()
        .zip(snapshots)
        .zip(&patterns)
        .map(|((sys, q), p)| {
            Ok(Candidate { q: q.clone(), pattern: p.clone(), samples: TransferSamples::of_full(sys, &window)? })
        })
        .collect::<Result<_, MorError>>()?;

    let sigma0 = initial_points(&window, config.irka.initial_points);
    let spaces = systems
        .par_iter()
        .zip(&candidates)
        .map(|(sys, c)| weighted_irka(sys, &c.samples, &sigma0, &config.irka))
        .collect::<Result<Vec<_>, MorError>>()?;

    let unique_patterns: Vec<SignPattern> = {
        let mut seen: Vec<SignPattern> = Vec::new();
        for p in &patterns {
            if !seen.contains(p) {
                seen.push(p.clone());
            }
        }
        seen
    };
    let constant = DVector::from_column_slice(&disc.energy.inverse_scaling());
    let samples: Vec<TransferSamples> = candidates.iter().map(|c| c.samples.clone()).collect();
    let qs: Vec<Vec<f64>> = candidates.iter().map(|c| c.q.clone()).collect();
    let pats: Vec<SignPattern> = candidates.iter().map(|c| c.pattern.clone()).collect();

    let n_d = snapshots.len();
    let n_init = config.initializations.clamp(1, n_d);
    let mut scatter = Vec::new();
    let mut successes: Vec<(GalerkinProjection, ReducedModel, f64, Vec<f64>)> = Vec::new();
    let mut worst_failure: Option<(f64, Vec<f64>)> = None;

    for init in 0..n_init {
        let seed = init * n_d / n_init;
        let mut columns = ColumnBasis::new(disc.n_cells());
        let mut used = BTreeSet::new();
        columns.push_columns(&spaces[seed].raw);
        used.insert(seed);
        let mut step = 0;
        loop {
            let mut v = columns.truncated_svd(config.svd_decay);
            if config.include_constant {
                v = with_direction(v, &constant);
            }
            let model = ReducedModel::from_global_basis(disc, v.clone(), &unique_patterns)?;
            let errors = candidate_errors(&model, &qs, &pats, &samples)?;
            let (m, delta) =
                errors
                    .iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &e)| if e > bv { (i, e) } else { (bi, bv) });
            scatter.push(ScatterPoint { initialization: init, step, order: v.ncols(), delta });
            info!(target: "hydronet::greedy", "init={init} step={step} r={} delta={delta:e}", v.ncols());
            if delta < config.global_bound {
                let projection =
                    GalerkinProjection { basis: v, anchors: used.iter().copied().collect(), decay: config.svd_decay };
                successes.push((projection, model, delta, errors));
                break;
            }
            if used.contains(&m) || used.len() == n_d {
                if worst_failure.as_ref().map_or(true, |(d, _)| delta < *d) {
                    worst_failure = Some((delta, errors));
                }
                break;
            }
            columns.push_columns(&spaces[m].raw);
            used.insert(m);
            step += 1;
        }
    }

    let best = successes.into_iter().min_by(|a, b| a.0.order().cmp(&b.0.order()).then(a.2.total_cmp(&b.2)));
    match best {
        Some((projection, model, delta, errors)) => {
            Ok(GreedyResult { projection, model, delta, errors, scatter, spaces, window })
        }
        None => {
            let (delta, errors) = worst_failure.expect("every initialization ends in success or failure");
            Err(MorError::GreedyNonTermination { delta, errors: errors.into_iter().enumerate().collect() })
        }
    }
}
