//! Reduced-order surrogates: transfer function sampling, weighted H2 errors,
//! weighted IRKA, SVD combination, the frequency greedy and the reduced
//! model containers.

mod file;
mod greedy;
mod irka;
mod reduced;
mod transfer;
mod window;

pub use file::RomFile;
pub use greedy::{
    candidate_errors, frequency_greedy, recompute_errors, svd_combine, with_direction, GalerkinProjection,
    GreedyConfig, GreedyResult, ScatterPoint,
};
pub use irka::{initial_points, weighted_irka, InterpolationSpace, IrkaConfig, SweepRecord};
pub use reduced::{
    reduce_decomposed, BlockBasis, ReducedFamily, ReducedInput, ReducedModel, ReducedSystem, ReducedTerm, ReducedWeight,
};
pub use transfer::{eval_transfer, FullSystem, TransferSamples};
pub use window::{weighted_h2_norm, weighted_h2_norm_squared, FrequencyWindow, DEFAULT_NODES, MAX_NODES};

use nalgebra::Complex;
use thiserror::Error;

use crate::linalg::LinalgError;
use crate::transport::TransportError;

#[derive(Debug, Error)]
pub enum MorError {
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("invalid frequency window: {0}")]
    InvalidWindow(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("shifted system singular at s = {s}: {reason}")]
    SingularShift { s: Complex<f64>, reason: String },
    #[error("reference transfer function has zero norm on the window")]
    ZeroReference,
    #[error("interpolation point growth reached order {order} with local error {delta:e}")]
    IrkaGrowth { order: usize, delta: f64, trace: Vec<SweepRecord> },
    #[error("greedy used every candidate and still has error {delta:e}; per-candidate errors: {}", format_table(.errors))]
    GreedyNonTermination { delta: f64, errors: Vec<(usize, f64)> },
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("reduced model provenance: {0}")]
    Provenance(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed reduced model file: {0}")]
    Format(String),
}

fn format_table(errors: &[(usize, f64)]) -> String {
    errors.iter().map(|(i, d)| format!("q{i}={d:.3e}")).collect::<Vec<_>>().join(", ")
}
