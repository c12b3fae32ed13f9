//! Input signals, time integration of the coupled flow/transport equations,
//! time-domain errors and runtime benchmarks.

mod analysis;
mod benchmark;
mod integrate;
mod model;
mod scenario;
mod signal;

pub use analysis::{collect_snapshots, reference_grid, reference_velocities, time_error, ErrorReport};
pub use benchmark::{
    benchmark, step_for, write_benchmark_csv, BenchmarkModel, BenchmarkRow, ReferenceRule, BENCHMARK_HEADER,
};
pub use integrate::{simulate, step_dae, TrajectoryResult};
pub use model::{FomModel, RomModel, TransportModel};
pub use scenario::{DemandProfile, Integrator, Scenario, StepControl, WATTS_TO_GIGAWATTS};
pub use signal::{make_signal, training_signal, Admissibility, InputSignal, SignalKind};

use thiserror::Error;

use crate::hydraulics::HydraulicsError;
use crate::linalg::LinalgError;
use crate::mor::MorError;
use crate::network::NetworkError;
use crate::transport::TransportError;

#[derive(Debug, Error)]
pub enum SimulationError {
    #[error("input signal violates {bound} at t={t}: {value}")]
    Inadmissible { bound: String, t: f64, value: f64 },
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("hydraulics failed at t={t}: {source}")]
    Hydraulics {
        t: f64,
        #[source]
        source: HydraulicsError,
    },
    #[error("CFL number {cfl} > 1 at t={t}")]
    Cfl { t: f64, cfl: f64 },
    #[error("output {output} is {value} at t={t}; densities must stay positive")]
    NonPositiveOutput { t: f64, output: usize, value: f64 },
    #[error("adaptive step rejected at t={t} with dt={dt} (error {error})")]
    StepRejected { t: f64, dt: f64, error: f64 },
    #[error("reduced model has no family for sign pattern {0}")]
    UnknownPattern(String),
    #[error("singular matrix: {0}")]
    Singular(String),
    #[error("reference output {output} has zero norm")]
    ZeroReference { output: String },
    #[error("trajectory is empty")]
    EmptyTrajectory,
    #[error("reference simulation failed: {0}")]
    ReferenceFailed(#[source] Box<SimulationError>),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Mor(#[from] MorError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Format(String),
}
