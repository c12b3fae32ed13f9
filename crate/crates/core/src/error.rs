use thiserror::Error;

use crate::hydraulics::HydraulicsError;
use crate::linalg::LinalgError;
use crate::mor::MorError;
use crate::network::NetworkError;
use crate::simulation::SimulationError;
use crate::transport::TransportError;

/// Crate-level error wrapping the module errors.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Hydraulics(#[from] HydraulicsError),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Mor(#[from] MorError),
    #[error(transparent)]
    Simulation(#[from] SimulationError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Format(String),
}

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io { path: path.as_ref().display().to_string(), source }
    }

    /// True for errors caused by unreadable or missing input files.
    pub fn is_io(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::Network(NetworkError::Io { .. })
                | Error::Mor(MorError::Io { .. })
                | Error::Simulation(SimulationError::Io { .. })
                | Error::Simulation(SimulationError::Network(NetworkError::Io { .. }))
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
