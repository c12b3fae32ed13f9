//! Upwind finite-volume transport of energy density, its affine parameter
//! dependence on the flows, the diagonal energy matrix and the co-energy
//! scaling.

mod discretization;
mod energy;
mod export;
mod operator;

pub use discretization::Discretization;
pub use energy::{
    audit_flows, build_energy_matrix, check_lyapunov, to_coenergy, CoEnergyForm, EnergyMatrix, LyapunovReport,
};
pub use export::write_coo;
pub use operator::{assemble_upwind, AffineOperator, Inflow, SignPattern, Term, TransportOptions, Weight, WeightKind};

use thiserror::Error;

/// Volumetric heat capacity of water `ρ c_p` in J/(m³ K).
pub const VOLUMETRIC_HEAT_CAPACITY: f64 = crate::hydraulics::WATER_DENSITY * 4186.0;
/// Ground temperature used by the optional sink term in °C.
pub const GROUND_TEMPERATURE: f64 = 10.0;

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("edge flows contradict the sign pattern on edges {0:?}")]
    SignMismatch(Vec<String>),
    #[error("all incoming flows are zero: stagnant junction")]
    Stagnation,
    #[error("negative incoming flow {0} at a junction")]
    NegativeInflow(f64),
    #[error("flows violate volume conservation at node {node} (residual {residual:e})")]
    NonConservative { node: String, residual: f64 },
    #[error("negative consumer flow {flow:e} at consumer {consumer}")]
    NegativeConsumerFlow { consumer: String, flow: f64 },
    #[error("sign pattern reverses consumer edge {0}")]
    ReversedConsumer(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Mixed energy density at a junction: the flow-weighted average of the
/// incoming densities.
pub fn junction_mixing(values: &[f64], flows: &[f64]) -> Result<f64, TransportError> {
    if values.len() != flows.len() {
        return Err(TransportError::Dimension(format!("{} values for {} flows", values.len(), flows.len())));
    }
    if let Some(&q) = flows.iter().find(|&&q| q < 0.0) {
        return Err(TransportError::NegativeInflow(q));
    }
    let total: f64 = flows.iter().sum();
    if !(total > 0.0) {
        return Err(TransportError::Stagnation);
    }
    Ok(values.iter().zip(flows).map(|(v, q)| v * q).sum::<f64>() / total)
}
