//! Thermo-hydraulic simulation of district heating pipe networks and
//! construction of stable reduced-order surrogates.
//!
//! The crate is organised bottom-up:
//!
//! * [`network`]: topology, independent-flow basis, cell distribution and
//!   network decomposition.
//! * [`hydraulics`]: the algebraic flow equations (friction loops and consumer
//!   power balance) and their damped Newton solver.
//! * [`transport`]: the upwind finite-volume operator family `A(q), B(q), C`,
//!   the diagonal energy matrix and the co-energy transformation.
//! * [`mor`]: transfer functions, weighted H2 errors, weighted IRKA, SVD
//!   combination, frequency greedy and the reduced model containers.
//! * [`simulation`]: input signals, DAE time stepping, time-domain errors and
//!   runtime benchmarks.
//! * [`cli`]: the `hydronet` command line front end.

pub mod cli;
pub mod error;
pub mod hydraulics;
pub mod linalg;
pub mod mor;
pub mod network;
pub mod simulation;
pub mod transport;

pub use error::{Error, Result};
