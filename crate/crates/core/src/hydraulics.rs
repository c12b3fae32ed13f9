//! Algebraic part of the network DAE: Darcy-Weisbach friction around the
//! fundamental cycles and the consumer power balance `q_h y_h = u_H,h`.

use log::debug;
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::network::{FlowBasis, PipeEdge};

pub const WATER_DENSITY: f64 = 1000.0;
pub const GRAVITY: f64 = 9.81;

/// Relative lower bound on `|v|` inside the loop Jacobian.
const JACOBIAN_VELOCITY_FLOOR: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum HydraulicsError {
    #[error("energy density at consumer {consumer} is {value}, must stay positive")]
    NonPositiveDensity { consumer: usize, value: f64 },
    #[error("demand of consumer {consumer} is {value}, must be positive")]
    NonPositiveDemand { consumer: usize, value: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("Newton solver did not converge after {iterations} iterations (|g| = {residual:e})")]
    NonConvergence { iterations: usize, residual: f64, trace: Vec<NewtonTrace> },
    #[error("singular Jacobian in Newton iteration {iteration}")]
    SingularJacobian { iteration: usize, trace: Vec<NewtonTrace> },
}

/// One Newton iteration record.
#[derive(Clone, Debug, PartialEq)]
pub struct NewtonTrace {
    pub iteration: usize,
    pub residual: f64,
    pub damping: f64,
}

#[derive(Clone, Debug)]
pub struct NewtonConfig {
    /// Tolerance on `‖g‖∞`.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Maximum number of step halvings in the Armijo line search.
    pub max_halvings: usize,
    /// Lower clamp for consumer flows in m³/s.
    pub min_consumer_flow: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig { tolerance: 1e-10, max_iterations: 50, max_halvings: 10, min_consumer_flow: 1e-9 }
    }
}

/// Solution of the algebraic equations.
#[derive(Clone, Debug, PartialEq)]
pub struct HydraulicState {
    /// Independent volume flows, consumers first.
    pub q: Vec<f64>,
    /// Edge velocities `v = K q`.
    pub v: Vec<f64>,
    /// Edge volume flows `Φ_i v_i`.
    pub edge_flows: Vec<f64>,
    pub iterations: usize,
}

/// Stacked residual `g = [loop residuals; consumer residuals]`.
#[derive(Clone, Debug, PartialEq)]
pub struct AlgebraicResidual {
    pub loops: Vec<f64>,
    pub consumers: Vec<f64>,
}

impl AlgebraicResidual {
    pub fn stacked(&self) -> Vec<f64> {
        self.loops.iter().chain(&self.consumers).copied().collect()
    }

    pub fn norm_inf(&self) -> f64 {
        self.loops.iter().chain(&self.consumers).fold(0.0, |m, r| m.max(r.abs()))
    }
}

/// Friction coefficient `λ ρ L / (2 d)` multiplying `|v| v`.
pub fn friction_coefficient(edge: &PipeEdge) -> f64 {
    edge.friction * WATER_DENSITY * edge.length / (2.0 * edge.diameter)
}

/// Pressure drop over a pipe at velocity `v` in Pa.
pub fn pressure_drop(edge: &PipeEdge, v: f64) -> f64 {
    friction_coefficient(edge) * v.abs() * v + WATER_DENSITY * GRAVITY * edge.height_delta
}

/// Signed friction pressure sums around each fundamental cycle.
pub fn loop_residual(basis: &FlowBasis, q: &[f64]) -> Vec<f64> {
    let v = basis.velocities(q);
    loop_residual_from_velocities(basis, &v)
}

fn loop_residual_from_velocities(basis: &FlowBasis, v: &[f64]) -> Vec<f64> {
    basis
        .cycles
        .iter()
        .enumerate()
        .map(|(l, cyc)| cyc.edges.iter().map(|&(e, _)| basis.loop_matrix[(l, e)] * v[e] * v[e].abs()).sum())
        .collect()
}

/// `q_h y_h - u_H,h` for every consumer, with `q_h` the consumer edge flow.
pub fn consumer_residual(basis: &FlowBasis, q: &[f64], y: &[f64], demand: &[f64]) -> Result<Vec<f64>, HydraulicsError> {
    let h = basis.n_consumers();
    if y.len() != h || demand.len() != h || q.len() != basis.n_flows() {
        return Err(HydraulicsError::Dimension(format!(
            "q: {}, y: {}, demand: {}, expected L={} and H={h}",
            q.len(),
            y.len(),
            demand.len(),
            basis.n_flows()
        )));
    }
    check_densities(y)?;
    let flows = basis.edge_flows(q);
    Ok((0..h).map(|c| flows[basis.consumer_edges[c]] * y[c] - demand[c]).collect())
}

pub fn residual(basis: &FlowBasis, q: &[f64], y: &[f64], demand: &[f64]) -> Result<AlgebraicResidual, HydraulicsError> {
    Ok(AlgebraicResidual { consumers: consumer_residual(basis, q, y, demand)?, loops: loop_residual(basis, q) })
}

fn check_densities(y: &[f64]) -> Result<(), HydraulicsError> {
    match y.iter().position(|&v| !(v > 0.0)) {
        Some(c) => Err(HydraulicsError::NonPositiveDensity { consumer: c, value: y[c] }),
        None => Ok(()),
    }
}

/// Solves `g(q, y, u_H) = 0` by damped Newton.
///
/// Consumer rows of the Jacobian are `diag(y)` and decoupled from the loop
/// flows, so they are solved exactly first; the iteration then runs on the
/// loop flows with Jacobian `2 G diag(|v|) K` and Armijo backtracking.
pub fn solve_flows(
    basis: &FlowBasis,
    y: &[f64],
    demand: &[f64],
    q0: &[f64],
    cfg: &NewtonConfig,
) -> Result<HydraulicState, HydraulicsError> {
    let h = basis.n_consumers();
    let n_loops = basis.n_loops();
    if y.len() != h || demand.len() != h || q0.len() != basis.n_flows() {
        return Err(HydraulicsError::Dimension(format!("q0: {}, y: {}, demand: {}", q0.len(), y.len(), demand.len())));
    }
    check_densities(y)?;
    if let Some(c) = demand.iter().position(|&u| !(u > 0.0)) {
        return Err(HydraulicsError::NonPositiveDemand { consumer: c, value: demand[c] });
    }

    let mut q = q0.to_vec();
    for c in 0..h {
        q[c] = (demand[c] / y[c]).max(cfg.min_consumer_flow);
    }
    let consumer_norm = (0..h).fold(0.0f64, |m, c| m.max((q[c] * y[c] - demand[c]).abs()));

    let mut trace = Vec::new();
    let mut v = basis.velocities(&q);
    let mut r = loop_residual_from_velocities(basis, &v);
    let norm = |r: &[f64]| r.iter().fold(consumer_norm, |m, x| m.max(x.abs()));
    let l2 = |r: &[f64]| r.iter().map(|x| x * x).sum::<f64>().sqrt();

    let mut iteration = 0;
    loop {
        let res = norm(&r);
        if res <= cfg.tolerance {
            let edge_flows = basis.edge_flows(&q);
            return Ok(HydraulicState { q, v, edge_flows, iterations: iteration });
        }
        if iteration >= cfg.max_iterations {
            return Err(HydraulicsError::NonConvergence { iterations: iteration, residual: res, trace });
        }
        iteration += 1;

        // edges at rest would zero the derivative of v|v|; a velocity floor
        // keeps the Jacobian regular without touching the residual
        let floor = JACOBIAN_VELOCITY_FLOOR * v.iter().fold(1e-6f64, |m, x| m.max(x.abs()));
        let mut jac = DMatrix::zeros(n_loops, n_loops);
        for (l, cyc) in basis.cycles.iter().enumerate() {
            for &(e, _) in &cyc.edges {
                let w = 2.0 * basis.loop_matrix[(l, e)] * v[e].abs().max(floor);
                if w == 0.0 {
                    continue;
                }
                for &(j, s) in &basis.rows[e] {
                    if j >= h {
                        jac[(l, j - h)] += w * s / basis.cross_sections()[e];
                    }
                }
            }
        }
        let rhs = -DVector::from_column_slice(&r);
        let step = match jac.lu().solve(&rhs) {
            Some(s) if s.iter().all(|x| x.is_finite()) => s,
            _ => {
                trace.push(NewtonTrace { iteration, residual: res, damping: 0.0 });
                return Err(HydraulicsError::SingularJacobian { iteration, trace });
            }
        };

        let base = l2(&r);
        let mut alpha = 1.0;
        let mut trial = q.clone();
        let mut halvings = 0;
        loop {
            for m in 0..n_loops {
                trial[h + m] = q[h + m] + alpha * step[m];
            }
            let tv = basis.velocities(&trial);
            let tr = loop_residual_from_velocities(basis, &tv);
            if l2(&tr) <= (1.0 - 1e-4 * alpha) * base || halvings >= cfg.max_halvings {
                q.copy_from_slice(&trial);
                v = tv;
                r = tr;
                break;
            }
            alpha *= 0.5;
            halvings += 1;
        }
        debug!(target: "hydronet::hydraulics", "iteration={iteration} residual={res:e} damping={alpha}");
        trace.push(NewtonTrace { iteration, residual: res, damping: alpha });
    }
}

/// Initial guess for the first time step: consumer flows `u_H / u_T(0)` and
/// zero loop corrections.
pub fn initial_guess(basis: &FlowBasis, demand: &[f64], supply_density: f64) -> Vec<f64> {
    let mut q = vec![0.0; basis.n_flows()];
    for (c, u) in demand.iter().enumerate() {
        q[c] = u / supply_density;
    }
    q
}
