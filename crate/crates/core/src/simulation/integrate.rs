use std::time::Instant;

use log::{debug, info};
use serde::{Deserialize, Serialize};

use super::model::TransportModel;
use super::scenario::{Integrator, Scenario};
use super::SimulationError;
use crate::hydraulics::{initial_guess, residual, solve_flows, HydraulicState, NewtonConfig};
use crate::network::FlowBasis;

/// Simulated outputs and flows on the accepted time grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryResult {
    /// Consumer ids, one per output.
    pub labels: Vec<String>,
    pub times: Vec<f64>,
    /// `outputs[k]` holds `y(t_k)`.
    pub outputs: Vec<Vec<f64>>,
    /// `flows[k]` holds the independent flows solved at `t_k`.
    pub flows: Vec<Vec<f64>>,
    /// Wall clock time of the stepping loop in s.
    pub runtime: f64,
    pub steps: usize,
    pub rejected: usize,
    /// Sign pattern switches after the initial assembly.
    pub reassemblies: usize,
    /// Largest `‖g‖∞` over the accepted steps.
    pub max_residual: f64,
    pub final_state: Vec<f64>,
}

impl TrajectoryResult {
    pub fn n_outputs(&self) -> usize {
        self.labels.len()
    }

    /// Output `h` over time.
    pub fn channel(&self, h: usize) -> Vec<f64> {
        self.outputs.iter().map(|y| y[h]).collect()
    }
}

/// Scratch vectors of one integration.
struct Work {
    d0: Vec<f64>,
    tmp: Vec<f64>,
    alt: Vec<f64>,
}

impl Work {
    fn new(n: usize) -> Self {
        Work { d0: vec![0.0; n], tmp: vec![0.0; n], alt: vec![0.0; n] }
    }
}

/// Result of one transport step.
struct Advance {
    /// Scaled error estimate of the adaptive scheme (0 otherwise).
    error: f64,
}

fn euler(model: &dyn TransportModel, x: &mut [f64], u0: f64, dt: f64, w: &mut Work) {
    model.derivative(x, u0, &mut w.d0);
    for (xi, d) in x.iter_mut().zip(&w.d0) {
        *xi += dt * d;
    }
}

/// `x⁺` from the trapezoidal rule into `w.tmp`.
fn trapezoidal(
    model: &mut dyn TransportModel,
    x: &[f64],
    u0: f64,
    u1: f64,
    dt: f64,
    w: &mut Work,
) -> Result<(), SimulationError> {
    model.derivative(x, u0, &mut w.d0);
    model.input(u1, &mut w.tmp);
    for i in 0..x.len() {
        w.tmp[i] = x[i] + 0.5 * dt * (w.d0[i] + w.tmp[i]);
    }
    model.solve_shifted(0.5 * dt, &mut w.tmp)
}

/// `x⁺` from backward Euler into `w.alt`.
fn backward_euler(
    model: &mut dyn TransportModel,
    x: &[f64],
    u1: f64,
    dt: f64,
    w: &mut Work,
) -> Result<(), SimulationError> {
    model.input(u1, &mut w.alt);
    for i in 0..x.len() {
        w.alt[i] = x[i] + dt * w.alt[i];
    }
    model.solve_shifted(dt, &mut w.alt)
}

#[allow(clippy::too_many_arguments)]
fn advance(
    model: &mut dyn TransportModel,
    integrator: Integrator,
    x: &mut [f64],
    u0: f64,
    u1: f64,
    dt: f64,
    atol: f64,
    rtol: f64,
    w: &mut Work,
) -> Result<Advance, SimulationError> {
    match integrator {
        Integrator::Euler => {
            euler(model, x, u0, dt, w);
            Ok(Advance { error: 0.0 })
        }
        Integrator::Trapezoidal => {
            trapezoidal(model, x, u0, u1, dt, w)?;
            x.copy_from_slice(&w.tmp);
            Ok(Advance { error: 0.0 })
        }
        Integrator::Adaptive => {
            // trapezoidal step with a backward Euler error estimate
            trapezoidal(model, x, u0, u1, dt, w)?;
            backward_euler(model, x, u1, dt, w)?;
            let error =
                w.tmp.iter().zip(&w.alt).map(|(a, b)| (a - b).abs() / (atol + rtol * a.abs())).fold(0.0, f64::max);
            if error <= 1.0 {
                x.copy_from_slice(&w.tmp);
            }
            Ok(Advance { error })
        }
    }
}

/// Flows at time `t` from the current state: `y = C x`, then the algebraic
/// equations at the demands `u_H(t)`.
fn algebraic(
    model: &dyn TransportModel,
    basis: &FlowBasis,
    scenario: &Scenario,
    x: &[f64],
    q_prev: &[f64],
    t: f64,
    newton: &NewtonConfig,
    y: &mut [f64],
    demand: &mut [f64],
) -> Result<(HydraulicState, f64), SimulationError> {
    model.outputs(x, y);
    if let Some(h) = y.iter().position(|v| !(*v > 0.0)) {
        return Err(SimulationError::NonPositiveOutput { t, output: h, value: y[h] });
    }
    scenario.demands.at(t, demand);
    let state =
        solve_flows(basis, y, demand, q_prev, newton).map_err(|source| SimulationError::Hydraulics { t, source })?;
    let g = residual(basis, &state.q, y, demand).map_err(|source| SimulationError::Hydraulics { t, source })?;
    Ok((state, g.norm_inf()))
}

/// One semi-explicit step: `y = C x`, flows from the algebraic equations
/// (Newton started at `q_prev`), then the linear transport over `dt` with the
/// flows frozen. Returns the flows used for the step and whether the sign
/// pattern switched.
#[allow(clippy::too_many_arguments)]
pub fn step_dae(
    model: &mut dyn TransportModel,
    basis: &FlowBasis,
    scenario: &Scenario,
    x: &mut [f64],
    q_prev: &[f64],
    t: f64,
    dt: f64,
    newton: &NewtonConfig,
) -> Result<(HydraulicState, bool), SimulationError> {
    let mut y = vec![0.0; model.n_outputs()];
    let mut demand = vec![0.0; basis.n_consumers()];
    let (state, _) = algebraic(&*model, basis, scenario, x, q_prev, t, newton, &mut y, &mut demand)?;
    let switched = model.set_flows(&state.q, &state.edge_flows)?;
    let integrator = scenario.step.integrator;
    if integrator == Integrator::Euler {
        check_cfl(&*model, dt, t)?;
    }
    let mut w = Work::new(x.len());
    let (u0, u1) = (scenario.signal.value(t), scenario.signal.value(t + dt));
    let step = advance(model, integrator, x, u0, u1, dt, scenario.step.atol, scenario.step.rtol, &mut w)?;
    if step.error > 1.0 {
        return Err(SimulationError::StepRejected { t, dt, error: step.error });
    }
    Ok((state, switched))
}

fn check_cfl(model: &dyn TransportModel, dt: f64, t: f64) -> Result<(), SimulationError> {
    let cfl = dt * model.max_rate();
    if cfl > 1.0 + 1e-12 {
        return Err(SimulationError::Cfl { t, cfl });
    }
    Ok(())
}

/// Integrates the coupled DAE from the equilibrium `φ = u_T(0)` over the
/// scenario horizon. Runtime covers the stepping loop only.
pub fn simulate(
    model: &mut dyn TransportModel,
    basis: &FlowBasis,
    scenario: &Scenario,
    labels: Vec<String>,
    newton: &NewtonConfig,
) -> Result<TrajectoryResult, SimulationError> {
    let ctl = scenario.step;
    let u_start = scenario.signal.value(0.0);
    let mut x = model.equilibrium(u_start);
    let mut y = vec![0.0; model.n_outputs()];
    let mut demand = vec![0.0; basis.n_consumers()];
    scenario.demands.at(0.0, &mut demand);
    let q_start = initial_guess(basis, &demand, u_start);
    let mut w = Work::new(x.len());

    let mut out = TrajectoryResult {
        labels,
        times: Vec::new(),
        outputs: Vec::new(),
        flows: Vec::new(),
        runtime: 0.0,
        steps: 0,
        rejected: 0,
        reassemblies: 0,
        max_residual: 0.0,
        final_state: Vec::new(),
    };

    // initial flows and operator assembly happen before the clock starts
    let (mut state, res) = algebraic(&*model, basis, scenario, &x, &q_start, 0.0, newton, &mut y, &mut demand)?;
    model.set_flows(&state.q, &state.edge_flows)?;
    out.max_residual = res;
    let clock = Instant::now();
    let mut t = 0.0;
    let mut dt = ctl.dt.min(scenario.horizon.max(f64::MIN_POSITIVE));
    let mut fixed_steps = 0usize;
    loop {
        out.times.push(t);
        out.outputs.push(y.clone());
        out.flows.push(state.q.clone());
        let remaining = scenario.horizon - t;
        if remaining <= 1e-9 * scenario.horizon.max(1.0) {
            break;
        }
        let step_dt = match ctl.integrator {
            Integrator::Euler if ctl.cfl.is_some() => (ctl.cfl.unwrap() / model.max_rate()).min(ctl.dt).min(remaining),
            Integrator::Adaptive => dt.min(remaining),
            _ => {
                // fixed grid t_k = k dt, clipped at the horizon
                ((fixed_steps + 1) as f64 * ctl.dt).min(scenario.horizon) - t
            }
        };
        if ctl.integrator == Integrator::Euler {
            check_cfl(&*model, step_dt, t)?;
        }
        let (u0, u1) = (scenario.signal.value(t), scenario.signal.value(t + step_dt));
        let step = advance(model, ctl.integrator, &mut x, u0, u1, step_dt, ctl.atol, ctl.rtol, &mut w)?;
        if ctl.integrator == Integrator::Adaptive {
            let factor = if step.error > 0.0 { 0.9 * step.error.powf(-0.5) } else { 5.0 };
            dt = step_dt * factor.clamp(0.2, 5.0);
            if step.error > 1.0 {
                out.rejected += 1;
                if dt < 1e-12 * scenario.horizon.max(1.0) {
                    return Err(SimulationError::StepRejected { t, dt, error: step.error });
                }
                continue;
            }
        }
        fixed_steps += 1;
        out.steps += 1;
        t = if ctl.integrator == Integrator::Trapezoidal || (ctl.integrator == Integrator::Euler && ctl.cfl.is_none()) {
            (fixed_steps as f64 * ctl.dt).min(scenario.horizon)
        } else {
            t + step_dt
        };
        let (next, res) = algebraic(&*model, basis, scenario, &x, &state.q, t, newton, &mut y, &mut demand)?;
        state = next;
        out.max_residual = out.max_residual.max(res);
        if model.set_flows(&state.q, &state.edge_flows)? {
            out.reassemblies += 1;
            debug!(target: "hydronet::simulation", "operator reassembled at t={t}");
        }
    }
    out.runtime = clock.elapsed().as_secs_f64();
    out.final_state = x;
    info!(
        target: "hydronet::simulation",
        "{} n={} steps={} rejected={} switches={} runtime={:.3}s",
        model.kind(),
        model.n_states(),
        out.steps,
        out.rejected,
        out.reassemblies,
        out.runtime
    );
    Ok(out)
}
