use serde::{Deserialize, Serialize};

use super::integrate::TrajectoryResult;
use super::SimulationError;
use crate::hydraulics::{initial_guess, solve_flows, NewtonConfig};
use crate::network::{distribute_cells, CellGrid, FlowBasis, NetworkTopology};

/// Relative time-domain errors of a test trajectory against a reference.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    /// `‖y_h − y_hʳ‖₂ / ‖y_h‖₂` per output.
    pub per_output: Vec<f64>,
    /// `Δᵗ`, the maximum over outputs.
    pub delta_t: f64,
    pub reference: String,
}

/// Linear interpolation of `values` given at increasing `times` onto `t`.
fn interpolate(times: &[f64], values: &[Vec<f64>], t: f64, h: usize) -> f64 {
    let k = times.partition_point(|&s| s <= t);
    if k == 0 {
        return values[0][h];
    }
    if k == times.len() {
        return values[k - 1][h];
    }
    let (t0, t1) = (times[k - 1], times[k]);
    let s = (t - t0) / (t1 - t0);
    (1.0 - s) * values[k - 1][h] + s * values[k][h]
}

/// `Δᵗ = max_h ‖y_h − y_hʳ‖₂ / ‖y_h‖₂` with the test outputs linearly
/// interpolated onto the reference time grid.
pub fn time_error(
    reference: &TrajectoryResult,
    test: &TrajectoryResult,
    reference_id: &str,
) -> Result<ErrorReport, SimulationError> {
    if reference.times.is_empty() || test.times.is_empty() {
        return Err(SimulationError::EmptyTrajectory);
    }
    if reference.n_outputs() != test.n_outputs() {
        return Err(SimulationError::InvalidScenario(format!(
            "{} reference outputs but {} test outputs",
            reference.n_outputs(),
            test.n_outputs()
        )));
    }
    let mut per_output = Vec::with_capacity(reference.n_outputs());
    for h in 0..reference.n_outputs() {
        let (mut num, mut den) = (0.0, 0.0);
        for (t, y) in reference.times.iter().zip(&reference.outputs) {
            let d = y[h] - interpolate(&test.times, &test.outputs, *t, h);
            num += d * d;
            den += y[h] * y[h];
        }
        if !(den > 0.0) {
            return Err(SimulationError::ZeroReference { output: reference.labels[h].clone() });
        }
        per_output.push((num / den).sqrt());
    }
    let delta_t = per_output.iter().copied().fold(0.0, f64::max);
    Ok(ErrorReport { per_output, delta_t, reference: reference_id.to_string() })
}

/// `count` flow vectors sampled uniformly over the accepted steps, with
/// near-duplicates (relative distance ≤ 1e-3) removed.
pub fn collect_snapshots(trajectory: &TrajectoryResult, count: usize) -> Vec<Vec<f64>> {
    let flows = &trajectory.flows;
    if flows.is_empty() || count == 0 {
        return Vec::new();
    }
    let last = flows.len() - 1;
    let picks: Vec<usize> = if count == 1 {
        vec![0]
    } else {
        (0..count).map(|k| ((k * last) as f64 / (count - 1) as f64).round() as usize).collect()
    };
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut kept: Vec<Vec<f64>> = Vec::new();
    for i in picks {
        let q = &flows[i];
        let duplicate = kept.iter().any(|p| {
            let d: Vec<f64> = q.iter().zip(p).map(|(a, b)| a - b).collect();
            norm(&d) <= 1e-3 * norm(p)
        });
        if !duplicate {
            kept.push(q.clone());
        }
    }
    kept
}

/// Steady edge velocities with every consumer receiving density `phi` at
/// constant demands (W). Zero velocities are floored at `10⁻³` times the
/// largest one so that they can serve as cell distribution reference.
pub fn reference_velocities(basis: &FlowBasis, demands_w: &[f64], phi: f64) -> Result<Vec<f64>, SimulationError> {
    let demand: Vec<f64> = demands_w.iter().map(|w| w * super::WATTS_TO_GIGAWATTS).collect();
    let y = vec![phi; demand.len()];
    let q0 = initial_guess(basis, &demand, phi);
    let state = solve_flows(basis, &y, &demand, &q0, &NewtonConfig::default())
        .map_err(|source| SimulationError::Hydraulics { t: 0.0, source })?;
    let vmax = state.v.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(state.v.iter().map(|v| v.abs().max(1e-3 * vmax)).collect())
}

/// Cell grid with `reference_cells` cells on the reference edge and CFL
/// synchronized counts elsewhere, based on steady flows at density `phi`.
pub fn reference_grid(
    topology: &NetworkTopology,
    basis: &FlowBasis,
    demands_w: &[f64],
    phi: f64,
    reference_cells: usize,
    min_cells: usize,
) -> Result<CellGrid, SimulationError> {
    let v = reference_velocities(basis, demands_w, phi)?;
    Ok(distribute_cells(topology, reference_cells, min_cells, &v)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn trajectory(times: Vec<f64>, outputs: Vec<Vec<f64>>) -> TrajectoryResult {
        let h = outputs[0].len();
        TrajectoryResult {
            labels: (0..h).map(|i| format!("h{i}")).collect(),
            flows: outputs.clone(),
            times,
            outputs,
            runtime: 0.0,
            steps: 0,
            rejected: 0,
            reassemblies: 0,
            max_residual: 0.0,
            final_state: Vec::new(),
        }
    }

    #[test]
    fn identical_trajectories_have_zero_error() {
        let x = trajectory(vec![0.0, 1.0, 2.0], vec![vec![1.0, 2.0], vec![2.0, 3.0], vec![1.5, 1.0]]);
        assert_eq!(time_error(&x, &x, "x").unwrap().delta_t, 0.0);
    }

    #[test]
    fn scaled_channel_gives_epsilon() {
        let x = trajectory(vec![0.0, 1.0, 2.0], vec![vec![1.0, 2.0], vec![2.0, 3.0], vec![1.5, 1.0]]);
        let mut y = x.clone();
        for o in &mut y.outputs {
            o[1] *= 1.0 + 1e-3;
        }
        let r = time_error(&x, &y, "x").unwrap();
        assert!((r.delta_t - 1e-3).abs() < 1e-15);
        assert_eq!(r.per_output[0], 0.0);
    }

    #[test]
    fn test_grid_is_interpolated() {
        let reference = trajectory(vec![0.0, 0.5, 1.0], vec![vec![1.0], vec![1.5], vec![2.0]]);
        let coarse = trajectory(vec![0.0, 1.0], vec![vec![1.0], vec![2.0]]);
        assert!(time_error(&reference, &coarse, "r").unwrap().delta_t < 1e-15);
    }

    #[test]
    fn zero_reference_is_an_error() {
        let x = trajectory(vec![0.0, 1.0], vec![vec![0.0], vec![0.0]]);
        assert!(matches!(time_error(&x, &x, "x"), Err(SimulationError::ZeroReference { .. })));
    }

    #[test]
    fn snapshots_deduplicate() {
        let x = trajectory(vec![0.0, 1.0, 2.0, 3.0], vec![vec![1.0]; 4]);
        assert_eq!(collect_snapshots(&x, 4).len(), 1);
        let y = trajectory(vec![0.0, 1.0, 2.0, 3.0], vec![vec![1.0], vec![2.0], vec![3.0], vec![4.0]]);
        assert_eq!(collect_snapshots(&y, 4), y.flows);
        assert_eq!(collect_snapshots(&y, 2), vec![vec![1.0], vec![4.0]]);
    }
}
