use std::io::Write;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use super::analysis::time_error;
use super::integrate::{simulate, TrajectoryResult};
use super::model::{FomModel, RomModel, TransportModel};
use super::scenario::{Integrator, Scenario, StepControl};
use super::SimulationError;
use crate::hydraulics::NewtonConfig;
use crate::mor::ReducedModel;
use crate::transport::Discretization;

/// Column names of the benchmark table.
pub const BENCHMARK_HEADER: [&str; 6] = ["model", "resolution", "order", "integrator", "runtime_s", "delta_t"];

/// A model entering the benchmark. `resolution` is the reference cell count
/// the model was discretized (or, for a ROM, reduced) at.
#[derive(Clone, Copy)]
pub enum BenchmarkModel<'a> {
    Fom { disc: &'a Discretization, resolution: usize },
    Rom { model: &'a ReducedModel, disc: &'a Discretization, resolution: usize },
}

impl BenchmarkModel<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            BenchmarkModel::Fom { .. } => "fom",
            BenchmarkModel::Rom { .. } => "rom",
        }
    }

    pub fn resolution(&self) -> usize {
        match self {
            BenchmarkModel::Fom { resolution, .. } | BenchmarkModel::Rom { resolution, .. } => *resolution,
        }
    }

    pub fn order(&self) -> usize {
        match self {
            BenchmarkModel::Fom { disc, .. } => disc.n_cells(),
            BenchmarkModel::Rom { model, .. } => model.order(),
        }
    }

    fn disc(&self) -> &Discretization {
        match self {
            BenchmarkModel::Fom { disc, .. } | BenchmarkModel::Rom { disc, .. } => disc,
        }
    }

    /// One simulation run of this model.
    pub fn run(&self, scenario: &Scenario, newton: &NewtonConfig) -> Result<TrajectoryResult, SimulationError> {
        let disc = self.disc();
        let labels = disc.topology.consumer_labels();
        match self {
            BenchmarkModel::Fom { disc, .. } => {
                let mut m = FomModel::new(disc);
                simulate(&mut m as &mut dyn TransportModel, &disc.basis, scenario, labels, newton)
            }
            BenchmarkModel::Rom { model, disc, .. } => {
                let mut m = RomModel::new((*model).clone(), Some(disc));
                simulate(&mut m as &mut dyn TransportModel, &disc.basis, scenario, labels, newton)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub model: String,
    pub resolution: usize,
    pub order: usize,
    pub integrator: String,
    pub runtime_s: f64,
    pub delta_t: f64,
}

/// Reference trajectory rule: a full order model run with its own step
/// control.
pub struct ReferenceRule<'a> {
    pub disc: &'a Discretization,
    pub step: StepControl,
    pub id: String,
}

/// Step control of `integrator` within `scenario`: the explicit scheme runs at
/// unit CFL, the others at the scenario step.
pub fn step_for(scenario: &Scenario, integrator: Integrator) -> StepControl {
    match integrator {
        Integrator::Euler => StepControl::explicit_cfl(1.0),
        other => StepControl { integrator: other, cfl: None, ..scenario.step },
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Runs every (model, integrator) cell `repetitions` times (at least 3),
/// serially in rounds, and compares against the reference. Rows follow the
/// order of `models` then `integrators`. A failing cell yields a row with NaN
/// entries; a failing reference aborts.
pub fn benchmark(
    models: &[BenchmarkModel<'_>],
    integrators: &[Integrator],
    scenario: &Scenario,
    reference: &ReferenceRule<'_>,
    repetitions: usize,
    newton: &NewtonConfig,
) -> Result<(Vec<BenchmarkRow>, TrajectoryResult), SimulationError> {
    let ref_scenario = Scenario { step: reference.step, ..scenario.clone() };
    let ref_model = BenchmarkModel::Fom { disc: reference.disc, resolution: 0 };
    let ref_traj = ref_model.run(&ref_scenario, newton).map_err(|e| SimulationError::ReferenceFailed(Box::new(e)))?;
    info!(target: "hydronet::benchmark", "reference {} ready ({} cells)", reference.id, reference.disc.n_cells());
    let reps = repetitions.max(3);
    let cells: Vec<(&BenchmarkModel<'_>, Integrator, Scenario)> = models
        .iter()
        .flat_map(|m| {
            integrators.iter().map(move |&i| (m, i, Scenario { step: step_for(scenario, i), ..scenario.clone() }))
        })
        .collect();
    // repetitions run in rounds over all cells, so a slow phase of the
    // machine hits every cell alike instead of one series
    let mut runtimes: Vec<Option<Vec<f64>>> = vec![Some(Vec::with_capacity(reps)); cells.len()];
    let mut deltas = vec![f64::NAN; cells.len()];
    for rep in 0..reps {
        for (k, (m, integrator, sc)) in cells.iter().enumerate() {
            let Some(times) = runtimes[k].as_mut() else { continue };
            match m.run(sc, newton) {
                Ok(traj) => {
                    if rep == 0 {
                        deltas[k] = time_error(&ref_traj, &traj, &reference.id)?.delta_t;
                    }
                    times.push(traj.runtime);
                }
                Err(e) => {
                    warn!(target: "hydronet::benchmark", "{} r={} {}: {e}", m.name(), m.resolution(), integrator.name());
                    runtimes[k] = None;
                }
            }
        }
    }
    let mut rows = Vec::with_capacity(cells.len());
    for (((m, integrator, _), times), delta) in cells.iter().zip(runtimes).zip(deltas) {
        let runtime = times.map_or(f64::NAN, median);
        info!(
            target: "hydronet::benchmark",
            "{} resolution={} order={} {} runtime={runtime:.4}s delta_t={delta:.3e}",
            m.name(),
            m.resolution(),
            m.order(),
            integrator.name()
        );
        rows.push(BenchmarkRow {
            model: m.name().to_string(),
            resolution: m.resolution(),
            order: m.order(),
            integrator: integrator.name().to_string(),
            runtime_s: runtime,
            delta_t: delta,
        });
    }
    Ok((rows, ref_traj))
}

/// Writes rows with the fixed header.
pub fn write_benchmark_csv<W: Write>(rows: &[BenchmarkRow], out: W) -> Result<(), SimulationError> {
    let mut w = csv::Writer::from_writer(out);
    let fmt = |e: csv::Error| SimulationError::Format(e.to_string());
    w.write_record(BENCHMARK_HEADER).map_err(fmt)?;
    for r in rows {
        w.write_record([
            r.model.clone(),
            r.resolution.to_string(),
            r.order.to_string(),
            r.integrator.clone(),
            format!("{:e}", r.runtime_s),
            format!("{:e}", r.delta_t),
        ])
        .map_err(fmt)?;
    }
    w.flush().map_err(|e| SimulationError::Format(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_of_odd_and_even() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn header_is_fixed() {
        let mut buf = Vec::new();
        write_benchmark_csv(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "model,resolution,order,integrator,runtime_s,delta_t\n");
    }
}
