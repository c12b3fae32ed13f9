use std::path::PathBuf;

use hydronet::cli::{self, Command, Fixture, RunConfig};
use hydronet::simulation::{make_signal, SignalKind};
use hydronet::Error;
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn to_py(e: Error) -> PyErr {
    if e.is_io() {
        PyIOError::new_err(e.to_string())
    } else if matches!(e, Error::Format(_)) {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

fn fixture(name: &str) -> PyResult<Fixture> {
    match name {
        "street" => Ok(Fixture::Street),
        "district" => Ok(Fixture::District),
        "random" => Ok(Fixture::Random),
        "pipe" => Ok(Fixture::Pipe),
        other => Err(PyValueError::new_err(format!("unknown fixture '{other}'"))),
    }
}

/// Simulated outputs on the accepted time grid.
#[pyclass(frozen, get_all)]
struct Trajectory {
    labels: Vec<String>,
    times: Vec<f64>,
    /// One row per time, one column per consumer.
    outputs: Vec<Vec<f64>>,
    runtime: f64,
    steps: usize,
    csv: String,
}

#[pymethods]
impl Trajectory {
    fn __len__(&self) -> usize {
        self.times.len()
    }

    fn __repr__(&self) -> String {
        format!("Trajectory(outputs={}, steps={}, runtime={:.3}s)", self.labels.len(), self.steps, self.runtime)
    }
}

/// Result of a reduction.
#[pyclass(frozen, get_all)]
struct Reduction {
    order: usize,
    delta: f64,
    errors: Vec<f64>,
    rom_path: String,
    scatter_path: String,
}

#[pymethods]
impl Reduction {
    fn __repr__(&self) -> String {
        format!("Reduction(order={}, delta={:e})", self.order, self.delta)
    }
}

/// Writes a synthetic network and scenario files into `out`.
#[pyfunction]
#[pyo3(signature = (out, fixture_name="street", seed=7))]
fn generate(py: Python<'_>, out: PathBuf, fixture_name: &str, seed: u64) -> PyResult<Vec<String>> {
    let mut cfg = RunConfig::new(Command::Generate, out);
    cfg.fixture = fixture(fixture_name)?;
    cfg.seed = seed;
    let paths = py.detach(|| cli::cmd_generate(&cfg)).map_err(to_py)?;
    Ok(paths.iter().map(|p| p.display().to_string()).collect())
}

/// Simulates a scenario with the full order model, or with a reduced model
/// file if `rom` is given.
#[pyfunction]
#[pyo3(signature = (network, scenario, out, cells=16, rom=None))]
fn simulate(
    py: Python<'_>,
    network: PathBuf,
    scenario: PathBuf,
    out: PathBuf,
    cells: usize,
    rom: Option<PathBuf>,
) -> PyResult<Trajectory> {
    let mut cfg = RunConfig::new(Command::Simulate, out);
    cfg.network = Some(network);
    cfg.scenario = Some(scenario);
    cfg.cells = cells;
    cfg.rom = rom;
    cfg.validate().map_err(to_py)?;
    let o = py.detach(|| cli::cmd_simulate(&cfg)).map_err(to_py)?;
    let t = o.trajectory;
    Ok(Trajectory {
        labels: t.labels,
        times: t.times,
        outputs: t.outputs,
        runtime: t.runtime,
        steps: t.steps,
        csv: o.csv.display().to_string(),
    })
}

/// Builds a reduced model from a training run and writes `rom.json`.
#[pyfunction]
#[pyo3(signature = (network, out, scenario=None, cells=16, global_bound=1e-2, local_bound=5e-3, svd_decay=8.0))]
#[allow(clippy::too_many_arguments)]
fn reduce(
    py: Python<'_>,
    network: PathBuf,
    out: PathBuf,
    scenario: Option<PathBuf>,
    cells: usize,
    global_bound: f64,
    local_bound: f64,
    svd_decay: f64,
) -> PyResult<Reduction> {
    let mut cfg = RunConfig::new(Command::Reduce, out);
    cfg.network = Some(network);
    cfg.scenario = scenario;
    cfg.cells = cells;
    cfg.global_bound = global_bound;
    cfg.local_bound = local_bound;
    cfg.svd_decay = svd_decay;
    cfg.validate().map_err(to_py)?;
    let o = py.detach(|| cli::cmd_reduce(&cfg)).map_err(to_py)?;
    Ok(Reduction {
        order: o.rom.model.order(),
        delta: o.rom.delta,
        errors: o.rom.errors,
        rom_path: o.rom_path.display().to_string(),
        scatter_path: o.scatter_path.display().to_string(),
    })
}

/// Largest `λ_max(QA + AᵀQ)` over random conservative flows and whether the
/// stability check passed.
#[pyfunction]
#[pyo3(signature = (network, out, cells=4, samples=100, seed=7))]
fn verify(
    py: Python<'_>,
    network: PathBuf,
    out: PathBuf,
    cells: usize,
    samples: usize,
    seed: u64,
) -> PyResult<(f64, bool)> {
    let mut cfg = RunConfig::new(Command::Verify, out);
    cfg.network = Some(network);
    cfg.cells = cells;
    cfg.samples = samples;
    cfg.seed = seed;
    cfg.validate().map_err(to_py)?;
    let r = py.detach(|| cli::cmd_verify(&cfg)).map_err(to_py)?;
    Ok((r.max_lambda, r.passed))
}

/// Value of the in-sample or out-of-sample reference signal at `t` seconds.
#[pyfunction]
fn signal_value(kind: &str, t: f64) -> PyResult<f64> {
    let kind = match kind {
        "in_sample" => SignalKind::InSample,
        "out_of_sample" => SignalKind::OutOfSample,
        other => return Err(PyValueError::new_err(format!("unknown signal '{other}'"))),
    };
    let s = make_signal(kind).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(s.value(t))
}

/// Runs the command line front end with `args` (without the program name)
/// and returns its exit code.
#[pyfunction]
fn run_cli(py: Python<'_>, args: Vec<String>) -> i32 {
    let argv: Vec<String> = std::iter::once("hydronet".to_string()).chain(args).collect();
    py.detach(|| cli::run(argv))
}

#[pymodule]
fn hydronet_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Trajectory>()?;
    m.add_class::<Reduction>()?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(reduce, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    m.add_function(wrap_pyfunction!(signal_value, m)?)?;
    m.add_function(wrap_pyfunction!(run_cli, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
