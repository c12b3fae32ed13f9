//! `hydronet` command line front end: simulation, reduction, verification,
//! benchmarks and fixture generation, each writing a reproducibility manifest
//! next to its outputs.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use log::{info, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::hydraulics::NewtonConfig;
use crate::mor::{frequency_greedy, FrequencyWindow, GreedyConfig, GreedyResult, IrkaConfig, ReducedModel, RomFile};
use crate::network::{fixtures, parse_network, CellGrid, NetworkTopology};
use crate::simulation::{
    benchmark, collect_snapshots, make_signal, reference_grid, simulate, training_signal, write_benchmark_csv,
    Admissibility, BenchmarkModel, BenchmarkRow, DemandProfile, FomModel, Integrator, ReferenceRule, RomModel,
    Scenario, SignalKind, StepControl, TrajectoryResult, TransportModel,
};
use crate::transport::{check_lyapunov, Discretization, SignPattern, TransportOptions};

/// Density (GJ/m³) of the steady state used to distribute cells.
pub const GRID_DENSITY: f64 = 0.4;
/// Demand range (W) of the generated consumers.
pub const DEMAND_RANGE: (f64, f64) = (8_000.0, 12_000.0);
/// Harmonics of the default training signal.
pub const TRAINING_HARMONICS: usize = 1;
/// Step (s) of the generated evaluation scenarios and the benchmark default,
/// about 700 steps per period of the signals.
pub const EVALUATION_DT: f64 = 20.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Simulate,
    Reduce,
    Verify,
    Benchmark,
    Generate,
}

/// Synthetic networks for `generate`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Fixture {
    /// 32 houses on a main line with one loop.
    Street,
    /// Main street with three side streets.
    District,
    /// Random tree with up to 50 edges and 3 loops.
    Random,
    /// One pipe feeding one house.
    Pipe,
}

/// Everything a run depends on. Echoed into the manifest.
#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub network: Option<PathBuf>,
    pub scenario: Option<PathBuf>,
    /// Reduced model used by `simulate` and `benchmark` instead of building one.
    pub rom: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: u64,
    /// Local bound `δ̄` of the interpolation spaces.
    pub local_bound: f64,
    /// Global bound `Δ̄` of the greedy.
    pub global_bound: f64,
    pub svd_decay: f64,
    pub irka_iters: usize,
    /// Upper end of the frequency window in Hz (default `10 ω̂`).
    pub window_hz: Option<f64>,
    /// Cells on the reference edge (per edge for `verify`).
    pub cells: usize,
    pub resolutions: Vec<usize>,
    pub integrators: Vec<Integrator>,
    pub snapshots: usize,
    /// Random flows drawn by `verify`.
    pub samples: usize,
    pub repetitions: usize,
    pub fixture: Fixture,
}

impl RunConfig {
    pub fn new(command: Command, out: impl Into<PathBuf>) -> Self {
        RunConfig {
            command,
            network: None,
            scenario: None,
            rom: None,
            out: out.into(),
            seed: 7,
            local_bound: IrkaConfig::default().local_bound,
            global_bound: GreedyConfig::default().global_bound,
            svd_decay: GreedyConfig::default().svd_decay,
            irka_iters: IrkaConfig::default().max_sweeps,
            window_hz: None,
            cells: 16,
            resolutions: vec![8, 16, 32, 64],
            integrators: vec![Integrator::Trapezoidal, Integrator::Euler],
            snapshots: 32,
            samples: 100,
            repetitions: 3,
            fixture: Fixture::Street,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Format(format!("invalid configuration: {what}")));
        if !(self.local_bound > 0.0) {
            return bad("--delta-bar must be positive");
        }
        if !(self.global_bound > 0.0) {
            return bad("--Delta-bar must be positive");
        }
        if !(self.svd_decay > 0.0 && self.svd_decay.is_finite()) {
            return bad("--svd-decay must be positive");
        }
        if self.irka_iters == 0 || self.cells == 0 || self.snapshots == 0 || self.samples == 0 {
            return bad("--irka-iters, --cells, --snapshots and --samples must be at least 1");
        }
        if let Some(w) = self.window_hz {
            if !(w > 0.0 && w.is_finite()) {
                return bad("--window-hz must be positive");
            }
        }
        if self.command == Command::Benchmark && (self.resolutions.is_empty() || self.integrators.is_empty()) {
            return bad("benchmark needs at least one resolution and one integrator");
        }
        if self.resolutions.contains(&0) {
            return bad("resolutions must be positive");
        }
        Ok(())
    }

    fn greedy(&self) -> GreedyConfig {
        let mut g = GreedyConfig { global_bound: self.global_bound, svd_decay: self.svd_decay, ..Default::default() };
        g.irka.local_bound = self.local_bound;
        g.irka.max_sweeps = self.irka_iters;
        g
    }

    fn window(&self, bounds: &Admissibility) -> Result<FrequencyWindow> {
        let high = match self.window_hz {
            Some(hz) => 2.0 * std::f64::consts::PI * hz,
            None => 10.0 * bounds.max_frequency,
        };
        Ok(FrequencyWindow::new(0.0, high)?)
    }

    fn network_path(&self) -> Result<&Path> {
        self.network.as_deref().ok_or_else(|| Error::Format("--network is required".into()))
    }
}

#[derive(Parser, Debug)]
#[command(name = "hydronet", version, about = "District heating network simulation and reduced-order surrogates")]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// Network JSON file.
    #[arg(long)]
    network: Option<PathBuf>,
    /// Scenario JSON file.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Reduced model file (simulate, benchmark).
    #[arg(long)]
    rom: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Local error bound of the interpolation spaces.
    #[arg(long = "delta-bar")]
    delta_bar: Option<f64>,
    /// Global error bound of the greedy (`inf` accepts the first space).
    #[arg(long = "Delta-bar")]
    global_bar: Option<f64>,
    #[arg(long = "svd-decay")]
    svd_decay: Option<f64>,
    #[arg(long = "irka-iters")]
    irka_iters: Option<usize>,
    /// Upper end of the frequency window in Hz.
    #[arg(long = "window-hz")]
    window_hz: Option<f64>,
    /// Cells on the reference edge.
    #[arg(long)]
    cells: Option<usize>,
    /// Comma separated reference cell counts for the benchmark.
    #[arg(long, value_delimiter = ',')]
    resolutions: Option<Vec<usize>>,
    /// Comma separated integrators: euler, trapezoidal, adaptive.
    #[arg(long, value_delimiter = ',')]
    integrators: Option<Vec<String>>,
    #[arg(long)]
    snapshots: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    repetitions: Option<usize>,
    #[arg(long, value_enum)]
    fixture: Option<Fixture>,
}

impl Cli {
    fn into_config(self) -> Result<RunConfig> {
        let mut c = RunConfig::new(self.command, self.out);
        c.network = self.network;
        c.scenario = self.scenario;
        c.rom = self.rom;
        c.seed = self.seed;
        c.window_hz = self.window_hz;
        if let Some(v) = self.delta_bar {
            c.local_bound = v;
        }
        if let Some(v) = self.global_bar {
            c.global_bound = v;
        }
        if let Some(v) = self.svd_decay {
            c.svd_decay = v;
        }
        if let Some(v) = self.irka_iters {
            c.irka_iters = v;
        }
        if let Some(v) = self.cells {
            c.cells = v;
        }
        if let Some(v) = self.resolutions {
            c.resolutions = v;
        }
        if let Some(v) = self.integrators {
            c.integrators = v.iter().map(|s| Integrator::parse(s)).collect::<std::result::Result<_, _>>()?;
        }
        if let Some(v) = self.snapshots {
            c.snapshots = v;
        }
        if let Some(v) = self.samples {
            c.samples = v;
        }
        if let Some(v) = self.repetitions {
            c.repetitions = v;
        }
        if let Some(v) = self.fixture {
            c.fixture = v;
        }
        c.validate()?;
        Ok(c)
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code: 0 on success, 1 on a failed verification or any
/// module error, 2 on usage and I/O errors.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    configure_threads();
    let cfg = match cli.into_config() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    match execute(&cfg) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_io() || matches!(&e, Error::Format(m) if m.ends_with("is required")) {
                2
            } else {
                1
            }
        }
    }
}

/// Caps the rayon pool at `HYDRONET_THREADS` workers.
fn configure_threads() {
    if let Some(n) = std::env::var("HYDRONET_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            warn!(target: "hydronet::cli", "HYDRONET_THREADS ignored: {e}");
        }
    }
}

/// Runs one command. `Ok(false)` means the command ran but its check failed.
pub fn execute(cfg: &RunConfig) -> Result<bool> {
    match cfg.command {
        Command::Simulate => cmd_simulate(cfg).map(|_| true),
        Command::Reduce => cmd_reduce(cfg).map(|_| true),
        Command::Verify => cmd_verify(cfg).map(|r| r.passed),
        Command::Benchmark => cmd_benchmark(cfg).map(|_| true),
        Command::Generate => cmd_generate(cfg).map(|_| true),
    }
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Writes `manifest.json`: config echo, seed, hashes of every input file and
/// the tool version. No timestamps, so reruns give identical manifests.
fn write_manifest(cfg: &RunConfig, outputs: &[PathBuf], extra: serde_json::Value) -> Result<PathBuf> {
    let mut inputs = Vec::new();
    for (role, path) in [("network", &cfg.network), ("scenario", &cfg.scenario), ("rom", &cfg.rom)] {
        if let Some(p) = path {
            inputs.push(json!({ "role": role, "path": p.display().to_string(), "sha256": sha256_file(p)? }));
        }
    }
    let names: Vec<String> =
        outputs.iter().map(|p| p.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned())).collect();
    let manifest = json!({
        "tool": "hydronet",
        "version": env!("CARGO_PKG_VERSION"),
        "config": cfg,
        "seed": cfg.seed,
        "inputs": inputs,
        "outputs": names,
        "results": extra,
    });
    let path = cfg.out.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Format(e.to_string()))?;
    write_file(&path, text)?;
    Ok(path)
}

fn load_network(cfg: &RunConfig) -> Result<NetworkTopology> {
    Ok(parse_network(cfg.network_path()?)?)
}

/// Scenario from `--scenario`, or `fallback` with seeded typical demands.
fn load_scenario(
    cfg: &RunConfig,
    topology: &NetworkTopology,
    fallback: impl FnOnce(DemandProfile) -> Result<Scenario>,
) -> Result<Scenario> {
    match &cfg.scenario {
        Some(p) => Ok(Scenario::from_file(p, topology)?),
        None => fallback(DemandProfile::Constant(fixtures::typical_demands(topology, cfg.seed, DEMAND_RANGE))),
    }
}

/// Discretization with `cells` cells on the reference edge and CFL
/// synchronized counts elsewhere, from the steady state at the mean demands.
pub fn discretize(topology: &NetworkTopology, demands: &DemandProfile, cells: usize) -> Result<Discretization> {
    let basis = crate::network::build_flow_basis(topology)?;
    let grid = reference_grid(topology, &basis, &demands.mean(), GRID_DENSITY, cells, 1)?;
    Ok(Discretization::new(topology.clone(), grid, TransportOptions::default())?)
}

/// Discretization a reduced model was built on.
pub fn discretization_for(topology: &NetworkTopology, model: &ReducedModel) -> Result<Discretization> {
    if topology.content_hash() != model.network_hash {
        return Err(crate::mor::MorError::Provenance("reduced model was built for a different network".into()).into());
    }
    let grid = CellGrid::from_counts(topology, model.cell_counts.clone())?;
    Ok(Discretization::new(topology.clone(), grid, TransportOptions { sink: model.sink })?)
}

/// Default training scenario: the worst case training signal over one
/// period at `dt = 10 s`.
pub fn training_scenario(topology: &NetworkTopology, demands: DemandProfile) -> Result<Scenario> {
    let signal = training_signal(Admissibility::default(), TRAINING_HARMONICS)?;
    let horizon = signal.period();
    Ok(Scenario::new(signal, demands, horizon, StepControl::fixed(Integrator::Trapezoidal, 10.0), topology)?)
}

/// In-sample scenario over two periods at [`EVALUATION_DT`], the benchmark default.
pub fn in_sample_scenario(topology: &NetworkTopology, demands: DemandProfile) -> Result<Scenario> {
    let signal = make_signal(SignalKind::InSample)?;
    let horizon = 2.0 * signal.period();
    Ok(Scenario::new(signal, demands, horizon, StepControl::fixed(Integrator::Trapezoidal, EVALUATION_DT), topology)?)
}

fn write_trajectory_csv(path: &Path, traj: &TrajectoryResult) -> Result<()> {
    let mut text = String::from("time");
    for l in &traj.labels {
        text.push(',');
        text.push_str(l);
    }
    text.push('\n');
    for (t, y) in traj.times.iter().zip(&traj.outputs) {
        let _ = write!(text, "{t}");
        for v in y {
            let _ = write!(text, ",{v}");
        }
        text.push('\n');
    }
    write_file(path, text)
}

pub struct SimulateOutcome {
    pub trajectory: TrajectoryResult,
    pub csv: PathBuf,
    pub manifest: PathBuf,
}

/// Simulates the scenario with the full order model at `cells`, or with the
/// reduced model given by `--rom`, and writes `trajectory.csv`.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<SimulateOutcome> {
    let topology = load_network(cfg)?;
    let path = cfg.scenario.as_deref().ok_or_else(|| Error::Format("--scenario is required".into()))?;
    let scenario = Scenario::from_file(path, &topology)?;
    let newton = NewtonConfig::default();
    let labels = topology.consumer_labels();
    let trajectory = match &cfg.rom {
        Some(rom_path) => {
            let file = RomFile::load(rom_path)?;
            file.check_network(&topology)?;
            let disc = discretization_for(&topology, &file.model)?;
            let mut model = RomModel::new(file.model, Some(&disc));
            simulate(&mut model as &mut dyn TransportModel, &disc.basis, &scenario, labels, &newton)?
        }
        None => {
            let disc = discretize(&topology, &scenario.demands, cfg.cells)?;
            let mut model = FomModel::new(&disc);
            simulate(&mut model as &mut dyn TransportModel, &disc.basis, &scenario, labels, &newton)?
        }
    };
    create_dir(&cfg.out)?;
    let csv = cfg.out.join("trajectory.csv");
    write_trajectory_csv(&csv, &trajectory)?;
    let manifest = write_manifest(
        cfg,
        std::slice::from_ref(&csv),
        json!({ "steps": trajectory.steps, "rejected": trajectory.rejected, "reassemblies": trajectory.reassemblies }),
    )?;
    info!(target: "hydronet::cli", "wrote {}", csv.display());
    Ok(SimulateOutcome { trajectory, csv, manifest })
}

/// Training simulation, snapshot collection and frequency greedy on `disc`.
pub fn build_rom(disc: &Discretization, training: &Scenario, cfg: &RunConfig) -> Result<(GreedyResult, Vec<Vec<f64>>)> {
    let mut fom = FomModel::new(disc);
    let traj = simulate(
        &mut fom as &mut dyn TransportModel,
        &disc.basis,
        training,
        disc.topology.consumer_labels(),
        &NewtonConfig::default(),
    )?;
    let snapshots = collect_snapshots(&traj, cfg.snapshots);
    info!(target: "hydronet::cli", "{} candidate flows from {} training steps", snapshots.len(), traj.steps);
    let window = cfg.window(&training.signal.bounds)?;
    let result = frequency_greedy(disc, &snapshots, &window, &cfg.greedy())?;
    Ok((result, snapshots))
}

pub struct ReduceOutcome {
    pub rom: RomFile,
    pub rom_path: PathBuf,
    pub scatter_path: PathBuf,
    pub manifest: PathBuf,
}

/// Training run, snapshots, greedy. Writes `rom.json` and `scatter.csv`
/// (order and `Δ^δ` of every greedy step per initialization).
pub fn cmd_reduce(cfg: &RunConfig) -> Result<ReduceOutcome> {
    let topology = load_network(cfg)?;
    let training = load_scenario(cfg, &topology, |d| training_scenario(&topology, d))?;
    let disc = discretize(&topology, &training.demands, cfg.cells)?;
    let (result, snapshots) = build_rom(&disc, &training, cfg)?;
    info!(
        target: "hydronet::cli",
        "reduced {} cells to r={} with Delta={:e}",
        disc.n_cells(),
        result.model.order(),
        result.delta
    );
    let rom = RomFile {
        format_version: RomFile::VERSION,
        model: result.model,
        window: result.window,
        svd_decay: cfg.svd_decay,
        local_bound: cfg.local_bound,
        global_bound: cfg.global_bound,
        snapshots,
        anchors: result.projection.anchors.clone(),
        delta: result.delta,
        errors: result.errors,
    };
    create_dir(&cfg.out)?;
    let rom_path = cfg.out.join("rom.json");
    rom.save(&rom_path)?;
    let scatter_path = cfg.out.join("scatter.csv");
    let mut text = String::from("initialization,step,order,delta\n");
    for p in &result.scatter {
        let _ = writeln!(text, "{},{},{},{:e}", p.initialization, p.step, p.order, p.delta);
    }
    write_file(&scatter_path, text)?;
    let manifest = write_manifest(
        cfg,
        &[rom_path.clone(), scatter_path.clone()],
        json!({ "cells": disc.n_cells(), "order": rom.model.order(), "delta": rom.delta, "anchors": rom.anchors }),
    )?;
    Ok(ReduceOutcome { rom, rom_path, scatter_path, manifest })
}

/// One verification sample.
#[derive(Clone, Debug, Serialize)]
pub struct VerifySample {
    pub index: usize,
    pub q: Vec<f64>,
    pub pattern: String,
    pub lambda_max: f64,
    pub norm_qa: f64,
    pub audit_passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub samples: usize,
    pub cells: usize,
    pub exact: bool,
    /// Largest `λ_max(QA + AᵀQ)` over the samples.
    pub max_lambda: f64,
    /// Largest `λ_max / ‖QA‖₂`.
    pub max_relative: f64,
    pub audit_passed: bool,
    pub passed: bool,
    pub failures: Vec<VerifySample>,
}

/// Relative tolerance on `λ_max(QA + AᵀQ)`.
pub const VERIFY_TOLERANCE: f64 = 1e-10;

/// Checks `QA(q) + A(q)ᵀQ ≤ 0` and the diagonal audit on `disc` for the flows `qs`.
pub fn verify_flows(disc: &Discretization, qs: &[Vec<f64>]) -> Result<VerifyReport> {
    let mut report = VerifyReport {
        samples: qs.len(),
        cells: disc.n_cells(),
        exact: true,
        max_lambda: f64::NEG_INFINITY,
        max_relative: f64::NEG_INFINITY,
        audit_passed: true,
        passed: true,
        failures: Vec::new(),
    };
    for (index, q) in qs.iter().enumerate() {
        let flows = disc.basis.edge_flows(q);
        crate::transport::audit_flows(&disc.topology, &disc.basis, &flows)?;
        let pattern = SignPattern::from_flows(&flows);
        let op = disc.operator(&pattern)?;
        let (a, _) = op.0.evaluate(&flows)?;
        let lr = check_lyapunov(&a, &disc.energy)?;
        let audit = lr.audit_passes();
        let stable = lr.is_stable(VERIFY_TOLERANCE);
        report.exact &= lr.exact;
        report.max_lambda = report.max_lambda.max(lr.lambda_max);
        if lr.norm_qa > 0.0 {
            report.max_relative = report.max_relative.max(lr.lambda_max / lr.norm_qa);
        }
        report.audit_passed &= audit;
        if !(audit && stable) {
            report.passed = false;
            report.failures.push(VerifySample {
                index,
                q: q.clone(),
                pattern: pattern.to_string(),
                lambda_max: lr.lambda_max,
                norm_qa: lr.norm_qa,
                audit_passed: audit,
            });
        }
    }
    Ok(report)
}

/// Random conservative flows for `verify`: every other sample carries large
/// circulations that reverse loop edges.
pub fn verification_flows(disc: &Discretization, samples: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..samples).map(|k| disc.basis.random_flows(&mut rng, 5e-5, if k % 2 == 0 { 0.1 } else { 2.0 })).collect()
}

/// Samples random conservative flows and checks the Lyapunov inequality with
/// the diagonal energy matrix. Writes `verify.json`.
pub fn cmd_verify(cfg: &RunConfig) -> Result<VerifyReport> {
    let topology = load_network(cfg)?;
    let grid = CellGrid::uniform(&topology, cfg.cells)?;
    let disc = Discretization::new(topology, grid, TransportOptions::default())?;
    let qs = verification_flows(&disc, cfg.samples, cfg.seed);
    let report = verify_flows(&disc, &qs)?;
    create_dir(&cfg.out)?;
    let path = cfg.out.join("verify.json");
    write_file(&path, serde_json::to_string_pretty(&report).map_err(|e| Error::Format(e.to_string()))?)?;
    write_manifest(
        cfg,
        std::slice::from_ref(&path),
        json!({ "passed": report.passed, "max_lambda": report.max_lambda }),
    )?;
    println!(
        "max lambda_max = {:e} (relative {:e}) over {} flows, audit {}",
        report.max_lambda,
        report.max_relative,
        report.samples,
        if report.audit_passed { "passed" } else { "failed" }
    );
    for f in &report.failures {
        eprintln!("violation at sample {}: lambda_max = {:e}, q = {:?}", f.index, f.lambda_max, f.q);
    }
    Ok(report)
}

pub struct BenchmarkOutcome {
    pub rows: Vec<BenchmarkRow>,
    pub rom_order: usize,
    pub csv: PathBuf,
    pub long: PathBuf,
}

/// Writes rows grouped per (model, integrator) series, blocks separated by
/// two blank lines for gnuplot's `index`.
fn write_long_format(path: &Path, rows: &[BenchmarkRow]) -> Result<()> {
    let mut series: Vec<(String, String)> = Vec::new();
    for r in rows {
        let key = (r.model.clone(), r.integrator.clone());
        if !series.contains(&key) {
            series.push(key);
        }
    }
    let mut text = String::new();
    for (i, (model, integrator)) in series.iter().enumerate() {
        if i > 0 {
            text.push_str("\n\n");
        }
        let _ = writeln!(text, "# {model} {integrator}");
        let _ = writeln!(text, "# resolution order runtime_s delta_t");
        for r in rows.iter().filter(|r| &r.model == model && &r.integrator == integrator) {
            let _ = writeln!(text, "{} {} {:e} {:e}", r.resolution, r.order, r.runtime_s, r.delta_t);
        }
    }
    write_file(path, text)
}

const GNUPLOT_SCRIPT: &str = "set logscale xy\nset xlabel 'time domain error'\nset ylabel 'runtime [s]'\n\
plot for [i=0:*] 'benchmark_long.dat' index i using 4:3 with linespoints title columnheader(1)\n";

/// Full order models at every resolution and a reduced model (from `--rom`
/// or built at the finest resolution) against a full order reference at 4x
/// the finest resolution, trapezoidal with `dt = 1 s`.
pub fn cmd_benchmark(cfg: &RunConfig) -> Result<BenchmarkOutcome> {
    let topology = load_network(cfg)?;
    let scenario = load_scenario(cfg, &topology, |d| in_sample_scenario(&topology, d))?;
    let mut resolutions = cfg.resolutions.clone();
    resolutions.sort_unstable();
    resolutions.dedup();
    let finest = *resolutions.last().expect("validated");
    let discs = resolutions.iter().map(|&c| discretize(&topology, &scenario.demands, c)).collect::<Result<Vec<_>>>()?;
    let (rom, rom_disc, rom_resolution) = match &cfg.rom {
        Some(p) => {
            let file = RomFile::load(p)?;
            file.check_network(&topology)?;
            let disc = discretization_for(&topology, &file.model)?;
            let res =
                discs.iter().zip(&resolutions).find(|(d, _)| d.grid.counts() == disc.grid.counts()).map_or(0, |x| *x.1);
            (file.model, disc, res)
        }
        None => {
            let training = training_scenario(&topology, scenario.demands.clone())?;
            let disc = discs.last().expect("validated").clone();
            let (result, _) = build_rom(&disc, &training, cfg)?;
            (result.model, disc, finest)
        }
    };
    let reference = discretize(&topology, &scenario.demands, 4 * finest)?;
    let rule = ReferenceRule {
        disc: &reference,
        step: StepControl::fixed(Integrator::Trapezoidal, 1.0),
        id: format!("fom-{}-trapezoidal-dt1", 4 * finest),
    };
    let mut models: Vec<BenchmarkModel> =
        resolutions.iter().zip(&discs).map(|(&r, d)| BenchmarkModel::Fom { disc: d, resolution: r }).collect();
    models.push(BenchmarkModel::Rom { model: &rom, disc: &rom_disc, resolution: rom_resolution });
    let (rows, _) = benchmark(&models, &cfg.integrators, &scenario, &rule, cfg.repetitions, &NewtonConfig::default())?;

    create_dir(&cfg.out)?;
    let csv = cfg.out.join("benchmark.csv");
    let file = fs::File::create(&csv).map_err(|e| Error::io(&csv, e))?;
    write_benchmark_csv(&rows, file)?;
    let long = cfg.out.join("benchmark_long.dat");
    write_long_format(&long, &rows)?;
    let script = cfg.out.join("benchmark.gp");
    write_file(&script, GNUPLOT_SCRIPT)?;
    write_manifest(
        cfg,
        &[csv.clone(), long.clone(), script],
        json!({ "reference": rule.id, "reference_cells": reference.n_cells(), "rom_order": rom.order() }),
    )?;
    Ok(BenchmarkOutcome { rows, rom_order: rom.order(), csv, long })
}

/// Writes a synthetic network and scenarios for the in-sample, out-of-sample
/// and training signals with seeded typical demands.
pub fn cmd_generate(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let topology = match cfg.fixture {
        Fixture::Street => fixtures::street(&fixtures::StreetParams::default(), cfg.seed),
        Fixture::District => fixtures::district(3, cfg.seed).0,
        Fixture::Random => fixtures::random_network_seeded(cfg.seed, 50, 3),
        Fixture::Pipe => fixtures::series_path(1, 0.05, 100.0),
    };
    let demands = fixtures::typical_demands(&topology, cfg.seed, DEMAND_RANGE);
    let by_id: serde_json::Map<String, serde_json::Value> =
        topology.consumer_labels().into_iter().zip(demands).map(|(l, d)| (l, json!(d))).collect();
    create_dir(&cfg.out)?;
    let mut written = Vec::new();
    let network = cfg.out.join("network.json");
    write_file(&network, topology.to_json())?;
    written.push(network);
    let scenarios = [
        ("scenario_in_sample.json", json!({ "kind": "in_sample" }), 28_000.0, EVALUATION_DT),
        ("scenario_out_of_sample.json", json!({ "kind": "out_of_sample" }), 28_000.0, EVALUATION_DT),
        ("scenario_training.json", json!({ "kind": "training", "m": TRAINING_HARMONICS }), 28_000.0, 10.0),
    ];
    for (name, signal, horizon, dt) in scenarios {
        let s = json!({
            "signal": signal,
            "demands": by_id,
            "horizon_s": horizon,
            "dt_s": dt,
            "integrator": "trapezoidal",
        });
        let path = cfg.out.join(name);
        write_file(&path, serde_json::to_string_pretty(&s).map_err(|e| Error::Format(e.to_string()))?)?;
        written.push(path);
    }
    write_manifest(cfg, &written, json!({ "fixture": cfg.fixture, "consumers": topology.n_consumers() }))?;
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_map_onto_config() {
        let cli = Cli::try_parse_from([
            "hydronet",
            "reduce",
            "--network",
            "n.json",
            "--Delta-bar",
            "inf",
            "--delta-bar",
            "1e-3",
            "--resolutions",
            "4,8",
            "--integrators",
            "euler,adaptive",
            "--window-hz",
            "0.01",
        ])
        .unwrap();
        let c = cli.into_config().unwrap();
        assert_eq!(c.command, Command::Reduce);
        assert!(c.global_bound.is_infinite());
        assert_eq!(c.local_bound, 1e-3);
        assert_eq!(c.resolutions, vec![4, 8]);
        assert_eq!(c.integrators, vec![Integrator::Euler, Integrator::Adaptive]);
        let w = c.window(&Admissibility::default()).unwrap();
        assert!((w.high - 2.0 * std::f64::consts::PI * 0.01).abs() < 1e-15);
    }

    #[test]
    fn non_positive_parameters_are_rejected() {
        let cli = Cli::try_parse_from(["hydronet", "verify", "--delta-bar", "0"]).unwrap();
        assert!(cli.into_config().is_err());
        let cli = Cli::try_parse_from(["hydronet", "verify", "--cells", "0"]).unwrap();
        assert!(cli.into_config().is_err());
    }

    #[test]
    fn default_window_is_ten_times_the_top_frequency() {
        let c = RunConfig::new(Command::Reduce, "x");
        let b = Admissibility::default();
        assert_eq!(c.window(&b).unwrap().high, 10.0 * b.max_frequency);
    }
}
