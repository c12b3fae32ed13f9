use std::path::Path;
use std::process::Command as Process;

use hydronet::cli::{
    cmd_benchmark, cmd_generate, cmd_reduce, cmd_simulate, cmd_verify, discretization_for, run, Command, Fixture,
    RunConfig,
};
use hydronet::mor::{recompute_errors, RomFile};
use hydronet::network::parse_network;
use hydronet::simulation::{Integrator, BENCHMARK_HEADER};

fn generate(dir: &Path, fixture: Fixture, seed: u64) {
    let mut cfg = RunConfig::new(Command::Generate, dir);
    cfg.fixture = fixture;
    cfg.seed = seed;
    cmd_generate(&cfg).unwrap();
}

#[test]
fn generated_street_simulates_to_one_column_per_house() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), Fixture::Street, 3);
    let mut cfg = RunConfig::new(Command::Simulate, dir.path().join("sim"));
    cfg.network = Some(dir.path().join("network.json"));
    cfg.scenario = Some(dir.path().join("scenario_in_sample.json"));
    cfg.cells = 4;
    let out = cmd_simulate(&cfg).unwrap();
    let text = std::fs::read_to_string(&out.csv).unwrap();
    let header: Vec<&str> = text.lines().next().unwrap().split(',').collect();
    assert_eq!(header.len(), 33);
    assert_eq!(header[0], "time");
    let rows = text.lines().count() - 1;
    assert_eq!(rows, out.trajectory.times.len());
}

#[test]
fn missing_scenario_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), Fixture::Pipe, 1);
    let network = dir.path().join("network.json");
    let out = dir.path().join("sim");
    let code = run(["hydronet", "simulate", "--network", network.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code, 2);

    // the binary agrees
    let status = Process::new(env!("CARGO_BIN_EXE_hydronet"))
        .args(["simulate", "--network", network.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn unknown_flag_is_rejected_by_the_parser() {
    assert_eq!(run(["hydronet", "simulate", "--no-such-flag"]), 2);
    assert_ne!(run(["hydronet", "frobnicate"]), 0);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), Fixture::District, 5);
    let mut outputs = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("run{k}"));
        let mut cfg = RunConfig::new(Command::Simulate, &out);
        cfg.network = Some(dir.path().join("network.json"));
        cfg.scenario = Some(dir.path().join("scenario_out_of_sample.json"));
        cfg.cells = 3;
        cfg.seed = 11;
        cmd_simulate(&cfg).unwrap();
        outputs.push(std::fs::read(out.join("trajectory.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn reduce_with_vacuous_bound_and_reload() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), Fixture::District, 2);
    let mut cfg = RunConfig::new(Command::Reduce, dir.path().join("rom"));
    cfg.network = Some(dir.path().join("network.json"));
    cfg.global_bound = f64::INFINITY;
    cfg.cells = 4;
    cfg.snapshots = 6;
    let out = cmd_reduce(&cfg).unwrap();
    assert_eq!(out.rom.anchors.len(), 1);
    let scatter = std::fs::read_to_string(&out.scatter_path).unwrap();
    assert!(scatter.lines().skip(1).all(|l| l.split(',').nth(1) == Some("0")));

    // reload and recompute every candidate error from scratch
    let back = RomFile::load(&out.rom_path).unwrap();
    let topology = parse_network(dir.path().join("network.json")).unwrap();
    back.check_network(&topology).unwrap();
    let disc = discretization_for(&topology, &back.model).unwrap();
    let errors = recompute_errors(&disc, &back.model, &back.snapshots, &back.window).unwrap();
    let worst = errors.iter().copied().fold(0.0, f64::max);
    assert!((worst - back.delta).abs() <= 1e-12 * back.delta.max(1.0), "{worst} vs {}", back.delta);

    // a different network is refused
    let other = hydronet::network::fixtures::series_path(2, 0.1, 10.0);
    assert!(back.check_network(&other).is_err());
}

#[test]
fn verify_single_pipe_passes() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), Fixture::Pipe, 1);
    let mut cfg = RunConfig::new(Command::Verify, dir.path().join("verify"));
    cfg.network = Some(dir.path().join("network.json"));
    cfg.cells = 5;
    cfg.samples = 20;
    let report = cmd_verify(&cfg).unwrap();
    assert!(report.passed && report.audit_passed && report.exact);
    assert_eq!(report.samples, 20);
    assert!(dir.path().join("verify/verify.json").exists());
    assert!(dir.path().join("verify/manifest.json").exists());
}

#[test]
fn benchmark_writes_the_fixed_header() {
    let dir = tempfile::tempdir().unwrap();
    generate(dir.path(), Fixture::Pipe, 1);
    let mut cfg = RunConfig::new(Command::Benchmark, dir.path().join("bench"));
    cfg.network = Some(dir.path().join("network.json"));
    cfg.scenario = Some(dir.path().join("scenario_in_sample.json"));
    cfg.resolutions = vec![2];
    cfg.integrators = vec![Integrator::Trapezoidal];
    cfg.global_bound = f64::INFINITY;
    cfg.snapshots = 4;
    let out = cmd_benchmark(&cfg).unwrap();
    let text = std::fs::read_to_string(&out.csv).unwrap();
    assert_eq!(text.lines().next().unwrap(), BENCHMARK_HEADER.join(","));
    // one full order row and one reduced row
    assert_eq!(out.rows.len(), 2);
    assert_eq!(text.lines().count(), 3);
    assert_eq!(out.rows[0].model, "fom");
    assert_eq!(out.rows[1].model, "rom");
    assert!(out.rows.iter().all(|r| r.runtime_s.is_finite() && r.delta_t.is_finite()));
}
