mod common;

use std::f64::consts::PI;

use hydronet::mor::{
    frequency_greedy, recompute_errors, reduce_decomposed, svd_combine, weighted_h2_norm, weighted_h2_norm_squared,
    weighted_irka, FrequencyWindow, FullSystem, GreedyConfig, IrkaConfig, ReducedModel, TransferSamples,
};
use hydronet::network::{build_flow_basis, decompose, fixtures, CellGrid, NetworkTopology};
use hydronet::transport::{Discretization, SignPattern, TransportOptions};
use nalgebra::{Complex, DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn discretization(t: NetworkTopology, cells: usize) -> Discretization {
    let grid = CellGrid::uniform(&t, cells).unwrap();
    Discretization::new(t, grid, TransportOptions::default()).unwrap()
}

fn full_system(disc: &Discretization, edge_flows: &[f64]) -> FullSystem {
    let assembled = disc.operator(&SignPattern::from_flows(edge_flows)).unwrap();
    FullSystem::at(&assembled.1, edge_flows).unwrap()
}

/// Single pipe of `cells` equal cells with flow `f`; returns the system and
/// the per-cell rate `a = f / (Φ h)`.
fn chain(cells: usize, f: f64) -> (Discretization, FullSystem, f64) {
    let t = fixtures::series_path(1, 0.1, 30.0);
    let a = f / (t.edges[0].cross_section() * 30.0 / cells as f64);
    let disc = discretization(t, cells);
    let sys = full_system(&disc, &[f]);
    (disc, sys, a)
}

fn c(re: f64, im: f64) -> Complex<f64> {
    Complex::new(re, im)
}

#[test]
fn single_cell_transfer_is_first_order_lag() {
    let (_, sys, a) = chain(1, 2e-3);
    for w in [0.0, 0.3 * a, a, 10.0 * a] {
        let s = c(0.0, w);
        let h = sys.transfer(s).unwrap()[0];
        assert!((h - a / (s + a)).norm() <= 1e-12);
    }
}

#[test]
fn chain_transfer_is_a_power_of_the_lag() {
    let (_, sys, a) = chain(5, 1e-3);
    for w in [0.0, 0.1 * a, a, 3.0 * a] {
        let s = c(0.0, w);
        let h = sys.transfer(s).unwrap()[0];
        assert!((h - (a / (s + a)).powi(5)).norm() <= 1e-12);
    }
}

#[test]
fn lossless_networks_have_unit_dc_gain() {
    let t = fixtures::street(&fixtures::StreetParams::default(), 3);
    let basis = build_flow_basis(&t).unwrap();
    let q = basis.random_flows(&mut ChaCha8Rng::seed_from_u64(3), 1e-4, 0.2);
    let disc = discretization(t, 2);
    let sys = full_system(&disc, &basis.edge_flows(&q));
    for h in sys.transfer(c(0.0, 0.0)).unwrap() {
        assert!((h - c(1.0, 0.0)).norm() <= 1e-10, "{h}");
    }
}

#[test]
fn weighted_norm_of_a_lag_is_an_arctan() {
    let (_, sys, a) = chain(1, 2e-3);
    for high in [0.5 * a, 2.0 * a, 50.0 * a] {
        let window = FrequencyWindow::new(0.0, high).unwrap();
        let samples = TransferSamples::of_full(&sys, &window).unwrap();
        let got = weighted_h2_norm_squared(&window, &samples.values).unwrap();
        let want = a * (high / a).atan() / (2.0 * PI);
        assert!((got - want).abs() <= 1e-3 * want, "{got} vs {want}");
    }
}

#[test]
fn duplicated_basis_keeps_its_rank() {
    let v = DMatrix::from_row_slice(3, 1, &[1.0, 0.0, 0.0]);
    let p = svd_combine(&[&v, &v], 8.0).unwrap();
    assert_eq!(p.order(), 1);
    assert!((p.basis.column(0).dot(&v.column(0)).abs() - 1.0).abs() < 1e-12);
}

#[test]
fn orthogonal_bases_add_up() {
    let a = DMatrix::from_row_slice(3, 1, &[1.0, 0.0, 0.0]);
    let b = DMatrix::from_row_slice(3, 1, &[0.0, 0.0, 2.0]);
    for s in [0.0, 3.0, 12.0] {
        assert_eq!(svd_combine(&[&a, &b], s).unwrap().order(), 2);
    }
    assert!(svd_combine(&[], 8.0).is_err());
}

#[test]
fn irka_on_a_single_cell_finds_the_mirrored_pole() {
    let (_, sys, a) = chain(1, 2e-3);
    let window = FrequencyWindow::new(0.0, 10.0 * a).unwrap();
    let samples = TransferSamples::of_full(&sys, &window).unwrap();
    let cfg = IrkaConfig { initial_points: 1, ..Default::default() };
    let space = weighted_irka(&sys, &samples, &[c(0.37 * a, 0.0)], &cfg).unwrap();
    let (ar, _, _) = sys.project(&space.basis);
    // next interpolation point is the mirror of the reduced pole
    assert!((-ar[(0, 0)] - a).abs() <= 1e-12 * a);
    assert!(space.delta <= 1e-12);
}

#[test]
fn full_order_interpolation_is_exact() {
    let (_, sys, a) = chain(4, 1e-3);
    let window = FrequencyWindow::new(0.0, 10.0 * a).unwrap();
    let samples = TransferSamples::of_full(&sys, &window).unwrap();
    let sigma: Vec<_> = [0.2, 0.7, 2.0, 5.0].iter().map(|k| c(k * a, 0.0)).collect();
    let cfg = IrkaConfig { initial_points: 4, max_sweeps: 1, ..Default::default() };
    let space = weighted_irka(&sys, &samples, &sigma, &cfg).unwrap();
    assert_eq!(space.order(), 4);
    assert!(space.delta <= 1e-12, "{}", space.delta);
}

#[test]
fn rank_one_space_of_a_two_state_system_by_hand() {
    let (_, sys, a) = chain(2, 1e-3);
    let window = FrequencyWindow::new(0.0, 5.0 * a).unwrap();
    let samples = TransferSamples::of_full(&sys, &window).unwrap();
    let cfg = IrkaConfig { initial_points: 1, local_bound: f64::INFINITY, ..Default::default() };
    let space = weighted_irka(&sys, &samples, &[c(a, 0.0)], &cfg).unwrap();
    assert_eq!(space.order(), 1);

    // reduced transfer c v (s - vᵀAv)⁻¹ vᵀb from dense matrices
    let a_full = sys.a.to_dense();
    let b_full = DVector::from_vec(sys.b.clone());
    let c_full = sys.c.to_dense();
    let v = space.basis.column(0).into_owned();
    let ar = v.dot(&(&a_full * &v));
    let br = v.dot(&b_full);
    let cr = (&c_full * &v)[0];
    let hr = |s: Complex<f64>| cr * br / (s - ar);
    let h = |s: Complex<f64>| common::dense_transfer(&a_full, &b_full, &c_full, s)[0];

    // interpolation at the point that built the space
    let sigma = space.sigma[0];
    assert!((hr(sigma) - h(sigma)).norm() <= 1e-8 * h(sigma).norm());

    // relative weighted error by an independent trapezoid rule
    let w = window.frequencies();
    let (mut num, mut den) = (0.0, 0.0);
    for k in 0..w.len() - 1 {
        let step = w[k + 1] - w[k];
        for &x in &[w[k], w[k + 1]] {
            let s = c(0.0, x);
            num += 0.5 * step * (h(s) - hr(s)).norm_sqr();
            den += 0.5 * step * h(s).norm_sqr();
        }
    }
    let want = (num / den).sqrt();
    assert!((space.delta - want).abs() <= 1e-9 * want, "{} vs {want}", space.delta);
}

#[test]
fn interpolation_holds_at_every_anchor_point() {
    let (_, sys, a) = chain(12, 1e-3);
    let window = FrequencyWindow::new(0.0, 3.0 * a).unwrap();
    let samples = TransferSamples::of_full(&sys, &window).unwrap();
    let cfg = IrkaConfig { initial_points: 3, local_bound: f64::INFINITY, ..Default::default() };
    let sigma0 = hydronet::mor::initial_points(&window, 3);
    let space = weighted_irka(&sys, &samples, &sigma0, &cfg).unwrap();
    let (ar, br, cr) = sys.project(&space.basis);
    let reduced = hydronet::linalg::HessenbergTransfer::new(&ar, &br, &cr);
    for s in &space.sigma {
        let h = sys.transfer(*s).unwrap()[0];
        let hr = reduced.eval(*s).unwrap()[0];
        assert!((h - hr).norm() <= 1e-8 * h.norm(), "σ = {s}");
    }
}

fn street_case(segments: usize, n_snapshots: usize, seed: u64) -> (Discretization, Vec<Vec<f64>>, FrequencyWindow) {
    let t = fixtures::street(&fixtures::StreetParams::small(segments), seed);
    let basis = build_flow_basis(&t).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = basis.random_flows(&mut rng, 1e-4, 0.0);
    let snapshots: Vec<Vec<f64>> =
        (0..n_snapshots).map(|_| base.iter().map(|x| x * rng.random_range(0.6..1.4)).collect()).collect();
    let disc = discretization(t, 3);
    let window = FrequencyWindow::new(0.0, 2.0 * PI / 1400.0).unwrap();
    (disc, snapshots, window)
}

#[test]
fn single_candidate_greedy_uses_its_own_space() {
    let (disc, snapshots, window) = street_case(3, 1, 5);
    let cfg = GreedyConfig { global_bound: 1e-2, ..Default::default() };
    let res = frequency_greedy(&disc, &snapshots, &window, &cfg).unwrap();
    assert!(res.delta < 1e-2);
    assert_eq!(res.projection.anchors, vec![0]);
    let v = &res.projection.basis;
    let gram = v.transpose() * v;
    assert!((gram - DMatrix::identity(v.ncols(), v.ncols())).abs().max() <= 1e-10);
}

#[test]
fn vacuous_bound_stops_after_initialization() {
    let (disc, snapshots, window) = street_case(3, 4, 6);
    let cfg = GreedyConfig { global_bound: f64::INFINITY, ..Default::default() };
    let res = frequency_greedy(&disc, &snapshots, &window, &cfg).unwrap();
    assert!(res.scatter.iter().all(|p| p.step == 0));
    assert_eq!(res.projection.anchors.len(), 1);
}

#[test]
fn greedy_bound_survives_a_brute_force_recheck() {
    let (disc, snapshots, window) = street_case(4, 4, 7);
    let cfg = GreedyConfig { global_bound: 1e-2, ..Default::default() };
    let res = frequency_greedy(&disc, &snapshots, &window, &cfg).unwrap();
    assert!(res.delta < 1e-2);
    let errors = recompute_errors(&disc, &res.model, &snapshots, &res.window).unwrap();
    let worst = errors.iter().copied().fold(0.0, f64::max);
    assert!(worst <= res.delta + 1e-12, "{worst} vs {}", res.delta);

    // orders grow along each initialization
    for init in 0..cfg.initializations {
        let orders: Vec<usize> = res.scatter.iter().filter(|p| p.initialization == init).map(|p| p.order).collect();
        assert!(orders.windows(2).all(|w| w[0] <= w[1]));
    }

    // stability carries over to flows outside the training set
    let mut model = res.model.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..10 {
        let q = disc.basis.random_flows(&mut rng, 1e-4, 0.0);
        let fam = model.ensure_pattern(&disc, &SignPattern::from_flows(&disc.basis.edge_flows(&q))).unwrap();
        let sys = model.evaluate(fam, &q);
        let sym = &sys.a + sys.a.transpose();
        assert!(common::lambda_max(&sym) <= 1e-10 * common::norm2(&sym));
    }
}

#[test]
fn identity_decomposition_reproduces_the_full_model() {
    let (t, branches) = fixtures::district(3, 2);
    let plan = decompose(&t, &branches[1]).unwrap();
    let basis = build_flow_basis(&t).unwrap();
    let q = basis.random_flows(&mut ChaCha8Rng::seed_from_u64(2), 1e-4, 0.0);
    let flows = basis.edge_flows(&q);
    let disc = discretization(t, 2);
    let pattern = SignPattern::from_flows(&flows);
    let ids = plan.cell_sets(&disc.grid).iter().map(|s| DMatrix::identity(s.len(), s.len())).collect();
    let model = reduce_decomposed(&disc, &plan, ids, std::slice::from_ref(&pattern)).unwrap();
    let reduced = model.evaluate(model.family_index(&pattern).unwrap(), &q).transfer();
    let full = full_system(&disc, &flows);
    for w in [1e-5, 1e-4, 1e-3, 1e-2] {
        let s = c(0.0, w);
        let (h, hr) = (full.transfer(s).unwrap(), reduced.eval(s).unwrap());
        for (x, y) in h.iter().zip(&hr) {
            assert!((x - y).norm() <= 1e-12 * x.norm().max(1.0));
        }
    }

    // reduced main network plus identity subnetwork stays stable
    let sets = plan.cell_sets(&disc.grid);
    let main = &sets[0];
    let k = main.len() / 2;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let raw = DMatrix::from_fn(main.len(), k, |_, _| rng.random_range(-1.0..1.0));
    let v_main = raw.qr().q();
    let mut projections = vec![v_main];
    projections.extend(sets[1..].iter().map(|s| DMatrix::identity(s.len(), s.len())));
    let model = reduce_decomposed(&disc, &plan, projections, std::slice::from_ref(&pattern)).unwrap();
    let sys = model.evaluate(model.family_index(&pattern).unwrap(), &q);
    let sym = &sys.a + sys.a.transpose();
    assert!(common::lambda_max(&sym) <= 1e-10 * common::norm2(&sym));
}

#[test]
fn global_identity_projection_is_the_full_model() {
    let t = fixtures::street(&fixtures::StreetParams::small(3), 1);
    let basis = build_flow_basis(&t).unwrap();
    let q = basis.random_flows(&mut ChaCha8Rng::seed_from_u64(1), 1e-4, 0.0);
    let flows = basis.edge_flows(&q);
    let disc = discretization(t, 2);
    let pattern = SignPattern::from_flows(&flows);
    let n = disc.n_cells();
    let model =
        ReducedModel::from_global_basis(&disc, DMatrix::identity(n, n), std::slice::from_ref(&pattern)).unwrap();
    let sys = model.evaluate(0, &q);
    let full = full_system(&disc, &flows);
    assert!((&sys.a - full.a.to_dense()).abs().max() <= 1e-14 * sys.a.abs().max());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn svd_combination_keeps_dominant_directions(seed in 0u64..1_000, decay in 0.5f64..4.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spaces: Vec<DMatrix<f64>> =
            (0..3).map(|_| DMatrix::from_fn(10, 2, |_, _| rng.random_range(-1.0..1.0))).collect();
        let refs: Vec<&DMatrix<f64>> = spaces.iter().collect();
        let p = svd_combine(&refs, decay).unwrap();
        // oracle: unit columns stacked, singular directions above the cut
        let cols: Vec<DVector<f64>> = spaces.iter().flat_map(|m| m.column_iter().map(|c| c / c.norm())).collect();
        let stacked = DMatrix::from_columns(&cols);
        let svd = stacked.svd(true, false);
        let u = svd.u.unwrap();
        let smax = svd.singular_values.max();
        let proj = &p.basis * p.basis.transpose();
        for (j, s) in svd.singular_values.iter().enumerate() {
            if *s >= smax * 10f64.powf(-decay) * (1.0 + 1e-9) {
                let x = u.column(j).into_owned();
                prop_assert!((&x - &proj * &x).norm() <= 1e-8);
            }
        }
        let gram = p.basis.transpose() * &p.basis;
        prop_assert!((gram - DMatrix::identity(p.order(), p.order())).abs().max() <= 1e-10);
    }

    #[test]
    fn weighted_norm_grows_with_the_window(f in 1e-4f64..1e-2, lo_frac in 0.1f64..2.0, grow in 1.05f64..5.0) {
        let (_, sys, a) = chain(3, f);
        let small = FrequencyWindow::new(0.0, lo_frac * a).unwrap();
        let large = FrequencyWindow::new(0.0, lo_frac * grow * a).unwrap();
        let n_small = weighted_h2_norm(&small, &TransferSamples::of_full(&sys, &small).unwrap().values).unwrap();
        let n_large = weighted_h2_norm(&large, &TransferSamples::of_full(&sys, &large).unwrap().values).unwrap();
        // nodes move with the window; allow the quadrature tolerance
        prop_assert!(n_large >= n_small * (1.0 - 1e-3), "{} < {}", n_large, n_small);
    }
}
