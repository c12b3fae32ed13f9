//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use hydronet::network::{CellGrid, NetworkTopology};
use nalgebra::{Complex, DMatrix, DVector};

/// Upwind matrices assembled straight from the stencil, without the affine
/// decomposition: `A` acts on physical densities, `B` on the plant input.
///
/// Every edge moves `|f_i| / (Φ_i h_i)` per cell along its flow direction;
/// the first cell receives the flow-weighted mix of everything entering the
/// upstream node.
pub fn direct_upwind(topology: &NetworkTopology, grid: &CellGrid, edge_flows: &[f64]) -> (DMatrix<f64>, DVector<f64>) {
    let n = grid.n_cells();
    let mut a = DMatrix::zeros(n, n);
    let mut b = DVector::zeros(n);
    let tol = 1e-12 * edge_flows.iter().fold(0.0f64, |m, f| m.max(f.abs()));
    let forward = |e: usize| edge_flows[e] >= -tol;
    let upstream = |e: usize| if forward(e) { topology.edges[e].from } else { topology.edges[e].to };
    let downstream = |e: usize| if forward(e) { topology.edges[e].to } else { topology.edges[e].from };
    let cell = |e: usize, k: usize| {
        let m = grid.cells(e);
        grid.index(e, if forward(e) { k } else { m - 1 - k })
    };
    // plant flow = net flow leaving the source
    let plant: f64 = (0..topology.n_edges())
        .map(|e| {
            let f = edge_flows[e];
            if topology.edges[e].from == topology.source {
                f
            } else if topology.edges[e].to == topology.source {
                -f
            } else {
                0.0
            }
        })
        .sum();

    for i in 0..topology.n_edges() {
        let rate = edge_flows[i].abs() / (topology.edges[i].cross_section() * grid.cell_length(i));
        if rate == 0.0 {
            continue;
        }
        for k in 0..grid.cells(i) {
            let row = cell(i, k);
            a[(row, row)] -= rate;
            if k > 0 {
                a[(row, cell(i, k - 1))] += rate;
            }
        }
        let node = upstream(i);
        let mut incoming: Vec<(Option<usize>, f64)> = (0..topology.n_edges())
            .filter(|&j| downstream(j) == node && edge_flows[j].abs() > tol)
            .map(|j| (Some(j), edge_flows[j].abs()))
            .collect();
        if node == topology.source && plant > 0.0 {
            incoming.push((None, plant));
        }
        let total: f64 = incoming.iter().map(|x| x.1).sum();
        if total <= 0.0 {
            continue;
        }
        let row = cell(i, 0);
        for (j, w) in incoming {
            match j {
                Some(j) => a[(row, cell(j, grid.cells(j) - 1))] += rate * w / total,
                None => b[row] += rate * w / total,
            }
        }
    }
    (a, b)
}

/// `C (sI - A)⁻¹ B` by dense complex LU.
pub fn dense_transfer(a: &DMatrix<f64>, b: &DVector<f64>, c: &DMatrix<f64>, s: Complex<f64>) -> Vec<Complex<f64>> {
    let n = a.nrows();
    let m = DMatrix::<Complex<f64>>::identity(n, n) * s - a.map(|v| Complex::new(v, 0.0));
    let x = m.lu().solve(&b.map(|v| Complex::new(v, 0.0))).expect("shifted matrix is regular");
    let y = c.map(|v| Complex::new(v, 0.0)) * x;
    y.iter().copied().collect()
}

/// Largest eigenvalue of a symmetric matrix.
pub fn lambda_max(m: &DMatrix<f64>) -> f64 {
    m.clone().symmetric_eigen().eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Largest singular value.
pub fn norm2(m: &DMatrix<f64>) -> f64 {
    m.singular_values().iter().copied().fold(0.0, f64::max)
}

/// Node balance `Σ in - Σ out` at every junction that is neither the source
/// nor a house.
pub fn junction_residuals(topology: &NetworkTopology, consumer_edges: &[usize], edge_flows: &[f64]) -> Vec<f64> {
    let houses: Vec<usize> = consumer_edges.iter().map(|&e| topology.edges[e].to).collect();
    (0..topology.n_nodes())
        .filter(|n| *n != topology.source && !houses.contains(n))
        .map(|n| {
            topology
                .edges
                .iter()
                .zip(edge_flows)
                .map(|(e, f)| {
                    if e.to == n {
                        *f
                    } else if e.from == n {
                        -*f
                    } else {
                        0.0
                    }
                })
                .sum()
        })
        .collect()
}
