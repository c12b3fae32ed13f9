use nalgebra::DMatrix;

use super::{AffineOperator, TransportError};
use crate::linalg::{max_symmetric_eigenvalue, Csr};
use crate::network::{CellGrid, FlowBasis, NetworkTopology};

/// Largest dimension for which dense eigen- and singular value
/// decompositions are used by [`check_lyapunov`].
const DENSE_LIMIT: usize = 1500;

/// Diagonal energy matrix with the cell volumes `Φ_i h_i` on the diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct EnergyMatrix {
    diag: Vec<f64>,
}

impl EnergyMatrix {
    pub fn from_diagonal(diag: Vec<f64>) -> Self {
        assert!(diag.iter().all(|&d| d > 0.0), "energy matrix must be positive");
        EnergyMatrix { diag }
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn trace(&self) -> f64 {
        self.diag.iter().sum()
    }

    /// Diagonal of the co-energy scaling `L = Q^{-1/2}`.
    pub fn scaling(&self) -> Vec<f64> {
        self.diag.iter().map(|q| 1.0 / q.sqrt()).collect()
    }

    /// Diagonal of `L^{-1} = Q^{1/2}`.
    pub fn inverse_scaling(&self) -> Vec<f64> {
        self.diag.iter().map(|q| q.sqrt()).collect()
    }
}

pub fn build_energy_matrix(grid: &CellGrid, topology: &NetworkTopology) -> EnergyMatrix {
    let mut diag = vec![0.0; grid.n_cells()];
    for (i, edge) in topology.edges.iter().enumerate() {
        let volume = edge.cross_section() * grid.cell_length(i);
        for k in grid.edge_range(i) {
            diag[k] = volume;
        }
    }
    EnergyMatrix::from_diagonal(diag)
}

/// Result of the Lyapunov inequality check `M = Q A + Aᵀ Q ≤ 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct LyapunovReport {
    /// Largest eigenvalue of `M` (or its Gershgorin bound if not `exact`).
    pub lambda_max: f64,
    pub exact: bool,
    /// `‖Q A‖₂` (Frobenius bound if not `exact`).
    pub norm_qa: f64,
    /// Largest diagonal entry of `M`.
    pub max_diagonal: f64,
    /// `min_i |M_ii| - Σ_{j≠i} |M_ij|` over rows.
    pub dominance_margin: f64,
    /// Largest absolute entry of `M`, the scale for the audit tolerances.
    pub scale: f64,
}

impl LyapunovReport {
    /// Non-positive diagonal and weak diagonal dominance up to round-off.
    pub fn audit_passes(&self) -> bool {
        let tol = 1e-12 * self.scale.max(f64::MIN_POSITIVE);
        self.max_diagonal <= tol && self.dominance_margin >= -tol
    }

    /// `λ_max(M) ≤ rel_tol · ‖QA‖₂`.
    pub fn is_stable(&self, rel_tol: f64) -> bool {
        self.lambda_max <= rel_tol * self.norm_qa
    }
}

pub fn check_lyapunov(a: &Csr, q: &EnergyMatrix) -> Result<LyapunovReport, TransportError> {
    let n = a.n_rows();
    if q.len() != n || a.n_cols() != n {
        return Err(TransportError::Dimension(format!("A is {}x{}, Q has {} entries", n, a.n_cols(), q.len())));
    }
    let d = q.diagonal();
    let mut triplets = Vec::with_capacity(2 * a.nnz());
    let mut qa = Vec::with_capacity(a.nnz());
    for (r, c, v) in a.triplets() {
        let w = d[r] * v;
        qa.push((r, c, w));
        triplets.push((r, c, w));
        triplets.push((c, r, w));
    }
    let m = Csr::from_triplets(n, n, &triplets);
    let qa = Csr::from_triplets(n, n, &qa);

    let mut max_diagonal = f64::NEG_INFINITY;
    let mut dominance_margin = f64::INFINITY;
    let mut gershgorin = f64::NEG_INFINITY;
    for r in 0..n {
        let (mut diag, mut off) = (0.0, 0.0);
        for (c, v) in m.row(r) {
            if c == r {
                diag += v;
            } else {
                off += v.abs();
            }
        }
        max_diagonal = max_diagonal.max(diag);
        dominance_margin = dominance_margin.min(diag.abs() - off);
        gershgorin = gershgorin.max(diag + off);
    }
    if n == 0 {
        max_diagonal = 0.0;
        dominance_margin = 0.0;
        gershgorin = 0.0;
    }

    let exact = n <= DENSE_LIMIT;
    let (lambda_max, norm_qa) = if exact {
        (max_symmetric_eigenvalue(&m.to_dense()), power_norm(&qa))
    } else {
        (gershgorin, qa.values().iter().map(|v| v * v).sum::<f64>().sqrt())
    };
    Ok(LyapunovReport { lambda_max, exact, norm_qa, max_diagonal, dominance_margin, scale: m.max_abs() })
}

/// `‖A‖₂` by power iteration on `AᵀA`. Never overestimates, so tolerances
/// relative to it stay conservative.
fn power_norm(a: &Csr) -> f64 {
    let n = a.n_cols();
    if n == 0 || a.nnz() == 0 {
        return 0.0;
    }
    let mut x: Vec<f64> = (0..n).map(|i| 1.0 + 0.37 * ((i * 7919) % 13) as f64).collect();
    let mut y = vec![0.0; a.n_rows()];
    let mut estimate = 0.0;
    for _ in 0..300 {
        let nx = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        x.iter_mut().for_each(|v| *v /= nx);
        a.matvec(&x, &mut y);
        let next = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        // x <- Aᵀ y
        x.iter_mut().for_each(|v| *v = 0.0);
        for (r, c, v) in a.triplets() {
            x[c] += v * y[r];
        }
        if (next - estimate).abs() <= 1e-10 * next {
            return next;
        }
        estimate = next;
    }
    estimate
}

/// Checks the preconditions of the energy inequality on raw edge flows: volume
/// conservation at every junction and non-negative consumer flows.
pub fn audit_flows(topology: &NetworkTopology, basis: &FlowBasis, edge_flows: &[f64]) -> Result<(), TransportError> {
    let scale = edge_flows.iter().fold(0.0f64, |m, f| m.max(f.abs()));
    let houses: Vec<usize> = basis.consumer_edges.iter().map(|&e| topology.edges[e].to).collect();
    for node in 0..topology.n_nodes() {
        if node == topology.source || houses.contains(&node) {
            continue;
        }
        let residual: f64 = topology.incidence(node).iter().map(|&(e, s)| s as f64 * edge_flows[e]).sum();
        if residual.abs() > 1e-12 * scale.max(f64::MIN_POSITIVE) {
            return Err(TransportError::NonConservative { node: topology.nodes[node].to_string(), residual });
        }
    }
    for (h, c) in topology.consumers.iter().enumerate() {
        let flow = edge_flows[basis.consumer_edges[h]];
        if flow < -1e-12 * scale {
            return Err(TransportError::NegativeConsumerFlow { consumer: c.id.to_string(), flow });
        }
    }
    Ok(())
}

/// Operator family in co-energy coordinates `e = L⁻¹ φ`:
/// `Aᵉ_i = L⁻¹ A_i L`, `Bᵉ_i = L⁻¹ B_i`, `Cᵉ = C L`.
#[derive(Clone, Debug)]
pub struct CoEnergyForm {
    pub operator: AffineOperator,
    /// Diagonal of `L⁻¹ = Q^{1/2}`.
    pub inverse_scaling: Vec<f64>,
}

impl CoEnergyForm {
    /// Co-energy coordinates of a physical state.
    pub fn to_coenergy_state(&self, phi: &[f64]) -> Vec<f64> {
        phi.iter().zip(&self.inverse_scaling).map(|(p, s)| p * s).collect()
    }

    pub fn to_physical_state(&self, e: &[f64]) -> Vec<f64> {
        e.iter().zip(&self.inverse_scaling).map(|(v, s)| v / s).collect()
    }

    /// Co-energy image of the constant state `1`, the steady state of a
    /// lossless network under unit input.
    pub fn constant_direction(&self) -> Vec<f64> {
        self.inverse_scaling.clone()
    }

    /// Dense `Aᵉ(q) + Aᵉ(q)ᵀ` for small systems.
    pub fn symmetric_part(a: &Csr) -> DMatrix<f64> {
        let d = a.to_dense();
        &d + d.transpose()
    }
}

pub fn to_coenergy(operator: &AffineOperator, q: &EnergyMatrix) -> CoEnergyForm {
    let l = q.scaling();
    let l_inv = q.inverse_scaling();
    CoEnergyForm { operator: operator.scaled(&l_inv, &l), inverse_scaling: l_inv }
}
