use super::{NetworkError, NetworkTopology};

/// Finite-volume cells per edge and the global ordering
/// `f(e, c) = c + Σ_{k<e} n_k` (zero based here).
#[derive(Clone, Debug, PartialEq)]
pub struct CellGrid {
    cells_per_edge: Vec<usize>,
    cell_length: Vec<f64>,
    offsets: Vec<usize>,
}

impl CellGrid {
    pub fn from_counts(topology: &NetworkTopology, counts: Vec<usize>) -> Result<Self, NetworkError> {
        if counts.len() != topology.n_edges() {
            return Err(NetworkError::Cells(format!("{} cell counts for {} edges", counts.len(), topology.n_edges())));
        }
        if let Some(e) = counts.iter().position(|&c| c == 0) {
            return Err(NetworkError::Cells(format!("edge {} has zero cells", topology.edges[e].id)));
        }
        let cell_length = topology.edges.iter().zip(&counts).map(|(e, &n)| e.length / n as f64).collect();
        let mut offsets = Vec::with_capacity(counts.len() + 1);
        offsets.push(0);
        for &n in &counts {
            offsets.push(offsets.last().unwrap() + n);
        }
        Ok(CellGrid { cells_per_edge: counts, cell_length, offsets })
    }

    pub fn uniform(topology: &NetworkTopology, cells: usize) -> Result<Self, NetworkError> {
        Self::from_counts(topology, vec![cells; topology.n_edges()])
    }

    pub fn n_cells(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn n_edges(&self) -> usize {
        self.cells_per_edge.len()
    }

    pub fn cells(&self, edge: usize) -> usize {
        self.cells_per_edge[edge]
    }

    pub fn counts(&self) -> &[usize] {
        &self.cells_per_edge
    }

    /// Cell length `h_i = L_i / n_i`.
    pub fn cell_length(&self, edge: usize) -> f64 {
        self.cell_length[edge]
    }

    /// Global index of cell `cell` (0-based, along the reference orientation) of `edge`.
    pub fn index(&self, edge: usize, cell: usize) -> usize {
        debug_assert!(cell < self.cells_per_edge[edge]);
        self.offsets[edge] + cell
    }

    /// Inverse of [`CellGrid::index`].
    pub fn locate(&self, global: usize) -> (usize, usize) {
        let edge = self.offsets.partition_point(|&o| o <= global) - 1;
        (edge, global - self.offsets[edge])
    }

    pub fn edge_range(&self, edge: usize) -> std::ops::Range<usize> {
        self.offsets[edge]..self.offsets[edge + 1]
    }

    /// CFL-type transport rates `n_i v_i / L_i` for edge velocities `v`.
    pub fn cfl_rates(&self, velocities: &[f64]) -> Vec<f64> {
        velocities.iter().zip(&self.cell_length).map(|(v, h)| v.abs() / h).collect()
    }
}

/// Distributes cells so that all edges share (approximately) the CFL rate of
/// the reference edge: `n_i = max(n_min, round(c_r (L_i/L_r)(v_r/v_i)))`.
///
/// The reference edge is the one with the largest `v_i / L_i`.
pub fn distribute_cells(
    topology: &NetworkTopology,
    reference_cells: usize,
    min_cells: usize,
    velocities: &[f64],
) -> Result<CellGrid, NetworkError> {
    if min_cells < 1 || reference_cells < min_cells {
        return Err(NetworkError::Cells(format!(
            "need c_r >= n_min >= 1, got c_r={reference_cells}, n_min={min_cells}"
        )));
    }
    if velocities.len() != topology.n_edges() {
        return Err(NetworkError::Cells("one reference velocity per edge required".into()));
    }
    if let Some(e) = velocities.iter().position(|v| !(v.abs() > 0.0) || !v.is_finite()) {
        return Err(NetworkError::Cells(format!(
            "reference velocity of edge {} is {}",
            topology.edges[e].id, velocities[e]
        )));
    }
    let rate = |e: usize| velocities[e].abs() / topology.edges[e].length;
    let r = (0..topology.n_edges()).max_by(|&a, &b| rate(a).total_cmp(&rate(b))).unwrap();
    let (l_r, v_r) = (topology.edges[r].length, velocities[r].abs());
    let counts = topology
        .edges
        .iter()
        .zip(velocities)
        .map(|(e, v)| cell_count(reference_cells, min_cells, e.length, l_r, v.abs(), v_r))
        .collect();
    CellGrid::from_counts(topology, counts)
}

/// Cell count of one edge relative to a reference edge.
pub fn cell_count(
    reference_cells: usize,
    min_cells: usize,
    length: f64,
    reference_length: f64,
    velocity: f64,
    reference_velocity: f64,
) -> usize {
    let n = (reference_cells as f64 * (length / reference_length) * (reference_velocity / velocity)).round();
    (n as usize).max(min_cells)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::fixtures;

    #[test]
    fn reference_edge_gets_reference_count() {
        let t = fixtures::series_path(1, 0.1, 100.0);
        let g = distribute_cells(&t, 5, 1, &[0.3]).unwrap();
        assert_eq!(g.cells(0), 5);
    }

    #[test]
    fn formula_floors_at_min_cells() {
        // L_i = L_r/10 at the reference velocity: round(0.5) = 1 -> floored to 2
        assert_eq!(cell_count(5, 2, 10.0, 100.0, 1.0, 1.0), 2);
        assert_eq!(cell_count(5, 1, 100.0, 100.0, 1.0, 1.0), 5);
    }

    #[test]
    fn slower_edges_receive_more_cells() {
        let t = fixtures::series_path(2, 0.1, 100.0);
        // edge 0 is faster and becomes the reference
        let g = distribute_cells(&t, 4, 1, &[0.4, 0.1]).unwrap();
        assert_eq!((g.cells(0), g.cells(1)), (4, 16));
        let rates = g.cfl_rates(&[0.4, 0.1]);
        assert!((rates[0] - rates[1]).abs() < 1e-12);
    }

    #[test]
    fn zero_velocity_rejected() {
        let t = fixtures::series_path(1, 0.1, 100.0);
        assert!(distribute_cells(&t, 5, 1, &[0.0]).is_err());
    }

    #[test]
    fn ordering_is_bijective() {
        let t = fixtures::series_path(4, 0.1, 100.0);
        let g = CellGrid::from_counts(&t, vec![3, 1, 4, 2]).unwrap();
        let mut seen = vec![false; g.n_cells()];
        for e in 0..4 {
            for c in 0..g.cells(e) {
                let i = g.index(e, c);
                assert!(!seen[i]);
                seen[i] = true;
                assert_eq!(g.locate(i), (e, c));
            }
        }
        assert!(seen.into_iter().all(|s| s));
    }
}
