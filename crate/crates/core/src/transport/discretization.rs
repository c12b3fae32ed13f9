use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use super::{assemble_upwind, build_energy_matrix, to_coenergy, AffineOperator, CoEnergyForm, EnergyMatrix};
use super::{SignPattern, TransportError, TransportOptions};
use crate::network::{CellGrid, FlowBasis, NetworkError, NetworkTopology};

type Assembled = Arc<(AffineOperator, CoEnergyForm)>;

/// A network together with its cell grid: everything needed to assemble
/// operators for any sign pattern. Assembled operators are cached per
/// pattern and shared between threads.
#[derive(Debug)]
pub struct Discretization {
    pub topology: NetworkTopology,
    pub basis: FlowBasis,
    pub grid: CellGrid,
    pub energy: EnergyMatrix,
    pub options: TransportOptions,
    cache: RwLock<HashMap<SignPattern, Assembled>>,
}

impl Clone for Discretization {
    fn clone(&self) -> Self {
        Discretization {
            topology: self.topology.clone(),
            basis: self.basis.clone(),
            grid: self.grid.clone(),
            energy: self.energy.clone(),
            options: self.options.clone(),
            cache: RwLock::new(self.cache.read().expect("cache lock").clone()),
        }
    }
}

impl Discretization {
    pub fn new(topology: NetworkTopology, grid: CellGrid, options: TransportOptions) -> Result<Self, NetworkError> {
        if grid.n_edges() != topology.n_edges() {
            return Err(NetworkError::Cells("grid does not match the topology".into()));
        }
        let basis = crate::network::build_flow_basis(&topology)?;
        let energy = build_energy_matrix(&grid, &topology);
        Ok(Discretization { topology, basis, grid, energy, options, cache: RwLock::new(HashMap::new()) })
    }

    pub fn n_cells(&self) -> usize {
        self.grid.n_cells()
    }

    fn assembled(&self, pattern: &SignPattern) -> Result<Assembled, TransportError> {
        if let Some(a) = self.cache.read().expect("cache lock").get(pattern) {
            return Ok(a.clone());
        }
        let op = assemble_upwind(&self.topology, &self.grid, pattern, &self.options)?;
        let form = to_coenergy(&op, &self.energy);
        let entry = Arc::new((op, form));
        self.cache.write().expect("cache lock").insert(pattern.clone(), entry.clone());
        Ok(entry)
    }

    /// Physical operator family for `pattern`.
    pub fn operator(&self, pattern: &SignPattern) -> Result<Arc<(AffineOperator, CoEnergyForm)>, TransportError> {
        self.assembled(pattern)
    }

    /// Number of distinct sign patterns assembled so far.
    pub fn assembled_patterns(&self) -> usize {
        self.cache.read().expect("cache lock").len()
    }
}
