use std::collections::{BTreeSet, VecDeque};

use super::{CellGrid, NetworkError, NetworkTopology};

/// A subnetwork hanging off the main network at a single root node.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Subnetwork {
    pub edges: Vec<usize>,
    pub root: usize,
}

/// Partition of the edges into the main network (which receives the plant
/// input) and subnetworks fed by energy densities measured in the main network.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecompositionPlan {
    pub main_edges: Vec<usize>,
    pub subnetworks: Vec<Subnetwork>,
}

impl DecompositionPlan {
    /// The trivial plan: everything belongs to the main network.
    pub fn identity(topology: &NetworkTopology) -> Self {
        DecompositionPlan { main_edges: (0..topology.n_edges()).collect(), subnetworks: Vec::new() }
    }

    pub fn n_parts(&self) -> usize {
        1 + self.subnetworks.len()
    }

    /// Edge lists per part, main network first.
    pub fn parts(&self) -> Vec<&[usize]> {
        std::iter::once(self.main_edges.as_slice()).chain(self.subnetworks.iter().map(|s| s.edges.as_slice())).collect()
    }

    /// Part index of every edge (0 = main network).
    pub fn part_of_edges(&self, n_edges: usize) -> Vec<usize> {
        let mut part = vec![usize::MAX; n_edges];
        for (p, edges) in self.parts().into_iter().enumerate() {
            for &e in edges {
                part[e] = p;
            }
        }
        part
    }

    /// Global cell indices per part, main network first.
    pub fn cell_sets(&self, grid: &CellGrid) -> Vec<Vec<usize>> {
        self.parts()
            .into_iter()
            .map(|edges| {
                let mut cells: Vec<usize> = edges.iter().flat_map(|&e| grid.edge_range(e)).collect();
                cells.sort_unstable();
                cells
            })
            .collect()
    }

    /// Main-network edges whose energy density at the root of subnetwork
    /// `sub` forms the interface input of that subnetwork.
    pub fn interface_edges(&self, topology: &NetworkTopology, sub: usize) -> Vec<usize> {
        let root = self.subnetworks[sub].root;
        let main: BTreeSet<usize> = self.main_edges.iter().copied().collect();
        topology.incidence(root).iter().map(|&(e, _)| e).filter(|e| main.contains(e)).collect()
    }
}

/// Splits the network into the main part and one subnetwork per connected
/// region of `flux_reversal_edges`. Edges that are cut off from the source by
/// a marked region are assigned to that region.
pub fn decompose(topology: &NetworkTopology, flux_reversal_edges: &[usize]) -> Result<DecompositionPlan, NetworkError> {
    let n_edges = topology.n_edges();
    let mut marked = vec![false; n_edges];
    for &e in flux_reversal_edges {
        if e >= n_edges {
            return Err(NetworkError::Decomposition(format!("edge index {e} out of range")));
        }
        marked[e] = true;
        let edge = &topology.edges[e];
        if edge.from == topology.source || edge.to == topology.source {
            return Err(NetworkError::Decomposition(format!(
                "source node lies inside the requested subnetwork (edge {})",
                edge.id
            )));
        }
    }
    if flux_reversal_edges.is_empty() {
        return Ok(DecompositionPlan::identity(topology));
    }

    // main network: unmarked edges reachable from the source through unmarked edges
    let mut in_main = vec![false; n_edges];
    let mut main_node = vec![false; topology.n_nodes()];
    main_node[topology.source] = true;
    let mut queue = VecDeque::from([topology.source]);
    while let Some(n) = queue.pop_front() {
        for &(e, _) in topology.incidence(n) {
            if marked[e] || in_main[e] {
                continue;
            }
            in_main[e] = true;
            let m = topology.other_end(e, n);
            if !main_node[m] {
                main_node[m] = true;
                queue.push_back(m);
            }
        }
    }
    if !in_main.iter().any(|&m| m) {
        return Err(NetworkError::Decomposition("main network is empty".into()));
    }

    let mut assigned = in_main.clone();
    let mut subnetworks = Vec::new();
    for start in 0..n_edges {
        if assigned[start] {
            continue;
        }
        let mut edges = Vec::new();
        let mut roots = BTreeSet::new();
        let mut stack = vec![start];
        assigned[start] = true;
        while let Some(e) = stack.pop() {
            edges.push(e);
            for node in [topology.edges[e].from, topology.edges[e].to] {
                if main_node[node] {
                    roots.insert(node);
                    continue;
                }
                for &(f, _) in topology.incidence(node) {
                    if !assigned[f] {
                        assigned[f] = true;
                        stack.push(f);
                    }
                }
            }
        }
        edges.sort_unstable();
        if roots.len() != 1 {
            return Err(NetworkError::Decomposition(format!(
                "subnetwork containing edge {} attaches to the main network at {} nodes, expected 1",
                topology.edges[start].id,
                roots.len()
            )));
        }
        subnetworks.push(Subnetwork { edges, root: *roots.iter().next().unwrap() });
    }

    Ok(DecompositionPlan { main_edges: (0..n_edges).filter(|&e| in_main[e]).collect(), subnetworks })
}
