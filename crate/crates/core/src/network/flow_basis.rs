use std::collections::VecDeque;

use nalgebra::DMatrix;
use rand::Rng;

use super::{NetworkError, NetworkTopology};
use crate::hydraulics::WATER_DENSITY;

/// One fundamental cycle: the chord plus the tree path closing it, with the
/// sign of each edge relative to the cycle direction (the chord orientation).
#[derive(Clone, Debug, PartialEq)]
pub struct FundamentalCycle {
    pub chord: usize,
    pub edges: Vec<(usize, f64)>,
}

/// Parameterisation of all edge flows by `L = H + cycles` independent flows.
///
/// Independent flows are ordered consumers first, then one circulation per
/// fundamental cycle. `edge_flow` maps them to signed edge volume flows
/// (`Φ_i v_i`, relative to the edge reference orientation) and `k` to edge
/// velocities.
#[derive(Clone, Debug)]
pub struct FlowBasis {
    pub edge_flow: DMatrix<f64>,
    pub k: DMatrix<f64>,
    /// Sparse columns of `edge_flow`.
    pub columns: Vec<Vec<(usize, f64)>>,
    /// Sparse rows of `edge_flow`.
    pub rows: Vec<Vec<(usize, f64)>>,
    pub tree_parent: Vec<Option<usize>>,
    pub cycles: Vec<FundamentalCycle>,
    /// `(L-H) x E` loop friction matrix acting on `[v_i |v_i|]`, in Pa.
    pub loop_matrix: DMatrix<f64>,
    pub consumer_edges: Vec<usize>,
    cross_sections: Vec<f64>,
}

pub fn build_flow_basis(topology: &NetworkTopology) -> Result<FlowBasis, NetworkError> {
    let n_nodes = topology.n_nodes();
    let n_edges = topology.n_edges();
    for n in 0..n_nodes {
        if topology.incidence(n).is_empty() {
            return Err(NetworkError::IsolatedNode(topology.nodes[n].to_string()));
        }
    }

    // BFS spanning tree rooted at the source
    let mut parent: Vec<Option<usize>> = vec![None; n_nodes];
    let mut depth = vec![usize::MAX; n_nodes];
    let mut in_tree = vec![false; n_edges];
    depth[topology.source] = 0;
    let mut queue = VecDeque::from([topology.source]);
    while let Some(n) = queue.pop_front() {
        for &(e, _) in topology.incidence(n) {
            let m = topology.other_end(e, n);
            if depth[m] == usize::MAX {
                depth[m] = depth[n] + 1;
                parent[m] = Some(e);
                in_tree[e] = true;
                queue.push_back(m);
            }
        }
    }
    if let Some(n) = depth.iter().position(|&d| d == usize::MAX) {
        return Err(NetworkError::Disconnected(topology.nodes[n].to_string()));
    }

    let parent_node = |child: usize| -> usize {
        let e = parent[child].expect("non-root node has a tree parent");
        topology.other_end(e, child)
    };
    // sign of edge `e` when traversed from node `a` to its other end
    let travel_sign = |e: usize, a: usize| -> f64 {
        if topology.edges[e].from == a {
            1.0
        } else {
            -1.0
        }
    };

    let n_consumers = topology.n_consumers();
    let mut columns: Vec<Vec<(usize, f64)>> = Vec::new();

    for c in &topology.consumers {
        let mut col = Vec::new();
        let mut node = topology.edges[c.edge].to;
        while node != topology.source {
            let e = parent[node].unwrap();
            let p = parent_node(node);
            col.push((e, travel_sign(e, p)));
            node = p;
        }
        col.reverse();
        columns.push(col);
    }

    let mut cycles = Vec::new();
    for chord in (0..n_edges).filter(|&e| !in_tree[e]) {
        let (a, b) = (topology.edges[chord].from, topology.edges[chord].to);
        let mut edges = vec![(chord, 1.0)];
        // walk b -> lca upwards and a -> lca upwards
        let (mut x, mut y) = (b, a);
        let mut down = Vec::new();
        while x != y {
            if depth[x] >= depth[y] {
                let e = parent[x].unwrap();
                edges.push((e, travel_sign(e, x)));
                x = parent_node(x);
            } else {
                let e = parent[y].unwrap();
                let p = parent_node(y);
                down.push((e, travel_sign(e, p)));
                y = p;
            }
        }
        down.reverse();
        edges.extend(down);
        columns.push(edges.clone());
        cycles.push(FundamentalCycle { chord, edges });
    }

    let n_flows = columns.len();
    debug_assert_eq!(n_flows, topology.n_flows());
    let mut edge_flow = DMatrix::zeros(n_edges, n_flows);
    let mut rows = vec![Vec::new(); n_edges];
    for (j, col) in columns.iter().enumerate() {
        for &(e, s) in col {
            edge_flow[(e, j)] += s;
        }
    }
    for e in 0..n_edges {
        for j in 0..n_flows {
            if edge_flow[(e, j)] != 0.0 {
                rows[e].push((j, edge_flow[(e, j)]));
            }
        }
    }
    let cross_sections: Vec<f64> = topology.edges.iter().map(|e| e.cross_section()).collect();
    let mut k = edge_flow.clone();
    for e in 0..n_edges {
        k.row_mut(e).scale_mut(1.0 / cross_sections[e]);
    }

    let mut loop_matrix = DMatrix::zeros(cycles.len(), n_edges);
    for (l, cyc) in cycles.iter().enumerate() {
        for &(e, s) in &cyc.edges {
            let edge = &topology.edges[e];
            loop_matrix[(l, e)] += s * edge.friction * WATER_DENSITY * edge.length / (2.0 * edge.diameter);
        }
    }

    Ok(FlowBasis {
        edge_flow,
        k,
        columns,
        rows,
        tree_parent: parent,
        cycles,
        loop_matrix,
        consumer_edges: topology.consumers.iter().map(|c| c.edge).collect(),
        cross_sections,
    })
    .map(|b| {
        debug_assert_eq!(b.n_consumers(), n_consumers);
        b
    })
}

impl FlowBasis {
    pub fn n_flows(&self) -> usize {
        self.columns.len()
    }

    pub fn n_consumers(&self) -> usize {
        self.consumer_edges.len()
    }

    pub fn n_loops(&self) -> usize {
        self.cycles.len()
    }

    pub fn n_edges(&self) -> usize {
        self.rows.len()
    }

    pub fn cross_sections(&self) -> &[f64] {
        &self.cross_sections
    }

    /// Random independent flows: consumer flows uniform in `[0.2, 1]·scale`
    /// and circulations uniform in `±loop_share · Σ consumer flows`. Large
    /// `loop_share` reverses edges on the loops. Edge flows are conservative by
    /// construction.
    pub fn random_flows<R: Rng + ?Sized>(&self, rng: &mut R, scale: f64, loop_share: f64) -> Vec<f64> {
        let h = self.n_consumers();
        let mut q: Vec<f64> = (0..h).map(|_| scale * rng.random_range(0.2..=1.0)).collect();
        let total: f64 = q.iter().sum();
        let bound = loop_share * total;
        q.extend((0..self.n_loops()).map(|_| if bound > 0.0 { rng.random_range(-bound..=bound) } else { 0.0 }));
        q
    }

    /// Signed edge volume flows `Φ_i v_i` for independent flows `q`.
    pub fn edge_flows(&self, q: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n_edges()];
        self.edge_flows_into(q, &mut out);
        out
    }

    pub fn edge_flows_into(&self, q: &[f64], out: &mut [f64]) {
        assert_eq!(q.len(), self.n_flows(), "flow vector length");
        for (e, row) in self.rows.iter().enumerate() {
            out[e] = row.iter().map(|&(j, s)| s * q[j]).sum();
        }
    }

    /// Edge velocities `v = K q`.
    pub fn velocities(&self, q: &[f64]) -> Vec<f64> {
        let mut v = self.edge_flows(q);
        for (vi, a) in v.iter_mut().zip(&self.cross_sections) {
            *vi /= a;
        }
        v
    }

    /// Volume imbalance (inflow minus outflow) at every junction, i.e. every
    /// node that is neither the source nor a consumer house.
    pub fn node_imbalance(&self, topology: &NetworkTopology, edge_flows: &[f64]) -> Vec<f64> {
        let houses: Vec<usize> = self.consumer_edges.iter().map(|&e| topology.edges[e].to).collect();
        (0..topology.n_nodes())
            .filter(|n| *n != topology.source && !houses.contains(n))
            .map(|n| topology.incidence(n).iter().map(|&(e, s)| -(s as f64) * edge_flows[e]).sum())
            .collect()
    }
}
