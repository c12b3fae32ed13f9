//! Synthetic network generators used as fixtures.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Consumer, Label, NetworkTopology, PipeEdge};

/// Default friction factor of generated pipes.
pub const DEFAULT_FRICTION: f64 = 0.025;

struct Builder {
    nodes: Vec<Label>,
    edges: Vec<PipeEdge>,
    consumers: Vec<Consumer>,
}

impl Builder {
    fn new() -> Self {
        Builder { nodes: Vec::new(), edges: Vec::new(), consumers: Vec::new() }
    }

    fn node(&mut self, name: impl Into<String>) -> usize {
        self.nodes.push(Label::Str(name.into()));
        self.nodes.len() - 1
    }

    fn pipe(&mut self, from: usize, to: usize, length: f64, diameter: f64) -> usize {
        let id = Label::Str(format!("p{}", self.edges.len()));
        self.edges.push(PipeEdge {
            id,
            from,
            to,
            length,
            diameter,
            friction: DEFAULT_FRICTION,
            heat_transfer: 0.0,
            height_delta: 0.0,
        });
        self.edges.len() - 1
    }

    fn house(&mut self, junction: usize, length: f64, diameter: f64) -> usize {
        let h = self.node(format!("house{}", self.consumers.len()));
        let e = self.pipe(junction, h, length, diameter);
        self.consumers.push(Consumer { id: Label::Str(format!("h{}", self.consumers.len())), edge: e });
        e
    }

    fn build(self, source: usize) -> NetworkTopology {
        NetworkTopology::new(self.nodes, self.edges, self.consumers, source).expect("generated fixture is valid")
    }
}

/// Chain of `n` identical pipes from the source to a single house.
pub fn series_path(n: usize, diameter: f64, length: f64) -> NetworkTopology {
    assert!(n >= 1);
    let mut b = Builder::new();
    let mut prev = b.node("S");
    for i in 0..n - 1 {
        let next = b.node(format!("J{i}"));
        b.pipe(prev, next, length, diameter);
        prev = next;
    }
    b.house(prev, length, diameter);
    b.build(0)
}

/// Two parallel pipes from the source to a junction feeding one house.
/// Edges 0 and 1 are the parallel branches, edge 2 the house connection.
pub fn parallel_pipes(length_a: f64, length_b: f64, diameter: f64) -> NetworkTopology {
    let mut b = Builder::new();
    let s = b.node("S");
    let j = b.node("J");
    b.pipe(s, j, length_a, diameter);
    b.pipe(s, j, length_b, diameter);
    b.house(j, 10.0, diameter / 2.0);
    b.build(s)
}

/// Parameters of the synthetic street: a main line with two houses per
/// junction and one bypass pipe forming a loop.
#[derive(Clone, Debug)]
pub struct StreetParams {
    pub segments: usize,
    pub houses_per_junction: usize,
    /// Junction indices (1-based along the main line) joined by the bypass.
    pub loop_span: Option<(usize, usize)>,
    pub segment_length: (f64, f64),
    pub service_length: (f64, f64),
    pub service_diameter: f64,
    /// Velocity used to size main-line diameters at nominal demand.
    pub design_velocity: f64,
    /// Nominal volume flow per house in m³/s.
    pub house_flow: f64,
}

impl Default for StreetParams {
    /// 16 junctions with 2 houses each (32 consumers) and one loop.
    fn default() -> Self {
        StreetParams {
            segments: 16,
            houses_per_junction: 2,
            loop_span: Some((4, 12)),
            segment_length: (25.0, 35.0),
            service_length: (8.0, 16.0),
            service_diameter: 0.02,
            design_velocity: 0.3,
            house_flow: 2.5e-5,
        }
    }
}

impl StreetParams {
    /// A short loop-free street with `segments` junctions.
    pub fn small(segments: usize) -> Self {
        StreetParams { segments, loop_span: None, ..Self::default() }
    }
}

/// Synthetic street network. Main-line diameters are tapered so that the
/// design velocity is met at nominal demand.
pub fn street(params: &StreetParams, seed: u64) -> NetworkTopology {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = Builder::new();
    let s = b.node("S");
    let mut junctions = vec![s];
    let diameter_for = |flow: f64| (4.0 * flow / (std::f64::consts::PI * params.design_velocity)).sqrt();
    let n_houses = params.segments * params.houses_per_junction;
    for k in 1..=params.segments {
        let j = b.node(format!("M{k}"));
        let downstream = (params.segments - k + 1) * params.houses_per_junction;
        let len = rng.random_range(params.segment_length.0..=params.segment_length.1);
        b.pipe(junctions[k - 1], j, len, diameter_for(downstream as f64 * params.house_flow));
        junctions.push(j);
    }
    for k in 1..=params.segments {
        for _ in 0..params.houses_per_junction {
            let len = rng.random_range(params.service_length.0..=params.service_length.1);
            b.house(junctions[k], len, params.service_diameter);
        }
    }
    if let Some((a, c)) = params.loop_span {
        assert!(a < c && c <= params.segments);
        let len = (c - a) as f64 * 0.5 * (params.segment_length.0 + params.segment_length.1) * 1.2;
        let flow = (n_houses - a * params.houses_per_junction) as f64 * params.house_flow * 0.4;
        b.pipe(junctions[a], junctions[c], len, diameter_for(flow));
    }
    b.build(s)
}

/// District fixture: a main street with `branches` side streets, each a small
/// street hanging off a distinct main junction. Returns the topology and the
/// edge sets of the side streets.
pub fn district(branches: usize, seed: u64) -> (NetworkTopology, Vec<Vec<usize>>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = StreetParams::default();
    let mut b = Builder::new();
    let s = b.node("S");
    let main_segments = 2 * branches + 2;
    let houses_per_branch = 6;
    let total_houses = main_segments + branches * houses_per_branch;
    let diameter_for = |flow: f64| (4.0 * flow / (std::f64::consts::PI * p.design_velocity)).sqrt();
    let mut junctions = vec![s];
    let mut served = 0usize;
    for k in 1..=main_segments {
        let j = b.node(format!("M{k}"));
        let remaining = total_houses - served;
        let len = rng.random_range(p.segment_length.0..=p.segment_length.1);
        b.pipe(junctions[k - 1], j, len, diameter_for(remaining as f64 * p.house_flow));
        junctions.push(j);
        served += 1;
        if k % 2 == 0 && k / 2 <= branches {
            served += houses_per_branch;
        }
    }
    for k in 1..=main_segments {
        let len = rng.random_range(p.service_length.0..=p.service_length.1);
        b.house(junctions[k], len, p.service_diameter);
    }
    let mut branch_edges = Vec::new();
    for br in 0..branches {
        let root = junctions[2 * (br + 1)];
        let mut edges = Vec::new();
        let mut prev = root;
        let n_j = houses_per_branch / 2;
        let mut local = Vec::new();
        for k in 0..n_j {
            let j = b.node(format!("B{br}_{k}"));
            let len = rng.random_range(p.segment_length.0..=p.segment_length.1);
            let flow = ((n_j - k) * 2) as f64 * p.house_flow;
            edges.push(b.pipe(prev, j, len, diameter_for(flow)));
            local.push(j);
            prev = j;
        }
        for &j in &local {
            for _ in 0..2 {
                let len = rng.random_range(p.service_length.0..=p.service_length.1);
                edges.push(b.house(j, len, p.service_diameter));
            }
        }
        // closing loop inside the branch, between its first and last junction
        let len = 2.5 * p.segment_length.1;
        edges.push(b.pipe(local[0], local[n_j - 1], len, diameter_for(2.0 * p.house_flow)));
        edges.sort_unstable();
        branch_edges.push(edges);
    }
    (b.build(s), branch_edges)
}

/// Random connected network with up to `max_edges` edges and `max_loops`
/// independent cycles. Reference orientations of non-house edges are random.
pub fn random_network<R: Rng>(rng: &mut R, max_edges: usize, max_loops: usize) -> NetworkTopology {
    assert!(max_edges >= 2);
    let mut b = Builder::new();
    let s = b.node("S");
    let max_junctions = (max_edges / 2).max(2);
    let n_junctions = rng.random_range(2..=max_junctions);
    let mut children = vec![0usize; n_junctions];
    let mut junctions = vec![s];
    let random_pipe = |b: &mut Builder, rng: &mut R, a: usize, c: usize| {
        let (from, to) = if rng.random_bool(0.5) { (a, c) } else { (c, a) };
        let len = rng.random_range(10.0..200.0);
        let d = rng.random_range(0.02..0.2);
        let e = b.pipe(from, to, len, d);
        b.edges[e].friction = rng.random_range(0.01..0.04);
    };
    for i in 1..n_junctions {
        let j = b.node(format!("J{i}"));
        let parent = rng.random_range(0..i);
        children[parent] += 1;
        random_pipe(&mut b, rng, junctions[parent], j);
        junctions.push(j);
    }
    let mut budget = max_edges.saturating_sub(b.edges.len());
    // every dead end needs a house
    let mut house_at: Vec<usize> = (1..n_junctions).filter(|&i| children[i] == 0).collect();
    for i in 1..n_junctions {
        if children[i] > 0 && house_at.len() < budget && rng.random_bool(0.4) {
            house_at.push(i);
        }
    }
    if house_at.is_empty() {
        house_at.push(n_junctions - 1);
    }
    for &i in &house_at {
        let len = rng.random_range(5.0..40.0);
        let d = rng.random_range(0.015..0.05);
        b.house(junctions[i], len, d);
    }
    budget = max_edges.saturating_sub(b.edges.len());
    let n_loops = rng.random_range(0..=max_loops.min(budget));
    for _ in 0..n_loops {
        let a = rng.random_range(0..n_junctions);
        let mut c = rng.random_range(0..n_junctions);
        while c == a {
            c = rng.random_range(0..n_junctions);
        }
        random_pipe(&mut b, rng, junctions[a], junctions[c]);
    }
    b.build(s)
}

/// Convenience wrapper seeding [`random_network`].
pub fn random_network_seeded(seed: u64, max_edges: usize, max_loops: usize) -> NetworkTopology {
    random_network(&mut ChaCha8Rng::seed_from_u64(seed), max_edges, max_loops)
}

/// Typical constant house demands in W, uniformly drawn from `range`.
pub fn typical_demands(topology: &NetworkTopology, seed: u64, range: (f64, f64)) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    (0..topology.n_consumers()).map(|_| rng.random_range(range.0..=range.1)).collect()
}
