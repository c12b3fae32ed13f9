use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{TransportError, GROUND_TEMPERATURE, VOLUMETRIC_HEAT_CAPACITY};
use crate::linalg::{topological_order, Csr};
use crate::network::{CellGrid, FlowBasis, NetworkTopology};

/// Flow orientation per edge: `+1` along the reference orientation, `-1`
/// against it. Stagnant edges keep `+1`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SignPattern(Vec<i8>);

impl SignPattern {
    pub fn reference(n_edges: usize) -> Self {
        SignPattern(vec![1; n_edges])
    }

    /// Pattern of the given edge flows. Flows below `1e-12 · max|flow|` in
    /// magnitude count as stagnant.
    pub fn from_flows(edge_flows: &[f64]) -> Self {
        let tol = 1e-12 * edge_flows.iter().fold(0.0f64, |m, f| m.max(f.abs()));
        SignPattern(edge_flows.iter().map(|&f| if f < -tol { -1 } else { 1 }).collect())
    }

    pub fn from_signs(signs: Vec<i8>) -> Self {
        assert!(signs.iter().all(|s| *s == 1 || *s == -1), "signs must be +-1");
        SignPattern(signs)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn sign(&self, edge: usize) -> f64 {
        self.0[edge] as f64
    }

    pub fn signs(&self) -> &[i8] {
        &self.0
    }

    /// Edges whose flow points against the pattern beyond round-off.
    pub fn mismatches(&self, edge_flows: &[f64]) -> Vec<usize> {
        let tol = 1e-12 * edge_flows.iter().fold(0.0f64, |m, f| m.max(f.abs()));
        (0..self.0.len()).filter(|&e| self.sign(e) * edge_flows[e] < -tol).collect()
    }

    pub fn reversed_edges(&self) -> Vec<usize> {
        (0..self.0.len()).filter(|&e| self.0[e] < 0).collect()
    }
}

impl std::fmt::Display for SignPattern {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for s in &self.0 {
            f.write_str(if *s > 0 { "+" } else { "-" })?;
        }
        Ok(())
    }
}

/// Source of an incoming flow at a junction.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Inflow {
    Edge(usize),
    Plant,
}

/// Scalar weight function `f_i` of the affine decomposition, evaluated from
/// the signed edge volume flows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Weight {
    Constant,
    /// Oriented flow `sign · q_edge`.
    EdgeFlow {
        edge: usize,
        sign: f64,
    },
    /// Net volume flow leaving the source, i.e. the plant flow.
    PlantFlow {
        incidence: Vec<(usize, f64)>,
    },
    /// `w_out · w_in / Σ w_outflows` at a junction with several inflows and
    /// several outflows.
    Mix {
        node: usize,
        out_edge: (usize, f64),
        inflow: Inflow,
        inflow_sign: f64,
        outflows: Vec<(usize, f64)>,
        plant: Vec<(usize, f64)>,
    },
}

/// Classification used when collapsing weights onto the independent flows.
#[derive(Clone, Debug, PartialEq)]
pub enum WeightKind {
    Constant,
    /// Linear combination of edge flows.
    Linear(Vec<(usize, f64)>),
    Nonlinear,
}

impl Weight {
    pub fn value(&self, edge_flows: &[f64]) -> f64 {
        let lin = |terms: &[(usize, f64)]| terms.iter().map(|&(e, s)| s * edge_flows[e]).sum::<f64>();
        match self {
            Weight::Constant => 1.0,
            Weight::EdgeFlow { edge, sign } => sign * edge_flows[*edge],
            Weight::PlantFlow { incidence } => lin(incidence),
            Weight::Mix { out_edge, inflow, inflow_sign, outflows, plant, .. } => {
                let total = lin(outflows);
                if !(total > 0.0) {
                    return 0.0;
                }
                let w_in = match inflow {
                    Inflow::Edge(j) => inflow_sign * edge_flows[*j],
                    Inflow::Plant => lin(plant),
                };
                out_edge.1 * edge_flows[out_edge.0] * w_in / total
            }
        }
    }

    pub fn kind(&self) -> WeightKind {
        match self {
            Weight::Constant => WeightKind::Constant,
            Weight::EdgeFlow { edge, sign } => WeightKind::Linear(vec![(*edge, *sign)]),
            Weight::PlantFlow { incidence } => WeightKind::Linear(incidence.clone()),
            Weight::Mix { .. } => WeightKind::Nonlinear,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum WeightKey {
    Constant,
    Edge(usize),
    Plant,
    Mix(usize, usize, Inflow),
}

/// One contribution `coef · f_weight(q)` to entry `(row, col)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub row: usize,
    pub col: usize,
    pub weight: usize,
    pub coef: f64,
}

#[derive(Clone, Debug, Default)]
pub struct TransportOptions {
    /// Enable the heat-loss sink `-(4k/(d ρ c_p)) φ + (4k/d) T_e`.
    pub sink: bool,
}

/// Affine operator family `A(q) = Σ f_i(q) A_i`, `B(q) = Σ f_i(q) B_i` with
/// output map `C`, exact for flows compatible with `pattern`.
#[derive(Clone, Debug)]
pub struct AffineOperator {
    n: usize,
    pattern: SignPattern,
    weights: Vec<Weight>,
    a_terms: Vec<Term>,
    b_terms: Vec<Term>,
    output: Csr,
    forcing: Vec<f64>,
    a_shape: Csr,
    a_slots: Vec<usize>,
    order: Option<Vec<usize>>,
    edge_labels: Vec<String>,
}

struct Assembler {
    weights: Vec<Weight>,
    keys: HashMap<WeightKey, usize>,
}

impl Assembler {
    fn weight(&mut self, key: WeightKey, make: impl FnOnce() -> Weight) -> usize {
        if let Some(&i) = self.keys.get(&key) {
            return i;
        }
        self.weights.push(make());
        self.keys.insert(key, self.weights.len() - 1);
        self.weights.len() - 1
    }
}

/// Assembles the upwind operator family for a fixed flow orientation.
pub fn assemble_upwind(
    topology: &NetworkTopology,
    grid: &CellGrid,
    pattern: &SignPattern,
    options: &TransportOptions,
) -> Result<AffineOperator, TransportError> {
    let n_edges = topology.n_edges();
    if grid.n_edges() != n_edges || pattern.len() != n_edges {
        return Err(TransportError::Dimension(format!(
            "grid has {} edges, pattern {}, topology {n_edges}",
            grid.n_edges(),
            pattern.len()
        )));
    }
    for c in &topology.consumers {
        if pattern.sign(c.edge) < 0.0 {
            return Err(TransportError::ReversedConsumer(c.id.to_string()));
        }
    }
    let s = |e: usize| pattern.sign(e);
    let upstream = |e: usize| if s(e) > 0.0 { topology.edges[e].from } else { topology.edges[e].to };
    let downstream = |e: usize| if s(e) > 0.0 { topology.edges[e].to } else { topology.edges[e].from };
    // cell of edge `e` at position `k` counted along the flow direction
    let cell = |e: usize, k: usize| {
        let n = grid.cells(e);
        grid.index(e, if s(e) > 0.0 { k } else { n - 1 - k })
    };

    let mut inflows: Vec<Vec<Inflow>> = vec![Vec::new(); topology.n_nodes()];
    let mut outflows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); topology.n_nodes()];
    for e in 0..n_edges {
        inflows[downstream(e)].push(Inflow::Edge(e));
        outflows[upstream(e)].push((e, s(e)));
    }
    inflows[topology.source].push(Inflow::Plant);
    let plant: Vec<(usize, f64)> =
        topology.incidence(topology.source).iter().map(|&(e, dir)| (e, dir as f64)).collect();

    let mut asm = Assembler { weights: Vec::new(), keys: HashMap::new() };
    let mut a_terms = Vec::new();
    let mut b_terms = Vec::new();
    let mut forcing = vec![0.0; grid.n_cells()];

    for i in 0..n_edges {
        let edge = &topology.edges[i];
        let volume = edge.cross_section() * grid.cell_length(i);
        let coef = 1.0 / volume;
        let own = asm.weight(WeightKey::Edge(i), || Weight::EdgeFlow { edge: i, sign: s(i) });
        for k in 0..grid.cells(i) {
            let row = cell(i, k);
            a_terms.push(Term { row, col: row, weight: own, coef: -coef });
            if k > 0 {
                a_terms.push(Term { row, col: cell(i, k - 1), weight: own, coef });
            }
            if options.sink && edge.heat_transfer > 0.0 {
                let rate = 4.0 * edge.heat_transfer / (edge.diameter * VOLUMETRIC_HEAT_CAPACITY);
                let constant = asm.weight(WeightKey::Constant, || Weight::Constant);
                a_terms.push(Term { row, col: row, weight: constant, coef: -rate });
                forcing[row] = 4.0 * edge.heat_transfer / edge.diameter * GROUND_TEMPERATURE * 1e-9;
            }
        }

        let node = upstream(i);
        let row = cell(i, 0);
        let n_in = inflows[node].len();
        let n_out = outflows[node].len();
        for inflow in inflows[node].clone() {
            let weight = if n_out == 1 {
                match inflow {
                    Inflow::Edge(j) => asm.weight(WeightKey::Edge(j), || Weight::EdgeFlow { edge: j, sign: s(j) }),
                    Inflow::Plant => asm.weight(WeightKey::Plant, || Weight::PlantFlow { incidence: plant.clone() }),
                }
            } else if n_in == 1 {
                own
            } else {
                let key = WeightKey::Mix(node, i, inflow.clone());
                let inflow_sign = match inflow {
                    Inflow::Edge(j) => s(j),
                    Inflow::Plant => 1.0,
                };
                asm.weight(key, || Weight::Mix {
                    node,
                    out_edge: (i, s(i)),
                    inflow: inflow.clone(),
                    inflow_sign,
                    outflows: outflows[node].clone(),
                    plant: plant.clone(),
                })
            };
            match inflow {
                Inflow::Edge(j) => {
                    let col = cell(j, grid.cells(j) - 1);
                    a_terms.push(Term { row, col, weight, coef });
                }
                Inflow::Plant => b_terms.push(Term { row, col: 0, weight, coef }),
            }
        }
    }

    let output_triplets: Vec<(usize, usize, f64)> =
        topology.consumers.iter().enumerate().map(|(h, c)| (h, cell(c.edge, grid.cells(c.edge) - 1), 1.0)).collect();
    let output = Csr::from_triplets(topology.n_consumers(), grid.n_cells(), &output_triplets);

    Ok(AffineOperator::from_parts(
        grid.n_cells(),
        pattern.clone(),
        asm.weights,
        a_terms,
        b_terms,
        output,
        forcing,
        topology.edges.iter().map(|e| e.id.to_string()).collect(),
    ))
}

impl AffineOperator {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn from_parts(
        n: usize,
        pattern: SignPattern,
        weights: Vec<Weight>,
        a_terms: Vec<Term>,
        b_terms: Vec<Term>,
        output: Csr,
        forcing: Vec<f64>,
        edge_labels: Vec<String>,
    ) -> Self {
        let entries: Vec<(usize, usize)> = a_terms.iter().map(|t| (t.row, t.col)).collect();
        let (mut a_shape, a_slots) = Csr::pattern(n, n, &entries);
        for v in a_shape.values_mut() {
            *v = 1.0;
        }
        let order = topological_order(&a_shape);
        for v in a_shape.values_mut() {
            *v = 0.0;
        }
        AffineOperator { n, pattern, weights, a_terms, b_terms, output, forcing, a_shape, a_slots, order, edge_labels }
    }

    pub fn n_states(&self) -> usize {
        self.n
    }

    pub fn n_outputs(&self) -> usize {
        self.output.n_rows()
    }

    /// Number of weight functions `n_f`.
    pub fn n_weights(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[Weight] {
        &self.weights
    }

    pub fn pattern(&self) -> &SignPattern {
        &self.pattern
    }

    pub fn a_terms(&self) -> &[Term] {
        &self.a_terms
    }

    pub fn b_terms(&self) -> &[Term] {
        &self.b_terms
    }

    /// Output map `C` selecting the consumer outlet cells.
    pub fn output_map(&self) -> &Csr {
        &self.output
    }

    /// Constant forcing of the sink term (zero without sink).
    pub fn forcing(&self) -> &[f64] {
        &self.forcing
    }

    /// Row order making `A(q)` triangular, if the flow graph is acyclic.
    pub fn triangular_order(&self) -> Option<&[usize]> {
        self.order.as_deref()
    }

    pub fn check_flows(&self, edge_flows: &[f64]) -> Result<(), TransportError> {
        if edge_flows.len() != self.pattern.len() {
            return Err(TransportError::Dimension(format!(
                "{} edge flows for {} edges",
                edge_flows.len(),
                self.pattern.len()
            )));
        }
        let bad = self.pattern.mismatches(edge_flows);
        if bad.is_empty() {
            Ok(())
        } else {
            Err(TransportError::SignMismatch(bad.into_iter().map(|e| self.edge_labels[e].clone()).collect()))
        }
    }

    pub fn weight_values(&self, edge_flows: &[f64]) -> Vec<f64> {
        self.weights.iter().map(|w| w.value(edge_flows)).collect()
    }

    /// Zero matrix with the sparsity pattern of `A(q)`.
    pub fn empty_matrix(&self) -> Csr {
        self.a_shape.clone()
    }

    /// Evaluates `A(q)` into `a` (which must come from [`Self::empty_matrix`])
    /// and `B(q)` into `b`, given weight values.
    pub fn evaluate_into(&self, weights: &[f64], a: &mut Csr, b: &mut [f64]) {
        let values = a.values_mut();
        values.iter_mut().for_each(|v| *v = 0.0);
        for (t, &slot) in self.a_terms.iter().zip(&self.a_slots) {
            values[slot] += t.coef * weights[t.weight];
        }
        b.iter_mut().for_each(|v| *v = 0.0);
        for t in &self.b_terms {
            b[t.row] += t.coef * weights[t.weight];
        }
    }

    /// Concrete `A(q)`, `B(q)` for signed edge flows.
    pub fn evaluate(&self, edge_flows: &[f64]) -> Result<(Csr, Vec<f64>), TransportError> {
        self.check_flows(edge_flows)?;
        let w = self.weight_values(edge_flows);
        let mut a = self.empty_matrix();
        let mut b = vec![0.0; self.n];
        self.evaluate_into(&w, &mut a, &mut b);
        Ok((a, b))
    }

    /// Concrete operators for independent flows `q`.
    pub fn evaluate_flows(&self, basis: &FlowBasis, q: &[f64]) -> Result<(Csr, Vec<f64>), TransportError> {
        self.evaluate(&basis.edge_flows(q))
    }

    /// Basis matrix `A_i`.
    pub fn basis_matrix(&self, weight: usize) -> Csr {
        let t: Vec<(usize, usize, f64)> =
            self.a_terms.iter().filter(|t| t.weight == weight).map(|t| (t.row, t.col, t.coef)).collect();
        Csr::from_triplets(self.n, self.n, &t)
    }

    /// Basis input vector `B_i`.
    pub fn basis_input(&self, weight: usize) -> Vec<f64> {
        let mut b = vec![0.0; self.n];
        for t in self.b_terms.iter().filter(|t| t.weight == weight) {
            b[t.row] += t.coef;
        }
        b
    }

    /// Diagonal similarity `A ↦ D_l A D_r`, `B ↦ D_l B`, `C ↦ C D_r`,
    /// forcing `↦ D_l F`.
    pub fn scaled(&self, left: &[f64], right: &[f64]) -> AffineOperator {
        let scale = |terms: &[Term], with_right: bool| -> Vec<Term> {
            terms
                .iter()
                .map(|t| Term { coef: left[t.row] * t.coef * if with_right { right[t.col] } else { 1.0 }, ..*t })
                .collect()
        };
        let output: Vec<(usize, usize, f64)> = self.output.triplets().map(|(r, c, v)| (r, c, v * right[c])).collect();
        AffineOperator {
            n: self.n,
            pattern: self.pattern.clone(),
            weights: self.weights.clone(),
            a_terms: scale(&self.a_terms, true),
            b_terms: scale(&self.b_terms, false),
            output: Csr::from_triplets(self.output.n_rows(), self.n, &output),
            forcing: self.forcing.iter().zip(left).map(|(f, l)| f * l).collect(),
            a_shape: self.a_shape.clone(),
            a_slots: self.a_slots.clone(),
            order: self.order.clone(),
            edge_labels: self.edge_labels.clone(),
        }
    }
}
