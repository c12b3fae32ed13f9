use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::MorError;
use crate::linalg::{max_symmetric_eigenvalue, HessenbergTransfer};
use crate::network::DecompositionPlan;
use crate::transport::{Discretization, SignPattern, Weight, WeightKind};

/// Orthonormal basis of one part of the state: `basis` has one row per entry
/// of `cells` (global cell indices).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockBasis {
    pub cells: Vec<usize>,
    pub basis: DMatrix<f64>,
}

impl BlockBasis {
    pub fn identity(cells: Vec<usize>) -> Self {
        let n = cells.len();
        BlockBasis { cells, basis: DMatrix::identity(n, n) }
    }

    pub fn order(&self) -> usize {
        self.basis.ncols()
    }
}

/// Weight of a reduced term after collapsing all flow-linear weights onto the
/// independent flows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ReducedWeight {
    Constant,
    /// Independent flow `q_j`.
    Flow(usize),
    Nonlinear(Weight),
}

impl ReducedWeight {
    fn value(&self, q: &[f64], edge_flows: &[f64]) -> f64 {
        match self {
            ReducedWeight::Constant => 1.0,
            ReducedWeight::Flow(j) => q[*j],
            ReducedWeight::Nonlinear(w) => w.value(edge_flows),
        }
    }
}

/// `weight · blockdiag-embedded matrices` for `(row block, col block)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReducedTerm {
    pub weight: ReducedWeight,
    pub blocks: Vec<(usize, usize, DMatrix<f64>)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReducedInput {
    pub weight: ReducedWeight,
    pub blocks: Vec<(usize, DVector<f64>)>,
}

/// Reduced operator family for one sign pattern.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReducedFamily {
    pub pattern: SignPattern,
    pub a_terms: Vec<ReducedTerm>,
    pub b_terms: Vec<ReducedInput>,
    pub c: DMatrix<f64>,
    pub forcing: DVector<f64>,
}

/// Dense reduced system at fixed flows.
#[derive(Clone, Debug)]
pub struct ReducedSystem {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: DMatrix<f64>,
    pub forcing: DVector<f64>,
}

impl ReducedSystem {
    pub fn transfer(&self) -> HessenbergTransfer {
        HessenbergTransfer::new(&self.a, &self.b, &self.c)
    }

    /// `λ_max(A_r + A_rᵀ)`.
    pub fn max_symmetric_eigenvalue(&self) -> f64 {
        max_symmetric_eigenvalue(&(&self.a + self.a.transpose()))
    }
}

/// Block-diagonal Galerkin projection of the co-energy family. Off-diagonal
/// blocks carry the interface coupling from the main network into the
/// subnetworks. Families are stored per sign pattern.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReducedModel {
    pub blocks: Vec<BlockBasis>,
    pub offsets: Vec<usize>,
    /// Edge flows per independent flow (E x L).
    pub flow_map: DMatrix<f64>,
    pub families: Vec<ReducedFamily>,
    /// Reduced image of the constant unit state.
    pub constant_state: DVector<f64>,
    pub network_hash: String,
    pub cell_counts: Vec<usize>,
    pub sink: bool,
}

impl ReducedModel {
    /// Projects the family of every pattern in `patterns` onto `blocks`.
    pub fn build(disc: &Discretization, blocks: Vec<BlockBasis>, patterns: &[SignPattern]) -> Result<Self, MorError> {
        let n = disc.n_cells();
        let mut seen = vec![false; n];
        for (b, block) in blocks.iter().enumerate() {
            if block.basis.nrows() != block.cells.len() {
                return Err(MorError::Dimension(format!(
                    "block {b}: basis has {} rows for {} cells",
                    block.basis.nrows(),
                    block.cells.len()
                )));
            }
            for &c in &block.cells {
                if c >= n || std::mem::replace(&mut seen[c], true) {
                    return Err(MorError::Dimension(format!("block {b}: cell {c} out of range or repeated")));
                }
            }
        }
        if let Some(c) = seen.iter().position(|s| !s) {
            return Err(MorError::Dimension(format!("cell {c} is not covered by any block")));
        }
        let mut offsets = vec![0];
        for b in &blocks {
            offsets.push(offsets.last().unwrap() + b.order());
        }
        let sqrt_q = disc.energy.inverse_scaling();
        let mut constant_state = DVector::zeros(*offsets.last().unwrap());
        for (b, block) in blocks.iter().enumerate() {
            let dc = DVector::from_iterator(block.cells.len(), block.cells.iter().map(|&c| sqrt_q[c]));
            constant_state.rows_mut(offsets[b], block.order()).copy_from(&(block.basis.transpose() * dc));
        }
        let mut model = ReducedModel {
            blocks,
            offsets,
            flow_map: disc.basis.edge_flow.clone(),
            families: Vec::new(),
            constant_state,
            network_hash: disc.topology.content_hash(),
            cell_counts: disc.grid.counts().to_vec(),
            sink: disc.options.sink,
        };
        for p in patterns {
            model.ensure_pattern(disc, p)?;
        }
        Ok(model)
    }

    /// Single-block projection with a global orthonormal basis `v`.
    pub fn from_global_basis(
        disc: &Discretization,
        v: DMatrix<f64>,
        patterns: &[SignPattern],
    ) -> Result<Self, MorError> {
        Self::build(disc, vec![BlockBasis { cells: (0..disc.n_cells()).collect(), basis: v }], patterns)
    }

    pub fn order(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn n_flows(&self) -> usize {
        self.flow_map.ncols()
    }

    pub fn family_index(&self, pattern: &SignPattern) -> Option<usize> {
        self.families.iter().position(|f| &f.pattern == pattern)
    }

    /// Returns the family index for `pattern`, projecting it if necessary.
    pub fn ensure_pattern(&mut self, disc: &Discretization, pattern: &SignPattern) -> Result<usize, MorError> {
        if let Some(i) = self.family_index(pattern) {
            return Ok(i);
        }
        if disc.topology.content_hash() != self.network_hash || disc.grid.counts() != self.cell_counts.as_slice() {
            return Err(MorError::Provenance("discretization does not match the reduced model".into()));
        }
        let family = self.project_family(disc, pattern)?;
        self.families.push(family);
        Ok(self.families.len() - 1)
    }

    fn project_family(&self, disc: &Discretization, pattern: &SignPattern) -> Result<ReducedFamily, MorError> {
        let assembled = disc.operator(pattern)?;
        let op = &assembled.1.operator;
        let n = disc.n_cells();
        let mut locate = vec![(0usize, 0usize); n];
        for (b, block) in self.blocks.iter().enumerate() {
            for (l, &c) in block.cells.iter().enumerate() {
                locate[c] = (b, l);
            }
        }
        // transposed bases: column `l` is row `l` of the block basis
        let vt: Vec<DMatrix<f64>> = self.blocks.iter().map(|b| b.basis.transpose()).collect();
        let order = |b: usize| self.blocks[b].order();

        let n_weights = op.n_weights();
        let mut per_weight: Vec<BTreeMap<(usize, usize), DMatrix<f64>>> = vec![BTreeMap::new(); n_weights];
        for t in op.a_terms() {
            let (rb, rl) = locate[t.row];
            let (cb, cl) = locate[t.col];
            let acc = per_weight[t.weight].entry((rb, cb)).or_insert_with(|| DMatrix::zeros(order(rb), order(cb)));
            acc.ger(t.coef, &vt[rb].column(rl), &vt[cb].column(cl), 1.0);
        }
        let mut per_weight_b: Vec<BTreeMap<usize, DVector<f64>>> = vec![BTreeMap::new(); n_weights];
        for t in op.b_terms() {
            let (rb, rl) = locate[t.row];
            let acc = per_weight_b[t.weight].entry(rb).or_insert_with(|| DVector::zeros(order(rb)));
            acc.axpy(t.coef, &vt[rb].column(rl), 1.0);
        }

        let flow_coefficients = |edges: &[(usize, f64)]| -> Vec<(usize, f64)> {
            let mut c = vec![0.0; self.n_flows()];
            for &(e, s) in edges {
                for j in 0..c.len() {
                    c[j] += s * self.flow_map[(e, j)];
                }
            }
            c.into_iter().enumerate().filter(|(_, v)| *v != 0.0).collect()
        };

        let mut collapsed: BTreeMap<(usize, usize, usize), DMatrix<f64>> = BTreeMap::new();
        let mut collapsed_b: BTreeMap<(usize, usize), DVector<f64>> = BTreeMap::new();
        let mut constant: BTreeMap<(usize, usize), DMatrix<f64>> = BTreeMap::new();
        let mut constant_b: BTreeMap<usize, DVector<f64>> = BTreeMap::new();
        let mut a_terms = Vec::new();
        let mut b_terms = Vec::new();
        for (w, weight) in op.weights().iter().enumerate() {
            match weight.kind() {
                WeightKind::Constant => {
                    for (k, m) in &per_weight[w] {
                        *constant.entry(*k).or_insert_with(|| DMatrix::zeros(m.nrows(), m.ncols())) += m;
                    }
                    for (k, m) in &per_weight_b[w] {
                        *constant_b.entry(*k).or_insert_with(|| DVector::zeros(m.len())) += m;
                    }
                }
                WeightKind::Linear(edges) => {
                    for (j, cj) in flow_coefficients(&edges) {
                        for (&(rb, cb), m) in &per_weight[w] {
                            let acc =
                                collapsed.entry((j, rb, cb)).or_insert_with(|| DMatrix::zeros(m.nrows(), m.ncols()));
                            *acc += m * cj;
                        }
                        for (&rb, m) in &per_weight_b[w] {
                            let acc = collapsed_b.entry((j, rb)).or_insert_with(|| DVector::zeros(m.len()));
                            acc.axpy(cj, m, 1.0);
                        }
                    }
                }
                WeightKind::Nonlinear => {
                    if !per_weight[w].is_empty() {
                        a_terms.push(ReducedTerm {
                            weight: ReducedWeight::Nonlinear(weight.clone()),
                            blocks: std::mem::take(&mut per_weight[w])
                                .into_iter()
                                .map(|((r, c), m)| (r, c, m))
                                .collect(),
                        });
                    }
                    if !per_weight_b[w].is_empty() {
                        b_terms.push(ReducedInput {
                            weight: ReducedWeight::Nonlinear(weight.clone()),
                            blocks: std::mem::take(&mut per_weight_b[w]).into_iter().collect(),
                        });
                    }
                }
            }
        }
        if !constant.is_empty() {
            a_terms.push(ReducedTerm {
                weight: ReducedWeight::Constant,
                blocks: constant.into_iter().map(|((r, c), m)| (r, c, m)).collect(),
            });
        }
        if !constant_b.is_empty() {
            b_terms.push(ReducedInput { weight: ReducedWeight::Constant, blocks: constant_b.into_iter().collect() });
        }
        let mut by_flow: BTreeMap<usize, Vec<(usize, usize, DMatrix<f64>)>> = BTreeMap::new();
        for ((j, rb, cb), m) in collapsed {
            by_flow.entry(j).or_default().push((rb, cb, m));
        }
        a_terms.extend(by_flow.into_iter().map(|(j, blocks)| ReducedTerm { weight: ReducedWeight::Flow(j), blocks }));
        let mut by_flow_b: BTreeMap<usize, Vec<(usize, DVector<f64>)>> = BTreeMap::new();
        for ((j, rb), m) in collapsed_b {
            by_flow_b.entry(j).or_default().push((rb, m));
        }
        b_terms
            .extend(by_flow_b.into_iter().map(|(j, blocks)| ReducedInput { weight: ReducedWeight::Flow(j), blocks }));

        let r = self.order();
        let mut c = DMatrix::zeros(op.n_outputs(), r);
        for (o, cell, v) in op.output_map().triplets() {
            let (b, l) = locate[cell];
            let mut row = c.view_mut((o, self.offsets[b]), (1, order(b)));
            row.zip_apply(&vt[b].column(l).transpose(), |x, y| *x += v * y);
        }
        let mut forcing = DVector::zeros(r);
        for (cell, &f) in op.forcing().iter().enumerate() {
            if f != 0.0 {
                let (b, l) = locate[cell];
                forcing.rows_mut(self.offsets[b], order(b)).axpy(f, &vt[b].column(l), 1.0);
            }
        }
        Ok(ReducedFamily { pattern: pattern.clone(), a_terms, b_terms, c, forcing })
    }

    /// Assembles `A_r(q)` and `B_r(q)` of family `family` in place.
    pub fn assemble_into(&self, family: usize, q: &[f64], a: &mut DMatrix<f64>, b: &mut DVector<f64>) {
        let fam = &self.families[family];
        let edge_flows = &self.flow_map * DVector::from_column_slice(q);
        let edge_flows = edge_flows.as_slice();
        let r = a.nrows();
        a.fill(0.0);
        b.fill(0.0);
        for term in &fam.a_terms {
            let f = term.weight.value(q, edge_flows);
            if f == 0.0 {
                continue;
            }
            for (rb, cb, m) in &term.blocks {
                if m.nrows() == r {
                    // full-height block: contiguous columns in column-major storage
                    let start = self.offsets[*cb] * r;
                    let dst = &mut a.as_mut_slice()[start..start + m.len()];
                    for (x, y) in dst.iter_mut().zip(m.as_slice()) {
                        *x += f * y;
                    }
                } else {
                    let mut view = a.view_mut((self.offsets[*rb], self.offsets[*cb]), (m.nrows(), m.ncols()));
                    view.zip_apply(m, |x, y| *x += f * y);
                }
            }
        }
        for term in &fam.b_terms {
            let f = term.weight.value(q, edge_flows);
            for (rb, m) in &term.blocks {
                b.rows_mut(self.offsets[*rb], m.len()).axpy(f, m, 1.0);
            }
        }
    }

    /// Reduced system at independent flows `q`.
    pub fn evaluate(&self, family: usize, q: &[f64]) -> ReducedSystem {
        let r = self.order();
        let mut a = DMatrix::zeros(r, r);
        let mut b = DVector::zeros(r);
        self.assemble_into(family, q, &mut a, &mut b);
        let fam = &self.families[family];
        ReducedSystem { a, b, c: fam.c.clone(), forcing: fam.forcing.clone() }
    }

    /// Global projection matrix `V` (n x r) in co-energy coordinates.
    pub fn projection_matrix(&self) -> DMatrix<f64> {
        let n: usize = self.cell_counts.iter().sum();
        let mut v = DMatrix::zeros(n, self.order());
        for (b, block) in self.blocks.iter().enumerate() {
            for (l, &c) in block.cells.iter().enumerate() {
                for k in 0..block.order() {
                    v[(c, self.offsets[b] + k)] = block.basis[(l, k)];
                }
            }
        }
        v
    }
}

/// Reduced model of a decomposed network from one projection per part
/// (main network first). Parts without reduction pass the identity.
pub fn reduce_decomposed(
    disc: &Discretization,
    plan: &DecompositionPlan,
    projections: Vec<DMatrix<f64>>,
    patterns: &[SignPattern],
) -> Result<ReducedModel, MorError> {
    let cell_sets = plan.cell_sets(&disc.grid);
    if projections.len() != cell_sets.len() {
        return Err(MorError::Dimension(format!("{} projections for {} parts", projections.len(), cell_sets.len())));
    }
    let blocks = cell_sets.into_iter().zip(projections).map(|(cells, basis)| BlockBasis { cells, basis }).collect();
    ReducedModel::build(disc, blocks, patterns)
}
