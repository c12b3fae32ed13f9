use std::sync::Arc;

use log::debug;
use nalgebra::{DMatrix, DVector};

use super::SimulationError;
use crate::linalg::{solve_shifted, topological_order, Csr};
use crate::mor::ReducedModel;
use crate::transport::{AffineOperator, CoEnergyForm, Discretization, SignPattern};

/// Linear transport `ẋ = A(q) x + B(q) u + f` at frozen flows, as seen by the
/// time integrators.
pub trait TransportModel {
    /// `"fom"` or `"rom"`.
    fn kind(&self) -> &'static str;
    fn n_states(&self) -> usize;
    fn n_outputs(&self) -> usize;
    /// State of the network filled with density `phi0` everywhere.
    fn equilibrium(&self, phi0: f64) -> Vec<f64>;
    /// `y = C x`.
    fn outputs(&self, x: &[f64], y: &mut [f64]);
    /// Evaluates the operators at new flows. Returns `true` if the sign
    /// pattern changed since the previous call.
    fn set_flows(&mut self, q: &[f64], edge_flows: &[f64]) -> Result<bool, SimulationError>;
    /// Largest `|a_ii|` of the current operator; `dt · rate ≤ 1` is the CFL
    /// condition of the upwind scheme.
    fn max_rate(&self) -> f64;
    /// `out = A x + B u + f`.
    fn derivative(&self, x: &[f64], u: f64, out: &mut [f64]);
    /// `out = B u + f`.
    fn input(&self, u: f64, out: &mut [f64]);
    /// Overwrites `rhs` with the solution of `(I - c A) z = rhs`.
    fn solve_shifted(&mut self, c: f64, rhs: &mut [f64]) -> Result<(), SimulationError>;
}

type Assembled = Arc<(AffineOperator, CoEnergyForm)>;

/// Full order upwind model in physical energy densities.
pub struct FomModel<'a> {
    disc: &'a Discretization,
    current: Option<Assembled>,
    a: Csr,
    b: Vec<f64>,
    order: Option<Vec<usize>>,
    weights: Vec<f64>,
}

impl<'a> FomModel<'a> {
    pub fn new(disc: &'a Discretization) -> Self {
        FomModel { disc, current: None, a: Csr::zeros(0, 0), b: Vec::new(), order: None, weights: Vec::new() }
    }

    fn operator(&self) -> &AffineOperator {
        &self.current.as_ref().expect("flows set before use").0
    }

    pub fn pattern(&self) -> Option<&SignPattern> {
        self.current.as_ref().map(|c| c.0.pattern())
    }
}

impl TransportModel for FomModel<'_> {
    fn kind(&self) -> &'static str {
        "fom"
    }

    fn n_states(&self) -> usize {
        self.disc.n_cells()
    }

    fn n_outputs(&self) -> usize {
        self.disc.topology.n_consumers()
    }

    fn equilibrium(&self, phi0: f64) -> Vec<f64> {
        vec![phi0; self.n_states()]
    }

    fn outputs(&self, x: &[f64], y: &mut [f64]) {
        match &self.current {
            Some(c) => c.0.output_map().matvec(x, y),
            None => {
                // output cells do not depend on the pattern
                let op = self.disc.operator(&SignPattern::reference(self.disc.topology.n_edges()));
                match op {
                    Ok(op) => op.0.output_map().matvec(x, y),
                    Err(_) => y.iter_mut().for_each(|v| *v = f64::NAN),
                }
            }
        }
    }

    fn set_flows(&mut self, _q: &[f64], edge_flows: &[f64]) -> Result<bool, SimulationError> {
        let pattern = SignPattern::from_flows(edge_flows);
        let switched = self.pattern() != Some(&pattern);
        if switched {
            let op = self.disc.operator(&pattern)?;
            if self.current.is_some() {
                debug!(target: "hydronet::simulation", "sign pattern switched to {pattern}");
            }
            self.a = op.0.empty_matrix();
            self.b = vec![0.0; self.disc.n_cells()];
            self.order = op.0.triangular_order().map(<[usize]>::to_vec);
            self.current = Some(op);
        }
        let op = &self.current.as_ref().expect("assembled").0;
        op.check_flows(edge_flows)?;
        self.weights.clear();
        self.weights.extend(op.weights().iter().map(|w| w.value(edge_flows)));
        op.evaluate_into(&self.weights, &mut self.a, &mut self.b);
        if self.order.is_none() {
            self.order = topological_order(&self.a);
        }
        Ok(switched)
    }

    fn max_rate(&self) -> f64 {
        (0..self.a.n_rows()).fold(0.0, |m, r| m.max(self.a.get(r, r).abs()))
    }

    fn derivative(&self, x: &[f64], u: f64, out: &mut [f64]) {
        self.a.matvec(x, out);
        let f = self.operator().forcing();
        for ((o, b), f) in out.iter_mut().zip(&self.b).zip(f) {
            *o += b * u + f;
        }
    }

    fn input(&self, u: f64, out: &mut [f64]) {
        let f = self.operator().forcing();
        for ((o, b), f) in out.iter_mut().zip(&self.b).zip(f) {
            *o = b * u + f;
        }
    }

    fn solve_shifted(&mut self, c: f64, rhs: &mut [f64]) -> Result<(), SimulationError> {
        let x = solve_shifted(&self.a, self.order.as_deref(), 1.0, c, rhs)?;
        rhs.copy_from_slice(&x);
        Ok(())
    }
}

/// Reduced model in reduced co-energy coordinates. Patterns missing from the
/// model are projected on demand if a discretization is attached.
pub struct RomModel<'a> {
    model: ReducedModel,
    disc: Option<&'a Discretization>,
    family: Option<usize>,
    a: DMatrix<f64>,
    b: DVector<f64>,
    lu: DMatrix<f64>,
}

impl<'a> RomModel<'a> {
    pub fn new(model: ReducedModel, disc: Option<&'a Discretization>) -> Self {
        let r = model.order();
        RomModel { model, disc, family: None, a: DMatrix::zeros(r, r), b: DVector::zeros(r), lu: DMatrix::zeros(r, r) }
    }

    pub fn model(&self) -> &ReducedModel {
        &self.model
    }

    /// Current reduced matrix `A_r(q)`.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    fn family(&self) -> &crate::mor::ReducedFamily {
        &self.model.families[self.family.unwrap_or(0)]
    }
}

impl TransportModel for RomModel<'_> {
    fn kind(&self) -> &'static str {
        "rom"
    }

    fn n_states(&self) -> usize {
        self.model.order()
    }

    fn n_outputs(&self) -> usize {
        self.family().c.nrows()
    }

    fn equilibrium(&self, phi0: f64) -> Vec<f64> {
        self.model.constant_state.iter().map(|v| v * phi0).collect()
    }

    fn outputs(&self, x: &[f64], y: &mut [f64]) {
        let c = &self.family().c;
        for (o, yo) in y.iter_mut().enumerate() {
            *yo = (0..c.ncols()).map(|k| c[(o, k)] * x[k]).sum();
        }
    }

    fn set_flows(&mut self, q: &[f64], edge_flows: &[f64]) -> Result<bool, SimulationError> {
        let switched =
            self.family.map_or(true, |f| SignPattern::from_flows(edge_flows) != self.model.families[f].pattern);
        if switched {
            let pattern = SignPattern::from_flows(edge_flows);
            let index = match (self.model.family_index(&pattern), self.disc) {
                (Some(i), _) => i,
                (None, Some(disc)) => self.model.ensure_pattern(disc, &pattern)?,
                (None, None) => return Err(SimulationError::UnknownPattern(pattern.to_string())),
            };
            if self.family.is_some() {
                debug!(target: "hydronet::simulation", "reduced sign pattern switched to {pattern}");
            }
            self.family = Some(index);
        }
        self.model.assemble_into(self.family.expect("family"), q, &mut self.a, &mut self.b);
        Ok(switched)
    }

    fn max_rate(&self) -> f64 {
        (0..self.a.nrows()).fold(0.0, |m, r| m.max(self.a[(r, r)].abs()))
    }

    fn derivative(&self, x: &[f64], u: f64, out: &mut [f64]) {
        let f = &self.family().forcing;
        let r = self.a.nrows();
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.b[i] * u + f[i];
        }
        // column-major friendly accumulation
        for (k, &xk) in x.iter().enumerate().take(r) {
            if xk != 0.0 {
                let col = self.a.column(k);
                for (o, a) in out.iter_mut().zip(col.iter()) {
                    *o += a * xk;
                }
            }
        }
    }

    fn input(&self, u: f64, out: &mut [f64]) {
        let f = &self.family().forcing;
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.b[i] * u + f[i];
        }
    }

    fn solve_shifted(&mut self, c: f64, rhs: &mut [f64]) -> Result<(), SimulationError> {
        let r = self.a.nrows();
        self.lu.copy_from(&self.a);
        self.lu.as_mut_slice().iter_mut().for_each(|v| *v *= -c);
        for i in 0..r {
            self.lu[(i, i)] += 1.0;
        }
        if lu_in_place(&mut self.lu) {
            lu_solve(&self.lu, rhs);
            return Ok(());
        }
        // tiny pivot: fall back to partial pivoting
        let mut m = &self.a * (-c);
        for i in 0..r {
            m[(i, i)] += 1.0;
        }
        let mut z = DVector::from_column_slice(rhs);
        if !m.lu().solve_mut(&mut z) {
            return Err(SimulationError::Singular("reduced implicit step matrix".into()));
        }
        rhs.copy_from_slice(z.as_slice());
        Ok(())
    }
}

/// Doolittle LU without pivoting, in place (unit lower factor implied).
/// `I - cA` has a positive definite symmetric part for dissipative `A`, so no
/// pivoting is needed; returns `false` on a relatively tiny pivot.
fn lu_in_place(m: &mut DMatrix<f64>) -> bool {
    let n = m.nrows();
    let scale = m.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    let data = m.as_mut_slice();
    for k in 0..n {
        let p = data[k * n + k];
        if !(p.abs() > 1e-12 * scale) {
            return false;
        }
        let inv = 1.0 / p;
        for i in k + 1..n {
            data[k * n + i] *= inv;
        }
        for j in k + 1..n {
            let f = data[j * n + k];
            if f != 0.0 {
                let (left, right) = data.split_at_mut(j * n);
                let col_k = &left[k * n + k + 1..k * n + n];
                let col_j = &mut right[k + 1..n];
                for (x, l) in col_j.iter_mut().zip(col_k) {
                    *x -= f * l;
                }
            }
        }
    }
    true
}

fn lu_solve(m: &DMatrix<f64>, x: &mut [f64]) {
    let n = m.nrows();
    let data = m.as_slice();
    for k in 0..n {
        let xk = x[k];
        if xk != 0.0 {
            for i in k + 1..n {
                x[i] -= data[k * n + i] * xk;
            }
        }
    }
    for k in (0..n).rev() {
        x[k] /= data[k * n + k];
        let xk = x[k];
        for i in 0..k {
            x[i] -= data[k * n + i] * xk;
        }
    }
}
