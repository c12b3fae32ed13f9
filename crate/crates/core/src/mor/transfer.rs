use nalgebra::{Complex, DMatrix, DVector};
use rayon::prelude::*;

use super::{FrequencyWindow, MorError};
use crate::linalg::{solve_shifted, topological_order, Csr, HessenbergTransfer};
use crate::transport::CoEnergyForm;

/// A co-energy operator family evaluated at fixed flows.
#[derive(Clone, Debug)]
pub struct FullSystem {
    pub a: Csr,
    pub b: Vec<f64>,
    pub c: Csr,
    order: Option<Vec<usize>>,
}

impl FullSystem {
    pub fn at(form: &CoEnergyForm, edge_flows: &[f64]) -> Result<Self, MorError> {
        let (a, b) = form.operator.evaluate(edge_flows)?;
        let order = match form.operator.triangular_order() {
            Some(o) => Some(o.to_vec()),
            None => topological_order(&a),
        };
        Ok(FullSystem { a, b, c: form.operator.output_map().clone(), order })
    }

    pub fn n_states(&self) -> usize {
        self.a.n_rows()
    }

    /// `(s I - A)⁻¹ B`.
    pub fn resolvent_column(&self, s: Complex<f64>) -> Result<Vec<Complex<f64>>, MorError> {
        let rhs: Vec<Complex<f64>> = self.b.iter().map(|&v| Complex::new(v, 0.0)).collect();
        solve_shifted(&self.a, self.order.as_deref(), s, 1.0, &rhs)
            .map_err(|e| MorError::SingularShift { s, reason: e.to_string() })
    }

    /// `H(s) = C (s I - A)⁻¹ B`, one entry per output.
    pub fn transfer(&self, s: Complex<f64>) -> Result<Vec<Complex<f64>>, MorError> {
        let x = self.resolvent_column(s)?;
        Ok((0..self.c.n_rows()).map(|o| self.c.row(o).map(|(c, v)| x[c] * v).sum()).collect())
    }

    /// Galerkin projection `(Vᵀ A V, Vᵀ B, C V)`.
    pub fn project(&self, v: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>) {
        let av = self.a.matmul_dense(v);
        let b = DVector::from_column_slice(&self.b);
        (v.transpose() * av, v.transpose() * b, self.c.matmul_dense(v))
    }
}

/// Transfer function of a co-energy family at fixed flows.
pub fn eval_transfer(form: &CoEnergyForm, edge_flows: &[f64], s: Complex<f64>) -> Result<Vec<Complex<f64>>, MorError> {
    FullSystem::at(form, edge_flows)?.transfer(s)
}

/// Samples `H(iω_k)` of a full system on a window's quadrature nodes.
#[derive(Clone, Debug)]
pub struct TransferSamples {
    pub window: FrequencyWindow,
    pub values: Vec<Vec<Complex<f64>>>,
    /// Squared weighted H2 norm of the samples.
    pub norm_squared: f64,
}

impl TransferSamples {
    pub fn of_full(system: &FullSystem, window: &FrequencyWindow) -> Result<Self, MorError> {
        let values = window
            .frequencies()
            .par_iter()
            .map(|&w| system.transfer(Complex::new(0.0, w)))
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_values(window, values)
    }

    pub fn of_reduced(system: &HessenbergTransfer, window: &FrequencyWindow) -> Result<Self, MorError> {
        let values = window
            .frequencies()
            .iter()
            .map(|&w| {
                system
                    .eval(Complex::new(0.0, w))
                    .ok_or(MorError::SingularShift { s: Complex::new(0.0, w), reason: "reduced system".into() })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_values(window, values)
    }

    pub fn from_values(window: &FrequencyWindow, values: Vec<Vec<Complex<f64>>>) -> Result<Self, MorError> {
        let norm_squared = super::weighted_h2_norm_squared(window, &values)?;
        Ok(TransferSamples { window: *window, values, norm_squared })
    }

    /// Relative weighted H2 distance `‖H - H_r‖ / ‖H‖` and the pointwise
    /// errors `‖H(iω_k) - H_r(iω_k)‖` at every node.
    pub fn relative_error(&self, reduced: &HessenbergTransfer) -> Result<(f64, Vec<f64>), MorError> {
        if !(self.norm_squared > 0.0) {
            return Err(MorError::ZeroReference);
        }
        let freqs = self.window.frequencies();
        let weights = self.window.weights();
        let mut num = 0.0;
        let mut pointwise = Vec::with_capacity(freqs.len());
        for ((w, h), wt) in freqs.iter().zip(&self.values).zip(&weights) {
            let hr = reduced
                .eval(Complex::new(0.0, *w))
                .ok_or(MorError::SingularShift { s: Complex::new(0.0, *w), reason: "reduced system".into() })?;
            let e: f64 = h.iter().zip(&hr).map(|(a, b)| (a - b).norm_sqr()).sum();
            num += wt * e;
            pointwise.push(e.sqrt());
        }
        Ok(((num / self.norm_squared).sqrt(), pointwise))
    }
}
