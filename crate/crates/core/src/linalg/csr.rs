use std::collections::VecDeque;

use nalgebra::{ComplexField, DMatrix, DVector};

use super::LinalgError;

/// Compressed sparse row matrix with sorted column indices.
#[derive(Clone, Debug, PartialEq)]
pub struct Csr {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<f64>,
}

impl Csr {
    /// Builds the sparsity pattern of `entries` (duplicates merged) with zero
    /// values. Returns the matrix and the value slot of every entry.
    pub fn pattern(n_rows: usize, n_cols: usize, entries: &[(usize, usize)]) -> (Csr, Vec<usize>) {
        let mut order: Vec<usize> = (0..entries.len()).collect();
        order.sort_unstable_by_key(|&i| entries[i]);
        let mut row_ptr = vec![0usize; n_rows + 1];
        let mut cols = Vec::with_capacity(entries.len());
        let mut slots = vec![0usize; entries.len()];
        let mut last: Option<(usize, usize)> = None;
        for &i in &order {
            let (r, c) = entries[i];
            assert!(r < n_rows && c < n_cols, "entry ({r}, {c}) outside {n_rows}x{n_cols}");
            if last != Some((r, c)) {
                cols.push(c);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
            slots[i] = cols.len() - 1;
        }
        for r in 0..n_rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        let values = vec![0.0; cols.len()];
        (Csr { n_rows, n_cols, row_ptr, cols, values }, slots)
    }

    pub fn from_triplets(n_rows: usize, n_cols: usize, triplets: &[(usize, usize, f64)]) -> Csr {
        let entries: Vec<(usize, usize)> = triplets.iter().map(|&(r, c, _)| (r, c)).collect();
        let (mut m, slots) = Self::pattern(n_rows, n_cols, &entries);
        for (&(_, _, v), s) in triplets.iter().zip(slots) {
            m.values[s] += v;
        }
        m
    }

    pub fn from_dense(d: &DMatrix<f64>) -> Csr {
        let mut t = Vec::new();
        for r in 0..d.nrows() {
            for c in 0..d.ncols() {
                if d[(r, c)] != 0.0 {
                    t.push((r, c, d[(r, c)]));
                }
            }
        }
        Self::from_triplets(d.nrows(), d.ncols(), &t)
    }

    pub fn zeros(n_rows: usize, n_cols: usize) -> Csr {
        Self::from_triplets(n_rows, n_cols, &[])
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.cols.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[range.clone()].iter().copied().zip(self.values[range].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.cols[range.clone()].binary_search(&c) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }

    /// Iterates `(row, col, value)` over stored entries.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_rows).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for (r, yr) in y.iter_mut().enumerate().take(self.n_rows) {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.cols[k]];
            }
            *yr = acc;
        }
    }

    /// `Y = A X` for a dense block of columns.
    pub fn matmul_dense(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut y = DMatrix::zeros(self.n_rows, x.ncols());
        for j in 0..x.ncols() {
            let xc = x.column(j);
            for r in 0..self.n_rows {
                let mut acc = 0.0;
                for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                    acc += self.values[k] * xc[self.cols[k]];
                }
                y[(j * self.n_rows) + r] = acc;
            }
        }
        y
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.n_rows, self.n_cols);
        for (r, c, v) in self.triplets() {
            d[(r, c)] += v;
        }
        d
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Row order in which `shift I - scale A` becomes triangular, if the
/// off-diagonal coupling graph of `A` is acyclic.
pub fn topological_order(a: &Csr) -> Option<Vec<usize>> {
    let n = a.n_rows();
    let mut indegree = vec![0usize; n];
    let mut dependents: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (r, c, v) in a.triplets() {
        if r != c && v != 0.0 {
            indegree[r] += 1;
            dependents[c].push(r);
        }
    }
    let mut queue: VecDeque<usize> = (0..n).filter(|&r| indegree[r] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(c) = queue.pop_front() {
        order.push(c);
        for &r in &dependents[c] {
            indegree[r] -= 1;
            if indegree[r] == 0 {
                queue.push_back(r);
            }
        }
    }
    (order.len() == n).then_some(order)
}

/// Solves `(shift I - scale A) x = b`.
///
/// With a topological order the system is solved by forward substitution in
/// `O(nnz)`; otherwise a dense LU factorization is used.
pub fn solve_shifted<T>(a: &Csr, order: Option<&[usize]>, shift: T, scale: f64, b: &[T]) -> Result<Vec<T>, LinalgError>
where
    T: ComplexField<RealField = f64> + Copy,
{
    let n = a.n_rows();
    if b.len() != n {
        return Err(LinalgError::Dimension(format!("rhs length {} for {n} rows", b.len())));
    }
    let Some(order) = order else {
        return solve_dense(a, shift, scale, b);
    };
    let mut x = vec![T::zero(); n];
    for &r in order {
        let mut acc = b[r];
        let mut diag = shift;
        for (c, v) in a.row(r) {
            if c == r {
                diag -= T::from_real(scale * v);
            } else {
                acc += x[c] * T::from_real(scale * v);
            }
        }
        if diag.clone().modulus() == 0.0 {
            return Err(LinalgError::Singular(format!("zero pivot in row {r}")));
        }
        x[r] = acc / diag;
    }
    Ok(x)
}

fn solve_dense<T>(a: &Csr, shift: T, scale: f64, b: &[T]) -> Result<Vec<T>, LinalgError>
where
    T: ComplexField<RealField = f64> + Copy,
{
    let n = a.n_rows();
    let mut m = DMatrix::<T>::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = shift;
    }
    for (r, c, v) in a.triplets() {
        m[(r, c)] -= T::from_real(scale * v);
    }
    let rhs = DVector::from_column_slice(b);
    match m.lu().solve(&rhs) {
        Some(x) if x.iter().all(|v| v.clone().is_finite()) => Ok(x.iter().copied().collect()),
        _ => Err(LinalgError::Singular("shifted matrix is singular".into())),
    }
}
