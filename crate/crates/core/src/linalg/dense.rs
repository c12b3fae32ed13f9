use nalgebra::{Complex, DMatrix, DVector};

/// Orthonormal basis of the column span of `cols` by classical Gram-Schmidt
/// with reorthogonalization. Columns whose remainder falls below
/// `rel_drop` times their original norm are treated as dependent.
pub fn orthonormalize(cols: &DMatrix<f64>, rel_drop: f64) -> DMatrix<f64> {
    let mut basis = ColumnBasis::new(cols.nrows());
    basis.drop_tolerance = rel_drop;
    basis.push_columns(cols);
    basis.q()
}

/// Incrementally grown QR factorization `[columns] = Q R` of unit-scaled
/// columns, used for SVD-based combination of interpolation spaces.
#[derive(Clone, Debug)]
pub struct ColumnBasis {
    n: usize,
    q: Vec<DVector<f64>>,
    /// Columns of the upper trapezoidal factor, each of length `q.len()` at
    /// the time it was added (implicitly zero padded).
    r: Vec<DVector<f64>>,
    pub drop_tolerance: f64,
}

impl ColumnBasis {
    pub fn new(n: usize) -> Self {
        ColumnBasis { n, q: Vec::new(), r: Vec::new(), drop_tolerance: 1e-13 }
    }

    pub fn n_rows(&self) -> usize {
        self.n
    }

    /// Number of stored columns.
    pub fn n_columns(&self) -> usize {
        self.r.len()
    }

    pub fn rank(&self) -> usize {
        self.q.len()
    }

    pub fn push_columns(&mut self, cols: &DMatrix<f64>) {
        assert_eq!(cols.nrows(), self.n, "column length");
        for j in 0..cols.ncols() {
            self.push(cols.column(j).into_owned());
        }
    }

    pub fn push(&mut self, col: DVector<f64>) {
        let norm = col.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return;
        }
        let mut w = col / norm;
        let mut coeffs = DVector::zeros(self.q.len());
        for _ in 0..2 {
            for (k, qk) in self.q.iter().enumerate() {
                let c = qk.dot(&w);
                coeffs[k] += c;
                w.axpy(-c, qk, 1.0);
            }
        }
        let rest = w.norm();
        if rest > self.drop_tolerance {
            let mut full = coeffs.clone().resize_vertically(self.q.len() + 1, 0.0);
            full[self.q.len()] = rest;
            self.q.push(w / rest);
            self.r.push(full);
        } else {
            self.r.push(coeffs);
        }
    }

    /// Orthonormal factor `Q` (n x rank).
    pub fn q(&self) -> DMatrix<f64> {
        if self.q.is_empty() {
            return DMatrix::zeros(self.n, 0);
        }
        DMatrix::from_columns(&self.q)
    }

    fn r_matrix(&self) -> DMatrix<f64> {
        let k = self.q.len();
        let mut r = DMatrix::zeros(k, self.r.len());
        for (j, col) in self.r.iter().enumerate() {
            for i in 0..col.len() {
                r[(i, j)] = col[i];
            }
        }
        r
    }

    /// Singular values of the stacked columns, descending.
    pub fn singular_values(&self) -> Vec<f64> {
        if self.q.is_empty() {
            return Vec::new();
        }
        let mut s: Vec<f64> = self.r_matrix().singular_values().iter().copied().collect();
        s.sort_by(|a, b| b.total_cmp(a));
        s
    }

    /// Left singular vectors with singular value at least
    /// `σ_max · 10^(-decay)`.
    pub fn truncated_svd(&self, decay: f64) -> DMatrix<f64> {
        if self.q.is_empty() {
            return DMatrix::zeros(self.n, 0);
        }
        let svd = self.r_matrix().svd(true, false);
        let u = svd.u.expect("left singular vectors");
        let sigma = &svd.singular_values;
        let smax = sigma.iter().fold(0.0f64, |m, &s| m.max(s));
        let threshold = smax * 10f64.powf(-decay);
        let mut keep: Vec<usize> = (0..sigma.len()).filter(|&i| sigma[i] >= threshold && sigma[i] > 0.0).collect();
        keep.sort_by(|&a, &b| sigma[b].total_cmp(&sigma[a]));
        let q = self.q();
        let mut v = DMatrix::zeros(self.n, keep.len());
        for (j, &i) in keep.iter().enumerate() {
            v.set_column(j, &(&q * u.column(i)));
        }
        v
    }
}

/// Transfer function `c (s I - A)^{-1} b` of a small dense single-input
/// system, evaluated in `O(r²)` per frequency after a Hessenberg reduction.
#[derive(Clone, Debug)]
pub struct HessenbergTransfer {
    h: DMatrix<f64>,
    b: DVector<f64>,
    c: DMatrix<f64>,
}

impl HessenbergTransfer {
    pub fn new(a: &DMatrix<f64>, b: &DVector<f64>, c: &DMatrix<f64>) -> Self {
        if a.nrows() == 0 {
            return HessenbergTransfer { h: a.clone(), b: b.clone(), c: c.clone() };
        }
        let hess = a.clone().hessenberg();
        let (q, h) = hess.unpack();
        HessenbergTransfer { b: q.transpose() * b, c: c * &q, h }
    }

    pub fn order(&self) -> usize {
        self.h.nrows()
    }

    /// Returns `None` if `s I - A` is numerically singular.
    pub fn eval(&self, s: Complex<f64>) -> Option<Vec<Complex<f64>>> {
        let r = self.h.nrows();
        let mut m: Vec<Complex<f64>> = Vec::with_capacity(r * r);
        // row-major copy of s I - H
        for i in 0..r {
            for j in 0..r {
                let v = if i == j { s - self.h[(i, j)] } else { Complex::new(-self.h[(i, j)], 0.0) };
                m.push(v);
            }
        }
        let mut x: Vec<Complex<f64>> = self.b.iter().map(|&v| Complex::new(v, 0.0)).collect();
        for k in 0..r {
            if k + 1 < r && m[(k + 1) * r + k].norm() > m[k * r + k].norm() {
                for j in k..r {
                    m.swap(k * r + j, (k + 1) * r + j);
                }
                x.swap(k, k + 1);
            }
            let piv = m[k * r + k];
            if piv.norm() == 0.0 {
                return None;
            }
            if k + 1 < r {
                let f = m[(k + 1) * r + k] / piv;
                if f != Complex::new(0.0, 0.0) {
                    for j in k..r {
                        let t = m[k * r + j];
                        m[(k + 1) * r + j] -= f * t;
                    }
                    let t = x[k];
                    x[k + 1] -= f * t;
                }
            }
        }
        for k in (0..r).rev() {
            let mut acc = x[k];
            for j in k + 1..r {
                acc -= m[k * r + j] * x[j];
            }
            x[k] = acc / m[k * r + k];
        }
        if x.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return None;
        }
        Some((0..self.c.nrows()).map(|o| (0..r).map(|j| x[j] * self.c[(o, j)]).sum()).collect())
    }
}

/// Largest eigenvalue of a symmetric matrix.
pub fn max_symmetric_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    m.clone().symmetric_eigenvalues().iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b))
}

/// Largest singular value.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().iter().fold(0.0, |a, &b| a.max(b))
}
