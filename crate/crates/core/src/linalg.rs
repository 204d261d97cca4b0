//! Small dense/tridiagonal kernels shared by the solvers.
//!
//! The spatial operators of a uniform P1 discretization are symmetric
//! tridiagonal, so they get a dedicated representation instead of a general
//! sparse matrix. Space-time fields are stored as [`Trajectory`] values:
//! one column of nodal values per time level, column-major.

use faer::{Mat, MatRef};

use crate::error::{Error, Result};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `y += s * x`
pub fn axpy(y: &mut [f64], s: f64, x: &[f64]) {
    debug_assert_eq!(y.len(), x.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += s * xi;
    }
}

fn inf_norm(v: MatRef<'_, f64>) -> f64 {
    let mut m = 0.0f64;
    for j in 0..v.ncols() {
        for i in 0..v.nrows() {
            m = m.max(v[(i, j)].abs());
        }
    }
    m
}

pub(crate) fn dense_inf_norm(a: MatRef<'_, f64>) -> f64 {
    (0..a.nrows())
        .map(|i| (0..a.ncols()).map(|j| a[(i, j)].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Normwise backward error `‖r‖∞ / (‖A‖∞‖x‖∞ + ‖b‖∞)`; zero for a zero system.
pub(crate) fn backward_error(r: MatRef<'_, f64>, a_norm: f64, x: MatRef<'_, f64>, b: MatRef<'_, f64>) -> f64 {
    let scale = a_norm * inf_norm(x) + inf_norm(b);
    let rn = inf_norm(r);
    if scale > 0.0 {
        rn / scale
    } else {
        rn
    }
}

/// Symmetric tridiagonal matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiag {
    diag: Vec<f64>,
    off: Vec<f64>,
}

impl SymTridiag {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Result<Self> {
        if diag.is_empty() || off.len() + 1 != diag.len() {
            return Err(Error::invalid(format!(
                "tridiagonal shape mismatch: {} diagonal, {} off-diagonal entries",
                diag.len(),
                off.len()
            )));
        }
        Ok(Self { diag, off })
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn off_diag(&self) -> &[f64] {
        &self.off
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if i == j {
            self.diag[i]
        } else if i + 1 == j {
            self.off[i]
        } else if j + 1 == i {
            self.off[j]
        } else {
            0.0
        }
    }

    /// `out = self * x`
    pub fn mul_into(&self, x: &[f64], out: &mut [f64]) {
        let n = self.dim();
        debug_assert_eq!(x.len(), n);
        debug_assert_eq!(out.len(), n);
        for i in 0..n {
            let mut v = self.diag[i] * x[i];
            if i > 0 {
                v += self.off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                v += self.off[i] * x[i + 1];
            }
            out[i] = v;
        }
    }

    /// `out += s * self * x`
    pub fn mul_add(&self, s: f64, x: &[f64], out: &mut [f64]) {
        let n = self.dim();
        for i in 0..n {
            let mut v = self.diag[i] * x[i];
            if i > 0 {
                v += self.off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                v += self.off[i] * x[i + 1];
            }
            out[i] += s * v;
        }
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.mul_into(x, &mut out);
        out
    }

    /// `xᵀ self y`
    pub fn inner(&self, x: &[f64], y: &[f64]) -> f64 {
        let n = self.dim();
        let mut acc = 0.0;
        for i in 0..n {
            let mut v = self.diag[i] * y[i];
            if i > 0 {
                v += self.off[i - 1] * y[i - 1];
            }
            if i + 1 < n {
                v += self.off[i] * y[i + 1];
            }
            acc += x[i] * v;
        }
        acc
    }

    pub fn norm(&self, x: &[f64]) -> f64 {
        self.inner(x, x).max(0.0).sqrt()
    }

    /// `self * B` for a dense `B`.
    pub fn mul_mat(&self, b: MatRef<'_, f64>) -> Mat<f64> {
        let n = self.dim();
        assert_eq!(b.nrows(), n);
        let mut out = Mat::zeros(n, b.ncols());
        for j in 0..b.ncols() {
            for i in 0..n {
                let mut v = self.diag[i] * b[(i, j)];
                if i > 0 {
                    v += self.off[i - 1] * b[(i - 1, j)];
                }
                if i + 1 < n {
                    v += self.off[i] * b[(i + 1, j)];
                }
                out[(i, j)] = v;
            }
        }
        out
    }

    /// Congruence `Lᵀ · self · R` for dense `L`, `R`.
    pub fn congruence(&self, left: MatRef<'_, f64>, right: MatRef<'_, f64>) -> Mat<f64> {
        left.transpose() * self.mul_mat(right)
    }

    /// `s * self + t * other`
    pub fn lin_comb(&self, s: f64, other: &Self, t: f64) -> Self {
        assert_eq!(self.dim(), other.dim());
        Self {
            diag: self.diag.iter().zip(&other.diag).map(|(a, b)| s * a + t * b).collect(),
            off: self.off.iter().zip(&other.off).map(|(a, b)| s * a + t * b).collect(),
        }
    }

    pub fn to_dense(&self) -> Mat<f64> {
        let n = self.dim();
        Mat::from_fn(n, n, |i, j| self.get(i, j))
    }

    pub fn cholesky(&self) -> Result<TridiagCholesky> {
        TridiagCholesky::new(self)
    }
}

/// Cholesky factor `L` (lower bidiagonal) of a symmetric positive definite
/// tridiagonal matrix, `A = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct TridiagCholesky {
    diag: Vec<f64>,
    sub: Vec<f64>,
}

impl TridiagCholesky {
    pub fn new(a: &SymTridiag) -> Result<Self> {
        let n = a.dim();
        let mut diag = vec![0.0; n];
        let mut sub = vec![0.0; n.saturating_sub(1)];
        for i in 0..n {
            let mut piv = a.diag[i];
            if i > 0 {
                piv -= sub[i - 1] * sub[i - 1];
            }
            if !(piv > 0.0) || !piv.is_finite() {
                return Err(Error::Numerical(format!(
                    "tridiagonal Cholesky breakdown at row {i} (pivot {piv:e})"
                )));
            }
            diag[i] = piv.sqrt();
            if i + 1 < n {
                sub[i] = a.off[i] / diag[i];
            }
        }
        Ok(Self { diag, sub })
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// `x ← Lᵀ x`
    pub fn mul_lt_in_place(&self, x: &mut [f64]) {
        let n = self.dim();
        for i in 0..n {
            let mut v = self.diag[i] * x[i];
            if i + 1 < n {
                v += self.sub[i] * x[i + 1];
            }
            x[i] = v;
        }
    }

    /// `x ← L⁻ᵀ x`
    pub fn solve_lt_in_place(&self, x: &mut [f64]) {
        let n = self.dim();
        for i in (0..n).rev() {
            let mut v = x[i];
            if i + 1 < n {
                v -= self.sub[i] * x[i + 1];
            }
            x[i] = v / self.diag[i];
        }
    }

    /// `x ← L⁻¹ x`
    pub fn solve_l_in_place(&self, x: &mut [f64]) {
        let n = self.dim();
        for i in 0..n {
            let mut v = x[i];
            if i > 0 {
                v -= self.sub[i - 1] * x[i - 1];
            }
            x[i] = v / self.diag[i];
        }
    }

    /// `x ← A⁻¹ x`
    pub fn solve_in_place(&self, x: &mut [f64]) {
        self.solve_l_in_place(x);
        self.solve_lt_in_place(x);
    }
}

/// Nodal values on a sequence of time levels.
///
/// Column `k` holds the `n_dof` interior values of level `k`; which physical
/// time a column refers to is fixed by the owner (state levels are
/// `t_1..t_K`, adjoint levels are `T-t_0..T-t_{K-1}`).
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    n_dof: usize,
    n_steps: usize,
    data: Vec<f64>,
}

impl Trajectory {
    pub fn zeros(n_dof: usize, n_steps: usize) -> Self {
        Self {
            n_dof,
            n_steps,
            data: vec![0.0; n_dof * n_steps],
        }
    }

    pub fn from_fn(n_dof: usize, n_steps: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n_dof * n_steps);
        for k in 0..n_steps {
            for i in 0..n_dof {
                data.push(f(i, k));
            }
        }
        Self {
            n_dof,
            n_steps,
            data,
        }
    }

    pub fn from_mat(m: MatRef<'_, f64>) -> Self {
        Self::from_fn(m.nrows(), m.ncols(), |i, k| m[(i, k)])
    }

    pub fn n_dof(&self) -> usize {
        self.n_dof
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn step(&self, k: usize) -> &[f64] {
        &self.data[k * self.n_dof..(k + 1) * self.n_dof]
    }

    pub fn step_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.data[k * self.n_dof..(k + 1) * self.n_dof]
    }

    /// Time-major stacking, i.e. the `vec(·)` ordering of the Kronecker system.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mat(&self) -> MatRef<'_, f64> {
        MatRef::from_column_major_slice(&self.data, self.n_dof, self.n_steps)
    }

    pub fn to_mat(&self) -> Mat<f64> {
        self.as_mat().to_owned()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            n_dof: self.n_dof,
            n_steps: self.n_steps,
            data: self.data.iter().map(|v| v * s).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.n_dof, self.n_steps), (other.n_dof, other.n_steps));
        Self {
            n_dof: self.n_dof,
            n_steps: self.n_steps,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Per-level norms in the inner product given by `gram`.
    pub fn step_norms(&self, gram: &SymTridiag) -> Vec<f64> {
        (0..self.n_steps).map(|k| gram.norm(self.step(k))).collect()
    }
}
