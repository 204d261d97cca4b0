//! Reduced optimality system and lifting back to the finite-element space.
//!
//! The reduced system has the structure of the full one with `M, A` replaced
//! by their projections, so its size is `2·K·N` regardless of the mesh.

use faer::prelude::*;
use faer::{Mat, MatRef};

use crate::caputo::L1Scheme;
use crate::error::{Error, Result};
use crate::fom::{Alignment, FomSolution};
use crate::linalg::{backward_error, dense_inf_norm, SymTridiag, Trajectory};

/// Projected operators of one reduced space.
#[derive(Debug, Clone, PartialEq)]
pub struct RbOperators {
    pub scheme: L1Scheme,
    pub gamma: f64,
    /// `Z_yᵀ M Z_y`
    pub m_y: Mat<f64>,
    /// `Z_yᵀ A Z_y`
    pub a_y: Mat<f64>,
    /// `Z_yᵀ M Z_p`
    pub b_y: Mat<f64>,
    /// `Z_pᵀ M Z_p`
    pub m_p: Mat<f64>,
    /// `Z_pᵀ A Z_p`
    pub a_p: Mat<f64>,
    /// `Z_pᵀ M Z_y`
    pub b_p: Mat<f64>,
    /// `Z_pᵀ Y_d(t_j)`, `j = 0..K-1`, one column per step.
    pub yd_loads: Mat<f64>,
    /// `Z_yᵀ M ŷ_d(t_k)`, `k = 1..K`, for the reduced cost.
    pub yd_state: Mat<f64>,
    /// `ŷ_d(t_k)ᵀ M ŷ_d(t_k)`, `k = 1..K`.
    pub yd_sq: Vec<f64>,
}

impl RbOperators {
    pub fn dim(&self) -> usize {
        self.m_y.nrows()
    }

    pub fn steps(&self) -> usize {
        self.scheme.steps()
    }
}

/// Reduced coefficients; column `k` of `y_n` is the state at `t_{k+1}`,
/// column `j` of `p_bar_n` the adjoint at `T - t_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct RbSolution {
    pub mu: f64,
    pub y_n: Mat<f64>,
    pub p_bar_n: Mat<f64>,
    pub cost: f64,
    pub residual: f64,
}

/// Dense reduced KKT matrix and right-hand side.
pub fn assemble_rb_system(ops: &RbOperators, mu: f64) -> Result<(Mat<f64>, Mat<f64>)> {
    let n = ops.dim();
    if n == 0 {
        return Err(Error::invalid("reduced space is empty"));
    }
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(Error::invalid(format!(
            "diffusion parameter must be positive, got {mu}"
        )));
    }
    let k = ops.steps();
    let off = k * n;
    let size = 2 * off;
    let inv_gamma = 1.0 / ops.gamma;
    let mut a = Mat::<f64>::zeros(size, size);
    for r in 0..k {
        for q in 0..=r {
            let d = ops.scheme.band(r - q);
            for i in 0..n {
                for j in 0..n {
                    let mut vy = d * ops.m_y[(i, j)];
                    let mut vp = d * ops.m_p[(i, j)];
                    if q == r {
                        vy += mu * ops.a_y[(i, j)];
                        vp += mu * ops.a_p[(i, j)];
                    }
                    a[(r * n + i, q * n + j)] = vy;
                    a[(off + q * n + i, off + r * n + j)] = vp;
                }
            }
        }
        if r + 1 < k {
            let s = r + 1;
            for i in 0..n {
                for j in 0..n {
                    a[(r * n + i, off + s * n + j)] = inv_gamma * ops.b_y[(i, j)];
                    a[(off + s * n + i, r * n + j)] = -ops.b_p[(i, j)];
                }
            }
        }
    }
    let rhs = Mat::from_fn(size, 1, |i, _| {
        if i < off {
            0.0
        } else {
            let (s, c) = ((i - off) / n, (i - off) % n);
            -ops.yd_loads[(c, s)]
        }
    });
    Ok((a, rhs))
}

pub fn solve_rb(ops: &RbOperators, mu: f64) -> Result<RbSolution> {
    let (a, rhs) = assemble_rb_system(ops, mu)?;
    let (n, k) = (ops.dim(), ops.steps());
    let lu = a.partial_piv_lu();
    let mut x = lu.solve(&rhs);
    let a_norm = dense_inf_norm(a.as_ref());
    let rel = |r: &Mat<f64>, x: &Mat<f64>| backward_error(r.as_ref(), a_norm, x.as_ref(), rhs.as_ref());
    let mut r = &rhs - &a * &x;
    let mut residual = rel(&r, &x);
    for _ in 0..2 {
        if residual <= 1e-13 {
            break;
        }
        let dx = lu.solve(&r);
        x += &dx;
        r = &rhs - &a * &x;
        residual = rel(&r, &x);
    }
    if !residual.is_finite() || residual > 1e-10 {
        return Err(Error::Numerical(format!(
            "reduced system residual {residual:e} at mu = {mu} exceeds 1e-10"
        )));
    }
    let y_n = Mat::from_fn(n, k, |i, s| x[(s * n + i, 0)]);
    let p_bar_n = Mat::from_fn(n, k, |i, s| x[(k * n + s * n + i, 0)]);
    let cost = reduced_cost(ops, y_n.as_ref(), p_bar_n.as_ref());
    if !cost.is_finite() {
        return Err(Error::Numerical(format!("reduced cost is not finite at mu = {mu}")));
    }
    Ok(RbSolution {
        mu,
        y_n,
        p_bar_n,
        cost,
        residual,
    })
}

fn quad(m: MatRef<'_, f64>, x: MatRef<'_, f64>, col_a: usize, y: MatRef<'_, f64>, col_b: usize) -> f64 {
    let n = m.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        let mut v = 0.0;
        for j in 0..n {
            v += m[(i, j)] * y[(j, col_b)];
        }
        acc += x[(i, col_a)] * v;
    }
    acc
}

/// Cost of a reduced trajectory, same quadrature as the full-order cost.
pub fn reduced_cost(ops: &RbOperators, y_n: MatRef<'_, f64>, p_bar_n: MatRef<'_, f64>) -> f64 {
    let k = ops.steps();
    let n = ops.dim();
    let tau = ops.scheme.tau();
    let mut tracking = 0.0;
    let mut control = 0.0;
    for r in 0..k {
        let cross: f64 = (0..n).map(|i| y_n[(i, r)] * ops.yd_state[(i, r)]).sum();
        tracking += quad(ops.m_y.as_ref(), y_n, r, y_n, r) - 2.0 * cross + ops.yd_sq[r];
        if r + 1 < k {
            control += quad(ops.m_p.as_ref(), p_bar_n, r + 1, p_bar_n, r + 1);
        }
    }
    let g = ops.gamma;
    0.5 * tau * tracking.max(0.0) + 0.5 * g * tau * control / (g * g)
}

/// Reduced solution mapped back to nodal values.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedSolution {
    pub mu: f64,
    pub y: Trajectory,
    pub p_bar: Trajectory,
    pub u: Trajectory,
}

pub fn lift(
    z_y: MatRef<'_, f64>,
    z_p: MatRef<'_, f64>,
    sol: &RbSolution,
    gamma: f64,
    alignment: Alignment,
) -> Result<LiftedSolution> {
    if z_y.ncols() != sol.y_n.nrows() || z_p.ncols() != sol.p_bar_n.nrows() {
        return Err(Error::invalid(format!(
            "basis has {} / {} columns, coefficients have {} / {} rows",
            z_y.ncols(),
            z_p.ncols(),
            sol.y_n.nrows(),
            sol.p_bar_n.nrows()
        )));
    }
    let y = Trajectory::from_mat((z_y * &sol.y_n).as_ref());
    let p_bar = Trajectory::from_mat((z_p * &sol.p_bar_n).as_ref());
    let u = crate::fom::recover_control(&p_bar, gamma, alignment)?;
    Ok(LiftedSolution {
        mu: sol.mu,
        y,
        p_bar,
        u,
    })
}

/// Errors at one stored level: state at `t_{k+1}`, adjoint at `T - t_k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorRow {
    pub k: usize,
    pub y_x: f64,
    pub y_l2: f64,
    pub p_x: f64,
    pub p_l2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorTable {
    pub mu: f64,
    pub rows: Vec<ErrorRow>,
}

impl ErrorTable {
    fn fold(&self, f: impl Fn(&ErrorRow) -> f64) -> (f64, f64) {
        let max = self.rows.iter().map(&f).fold(0.0, f64::max);
        let sum = self.rows.iter().map(&f).sum();
        (max, sum)
    }

    pub fn y_x(&self) -> (f64, f64) {
        self.fold(|r| r.y_x)
    }

    pub fn p_x(&self) -> (f64, f64) {
        self.fold(|r| r.p_x)
    }

    pub fn y_l2(&self) -> (f64, f64) {
        self.fold(|r| r.y_l2)
    }

    pub fn p_l2(&self) -> (f64, f64) {
        self.fold(|r| r.p_l2)
    }

    /// Time-summed `X`-norm error of state plus adjoint.
    pub fn total_x(&self) -> f64 {
        self.y_x().1 + self.p_x().1
    }
}

pub fn compare(
    fom: &FomSolution,
    rb: &LiftedSolution,
    inner: &SymTridiag,
    mass: &SymTridiag,
) -> Result<ErrorTable> {
    let dims = |t: &Trajectory| (t.n_dof(), t.n_steps());
    if dims(&fom.y) != dims(&rb.y) || dims(&fom.p_bar) != dims(&rb.p_bar) {
        return Err(Error::invalid("full-order and reduced trajectories differ in shape"));
    }
    if fom.y.n_dof() != inner.dim() {
        return Err(Error::invalid("trajectories do not match the spatial operators"));
    }
    let ey = fom.y.sub(&rb.y);
    let ep = fom.p_bar.sub(&rb.p_bar);
    let rows = (0..ey.n_steps())
        .map(|k| ErrorRow {
            k,
            y_x: inner.norm(ey.step(k)),
            y_l2: mass.norm(ey.step(k)),
            p_x: inner.norm(ep.step(k)),
            p_l2: mass.norm(ep.step(k)),
        })
        .collect();
    Ok(ErrorTable { mu: fom.mu, rows })
}
