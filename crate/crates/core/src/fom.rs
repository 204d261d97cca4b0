//! Full-order optimality system.
//!
//! The state runs forward on `t_1..t_K`, the adjoint is stored in reversed time
//! `p̄(s) = p(T - s)` on `s = T-t_0..T-t_{K-1}`, and the control is eliminated
//! through `γ u = p`. With `A` the unit stiffness matrix the system reads
//!
//! ```text
//! [ D⊗M + μ I⊗A     (1/γ) I_b⊗M  ] [vec y ]   [    0     ]
//! [ -I_bᵀ⊗M         Dᵀ⊗M + μ I⊗A ] [vec p̄]  = [ -vec Y_d ]
//! ```
//!
//! Both diagonal blocks are positive definite for `μ > 0`.

use std::sync::OnceLock;

use faer::prelude::*;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{Argsort, Pair, SparseColMat, SymbolicSparseColMat, Triplet};

use crate::caputo::{l1_coefficients, L1Scheme};
use crate::error::{Error, Result};
use crate::fem1d::{assemble_load, FemMatrices};
use crate::linalg::{axpy, backward_error, SymTridiag, TridiagCholesky, Trajectory};
use crate::problem::ProblemSpec;

/// Pairing of state time `t_k` with the stored adjoint value `p̄(T - t_k)`.
///
/// State row `r` (time `t_{r+1}`) reads stored adjoint index `r + 1`; the
/// last state row would read `p̄(T - t_K) = 0` and has no partner.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Alignment {
    steps: usize,
}

pub fn build_alignment(steps: usize) -> Result<Alignment> {
    if steps < 1 {
        return Err(Error::invalid("alignment needs at least one time step"));
    }
    Ok(Alignment { steps })
}

impl Alignment {
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn adjoint_for_state(&self, row: usize) -> Option<usize> {
        (row + 1 < self.steps).then_some(row + 1)
    }

    /// `None` for stored index 0, whose partner is `y(t_0) = 0`.
    pub fn state_for_adjoint(&self, index: usize) -> Option<usize> {
        index.checked_sub(1)
    }

    /// The 0/1 matrix `I_b`.
    pub fn to_dense(&self) -> Mat<f64> {
        Mat::from_fn(self.steps, self.steps, |r, j| {
            if self.adjoint_for_state(r) == Some(j) {
                1.0
            } else {
                0.0
            }
        })
    }
}

struct KktPattern {
    symbolic: SymbolicSparseColMat<usize>,
    argsort: Argsort<usize>,
    lu: SymbolicLu<usize>,
}

/// Parameter-independent data of the full-order model.
pub struct FomOperators {
    spec: ProblemSpec,
    fem: FemMatrices,
    scheme: L1Scheme,
    d_mat: Mat<f64>,
    alignment: Alignment,
    yd_loads: Trajectory,
    yd_nodal: Trajectory,
    riesz: TridiagCholesky,
    pattern: OnceLock<KktPattern>,
}

impl std::fmt::Debug for FomOperators {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FomOperators")
            .field("spec", &self.spec)
            .field("n_dof", &self.n_dof())
            .field("steps", &self.steps())
            .finish_non_exhaustive()
    }
}

impl FomOperators {
    pub fn new(spec: &ProblemSpec) -> Result<Self> {
        spec.validate()?;
        let fem = FemMatrices::new(&spec.mesh);
        let scheme = l1_coefficients(spec.alpha, spec.t_final, spec.steps)?;
        let d_mat = scheme.build_d();
        let alignment = build_alignment(spec.steps)?;
        let grid = *scheme.grid();
        let k = spec.steps;
        let n = fem.n_dof();

        let mut yd_loads = Trajectory::zeros(n, k);
        for j in 0..k {
            let t = grid.node(j);
            let load = assemble_load(|x| spec.desired_at(x, t), &spec.mesh);
            yd_loads.step_mut(j).copy_from_slice(&load);
        }
        let mut yd_nodal = Trajectory::zeros(n, k);
        for r in 0..k {
            let t = grid.node(r + 1);
            let vals = spec.mesh.interpolate(|x| spec.desired_at(x, t));
            yd_nodal.step_mut(r).copy_from_slice(&vals);
        }
        if yd_loads.as_slice().iter().any(|v| !v.is_finite())
            || yd_nodal.as_slice().iter().any(|v| !v.is_finite())
        {
            return Err(Error::invalid("desired state is not finite on the space-time grid"));
        }
        let riesz = fem.inner.cholesky()?;
        Ok(Self {
            spec: spec.clone(),
            fem,
            scheme,
            d_mat,
            alignment,
            yd_loads,
            yd_nodal,
            riesz,
            pattern: OnceLock::new(),
        })
    }

    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    pub fn fem(&self) -> &FemMatrices {
        &self.fem
    }

    pub fn mass(&self) -> &SymTridiag {
        &self.fem.mass
    }

    pub fn stiffness(&self) -> &SymTridiag {
        &self.fem.stiffness
    }

    /// Gram matrix `X` of the `Y` inner product.
    pub fn inner(&self) -> &SymTridiag {
        &self.fem.inner
    }

    /// Cholesky factor of `X`, used for Riesz representatives.
    pub fn riesz(&self) -> &TridiagCholesky {
        &self.riesz
    }

    pub fn scheme(&self) -> &L1Scheme {
        &self.scheme
    }

    pub fn d_mat(&self) -> &Mat<f64> {
        &self.d_mat
    }

    pub fn alignment(&self) -> Alignment {
        self.alignment
    }

    /// `Y_d(t_j) = (y_d(t_j), φ_i)` for `j = 0..K-1`.
    pub fn yd_loads(&self) -> &Trajectory {
        &self.yd_loads
    }

    /// Nodal interpolant of `y_d` at `t_1..t_K`.
    pub fn yd_nodal(&self) -> &Trajectory {
        &self.yd_nodal
    }

    pub fn n_dof(&self) -> usize {
        self.fem.n_dof()
    }

    pub fn steps(&self) -> usize {
        self.scheme.steps()
    }

    pub fn system_size(&self) -> usize {
        2 * self.steps() * self.n_dof()
    }

    /// Emits every structural entry of the KKT matrix in a fixed order that
    /// depends only on the operators, never on `(μ, γ)`.
    fn for_each_entry(&self, mu: f64, gamma: f64, mut emit: impl FnMut(usize, usize, f64)) {
        let n = self.n_dof();
        let k = self.steps();
        let off = k * n;
        let m = &self.fem.mass;
        let a = &self.fem.stiffness;
        for r in 0..k {
            for q in 0..=r {
                let d = self.scheme.band(r - q);
                if q != r && d == 0.0 {
                    continue;
                }
                for i in 0..n {
                    for j in i.saturating_sub(1)..(i + 2).min(n) {
                        let mut v = d * m.get(i, j);
                        if q == r {
                            v += mu * a.get(i, j);
                        }
                        emit(r * n + i, q * n + j, v);
                        emit(off + q * n + i, off + r * n + j, v);
                    }
                }
            }
        }
        for r in 0..k {
            if let Some(s) = self.alignment.adjoint_for_state(r) {
                for i in 0..n {
                    for j in i.saturating_sub(1)..(i + 2).min(n) {
                        let v = m.get(i, j);
                        emit(r * n + i, off + s * n + j, v / gamma);
                        emit(off + s * n + i, r * n + j, -v);
                    }
                }
            }
        }
    }

    fn pattern(&self) -> Result<&KktPattern> {
        if let Some(p) = self.pattern.get() {
            return Ok(p);
        }
        let size = self.system_size();
        let mut idx = Vec::new();
        self.for_each_entry(1.0, 1.0, |r, c, _| idx.push(Pair::new(r, c)));
        let (symbolic, argsort) = SymbolicSparseColMat::try_new_from_indices(size, size, &idx)
            .map_err(|e| Error::Numerical(format!("KKT sparsity pattern: {e:?}")))?;
        let lu = SymbolicLu::try_new(symbolic.rb())
            .map_err(|e| Error::Numerical(format!("symbolic LU of the KKT system: {e:?}")))?;
        let _ = self.pattern.set(KktPattern {
            symbolic,
            argsort,
            lu,
        });
        Ok(self.pattern.get().expect("pattern initialized"))
    }

    fn kkt_values(&self, mu: f64, gamma: f64) -> Vec<f64> {
        let mut vals = Vec::new();
        self.for_each_entry(mu, gamma, |_, _, v| vals.push(v));
        vals
    }
}

/// Assembled KKT matrix and right-hand side.
#[derive(Debug, Clone)]
pub struct KktSystem {
    pub matrix: SparseColMat<usize, f64>,
    pub rhs: Vec<f64>,
}

pub fn assemble_kkt(
    ops: &FomOperators,
    mu: f64,
    gamma: f64,
    yd_loads: &Trajectory,
) -> Result<KktSystem> {
    check_parameters(mu, gamma)?;
    let (n, k) = (ops.n_dof(), ops.steps());
    if (yd_loads.n_dof(), yd_loads.n_steps()) != (n, k) {
        return Err(Error::invalid(format!(
            "load trajectory is {}x{}, expected {n}x{k}",
            yd_loads.n_dof(),
            yd_loads.n_steps()
        )));
    }
    let size = ops.system_size();
    let mut triplets = Vec::new();
    ops.for_each_entry(mu, gamma, |r, c, v| triplets.push(Triplet::new(r, c, v)));
    let matrix = SparseColMat::try_new_from_triplets(size, size, &triplets)
        .map_err(|e| Error::Numerical(format!("KKT assembly: {e:?}")))?;
    let mut rhs = vec![0.0; size];
    for (dst, src) in rhs[k * n..].iter_mut().zip(yd_loads.as_slice()) {
        *dst = -src;
    }
    Ok(KktSystem { matrix, rhs })
}

fn check_parameters(mu: f64, gamma: f64) -> Result<()> {
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(Error::invalid(format!(
            "diffusion parameter must be positive, got {mu}"
        )));
    }
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::invalid("gamma must be positive"));
    }
    Ok(())
}

/// Full-order optimal state, adjoint and control at one parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct FomSolution {
    pub mu: f64,
    /// `y(t_1)..y(t_K)`
    pub y: Trajectory,
    /// `p̄(T-t_0)..p̄(T-t_{K-1})`
    pub p_bar: Trajectory,
    /// `u(t_1)..u(t_K)`
    pub u: Trajectory,
    pub cost: f64,
    /// Normwise backward error `‖r‖∞ / (‖A‖∞‖x‖∞ + ‖b‖∞)` of the assembled system.
    pub residual: f64,
}

fn sparse_inf_norm(a: &SparseColMat<usize, f64>) -> f64 {
    let mut rows = vec![0.0f64; a.nrows()];
    let (sym, val) = (a.symbolic(), a.val());
    for j in 0..a.ncols() {
        for p in sym.col_ptr()[j]..sym.col_ptr()[j + 1] {
            rows[sym.row_idx()[p]] += val[p].abs();
        }
    }
    rows.into_iter().fold(0.0, f64::max)
}

pub fn solve_fom(ops: &FomOperators, mu: f64) -> Result<FomSolution> {
    solve_fom_with_loads(ops, mu, ops.yd_loads())
}

/// Solve with an arbitrary adjoint load in place of the desired-state load.
pub fn solve_fom_with_loads(
    ops: &FomOperators,
    mu: f64,
    yd_loads: &Trajectory,
) -> Result<FomSolution> {
    let gamma = ops.spec.gamma;
    check_parameters(mu, gamma)?;
    let (n, k) = (ops.n_dof(), ops.steps());
    if (yd_loads.n_dof(), yd_loads.n_steps()) != (n, k) {
        return Err(Error::invalid("load trajectory does not match the operators"));
    }
    let size = ops.system_size();
    let pattern = ops.pattern()?;
    let matrix = SparseColMat::new_from_argsort(
        pattern.symbolic.clone(),
        &pattern.argsort,
        &ops.kkt_values(mu, gamma),
    )
    .map_err(|e| Error::Numerical(format!("KKT values: {e:?}")))?;
    let lu = Lu::try_new_with_symbolic(pattern.lu.clone(), matrix.rb()).map_err(|e| {
        Error::Factorization {
            mu,
            message: format!("{e:?}"),
        }
    })?;

    let rhs = Mat::from_fn(size, 1, |i, _| if i < k * n { 0.0 } else { -yd_loads.as_slice()[i - k * n] });
    let mut x = lu.solve(&rhs);
    let a_norm = sparse_inf_norm(&matrix);
    let rel = |r: &Mat<f64>, x: &Mat<f64>| backward_error(r.as_ref(), a_norm, x.as_ref(), rhs.as_ref());
    let mut r = &rhs - &matrix * &x;
    let mut residual = rel(&r, &x);
    for _ in 0..2 {
        if residual <= 1e-13 {
            break;
        }
        let dx = lu.solve(&r);
        x += &dx;
        r = &rhs - &matrix * &x;
        residual = rel(&r, &x);
    }
    if !residual.is_finite() || residual > 1e-10 {
        return Err(Error::Numerical(format!(
            "KKT residual {residual:e} at mu = {mu} exceeds 1e-10"
        )));
    }

    let y = Trajectory::from_fn(n, k, |i, s| x[(s * n + i, 0)]);
    let p_bar = Trajectory::from_fn(n, k, |i, s| x[(k * n + s * n + i, 0)]);
    let u = recover_control(&p_bar, gamma, ops.alignment())?;
    let cost = evaluate_cost(ops, &y, &u);
    if !cost.is_finite() {
        return Err(Error::Numerical(format!("cost is not finite at mu = {mu}")));
    }
    Ok(FomSolution {
        mu,
        y,
        p_bar,
        u,
        cost,
        residual,
    })
}

/// `u(t_k) = p̄(T - t_k) / γ`, zero at `t_K`.
pub fn recover_control(p_bar: &Trajectory, gamma: f64, alignment: Alignment) -> Result<Trajectory> {
    if !(gamma > 0.0) {
        return Err(Error::invalid("gamma must be positive"));
    }
    let k = alignment.steps();
    if p_bar.n_steps() != k {
        return Err(Error::invalid("adjoint trajectory does not match the alignment"));
    }
    let n = p_bar.n_dof();
    let mut u = Trajectory::zeros(n, k);
    for r in 0..k {
        if let Some(j) = alignment.adjoint_for_state(r) {
            for (dst, src) in u.step_mut(r).iter_mut().zip(p_bar.step(j)) {
                *dst = src / gamma;
            }
        }
    }
    Ok(u)
}

/// Tracking and control parts of the cost, rectangle rule on `t_1..t_K`.
pub fn cost_terms(ops: &FomOperators, y: &Trajectory, u: &Trajectory) -> (f64, f64) {
    let tau = ops.scheme.tau();
    let m = &ops.fem.mass;
    let diff = y.sub(&ops.yd_nodal);
    let tracking: f64 = (0..y.n_steps()).map(|r| m.inner(diff.step(r), diff.step(r))).sum();
    let control: f64 = (0..u.n_steps()).map(|r| m.inner(u.step(r), u.step(r))).sum();
    (0.5 * tau * tracking, 0.5 * ops.spec.gamma * tau * control)
}

pub fn evaluate_cost(ops: &FomOperators, y: &Trajectory, u: &Trajectory) -> f64 {
    let (tracking, control) = cost_terms(ops, y, u);
    tracking + control
}

fn step_operator(ops: &FomOperators, mu: f64) -> Result<TridiagCholesky> {
    let diag = ops.scheme.band(0);
    ops.fem
        .mass
        .lin_comb(diag, &ops.fem.stiffness, mu)
        .cholesky()
        .map_err(|e| Error::Factorization {
            mu,
            message: e.to_string(),
        })
}

/// Forward sweep of the discrete state equation `(D⊗M + μ I⊗A) y = -(I⊗M) u`.
pub fn solve_state(ops: &FomOperators, mu: f64, control: &Trajectory) -> Result<Trajectory> {
    check_parameters(mu, ops.spec.gamma)?;
    let (n, k) = (ops.n_dof(), ops.steps());
    let chol = step_operator(ops, mu)?;
    let m = &ops.fem.mass;
    let mut y = Trajectory::zeros(n, k);
    let mut rhs = vec![0.0; n];
    for r in 0..k {
        rhs.iter_mut().for_each(|v| *v = 0.0);
        let mut acc = control.step(r).iter().map(|v| -v).collect::<Vec<_>>();
        for q in 0..r {
            axpy(&mut acc, -ops.scheme.band(r - q), y.step(q));
        }
        m.mul_into(&acc, &mut rhs);
        chol.solve_in_place(&mut rhs);
        y.step_mut(r).copy_from_slice(&rhs);
    }
    Ok(y)
}

/// Backward sweep of the discrete adjoint equation for a given state.
pub fn solve_adjoint(ops: &FomOperators, mu: f64, state: &Trajectory) -> Result<Trajectory> {
    check_parameters(mu, ops.spec.gamma)?;
    let (n, k) = (ops.n_dof(), ops.steps());
    let chol = step_operator(ops, mu)?;
    let m = &ops.fem.mass;
    let mut p = Trajectory::zeros(n, k);
    let mut rhs = vec![0.0; n];
    for j in (0..k).rev() {
        let mut acc = vec![0.0; n];
        if let Some(r) = ops.alignment.state_for_adjoint(j) {
            acc.copy_from_slice(state.step(r));
        }
        for q in j + 1..k {
            axpy(&mut acc, -ops.scheme.band(q - j), p.step(q));
        }
        m.mul_into(&acc, &mut rhs);
        axpy(&mut rhs, -1.0, ops.yd_loads.step(j));
        chol.solve_in_place(&mut rhs);
        p.step_mut(j).copy_from_slice(&rhs);
    }
    Ok(p)
}
