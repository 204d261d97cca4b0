//! Residual dual norms and accumulated a posteriori bounds.
//!
//! Residuals are the rows of the full-order system evaluated at a candidate
//! trajectory, so both vanish on the full-order solution. Dual norms are taken
//! in `Y_h` with Gram matrix `X`: `ε = sqrt(rᵀ X⁻¹ r)`.

use crate::error::{Error, Result};
use crate::fom::FomOperators;
use crate::linalg::{dot, Trajectory};

/// Coercivity constant of `μ a(·,·)` with respect to `X`; exact because `X = A`.
pub fn coercivity_lower_bound(mu: f64) -> Result<f64> {
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(Error::invalid(format!(
            "diffusion parameter must be positive, got {mu}"
        )));
    }
    Ok(mu)
}

fn riesz_norm(ops: &FomOperators, r: &[f64]) -> f64 {
    let mut w = r.to_vec();
    ops.riesz().solve_l_in_place(&mut w);
    dot(&w, &w).sqrt()
}

fn check_shape(ops: &FomOperators, t: &Trajectory, what: &str) -> Result<()> {
    if (t.n_dof(), t.n_steps()) != (ops.n_dof(), ops.steps()) {
        return Err(Error::invalid(format!(
            "{what} trajectory is {}x{}, expected {}x{}",
            t.n_dof(),
            t.n_steps(),
            ops.n_dof(),
            ops.steps()
        )));
    }
    Ok(())
}

/// State residual at `t_k`, `1 ≤ k ≤ K`:
/// `Σ_q D_{k,q} M y(t_q) + μ A y(t_k) + M u(t_k)`.
pub fn primal_residual(
    ops: &FomOperators,
    state: &Trajectory,
    control: &Trajectory,
    mu: f64,
    k: usize,
) -> Result<Vec<f64>> {
    check_shape(ops, state, "state")?;
    check_shape(ops, control, "control")?;
    if k < 1 || k > ops.steps() {
        return Err(Error::invalid(format!(
            "primal residual index {k} outside 1..={}",
            ops.steps()
        )));
    }
    let r = k - 1;
    let n = ops.n_dof();
    let mut acc = control.step(r).to_vec();
    for q in 0..=r {
        crate::linalg::axpy(&mut acc, ops.scheme().band(r - q), state.step(q));
    }
    let mut out = vec![0.0; n];
    ops.mass().mul_into(&acc, &mut out);
    ops.stiffness().mul_add(mu, state.step(r), &mut out);
    Ok(out)
}

pub fn primal_residual_norm(
    ops: &FomOperators,
    state: &Trajectory,
    control: &Trajectory,
    mu: f64,
    k: usize,
) -> Result<f64> {
    Ok(riesz_norm(ops, &primal_residual(ops, state, control, mu, k)?))
}

/// Adjoint residual at `T - t_k`, `0 ≤ k ≤ K-1`:
/// `Y_d(t_k) - M y(t_k) + Σ_q D_{q,k} M p̄_q + μ A p̄_k`.
pub fn dual_residual(
    ops: &FomOperators,
    adjoint: &Trajectory,
    state: &Trajectory,
    mu: f64,
    k: usize,
) -> Result<Vec<f64>> {
    check_shape(ops, adjoint, "adjoint")?;
    check_shape(ops, state, "state")?;
    let steps = ops.steps();
    if k >= steps {
        return Err(Error::invalid(format!(
            "dual residual index {k} outside 0..{steps}"
        )));
    }
    let n = ops.n_dof();
    let mut acc = vec![0.0; n];
    for q in k..steps {
        crate::linalg::axpy(&mut acc, ops.scheme().band(q - k), adjoint.step(q));
    }
    if let Some(r) = ops.alignment().state_for_adjoint(k) {
        crate::linalg::axpy(&mut acc, -1.0, state.step(r));
    }
    let mut out = ops.yd_loads().step(k).to_vec();
    ops.mass().mul_add(1.0, &acc, &mut out);
    ops.stiffness().mul_add(mu, adjoint.step(k), &mut out);
    Ok(out)
}

pub fn dual_residual_norm(
    ops: &FomOperators,
    adjoint: &Trajectory,
    state: &Trajectory,
    mu: f64,
    k: usize,
) -> Result<f64> {
    Ok(riesz_norm(ops, &dual_residual(ops, adjoint, state, mu, k)?))
}

/// `bound_k² = ε_k²/α + Σ_{k'<k} Δ_{k'}`, `Δ_{k'} = Σ_{j≤k'} ε_j²/α`.
pub fn primal_error_bound(eps: &[f64], alpha_mu: f64) -> Result<Vec<f64>> {
    if !(alpha_mu > 0.0) {
        return Err(Error::invalid("coercivity constant must be positive"));
    }
    let mut out = Vec::with_capacity(eps.len());
    let mut delta = 0.0;
    let mut delta_sum = 0.0;
    for &e in eps {
        let w = e * e / alpha_mu;
        out.push((w + delta_sum).sqrt());
        delta += w;
        delta_sum += delta;
    }
    Ok(out)
}

/// Backward mirror of [`primal_error_bound`]; index `k` refers to `T - t_k`
/// and the terminal residual at `T - t_K` is zero.
pub fn dual_error_bound(eps: &[f64], alpha_mu: f64) -> Result<Vec<f64>> {
    let mut rev: Vec<f64> = eps.to_vec();
    rev.reverse();
    let mut out = primal_error_bound(&rev, alpha_mu)?;
    out.reverse();
    Ok(out)
}

/// Residual norms and bounds over all time levels at one parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorBoundSeries {
    pub mu: f64,
    pub alpha_mu: f64,
    /// `ε^pr(t_k)`, `k = 1..K`
    pub eps_pr: Vec<f64>,
    /// `ε^du(T - t_k)`, `k = 0..K-1`
    pub eps_du: Vec<f64>,
    pub delta_pr: Vec<f64>,
    pub delta_du: Vec<f64>,
}

impl ErrorBoundSeries {
    /// Greedy indicator: primal bound at `t_K` plus dual bound at `T - t_0`.
    pub fn indicator(&self) -> f64 {
        self.delta_pr.last().copied().unwrap_or(0.0) + self.delta_du.first().copied().unwrap_or(0.0)
    }
}

pub fn bound_series(
    ops: &FomOperators,
    state: &Trajectory,
    adjoint: &Trajectory,
    control: &Trajectory,
    mu: f64,
) -> Result<ErrorBoundSeries> {
    let alpha_mu = coercivity_lower_bound(mu)?;
    let k = ops.steps();
    let eps_pr = (1..=k)
        .map(|s| primal_residual_norm(ops, state, control, mu, s))
        .collect::<Result<Vec<_>>>()?;
    let eps_du = (0..k)
        .map(|s| dual_residual_norm(ops, adjoint, state, mu, s))
        .collect::<Result<Vec<_>>>()?;
    let delta_pr = primal_error_bound(&eps_pr, alpha_mu)?;
    let delta_du = dual_error_bound(&eps_du, alpha_mu)?;
    Ok(ErrorBoundSeries {
        mu,
        alpha_mu,
        eps_pr,
        eps_du,
        delta_pr,
        delta_du,
    })
}
