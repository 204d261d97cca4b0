//! Reduced spaces: snapshots, POD in the `X` inner product, Gram–Schmidt
//! enrichment, greedy parameter selection and operator projection.

use std::time::Instant;

use faer::{Mat, MatRef};

use crate::error::{Error, Result};
use crate::error_bounds::bound_series;
use crate::fom::{solve_fom, FomOperators, FomSolution};
use crate::linalg::{SymTridiag, Trajectory};
use crate::rb_online::{compare, lift, solve_rb, LiftedSolution, RbOperators, RbSolution};

/// State and adjoint bases, `X`-orthonormal, of equal dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct RbSpace {
    pub z_y: Mat<f64>,
    pub z_p: Mat<f64>,
    /// Parameters in selection order.
    pub selected: Vec<f64>,
}

impl RbSpace {
    pub fn empty(n_dof: usize) -> Self {
        Self {
            z_y: Mat::zeros(n_dof, 0),
            z_p: Mat::zeros(n_dof, 0),
            selected: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.z_y.ncols()
    }

    pub fn n_dof(&self) -> usize {
        self.z_y.nrows()
    }

    /// Largest entry of `|ZᵀXZ - I|` over both bases.
    pub fn gram_deviation(&self, x: &SymTridiag) -> f64 {
        gram_deviation(self.z_y.as_ref(), x).max(gram_deviation(self.z_p.as_ref(), x))
    }

    pub fn solve(&self, rb_ops: &RbOperators, mu: f64) -> Result<RbSolution> {
        solve_rb(rb_ops, mu)
    }

    pub fn lift(&self, sol: &RbSolution, ops: &FomOperators) -> Result<LiftedSolution> {
        lift(
            self.z_y.as_ref(),
            self.z_p.as_ref(),
            sol,
            ops.spec().gamma,
            ops.alignment(),
        )
    }
}

pub fn gram_deviation(z: MatRef<'_, f64>, x: &SymTridiag) -> f64 {
    let g = x.congruence(z, z);
    let mut worst = 0.0f64;
    for j in 0..g.ncols() {
        for i in 0..g.nrows() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - target).abs());
        }
    }
    worst
}

/// State columns `y(t_1..t_K)` and adjoint columns `p̄(T-t_0..T-t_{K-1})`.
pub fn generate_snapshots(ops: &FomOperators, mu: f64) -> Result<(Mat<f64>, Mat<f64>)> {
    let sol = solve_fom(ops, mu)?;
    Ok((sol.y.to_mat(), sol.p_bar.to_mat()))
}

/// All `X`-orthonormal POD modes of a snapshot set, by decreasing energy.
#[derive(Debug, Clone)]
pub struct PodModes {
    pub modes: Mat<f64>,
    pub singular_values: Vec<f64>,
    /// Number of modes meeting the energy criterion.
    pub rank: usize,
}

impl PodModes {
    pub fn basis(&self) -> MatRef<'_, f64> {
        self.modes.as_ref().subcols(0, self.rank)
    }
}

/// POD with `X = L Lᵀ`: SVD of `Lᵀ S`, modes `L⁻ᵀ U`. The retained rank is the
/// smallest `r` with tail energy `Σ_{i>r} σ_i² ≤ tol² Σ σ_i²`.
pub fn pod_modes(snapshots: MatRef<'_, f64>, x: &SymTridiag, tol: f64) -> Result<PodModes> {
    let n = snapshots.nrows();
    if n != x.dim() {
        return Err(Error::invalid(format!(
            "snapshots have {n} rows, inner product has dimension {}",
            x.dim()
        )));
    }
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::invalid(format!("POD tolerance must lie in (0, 1), got {tol}")));
    }
    if snapshots.ncols() == 0 {
        return Ok(PodModes {
            modes: Mat::zeros(n, 0),
            singular_values: Vec::new(),
            rank: 0,
        });
    }
    let chol = x.cholesky()?;
    let mut b = snapshots.to_owned();
    for j in 0..b.ncols() {
        let mut col: Vec<f64> = (0..n).map(|i| b[(i, j)]).collect();
        chol.mul_lt_in_place(&mut col);
        for i in 0..n {
            b[(i, j)] = col[i];
        }
    }
    let svd = b
        .thin_svd()
        .map_err(|e| Error::Numerical(format!("POD singular value decomposition: {e:?}")))?;
    let s = svd.S().column_vector();
    let sigma: Vec<f64> = (0..s.nrows()).map(|i| s[i]).collect();
    let total: f64 = sigma.iter().map(|v| v * v).sum();
    if total == 0.0 {
        return Ok(PodModes {
            modes: Mat::zeros(n, 0),
            singular_values: sigma,
            rank: 0,
        });
    }
    let mut rank = sigma.len();
    let mut tail = 0.0;
    for r in (0..sigma.len()).rev() {
        tail += sigma[r] * sigma[r];
        if tail > tol * tol * total {
            break;
        }
        rank = r;
    }
    // modes with zero energy carry no direction
    let usable = sigma.iter().take_while(|&&v| v > 0.0).count();
    let u = svd.U();
    let mut modes = Mat::zeros(n, usable);
    for j in 0..usable {
        let mut col: Vec<f64> = (0..n).map(|i| u[(i, j)]).collect();
        chol.solve_lt_in_place(&mut col);
        for i in 0..n {
            modes[(i, j)] = col[i];
        }
    }
    Ok(PodModes {
        modes,
        singular_values: sigma,
        rank: rank.min(usable),
    })
}

pub fn pod(snapshots: MatRef<'_, f64>, x: &SymTridiag, tol: f64) -> Result<Mat<f64>> {
    Ok(pod_modes(snapshots, x, tol)?.basis().to_owned())
}

/// Relative norm below which a projected vector is declared dependent.
pub const DEPENDENCE_TOL: f64 = 1e-10;

/// Orthogonalize one vector against `basis` (two MGS passes); `None` if dependent.
fn orthonormalize_one(v: &mut [f64], basis: &[Vec<f64>], x: &SymTridiag) -> Option<()> {
    let before = x.norm(v);
    if before == 0.0 || !before.is_finite() {
        return None;
    }
    for _ in 0..2 {
        for q in basis {
            let c = x.inner(q, v);
            crate::linalg::axpy(v, -c, q);
        }
    }
    let after = x.norm(v);
    if after < DEPENDENCE_TOL * before {
        return None;
    }
    v.iter_mut().for_each(|e| *e /= after);
    Some(())
}

fn columns(m: MatRef<'_, f64>) -> Vec<Vec<f64>> {
    (0..m.ncols())
        .map(|j| (0..m.nrows()).map(|i| m[(i, j)]).collect())
        .collect()
}

fn from_columns(n: usize, cols: &[Vec<f64>]) -> Mat<f64> {
    Mat::from_fn(n, cols.len(), |i, j| cols[j][i])
}

/// Modified Gram–Schmidt with one reorthogonalization pass. Returns the
/// accepted new columns, `X`-orthonormal and `X`-orthogonal to `existing`.
pub fn gram_schmidt(
    new_vectors: MatRef<'_, f64>,
    existing: MatRef<'_, f64>,
    x: &SymTridiag,
) -> Mat<f64> {
    let n = x.dim();
    let mut basis = columns(existing);
    let start = basis.len();
    for mut v in columns(new_vectors) {
        if orthonormalize_one(&mut v, &basis, x).is_some() {
            basis.push(v);
        }
    }
    from_columns(n, &basis[start..])
}

/// Append `candidates` to `basis` until it holds `target` columns.
fn pad_to(basis: &mut Vec<Vec<f64>>, target: usize, candidates: &[Vec<f64>], x: &SymTridiag) {
    for c in candidates {
        if basis.len() >= target {
            return;
        }
        let mut v = c.clone();
        if orthonormalize_one(&mut v, basis, x).is_some() {
            basis.push(v);
        }
    }
}

/// Enrich both bases with the POD of one full-order solution. New vectors
/// are orthonormalized against the current basis; the smaller side is padded
/// with its remaining POD modes, then the other side's new vectors, then
/// coordinate vectors, so that both sides keep the same dimension.
pub fn enrich(
    space: &mut RbSpace,
    sol: &FomSolution,
    x: &SymTridiag,
    pod_tol: f64,
    max_dim: usize,
) -> Result<usize> {
    let n = space.n_dof();
    let max_dim = max_dim.min(n);
    let pod_y = pod_modes(sol.y.as_mat(), x, pod_tol)?;
    let pod_p = pod_modes(sol.p_bar.as_mat(), x, pod_tol)?;

    let mut zy = columns(space.z_y.as_ref());
    let mut zp = columns(space.z_p.as_ref());
    let n0 = zy.len();
    let room = max_dim.saturating_sub(n0);
    let new_y = gram_schmidt(pod_y.basis(), space.z_y.as_ref(), x);
    let new_p = gram_schmidt(pod_p.basis(), space.z_p.as_ref(), x);
    let mut new_y = columns(new_y.as_ref());
    let mut new_p = columns(new_p.as_ref());
    new_y.truncate(room);
    new_p.truncate(room);
    let target = new_y.len().max(new_p.len());
    zy.extend(new_y.iter().cloned());
    zp.extend(new_p.iter().cloned());

    let coords: Vec<Vec<f64>> = (0..n)
        .map(|j| (0..n).map(|i| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let rest_y = columns(pod_y.modes.as_ref().subcols(pod_y.rank, pod_y.modes.ncols() - pod_y.rank));
    let rest_p = columns(pod_p.modes.as_ref().subcols(pod_p.rank, pod_p.modes.ncols() - pod_p.rank));
    for (basis, rest, other) in [(&mut zy, &rest_y, &new_p), (&mut zp, &rest_p, &new_y)] {
        pad_to(basis, n0 + target, rest, x);
        pad_to(basis, n0 + target, other, x);
        pad_to(basis, n0 + target, &coords, x);
    }
    if zy.len() != zp.len() {
        return Err(Error::Numerical(format!(
            "could not balance basis dimensions ({} vs {})",
            zy.len(),
            zp.len()
        )));
    }
    space.z_y = from_columns(n, &zy);
    space.z_p = from_columns(n, &zp);
    space.selected.push(sol.mu);
    Ok(target)
}

/// Galerkin projection of the full-order operators onto `Z_y`, `Z_p`.
pub fn project_operators(
    z_y: MatRef<'_, f64>,
    z_p: MatRef<'_, f64>,
    ops: &FomOperators,
) -> Result<RbOperators> {
    let n = ops.n_dof();
    if z_y.nrows() != n || z_p.nrows() != n || z_y.ncols() != z_p.ncols() {
        return Err(Error::invalid(format!(
            "bases are {}x{} and {}x{}, expected {n} rows and equal widths",
            z_y.nrows(),
            z_y.ncols(),
            z_p.nrows(),
            z_p.ncols()
        )));
    }
    let m = ops.mass();
    let a = ops.stiffness();
    let k = ops.steps();
    let loads = ops.yd_loads().as_mat();
    let yd = ops.yd_nodal();
    let mut m_yd = Trajectory::zeros(n, k);
    let mut yd_sq = Vec::with_capacity(k);
    for r in 0..k {
        let v = m.mul(yd.step(r));
        yd_sq.push(crate::linalg::dot(yd.step(r), &v));
        m_yd.step_mut(r).copy_from_slice(&v);
    }
    let b_y = m.congruence(z_y, z_p);
    Ok(RbOperators {
        scheme: ops.scheme().clone(),
        gamma: ops.spec().gamma,
        m_y: m.congruence(z_y, z_y),
        a_y: a.congruence(z_y, z_y),
        m_p: m.congruence(z_p, z_p),
        a_p: a.congruence(z_p, z_p),
        b_p: b_y.transpose().to_owned(),
        b_y,
        yd_loads: z_p.transpose() * loads,
        yd_state: z_y.transpose() * m_yd.as_mat(),
        yd_sq,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndicatorMode {
    /// Time-summed `X`-norm error of state and adjoint against the full order.
    TrueError,
    /// Terminal primal bound plus initial dual bound.
    Bound,
}

impl IndicatorMode {
    pub fn id(self) -> &'static str {
        match self {
            IndicatorMode::TrueError => "true-error",
            IndicatorMode::Bound => "bound",
        }
    }

    pub fn from_id(id: &str) -> Option<Self> {
        match id {
            "true-error" => Some(IndicatorMode::TrueError),
            "bound" => Some(IndicatorMode::Bound),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GreedyOptions {
    pub eps: f64,
    /// Maximum number of selected parameters.
    pub n_max: usize,
    pub indicator: IndicatorMode,
    pub pod_tol: f64,
    /// First parameter; defaults to the first training point.
    pub initial: Option<f64>,
    /// Cap on the reduced dimension.
    pub max_dim: Option<usize>,
}

impl Default for GreedyOptions {
    fn default() -> Self {
        Self {
            eps: 1e-6,
            n_max: 20,
            indicator: IndicatorMode::TrueError,
            pod_tol: 1e-10,
            initial: None,
            max_dim: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GreedyStatus {
    Converged,
    MaxIterations,
}

impl GreedyStatus {
    pub fn id(self) -> &'static str {
        match self {
            GreedyStatus::Converged => "converged",
            GreedyStatus::MaxIterations => "max-iterations",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GreedyIteration {
    pub iteration: usize,
    pub mu: f64,
    /// Indicator value that selected `mu`; `None` for the initial parameter.
    pub selected_indicator: Option<f64>,
    /// Largest indicator over the training set after enrichment.
    pub max_indicator: f64,
    pub dim: usize,
    pub wall_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GreedyReport {
    pub iterations: Vec<GreedyIteration>,
    pub status: GreedyStatus,
    pub train: Vec<f64>,
    /// Indicator over the training set after the last enrichment.
    pub final_indicators: Vec<f64>,
}

impl GreedyReport {
    pub fn final_max(&self) -> f64 {
        self.iterations.last().map_or(f64::INFINITY, |i| i.max_indicator)
    }
}

fn indicator_value(
    ops: &FomOperators,
    space: &RbSpace,
    rb_ops: &RbOperators,
    mode: IndicatorMode,
    mu: f64,
    fom: Option<&FomSolution>,
) -> Result<f64> {
    let rb = solve_rb(rb_ops, mu)?;
    let lifted = space.lift(&rb, ops)?;
    match mode {
        IndicatorMode::TrueError => {
            let fom = fom.expect("full-order solution cached in true-error mode");
            Ok(compare(fom, &lifted, ops.inner(), ops.mass())?.total_x())
        }
        IndicatorMode::Bound => {
            Ok(bound_series(ops, &lifted.y, &lifted.p_bar, &lifted.u, mu)?.indicator())
        }
    }
}

/// Greedy selection over `train`.
pub fn greedy_train(
    ops: &FomOperators,
    train: &[f64],
    opts: &GreedyOptions,
) -> Result<(RbSpace, RbOperators, GreedyReport)> {
    if train.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    if !(opts.eps > 0.0) {
        return Err(Error::invalid("greedy tolerance must be positive"));
    }
    if opts.n_max < 1 {
        return Err(Error::invalid("maximum number of parameters must be at least 1"));
    }
    if let Some(bad) = train.iter().find(|m| !(**m > 0.0) || !m.is_finite()) {
        return Err(Error::invalid(format!("training parameter {bad} is not positive")));
    }
    let max_dim = opts.max_dim.unwrap_or(usize::MAX).min(ops.n_dof());
    let x = ops.inner();

    let mut fom_cache: Vec<Option<FomSolution>> = vec![None; train.len()];
    if opts.indicator == IndicatorMode::TrueError {
        for (slot, &mu) in fom_cache.iter_mut().zip(train) {
            *slot = Some(solve_fom(ops, mu)?);
        }
    }

    let mut space = RbSpace::empty(ops.n_dof());
    let mut iterations = Vec::new();
    let mut chosen = opts.initial.unwrap_or(train[0]);
    let mut chosen_indicator = None;
    let mut selected_idx: Vec<usize> = Vec::new();
    let status;
    let mut indicators;
    loop {
        let start = Instant::now();
        let idx = train.iter().position(|&m| m == chosen);
        let sol = match idx.and_then(|i| fom_cache[i].clone()) {
            Some(s) => s,
            None => solve_fom(ops, chosen)?,
        };
        if let Some(i) = idx {
            selected_idx.push(i);
        }
        enrich(&mut space, &sol, x, opts.pod_tol, max_dim)?;
        let rb_ops = project_operators(space.z_y.as_ref(), space.z_p.as_ref(), ops)?;

        indicators = Vec::with_capacity(train.len());
        for (i, &mu) in train.iter().enumerate() {
            let v = if space.dim() == 0 {
                f64::INFINITY
            } else {
                indicator_value(ops, &space, &rb_ops, opts.indicator, mu, fom_cache[i].as_ref())?
            };
            indicators.push(v);
        }
        let max_indicator = indicators.iter().cloned().fold(0.0, f64::max);
        iterations.push(GreedyIteration {
            iteration: iterations.len() + 1,
            mu: chosen,
            selected_indicator: chosen_indicator,
            max_indicator,
            dim: space.dim(),
            wall_time: start.elapsed().as_secs_f64(),
        });
        if max_indicator <= opts.eps {
            status = GreedyStatus::Converged;
            break;
        }
        if space.selected.len() >= opts.n_max || space.dim() >= max_dim {
            status = GreedyStatus::MaxIterations;
            break;
        }
        let mut best: Option<(usize, f64)> = None;
        for (i, &v) in indicators.iter().enumerate() {
            if selected_idx.contains(&i) || space.selected.contains(&train[i]) {
                continue;
            }
            let better = match best {
                None => true,
                Some((j, bv)) => v > bv || (v == bv && train[i] < train[j]),
            };
            if better {
                best = Some((i, v));
            }
        }
        match best {
            Some((i, v)) => {
                chosen = train[i];
                chosen_indicator = Some(v);
            }
            None => {
                status = GreedyStatus::MaxIterations;
                break;
            }
        }
    }
    let rb_ops = project_operators(space.z_y.as_ref(), space.z_p.as_ref(), ops)?;
    let report = GreedyReport {
        iterations,
        status,
        train: train.to_vec(),
        final_indicators: indicators,
    };
    Ok((space, rb_ops, report))
}
