//! Reference solvers assembled from closed-form stencils, sharing no code
//! with the library solvers beyond the problem description.
#![allow(dead_code)]

use faer::linalg::solvers::Solve;
use faer::Mat;
use fracrb::problem::ProblemSpec;

/// Dense mass and stiffness on the interior nodes of a uniform mesh.
pub fn dense_fem(n_el: usize) -> (Mat<f64>, Mat<f64>) {
    let n = n_el - 1;
    let h = 1.0 / n_el as f64;
    let m = Mat::from_fn(n, n, |i, j| match i.abs_diff(j) {
        0 => 2.0 * h / 3.0,
        1 => h / 6.0,
        _ => 0.0,
    });
    let a = Mat::from_fn(n, n, |i, j| match i.abs_diff(j) {
        0 => 2.0 / h,
        1 => -1.0 / h,
        _ => 0.0,
    });
    (m, a)
}

/// `(f, φ_i)` integrating each half of the hat support with 3-point Gauss.
pub fn hat_loads(n_el: usize, f: impl Fn(f64) -> f64) -> Vec<f64> {
    let h = 1.0 / n_el as f64;
    let g = (0.6f64).sqrt();
    let pts = [(-g, 5.0 / 9.0), (0.0, 8.0 / 9.0), (g, 5.0 / 9.0)];
    (1..n_el)
        .map(|i| {
            let xi = i as f64 * h;
            let mut acc = 0.0;
            for (z, w) in pts {
                let s = 0.5 * (z + 1.0);
                acc += w * 0.5 * h * f(xi - h + s * h) * s;
                acc += w * 0.5 * h * f(xi + s * h) * (1.0 - s);
            }
            acc
        })
        .collect()
}

/// L1 weights `b_m = (m+1)^{1-α} - m^{1-α}` and `c = τ^{-α}/Γ(2-α)`.
pub fn l1_weights(alpha: f64, tau: f64, k: usize) -> (Vec<f64>, f64) {
    let e = 1.0 - alpha;
    let b = (0..k)
        .map(|m| {
            let m = m as f64;
            let lo = if m == 0.0 { 0.0 } else { m.powf(e) };
            (m + 1.0).powf(e) - lo
        })
        .collect();
    (b, tau.powf(-alpha) / libm::tgamma(2.0 - alpha))
}

/// Dense lower-triangular Caputo matrix built row by row from the
/// difference formula `c [b_0 g_k - Σ (b_{k-m-1} - b_{k-m}) g_m]`.
pub fn dense_caputo(alpha: f64, tau: f64, k: usize) -> Mat<f64> {
    let (b, c) = l1_weights(alpha, tau, k);
    let mut d = Mat::zeros(k, k);
    for row in 0..k {
        let n = row + 1;
        // g_n coefficient
        d[(row, row)] += c * b[0];
        for m in 1..n {
            d[(row, m - 1)] -= c * (b[n - m - 1] - b[n - m]);
        }
    }
    d
}

fn kron(a: &Mat<f64>, b: &Mat<f64>) -> Mat<f64> {
    let (ra, ca, rb, cb) = (a.nrows(), a.ncols(), b.nrows(), b.ncols());
    Mat::from_fn(ra * rb, ca * cb, |i, j| a[(i / rb, j / cb)] * b[(i % rb, j % cb)])
}

/// Solution in physical time: `y[k]` at `t_k` and `p[k]` at `t_k` for
/// `k = 0..=K`, with `y[0] = 0` and `p[K] = 0`.
pub struct Physical {
    pub y: Vec<Vec<f64>>,
    pub p: Vec<Vec<f64>>,
}

impl Physical {
    pub fn control(&self, gamma: f64) -> Vec<Vec<f64>> {
        self.p.iter().map(|v| v.iter().map(|x| x / gamma).collect()).collect()
    }
}

fn desired_loads(spec: &ProblemSpec) -> Vec<Vec<f64>> {
    let tau = spec.tau();
    (0..spec.steps)
        .map(|j| {
            let t = j as f64 * tau;
            hat_loads(spec.mesh.n_el(), |x| spec.desired_at(x, t))
        })
        .collect()
}

fn solve_dense(m: &Mat<f64>, rhs: &[f64]) -> Vec<f64> {
    let b = Mat::from_fn(rhs.len(), 1, |i, _| rhs[i]);
    let x = m.partial_piv_lu().solve(&b);
    (0..rhs.len()).map(|i| x[(i, 0)]).collect()
}

/// Dense Kronecker optimality system: state `D y + μ A y + M p / γ = 0`
/// forward from `y(t_0) = 0`; adjoint `Dᵀ`-type backward equation with
/// source `M y(t_j) - Y_d(t_j)` and `p(t_K) = 0`.
pub fn kronecker_oracle(spec: &ProblemSpec, mu: f64) -> Physical {
    let (n, k) = (spec.n_dof(), spec.steps);
    let (m, a) = dense_fem(spec.mesh.n_el());
    let d = dense_caputo(spec.alpha, spec.tau(), k);
    let eye = Mat::<f64>::identity(k, k);
    // state t_{r+1} couples to adjoint unknown index r+1 (p at t_{r+1})
    let shift = Mat::from_fn(k, k, |r, j| if j == r + 1 { 1.0 } else { 0.0 });
    let a_mu = Mat::from_fn(n, n, |i, j| mu * a[(i, j)]);
    let top_left = &kron(&d, &m) + &kron(&eye, &a_mu);
    let top_right = kron(&shift, &m) * faer::Scale(1.0 / spec.gamma);
    // reversed-time adjoint: index j is p(t_j); Dᵀ acts on later times
    let bottom_left = kron(&shift.transpose().to_owned(), &m) * faer::Scale(-1.0);
    let bottom_right = &kron(&d.transpose().to_owned(), &m) + &kron(&eye, &a_mu);
    let size = 2 * k * n;
    let mut big = Mat::zeros(size, size);
    big.as_mut().submatrix_mut(0, 0, k * n, k * n).copy_from(&top_left);
    big.as_mut().submatrix_mut(0, k * n, k * n, k * n).copy_from(&top_right);
    big.as_mut().submatrix_mut(k * n, 0, k * n, k * n).copy_from(&bottom_left);
    big.as_mut().submatrix_mut(k * n, k * n, k * n, k * n).copy_from(&bottom_right);
    let loads = desired_loads(spec);
    let mut rhs = vec![0.0; size];
    for j in 0..k {
        for i in 0..n {
            rhs[k * n + j * n + i] = -loads[j][i];
        }
    }
    let x = solve_dense(&big, &rhs);
    let mut y = vec![vec![0.0; n]];
    let mut p = Vec::new();
    for s in 0..k {
        y.push(x[s * n..(s + 1) * n].to_vec());
        p.push(x[k * n + s * n..k * n + (s + 1) * n].to_vec());
    }
    p.push(vec![0.0; n]);
    Physical { y, p }
}

/// Block Gauss–Seidel on the coupled system: forward state sweep with the
/// previous adjoint, then backward adjoint sweep with the new state, until
/// the relative update drops below `tol`. Returns `None` on divergence.
pub fn gauss_seidel_oracle(spec: &ProblemSpec, mu: f64, tol: f64, max_iter: usize) -> Option<(Physical, usize)> {
    let (n, k) = (spec.n_dof(), spec.steps);
    let (m, a) = dense_fem(spec.mesh.n_el());
    let (b, c) = l1_weights(spec.alpha, spec.tau(), k);
    let step = Mat::from_fn(n, n, |i, j| c * b[0] * m[(i, j)] + mu * a[(i, j)]);
    let lu = step.partial_piv_lu();
    let mv = |v: &[f64]| -> Vec<f64> { (0..n).map(|i| (0..n).map(|j| m[(i, j)] * v[j]).sum()).collect() };
    let solve = |rhs: &[f64]| -> Vec<f64> {
        let x = lu.solve(&Mat::from_fn(n, 1, |i, _| rhs[i]));
        (0..n).map(|i| x[(i, 0)]).collect()
    };
    let loads = desired_loads(spec);
    let mut y = vec![vec![0.0; n]; k + 1];
    let mut p = vec![vec![0.0; n]; k + 1];
    for it in 1..=max_iter {
        let mut change = 0.0f64;
        let mut scale = 0.0f64;
        for s in 1..=k {
            // c[b_0 y_s - Σ_{m<s} (b_{s-m-1} - b_{s-m}) y_m] with y_0 = 0
            let mut hist = vec![0.0; n];
            for mm in 1..s {
                let w = c * (b[s - mm - 1] - b[s - mm]);
                for i in 0..n {
                    hist[i] += w * y[mm][i];
                }
            }
            let mh = mv(&hist);
            let mp = mv(&p[s]);
            let rhs: Vec<f64> = (0..n).map(|i| mh[i] - mp[i] / spec.gamma).collect();
            let new = solve(&rhs);
            for i in 0..n {
                change = change.max((new[i] - y[s][i]).abs());
                scale = scale.max(new[i].abs());
            }
            y[s] = new;
        }
        for j in (0..k).rev() {
            // reversed-time L1 on p̄: index q ≥ j plays the role of the past
            let mut hist = vec![0.0; n];
            for q in j + 1..k {
                let w = c * (b[q - j - 1] - b[q - j]);
                for i in 0..n {
                    hist[i] += w * p[q][i];
                }
            }
            let mh = mv(&hist);
            let my = mv(&y[j]);
            let rhs: Vec<f64> = (0..n).map(|i| mh[i] + my[i] - loads[j][i]).collect();
            let new = solve(&rhs);
            for i in 0..n {
                change = change.max((new[i] - p[j][i]).abs());
                scale = scale.max(new[i].abs());
            }
            p[j] = new;
        }
        if !change.is_finite() || change > 1e100 {
            return None;
        }
        if change <= tol * scale.max(f64::MIN_POSITIVE) {
            return Some((Physical { y, p }, it));
        }
    }
    None
}

/// Backward-Euler optimality system of the classical parabolic problem:
/// `M(y_k - y_{k-1})/τ + μ A y_k + M p_k/γ = 0`,
/// `M(p_k - p_{k+1})/τ + μ A p_k - M y_k = -Y_d(t_k)`.
pub fn backward_euler_oracle(spec: &ProblemSpec, mu: f64) -> Physical {
    let (n, k) = (spec.n_dof(), spec.steps);
    let (m, a) = dense_fem(spec.mesh.n_el());
    let tau = spec.tau();
    let size = 2 * k * n;
    // unknown layout: y_1..y_K then p_0..p_{K-1}
    let yi = |s: usize, i: usize| (s - 1) * n + i;
    let pi = |s: usize, i: usize| k * n + s * n + i;
    let mut big = Mat::<f64>::zeros(size, size);
    let mut rhs = vec![0.0; size];
    let loads = desired_loads(spec);
    for s in 1..=k {
        for i in 0..n {
            for j in 0..n {
                big[(yi(s, i), yi(s, j))] += m[(i, j)] / tau + mu * a[(i, j)];
                if s > 1 {
                    big[(yi(s, i), yi(s - 1, j))] -= m[(i, j)] / tau;
                }
                if s < k {
                    big[(yi(s, i), pi(s, j))] += m[(i, j)] / spec.gamma;
                }
            }
        }
    }
    for s in 0..k {
        for i in 0..n {
            for j in 0..n {
                big[(pi(s, i), pi(s, j))] += m[(i, j)] / tau + mu * a[(i, j)];
                if s + 1 < k {
                    big[(pi(s, i), pi(s + 1, j))] -= m[(i, j)] / tau;
                }
                if s >= 1 {
                    big[(pi(s, i), yi(s, j))] -= m[(i, j)];
                }
            }
            rhs[pi(s, i)] = -loads[s][i];
        }
    }
    let x = solve_dense(&big, &rhs);
    let mut y = vec![vec![0.0; n]];
    let mut p = Vec::new();
    for s in 1..=k {
        y.push((0..n).map(|i| x[yi(s, i)]).collect());
    }
    for s in 0..k {
        p.push((0..n).map(|i| x[pi(s, i)]).collect());
    }
    p.push(vec![0.0; n]);
    Physical { y, p }
}

/// Converts a library solution (`y` on `t_1..t_K`, `p̄` stored at `T - t_j`
/// which is `p(t_j)`) into physical-time form.
pub fn physical_from(y: &fracrb::linalg::Trajectory, p_bar: &fracrb::linalg::Trajectory) -> Physical {
    let (n, k) = (y.n_dof(), y.n_steps());
    let mut py = vec![vec![0.0; n]];
    py.extend((0..k).map(|s| y.step(s).to_vec()));
    let mut pp: Vec<Vec<f64>> = (0..k).map(|s| p_bar.step(s).to_vec()).collect();
    pp.push(vec![0.0; n]);
    Physical { y: py, p: pp }
}

/// `sqrt(Σ_k vᵀ A v)` over all levels of a physical-time trajectory.
pub fn x_norm(levels: &[Vec<f64>], n_el: usize) -> f64 {
    let (_, a) = dense_fem(n_el);
    let n = a.nrows();
    levels
        .iter()
        .map(|v| {
            (0..n)
                .map(|i| v[i] * (0..n).map(|j| a[(i, j)] * v[j]).sum::<f64>())
                .sum::<f64>()
        })
        .sum::<f64>()
        .sqrt()
}

pub fn diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    a.iter()
        .zip(b)
        .map(|(u, v)| u.iter().zip(v).map(|(x, y)| x - y).collect())
        .collect()
}

/// Relative X-norm distance over state and adjoint together.
pub fn relative_x_error(reference: &Physical, other: &Physical, n_el: usize) -> f64 {
    let ey = x_norm(&diff(&reference.y, &other.y), n_el);
    let ep = x_norm(&diff(&reference.p, &other.p), n_el);
    let ny = x_norm(&reference.y, n_el);
    let np = x_norm(&reference.p, n_el);
    (ey * ey + ep * ep).sqrt() / (ny * ny + np * np).sqrt()
}
