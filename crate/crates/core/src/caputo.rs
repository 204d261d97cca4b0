//! L1 discretization of the left-sided Caputo derivative on a uniform grid.
//!
//! For `0 < α ≤ 1`, step `τ = T/K` and `b_m = (m+1)^{1-α} - m^{1-α}`,
//!
//! ```text
//! ∂_t^α g(t_n) ≈ c [ b_0 g(t_n) - Σ_{m=1}^{n-1} (b_{n-m-1} - b_{n-m}) g(t_m) - b_{n-1} g(t_0) ],
//! c = τ^{-α} / Γ(2-α)
//! ```
//!
//! with truncation error `O(τ^{2-α})`. Applied to histories with `g(t_0) = 0`
//! the scheme is the lower-triangular Toeplitz matrix `D` with diagonal
//! `c·b_0` and band entries `c (b_j - b_{j-1})`.

use faer::Mat;

use crate::error::{Error, Result};

/// Gamma function.
pub fn gamma(x: f64) -> f64 {
    libm::tgamma(x)
}

/// Uniform time grid `t_k = k τ`, `k = 0..=K`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t_final: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(t_final: f64, steps: usize) -> Result<Self> {
        if !(t_final > 0.0) || !t_final.is_finite() {
            return Err(Error::invalid(format!("final time must be positive, got {t_final}")));
        }
        if steps < 1 {
            return Err(Error::invalid("number of time steps must be at least 1"));
        }
        Ok(Self { t_final, steps })
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn tau(&self) -> f64 {
        self.t_final / self.steps as f64
    }

    pub fn node(&self, k: usize) -> f64 {
        if k == self.steps {
            self.t_final
        } else {
            k as f64 * self.tau()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.steps).map(|k| self.node(k)).collect()
    }
}

/// Precomputed L1 coefficients for one `(α, τ, K)`.
#[derive(Debug, Clone, PartialEq)]
pub struct L1Scheme {
    alpha: f64,
    grid: TimeGrid,
    b: Vec<f64>,
    c: f64,
    /// First column of `D`: `band[0] = c b_0`, `band[j] = c (b_j - b_{j-1})`.
    band: Vec<f64>,
}

pub fn l1_coefficients(alpha: f64, t_final: f64, steps: usize) -> Result<L1Scheme> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::invalid(format!(
            "fractional order must lie in (0, 1], got {alpha}"
        )));
    }
    let grid = TimeGrid::new(t_final, steps)?;
    let e = 1.0 - alpha;
    let b: Vec<f64> = (0..steps)
        .map(|m| {
            if m == 0 {
                return 1.0;
            }
            let m = m as f64;
            (m + 1.0).powf(e) - m.powf(e)
        })
        .collect();
    let c = grid.tau().powf(-alpha) / gamma(2.0 - alpha);
    let band = (0..steps)
        .map(|j| if j == 0 { c * b[0] } else { c * (b[j] - b[j - 1]) })
        .collect();
    Ok(L1Scheme {
        alpha,
        grid,
        b,
        c,
        band,
    })
}

impl L1Scheme {
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn tau(&self) -> f64 {
        self.grid.tau()
    }

    pub fn steps(&self) -> usize {
        self.grid.steps()
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    /// `D_{k, k-j}`, the Toeplitz band value at offset `j ≥ 0`.
    pub fn band(&self, j: usize) -> f64 {
        self.band[j]
    }

    pub fn band_values(&self) -> &[f64] {
        &self.band
    }

    /// The `K×K` lower-triangular time matrix `D`.
    pub fn build_d(&self) -> Mat<f64> {
        let k = self.steps();
        Mat::from_fn(k, k, |i, j| if i >= j { self.band[i - j] } else { 0.0 })
    }

    /// Caputo derivative at `t_n` from the samples `g(t_0), ..., g(t_n)`.
    pub fn apply(&self, samples: &[f64]) -> Result<f64> {
        let n = samples.len().saturating_sub(1);
        if n == 0 {
            return Err(Error::invalid(
                "Caputo derivative needs at least the samples g(t_0) and g(t_1)",
            ));
        }
        if n > self.steps() {
            return Err(Error::invalid(format!(
                "{} samples exceed the {} steps of the scheme",
                samples.len(),
                self.steps()
            )));
        }
        let b = &self.b;
        let mut acc = b[0] * samples[n] - b[n - 1] * samples[0];
        for m in 1..n {
            acc -= (b[n - m - 1] - b[n - m]) * samples[m];
        }
        Ok(self.c * acc)
    }
}

/// Exact Caputo derivative of `t^p`: `Γ(p+1)/Γ(p+1-α) t^{p-α}` (zero for `p = 0`).
pub fn caputo_reference(p: u32, alpha: f64, t: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!(
            "reference derivative needs alpha in (0, 1), got {alpha}"
        )));
    }
    if !(t >= 0.0) {
        return Err(Error::invalid(format!("time must be non-negative, got {t}")));
    }
    if p == 0 || t == 0.0 {
        return Ok(0.0);
    }
    let p = p as f64;
    Ok(gamma(p + 1.0) / gamma(p + 1.0 - alpha) * t.powf(p - alpha))
}

/// Convergence of the L1 scheme on `g(t) = t^p` over `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceStudy {
    pub alpha: f64,
    pub steps: Vec<usize>,
    pub max_errors: Vec<f64>,
    /// Least-squares slope of `log(error)` against `log(τ)`.
    pub order: f64,
}

pub fn convergence_study(alpha: f64, p: u32, steps: &[usize]) -> Result<ConvergenceStudy> {
    let mut max_errors = Vec::with_capacity(steps.len());
    for &k in steps {
        let scheme = l1_coefficients(alpha, 1.0, k)?;
        let samples: Vec<f64> = scheme.grid().nodes().iter().map(|t| t.powi(p as i32)).collect();
        let mut worst = 0.0f64;
        for n in 1..=k {
            let approx = scheme.apply(&samples[..=n])?;
            let exact = caputo_reference(p, alpha, scheme.grid().node(n))?;
            worst = worst.max((approx - exact).abs());
        }
        max_errors.push(worst);
    }
    let xs: Vec<f64> = steps.iter().map(|&k| (1.0 / k as f64).ln()).collect();
    let ys: Vec<f64> = max_errors.iter().map(|e| e.ln()).collect();
    Ok(ConvergenceStudy {
        alpha,
        steps: steps.to_vec(),
        max_errors,
        order: fit_slope(&xs, &ys),
    })
}

fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}
