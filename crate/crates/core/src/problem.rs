//! Problem description: fractional order, regularization weight, grids,
//! parameter domain and desired state.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fem1d::{build_mesh, Mesh1D};

/// The three closed-form desired states shipped with the solver.
///
/// Each formula carries the regularization weight `γ` as a coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Builtin {
    Example1,
    Example2,
    Example3,
}

/// Defaults bound to a builtin example.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BuiltinDefaults {
    pub alpha: f64,
    pub gamma: f64,
    pub mu: f64,
    pub mu_min: f64,
    pub mu_max: f64,
}

impl Builtin {
    pub const ALL: [Builtin; 3] = [Builtin::Example1, Builtin::Example2, Builtin::Example3];

    pub fn id(self) -> &'static str {
        match self {
            Builtin::Example1 => "example1",
            Builtin::Example2 => "example2",
            Builtin::Example3 => "example3",
        }
    }

    pub fn from_id(id: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|b| b.id() == id)
    }

    /// Example 3 is also run with `γ = 1e-3` by override.
    pub fn defaults(self) -> BuiltinDefaults {
        match self {
            Builtin::Example1 => BuiltinDefaults {
                alpha: 0.7,
                gamma: 1e-6,
                mu: 0.75,
                mu_min: 0.5,
                mu_max: 1.5,
            },
            Builtin::Example2 => BuiltinDefaults {
                alpha: 0.99,
                gamma: 1e-8,
                mu: 0.6,
                mu_min: 0.5,
                mu_max: 1.5,
            },
            Builtin::Example3 => BuiltinDefaults {
                alpha: 0.7,
                gamma: 1e-7,
                mu: 0.45,
                mu_min: 0.4,
                mu_max: 1.5,
            },
        }
    }

    pub fn evaluate(self, x: f64, t: f64, gamma: f64) -> f64 {
        match self {
            Builtin::Example1 => {
                let q = x * (x - 1.0);
                gamma
                    * (2.0 * (t - 1.0).powi(3) * q
                        + 12.0 * t * (t - 1.0).powi(2) * q
                        + 3.0 * t * t * (2.0 * t - 2.0) * q)
                    + t * t * (1.0 - t).powi(3) * q
            }
            Builtin::Example2 => {
                let s = (PI * x).sin();
                let (a, b, c) = (t, t - 1.0, t - 2.0);
                let pi2 = PI * PI;
                let g = 2.0 * pi2 * a * b * b * c * c
                    + pi2 * pi2 * a * a * b * b * c * c
                    - 2.0 * a * a * b * b
                    - 2.0 * a * a * c * c
                    - 2.0 * b * b * c * c
                    - 2.0 * a * a * (2.0 * t - 2.0) * (2.0 * t - 4.0)
                    - 4.0 * a * (2.0 * t - 2.0) * c * c
                    - 4.0 * a * (2.0 * t - 4.0) * b * b
                    - 2.0 * pi2 * a * b * b * c * c;
                gamma * g * s + a * a * (1.0 - t).powi(2) * (2.0 - t).powi(2) * s
            }
            Builtin::Example3 => {
                let cs = (2.0 * PI * x).cos();
                let pi4 = PI.powi(4);
                let w = 3.0 * t.powi(3) * (2.0 * t - 2.0)
                    + 18.0 * t * t * (t - 1.0).powi(2)
                    + 6.0 * t * (t - 1.0).powi(3);
                gamma * ((16.0 * pi4 * t.powi(3) * (t - 1.0).powi(3) - w) * cs)
                    + gamma * w
                    + t.powi(3) * (1.0 - t).powi(3) * (1.0 - cs)
            }
        }
    }
}

/// Desired state `y_d(x, t)`: a builtin formula or a user expression in `x`, `t`
/// (and `gamma`, bound to the regularization weight).
#[derive(Clone)]
pub enum DesiredState {
    Builtin(Builtin),
    Expression { source: String, expr: Arc<meval::Expr> },
}

impl fmt::Debug for DesiredState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DesiredState::Builtin(b) => write!(f, "Builtin({})", b.id()),
            DesiredState::Expression { source, .. } => write!(f, "Expression({source:?})"),
        }
    }
}

impl PartialEq for DesiredState {
    fn eq(&self, other: &Self) -> bool {
        self.id() == other.id()
    }
}

impl From<Builtin> for DesiredState {
    fn from(b: Builtin) -> Self {
        DesiredState::Builtin(b)
    }
}

impl DesiredState {
    pub fn expression(source: &str) -> Result<Self> {
        let expr: meval::Expr = source
            .parse()
            .map_err(|e| Error::invalid(format!("cannot parse desired state `{source}`: {e}")))?;
        let probe = eval_expr(&expr, 0.5, 0.5, 1.0)
            .map_err(|e| Error::invalid(format!("desired state `{source}`: {e}")))?;
        if !probe.is_finite() {
            return Err(Error::invalid(format!(
                "desired state `{source}` is not finite at (0.5, 0.5)"
            )));
        }
        Ok(DesiredState::Expression {
            source: source.to_string(),
            expr: Arc::new(expr),
        })
    }

    /// Zero desired state.
    pub fn zero() -> Self {
        Self::expression("0").expect("constant expression")
    }

    /// `builtin id` or `expr:<source>`.
    pub fn id(&self) -> String {
        match self {
            DesiredState::Builtin(b) => b.id().to_string(),
            DesiredState::Expression { source, .. } => format!("expr:{source}"),
        }
    }

    pub fn evaluate(&self, x: f64, t: f64, gamma: f64) -> f64 {
        match self {
            DesiredState::Builtin(b) => b.evaluate(x, t, gamma),
            DesiredState::Expression { expr, .. } => eval_expr(expr, x, t, gamma).unwrap_or(f64::NAN),
        }
    }
}

thread_local! {
    static BUILTIN_CONTEXT: meval::Context<'static> = meval::Context::new();
}

fn eval_expr(expr: &meval::Expr, x: f64, t: f64, gamma: f64) -> std::result::Result<f64, meval::Error> {
    BUILTIN_CONTEXT.with(|ctx| {
        expr.eval_with_context(([("x", x), ("t", t), ("gamma", gamma)], ctx))
    })
}

/// One optimal-control instance; `μ` ranges over `[mu_min, mu_max]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub alpha: f64,
    pub gamma: f64,
    pub t_final: f64,
    pub steps: usize,
    pub mesh: Mesh1D,
    pub mu_min: f64,
    pub mu_max: f64,
    pub desired: DesiredState,
}

impl ProblemSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::invalid(format!(
                "alpha must lie in (0, 1], got {}",
                self.alpha
            )));
        }
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(Error::invalid("gamma must be positive"));
        }
        if !(self.t_final > 0.0) || !self.t_final.is_finite() {
            return Err(Error::invalid("T must be positive"));
        }
        if self.steps < 1 {
            return Err(Error::invalid("K must be at least 1"));
        }
        if !(self.mu_min > 0.0) || !(self.mu_max >= self.mu_min) || !self.mu_max.is_finite() {
            return Err(Error::invalid(format!(
                "parameter domain [{}, {}] must be a positive interval",
                self.mu_min, self.mu_max
            )));
        }
        Ok(())
    }

    /// Builtin example on `Ω = [0, 1]`, `T = 1`.
    pub fn builtin(example: Builtin, steps: usize, n_el: usize) -> Result<Self> {
        let d = example.defaults();
        let spec = Self {
            alpha: d.alpha,
            gamma: d.gamma,
            t_final: 1.0,
            steps,
            mesh: build_mesh(0.0, 1.0, n_el)?,
            mu_min: d.mu_min,
            mu_max: d.mu_max,
            desired: DesiredState::Builtin(example),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn tau(&self) -> f64 {
        self.t_final / self.steps as f64
    }

    pub fn n_dof(&self) -> usize {
        self.mesh.n_dof()
    }

    pub fn contains(&self, mu: f64) -> bool {
        mu >= self.mu_min && mu <= self.mu_max
    }

    /// `n` equispaced parameters covering the domain (the midpoint for `n = 1`).
    pub fn uniform_parameters(&self, n: usize) -> Vec<f64> {
        match n {
            0 => Vec::new(),
            1 => vec![0.5 * (self.mu_min + self.mu_max)],
            _ => (0..n)
                .map(|i| self.mu_min + (self.mu_max - self.mu_min) * i as f64 / (n - 1) as f64)
                .collect(),
        }
    }

    pub fn desired_at(&self, x: f64, t: f64) -> f64 {
        self.desired.evaluate(x, t, self.gamma)
    }

    /// Hex SHA-256 of every field that shapes the discrete operators.
    pub fn fingerprint(&self) -> String {
        let canonical = format!(
            "alpha={:e};gamma={:e};T={:e};K={};a={:e};b={:e};n_el={};mu=[{:e},{:e}];yd={}",
            self.alpha,
            self.gamma,
            self.t_final,
            self.steps,
            self.mesh.left(),
            self.mesh.right(),
            self.mesh.n_el(),
            self.mu_min,
            self.mu_max,
            self.desired.id()
        );
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}
