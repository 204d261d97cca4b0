//! Flat key-value run configuration (TOML syntax, no tables).

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fem1d::build_mesh;
use crate::problem::{Builtin, DesiredState, ProblemSpec};
use crate::rb_offline::{GreedyOptions, IndicatorMode};

/// Environment variable that overrides `output_dir`.
pub const OUTPUT_DIR_ENV: &str = "FRACRB_OUTPUT_DIR";

pub const KEYS: &[&str] = &[
    "problem",
    "alpha",
    "gamma",
    "T",
    "K",
    "n_el",
    "mu_min",
    "mu_max",
    "mu",
    "train_size",
    "eps",
    "n_max",
    "max_dim",
    "initial_mu",
    "indicator",
    "pod_tol",
    "output_dir",
    "seed",
    "study_steps",
];

#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub problem: String,
    #[serde(skip)]
    pub desired: DesiredState,
    pub alpha: f64,
    pub gamma: f64,
    #[serde(rename = "T")]
    pub t_final: f64,
    #[serde(rename = "K")]
    pub steps: usize,
    pub n_el: usize,
    pub mu_min: f64,
    pub mu_max: f64,
    /// Parameter for single-parameter commands.
    pub mu: f64,
    pub train_size: usize,
    pub eps: f64,
    pub n_max: usize,
    pub max_dim: Option<usize>,
    pub initial_mu: Option<f64>,
    #[serde(serialize_with = "ser_indicator")]
    pub indicator: IndicatorMode,
    pub pod_tol: f64,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub study_steps: Vec<usize>,
}

fn ser_indicator<S: serde::Serializer>(m: &IndicatorMode, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(m.id())
}

fn get_f64(table: &toml::Table, key: &str) -> Result<Option<f64>> {
    match table.get(key) {
        None => Ok(None),
        Some(toml::Value::Float(v)) => Ok(Some(*v)),
        Some(toml::Value::Integer(v)) => Ok(Some(*v as f64)),
        Some(other) => Err(Error::config(key, format!("expected a number, got {other}"))),
    }
}

fn get_usize(table: &toml::Table, key: &str) -> Result<Option<usize>> {
    match table.get(key) {
        None => Ok(None),
        Some(toml::Value::Integer(v)) if *v >= 0 => Ok(Some(*v as usize)),
        Some(other) => Err(Error::config(
            key,
            format!("expected a non-negative integer, got {other}"),
        )),
    }
}

fn get_str<'a>(table: &'a toml::Table, key: &str) -> Result<Option<&'a str>> {
    match table.get(key) {
        None => Ok(None),
        Some(toml::Value::String(s)) => Ok(Some(s)),
        Some(other) => Err(Error::config(key, format!("expected a string, got {other}"))),
    }
}

fn positive(key: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::config(key, format!("{key} must be positive")))
    }
}

fn at_least(key: &str, v: usize, min: usize) -> Result<usize> {
    if v >= min {
        Ok(v)
    } else {
        Err(Error::config(key, format!("{key} must be at least {min}, got {v}")))
    }
}

/// Parses one `--set key=value` override. The value is read as a TOML
/// scalar when possible and as a bare string otherwise.
pub fn parse_override(text: &str) -> Result<(String, toml::Value)> {
    let (key, raw) = text
        .split_once('=')
        .ok_or_else(|| Error::config(text, "override must have the form key=value"))?;
    let key = key.trim().to_string();
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    Ok((key, value))
}

pub fn parse_table(text: &str) -> Result<toml::Table> {
    toml::from_str(text).map_err(|e| Error::config("<document>", e.message().to_string()))
}

pub fn read_table(path: &Path) -> Result<toml::Table> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_table(&text)
}

/// Validates a flat table and applies defaults.
pub fn parse_config(table: &toml::Table) -> Result<RunConfig> {
    for (key, value) in table {
        if !KEYS.contains(&key.as_str()) {
            return Err(Error::config(key, "unknown key"));
        }
        if value.is_table() {
            return Err(Error::config(key, "nested tables are not allowed"));
        }
    }
    let problem = get_str(table, "problem")?
        .ok_or_else(|| Error::config("problem", "missing mandatory key"))?
        .to_string();
    let builtin = Builtin::from_id(&problem);
    let desired = match builtin {
        Some(b) => DesiredState::Builtin(b),
        None => match problem.strip_prefix("expr:") {
            Some(src) => DesiredState::expression(src)
                .map_err(|e| Error::config("problem", e.to_string()))?,
            None => {
                return Err(Error::config(
                    "problem",
                    format!("unknown builtin `{problem}` (expected example1, example2, example3 or expr:<y_d(x,t)>)"),
                ))
            }
        },
    };
    let defaults = builtin.map(|b| b.defaults());

    let alpha = match (get_f64(table, "alpha")?, defaults) {
        (Some(a), _) => a,
        (None, Some(d)) => d.alpha,
        (None, None) => return Err(Error::config("alpha", "missing mandatory key for expression problems")),
    };
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::config("alpha", format!("alpha must lie in (0, 1], got {alpha}")));
    }
    let gamma = match (get_f64(table, "gamma")?, defaults) {
        (Some(g), _) => g,
        (None, Some(d)) => d.gamma,
        (None, None) => return Err(Error::config("gamma", "missing mandatory key for expression problems")),
    };
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::config("gamma", "gamma must be positive"));
    }
    let t_final = positive("T", get_f64(table, "T")?.unwrap_or(1.0))?;
    let steps = at_least("K", get_usize(table, "K")?.unwrap_or(32), 1)?;
    let n_el = at_least("n_el", get_usize(table, "n_el")?.unwrap_or(64), 2)?;
    let mu_min = positive(
        "mu_min",
        get_f64(table, "mu_min")?.unwrap_or(defaults.map_or(0.5, |d| d.mu_min)),
    )?;
    let mu_max = positive(
        "mu_max",
        get_f64(table, "mu_max")?.unwrap_or(defaults.map_or(1.5, |d| d.mu_max)),
    )?;
    if mu_max < mu_min {
        return Err(Error::config("mu_max", format!("mu_max {mu_max} is below mu_min {mu_min}")));
    }
    let mu = positive(
        "mu",
        get_f64(table, "mu")?.unwrap_or(defaults.map_or(0.5 * (mu_min + mu_max), |d| d.mu)),
    )?;
    if mu < mu_min || mu > mu_max {
        return Err(Error::config("mu", format!("mu {mu} outside [{mu_min}, {mu_max}]")));
    }
    let initial_mu = get_f64(table, "initial_mu")?;
    if let Some(m) = initial_mu {
        if !(m >= mu_min && m <= mu_max) {
            return Err(Error::config("initial_mu", format!("initial_mu {m} outside [{mu_min}, {mu_max}]")));
        }
    }
    let greedy = GreedyOptions::default();
    let train_size = at_least("train_size", get_usize(table, "train_size")?.unwrap_or(50), 1)?;
    let eps = positive("eps", get_f64(table, "eps")?.unwrap_or(greedy.eps))?;
    let n_max = at_least("n_max", get_usize(table, "n_max")?.unwrap_or(greedy.n_max), 1)?;
    let max_dim = match get_usize(table, "max_dim")? {
        Some(d) => Some(at_least("max_dim", d, 1)?),
        None => None,
    };
    let indicator = match get_str(table, "indicator")? {
        None => greedy.indicator,
        Some(s) => IndicatorMode::from_id(s).ok_or_else(|| {
            Error::config("indicator", format!("unknown mode `{s}` (expected true-error or bound)"))
        })?,
    };
    let pod_tol = get_f64(table, "pod_tol")?.unwrap_or(greedy.pod_tol);
    if !(pod_tol > 0.0 && pod_tol < 1.0) {
        return Err(Error::config("pod_tol", format!("pod_tol must lie in (0, 1), got {pod_tol}")));
    }
    let output_dir = match std::env::var_os(OUTPUT_DIR_ENV) {
        Some(dir) if !dir.is_empty() => PathBuf::from(dir),
        _ => PathBuf::from(get_str(table, "output_dir")?.unwrap_or("output")),
    };
    let seed = match table.get("seed") {
        None => 0,
        Some(toml::Value::Integer(v)) if *v >= 0 => *v as u64,
        Some(other) => return Err(Error::config("seed", format!("expected a non-negative integer, got {other}"))),
    };
    let study_steps = match table.get("study_steps") {
        None => vec![16, 32, 64, 128],
        Some(toml::Value::Array(items)) => {
            let mut out = Vec::with_capacity(items.len());
            for item in items {
                match item {
                    toml::Value::Integer(v) if *v >= 1 => out.push(*v as usize),
                    other => return Err(Error::config("study_steps", format!("expected positive integers, got {other}"))),
                }
            }
            if out.len() < 2 {
                return Err(Error::config("study_steps", "need at least two step counts"));
            }
            out
        }
        Some(other) => return Err(Error::config("study_steps", format!("expected an array, got {other}"))),
    };

    Ok(RunConfig {
        problem,
        desired,
        alpha,
        gamma,
        t_final,
        steps,
        n_el,
        mu_min,
        mu_max,
        mu,
        train_size,
        eps,
        n_max,
        max_dim,
        initial_mu,
        indicator,
        pod_tol,
        output_dir,
        seed,
        study_steps,
    })
}

/// Parses a configuration document given as text.
pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    parse_config(&parse_table(text)?)
}

impl RunConfig {
    pub fn problem_spec(&self) -> Result<ProblemSpec> {
        let spec = ProblemSpec {
            alpha: self.alpha,
            gamma: self.gamma,
            t_final: self.t_final,
            steps: self.steps,
            mesh: build_mesh(0.0, 1.0, self.n_el)?,
            mu_min: self.mu_min,
            mu_max: self.mu_max,
            desired: self.desired.clone(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn greedy_options(&self) -> GreedyOptions {
        GreedyOptions {
            eps: self.eps,
            n_max: self.n_max,
            indicator: self.indicator,
            pod_tol: self.pod_tol,
            initial: self.initial_mu,
            max_dim: self.max_dim,
        }
    }

    pub fn echo(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}
