//! CSV tables and JSON metadata written by the commands.

use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::fem1d::Mesh1D;
use crate::linalg::Trajectory;

pub const CODE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Nodal trajectories on `t_1..t_K`; `p` is the adjoint at the same time
/// (zero at `t_K`).
pub struct TrajectoryView<'a> {
    pub y: &'a Trajectory,
    pub p_bar: &'a Trajectory,
    pub u: &'a Trajectory,
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::io(path, std::io::Error::other(format!("{other:?}"))),
    }
}

pub fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn num(v: f64) -> String {
    format!("{v:e}")
}

pub fn write_trajectory_csv(path: &Path, mesh: &Mesh1D, tau: f64, traj: TrajectoryView<'_>) -> Result<()> {
    let (n, k) = (traj.y.n_dof(), traj.y.n_steps());
    let rows = (1..=k).flat_map(move |step| {
        (0..n).map(move |i| {
            let p = if step < k { traj.p_bar.step(step)[i] } else { 0.0 };
            vec![
                step.to_string(),
                num(step as f64 * tau),
                (i + 1).to_string(),
                num(mesh.node(i + 1)),
                num(traj.y.step(step - 1)[i]),
                num(p),
                num(traj.u.step(step - 1)[i]),
            ]
        })
    });
    write_csv(path, &["k", "t", "i", "x", "y", "p", "u"], rows)
}

pub fn write_json(path: &Path, value: &Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("json value serializes");
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// Metadata block shared by all commands.
pub fn metadata(command: &str, config: Value, fingerprint: Option<String>, timings: Value, results: Value) -> Value {
    json!({
        "command": command,
        "version": CODE_VERSION,
        "config": config,
        "problem_fingerprint": fingerprint,
        "timings_s": timings,
        "results": results,
    })
}

pub fn ensure_dir(dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    Ok(dir.to_path_buf())
}
