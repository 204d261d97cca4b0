use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::json;

use super::config::RunConfig;
use super::output::{ensure_dir, metadata, num, write_csv, write_json, write_trajectory_csv, TrajectoryView};
use super::persist::{load_rb_space, persist_rb_space};
use crate::caputo::convergence_study;
use crate::error::{Error, Result};
use crate::error_bounds::bound_series;
use crate::fom::{solve_fom, FomOperators};
use crate::problem::ProblemSpec;
use crate::rb_offline::{greedy_train, RbSpace};
use crate::rb_online::{compare, RbOperators};

pub const SPACE_FILE: &str = "rb_space.bin";

/// Polynomial degree of the test function in `caputo-study`.
pub const STUDY_DEGREE: u32 = 3;
pub const STUDY_ALPHAS: [f64; 3] = [0.3, 0.5, 0.7];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    SolveFom,
    Train,
    SolveRb,
    Compare,
    Bounds,
    CaputoStudy,
}

impl Command {
    pub const ALL: [Command; 6] = [
        Command::SolveFom,
        Command::Train,
        Command::SolveRb,
        Command::Compare,
        Command::Bounds,
        Command::CaputoStudy,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Command::SolveFom => "solve-fom",
            Command::Train => "train",
            Command::SolveRb => "solve-rb",
            Command::Compare => "compare",
            Command::Bounds => "bounds",
            Command::CaputoStudy => "caputo-study",
        }
    }

    pub fn from_id(id: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.id() == id)
    }
}

/// Files written by one command and a one-line summary.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub summary: String,
}

struct Context {
    spec: ProblemSpec,
    ops: FomOperators,
    dir: PathBuf,
    setup: f64,
}

fn context(config: &RunConfig) -> Result<Context> {
    let start = Instant::now();
    let spec = config.problem_spec()?;
    let ops = FomOperators::new(&spec)?;
    let dir = ensure_dir(&config.output_dir)?;
    Ok(Context {
        spec,
        ops,
        dir,
        setup: start.elapsed().as_secs_f64(),
    })
}

fn load_space(dir: &Path, spec: &ProblemSpec) -> Result<(RbSpace, RbOperators)> {
    let path = dir.join(SPACE_FILE);
    if !path.exists() {
        return Err(Error::Persist(format!(
            "no trained space at {}; run `train` first",
            path.display()
        )));
    }
    load_rb_space(&path, spec)
}

pub fn run_command(config: &RunConfig, command: Command) -> Result<Outcome> {
    match command {
        Command::SolveFom => solve_fom_cmd(config),
        Command::Train => train_cmd(config),
        Command::SolveRb => solve_rb_cmd(config),
        Command::Compare => compare_cmd(config),
        Command::Bounds => bounds_cmd(config),
        Command::CaputoStudy => caputo_study_cmd(config),
    }
}

fn solve_fom_cmd(config: &RunConfig) -> Result<Outcome> {
    let cx = context(config)?;
    let start = Instant::now();
    let sol = solve_fom(&cx.ops, config.mu)?;
    let solve = start.elapsed().as_secs_f64();
    let csv = cx.dir.join("fom_solution.csv");
    write_trajectory_csv(
        &csv,
        &cx.spec.mesh,
        cx.spec.tau(),
        TrajectoryView {
            y: &sol.y,
            p_bar: &sol.p_bar,
            u: &sol.u,
        },
    )?;
    let meta = cx.dir.join("fom_solution.json");
    write_json(
        &meta,
        &metadata(
            "solve-fom",
            config.echo(),
            Some(cx.spec.fingerprint()),
            json!({"setup": cx.setup, "solve": solve}),
            json!({"mu": sol.mu, "cost": sol.cost, "kkt_residual": sol.residual}),
        ),
    )?;
    Ok(Outcome {
        files: vec![csv, meta],
        summary: format!("J = {:e} at mu = {}", sol.cost, sol.mu),
    })
}

fn train_cmd(config: &RunConfig) -> Result<Outcome> {
    let cx = context(config)?;
    let train = cx.spec.uniform_parameters(config.train_size);
    let start = Instant::now();
    let (space, rb_ops, report) = greedy_train(&cx.ops, &train, &config.greedy_options())?;
    let offline = start.elapsed().as_secs_f64();
    let bin = cx.dir.join(SPACE_FILE);
    persist_rb_space(&space, &rb_ops, &cx.spec, &bin)?;
    let csv = cx.dir.join("greedy.csv");
    write_csv(
        &csv,
        &["iteration", "mu", "selected_indicator", "max_indicator", "dim"],
        report.iterations.iter().map(|it| {
            vec![
                it.iteration.to_string(),
                num(it.mu),
                it.selected_indicator.map(num).unwrap_or_default(),
                num(it.max_indicator),
                it.dim.to_string(),
            ]
        }),
    )?;
    let meta = cx.dir.join("greedy.json");
    write_json(
        &meta,
        &metadata(
            "train",
            config.echo(),
            Some(cx.spec.fingerprint()),
            json!({
                "setup": cx.setup,
                "offline": offline,
                "iterations": report.iterations.iter().map(|it| it.wall_time).collect::<Vec<_>>(),
            }),
            json!({
                "status": report.status.id(),
                "selected": space.selected,
                "dim": space.dim(),
                "final_max_indicator": report.final_max(),
                "gram_deviation": space.gram_deviation(cx.ops.inner()),
            }),
        ),
    )?;
    Ok(Outcome {
        files: vec![bin, csv, meta],
        summary: format!(
            "{}: {} parameters, N = {}, max indicator {:e}",
            report.status.id(),
            space.selected.len(),
            space.dim(),
            report.final_max()
        ),
    })
}

fn solve_rb_cmd(config: &RunConfig) -> Result<Outcome> {
    let cx = context(config)?;
    let (space, rb_ops) = load_space(&cx.dir, &cx.spec)?;
    let start = Instant::now();
    let rb = space.solve(&rb_ops, config.mu)?;
    let online = start.elapsed().as_secs_f64();
    let lifted = space.lift(&rb, &cx.ops)?;
    let csv = cx.dir.join("rb_solution.csv");
    write_trajectory_csv(
        &csv,
        &cx.spec.mesh,
        cx.spec.tau(),
        TrajectoryView {
            y: &lifted.y,
            p_bar: &lifted.p_bar,
            u: &lifted.u,
        },
    )?;
    let meta = cx.dir.join("rb_solution.json");
    write_json(
        &meta,
        &metadata(
            "solve-rb",
            config.echo(),
            Some(cx.spec.fingerprint()),
            json!({"setup": cx.setup, "online": online}),
            json!({"mu": rb.mu, "dim": space.dim(), "cost": rb.cost, "system_residual": rb.residual}),
        ),
    )?;
    Ok(Outcome {
        files: vec![csv, meta],
        summary: format!("J_N = {:e} at mu = {} with N = {}", rb.cost, rb.mu, space.dim()),
    })
}

fn step_times(tau: f64, k: usize) -> [String; 3] {
    [k.to_string(), num((k + 1) as f64 * tau), num(k as f64 * tau)]
}

fn compare_cmd(config: &RunConfig) -> Result<Outcome> {
    let cx = context(config)?;
    let (space, rb_ops) = load_space(&cx.dir, &cx.spec)?;
    let start = Instant::now();
    let fom = solve_fom(&cx.ops, config.mu)?;
    let t_fom = start.elapsed().as_secs_f64();
    let start = Instant::now();
    let rb = space.solve(&rb_ops, config.mu)?;
    let t_rb = start.elapsed().as_secs_f64();
    let lifted = space.lift(&rb, &cx.ops)?;
    let table = compare(&fom, &lifted, cx.ops.inner(), cx.ops.mass())?;
    let tau = cx.spec.tau();
    let csv = cx.dir.join("compare.csv");
    write_csv(
        &csv,
        &["k", "t_state", "t_adjoint", "y_err_x", "y_err_l2", "p_err_x", "p_err_l2"],
        table.rows.iter().map(|r| {
            let mut row = step_times(tau, r.k).to_vec();
            row.extend([num(r.y_x), num(r.y_l2), num(r.p_x), num(r.p_l2)]);
            row
        }),
    )?;
    let meta = cx.dir.join("compare.json");
    write_json(
        &meta,
        &metadata(
            "compare",
            config.echo(),
            Some(cx.spec.fingerprint()),
            json!({"setup": cx.setup, "fom": t_fom, "online": t_rb}),
            json!({
                "mu": config.mu,
                "dim": space.dim(),
                "cost_fom": fom.cost,
                "cost_rb": rb.cost,
                "y_err_x_max": table.y_x().0,
                "p_err_x_max": table.p_x().0,
                "y_err_l2_max": table.y_l2().0,
                "p_err_l2_max": table.p_l2().0,
            }),
        ),
    )?;
    Ok(Outcome {
        files: vec![csv, meta],
        summary: format!(
            "max errors at mu = {}: state {:e}, adjoint {:e} (X-norm)",
            config.mu,
            table.y_x().0,
            table.p_x().0
        ),
    })
}

fn bounds_cmd(config: &RunConfig) -> Result<Outcome> {
    let cx = context(config)?;
    let (space, rb_ops) = load_space(&cx.dir, &cx.spec)?;
    let rb = space.solve(&rb_ops, config.mu)?;
    let lifted = space.lift(&rb, &cx.ops)?;
    let start = Instant::now();
    let series = bound_series(&cx.ops, &lifted.y, &lifted.p_bar, &lifted.u, config.mu)?;
    let t_bounds = start.elapsed().as_secs_f64();
    let fom = solve_fom(&cx.ops, config.mu)?;
    let table = compare(&fom, &lifted, cx.ops.inner(), cx.ops.mass())?;
    let tau = cx.spec.tau();
    let csv = cx.dir.join("bounds.csv");
    write_csv(
        &csv,
        &[
            "k", "t_state", "t_adjoint", "eps_pr", "bound_pr", "y_err_x", "eps_du", "bound_du", "p_err_x",
        ],
        table.rows.iter().map(|r| {
            let k = r.k;
            let mut row = step_times(tau, k).to_vec();
            row.extend([
                num(series.eps_pr[k]),
                num(series.delta_pr[k]),
                num(r.y_x),
                num(series.eps_du[k]),
                num(series.delta_du[k]),
                num(r.p_x),
            ]);
            row
        }),
    )?;
    let min_slack = |bound: &[f64], err: &dyn Fn(usize) -> f64| {
        bound.iter().enumerate().map(|(k, b)| b - err(k)).fold(f64::INFINITY, f64::min)
    };
    let meta = cx.dir.join("bounds.json");
    write_json(
        &meta,
        &metadata(
            "bounds",
            config.echo(),
            Some(cx.spec.fingerprint()),
            json!({"setup": cx.setup, "bounds": t_bounds}),
            json!({
                "mu": config.mu,
                "dim": space.dim(),
                "norm": "X = H1 seminorm (stiffness Gram matrix)",
                "coercivity": series.alpha_mu,
                "indicator": series.indicator(),
                "min_slack_primal": min_slack(&series.delta_pr, &|k| table.rows[k].y_x),
                "min_slack_dual": min_slack(&series.delta_du, &|k| table.rows[k].p_x),
            }),
        ),
    )?;
    Ok(Outcome {
        files: vec![csv, meta],
        summary: format!("bound indicator {:e} at mu = {}", series.indicator(), config.mu),
    })
}

fn caputo_study_cmd(config: &RunConfig) -> Result<Outcome> {
    let dir = ensure_dir(&config.output_dir)?;
    let start = Instant::now();
    let studies = STUDY_ALPHAS
        .iter()
        .map(|&a| convergence_study(a, STUDY_DEGREE, &config.study_steps))
        .collect::<Result<Vec<_>>>()?;
    let elapsed = start.elapsed().as_secs_f64();
    let csv = dir.join("caputo_study.csv");
    write_csv(
        &csv,
        &["alpha", "K", "max_error", "fitted_order"],
        studies.iter().flat_map(|s| {
            s.steps
                .iter()
                .zip(&s.max_errors)
                .map(|(k, e)| vec![num(s.alpha), k.to_string(), num(*e), num(s.order)])
                .collect::<Vec<_>>()
        }),
    )?;
    let meta = dir.join("caputo_study.json");
    write_json(
        &meta,
        &metadata(
            "caputo-study",
            config.echo(),
            None,
            json!({"study": elapsed}),
            json!({
                "test_function": format!("t^{STUDY_DEGREE}"),
                "orders": studies.iter().map(|s| json!({"alpha": s.alpha, "order": s.order, "expected": 2.0 - s.alpha})).collect::<Vec<_>>(),
            }),
        ),
    )?;
    let summary = studies
        .iter()
        .map(|s| format!("alpha {}: order {:.3}", s.alpha, s.order))
        .collect::<Vec<_>>()
        .join(", ");
    Ok(Outcome {
        files: vec![csv, meta],
        summary,
    })
}
