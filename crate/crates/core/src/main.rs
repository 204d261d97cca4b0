use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use fracrb::cli::{load_config, run_command, Command};

/// Reduced-basis optimal control of time-fractional diffusion.
#[derive(Debug, Parser)]
#[command(name = "fracrb", version)]
struct Args {
    /// One of: solve-fom, train, solve-rb, compare, bounds, caputo-study.
    command: String,
    /// Flat TOML configuration file.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override one configuration key, e.g. `--set mu=0.9`.
    #[arg(short, long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let Some(command) = Command::from_id(&args.command) else {
        eprintln!(
            "error: unknown command `{}` (expected solve-fom, train, solve-rb, compare, bounds or caputo-study)",
            args.command
        );
        return ExitCode::from(1);
    };
    let result = load_config(args.config.as_deref(), &args.overrides)
        .and_then(|config| run_command(&config, command));
    match result {
        Ok(outcome) => {
            println!("{}", outcome.summary);
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
