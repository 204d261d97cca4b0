//! Configuration, persistence and the command layer behind the binary.

pub mod commands;
pub mod config;
pub mod output;
pub mod persist;

pub use commands::{run_command, Command, Outcome, SPACE_FILE};
pub use config::{parse_config, parse_config_str, parse_override, RunConfig, OUTPUT_DIR_ENV};
pub use persist::{load_rb_space, persist_rb_space};

use std::path::Path;

/// Reads an optional config file, applies `key=value` overrides, validates.
pub fn load_config(path: Option<&Path>, overrides: &[String]) -> crate::Result<RunConfig> {
    let mut table = match path {
        Some(p) => config::read_table(p)?,
        None => toml::Table::new(),
    };
    for text in overrides {
        let (key, value) = parse_override(text)?;
        table.insert(key, value);
    }
    parse_config(&table)
}
