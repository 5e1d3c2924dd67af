//! Scenario runner for `qnetsense`: QFIM checks, precision sweeps,
//! likelihood landscapes, adaptive runs and noise sweeps, each driven by a
//! TOML config and written as a CSV table plus a JSON summary.

pub mod config;
pub mod error;
pub mod scenarios;
pub mod table;

use std::fs;
use std::path::{Path, PathBuf};

pub use error::CliError;
pub use scenarios::{run, Finished, Kind, RunOutput};
pub use table::{ResultTable, DIVERGENT};

/// Output directory when neither the command line, the environment nor
/// the config names one.
pub const DEFAULT_OUT: &str = "results";

/// Writes `<dir>/<name>.csv` and `<dir>/<name>.json`, creating `dir`.
pub fn write_outputs(dir: &Path, output: &RunOutput) -> Result<(PathBuf, PathBuf), CliError> {
    fs::create_dir_all(dir)?;
    let name = &output.table.provenance.name;
    let csv_path = dir.join(format!("{name}.csv"));
    let json_path = dir.join(format!("{name}.json"));
    output.table.write_csv(fs::File::create(&csv_path)?)?;
    let mut json = serde_json::to_string_pretty(&output.summary).expect("summary serializes");
    json.push('\n');
    fs::write(&json_path, json)?;
    Ok((csv_path, json_path))
}
