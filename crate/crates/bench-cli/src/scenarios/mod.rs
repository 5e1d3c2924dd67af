//! Scenario runners: each turns a validated config into a result table
//! and a JSON summary.

mod adaptive;
mod landscape;
mod noise;
mod precision;
mod qfim;

use serde::Serialize;

use crate::config::{self, AdaptiveConfig, LandscapeConfig, NoiseSweepConfig, PrecisionSweepConfig, QfimConfig, Scenario};
use crate::error::CliError;
use crate::table::{Provenance, ResultTable};

/// Seed used when neither the config nor the command line sets one.
pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunOutput {
    pub table: ResultTable,
    pub summary: serde_json::Value,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Qfim,
    PrecisionSweep,
    Landscape,
    Adaptive,
    NoiseSweep,
}

/// A finished run together with where its config asked to write output.
pub struct Finished {
    pub output: RunOutput,
    pub out_dir: Option<std::path::PathBuf>,
}

fn prepare<S: Scenario>(text: &str, seed: Option<u64>) -> Result<(S, Provenance), CliError> {
    let cfg: S = config::parse(text)?;
    let prov = Provenance {
        scenario: S::KIND.to_string(),
        name: cfg.name().unwrap_or(S::KIND).to_string(),
        config_sha256: config::config_hash(&cfg),
        seed: seed.or(cfg.seed()).unwrap_or(DEFAULT_SEED),
        version: env!("CARGO_PKG_VERSION").to_string(),
    };
    Ok((cfg, prov))
}

fn go<S: Scenario>(
    text: &str,
    seed: Option<u64>,
    runner: fn(&S, Provenance) -> Result<RunOutput, CliError>,
) -> Result<Finished, CliError> {
    let (cfg, prov) = prepare::<S>(text, seed)?;
    let mut output = runner(&cfg, prov.clone())?;
    if let serde_json::Value::Object(m) = &mut output.summary {
        m.insert("provenance".into(), serde_json::to_value(&prov).expect("plain struct"));
        m.insert("rows".into(), output.table.rows.len().into());
    }
    Ok(Finished { output, out_dir: cfg.out().cloned() })
}

/// Parses `text` as a config for `kind` and runs it. `seed` overrides the
/// config's seed.
pub fn run(kind: Kind, text: &str, seed: Option<u64>) -> Result<Finished, CliError> {
    match kind {
        Kind::Qfim => go::<QfimConfig>(text, seed, qfim::run),
        Kind::PrecisionSweep => go::<PrecisionSweepConfig>(text, seed, precision::run),
        Kind::Landscape => go::<LandscapeConfig>(text, seed, landscape::run),
        Kind::Adaptive => go::<AdaptiveConfig>(text, seed, adaptive::run),
        Kind::NoiseSweep => go::<NoiseSweepConfig>(text, seed, noise::run),
    }
}
