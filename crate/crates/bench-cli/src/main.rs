use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qnetsense_bench::{run, write_outputs, CliError, Kind, DEFAULT_OUT};

#[derive(Parser)]
#[command(name = "qnetsense", version, about = "Distributed quantum-sensing scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output directory [default: the config's `out`, else `results`]
    #[arg(long, global = true, env = "QNETSENSE_OUT")]
    out: Option<PathBuf>,
    /// Seed for every random stream; overrides the config
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads [default: all cores]
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Only print errors
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Args)]
struct ConfigArg {
    /// Scenario config (TOML)
    #[arg(long)]
    config: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Numeric QFIM against the closed forms
    Qfim(ConfigArg),
    /// Precision bounds (and optional Monte-Carlo) along one axis
    PrecisionSweep(ConfigArg),
    /// Normalized likelihood landscape over two axes
    Landscape(ConfigArg),
    /// Adaptive RS estimation from one or more starts
    Adaptive(ConfigArg),
    /// NLE gradient estimation under increasing noise
    NoiseSweep(ConfigArg),
}

fn execute(cli: Cli) -> Result<(), CliError> {
    if let Some(j) = cli.jobs {
        if j == 0 {
            return Err(CliError::Config { path: "--jobs".into(), message: "must be at least 1".into() });
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .map_err(|e| CliError::Config { path: "--jobs".into(), message: e.to_string() })?;
    }
    let (kind, arg) = match cli.command {
        Command::Qfim(a) => (Kind::Qfim, a),
        Command::PrecisionSweep(a) => (Kind::PrecisionSweep, a),
        Command::Landscape(a) => (Kind::Landscape, a),
        Command::Adaptive(a) => (Kind::Adaptive, a),
        Command::NoiseSweep(a) => (Kind::NoiseSweep, a),
    };
    let text = std::fs::read_to_string(&arg.config).map_err(|e| CliError::Config {
        path: "--config".into(),
        message: format!("cannot read {}: {e}", arg.config.display()),
    })?;
    let finished = run(kind, &text, cli.seed)?;
    let dir = cli.out.or(finished.out_dir).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    let (csv, json) = write_outputs(&dir, &finished.output)?;
    log::info!("wrote {} ({} rows) and {}", csv.display(), finished.output.table.rows.len(), json.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "error" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
