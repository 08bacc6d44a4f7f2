use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use parea_core::scenarios::config::parse_resolution;
use parea_core::scenarios::runner::{write_summary, EXIT_CONFIG};
use parea_core::scenarios::{run, ExperimentConfig, Operation, SCENARIO_NAMES};

#[derive(Parser)]
#[command(name = "parea", version, about = "Grid experiments for the p-area functional")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// key = value config file; flags override its entries
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for artifacts
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Nodes per axis, one value or one per axis
    #[arg(long, global = true, value_name = "N[,N...]")]
    resolution: Option<String>,
    /// Operation tolerance
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Built-in scenario supplying the fields
    #[arg(long, global = true)]
    scenario: Option<String>,
    /// Extra config entry, repeatable
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Functional value, weight, normal and singular set of u
    Evaluate,
    /// Dirichlet minimization by smoothing continuation
    Minimize,
    /// Contact-form integrability map and residuals of (nu, D, F)
    CheckIntegrability,
    /// Integrate U = D nu - F back to a potential
    Reconstruct,
    /// Skew rank of a matrix file or of the curl of F
    RankAnalysis,
    /// Compare normals, gradients and hypothesis flags of u and v
    AuditUniqueness,
    /// Run a built-in scenario and its assertions
    Scenario {
        /// One of the built-in names, `list` prints them
        name: String,
    },
    /// Functional along the segment from u to v
    VariationProfile,
}

impl Command {
    fn operation(&self) -> Operation {
        match self {
            Command::Evaluate => Operation::Evaluate,
            Command::Minimize => Operation::Minimize,
            Command::CheckIntegrability => Operation::CheckIntegrability,
            Command::Reconstruct => Operation::Reconstruct,
            Command::RankAnalysis => Operation::RankAnalysis,
            Command::AuditUniqueness => Operation::AuditUniqueness,
            Command::Scenario { .. } => Operation::Scenario,
            Command::VariationProfile => Operation::VariationProfile,
        }
    }
}

fn build_config(cli: &Cli) -> parea_core::Result<ExperimentConfig> {
    let op = cli.command.operation();
    let mut cfg = match &cli.common.config {
        Some(p) => ExperimentConfig::load(p, Some(op))?,
        None => ExperimentConfig::new(op),
    };
    cfg.operation = op;
    let c = &cli.common;
    for entry in &c.set {
        let (k, v) = entry.split_once('=').ok_or_else(|| {
            parea_core::Error::Config(format!("--set expects KEY=VALUE, got `{entry}`"))
        })?;
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(o) = &c.out {
        cfg.out = o.clone();
    }
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(r) = &c.resolution {
        cfg.resolution = Some(parse_resolution(r)?);
    }
    if let Some(t) = c.tol {
        cfg.set("tol", &t.to_string())?;
    }
    if let Some(s) = &c.scenario {
        cfg.scenario = Some(s.clone());
    }
    if let Command::Scenario { name } = &cli.command {
        cfg.scenario = Some(name.clone());
    }
    Ok(cfg)
}

fn configure_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("PAREA_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| format!("PAREA_THREADS must be a positive integer, got `{v}`"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_CONFIG as u8)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_CONFIG as u8);
    }
    if let Command::Scenario { name } = &cli.command {
        if name == "list" {
            for n in SCENARIO_NAMES {
                println!("{n}");
            }
            return ExitCode::SUCCESS;
        }
    }
    let cfg = match build_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    };
    let report = run(&cfg);
    print!("{}", report.summary());
    if cfg.out.is_dir() {
        if let Err(e) = write_summary(&report, &cfg.out) {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    }
    ExitCode::from(report.status as u8)
}
