use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use imdp_cli::{
    audit_mechanism, list_mechanisms, run_many, verify_many, CliError, Document, MeasureKind,
    Scenario, VerifyOptions, EXIT_OK, EXIT_USAGE,
};
use imdp_core::measures::{LossValue, DEFAULT_ALPHA_GRID};
use imdp_core::mechanisms::MechanismSpec;
use imdp_core::oracle::AuditConfig;
use imdp_core::protocol::Dataset;
use serde::de::DeserializeOwned;

#[derive(Parser)]
#[command(name = "imdp", version, about = "Run, audit and verify interactive DP compositions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run scenarios and report transcripts and halts.
    Run {
        #[arg(required = true)]
        scenarios: Vec<PathBuf>,
        /// Overrides every scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Writes the canonical transcript bytes (single scenario only).
        #[arg(long)]
        wire: Option<PathBuf>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Audit a mechanism's claimed loss against exact view distributions.
    Audit {
        /// Mechanism spec as inline JSON or a file path.
        #[arg(long)]
        mechanism: String,
        /// Claimed loss as inline JSON or a file path.
        #[arg(long)]
        claimed: String,
        /// The two neighboring datasets as comma-separated atoms.
        #[arg(long, num_args = 2, value_delimiter = ' ', default_values = ["0", "1"])]
        neighbors: Vec<String>,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long)]
        alpha_grid: Option<String>,
        /// Longest non-adaptive query script tried.
        #[arg(long, default_value_t = 3)]
        depth: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare composed views of scenarios against their budgets.
    Verify {
        #[arg(required = true)]
        scenarios: Vec<PathBuf>,
        #[arg(long, value_enum)]
        measure: Option<Measure>,
        /// Budget as inline JSON or a file path; defaults to the scenario's.
        #[arg(long)]
        budget: Option<String>,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long)]
        alpha_grid: Option<String>,
        #[arg(long)]
        max_rounds: Option<usize>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List mechanism kinds with example specs and declared losses.
    ListMechanisms {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Measure {
    Approx,
    Renyi,
    Zcdp,
    Tradeoff,
}

impl From<Measure> for MeasureKind {
    fn from(m: Measure) -> Self {
        match m {
            Measure::Approx => MeasureKind::Approx,
            Measure::Renyi => MeasureKind::Renyi,
            Measure::Zcdp => MeasureKind::Zcdp,
            Measure::Tradeoff => MeasureKind::Tradeoff,
        }
    }
}

fn json_arg<T: DeserializeOwned>(arg: &str, what: &str) -> Result<T, CliError> {
    let trimmed = arg.trim_start();
    let text = if trimmed.starts_with(['{', '[', '"']) {
        arg.to_owned()
    } else {
        std::fs::read_to_string(arg).map_err(|source| CliError::Io {
            path: arg.to_owned(),
            source,
        })?
    };
    serde_json::from_str(&text).map_err(|source| CliError::Json {
        what: what.to_owned(),
        source,
    })
}

fn alpha_grid(arg: Option<&str>) -> Result<Vec<f64>, CliError> {
    let Some(csv) = arg else {
        return Ok(DEFAULT_ALPHA_GRID.to_vec());
    };
    let grid = csv
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::Usage(format!("bad --alpha-grid: {e}")))?;
    if grid.is_empty() || grid.iter().any(|a| !(*a > 1.0 && a.is_finite())) {
        return Err(CliError::Usage("--alpha-grid orders must be finite and > 1".into()));
    }
    Ok(grid)
}

fn dataset(csv: &str) -> Result<Dataset, CliError> {
    if csv.trim().is_empty() {
        return Ok(Dataset::new(Vec::new()));
    }
    csv.split(',')
        .map(|t| t.trim().parse::<u8>())
        .collect::<Result<Vec<_>, _>>()
        .map(Dataset::new)
        .map_err(|e| CliError::Usage(format!("bad dataset {csv:?}: {e}")))
}

fn load_all(paths: &[PathBuf]) -> Result<Vec<Scenario>, CliError> {
    paths.iter().map(|p| Scenario::load(p)).collect()
}

fn emit(doc: &Document, out: Option<&Path>) -> Result<(), CliError> {
    let text = doc.render();
    match out {
        Some(path) => std::fs::write(path, text).map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn execute(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Run { scenarios, seed, out, wire, jobs } => {
            if wire.is_some() && scenarios.len() != 1 {
                return Err(CliError::Usage("--wire needs exactly one scenario".into()));
            }
            let loaded = load_all(&scenarios)?;
            let (doc, reports) = run_many(&loaded, seed, jobs)?;
            if let Some(path) = wire {
                std::fs::write(&path, reports[0].transcript.to_wire()).map_err(|source| CliError::Io {
                    path: path.display().to_string(),
                    source,
                })?;
            }
            emit(&doc, out.as_deref())?;
            Ok(doc.code)
        }
        Command::Audit { mechanism, claimed, neighbors, tol, alpha_grid: grid, depth, out } => {
            let spec: MechanismSpec = json_arg(&mechanism, "mechanism spec")?;
            let claimed: LossValue = json_arg(&claimed, "claimed loss")?;
            let (x, y) = (dataset(&neighbors[0])?, dataset(&neighbors[1])?);
            let config = AuditConfig {
                tolerance: tol,
                alpha_grid: alpha_grid(grid.as_deref())?,
                ..AuditConfig::default()
            };
            let (doc, _) = audit_mechanism(&spec, &claimed, (&x, &y), &config, depth)?;
            emit(&doc, out.as_deref())?;
            Ok(doc.code)
        }
        Command::Verify { scenarios, measure, budget, tol, alpha_grid: grid, max_rounds, jobs, out } => {
            let opts = VerifyOptions {
                budget: budget.map(|b| json_arg(&b, "budget")).transpose()?,
                measure: measure.map(MeasureKind::from),
                tolerance: tol,
                alpha_grid: alpha_grid(grid.as_deref())?,
                max_rounds,
            };
            let loaded = load_all(&scenarios)?;
            let (doc, _) = verify_many(&loaded, &opts, jobs)?;
            emit(&doc, out.as_deref())?;
            Ok(doc.code)
        }
        Command::ListMechanisms { out } => {
            let doc = list_mechanisms();
            emit(&doc, out.as_deref())?;
            Ok(EXIT_OK)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match execute(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("imdp: {e}");
            ExitCode::from(EXIT_USAGE as u8)
        }
    }
}
