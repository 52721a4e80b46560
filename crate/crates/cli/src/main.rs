use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tn_core::cost::{optimal_interval, IntervalResult};
use tn_core::scenario::{export_trajectory, fit_regression, ingest_csv, IngestError};
use tn_core::{run_simulation, ChainParams, CostCurve, Scenario, TrajectoryFormat};

#[derive(Debug, Parser)]
#[command(name = "tn", version, about = "Targeted reward simulation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scenario and export its trajectory.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        /// Output directory; created if missing.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "csv")]
        format: TrajectoryFormat,
    },
    /// Fit the log-linear hashrate model to a CSV dataset.
    Calibrate {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Find the hashrate interval minimising environmental plus security cost.
    OptimalInterval {
        #[arg(long)]
        curves: PathBuf,
        /// Also write the result to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CurvesFile {
    environmental: CostCurve,
    security: CostCurve,
    n_min: f64,
    n_max: f64,
    #[serde(default = "default_grid")]
    grid: usize,
    #[serde(default)]
    tolerance: f64,
    /// When present, the interval is also mapped to controller `D/T` bounds.
    #[serde(default)]
    chain: Option<ChainParams>,
}

fn default_grid() -> usize {
    10_000
}

#[derive(Debug, Serialize)]
struct IntervalOutput {
    interval: IntervalResult,
    #[serde(skip_serializing_if = "Option::is_none")]
    dt_bounds: Option<DtBounds>,
}

#[derive(Debug, Serialize)]
struct DtBounds {
    dt_lower: f64,
    dt_upper: f64,
}

struct Failure {
    kind: &'static str,
    message: String,
    details: serde_json::Value,
}

impl Failure {
    fn new(kind: &'static str, message: impl ToString) -> Self {
        Failure {
            kind,
            message: message.to_string(),
            details: serde_json::Value::Null,
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::new("io", format!("{}: {e}", path.display())))
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    std::fs::write(path, bytes).map_err(|e| Failure::new("io", format!("{}: {e}", path.display())))
}

fn simulate(scenario: &Path, out: &Path, format: TrajectoryFormat) -> Result<serde_json::Value, Failure> {
    let scenario = Scenario::from_json(&read(scenario)?).map_err(|e| Failure::new("validation", e))?;
    let records = run_simulation(&scenario).map_err(|e| Failure::new("simulation", e))?;
    std::fs::create_dir_all(out).map_err(|e| Failure::new("io", format!("{}: {e}", out.display())))?;
    let path = out.join(format!("trajectory.{}", format.extension()));
    export_trajectory(&records, format, &path).map_err(|e| Failure::new("io", format!("{}: {e}", path.display())))?;
    Ok(json!({ "epochs": records.len(), "trajectory": path }))
}

fn calibrate(data: &Path, out: &Path) -> Result<serde_json::Value, Failure> {
    let dataset = ingest_csv(data).map_err(|e| match e {
        IngestError::Rows(report) => Failure {
            kind: "load",
            message: format!("{} row error(s)", report.errors.len()),
            details: serde_json::to_value(report).unwrap_or_default(),
        },
        IngestError::Schema(cols) => Failure {
            kind: "schema",
            message: format!("missing columns: {}", cols.join(", ")),
            details: json!(cols),
        },
        other => Failure::new("io", other),
    })?;
    let fit = fit_regression(&dataset).map_err(|e| Failure::new("fit", e))?;
    let mut text = serde_json::to_vec_pretty(&fit).expect("fit serialises");
    text.push(b'\n');
    write(out, &text)?;
    Ok(json!({ "rows": dataset.len(), "r_squared": fit.r_squared, "model": out }))
}

fn interval(curves: &Path, out: Option<&Path>) -> Result<serde_json::Value, Failure> {
    let file: CurvesFile = serde_json::from_str(&read(curves)?).map_err(|e| Failure::new("validation", e))?;
    let result = optimal_interval(
        &file.environmental,
        &file.security,
        (file.n_min, file.n_max),
        file.grid,
        file.tolerance,
    )
    .map_err(|e| Failure::new("validation", e))?;
    let dt_bounds = match &file.chain {
        Some(chain) => {
            chain.validate().map_err(|e| Failure::new("validation", e))?;
            let (dt_lower, dt_upper) = result.to_dt_bounds(chain);
            Some(DtBounds { dt_lower, dt_upper })
        }
        None => None,
    };
    let value = serde_json::to_value(IntervalOutput {
        interval: result,
        dt_bounds,
    })
    .expect("result serialises");
    if let Some(path) = out {
        let mut text = serde_json::to_vec_pretty(&value).expect("result serialises");
        text.push(b'\n');
        write(path, &text)?;
    }
    Ok(value)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate { scenario, out, format } => simulate(scenario, out, *format),
        Command::Calibrate { data, out } => calibrate(data, out),
        Command::OptimalInterval { curves, out } => interval(curves, out.as_deref()),
    };
    match result {
        Ok(summary) => {
            println!("{}", serde_json::to_string_pretty(&summary).expect("summary serialises"));
            ExitCode::SUCCESS
        }
        Err(f) => {
            let mut error = json!({ "kind": f.kind, "message": f.message });
            if !f.details.is_null() {
                error["details"] = f.details;
            }
            eprintln!("{}", json!({ "error": error }));
            ExitCode::FAILURE
        }
    }
}
