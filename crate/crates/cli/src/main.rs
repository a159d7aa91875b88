use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ehnc_core::experiment::{
    apply_overrides, run_compare, run_sweep, write_compare_csv, write_sweep_csv, Axis, Sweep,
};
use ehnc_core::montecarlo::{estimate_outage, OutageEstimate, RngSpec};
use ehnc_core::outage::outage_report;
use ehnc_core::solver::{dinkelbach_optimize, SolveResult, SolveStatus, SolverOptions};
use ehnc_core::{
    validate_policy, Error, FeasibilityReport, OutageMode, OutageReport, Policy, ScenarioConfig,
};
use serde::Serialize;

const EXIT_INVALID: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_SOLVER: u8 = 4;

const DEFAULT_THRESHOLDS: [f64; 5] = [1e-4, 5e-5, 1e-5, 1e-6, 6e-7];

#[derive(Parser)]
#[command(
    name = "ehnc",
    version,
    about = "Energy-efficient scheduling for network-coded relay networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Maximize energy efficiency and write the solve result as JSON.
    Optimize(Common),
    /// Estimate outage of a policy by channel simulation.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Policy or solve-result JSON; the scenario is optimized when omitted.
        #[arg(long)]
        policy: Option<PathBuf>,
        #[arg(long, default_value_t = 1_000_000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Audit a policy or solve result against the scenario constraints.
    Validate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        policy: PathBuf,
    },
    /// Re-optimize along one axis and write one CSV row per value.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// `axis=v1,v2,...` with axis one of pr_out_0, delta, eta, m.
        #[arg(long)]
        sweep: Sweep,
    },
    /// Run the optimizer and every baseline at several outage thresholds.
    Compare {
        #[command(flatten)]
        common: Common,
        /// `pr_out_0=v1,v2,...`; defaults to 1e-4,5e-5,1e-5,1e-6,6e-7.
        #[arg(long)]
        sweep: Option<Sweep>,
    },
}

#[derive(Args)]
struct Common {
    /// Scenario JSON; the bundled two-user, four-relay scenario when omitted.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override a scenario field, `key=value` with a dotted key and JSON value.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Report exact outage (default).
    #[arg(long, conflicts_with = "approx")]
    exact: bool,
    /// Report the small-outage approximation instead.
    #[arg(long)]
    approx: bool,
}

impl Common {
    fn mode(&self) -> OutageMode {
        if self.approx {
            OutageMode::Approximate
        } else {
            OutageMode::Exact
        }
    }

    fn scenario(&self) -> Result<ScenarioConfig, Error> {
        let mut doc = match &self.scenario {
            Some(path) => serde_json::from_str(&std::fs::read_to_string(path)?)?,
            None => serde_json::to_value(ScenarioConfig::bundled())?,
        };
        apply_overrides(&mut doc, &self.overrides)?;
        ScenarioConfig::from_json_value(doc)
    }

    fn writer(&self) -> Result<Box<dyn Write>, Error> {
        Ok(match &self.out {
            Some(path) => Box::new(BufWriter::new(File::create(path)?)),
            None => Box::new(io::stdout().lock()),
        })
    }
}

#[derive(Serialize)]
struct ErrorRecord<'a> {
    error: &'a str,
    exit_code: u8,
    message: String,
}

fn error_kind(err: &Error) -> (&'static str, u8) {
    match err {
        Error::Infeasible { .. } => ("infeasible", EXIT_INFEASIBLE),
        Error::MaxIterations { .. } | Error::Numerical(_) | Error::UndefinedRatio => {
            ("solver_failure", EXIT_SOLVER)
        }
        _ => ("invalid_input", EXIT_INVALID),
    }
}

fn report_error(kind: &str, code: u8, message: String) -> ExitCode {
    let record = ErrorRecord {
        error: kind,
        exit_code: code,
        message,
    };
    eprintln!(
        "{}",
        serde_json::to_string(&record).expect("error record serializes")
    );
    ExitCode::from(code)
}

fn write_json<T: Serialize>(common: &Common, value: &T) -> Result<(), Error> {
    let mut out = common.writer()?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

/// Accepts either a bare policy or a full solve result.
fn read_policy(path: &Path) -> Result<Policy, Error> {
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    let policy = match doc.get("policy") {
        Some(inner) => inner.clone(),
        None => doc,
    };
    Ok(serde_json::from_value(policy)?)
}

fn status_code(result: &SolveResult) -> u8 {
    match result.status {
        SolveStatus::Converged => 0,
        SolveStatus::Infeasible => EXIT_INFEASIBLE,
        SolveStatus::MaxIter => EXIT_SOLVER,
    }
}

#[derive(Serialize)]
struct SimulationReport {
    estimate: OutageEstimate,
    formula: OutageReport,
}

#[derive(Serialize)]
struct ValidationReport {
    feasible: bool,
    outage: OutageReport,
    audit: FeasibilityReport,
}

fn run(command: &Command) -> Result<u8, Error> {
    let options = SolverOptions::default();
    match command {
        Command::Optimize(common) => {
            let config = common.scenario()?;
            let result = dinkelbach_optimize(&config, &options)?;
            write_json(common, &result)?;
            Ok(status_code(&result))
        }
        Command::Simulate {
            common,
            policy,
            trials,
            seed,
        } => {
            let config = common.scenario()?;
            let policy = match policy {
                Some(path) => read_policy(path)?,
                None => dinkelbach_optimize(&config, &options)?.policy,
            };
            let estimate = estimate_outage(&config, &policy, *trials, RngSpec::new(*seed, 0))?;
            let formula = outage_report(&config, &policy, common.mode())?;
            write_json(common, &SimulationReport { estimate, formula })?;
            Ok(0)
        }
        Command::Validate { common, policy } => {
            let config = common.scenario()?;
            let policy = read_policy(policy)?;
            let audit = validate_policy(&config, &policy, common.mode())?;
            let report = ValidationReport {
                feasible: audit.feasible,
                outage: outage_report(&config, &policy, common.mode())?.clamped(),
                audit,
            };
            write_json(common, &report)?;
            Ok(if report.feasible { 0 } else { EXIT_INFEASIBLE })
        }
        Command::Sweep { common, sweep } => {
            let config = common.scenario()?;
            let points = run_sweep(&config, sweep, &options);
            write_sweep_csv(&points, config.periods, common.writer()?)?;
            Ok(0)
        }
        Command::Compare { common, sweep } => {
            let config = common.scenario()?;
            let thresholds = match sweep {
                Some(s) if s.axis == Axis::PrOut0 => s.values.clone(),
                Some(s) => {
                    return Err(Error::InvalidArgument(format!(
                        "compare sweeps the outage threshold only, got `{}`",
                        s.axis.name()
                    )))
                }
                None => DEFAULT_THRESHOLDS.to_vec(),
            };
            let rows = run_compare(&config, &thresholds, &options);
            write_compare_csv(&rows, common.writer()?)?;
            Ok(0)
        }
    }
}

fn broken_pipe(err: &Error) -> bool {
    match err {
        Error::Io(e) => e.kind() == io::ErrorKind::BrokenPipe,
        Error::Json(e) => e.io_error_kind() == Some(io::ErrorKind::BrokenPipe),
        _ => false,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let message = e.to_string();
            let first = message.lines().next().unwrap_or_default();
            return report_error(
                "invalid_input",
                EXIT_INVALID,
                first.trim_start_matches("error: ").to_string(),
            );
        }
    };
    match run(&cli.command) {
        Ok(code) => ExitCode::from(code),
        // a closed downstream pipe is not a failure of this run
        Err(err) if broken_pipe(&err) => ExitCode::SUCCESS,
        Err(err) => {
            let (kind, code) = error_kind(&err);
            report_error(kind, code, err.to_string())
        }
    }
}
