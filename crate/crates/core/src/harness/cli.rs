//! Command-line front end.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::error::Error;

use super::{
    condition_probe, eval_probe, parse_config, refinement_study, run_probe, selftest, weights_probe,
    ExperimentResult, ExperimentSpec, ProbeKind, RunOptions,
};

const AFTER_HELP: &str = "\
CSV headers:
  eval        x,value,argmax_r
  weights     quantity,component,value,x,r
  condition   x,r,t_star,eta_star,value
  probe       boundedness: member,label,numerator,denominator,ratio,weak_ratio,strong_ratio,skipped
              sharpness:   r,numerator,denominator,ratio
  refine      quantity,level,cells,value,change,ratio

With --out FILE the CSV goes to FILE and the JSON summary to FILE with a
.json extension; otherwise the CSV goes to stdout and the summary to stderr.

Exit codes: 0 ok, 1 config error, 2 numerical abort, 3 selftest failure.";

#[derive(Debug, Parser)]
#[command(name = "morrey-lab", version, about = "Probe multilinear fractional operators on Morrey spaces", after_help = AFTER_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for the optional center jitter of test families.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate one operator on the output grid.
    Eval,
    /// A_p, A_1, doubling, A_{P,q} and norm-equivalence report.
    Weights,
    /// Condition functional with per-ball traces.
    Condition,
    /// Boundedness or sharpness probe, per `probe.kind`.
    Probe,
    /// Rerun the configured probe under grid refinement.
    Refine {
        #[arg(long)]
        levels: Option<usize>,
    },
    /// Run the built-in closed-form checks.
    Selftest,
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NonFinite { .. } | Error::NonFiniteCondition { .. } | Error::NonFiniteSample { .. } => 2,
        _ => 1,
    }
}

fn load(path: Option<&Path>) -> Result<ExperimentSpec, Error> {
    let path = path.ok_or_else(|| Error::Config {
        field: "--config".into(),
        reason: "this subcommand needs a config file".into(),
    })?;
    let src = fs::read_to_string(path).map_err(|e| Error::Config {
        field: "--config".into(),
        reason: format!("{}: {e}", path.display()),
    })?;
    parse_config(&src)
}

fn emit(res: &ExperimentResult, out: Option<&Path>, format: Format) -> Result<(), Error> {
    match (format, out) {
        (Format::Json, Some(p)) => fs::write(p, res.to_json())?,
        (Format::Json, None) => println!("{}", res.to_json()),
        (Format::Csv, Some(p)) => {
            fs::write(p, res.to_csv())?;
            fs::write(p.with_extension("json"), res.summary_json())?;
        }
        (Format::Csv, None) => {
            print!("{}", res.to_csv());
            eprintln!("{}", res.summary_json());
        }
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<i32, Error> {
    let opts = RunOptions { seed: cli.seed };
    let res = match &cli.command {
        Command::Selftest => {
            let outcomes = selftest::run();
            let mut failed = 0;
            for o in &outcomes {
                match &o.failure {
                    None => println!("ok    {}", o.name),
                    Some(msg) => {
                        failed += 1;
                        println!("FAIL  {}: {msg}", o.name);
                    }
                }
            }
            println!("{} checks, {failed} failed", outcomes.len());
            return Ok(if failed == 0 { 0 } else { 3 });
        }
        Command::Eval => eval_probe(&load(cli.config.as_deref())?, opts)?,
        Command::Weights => weights_probe(&load(cli.config.as_deref())?, opts)?,
        Command::Condition => condition_probe(&load(cli.config.as_deref())?, opts)?,
        Command::Probe => {
            let mut spec = load(cli.config.as_deref())?;
            if !matches!(spec.probe, ProbeKind::Boundedness | ProbeKind::Sharpness) {
                spec.probe = ProbeKind::Boundedness;
            }
            run_probe(&spec, opts)?
        }
        Command::Refine { levels } => {
            let spec = load(cli.config.as_deref())?;
            refinement_study(&spec, levels.unwrap_or(spec.levels), opts)?
        }
    };
    emit(&res, cli.out.as_deref(), cli.format)?;
    Ok(0)
}

/// Parses `argv` (program name first) and runs the subcommand; returns the
/// process exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let pool = match cli.threads {
        Some(k) => rayon::ThreadPoolBuilder::new().num_threads(k).build(),
        None => rayon::ThreadPoolBuilder::new().build(),
    };
    let pool = match pool {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start thread pool: {e}");
            return 1;
        }
    };
    match pool.install(|| run(&cli)) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
