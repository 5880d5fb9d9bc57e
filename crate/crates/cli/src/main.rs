//! `ocpdmd`: FOM solves, partitioned DMDc fits, rollouts and sweeps.
//!
//! Exit codes: 0 success, 1 output failure, 2 usage or input error,
//! 3 solver failure, 4 fit failure. Diagnostics go to stderr; stdout gets a
//! single JSON summary line.

mod commands;
mod data;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ocpdmd::{InputSource, TimeDirection};

use crate::error::{CliError, CliResult};

#[derive(Parser, Debug)]
#[command(name = "ocpdmd", version, about = "Space-time optimal control solves and partitioned DMDc surrogates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve a control problem with the all-at-once KKT solver.
    Fom(FomArgs),
    /// Train a partitioned state/adjoint surrogate.
    Fit(FitArgs),
    /// Replay a window with a fitted surrogate.
    Reconstruct(ReconstructArgs),
    /// Forecast past the training window.
    Predict(PredictArgs),
    /// Mean prediction error against the training-set size.
    Sweep(SweepArgs),
    /// Run a pipeline manifest end to end.
    Run(RunArgs),
}

#[derive(Args, Debug)]
#[command(group = clap::ArgGroup::new("problem").required(true))]
pub struct FomArgs {
    /// Built-in problem: graetz_analog or distributed_analog.
    #[arg(long, group = "problem")]
    pub preset: Option<String>,
    /// Problem description as JSON.
    #[arg(long, group = "problem")]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

/// Snapshot inputs. `--from` points at a `fom` output directory; explicit
/// flags override what it provides.
#[derive(Args, Debug, Clone, Default)]
pub struct DataArgs {
    #[arg(long)]
    pub from: Option<PathBuf>,
    #[arg(long)]
    pub state: Option<PathBuf>,
    #[arg(long)]
    pub adjoint: Option<PathBuf>,
    #[arg(long)]
    pub desired: Option<PathBuf>,
    #[arg(long)]
    pub control: Option<PathBuf>,
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Adjoint rows that carry a control, comma separated. Defaults to every row.
    #[arg(long, value_delimiter = ',')]
    pub control_dofs: Option<Vec<usize>>,
    /// End of the control horizon. Defaults to the last snapshot time.
    #[arg(long)]
    pub final_time: Option<f64>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum DirectionArg {
    Forward,
    Reversed,
}

impl From<DirectionArg> for TimeDirection {
    fn from(d: DirectionArg) -> Self {
        match d {
            DirectionArg::Forward => TimeDirection::Forward,
            DirectionArg::Reversed => TimeDirection::Reversed,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum InputsArg {
    Desired,
    State,
    DesiredAndState,
    None,
}

impl From<InputsArg> for InputSource {
    fn from(i: InputsArg) -> Self {
        match i {
            InputsArg::Desired => InputSource::Desired,
            InputsArg::State => InputSource::State,
            InputsArg::DesiredAndState => InputSource::DesiredAndState,
            InputsArg::None => InputSource::None,
        }
    }
}

fn parse_ranks(s: &str) -> Result<[usize; 2], String> {
    let parts: Vec<&str> = s.split(',').collect();
    let [a, b] = parts.as_slice() else {
        return Err(format!("expected two ranks like 4,3, got `{s}`"));
    };
    let p = |x: &str| x.trim().parse::<usize>().map_err(|e| format!("bad rank `{x}`: {e}"));
    let ranks = [p(a)?, p(b)?];
    if ranks.contains(&0) {
        return Err("ranks must be positive".into());
    }
    Ok(ranks)
}

#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    /// State and adjoint output ranks.
    #[arg(long, value_parser = parse_ranks, default_value = "4,3")]
    pub ranks: [usize; 2],
    #[arg(long, value_enum, default_value = "reversed")]
    pub direction: DirectionArg,
    /// Exogenous input of the adjoint model.
    #[arg(long, value_enum, default_value = "desired-and-state")]
    pub inputs: InputsArg,
    #[arg(long)]
    pub demean_state: bool,
    #[arg(long)]
    pub demean_adjoint: bool,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Train on the first N snapshots. Defaults to all of them.
    #[arg(long)]
    pub n_train: Option<usize>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct ReconstructArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    /// Transitions to replay. Defaults to the whole desired-state window.
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 20)]
    pub steps: usize,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long, value_delimiter = ',', required = true)]
    pub sizes: Vec<usize>,
    #[arg(long, default_value_t = 20)]
    pub test: usize,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct RunArgs {
    /// Pipeline manifest JSON; snapshot paths are relative to it.
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

fn configure_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var("OCPDMD_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::usage(format!("OCPDMD_THREADS must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(CliError::usage)
}

fn dispatch(cli: Cli) -> CliResult<(&'static str, serde_json::Value)> {
    configure_threads()?;
    Ok(match cli.command {
        Command::Fom(a) => ("fom", commands::fom(&a)?),
        Command::Fit(a) => ("fit", commands::fit(&a)?),
        Command::Reconstruct(a) => ("reconstruct", commands::reconstruct(&a)?),
        Command::Predict(a) => ("predict", commands::predict(&a)?),
        Command::Sweep(a) => ("sweep", commands::sweep(&a)?),
        Command::Run(a) => ("run", commands::run(&a)?),
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli) {
        Ok((command, mut summary)) => {
            if let Some(map) = summary.as_object_mut() {
                map.insert("command".into(), command.into());
                map.insert("status".into(), "ok".into());
            }
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            let code = e.exit_code();
            println!("{}", serde_json::json!({ "status": "error", "exit_code": code, "message": e.to_string() }));
            ExitCode::from(code as u8)
        }
    }
}
