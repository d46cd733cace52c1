use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use icbsim::io::{self, OutputBundle, RunConfig, ThresholdConfig};
use icbsim::{Error, ParamId, Result};

#[derive(Parser)]
#[command(name = "icbsim", version, about = "Simulate and analyse the checkpoint-blockade ODE model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML config; omitted keys take baseline defaults
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Also write an SVG figure where the command has one
    #[arg(long, global = true)]
    svg: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one run and write its trajectory and response report
    Simulate(#[command(flatten)] Common),
    /// Response class and metrics of one run
    Classify(#[command(flatten)] Common),
    /// One-at-a-time sensitivity of delay and dormancy
    Sensitivity(#[command(flatten)] Common),
    /// Bisect for the class boundary along one parameter
    Threshold {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        param: Option<ParamId>,
        #[arg(long)]
        lo: Option<f64>,
        #[arg(long)]
        hi: Option<f64>,
        #[arg(long)]
        resolution: Option<f64>,
    },
    /// Classify a 2-D parameter grid (axes from the [sweep] table)
    Sweep(#[command(flatten)] Common),
    /// Fit free parameters to a target delay (from the [fit] table)
    Fit(#[command(flatten)] Common),
    /// Simulate a dosing schedule (from the [[doses]] tables)
    Dose(#[command(flatten)] Common),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Classify(_) => "classify",
            Command::Sensitivity(_) => "sensitivity",
            Command::Threshold { .. } => "threshold",
            Command::Sweep(_) => "sweep",
            Command::Fit(_) => "fit",
            Command::Dose(_) => "dose",
        }
    }
}

fn load(common: &Common) -> Result<RunConfig> {
    match &common.config {
        Some(path) => io::load_config(path),
        None => Ok(RunConfig::default()),
    }
}

fn threshold_spec(
    cfg: &RunConfig,
    param: Option<ParamId>,
    lo: Option<f64>,
    hi: Option<f64>,
    resolution: Option<f64>,
) -> Result<ThresholdConfig> {
    let from_file = cfg.threshold.clone();
    let pick = |cli: Option<f64>, file: Option<f64>, key: &str| {
        cli.or(file).ok_or_else(|| Error::Config(format!("threshold needs --{key} or threshold.{key}")))
    };
    let spec = ThresholdConfig {
        param: param
            .or(from_file.as_ref().map(|t| t.param))
            .ok_or_else(|| Error::Config("threshold needs --param or threshold.param".into()))?,
        lo: pick(lo, from_file.as_ref().map(|t| t.lo), "lo")?,
        hi: pick(hi, from_file.as_ref().map(|t| t.hi), "hi")?,
        resolution: resolution.or(from_file.and_then(|t| t.resolution)),
    };
    if !(spec.lo < spec.hi && spec.resolution() > 0.0) {
        return Err(Error::Config("threshold needs lo < hi and a positive resolution".into()));
    }
    Ok(spec)
}

fn run(command: Command) -> Result<OutputBundle> {
    match command {
        Command::Simulate(c) => io::cmd_simulate(&load(&c)?, &c.out, c.svg),
        Command::Classify(c) => io::cmd_classify(&load(&c)?, &c.out, c.svg),
        Command::Sensitivity(c) => io::cmd_sensitivity(&load(&c)?, &c.out),
        Command::Threshold { common, param, lo, hi, resolution } => {
            let cfg = load(&common)?;
            let spec = threshold_spec(&cfg, param, lo, hi, resolution)?;
            io::cmd_threshold(&cfg, &spec, &common.out)
        }
        Command::Sweep(c) => {
            let cfg = load(&c)?;
            let sweep = cfg.sweep.clone().ok_or_else(|| Error::Config("sweep needs a [sweep] table".into()))?;
            io::cmd_sweep(&cfg, &sweep, &c.out, c.svg)
        }
        Command::Fit(c) => {
            let cfg = load(&c)?;
            let spec = cfg.fit.clone().ok_or_else(|| Error::Config("fit needs a [fit] table".into()))?;
            io::cmd_fit(&cfg, &spec, &c.out, c.svg)
        }
        Command::Dose(c) => {
            let cfg = load(&c)?;
            io::cmd_dose(&cfg, &cfg.schedule()?, &c.out, c.svg)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let name = cli.command.name();
    match run(cli.command) {
        Ok(bundle) => {
            for path in [bundle.trajectory_csv.as_ref(), Some(&bundle.report_json), bundle.svg.as_ref()]
                .into_iter()
                .flatten()
            {
                println!("{}", path.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("icbsim {name}: {e}");
            ExitCode::FAILURE
        }
    }
}
