use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qfilt_cli::verify::DEFAULT_SEED;
use qfilt_cli::{filter_records, load_scenario, run_scenario, run_suite, ConfigError, Overrides, Report, Scenario, Suite};

const EXIT_FAIL: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Parser)]
#[command(name = "qfilt", version, about = "Quantum filtering simulations and verification suites")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate trajectories, filter their records and write outputs.
    Simulate {
        config: PathBuf,
        #[command(flatten)]
        out: OutDir,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Filter previously written record files.
    Filter {
        config: PathBuf,
        #[arg(long)]
        records: PathBuf,
        #[command(flatten)]
        out: OutDir,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Run a verification suite: covariance, markov, moments, duality, oracle, ensemble or all.
    Verify {
        suite: Suite,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Also write the JSON report here.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Print the report stored in an output directory.
    Report { dir: PathBuf },
}

#[derive(Args)]
struct OutDir {
    /// Output directory. Defaults to $QFILT_OUT/<config name>.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, env = "QFILT_OUT", hide_env_values = true)]
    out_root: Option<PathBuf>,
}

impl OutDir {
    fn resolve(&self, config: &Path) -> Result<PathBuf, String> {
        if let Some(dir) = &self.out {
            return Ok(dir.clone());
        }
        let stem = config.file_stem().unwrap_or_default();
        match &self.out_root {
            Some(root) => Ok(root.join(stem)),
            None => Err("no output directory: pass --out or set QFILT_OUT".into()),
        }
    }
}

#[derive(Args)]
struct OverrideArgs {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    tmax: Option<f64>,
    #[arg(long)]
    ntraj: Option<usize>,
}

impl From<&OverrideArgs> for Overrides {
    fn from(a: &OverrideArgs) -> Self {
        Overrides { seed: a.seed, dt: a.dt, t_max: a.tmax, n_traj: a.ntraj }
    }
}

enum Failure {
    Usage(String),
    Run(anyhow::Error),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Run(e)
    }
}

fn scenario(config: &Path, overrides: &OverrideArgs) -> Result<Scenario, Failure> {
    let mut cfg = load_scenario(config)?;
    cfg.apply(&overrides.into());
    Ok(cfg.validate()?)
}

fn execute(cli: Cli) -> Result<Report, Failure> {
    match cli.command {
        Command::Simulate { config, out, overrides } => {
            let dir = out.resolve(&config).map_err(Failure::Usage)?;
            let s = scenario(&config, &overrides)?;
            let report = run_scenario(&s, &dir)?;
            println!("{}", report.summary());
            Ok(report)
        }
        Command::Filter { config, records, out, overrides } => {
            let dir = out.resolve(&config).map_err(Failure::Usage)?;
            let s = scenario(&config, &overrides)?;
            let report = filter_records(&s, &records, &dir)?;
            println!("{}", report.summary());
            Ok(report)
        }
        Command::Verify { suite, seed, report: path } => {
            let report = run_suite(suite, seed)?;
            for c in &report.checks {
                eprintln!("{c}");
            }
            println!("{}", serde_json::to_string_pretty(&report).map_err(anyhow::Error::from)?);
            if let Some(p) = path {
                qfilt_cli::io::write_json(&p, &report)?;
            }
            Ok(report)
        }
        Command::Report { dir } => {
            let report = Report::load(&dir).map_err(|e| Failure::Usage(format!("{e:#}")))?;
            println!("{}", report.summary());
            Ok(report)
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(report) if report.pass => ExitCode::SUCCESS,
        Ok(_) => ExitCode::from(EXIT_FAIL),
        Err(Failure::Usage(msg)) => {
            eprintln!("error[config]: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error[run]: {e:#}");
            ExitCode::from(EXIT_FAIL)
        }
    }
}
