use clap::{Parser, Subcommand};
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::SystemTime;

use lungref::pipeline::{self, RunConfig, MODELS_DIR};
use lungref::{Error, Result};

/// Distributional reference equations: simulate, fit, diagnose.
#[derive(Parser, Debug)]
#[command(name = "lungref", version)]
struct Cli {
    /// JSON run configuration; built-in defaults apply otherwise.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Seed for simulation and Monte Carlo calibration (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic dataset with its ground truth.
    Simulate {
        /// Built-in scenario: skew-lung, symmetric-homoscedastic, ratio-like.
        #[arg(long)]
        scenario: Option<String>,
        /// Number of subjects.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Fit GAMLSS and SLR models per response and sex.
    Fit {
        /// Input CSV (overrides the config).
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Run the diagnostics and write report.json and figure files.
    Diagnose {
        #[arg(long)]
        data: Option<PathBuf>,
        /// Directory of model files (default: <out>/models).
        #[arg(long)]
        models: Option<PathBuf>,
        /// Also render SVG plots.
        #[arg(long)]
        svg: bool,
    },
    /// Print z-scores and below-LLN flags for each row as CSV.
    Zscore {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        models: Option<PathBuf>,
    },
    /// Compare two reports (deltas are second minus first).
    Compare { first: PathBuf, second: PathBuf },
}

/// Prints a line, treating a closed pipe as success.
fn emit(line: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{line}") {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        other => Ok(other?),
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut config = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(out) = &cli.out {
        config.out_dir = out.clone();
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
        config.simulate.seed = Some(seed);
    }
    Ok(config)
}

fn run(cli: Cli) -> Result<()> {
    let started = SystemTime::now();
    let mut config = load_config(&cli)?;
    match cli.command {
        Command::Simulate { scenario, n } => {
            if let Some(s) = scenario {
                config.simulate.scenario = s;
            }
            if let Some(n) = n {
                config.simulate.n = n;
            }
            config.validate()?;
            let path = pipeline::cmd_simulate(&config)?;
            emit(&path.display().to_string())?;
        }
        Command::Fit { data } => {
            if data.is_some() {
                config.input = data;
            }
            let fitted = pipeline::cmd_fit(&config)?;
            for pair in fitted.values() {
                for s in pair.summaries() {
                    emit(&format!(
                        "{}/{} {}: deviance {:.2} edf {:.2} BIC {:.2} converged {}",
                        s.response, s.stratum, s.family, s.global_deviance, s.edf, s.bic, s.converged
                    ))?;
                }
            }
        }
        Command::Diagnose { data, models, svg } => {
            if data.is_some() {
                config.input = data;
            }
            let models = models.unwrap_or_else(|| config.out_dir.join(MODELS_DIR));
            let diag = pipeline::cmd_diagnose(&config, &models, svg)?;
            pipeline::write_run_info(&config, "diagnose", started)?;
            for m in &diag.report.models {
                for l in &m.exceedance {
                    emit(&format!(
                        "{}/{} level {}: GAMLSS {}/{} bins, SLR {}/{} bins inside band",
                        m.response, m.stratum, l.level, l.gamlss_passed, l.evaluated_bins, l.slr_passed, l.evaluated_bins
                    ))?;
                }
            }
        }
        Command::Zscore { data, models } => {
            if data.is_some() {
                config.input = data;
            }
            let models = models.unwrap_or_else(|| config.out_dir.join(MODELS_DIR));
            pipeline::cmd_zscore(&config, &models, std::io::stdout().lock())?;
        }
        Command::Compare { first, second } => {
            let cmp = pipeline::cmd_compare(&first, &second)?;
            emit(&serde_json::to_string_pretty(&cmp).map_err(Error::from)?)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let compare = matches!(cli.command, Command::Compare { .. });
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if compare {
                // a comparison reports, it never judges
                ExitCode::SUCCESS
            } else {
                ExitCode::from(e.exit_code() as u8)
            }
        }
    }
}
