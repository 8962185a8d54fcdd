use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use softforce::harness::{
    calibrate_from_plant, load_config, run_scenario, summarize, HarnessError, RunSummary, SummaryFormat,
};

/// Intrinsic force sensing and control of simulated soft fluidic actuators.
#[derive(Debug, Parser)]
#[command(name = "softforce", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Overrides the configuration's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (overrides the configuration's `output`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Summary format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Execute the scenario described by a configuration file.
    Run { config: PathBuf },
    /// Identify a calibration artifact from a sweep of the configured plant.
    Calibrate { config: PathBuf },
    /// Rebuild the summary of a finished run from its output directory.
    Summarize { log_dir: PathBuf },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl From<Format> for SummaryFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => SummaryFormat::Csv,
            Format::Json => SummaryFormat::Json,
        }
    }
}

fn output_dir(cli_out: &Option<PathBuf>, configured: &Option<PathBuf>) -> Result<PathBuf, HarnessError> {
    cli_out.clone().or_else(|| configured.clone()).ok_or_else(|| HarnessError::Validation {
        field: "output".into(),
        reason: "no output directory; pass --out or set `output` in the configuration".into(),
    })
}

fn emit(summary: &RunSummary, format: SummaryFormat, out: Option<&Path>) -> Result<(), HarnessError> {
    let text = summary.render(format);
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
        let name = match format {
            SummaryFormat::Csv => "summary.csv",
            SummaryFormat::Json => "summary.json",
        };
        let path = dir.join(name);
        std::fs::write(&path, &text).map_err(|e| HarnessError::io(&path, e))?;
    }
    print!("{text}");
    Ok(())
}

fn execute(cli: Cli) -> Result<(), HarnessError> {
    let format = SummaryFormat::from(cli.format);
    match &cli.command {
        Command::Run { config } => {
            let mut scenario = load_config(config)?.scenario;
            if let Some(seed) = cli.seed {
                scenario.seed = seed;
            }
            let out = output_dir(&cli.out, &scenario.output)?;
            let summary = run_scenario(&scenario, &out)?;
            emit(&summary, format, Some(&out))
        }
        Command::Calibrate { config } => {
            let mut scenario = load_config(config)?.scenario;
            if let Some(seed) = cli.seed {
                scenario.seed = seed;
            }
            let out = output_dir(&cli.out, &scenario.output)?;
            std::fs::create_dir_all(&out).map_err(|e| HarnessError::io(&out, e))?;
            let run = calibrate_from_plant(&scenario)?;
            let path = out.join("calibration.toml");
            run.artifact.save(&path)?;
            let echo = out.join("config.echo.toml");
            std::fs::write(&echo, scenario.to_toml()?).map_err(|e| HarnessError::io(&echo, e))?;
            print!("{}", run.artifact.to_toml()?);
            Ok(())
        }
        Command::Summarize { log_dir } => {
            let summary = summarize(log_dir)?;
            emit(&summary, format, cli.out.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
