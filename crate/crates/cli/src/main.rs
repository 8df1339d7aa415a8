use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use modshift::experiment::{
    average_traces, default_grid, fim_report, run_experiment, run_sweep, sweep_seeds, validate_config, write_json_file,
    write_trace_file, ExperimentConfig, RoundTrace, RunSummary,
};
use modshift::shift::SchemeKind;
use modshift::{ModShiftError, Result, Scalar};

#[derive(Parser)]
#[command(name = "modshift", version, about = "Federated learning with designed model shifts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Precision {
    F32,
    F64,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration and write its per-round trace.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Trace CSV; falls back to `trace_path` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Summary JSON; falls back to `summary_path` in the config.
        #[arg(long)]
        summary: Option<PathBuf>,
        /// Average the trace over this many consecutive seeds.
        #[arg(long, default_value_t = 1)]
        repeats: usize,
        #[arg(long, value_enum, default_value_t = Precision::F64)]
        precision: Precision,
    },
    /// Print the FIM spectrum of a shift scheme as JSON.
    FimReport {
        #[arg(long)]
        scheme: String,
        #[arg(long)]
        d: usize,
        #[arg(long, default_value_t = 1.0)]
        h: f64,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Comma separated entries for `--scheme custom`.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        gamma: Option<Vec<f64>>,
    },
    /// Run the comparison grid and write one mean trace per mechanism.
    Sweep {
        /// Base configuration; the defaults are used when absent.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 1)]
        repeats: usize,
    },
    /// Check the invariants of a configuration without training it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 1 })
        }
    }
}

fn dispatch(command: Command) -> Result<bool> {
    match command {
        Command::Run {
            config,
            out,
            summary,
            repeats,
            precision,
        } => {
            let cfg = ExperimentConfig::from_path(&config)?;
            let out = out
                .or_else(|| cfg.trace_path.as_ref().map(PathBuf::from))
                .ok_or_else(|| ModShiftError::Usage("no --out and no trace_path in the config".into()))?;
            let summary = summary.or_else(|| cfg.summary_path.as_ref().map(PathBuf::from));
            match precision {
                Precision::F64 => run::<f64>(&cfg, &out, summary.as_deref(), repeats)?,
                Precision::F32 => run::<f32>(&cfg, &out, summary.as_deref(), repeats)?,
            }
            Ok(true)
        }
        Command::FimReport {
            scheme,
            d,
            h,
            sigma,
            seed,
            gamma,
        } => {
            let kind: SchemeKind = scheme.parse()?;
            let report = fim_report(kind, d, h, sigma, seed, gamma)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(true)
        }
        Command::Sweep {
            config,
            out_dir,
            repeats,
        } => {
            let base = match config {
                Some(p) => ExperimentConfig::from_path(&p)?,
                None => ExperimentConfig::default(),
            };
            std::fs::create_dir_all(&out_dir)?;
            let result = run_sweep::<f64>(&base, &default_grid(), repeats)?;
            for entry in &result.entries {
                write_trace_file(&out_dir.join(format!("{}.csv", entry.label)), &entry.mean_traces())?;
            }
            write_json_file(&out_dir.join("sweep.json"), &result)?;
            Ok(true)
        }
        Command::Validate { config } => {
            let cfg = ExperimentConfig::from_path(&config)?;
            let report = validate_config(&cfg)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(report.passed())
        }
    }
}

fn run<T: Scalar>(cfg: &ExperimentConfig, out: &Path, summary: Option<&Path>, repeats: usize) -> Result<()> {
    if repeats == 0 {
        return Err(ModShiftError::Usage("--repeats must be >= 1".into()));
    }
    let mut traces: Vec<Vec<RoundTrace>> = Vec::new();
    let mut summaries: Vec<RunSummary> = Vec::new();
    for seed in sweep_seeds(cfg, repeats) {
        let out = run_experiment::<T>(&ExperimentConfig {
            master_seed: seed,
            ..cfg.clone()
        })?;
        traces.push(out.traces);
        summaries.push(out.summary);
    }
    write_trace_file(out, &average_traces(&traces))?;
    if let Some(path) = summary {
        if summaries.len() == 1 {
            write_json_file(path, &summaries[0])?;
        } else {
            write_json_file(path, &summaries)?;
        }
    }
    Ok(())
}
