//! `tcg` command line: simulate traces, train models, detect, evaluate and
//! run the parameter sweeps.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 assertion failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use tcg::pipeline::{self, Mode, PipelineConfig, PipelineError};

#[derive(Parser)]
#[command(
    name = "tcg",
    version,
    about = "Behavioral ransomware detection over temporal-correlation graphs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Configuration file (JSON); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic trace plus its ground-truth sidecar.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Trace output path.
        #[arg(long)]
        output: PathBuf,
        /// Sidecar path (default: <output>.truth.jsonl next to the trace).
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Train a detection model from a labeled trace.
    Train {
        #[command(flatten)]
        common: Common,
        /// Input trace.
        #[arg(long)]
        input: PathBuf,
        /// Ground-truth sidecar.
        #[arg(long)]
        truth: PathBuf,
        /// Model output path.
        #[arg(long)]
        model: PathBuf,
    },
    /// Score a trace with a trained model, emitting one alert per window.
    Detect {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        /// Alerts output path.
        #[arg(long)]
        output: PathBuf,
        /// Processing mode; stream and batch produce identical alerts.
        #[arg(long, value_parser = parse_mode)]
        mode: Option<Mode>,
    },
    /// Evaluate an alerts file against ground truth; writes report.json and
    /// timeline.csv.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Trace the alerts were produced from.
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        /// Alerts file to evaluate.
        #[arg(long)]
        alerts: PathBuf,
        /// Model used for the run (sets the window length for latency).
        #[arg(long)]
        model: Option<PathBuf>,
        /// Report output directory.
        #[arg(long)]
        output: PathBuf,
        /// Exit nonzero if metrics fall below the configured thresholds.
        #[arg(long, default_value_t = false)]
        assert: bool,
    },
    /// Accuracy across window sizes (retrains per size; seed-averaged).
    SweepWindows {
        #[command(flatten)]
        common: Common,
        /// Output directory for window_sweep.csv.
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = false)]
        assert: bool,
    },
    /// Detection rate across encryption speeds under a fixed model.
    SweepSpeeds {
        #[command(flatten)]
        common: Common,
        /// Trained model; fitted on the sweep corpus when omitted.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Output directory for speed_sweep.csv.
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = false)]
        assert: bool,
    },
    /// Export one window of a trace as a DOT graph.
    ExportDot {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        input: PathBuf,
        /// DOT output path.
        #[arg(long)]
        output: PathBuf,
        /// Window start on the stride grid (default: busiest window).
        #[arg(long)]
        window_start: Option<f64>,
        /// Also write the window's JSON snapshot here.
        #[arg(long)]
        snapshot: Option<PathBuf>,
    },
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    match s {
        "stream" => Ok(Mode::Stream),
        "batch" => Ok(Mode::Batch),
        other => Err(format!("unknown mode `{other}` (expected stream|batch)")),
    }
}

fn load_config(common: &Common) -> Result<PipelineConfig, PipelineError> {
    let mut cfg = match &common.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn run(command: Command) -> Result<(), PipelineError> {
    match command {
        Command::Simulate { common, output, truth } => {
            let cfg = load_config(&common)?;
            let summary = pipeline::run_simulate(&cfg, &output, truth.as_deref())?;
            println!(
                "wrote {} events ({} episodes) to {} (truth: {})",
                summary.events,
                summary.episodes,
                summary.trace_path.display(),
                summary.truth_path.display()
            );
            Ok(())
        }
        Command::Train { common, input, truth, model } => {
            let cfg = load_config(&common)?;
            let summary = pipeline::run_train(&cfg, &input, &truth, &model)?;
            println!(
                "windows {} (train {} / val {} / test {})",
                summary.windows, summary.train, summary.val, summary.test
            );
            println!(
                "test precision {:.4} recall {:.4} f1 {:.4} accuracy {:.4}",
                summary.precision, summary.recall, summary.f1, summary.accuracy
            );
            println!(
                "threshold {:.6}; model {}; test alerts {}",
                summary.threshold,
                summary.model_path.display(),
                summary.test_alerts_path.display()
            );
            Ok(())
        }
        Command::Detect { common, model, input, output, mode } => {
            let mut cfg = load_config(&common)?;
            if let Some(mode) = mode {
                cfg.mode = mode;
            }
            let summary = pipeline::run_detect(&cfg, &model, &input, &output)?;
            println!(
                "{} windows, {} flagged, {} lines skipped; alerts at {}",
                summary.windows,
                summary.flagged,
                summary.skipped_lines,
                summary.alerts_path.display()
            );
            Ok(())
        }
        Command::Eval { common, input, truth, alerts, model, output, assert } => {
            let cfg = load_config(&common)?;
            let summary = pipeline::run_eval(
                &cfg,
                model.as_deref(),
                &input,
                &truth,
                &alerts,
                &output,
                assert,
            )?;
            let r = &summary.report;
            println!(
                "windows {} precision {:.4} recall {:.4} f1 {:.4} accuracy {:.4}",
                r.windows, r.precision, r.recall, r.f1, r.accuracy
            );
            println!(
                "latency mean {:.2}s median {:.2}s max {:.2}s ({} detected, {} undetected)",
                r.latency.mean_s,
                r.latency.median_s,
                r.latency.max_s,
                r.latency.detected,
                r.latency.undetected
            );
            println!("report at {}", summary.report_path.display());
            Ok(())
        }
        Command::SweepWindows { common, output, assert } => {
            let cfg = load_config(&common)?;
            let rows = pipeline::run_sweep_windows(&cfg, &output, assert)?;
            println!("window_s,accuracy,stddev");
            for row in rows {
                println!("{},{:.4},{:.4}", row.window_s, row.accuracy, row.stddev);
            }
            Ok(())
        }
        Command::SweepSpeeds { common, model, output, assert } => {
            let cfg = load_config(&common)?;
            let rows =
                pipeline::run_sweep_speeds(&cfg, model.as_deref(), &output, assert)?;
            println!("speed_mbps,detection_rate,episodes,detected");
            for row in rows {
                println!(
                    "{},{:.4},{},{}",
                    row.speed_mbps, row.detection_rate, row.episodes, row.detected
                );
            }
            Ok(())
        }
        Command::ExportDot { common, input, output, window_start, snapshot } => {
            let cfg = load_config(&common)?;
            pipeline::run_export_dot(
                &cfg,
                &input,
                &output,
                window_start,
                snapshot.as_deref(),
            )?;
            println!("wrote {}", output.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
