use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use tildeq::config::{ExperimentConfig, Settings};
use tildeq::runner::{self, Progress, RepeatResult};
use tildeq::{csvio, distort, plot};
use tildeq_core::metrics::{score, LcssConfig};
use tildeq_core::train::EpochRecord;
use tildeq_core::ForecastPair;

/// Shape-aware forecasting experiments with TILDE-Q, DILATE and MSE.
///
/// Settings come from built-in defaults, then `--config`, then `TILDEQ_*`
/// environment variables, then flags.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train and evaluate every repeat of an experiment.
    Run(RunArgs),
    /// Sweep the TILDE-Q alpha and the single-term losses.
    Ablate {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated alphas; defaults to `ablate.alphas`.
        #[arg(long, value_delimiter = ',')]
        alphas: Option<Vec<f64>>,
    },
    /// Plot forecasts of a finished run against the truth.
    Plot {
        /// Run directory containing results.json.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 3)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        repeat: usize,
    },
    /// Write a distorted corpus as CSV.
    Distort {
        /// amplitude_shift, phase_shift, uniform_amplification,
        /// uniform_time_scale, dynamic_amplification or dynamic_time_scale
        #[arg(long)]
        kind: String,
        /// Shift, factor or profile strength of the distortion.
        #[arg(long, allow_negative_numbers = true)]
        param: f64,
        #[arg(long, default_value_t = 64)]
        len: usize,
        /// Number of random mother signals (ignored with --input).
        #[arg(long, default_value_t = 8)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Use a recording as the single mother signal.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Output directory; the corpus goes to distorted.csv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a prediction against the truth without training.
    Metrics {
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        /// LCSS tolerance as a fraction of the truth's std.
        #[arg(long, default_value_t = 0.1)]
        lcss_factor: f64,
        /// Write the scores here as CSV instead of printing them.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Key-value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base seed; repeat r uses seed + r.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    repeats: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Extra `key=value` overrides, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Suppress per-epoch progress.
    #[arg(long, short)]
    quiet: bool,
}

impl RunArgs {
    fn load(&self) -> anyhow::Result<ExperimentConfig> {
        let mut settings = Settings::default();
        if let Some(path) = &self.config {
            settings.apply_file(path)?;
        }
        settings.apply_env(std::env::vars())?;
        if let Some(seed) = self.seed {
            settings.set("seed", &seed.to_string())?;
        }
        if let Some(repeats) = self.repeats {
            settings.set("repeats", &repeats.to_string())?;
        }
        if let Some(out) = &self.out {
            settings.set("out", &out.display().to_string())?;
        }
        for o in &self.overrides {
            settings.assign(o)?;
        }
        Ok(ExperimentConfig::from_settings(settings)?)
    }
}

struct Stderr {
    verbose: bool,
}

impl Progress for Stderr {
    fn epoch(&mut self, repeat: usize, e: &EpochRecord) {
        if self.verbose {
            eprintln!(
                "repeat {repeat} epoch {:4}  train {:.6}  val {:.6}",
                e.epoch, e.train_loss, e.val_loss
            );
        }
    }

    fn repeat_done(&mut self, r: &RepeatResult) {
        match (&r.metrics, &r.error) {
            (Some(m), _) => eprintln!(
                "repeat {} (seed {}): MSE {:.4}  DTW {:.4}  TDI {:.4}  LCSS {:.4}  [best epoch {}, {:.1}s]",
                r.repeat, r.seed, m.mse, m.dtw, m.tdi, m.lcss, r.best_epoch, r.wall_clock_s
            ),
            (None, err) => eprintln!(
                "repeat {} (seed {}) failed: {}",
                r.repeat,
                r.seed,
                err.as_deref().unwrap_or("unknown error")
            ),
        }
    }
}

fn print_summary(label: &str, record: &runner::ResultRecord) {
    match &record.summary {
        Some(s) => {
            let cells: Vec<String> = s
                .mean
                .values()
                .iter()
                .zip(s.std.values())
                .map(|(m, sd)| format!("{m:.4} ± {sd:.4}"))
                .collect();
            println!("{label:<14} {}", cells.join("  "));
        }
        None => println!("{label:<14} all repeats failed"),
    }
}

fn write_metrics(out: Option<&Path>, scores: &tildeq_core::metrics::Scores) -> anyhow::Result<()> {
    let row = format!("MSE,DTW,TDI,LCSS\n{},{},{},{}\n", scores.mse, scores.dtw, scores.tdi, scores.lcss);
    match out {
        Some(path) => std::fs::write(path, row).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{row}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    tildeq::tune_allocator();
    match execute(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn execute(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Run(args) => {
            let cfg = args.load()?;
            let mut progress = Stderr { verbose: !args.quiet };
            let record = runner::run(&cfg, Some(&cfg.out), &mut progress)?;
            println!("{:<14} {}", "", ["MSE", "DTW", "TDI", "LCSS"].map(|c| format!("{c:<15}")).join("  "));
            print_summary(&record.loss, &record);
            if let Some(first) = record.repeats.iter().find(|r| r.metrics.is_some()) {
                plot::emit_plots(&cfg.out, cfg.plot_samples, first.repeat)?;
            }
            println!("results written to {}", cfg.out.display());
            if record.all_failed() {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Ablate { run, alphas } => {
            let cfg = run.load()?;
            let alphas = alphas.unwrap_or_else(|| cfg.alphas.clone());
            if alphas.is_empty() {
                bail!("no alphas given");
            }
            let mut progress = Stderr { verbose: !run.quiet };
            let records = runner::ablate(&cfg, &alphas, Some(&cfg.out), &mut progress)?;
            for (label, record) in &records {
                print_summary(label, record);
            }
            println!("ablation table written to {}", cfg.out.join(runner::ABLATION_FILE).display());
            if records.iter().all(|(_, r)| r.all_failed()) {
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Plot { out, samples, repeat } => {
            let written = plot::emit_plots(&out, samples, repeat)?;
            for path in written {
                println!("{}", path.display());
            }
        }
        Command::Distort {
            kind,
            param,
            len,
            count,
            seed,
            input,
            out,
        } => {
            let spec = distort::spec_from_name(&kind, param, len)?;
            let pairs = match input {
                Some(path) => distort::corpus(&[csvio::read_series(&path)?], &spec, len)?,
                None => distort::corpus(&distort::random_mothers(count, seed), &spec, len)?,
            };
            std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            let path = out.join("distorted.csv");
            std::fs::write(&path, distort::corpus_csv(&pairs)).with_context(|| format!("writing {}", path.display()))?;
            println!("{}", path.display());
        }
        Command::Metrics {
            truth,
            pred,
            lcss_factor,
            out,
        } => {
            let pair = ForecastPair::new(csvio::read_series(&truth)?, csvio::read_series(&pred)?)?;
            let scores = score(&pair, &LcssConfig::for_pair(&pair, lcss_factor))?;
            write_metrics(out.as_deref(), &scores)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

