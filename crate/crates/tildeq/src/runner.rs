//! Training/evaluation orchestration and result persistence.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use tildeq_core::data::{generate_sinusoids, generate_synthetic, SinusoidSpec, SyntheticSpec};
use tildeq_core::gru::GruForecaster;
use tildeq_core::losses::{Loss, TildeQConfig};
use tildeq_core::metrics::{score, LcssConfig};
use tildeq_core::series::{WindowItem, WindowedDataset};
use tildeq_core::train::{train_with_observer, EpochRecord, TrainerConfig};
use tildeq_core::{ForecastPair, Series};

use crate::checkpoint;
use crate::config::{DatasetSource, ExperimentConfig};
use crate::csvio::read_series;
use crate::error::{io_err, Error, Result};

pub const RESULTS_FILE: &str = "results.json";
pub const METRICS_FILE: &str = "metrics.csv";
pub const ABLATION_FILE: &str = "ablation.csv";
const EVAL_CHUNK: usize = 256;

/// Test-split averages, in Table 1 order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub mse: f64,
    pub dtw: f64,
    pub tdi: f64,
    pub lcss: f64,
}

impl MetricSet {
    pub const COLUMNS: [&'static str; 4] = ["MSE", "DTW", "TDI", "LCSS"];

    pub fn values(&self) -> [f64; 4] {
        [self.mse, self.dtw, self.tdi, self.lcss]
    }

    fn from_values(v: [f64; 4]) -> Self {
        Self {
            mse: v[0],
            dtw: v[1],
            tdi: v[2],
            lcss: v[3],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatResult {
    pub repeat: usize,
    pub seed: u64,
    /// `None` when training diverged.
    pub metrics: Option<MetricSet>,
    pub error: Option<String>,
    pub best_epoch: usize,
    pub stopped_epoch: usize,
    pub early_stopped: bool,
    pub clipped_steps: usize,
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub checkpoint: Option<String>,
    pub wall_clock_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub succeeded: usize,
    pub mean: MetricSet,
    /// Population standard deviation over successful repeats.
    pub std: MetricSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub name: String,
    pub loss: String,
    pub code_version: String,
    pub config: BTreeMap<String, String>,
    pub seeds: Vec<u64>,
    pub teacher_forcing: bool,
    pub repeats: Vec<RepeatResult>,
    pub summary: Option<Summary>,
    pub wall_clock_s: f64,
}

impl ResultRecord {
    pub fn all_failed(&self) -> bool {
        self.repeats.iter().all(|r| r.metrics.is_none())
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(RESULTS_FILE);
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        serde_json::from_str(&text).map_err(|source| Error::Json { path, source })
    }
}

/// Seeds of one repeat, all drawn from a single generator keyed by the
/// repeat seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RepeatSeeds {
    pub data: u64,
    pub init: u64,
    pub shuffle: u64,
}

impl RepeatSeeds {
    pub fn derive(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            data: rng.next_u64(),
            init: rng.next_u64(),
            shuffle: rng.next_u64(),
        }
    }
}

/// Dataset loader that reads files once and regenerates synthetic sets
/// per repeat.
pub struct DataSource {
    source: DatasetSource,
    loaded: Option<WindowedDataset>,
}

impl DataSource {
    pub fn new(source: &DatasetSource) -> Result<Self> {
        let loaded = match source {
            DatasetSource::File { path, preset } => Some(preset.build(&read_series(path)?)?),
            _ => None,
        };
        Ok(Self {
            source: source.clone(),
            loaded,
        })
    }

    pub fn for_seed(&self, data_seed: u64) -> Result<WindowedDataset> {
        Ok(match (&self.source, &self.loaded) {
            (_, Some(ds)) => ds.clone(),
            (DatasetSource::Synthetic(spec), _) => generate_synthetic(&SyntheticSpec {
                seed: data_seed,
                ..spec.clone()
            })?,
            (DatasetSource::Sinusoid(spec), _) => generate_sinusoids(&SinusoidSpec {
                seed: data_seed,
                ..spec.clone()
            })?,
            (DatasetSource::File { .. }, None) => unreachable!("files are loaded up front"),
        })
    }
}

/// Forecasts for `items`, one row per item.
pub fn forecast(model: &GruForecaster, items: &[WindowItem]) -> Result<Vec<Vec<f64>>> {
    let Some(first) = items.first() else {
        return Ok(Vec::new());
    };
    let horizon = first.target.len();
    let mut out = Vec::with_capacity(items.len());
    for chunk in items.chunks(EVAL_CHUNK) {
        let inputs: Vec<&[f64]> = chunk.iter().map(|it| it.input.as_slice()).collect();
        out.extend(model.forecast_batch(&inputs, horizon)?);
    }
    Ok(out)
}

/// Mean MSE, DTW, TDI and LCSS of the model over `items`.
pub fn evaluate(model: &GruForecaster, items: &[WindowItem], lcss_factor: f64) -> Result<MetricSet> {
    if items.is_empty() {
        return Err(tildeq_core::Error::EmptyDataset.into());
    }
    let mut sum = [0.0; 4];
    for (item, pred) in items.iter().zip(forecast(model, items)?) {
        let pair = ForecastPair::new(item.target.clone(), Series::new(pred)?)?;
        let s = score(&pair, &LcssConfig::for_pair(&pair, lcss_factor))?;
        for (acc, v) in sum.iter_mut().zip([s.mse, s.dtw, s.tdi, s.lcss]) {
            *acc += v;
        }
    }
    Ok(MetricSet::from_values(sum.map(|v| v / items.len() as f64)))
}

fn summarize(repeats: &[RepeatResult]) -> Option<Summary> {
    let ok: Vec<[f64; 4]> = repeats.iter().filter_map(|r| r.metrics.map(|m| m.values())).collect();
    if ok.is_empty() {
        return None;
    }
    let n = ok.len() as f64;
    let mut mean = [0.0; 4];
    for v in &ok {
        for i in 0..4 {
            mean[i] += v[i] / n;
        }
    }
    let mut var = [0.0; 4];
    for v in &ok {
        for i in 0..4 {
            var[i] += (v[i] - mean[i]).powi(2) / n;
        }
    }
    Some(Summary {
        succeeded: ok.len(),
        mean: MetricSet::from_values(mean),
        std: MetricSet::from_values(var.map(f64::sqrt)),
    })
}

pub fn checkpoint_path(dir: &Path, repeat: usize) -> PathBuf {
    dir.join("checkpoints").join(format!("repeat_{repeat:02}.ckpt"))
}

/// Progress notifications from a run.
pub trait Progress {
    fn epoch(&mut self, _repeat: usize, _record: &EpochRecord) {}
    fn repeat_done(&mut self, _result: &RepeatResult) {}
}

/// Discards progress.
pub struct Quiet;

impl Progress for Quiet {}

/// Trains and evaluates every repeat of `cfg`, writing checkpoints under
/// `out` (when given), then `results.json` and `metrics.csv`.
pub fn run(cfg: &ExperimentConfig, out: Option<&Path>, progress: &mut dyn Progress) -> Result<ResultRecord> {
    let started = Instant::now();
    cfg.loss.validate()?;
    let data = DataSource::new(&cfg.dataset)?;
    if let Some(dir) = out {
        fs::create_dir_all(dir.join("checkpoints")).map_err(io_err(dir))?;
    }
    let seeds = cfg.seeds();
    let mut repeats = Vec::with_capacity(seeds.len());
    for (repeat, &seed) in seeds.iter().enumerate() {
        let result = run_repeat(cfg, &data, repeat, seed, out, progress)?;
        progress.repeat_done(&result);
        repeats.push(result);
    }
    let record = ResultRecord {
        name: cfg.name.clone(),
        loss: cfg.loss.name().to_string(),
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.settings().to_map(),
        seeds,
        teacher_forcing: false,
        summary: summarize(&repeats),
        repeats,
        wall_clock_s: started.elapsed().as_secs_f64(),
    };
    if let Some(dir) = out {
        write_outputs(dir, &record)?;
    }
    Ok(record)
}

fn run_repeat(
    cfg: &ExperimentConfig,
    data: &DataSource,
    repeat: usize,
    seed: u64,
    out: Option<&Path>,
    progress: &mut dyn Progress,
) -> Result<RepeatResult> {
    let started = Instant::now();
    let seeds = RepeatSeeds::derive(seed);
    let dataset = data.for_seed(seeds.data)?;
    let mut model = GruForecaster::new(cfg.hidden_size, seeds.init)?;
    let trainer = TrainerConfig {
        seed: seeds.shuffle,
        ..cfg.trainer.clone()
    };
    let mut result = RepeatResult {
        repeat,
        seed,
        metrics: None,
        error: None,
        best_epoch: 0,
        stopped_epoch: 0,
        early_stopped: false,
        clipped_steps: 0,
        train_loss: Vec::new(),
        val_loss: Vec::new(),
        checkpoint: None,
        wall_clock_s: 0.0,
    };
    let trained = train_with_observer(&mut model, &dataset, &cfg.loss, &trainer, &mut |e| {
        progress.epoch(repeat, e)
    });
    match trained {
        Ok(report) => {
            result.best_epoch = report.best_epoch;
            result.stopped_epoch = report.stopped_epoch;
            result.early_stopped = report.early_stopped;
            result.clipped_steps = report.clipped_steps;
            result.train_loss = report.epochs.iter().map(|e| e.train_loss).collect();
            result.val_loss = report.epochs.iter().map(|e| e.val_loss).collect();
            result.metrics = Some(evaluate(&model, dataset.test(), cfg.lcss_factor)?);
            if let Some(dir) = out {
                let path = checkpoint_path(dir, repeat);
                checkpoint::save(&path, &model)?;
                result.checkpoint = path.strip_prefix(dir).ok().map(|p| p.display().to_string());
            }
        }
        Err(e @ tildeq_core::Error::NumericDivergence(_)) => result.error = Some(e.to_string()),
        Err(e) => return Err(e.into()),
    }
    result.wall_clock_s = started.elapsed().as_secs_f64();
    Ok(result)
}

/// Writes `results.json` and `metrics.csv` into `dir`.
pub fn write_outputs(dir: &Path, record: &ResultRecord) -> Result<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let json = serde_json::to_string_pretty(record).map_err(|source| Error::Json {
        path: dir.join(RESULTS_FILE),
        source,
    })?;
    let path = dir.join(RESULTS_FILE);
    fs::write(&path, json + "\n").map_err(io_err(&path))?;
    let path = dir.join(METRICS_FILE);
    fs::write(&path, metrics_table(record)).map_err(io_err(&path))
}

/// One row per repeat, then `mean` and `std` rows.
pub fn metrics_table(record: &ResultRecord) -> String {
    let mut out = format!("repeat,seed,status,{}\n", MetricSet::COLUMNS.join(","));
    for r in &record.repeats {
        match r.metrics {
            Some(m) => out += &format!("{},{},ok,{}\n", r.repeat, r.seed, join(&m.values())),
            None => out += &format!("{},{},failed,,,,\n", r.repeat, r.seed),
        }
    }
    if let Some(s) = &record.summary {
        out += &format!("mean,,,{}\n", join(&s.mean.values()));
        out += &format!("std,,,{}\n", join(&s.std.values()));
    }
    out
}

fn join(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

fn tildeq_base(loss: &Loss) -> TildeQConfig {
    match loss {
        Loss::TildeQ(c) | Loss::PhaseOnly(c) | Loss::AmpOnly(c) => *c,
        _ => TildeQConfig::default(),
    }
}

/// Rows of an alpha ablation: one TILDE-Q run per alpha with the base
/// config's gamma, then the three single-term losses when requested. All
/// rows share the base seeds.
pub fn ablation_rows(base: &ExperimentConfig, alphas: &[f64]) -> Result<Vec<(String, Loss)>> {
    if alphas.is_empty() {
        return Err(Error::Config("ablation needs at least one alpha".into()));
    }
    let tq = tildeq_base(&base.loss);
    let mut rows = Vec::new();
    for &alpha in alphas {
        let loss = Loss::TildeQ(TildeQConfig { alpha, ..tq });
        loss.validate()?;
        rows.push((format!("alpha={alpha}"), loss));
    }
    if base.single_terms {
        rows.push(("ashift_only".into(), Loss::AshiftOnly));
        rows.push(("phase_only".into(), Loss::PhaseOnly(tq)));
        rows.push(("amp_only".into(), Loss::AmpOnly(tq)));
    }
    Ok(rows)
}

fn loss_settings(loss: &Loss) -> Vec<(&'static str, String)> {
    let mut s = vec![("loss", loss.name().to_string())];
    if let Loss::TildeQ(c) = loss {
        s.push(("loss.alpha", c.alpha.to_string()));
    }
    s
}

/// Runs every ablation row and writes `ablation.csv` plus one result
/// directory per row under `out`.
pub fn ablate(
    base: &ExperimentConfig,
    alphas: &[f64],
    out: Option<&Path>,
    progress: &mut dyn Progress,
) -> Result<Vec<(String, ResultRecord)>> {
    let mut records = Vec::new();
    for (label, loss) in ablation_rows(base, alphas)? {
        let cfg = base.with(&loss_settings(&loss))?;
        let dir = out.map(|d| d.join(label.replace('=', "_")));
        let record = run(&cfg, dir.as_deref(), progress)?;
        records.push((label, record));
    }
    if let Some(dir) = out {
        let path = dir.join(ABLATION_FILE);
        fs::write(&path, ablation_table(&records)).map_err(io_err(&path))?;
    }
    Ok(records)
}

/// `mean ± std` per metric, one row per ablation setting.
pub fn ablation_table(records: &[(String, ResultRecord)]) -> String {
    let mut out = format!("setting,{}\n", MetricSet::COLUMNS.join(","));
    for (label, record) in records {
        let cells: Vec<String> = match &record.summary {
            Some(s) => s
                .mean
                .values()
                .iter()
                .zip(s.std.values())
                .map(|(m, sd)| format!("{m:.4} ± {sd:.4}"))
                .collect(),
            None => vec!["failed".into(); 4],
        };
        out += &format!("{label},{}\n", cells.join(","));
    }
    out
}
