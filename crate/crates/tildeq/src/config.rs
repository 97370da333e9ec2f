//! Experiment configuration.
//!
//! A config file is plain text, one `key = value` per line. `#` starts a
//! comment, blank lines are ignored, keys are case-sensitive and unknown
//! keys are rejected. Settings are layered: built-in defaults, then the
//! file, then environment variables, then command-line flags. The
//! environment variable for a key is `TILDEQ_` followed by the key in upper
//! case with dots replaced by underscores, e.g. `TILDEQ_TRAIN_LEARNING_RATE`.
//!
//! ```text
//! dataset = traffic
//! data.path = pems_sensor0.csv
//! loss = tilde_q
//! loss.alpha = 0.99
//! repeats = 10
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use tildeq_core::data::{DatasetPreset, PresetName, SinusoidSpec, SyntheticSpec};
use tildeq_core::losses::{DilateConfig, Loss, Norm, SpectralMode, TildeQConfig};
use tildeq_core::series::SplitSpec;
use tildeq_core::spectral::NccNormalization;
use tildeq_core::train::TrainerConfig;

use crate::error::{io_err, Error, Result};

pub const ENV_PREFIX: &str = "TILDEQ_";

/// Every recognised key with its default.
const DEFAULTS: &[(&str, &str)] = &[
    ("name", "experiment"),
    ("dataset", "synthetic"),
    ("data.path", ""),
    ("data.input_len", "auto"),
    ("data.horizon", "auto"),
    ("data.stride", "1"),
    ("data.split", "auto"),
    ("data.normalize", "auto"),
    ("data.count_train", "500"),
    ("data.count_val", "500"),
    ("data.count_test", "500"),
    ("synthetic.amplitude_min", "0.2"),
    ("synthetic.amplitude_max", "1.0"),
    ("synthetic.noise", "0"),
    ("sinusoid.offset_min", "-2"),
    ("sinusoid.offset_max", "2"),
    ("sinusoid.amplitude_min", "0.5"),
    ("sinusoid.amplitude_max", "1.5"),
    ("sinusoid.period_min", "8"),
    ("sinusoid.period_max", "20"),
    ("loss", "tilde_q"),
    ("loss.alpha", "0.99"),
    ("loss.gamma", "0.5"),
    ("loss.dominant_count", "auto"),
    ("loss.norm", "l1"),
    ("loss.spectral_mode", "magnitude"),
    ("loss.ncc", "l2"),
    ("dilate.alpha", "0.5"),
    ("dilate.smoothing", "0.01"),
    ("model.hidden_size", "128"),
    ("train.learning_rate", "0.001"),
    ("train.max_epochs", "1000"),
    ("train.patience", "10"),
    ("train.batch_size", "32"),
    ("train.grad_clip", "5"),
    ("seed", "0"),
    ("repeats", "10"),
    ("out", "runs/experiment"),
    ("metrics.lcss_factor", "0.1"),
    ("plot.samples", "3"),
    ("ablate.alphas", "0.99,0.9,0.5,0.2"),
    ("ablate.single_terms", "true"),
];

/// Raw layered key-value settings.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            values: DEFAULTS.iter().map(|&(k, v)| (k.to_string(), v.to_string())).collect(),
        }
    }
}

pub fn env_var_name(key: &str) -> String {
    format!("{ENV_PREFIX}{}", key.replace('.', "_").to_uppercase())
}

impl Settings {
    pub fn keys() -> impl Iterator<Item = &'static str> {
        DEFAULTS.iter().map(|&(k, _)| k)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match self.values.get_mut(key) {
            Some(slot) => {
                *slot = value.trim().to_string();
                Ok(())
            }
            None => Err(Error::Config(format!("unknown key {key:?}"))),
        }
    }

    /// Applies a `key=value` assignment.
    pub fn assign(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("expected key=value, got {assignment:?}")))?;
        self.set(k.trim(), v)
    }

    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            self.assign(line)
                .map_err(|e| Error::Config(format!("{origin}:{}: {}", i + 1, strip(&e))))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        self.apply_text(&text, &path.display().to_string())
    }

    /// Applies every `TILDEQ_*` variable that names a known key.
    pub fn apply_env<I>(&mut self, vars: I) -> Result<()>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let by_env: BTreeMap<String, &str> = Self::keys().map(|k| (env_var_name(k), k)).collect();
        for (name, value) in vars {
            if let Some(key) = by_env.get(&name) {
                self.set(key, &value)?;
            }
        }
        Ok(())
    }

    pub fn to_map(&self) -> BTreeMap<String, String> {
        self.values.clone()
    }

    pub fn from_map(map: &BTreeMap<String, String>) -> Result<Self> {
        let mut s = Self::default();
        for (k, v) in map {
            s.set(k, v)?;
        }
        Ok(s)
    }

    /// The settings as config-file text, one key per line.
    pub fn to_text(&self) -> String {
        self.values.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

fn strip(e: &Error) -> String {
    match e {
        Error::Config(m) => m.clone(),
        other => other.to_string(),
    }
}

/// Where items come from.
#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSource {
    /// Two peaks followed by a step; regenerated per repeat.
    Synthetic(SyntheticSpec),
    /// Offset sinusoids; regenerated per repeat.
    Sinusoid(SinusoidSpec),
    /// A recording on disk cut by a preset.
    File { path: PathBuf, preset: DatasetPreset },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub dataset: DatasetSource,
    pub loss: Loss,
    pub hidden_size: usize,
    /// `trainer.seed` is the base seed; repeat `r` uses `seed + r`.
    pub trainer: TrainerConfig,
    pub repeats: usize,
    pub lcss_factor: f64,
    pub out: PathBuf,
    pub plot_samples: usize,
    pub alphas: Vec<f64>,
    pub single_terms: bool,
    settings: Settings,
}

struct Reader<'a>(&'a Settings);

impl Reader<'_> {
    fn raw(&self, key: &str) -> &str {
        self.0.get(key).expect("every key has a default")
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.raw(key);
        raw.parse()
            .map_err(|_| Error::Config(format!("{key}: cannot parse {raw:?}")))
    }

    fn auto<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        if self.raw(key) == "auto" {
            Ok(None)
        } else {
            self.parse(key).map(Some)
        }
    }

    fn range(&self, prefix: &str) -> Result<(f64, f64)> {
        Ok((self.parse(&format!("{prefix}_min"))?, self.parse(&format!("{prefix}_max"))?))
    }

    fn choice<T: Copy>(&self, key: &str, options: &[(&str, T)]) -> Result<T> {
        let raw = self.raw(key);
        options
            .iter()
            .find(|(name, _)| *name == raw)
            .map(|&(_, v)| v)
            .ok_or_else(|| {
                let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
                Error::Config(format!("{key}: {raw:?} is not one of {}", names.join(", ")))
            })
    }
}

fn parse_split(raw: &str) -> Result<SplitSpec> {
    let parts: Vec<f64> = raw
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::Config(format!("data.split: cannot parse {raw:?}")))?;
    match parts[..] {
        [train, val, test] => Ok(SplitSpec::new(train, val, test)?),
        _ => Err(Error::Config("data.split needs three fractions".into())),
    }
}

fn parse_alphas(raw: &str) -> Result<Vec<f64>> {
    if raw.trim().is_empty() {
        return Ok(Vec::new());
    }
    raw.split(',')
        .map(|p| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("ablate.alphas: cannot parse {p:?}")))
        })
        .collect()
}

impl ExperimentConfig {
    pub fn from_settings(settings: Settings) -> Result<Self> {
        let r = Reader(&settings);
        let tildeq = TildeQConfig {
            alpha: r.parse("loss.alpha")?,
            gamma: r.parse("loss.gamma")?,
            dominant_count: r.auto("loss.dominant_count")?,
            norm: r.choice("loss.norm", &[("l1", Norm::L1), ("l2", Norm::L2)])?,
            spectral_mode: r.choice(
                "loss.spectral_mode",
                &[("magnitude", SpectralMode::Magnitude), ("complex", SpectralMode::Complex)],
            )?,
            ncc: r.choice(
                "loss.ncc",
                &[("l2", NccNormalization::L2), ("mean_centered", NccNormalization::MeanCentered)],
            )?,
        };
        let dilate = DilateConfig {
            alpha: r.parse("dilate.alpha")?,
            smoothing: r.parse("dilate.smoothing")?,
        };
        let loss = match r.raw("loss") {
            "mse" => Loss::Mse,
            "soft_dtw" => Loss::SoftDtw(dilate),
            "dilate" => Loss::Dilate(dilate),
            "tilde_q" => Loss::TildeQ(tildeq),
            "ashift_only" => Loss::AshiftOnly,
            "phase_only" => Loss::PhaseOnly(tildeq),
            "amp_only" => Loss::AmpOnly(tildeq),
            other => return Err(Error::Config(format!("loss: unknown loss {other:?}"))),
        };
        loss.validate()?;

        let trainer = TrainerConfig {
            learning_rate: r.parse("train.learning_rate")?,
            max_epochs: r.parse("train.max_epochs")?,
            patience: r.parse("train.patience")?,
            batch_size: r.parse("train.batch_size")?,
            seed: r.parse("seed")?,
            grad_clip: match r.raw("train.grad_clip") {
                "none" => None,
                _ => Some(r.parse("train.grad_clip")?),
            },
            ..TrainerConfig::default()
        };
        trainer.validate()?;

        let counts = (
            r.parse("data.count_train")?,
            r.parse("data.count_val")?,
            r.parse("data.count_test")?,
        );
        let input_len: Option<usize> = r.auto("data.input_len")?;
        let horizon: Option<usize> = r.auto("data.horizon")?;
        let dataset = match r.raw("dataset") {
            "synthetic" => {
                let d = SyntheticSpec::default();
                let spec = SyntheticSpec {
                    count_train: counts.0,
                    count_val: counts.1,
                    count_test: counts.2,
                    input_len: input_len.unwrap_or(d.input_len),
                    horizon: horizon.unwrap_or(d.horizon),
                    amplitude: r.range("synthetic.amplitude")?,
                    noise: r.parse("synthetic.noise")?,
                    ..d
                };
                spec.validate()?;
                DatasetSource::Synthetic(spec)
            }
            "sinusoid" => {
                let d = SinusoidSpec::default();
                let spec = SinusoidSpec {
                    count_train: counts.0,
                    count_val: counts.1,
                    count_test: counts.2,
                    input_len: input_len.unwrap_or(d.input_len),
                    horizon: horizon.unwrap_or(d.horizon),
                    offset: r.range("sinusoid.offset")?,
                    amplitude: r.range("sinusoid.amplitude")?,
                    period: r.range("sinusoid.period")?,
                    seed: 0,
                };
                spec.validate()?;
                DatasetSource::Sinusoid(spec)
            }
            name => {
                let preset_name = PresetName::parse(name)
                    .ok()
                    .filter(|p| *p != PresetName::Synthetic)
                    .ok_or_else(|| Error::Config(format!("dataset: unknown dataset {name:?}")))?;
                let mut preset = DatasetPreset::by_name(preset_name);
                if let Some(n) = input_len {
                    preset.input_len = n;
                }
                if let Some(l) = horizon {
                    preset.horizon = l;
                }
                if preset.record_len.is_some() {
                    preset.record_len = Some(preset.input_len + preset.horizon);
                }
                preset.stride = r.parse("data.stride")?;
                if r.raw("data.split") != "auto" {
                    preset.split = parse_split(r.raw("data.split"))?;
                }
                if let Some(normalize) = r.auto("data.normalize")? {
                    preset.normalize = normalize;
                }
                preset.validate()?;
                let path = r.raw("data.path");
                if path.is_empty() {
                    return Err(Error::Config(format!("dataset {name} needs data.path")));
                }
                DatasetSource::File {
                    path: PathBuf::from(path),
                    preset,
                }
            }
        };

        let repeats: usize = r.parse("repeats")?;
        if repeats == 0 {
            return Err(Error::Config("repeats must be at least 1".into()));
        }
        let hidden_size: usize = r.parse("model.hidden_size")?;
        if hidden_size == 0 {
            return Err(Error::Config("model.hidden_size must be positive".into()));
        }
        let lcss_factor: f64 = r.parse("metrics.lcss_factor")?;
        if !(lcss_factor > 0.0) {
            return Err(Error::Config("metrics.lcss_factor must be positive".into()));
        }
        let alphas = parse_alphas(r.raw("ablate.alphas"))?;
        Ok(Self {
            name: r.raw("name").to_string(),
            dataset,
            loss,
            hidden_size,
            trainer,
            repeats,
            lcss_factor,
            out: PathBuf::from(r.raw("out")),
            plot_samples: r.parse("plot.samples")?,
            alphas,
            single_terms: r.parse("ablate.single_terms")?,
            settings,
        })
    }

    pub fn settings(&self) -> &Settings {
        &self.settings
    }

    /// A copy with some settings replaced, re-validated.
    pub fn with(&self, assignments: &[(&str, String)]) -> Result<Self> {
        let mut s = self.settings.clone();
        for (k, v) in assignments {
            s.set(k, v)?;
        }
        Self::from_settings(s)
    }

    pub fn seeds(&self) -> Vec<u64> {
        (0..self.repeats as u64).map(|r| self.trainer.seed + r).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_parse() {
        let cfg = ExperimentConfig::from_settings(Settings::default()).unwrap();
        assert_eq!(cfg.repeats, 10);
        assert_eq!(cfg.hidden_size, 128);
        assert_eq!(cfg.loss, Loss::TildeQ(TildeQConfig::default()));
        assert_eq!(cfg.trainer, TrainerConfig::default());
        assert!(matches!(cfg.dataset, DatasetSource::Synthetic(ref s) if *s == SyntheticSpec::default()));
        assert_eq!(cfg.alphas, vec![0.99, 0.9, 0.5, 0.2]);
    }

    #[test]
    fn layers_apply_in_order() {
        let mut s = Settings::default();
        s.apply_text("# comment\nloss = mse\nrepeats = 3  # trailing\n\nseed=7\n", "cfg").unwrap();
        s.apply_env([
            ("TILDEQ_REPEATS".to_string(), "4".to_string()),
            ("TILDEQ_TRAIN_LEARNING_RATE".to_string(), "0.01".to_string()),
            ("UNRELATED".to_string(), "x".to_string()),
        ])
        .unwrap();
        s.assign("seed=9").unwrap();
        let cfg = ExperimentConfig::from_settings(s).unwrap();
        assert_eq!(cfg.loss, Loss::Mse);
        assert_eq!(cfg.repeats, 4);
        assert_eq!(cfg.trainer.learning_rate, 0.01);
        assert_eq!(cfg.seeds(), vec![9, 10, 11, 12]);
    }

    #[test]
    fn bad_lines_name_their_position() {
        let mut s = Settings::default();
        let err = s.apply_text("loss = mse\nbogus = 1\n", "exp.cfg").unwrap_err();
        assert_eq!(err.to_string(), "config: exp.cfg:2: unknown key \"bogus\"");
        assert!(s.apply_text("just words\n", "c").is_err());
    }

    #[test]
    fn losses_are_validated_before_training() {
        let mut s = Settings::default();
        s.set("loss.alpha", "1.5").unwrap();
        assert!(ExperimentConfig::from_settings(s).is_err());
        let mut s = Settings::default();
        s.set("loss", "huber").unwrap();
        assert!(ExperimentConfig::from_settings(s).is_err());
        let mut s = Settings::default();
        s.set("repeats", "0").unwrap();
        assert!(ExperimentConfig::from_settings(s).is_err());
    }

    #[test]
    fn file_presets_take_paper_shapes() {
        let mut s = Settings::default();
        s.apply_text("dataset = ecg5000\ndata.path = beats.csv\n", "c").unwrap();
        let cfg = ExperimentConfig::from_settings(s).unwrap();
        let DatasetSource::File { preset, .. } = cfg.dataset else { panic!() };
        assert_eq!((preset.input_len, preset.horizon, preset.record_len), (84, 56, Some(140)));

        let mut s = Settings::default();
        s.apply_text("dataset = traffic\n", "c").unwrap();
        assert!(ExperimentConfig::from_settings(s).is_err(), "path is required");
    }

    #[test]
    fn settings_round_trip_through_text_and_maps() {
        let mut s = Settings::default();
        s.assign("loss=dilate").unwrap();
        let mut back = Settings::default();
        back.apply_text(&s.to_text(), "echo").unwrap();
        assert_eq!(back, s);
        assert_eq!(Settings::from_map(&s.to_map()).unwrap(), s);
        assert_eq!(env_var_name("train.grad_clip"), "TILDEQ_TRAIN_GRAD_CLIP");
    }
}
