//! Dataset construction: the two-peak/step synthetic set, a sinusoid
//! family for ablations, and the fixed presets for real recordings.

use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::series::{window_split, zscore_normalize, Series, SplitSpec, WindowItem, WindowedDataset};

/// Half-width of the triangular peaks, in samples. A peak at `p` with
/// amplitude `a` is `a·(1 − |t−p|/3)` for `|t−p| < 3`.
pub const PEAK_HALF_WIDTH: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub count_train: usize,
    pub count_val: usize,
    pub count_test: usize,
    pub input_len: usize,
    pub horizon: usize,
    /// Inclusive range of the first peak's position.
    pub first_peak: (usize, usize),
    /// Minimum distance between the two peaks; keeps them separate.
    pub min_gap: usize,
    /// Amplitude range shared by both peaks.
    pub amplitude: (f64, f64),
    /// Step onset = second-peak position + lag, measured from the start of
    /// the input window.
    pub step_lag: usize,
    /// Half-width of uniform noise added to inputs; 0 keeps the set noiseless.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            count_train: 500,
            count_val: 500,
            count_test: 500,
            input_len: 20,
            horizon: 40,
            first_peak: (3, 8),
            min_gap: 2 * PEAK_HALF_WIDTH,
            amplitude: (0.2, 1.0),
            step_lag: 20,
            noise: 0.0,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    /// Largest admissible peak position: the whole triangle stays inside
    /// the input window.
    fn last_peak(&self) -> usize {
        self.input_len.saturating_sub(PEAK_HALF_WIDTH)
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.first_peak;
        if lo < PEAK_HALF_WIDTH - 1 || lo > hi {
            return Err(invalid("first peak range must start inside the input window"));
        }
        if self.min_gap < 2 * PEAK_HALF_WIDTH || hi + self.min_gap > self.last_peak() {
            return Err(invalid("peaks must fit separately inside the input window"));
        }
        let (a_lo, a_hi) = self.amplitude;
        if !(a_lo > 0.0 && a_lo <= a_hi && a_hi.is_finite()) {
            return Err(invalid("peak amplitudes must be positive"));
        }
        let earliest = lo + self.min_gap + self.step_lag;
        let latest = self.last_peak() + self.step_lag;
        if earliest < self.input_len || latest >= self.input_len + self.horizon {
            return Err(invalid("step onset must fall inside the forecast horizon"));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(invalid("noise must be non-negative"));
        }
        if self.count_train == 0 || self.count_val == 0 || self.count_test == 0 {
            return Err(Error::EmptyDataset);
        }
        Ok(())
    }
}

fn triangle(t: usize, peak: usize, amplitude: f64) -> f64 {
    let d = t.abs_diff(peak);
    if d < PEAK_HALF_WIDTH {
        amplitude * (1.0 - d as f64 / PEAK_HALF_WIDTH as f64)
    } else {
        0.0
    }
}

fn synthetic_item(spec: &SyntheticSpec, rng: &mut ChaCha8Rng) -> Result<WindowItem> {
    let p1 = rng.random_range(spec.first_peak.0..=spec.first_peak.1);
    let p2 = rng.random_range(p1 + spec.min_gap..=spec.last_peak());
    let (a_lo, a_hi) = spec.amplitude;
    let a1 = rng.random_range(a_lo..=a_hi);
    let a2 = rng.random_range(a_lo..=a_hi);
    let input = (0..spec.input_len)
        .map(|t| {
            let noise = if spec.noise > 0.0 {
                rng.random_range(-spec.noise..=spec.noise)
            } else {
                0.0
            };
            triangle(t, p1, a1) + triangle(t, p2, a2) + noise
        })
        .collect();
    let onset = p2 + spec.step_lag - spec.input_len;
    let target = (0..spec.horizon).map(|t| if t >= onset { a2 } else { 0.0 }).collect();
    Ok(WindowItem {
        input: Series::new(input)?,
        target: Series::new(target)?,
    })
}

/// Two triangular peaks on a zero baseline as input; a single step whose
/// onset and height follow the second peak as target. Items are laid out
/// train, then val, then test. Values are left unnormalized.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<WindowedDataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let total = spec.count_train + spec.count_val + spec.count_test;
    let items = (0..total)
        .map(|_| synthetic_item(spec, &mut rng))
        .collect::<Result<Vec<_>>>()?;
    WindowedDataset::from_items(items, spec.count_train, spec.count_train + spec.count_val)
}

/// Sinusoids `b + A·sin(2πt/P + φ)` observed for `input_len` steps and
/// continued over the horizon. Offset, amplitude and period are drawn
/// per item; the phase is uniform.
#[derive(Debug, Clone, PartialEq)]
pub struct SinusoidSpec {
    pub count_train: usize,
    pub count_val: usize,
    pub count_test: usize,
    pub input_len: usize,
    pub horizon: usize,
    pub offset: (f64, f64),
    pub amplitude: (f64, f64),
    pub period: (f64, f64),
    pub seed: u64,
}

impl Default for SinusoidSpec {
    fn default() -> Self {
        Self {
            count_train: 500,
            count_val: 500,
            count_test: 500,
            input_len: 20,
            horizon: 40,
            offset: (-2.0, 2.0),
            amplitude: (0.5, 1.5),
            period: (8.0, 20.0),
            seed: 0,
        }
    }
}

impl SinusoidSpec {
    pub fn validate(&self) -> Result<()> {
        let ordered = |(lo, hi): (f64, f64)| lo.is_finite() && hi.is_finite() && lo <= hi;
        if !ordered(self.offset) || !ordered(self.amplitude) || !ordered(self.period) {
            return Err(invalid("sinusoid ranges must be finite and ordered"));
        }
        if !(self.amplitude.0 > 0.0) || !(self.period.0 > 0.0) {
            return Err(invalid("sinusoid amplitude and period must be positive"));
        }
        if self.input_len == 0 || self.horizon == 0 {
            return Err(invalid("input length and horizon must be positive"));
        }
        if self.count_train == 0 || self.count_val == 0 || self.count_test == 0 {
            return Err(Error::EmptyDataset);
        }
        Ok(())
    }
}

fn draw(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}

pub fn generate_sinusoids(spec: &SinusoidSpec) -> Result<WindowedDataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let total = spec.count_train + spec.count_val + spec.count_test;
    let mut items = Vec::with_capacity(total);
    for _ in 0..total {
        let b = draw(&mut rng, spec.offset);
        let a = draw(&mut rng, spec.amplitude);
        let p = draw(&mut rng, spec.period);
        let phi = rng.random_range(0.0..2.0 * PI);
        let at = |t: usize| b + a * libm::sin(2.0 * PI * t as f64 / p + phi);
        let input = (0..spec.input_len).map(at).collect();
        let target = (spec.input_len..spec.input_len + spec.horizon).map(at).collect();
        items.push(WindowItem {
            input: Series::new(input)?,
            target: Series::new(target)?,
        });
    }
    WindowedDataset::from_items(items, spec.count_train, spec.count_train + spec.count_val)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PresetName {
    Synthetic,
    Ecg5000,
    Traffic,
    Custom,
}

impl PresetName {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Synthetic => "synthetic",
            Self::Ecg5000 => "ecg5000",
            Self::Traffic => "traffic",
            Self::Custom => "custom",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "synthetic" => Ok(Self::Synthetic),
            "ecg5000" => Ok(Self::Ecg5000),
            "traffic" => Ok(Self::Traffic),
            "custom" => Ok(Self::Custom),
            _ => Err(invalid("unknown dataset preset")),
        }
    }
}

/// How a recording is cut into forecasting items.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetPreset {
    pub name: PresetName,
    pub input_len: usize,
    pub horizon: usize,
    pub split: SplitSpec,
    /// Sliding-window stride; ignored for per-beat presets.
    pub stride: usize,
    /// When set, the recording is a concatenation of equal-length records
    /// and each record becomes exactly one item.
    pub record_len: Option<usize>,
    pub normalize: bool,
}

pub const ECG_BEAT_LEN: usize = 140;

impl DatasetPreset {
    pub fn synthetic() -> Self {
        Self {
            name: PresetName::Synthetic,
            input_len: 20,
            horizon: 40,
            split: SplitSpec::new(1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0).expect("thirds sum to one"),
            stride: 1,
            record_len: Some(60),
            normalize: false,
        }
    }

    pub fn ecg5000() -> Self {
        Self {
            name: PresetName::Ecg5000,
            input_len: 84,
            horizon: 56,
            split: SplitSpec::new(0.1, 0.1, 0.8).expect("fractions sum to one"),
            stride: 1,
            record_len: Some(ECG_BEAT_LEN),
            normalize: true,
        }
    }

    pub fn traffic() -> Self {
        Self {
            name: PresetName::Traffic,
            input_len: 168,
            horizon: 24,
            split: SplitSpec::default(),
            stride: 1,
            record_len: None,
            normalize: true,
        }
    }

    pub fn custom(input_len: usize, horizon: usize, split: SplitSpec) -> Self {
        Self {
            name: PresetName::Custom,
            input_len,
            horizon,
            split,
            stride: 1,
            record_len: None,
            normalize: true,
        }
    }

    pub fn by_name(name: PresetName) -> Self {
        match name {
            PresetName::Synthetic => Self::synthetic(),
            PresetName::Ecg5000 => Self::ecg5000(),
            PresetName::Traffic => Self::traffic(),
            PresetName::Custom => Self::custom(24, 24, SplitSpec::default()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.split.validate()?;
        if self.input_len == 0 || self.horizon == 0 || self.stride == 0 {
            return Err(invalid("input length, horizon and stride must be positive"));
        }
        if let Some(len) = self.record_len {
            if len != self.input_len + self.horizon {
                return Err(invalid("record length must equal input length plus horizon"));
            }
        }
        Ok(())
    }

    /// Cuts a raw recording into a dataset per this preset.
    pub fn build(&self, series: &Series) -> Result<WindowedDataset> {
        self.validate()?;
        let dataset = match self.record_len {
            Some(len) => records(series, len, self.input_len, &self.split)?,
            None => window_split(series, self.input_len, self.horizon, self.stride, &self.split)?,
        };
        if self.normalize {
            zscore_normalize(&dataset)
        } else {
            Ok(dataset)
        }
    }
}

/// One item per consecutive record; the split is over records.
fn records(series: &Series, len: usize, input_len: usize, split: &SplitSpec) -> Result<WindowedDataset> {
    if series.len() < len {
        return Err(Error::InsufficientLength {
            needed: len,
            got: series.len(),
        });
    }
    if !series.len().is_multiple_of(len) {
        return Err(invalid("recording length is not a whole number of records"));
    }
    let items = series
        .chunks(len)
        .map(|rec| {
            Ok(WindowItem {
                input: Series::from_slice(&rec[..input_len])?,
                target: Series::from_slice(&rec[input_len..])?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let (train_end, val_end) = split.boundaries(items.len());
    WindowedDataset::from_items(items, train_end, val_end)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn small() -> SyntheticSpec {
        SyntheticSpec {
            count_train: 40,
            count_val: 30,
            count_test: 30,
            ..SyntheticSpec::default()
        }
    }

    #[test]
    fn synthetic_counts_follow_the_spec() {
        let ds = generate_synthetic(&SyntheticSpec::default()).unwrap();
        assert_eq!(ds.len(), 1500);
        assert_eq!((ds.train().len(), ds.val().len(), ds.test().len()), (500, 500, 500));
        assert_eq!((ds.input_len(), ds.horizon()), (20, 40));
        assert!(ds.normalization().is_none());
    }

    #[test]
    fn synthetic_is_seeded() {
        assert_eq!(generate_synthetic(&small()).unwrap(), generate_synthetic(&small()).unwrap());
        let other = SyntheticSpec { seed: 1, ..small() };
        assert_ne!(generate_synthetic(&small()).unwrap(), generate_synthetic(&other).unwrap());
    }

    #[test]
    fn step_follows_second_peak() {
        for item in generate_synthetic(&small()).unwrap().items() {
            let x = item.input.as_slice();
            let maxima: Vec<usize> = (1..x.len() - 1)
                .filter(|&t| x[t] > x[t - 1] && x[t] > x[t + 1])
                .collect();
            assert_eq!(maxima.len(), 2);
            let (p2, a2) = (maxima[1], x[maxima[1]]);
            let onset = item.target.iter().position(|&v| v != 0.0).unwrap();
            assert_eq!(onset, p2);
            assert!(item.target[onset..].iter().all(|&v| v == a2));
        }
    }

    #[test]
    fn rejects_peaks_outside_the_window() {
        let spec = SyntheticSpec {
            first_peak: (3, 12),
            ..SyntheticSpec::default()
        };
        assert!(generate_synthetic(&spec).is_err());
    }

    #[test]
    fn sinusoids_continue_the_input() {
        let spec = SinusoidSpec {
            count_train: 3,
            count_val: 2,
            count_test: 2,
            offset: (1.0, 1.0),
            amplitude: (2.0, 2.0),
            period: (10.0, 10.0),
            ..SinusoidSpec::default()
        };
        let ds = generate_sinusoids(&spec).unwrap();
        for item in ds.items() {
            // period 10: target[t] repeats input[t + 20 - 10·k]
            assert!((item.target[0] - item.input[10]).abs() < 1e-12);
            assert!((item.target[15] - item.input[15]).abs() < 1e-12);
            let m: f64 = item.input.iter().sum::<f64>() / 20.0;
            assert!((m - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ecg_preset_cuts_beats() {
        let beats: Vec<f64> = (0..10 * ECG_BEAT_LEN).map(|i| (i % ECG_BEAT_LEN) as f64 + (i / ECG_BEAT_LEN) as f64).collect();
        let ds = DatasetPreset::ecg5000().build(&Series::new(beats).unwrap()).unwrap();
        assert_eq!(ds.len(), 10);
        assert_eq!((ds.train().len(), ds.val().len(), ds.test().len()), (1, 1, 8));
        assert_eq!((ds.input_len(), ds.horizon()), (84, 56));
        let raw = ds.denormalize().unwrap();
        assert!((raw.items()[3].input[0] - 3.0).abs() < 1e-9);
        assert!((raw.items()[3].target[0] - 87.0).abs() < 1e-9);
    }

    #[test]
    fn ecg_preset_rejects_partial_beats() {
        let s = Series::new(vec![0.5; ECG_BEAT_LEN + 7]).unwrap();
        assert!(DatasetPreset::ecg5000().build(&s).is_err());
    }

    #[test]
    fn traffic_preset_splits_chronologically() {
        let values: Vec<f64> = (0..17544).map(|i| libm::sin(i as f64 * 0.26)).collect();
        let ds = DatasetPreset::traffic().build(&Series::new(values).unwrap()).unwrap();
        let n = |s: &[WindowItem]| s.len() as f64;
        let segment = |frac: f64| libm::floor(17544.0 * frac) - 191.0;
        assert_eq!(n(ds.train()), segment(0.6));
        assert!(ds.normalization().is_some());
        assert_eq!(PresetName::parse("traffic").unwrap(), PresetName::Traffic);
    }
}
