//! Sequence types, windowing, chronological splits and z-score normalization.
//!
//! Every payload in the toolkit is a univariate [`Series`]. Datasets are
//! lists of `(input, target)` windows that carry their own chronological
//! split boundaries, so normalization statistics can be taken from the
//! training portion only.

use alloc::vec::Vec;
use core::ops::{Deref, Range};

use crate::error::{invalid, Error, Result};

/// A finite, uniformly sampled, real-valued sequence with at least one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    values: Vec<f64>,
}

impl Series {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Empty);
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { values })
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        Self::new(values.to_vec())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    pub fn mean(&self) -> f64 {
        mean(&self.values)
    }

    /// Population standard deviation.
    pub fn std(&self) -> f64 {
        population_std(&self.values)
    }
}

impl Deref for Series {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.values
    }
}

impl TryFrom<Vec<f64>> for Series {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Series::new(values)
    }
}

pub(crate) fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

pub(crate) fn population_std(values: &[f64]) -> f64 {
    let m = mean(values);
    let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64;
    libm::sqrt(var)
}

/// Aligned ground truth and prediction horizons of equal length.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastPair {
    truth: Series,
    pred: Series,
}

impl ForecastPair {
    pub fn new(truth: Series, pred: Series) -> Result<Self> {
        if truth.len() != pred.len() {
            return Err(Error::LengthMismatch {
                truth: truth.len(),
                pred: pred.len(),
            });
        }
        Ok(Self { truth, pred })
    }

    pub fn from_slices(truth: &[f64], pred: &[f64]) -> Result<Self> {
        Self::new(Series::from_slice(truth)?, Series::from_slice(pred)?)
    }

    pub fn truth(&self) -> &Series {
        &self.truth
    }

    pub fn pred(&self) -> &Series {
        &self.pred
    }

    /// Horizon length `T'`.
    pub fn len(&self) -> usize {
        self.truth.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Train/validation/test fractions of a chronological split.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub val_fraction: f64,
    pub test_fraction: f64,
}

impl SplitSpec {
    pub fn new(train_fraction: f64, val_fraction: f64, test_fraction: f64) -> Result<Self> {
        let spec = Self {
            train_fraction,
            val_fraction,
            test_fraction,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let fractions = [self.train_fraction, self.val_fraction, self.test_fraction];
        if fractions.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(invalid("split fractions must lie in [0, 1]"));
        }
        let total: f64 = fractions.iter().sum();
        if libm::fabs(total - 1.0) > 1e-9 {
            return Err(invalid("split fractions must sum to 1"));
        }
        Ok(())
    }

    /// Cut points `(train_end, val_end)` for `len` contiguous elements.
    pub fn boundaries(&self, len: usize) -> (usize, usize) {
        let cut = |fraction: f64| {
            let raw = libm::floor(len as f64 * fraction + 1e-9) as usize;
            raw.min(len)
        };
        let train_end = cut(self.train_fraction);
        let val_end = cut(self.train_fraction + self.val_fraction).max(train_end);
        (train_end, val_end)
    }
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: 0.6,
            val_fraction: 0.2,
            test_fraction: 0.2,
        }
    }
}

/// Z-score statistics taken from a training split.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalization {
    pub mean: f64,
    pub std: f64,
}

impl Normalization {
    pub fn apply(&self, x: f64) -> f64 {
        (x - self.mean) / self.std
    }

    pub fn invert(&self, z: f64) -> f64 {
        z * self.std + self.mean
    }
}

/// One `(input, target)` training example.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowItem {
    pub input: Series,
    pub target: Series,
}

/// Windows of a series together with their split boundaries and
/// optional normalization statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedDataset {
    items: Vec<WindowItem>,
    input_len: usize,
    horizon: usize,
    train_end: usize,
    val_end: usize,
    normalization: Option<Normalization>,
}

impl WindowedDataset {
    /// Builds a dataset from explicit items. `train_end..val_end` is the
    /// validation range; everything after `val_end` is test.
    pub fn from_items(items: Vec<WindowItem>, train_end: usize, val_end: usize) -> Result<Self> {
        let first = items.first().ok_or(Error::EmptyDataset)?;
        let (input_len, horizon) = (first.input.len(), first.target.len());
        if items
            .iter()
            .any(|it| it.input.len() != input_len || it.target.len() != horizon)
        {
            return Err(invalid("all windows must share input and target lengths"));
        }
        if train_end > val_end || val_end > items.len() {
            return Err(invalid("split boundaries out of range"));
        }
        Ok(Self {
            items,
            input_len,
            horizon,
            train_end,
            val_end,
            normalization: None,
        })
    }

    pub fn items(&self) -> &[WindowItem] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn input_len(&self) -> usize {
        self.input_len
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn normalization(&self) -> Option<Normalization> {
        self.normalization
    }

    pub fn train_range(&self) -> Range<usize> {
        0..self.train_end
    }

    pub fn val_range(&self) -> Range<usize> {
        self.train_end..self.val_end
    }

    pub fn test_range(&self) -> Range<usize> {
        self.val_end..self.items.len()
    }

    pub fn train(&self) -> &[WindowItem] {
        &self.items[self.train_range()]
    }

    pub fn val(&self) -> &[WindowItem] {
        &self.items[self.val_range()]
    }

    pub fn test(&self) -> &[WindowItem] {
        &self.items[self.test_range()]
    }

    /// Inverse of [`zscore_normalize`]; a no-op when no statistics are stored.
    pub fn denormalize(&self) -> Result<Self> {
        let Some(stats) = self.normalization else {
            return Ok(self.clone());
        };
        let mut out = self.map_values(|v| stats.invert(v))?;
        out.normalization = None;
        Ok(out)
    }

    fn map_values(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        let map = |s: &Series| Series::new(s.iter().map(|&v| f(v)).collect());
        let items = self
            .items
            .iter()
            .map(|it| {
                Ok(WindowItem {
                    input: map(&it.input)?,
                    target: map(&it.target)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            items,
            ..self.clone()
        })
    }
}

/// Number of windows `window` produces.
pub fn window_count(len: usize, n: usize, horizon: usize, stride: usize) -> usize {
    if len < n + horizon || stride == 0 {
        0
    } else {
        (len - n - horizon) / stride + 1
    }
}

fn window_items(
    values: &[f64],
    n: usize,
    horizon: usize,
    stride: usize,
) -> Result<Vec<WindowItem>> {
    if n == 0 || horizon == 0 || stride == 0 {
        return Err(invalid("window sizes and stride must be positive"));
    }
    if values.len() < n + horizon {
        return Err(Error::InsufficientLength {
            needed: n + horizon,
            got: values.len(),
        });
    }
    (0..window_count(values.len(), n, horizon, stride))
        .map(|w| {
            let start = w * stride;
            Ok(WindowItem {
                input: Series::from_slice(&values[start..start + n])?,
                target: Series::from_slice(&values[start + n..start + n + horizon])?,
            })
        })
        .collect()
}

/// Every window `[t, t+n) -> [t+n, t+n+horizon)` with step `stride`.
/// All windows land in the training split.
pub fn window(series: &Series, n: usize, horizon: usize, stride: usize) -> Result<WindowedDataset> {
    let items = window_items(series, n, horizon, stride)?;
    let count = items.len();
    WindowedDataset::from_items(items, count, count)
}

/// Splits the series chronologically, then windows each segment on its
/// own so that no window straddles a split boundary.
pub fn window_split(
    series: &Series,
    n: usize,
    horizon: usize,
    stride: usize,
    split: &SplitSpec,
) -> Result<WindowedDataset> {
    split.validate()?;
    let (train_end, val_end) = split.boundaries(series.len());
    let segments = [
        &series[..train_end],
        &series[train_end..val_end],
        &series[val_end..],
    ];
    let mut items = Vec::new();
    let mut ends = [0usize; 3];
    for (segment, end) in segments.iter().zip(ends.iter_mut()) {
        if !segment.is_empty() {
            items.extend(window_items(segment, n, horizon, stride)?);
        }
        *end = items.len();
    }
    WindowedDataset::from_items(items, ends[0], ends[1])
}

/// Z-scores every value with the population mean and standard deviation of
/// the training split (inputs and targets together). Datasets that already
/// carry statistics are returned unchanged.
pub fn zscore_normalize(dataset: &WindowedDataset) -> Result<WindowedDataset> {
    if dataset.normalization.is_some() {
        return Ok(dataset.clone());
    }
    let train = dataset.train();
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let values: Vec<f64> = train
        .iter()
        .flat_map(|it| it.input.iter().chain(it.target.iter()).copied())
        .collect();
    let stats = Normalization {
        mean: mean(&values),
        std: population_std(&values),
    };
    if !(stats.std > 0.0) {
        return Err(Error::ConstantSeries);
    }
    let mut out = dataset.map_values(|v| stats.apply(v))?;
    out.normalization = Some(stats);
    Ok(out)
}
