//! Evaluation measures: hard DTW with its alignment path, the temporal
//! distortion index along that path, and the LCSS match ratio.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Result};
use crate::series::{population_std, ForecastPair};

/// Monotone alignment path from `(0, 0)` to `(n-1, m-1)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignmentPath {
    steps: Vec<(usize, usize)>,
}

impl AlignmentPath {
    /// Checks boundary completeness and the `(1,0)`, `(0,1)`, `(1,1)` step rule.
    pub fn new(steps: Vec<(usize, usize)>) -> Result<Self> {
        if steps.first() != Some(&(0, 0)) {
            return Err(invalid("alignment path must start at (0, 0)"));
        }
        for w in steps.windows(2) {
            let (di, dj) = (w[1].0.wrapping_sub(w[0].0), w[1].1.wrapping_sub(w[0].1));
            if !matches!((di, dj), (1, 0) | (0, 1) | (1, 1)) {
                return Err(invalid("alignment path has an illegal step"));
            }
        }
        Ok(Self { steps })
    }

    pub fn diagonal(len: usize) -> Self {
        Self {
            steps: (0..len).map(|i| (i, i)).collect(),
        }
    }

    pub fn steps(&self) -> &[(usize, usize)] {
        &self.steps
    }

    /// Length of the aligned sequences, read off the final step.
    pub fn series_len(&self) -> usize {
        self.steps.last().map_or(0, |&(i, j)| i.max(j) + 1)
    }
}

/// Hard DTW result.
#[derive(Debug, Clone, PartialEq)]
pub struct Dtw {
    pub value: f64,
    pub path: AlignmentPath,
}

/// Classic DTW with squared-difference local cost.
///
/// Backtracking prefers the diagonal predecessor, then the one that
/// advances `i` (truth index), then the one that advances `j`.
pub fn dtw(pair: &ForecastPair) -> Dtw {
    let (y, p) = (pair.truth(), pair.pred());
    let n = y.len();
    let m = p.len();
    let w = m + 1;
    let mut acc = vec![f64::INFINITY; (n + 1) * w];
    acc[0] = 0.0;
    for i in 1..=n {
        for j in 1..=m {
            let d = y[i - 1] - p[j - 1];
            let best = acc[(i - 1) * w + j - 1]
                .min(acc[(i - 1) * w + j])
                .min(acc[i * w + j - 1]);
            acc[i * w + j] = d * d + best;
        }
    }
    let value = acc[n * w + m];

    let (mut i, mut j) = (n, m);
    let mut steps = vec![(i - 1, j - 1)];
    while (i, j) != (1, 1) {
        let candidates = [(i - 1, j - 1), (i - 1, j), (i, j - 1)];
        let mut chosen = None;
        let mut best = f64::INFINITY;
        for &(a, b) in &candidates {
            if a == 0 || b == 0 {
                continue;
            }
            let v = acc[a * w + b];
            if v < best {
                best = v;
                chosen = Some((a, b));
            }
        }
        let (a, b) = chosen.expect("a finite predecessor always exists");
        i = a;
        j = b;
        steps.push((i - 1, j - 1));
    }
    steps.reverse();
    Dtw {
        value,
        path: AlignmentPath { steps },
    }
}

/// Squared diagonal deviation accumulated along a path: `Σ (i-j)² / T'²`.
pub fn tdi(path: &AlignmentPath) -> f64 {
    let len = path.series_len() as f64;
    path.steps
        .iter()
        .map(|&(i, j)| {
            let d = i as f64 - j as f64;
            d * d
        })
        .sum::<f64>()
        / (len * len)
}

/// LCSS thresholds: values match within `epsilon`, indices within `delta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LcssConfig {
    pub epsilon: f64,
    pub delta: usize,
}

impl LcssConfig {
    pub fn new(epsilon: f64, delta: usize) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(invalid("LCSS epsilon must be positive"));
        }
        Ok(Self { epsilon, delta })
    }

    /// `epsilon = factor · std(truth)` (floored at `f64::EPSILON` for flat
    /// truths) and an unrestricted index window.
    pub fn for_pair(pair: &ForecastPair, factor: f64) -> Self {
        Self {
            epsilon: (factor * population_std(pair.truth())).max(f64::EPSILON),
            delta: pair.len(),
        }
    }
}

/// Matched length of the longest common subsequence divided by `T'`.
pub fn lcss(pair: &ForecastPair, cfg: &LcssConfig) -> Result<f64> {
    if !(cfg.epsilon > 0.0) {
        return Err(invalid("LCSS epsilon must be positive"));
    }
    let (y, p) = (pair.truth(), pair.pred());
    let n = y.len();
    let w = n + 1;
    let mut table = vec![0usize; w * w];
    for i in 1..=n {
        for j in 1..=n {
            let matched = libm::fabs(y[i - 1] - p[j - 1]) < cfg.epsilon && i.abs_diff(j) <= cfg.delta;
            table[i * w + j] = if matched {
                table[(i - 1) * w + j - 1] + 1
            } else {
                table[(i - 1) * w + j].max(table[i * w + j - 1])
            };
        }
    }
    Ok(table[n * w + n] as f64 / n as f64)
}

/// All four evaluation measures for one forecast.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scores {
    pub mse: f64,
    pub dtw: f64,
    pub tdi: f64,
    pub lcss: f64,
}

pub fn score(pair: &ForecastPair, lcss_cfg: &LcssConfig) -> Result<Scores> {
    let d = dtw(pair);
    let mse = pair
        .truth()
        .iter()
        .zip(pair.pred().iter())
        .map(|(y, p)| (p - y) * (p - y))
        .sum::<f64>()
        / pair.len() as f64;
    Ok(Scores {
        mse,
        dtw: d.value,
        tdi: tdi(&d.path),
        lcss: lcss(pair, lcss_cfg)?,
    })
}
