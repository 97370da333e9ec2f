//! Generators for the six structured distortions and the invariance check
//! built on top of them.
//!
//! A distortion reads its source through [`Mother`], so time shifts and
//! time maps may look past the end of the window being distorted. Sampled
//! sources are addressed on the integer grid `t = 0, 1, …`; fractional
//! times are rounded up to the next grid point, the same `⌈·⌉` convention
//! the uniform time-scaling index map uses.

use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{invalid, Error, Result};
use crate::losses::ForecastLoss;
use crate::series::{ForecastPair, Series};

const GRID_TOL: f64 = 1e-9;

/// A source signal that can be evaluated at (possibly out-of-window) times.
pub trait Mother {
    fn at(&self, t: f64) -> Result<f64>;
}

fn grid_index(t: f64) -> Option<usize> {
    let idx = libm::ceil(t - GRID_TOL);
    (idx >= 0.0).then_some(idx as usize)
}

impl Mother for Series {
    fn at(&self, t: f64) -> Result<f64> {
        grid_index(t)
            .and_then(|i| self.get(i).copied())
            .ok_or(Error::InsufficientSupport { time: t })
    }
}

impl Mother for [f64] {
    fn at(&self, t: f64) -> Result<f64> {
        grid_index(t)
            .and_then(|i| self.get(i).copied())
            .ok_or(Error::InsufficientSupport { time: t })
    }
}

/// A sampled series repeated with period equal to its length, so phase
/// shifts become circular shifts.
#[derive(Debug, Clone, Copy)]
pub struct Periodic<'a>(pub &'a [f64]);

impl Mother for Periodic<'_> {
    fn at(&self, t: f64) -> Result<f64> {
        let n = self.0.len() as f64;
        if self.0.is_empty() || !t.is_finite() {
            return Err(Error::InsufficientSupport { time: t });
        }
        let wrapped = t - n * libm::floor(t / n);
        let idx = libm::ceil(wrapped - GRID_TOL) as usize % self.0.len();
        Ok(self.0[idx])
    }
}

/// An analytic signal defined for every real time.
pub struct Analytic<F>(pub F);

impl<F: Fn(f64) -> f64> Mother for Analytic<F> {
    fn at(&self, t: f64) -> Result<f64> {
        Ok((self.0)(t))
    }
}

/// Shared pointwise function `h(t)` used by the dynamic distortions.
#[derive(Clone)]
pub struct Profile(Arc<dyn Fn(f64) -> f64 + Send + Sync>);

impl Profile {
    pub fn new(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self(Arc::new(f))
    }

    pub fn identity() -> Self {
        Self::new(|t| t)
    }

    pub fn eval(&self, t: f64) -> f64 {
        (self.0)(t)
    }
}

impl fmt::Debug for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Profile(..)")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistortionKind {
    AmplitudeShift,
    PhaseShift,
    UniformAmplification,
    UniformTimeScale,
    DynamicAmplification,
    DynamicTimeScale,
}

/// One distortion together with its parameter.
#[derive(Debug, Clone)]
pub enum DistortionSpec {
    /// `G(t) = F(t) + k`
    AmplitudeShift(f64),
    /// `G(t) = F(t + k)`
    PhaseShift(f64),
    /// `G(t) = k·F(t)`, `k ≠ 0`
    UniformAmplification(f64),
    /// `g_i = f_{⌈k·i⌉}` on the 1-based grid, `k > 0`
    UniformTimeScale(f64),
    /// `G(t) = h(t)·F(t)`, `h(t) ≠ 0`
    DynamicAmplification(Profile),
    /// `G(t) = F(h(t))`, `h` positive and strictly increasing
    DynamicTimeScale(Profile),
}

impl DistortionSpec {
    pub fn kind(&self) -> DistortionKind {
        match self {
            Self::AmplitudeShift(_) => DistortionKind::AmplitudeShift,
            Self::PhaseShift(_) => DistortionKind::PhaseShift,
            Self::UniformAmplification(_) => DistortionKind::UniformAmplification,
            Self::UniformTimeScale(_) => DistortionKind::UniformTimeScale,
            Self::DynamicAmplification(_) => DistortionKind::DynamicAmplification,
            Self::DynamicTimeScale(_) => DistortionKind::DynamicTimeScale,
        }
    }

    /// Checks the parameter constraints; profile constraints are checked on
    /// the `len` output grid points.
    pub fn validate(&self, len: usize) -> Result<()> {
        let finite = |k: f64| {
            if k.is_finite() {
                Ok(())
            } else {
                Err(invalid("distortion parameter must be finite"))
            }
        };
        match self {
            Self::AmplitudeShift(k) | Self::PhaseShift(k) => finite(*k),
            Self::UniformAmplification(k) => {
                finite(*k)?;
                if *k == 0.0 {
                    return Err(invalid("uniform amplification factor must be non-zero"));
                }
                Ok(())
            }
            Self::UniformTimeScale(k) => {
                finite(*k)?;
                if !(*k > 0.0) {
                    return Err(invalid("uniform time scale factor must be positive"));
                }
                Ok(())
            }
            Self::DynamicAmplification(h) => {
                if (0..len).any(|t| {
                    let v = h.eval(t as f64);
                    v == 0.0 || !v.is_finite()
                }) {
                    return Err(invalid("dynamic amplification profile must be non-zero"));
                }
                Ok(())
            }
            Self::DynamicTimeScale(h) => {
                let times: Vec<f64> = (0..len).map(|t| h.eval(t as f64)).collect();
                if times.iter().any(|t| !(*t >= 0.0) || !t.is_finite())
                    || times.windows(2).any(|w| !(w[1] > w[0]))
                {
                    return Err(invalid("time map must be non-negative and strictly increasing"));
                }
                Ok(())
            }
        }
    }
}

/// Applies `spec` to `source` and samples `len` output points at `t = 0..len`.
pub fn apply<M: Mother + ?Sized>(source: &M, spec: &DistortionSpec, len: usize) -> Result<Series> {
    spec.validate(len)?;
    let values = (0..len)
        .map(|i| {
            let t = i as f64;
            match spec {
                DistortionSpec::AmplitudeShift(k) => Ok(source.at(t)? + k),
                DistortionSpec::PhaseShift(k) => source.at(t + k),
                DistortionSpec::UniformAmplification(k) => Ok(k * source.at(t)?),
                DistortionSpec::UniformTimeScale(k) => {
                    // 1-based grid: output i+1 reads source index ⌈k·(i+1)⌉
                    let src = libm::ceil(k * (t + 1.0) - GRID_TOL) - 1.0;
                    source.at(src)
                }
                DistortionSpec::DynamicAmplification(h) => Ok(h.eval(t) * source.at(t)?),
                DistortionSpec::DynamicTimeScale(h) => source.at(h.eval(t)),
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    Series::new(values)
}

/// Distorts a whole series in place of its own grid (same output length).
pub fn apply_series(series: &Series, spec: &DistortionSpec) -> Result<Series> {
    apply(series, spec, series.len())
}

/// `true` iff `loss(Y, H(Y)) < delta` for every mother in the corpus, where
/// `Y` is the first `len` samples of the mother and `H(Y)` its distortion.
pub fn invariance_holds<M: Mother>(
    loss: &dyn ForecastLoss,
    spec: &DistortionSpec,
    corpus: &[M],
    len: usize,
    delta: f64,
) -> Result<bool> {
    if !(delta > 0.0) {
        return Err(invalid("invariance tolerance must be positive"));
    }
    if corpus.is_empty() {
        return Err(Error::EmptyDataset);
    }
    for mother in corpus {
        let original = (0..len)
            .map(|t| mother.at(t as f64))
            .collect::<Result<Vec<f64>>>()?;
        let pair = ForecastPair::new(Series::new(original)?, apply(mother, spec, len)?)?;
        if !(loss.evaluate(&pair)?.value < delta) {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::{ashift_loss, mse, LossValueGrad};
    use alloc::vec;
    use core::f64::consts::PI;

    fn s(v: &[f64]) -> Series {
        Series::from_slice(v).unwrap()
    }

    #[test]
    fn definitional_examples() {
        let f = s(&[1.0, 2.0, 3.0]);
        assert_eq!(
            apply_series(&f, &DistortionSpec::AmplitudeShift(2.0)).unwrap().as_slice(),
            &[3.0, 4.0, 5.0]
        );
        assert_eq!(
            apply_series(&f, &DistortionSpec::UniformAmplification(-1.0)).unwrap().as_slice(),
            &[-1.0, -2.0, -3.0]
        );
    }

    #[test]
    fn quarter_period_shift_of_sine_is_cosine() {
        let n = 64;
        let sine = Analytic(|t: f64| libm::sin(2.0 * PI * t / n as f64));
        let shifted = apply(&sine, &DistortionSpec::PhaseShift(16.0), n).unwrap();
        for (t, v) in shifted.iter().enumerate() {
            assert!((v - libm::cos(2.0 * PI * t as f64 / n as f64)).abs() < 1e-12);
        }
    }

    #[test]
    fn identities() {
        let f = s(&[0.5, -1.0, 2.0, 4.0, 3.0]);
        for spec in [
            DistortionSpec::AmplitudeShift(0.0),
            DistortionSpec::PhaseShift(0.0),
            DistortionSpec::UniformAmplification(1.0),
            DistortionSpec::UniformTimeScale(1.0),
            DistortionSpec::DynamicTimeScale(Profile::identity()),
            DistortionSpec::DynamicAmplification(Profile::new(|_| 1.0)),
        ] {
            assert_eq!(apply_series(&f, &spec).unwrap(), f, "{:?}", spec.kind());
        }
    }

    #[test]
    fn uniform_time_scale_uses_ceiling_index_map() {
        let f = s(&[0.0, 10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0]);
        // k = 2: output i (1-based) reads source 2i
        let out = apply(&f, &DistortionSpec::UniformTimeScale(2.0), 4).unwrap();
        assert_eq!(out.as_slice(), &[10.0, 30.0, 50.0, 70.0]);
        // k = 0.5: ⌈i/2⌉ repeats every sample twice
        let out = apply(&f, &DistortionSpec::UniformTimeScale(0.5), 4).unwrap();
        assert_eq!(out.as_slice(), &[0.0, 0.0, 10.0, 10.0]);
        assert_eq!(
            apply(&f, &DistortionSpec::UniformTimeScale(2.0), 5),
            Err(Error::InsufficientSupport { time: 9.0 })
        );
    }

    #[test]
    fn invalid_parameters() {
        let f = s(&[1.0, 2.0, 3.0]);
        assert!(apply_series(&f, &DistortionSpec::UniformAmplification(0.0)).is_err());
        assert!(apply_series(&f, &DistortionSpec::UniformTimeScale(-1.0)).is_err());
        assert!(apply_series(&f, &DistortionSpec::DynamicAmplification(Profile::new(|t| t - 1.0))).is_err());
        assert!(apply_series(&f, &DistortionSpec::DynamicTimeScale(Profile::new(|t| 2.0 - t))).is_err());
        assert!(matches!(
            apply_series(&f, &DistortionSpec::PhaseShift(1.0)),
            Err(Error::InsufficientSupport { .. })
        ));
    }

    #[test]
    fn periodic_mother_wraps() {
        let base = [1.0, 2.0, 3.0, 4.0];
        let out = apply(&Periodic(&base), &DistortionSpec::PhaseShift(-1.0), 4).unwrap();
        assert_eq!(out.as_slice(), &[4.0, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn invariance_examples() {
        let corpus = vec![s(&[0.0, 1.0, 0.5, -2.0]), s(&[3.0, 3.5, 1.0, 0.0])];
        let mse_loss = |p: &ForecastPair| -> Result<LossValueGrad> { Ok(mse(p)) };
        let shift = DistortionSpec::AmplitudeShift(1.0);
        assert!(!invariance_holds(&mse_loss, &shift, &corpus, 4, 0.5).unwrap());
        assert!(invariance_holds(&ashift_loss, &DistortionSpec::AmplitudeShift(7.5), &corpus, 4, 1e-6).unwrap());
        assert!(invariance_holds(&ashift_loss, &shift, &corpus, 4, 0.0).is_err());
    }
}
