//! Distorted-corpus generation for the `distort` subcommand.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tildeq_core::distortions::{apply, Analytic, DistortionSpec, Mother, Profile};
use tildeq_core::Series;

use crate::error::{Error, Result};

pub const KINDS: [&str; 6] = [
    "amplitude_shift",
    "phase_shift",
    "uniform_amplification",
    "uniform_time_scale",
    "dynamic_amplification",
    "dynamic_time_scale",
];

/// Builds a distortion from its name and scalar parameter. The dynamic
/// kinds use a one-period sinusoidal profile over `len` samples:
/// `h(t) = 1 + k·sin(2πt/len)` for amplification and
/// `h(t) = t + k·len/(2π)·sin(2πt/len)` for time scaling, which stays
/// strictly increasing for `|k| < 1`.
pub fn spec_from_name(kind: &str, k: f64, len: usize) -> Result<DistortionSpec> {
    let w = 2.0 * PI / len.max(1) as f64;
    let spec = match kind {
        "amplitude_shift" => DistortionSpec::AmplitudeShift(k),
        "phase_shift" => DistortionSpec::PhaseShift(k),
        "uniform_amplification" => DistortionSpec::UniformAmplification(k),
        "uniform_time_scale" => DistortionSpec::UniformTimeScale(k),
        "dynamic_amplification" => DistortionSpec::DynamicAmplification(Profile::new(move |t| 1.0 + k * (w * t).sin())),
        "dynamic_time_scale" => DistortionSpec::DynamicTimeScale(Profile::new(move |t| t + k / w * (w * t).sin())),
        other => {
            return Err(Error::Config(format!(
                "unknown distortion {other:?}; expected one of {}",
                KINDS.join(", ")
            )))
        }
    };
    spec.validate(len)?;
    Ok(spec)
}

/// Random two-tone mothers `b + a₁sin(2πt/p₁+φ₁) + a₂sin(2πt/p₂+φ₂)`,
/// defined for every real `t`.
pub fn random_mothers(count: usize, seed: u64) -> Vec<Analytic<impl Fn(f64) -> f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let b: f64 = rng.random_range(-1.0..1.0);
            let (a1, a2): (f64, f64) = (rng.random_range(0.5..1.5), rng.random_range(0.0..0.5));
            let (p1, p2): (f64, f64) = (rng.random_range(16.0..64.0), rng.random_range(4.0..16.0));
            let (f1, f2): (f64, f64) = (rng.random_range(0.0..2.0 * PI), rng.random_range(0.0..2.0 * PI));
            Analytic(move |t: f64| b + a1 * (2.0 * PI * t / p1 + f1).sin() + a2 * (2.0 * PI * t / p2 + f2).sin())
        })
        .collect()
}

/// Originals and distortions of every mother, `len` samples each.
pub fn corpus<M: Mother>(mothers: &[M], spec: &DistortionSpec, len: usize) -> Result<Vec<(Series, Series)>> {
    mothers
        .iter()
        .map(|m| {
            let original = (0..len).map(|t| m.at(t as f64)).collect::<tildeq_core::Result<Vec<f64>>>()?;
            Ok((Series::new(original)?, apply(m, spec, len)?))
        })
        .collect()
}

/// Long-format CSV: `series,t,original,distorted`.
pub fn corpus_csv(pairs: &[(Series, Series)]) -> String {
    let mut out = String::from("series,t,original,distorted\n");
    for (s, (original, distorted)) in pairs.iter().enumerate() {
        for (t, (o, d)) in original.iter().zip(distorted.iter()).enumerate() {
            let _ = writeln!(out, "{s},{t},{o},{d}");
        }
    }
    out
}
