//! Analytic gradients against central finite differences.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tildeq_core::gru::GruForecaster;
use tildeq_core::losses::{
    amp_loss, ashift_loss, dilate, mse, phase_loss, soft_dtw, tilde_q, DilateConfig, LossValueGrad, Norm,
    SpectralMode, TildeQConfig,
};
use tildeq_core::spectral::NccNormalization;
use tildeq_core::tape::Matrix;
use tildeq_core::{ForecastPair, Result};

const STEP: f64 = 1e-5;
const POINTS: usize = 100;

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn rel_err(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff: Vec<f64> = analytic.iter().zip(numeric).map(|(a, n)| a - n).collect();
    norm(&diff) / norm(numeric).max(norm(analytic)).max(1e-8)
}

fn finite_difference(f: &dyn Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            probe[i] = x[i] + STEP;
            let up = f(&probe);
            probe[i] = x[i] - STEP;
            let down = f(&probe);
            probe[i] = x[i];
            (up - down) / (2.0 * STEP)
        })
        .collect()
}

/// `true` when forward and backward one-sided differences agree, i.e. no
/// kink of an absolute value lies within a step of `x`.
fn smooth_at(f: &dyn Fn(&[f64]) -> f64, x: &[f64]) -> bool {
    let mut probe = x.to_vec();
    let centre = f(x);
    (0..x.len()).all(|i| {
        probe[i] = x[i] + STEP;
        let fwd = (f(&probe) - centre) / STEP;
        probe[i] = x[i] - STEP;
        let bwd = (centre - f(&probe)) / STEP;
        probe[i] = x[i];
        (fwd - bwd).abs() <= 1e-3 * fwd.abs().max(bwd.abs()).max(1.0)
    })
}

fn random_pair(rng: &mut ChaCha8Rng, len: usize) -> (Vec<f64>, Vec<f64>) {
    let truth = (0..len).map(|_| rng.random_range(-2.0..2.0)).collect();
    let pred = (0..len).map(|_| rng.random_range(-2.0..2.0)).collect();
    (truth, pred)
}

/// Worst relative error over `POINTS` random non-degenerate pairs at each
/// horizon. Panics if kinks turn up more than occasionally.
fn worst_error(loss: &dyn Fn(&ForecastPair) -> Result<LossValueGrad>, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for len in [8, 24] {
        let (mut accepted, mut rejected) = (0, 0);
        while accepted < POINTS {
            let (truth, pred) = random_pair(&mut rng, len);
            let value = |p: &[f64]| loss(&ForecastPair::from_slices(&truth, p).unwrap()).unwrap().value;
            if !smooth_at(&value, &pred) {
                rejected += 1;
                continue;
            }
            accepted += 1;
            let analytic = loss(&ForecastPair::from_slices(&truth, &pred).unwrap()).unwrap().grad;
            worst = worst.max(rel_err(&analytic, &finite_difference(&value, &pred)));
        }
        assert!(rejected <= POINTS / 20, "{rejected} degenerate points at length {len}");
    }
    worst
}

fn check(name: &str, loss: &dyn Fn(&ForecastPair) -> Result<LossValueGrad>) {
    let err = worst_error(loss, name.len() as u64);
    assert!(err < 1e-4, "{name}: worst relative error {err:e}");
}

#[test]
fn mse_gradient() {
    check("mse", &|p| Ok(mse(p)));
}

#[test]
fn ashift_gradient() {
    check("ashift", &ashift_loss);
}

#[test]
fn phase_gradients() {
    for norm in [Norm::L1, Norm::L2] {
        for mode in [SpectralMode::Magnitude, SpectralMode::Complex] {
            let cfg = TildeQConfig {
                norm,
                spectral_mode: mode,
                ..TildeQConfig::default()
            };
            check(&format!("phase {norm:?} {mode:?}"), &|p| phase_loss(p, &cfg));
        }
    }
}

#[test]
fn amp_gradients() {
    for norm in [Norm::L1, Norm::L2] {
        for ncc in [NccNormalization::L2, NccNormalization::MeanCentered] {
            let cfg = TildeQConfig {
                norm,
                ncc,
                ..TildeQConfig::default()
            };
            check(&format!("amp {norm:?} {ncc:?}"), &|p| amp_loss(p, &cfg));
        }
    }
}

#[test]
fn tilde_q_gradient() {
    let cfg = TildeQConfig {
        alpha: 0.6,
        gamma: 0.5,
        dominant_count: Some(2),
        ..TildeQConfig::default()
    };
    check("tilde_q", &|p| tilde_q(p, &cfg));
    check("tilde_q default", &|p| tilde_q(p, &TildeQConfig::default()));
}

#[test]
fn soft_dtw_and_dilate_gradients() {
    for smoothing in [1.0, 0.1, 0.01] {
        let cfg = DilateConfig { alpha: 0.5, smoothing };
        check(&format!("soft_dtw {smoothing}"), &|p| soft_dtw(p, &cfg));
        check(&format!("dilate {smoothing}"), &|p| dilate(p, &cfg));
    }
}

/// Loss `Σ w·ŷ` over a batch of two inputs, differentiated through the
/// whole encoder/decoder.
#[test]
fn whole_gru_gradient() {
    let (hidden, n, horizon) = (4, 5, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let inputs: Vec<Vec<f64>> = (0..2).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let refs: Vec<&[f64]> = inputs.iter().map(Vec::as_slice).collect();
    let weights: Vec<f64> = (0..2 * horizon).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut model = GruForecaster::new(hidden, 5).unwrap();
    // a non-zero head so every block receives gradient
    for (i, v) in model.params_mut()[8].as_mut_slice().iter_mut().enumerate() {
        *v = 0.3 + 0.1 * i as f64;
    }

    let objective = |m: &GruForecaster| -> f64 {
        let out = m.forecast_batch(&refs, horizon).unwrap();
        out.iter().flatten().zip(&weights).map(|(y, w)| y * w).sum()
    };
    let (_, grads) = model
        .backprop(&refs, horizon, |out| {
            Ok(((), Matrix::from_vec(out.rows(), out.cols(), weights.clone())))
        })
        .unwrap();

    let mut analytic = Vec::new();
    let mut numeric = Vec::new();
    for (block, grad) in grads.iter().enumerate() {
        for i in 0..grad.as_slice().len() {
            let original = model.params()[block].as_slice()[i];
            model.params_mut()[block].as_mut_slice()[i] = original + STEP;
            let up = objective(&model);
            model.params_mut()[block].as_mut_slice()[i] = original - STEP;
            let down = objective(&model);
            model.params_mut()[block].as_mut_slice()[i] = original;
            analytic.push(grad.as_slice()[i]);
            numeric.push((up - down) / (2.0 * STEP));
        }
    }
    assert_eq!(analytic.len(), model.parameter_count());
    let err = rel_err(&analytic, &numeric);
    assert!(err < 1e-3, "whole-model relative error {err:e}");
    for (a, n) in analytic.iter().zip(&numeric) {
        assert!((a - n).abs() <= 1e-3 * n.abs().max(1e-3), "{a} vs {n}");
    }
}

