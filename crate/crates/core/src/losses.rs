//! Training objectives with analytic gradients with respect to the prediction.
//!
//! Every loss returns a [`LossValueGrad`]. Absolute values and zero-magnitude
//! spectral bins use a subgradient of zero at the kink.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::series::ForecastPair;
use crate::spectral::{
    centered, circular_convolution, default_dominant_count, dominant_frequencies, fft_real, ifft,
    l2, Complex, NccNormalization, Spectrum,
};

/// Loss value and `∂loss/∂prediction`.
#[derive(Debug, Clone, PartialEq)]
pub struct LossValueGrad {
    pub value: f64,
    pub grad: Vec<f64>,
}

impl LossValueGrad {
    fn zero(len: usize) -> Self {
        Self {
            value: 0.0,
            grad: vec![0.0; len],
        }
    }

    fn add_scaled(&mut self, weight: f64, other: &LossValueGrad) {
        self.value += weight * other.value;
        for (g, o) in self.grad.iter_mut().zip(&other.grad) {
            *g += weight * o;
        }
    }
}

/// Anything that scores a forecast and differentiates the score.
pub trait ForecastLoss {
    fn evaluate(&self, pair: &ForecastPair) -> Result<LossValueGrad>;
}

impl<F> ForecastLoss for F
where
    F: Fn(&ForecastPair) -> Result<LossValueGrad>,
{
    fn evaluate(&self, pair: &ForecastPair) -> Result<LossValueGrad> {
        self(pair)
    }
}

/// Norm used by the phase and amplification terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Norm {
    #[default]
    L1,
    L2,
}

impl Norm {
    /// Norm of `v` and its gradient (zero at kinks).
    fn value_grad(self, v: &[f64]) -> (f64, Vec<f64>) {
        match self {
            Norm::L1 => (
                v.iter().map(|x| libm::fabs(*x)).sum(),
                v.iter().map(|&x| sign(x)).collect(),
            ),
            Norm::L2 => {
                let n = l2(v);
                let g = if n > 0.0 {
                    v.iter().map(|x| x / n).collect()
                } else {
                    vec![0.0; v.len()]
                };
                (n, g)
            }
        }
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// How dominant bins of truth and prediction are compared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SpectralMode {
    /// `| |F(Y)_k| - |F(Ŷ)_k| |`, invariant to circular phase shifts.
    #[default]
    Magnitude,
    /// `|F(Y)_k - F(Ŷ)_k|`, the complex difference.
    Complex,
}

/// Weights and options of the TILDE-Q objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TildeQConfig {
    /// Weight of the amplitude-shift term; `1 - alpha` weighs the phase term.
    pub alpha: f64,
    /// Weight of the amplification term.
    pub gamma: f64,
    /// Dominant bin count; `None` means `max(1, ⌈T'/24⌉)`.
    pub dominant_count: Option<usize>,
    pub norm: Norm,
    pub spectral_mode: SpectralMode,
    pub ncc: NccNormalization,
}

impl Default for TildeQConfig {
    fn default() -> Self {
        Self {
            alpha: 0.99,
            gamma: 0.5,
            dominant_count: None,
            norm: Norm::L1,
            spectral_mode: SpectralMode::Magnitude,
            ncc: NccNormalization::L2,
        }
    }
}

impl TildeQConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(invalid("TILDE-Q alpha must lie in [0, 1]"));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(invalid("TILDE-Q gamma must be a finite non-negative number"));
        }
        if self.dominant_count == Some(0) {
            return Err(invalid("dominant count must be positive"));
        }
        Ok(())
    }

    pub fn dominant_count_for(&self, len: usize) -> usize {
        self.dominant_count.unwrap_or_else(|| default_dominant_count(len))
    }
}

/// Shape/temporal blend and soft-min temperature of DILATE.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DilateConfig {
    pub alpha: f64,
    pub smoothing: f64,
}

impl Default for DilateConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            smoothing: 0.01,
        }
    }
}

impl DilateConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(invalid("DILATE alpha must lie in [0, 1]"));
        }
        if !(self.smoothing > 0.0 && self.smoothing.is_finite()) {
            return Err(invalid("DILATE smoothing must be positive"));
        }
        Ok(())
    }
}

/// Per-step signed distance `d_i = ŷ_i - y_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedGap {
    pub d: Vec<f64>,
}

impl SignedGap {
    pub fn of(pair: &ForecastPair) -> Self {
        Self {
            d: pair
                .pred()
                .iter()
                .zip(pair.truth().iter())
                .map(|(p, y)| p - y)
                .collect(),
        }
    }
}

pub fn mse(pair: &ForecastPair) -> LossValueGrad {
    let gap = SignedGap::of(pair);
    let t = gap.d.len() as f64;
    LossValueGrad {
        value: gap.d.iter().map(|d| d * d).sum::<f64>() / t,
        grad: gap.d.iter().map(|d| 2.0 * d / t).collect(),
    }
}

fn require_len(pair: &ForecastPair, needed: usize) -> Result<()> {
    if pair.len() < needed {
        return Err(Error::InsufficientLength {
            needed,
            got: pair.len(),
        });
    }
    Ok(())
}

fn softmax(d: &[f64]) -> Vec<f64> {
    let max = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = d.iter().map(|x| libm::exp(x - max)).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Amplitude-shift loss `T'·Σ|1/T' - softmax(d)_i|`; zero exactly when the
/// gap is the same at every step.
pub fn ashift_loss(pair: &ForecastPair) -> Result<LossValueGrad> {
    require_len(pair, 2)?;
    let gap = SignedGap::of(pair);
    let t = gap.d.len() as f64;
    let s = softmax(&gap.d);
    let value = t * s.iter().map(|si| libm::fabs(1.0 / t - si)).sum::<f64>();
    // ∂value/∂s_i, then through the softmax Jacobian s_j(δ_ij - s_i)
    let u: Vec<f64> = s.iter().map(|si| t * sign(si - 1.0 / t)).collect();
    let weighted: f64 = u.iter().zip(&s).map(|(ui, si)| ui * si).sum();
    let grad = s
        .iter()
        .zip(&u)
        .map(|(sj, uj)| sj * (uj - weighted))
        .collect();
    Ok(LossValueGrad { value, grad })
}

/// Pulls a per-bin complex weight back to the time domain:
/// `grad_t = Re Σ_k w_k e^{2πikt/n}`.
fn spectral_adjoint(weights: &[Complex]) -> Vec<f64> {
    let n = weights.len() as f64;
    ifft(weights).into_iter().map(|c| c.re * n).collect()
}

fn unit(c: Complex) -> Complex {
    let m = c.norm();
    if m > 0.0 {
        c.scale(1.0 / m)
    } else {
        Complex::ZERO
    }
}

/// Fourier term: dominant bins of the truth are matched, every other bin
/// of the prediction is pushed toward zero.
pub fn phase_loss(pair: &ForecastPair, cfg: &TildeQConfig) -> Result<LossValueGrad> {
    require_len(pair, 2)?;
    let n = pair.len();
    let truth_spec = fft_real(pair.truth());
    let pred_spec = fft_real(pair.pred());
    let dominant = dominant_frequencies(
        &Spectrum::from_coefficients(truth_spec.clone()),
        cfg.dominant_count_for(n),
    )?;
    let mask = dominant.mask();

    let mut dom_idx = Vec::new();
    let mut dom_vals = Vec::new();
    let mut rest_idx = Vec::new();
    let mut rest_vals = Vec::new();
    for k in 0..n {
        if mask[k] {
            dom_idx.push(k);
            dom_vals.push(match cfg.spectral_mode {
                SpectralMode::Magnitude => truth_spec[k].norm() - pred_spec[k].norm(),
                SpectralMode::Complex => (truth_spec[k] - pred_spec[k]).norm(),
            });
        } else {
            rest_idx.push(k);
            rest_vals.push(pred_spec[k].norm());
        }
    }
    let (dom_norm, dom_grad) = cfg.norm.value_grad(&dom_vals);
    let (rest_norm, rest_grad) = cfg.norm.value_grad(&rest_vals);

    let mut weights = vec![Complex::ZERO; n];
    for (&k, g) in dom_idx.iter().zip(&dom_grad) {
        weights[k] = match cfg.spectral_mode {
            SpectralMode::Magnitude => unit(pred_spec[k]).scale(-g),
            SpectralMode::Complex => unit(truth_spec[k] - pred_spec[k]).scale(-g),
        };
    }
    for (&k, g) in rest_idx.iter().zip(&rest_grad) {
        weights[k] = unit(pred_spec[k]).scale(*g);
    }
    Ok(LossValueGrad {
        value: dom_norm + rest_norm,
        grad: spectral_adjoint(&weights),
    })
}

/// Amplification term `‖R(Y,Y) - R(Y,Ŷ)‖_p` over all circular lags.
pub fn amp_loss(pair: &ForecastPair, cfg: &TildeQConfig) -> Result<LossValueGrad> {
    require_len(pair, 2)?;
    let n = pair.len();
    let (y, p) = match cfg.ncc {
        NccNormalization::L2 => (pair.truth().to_vec(), pair.pred().to_vec()),
        NccNormalization::MeanCentered => (centered(pair.truth()), centered(pair.pred())),
    };
    let ny = l2(&y);
    if ny == 0.0 {
        return Err(Error::ZeroNorm);
    }
    let auto: Vec<f64> = crate::spectral::circular_cross_correlation(&y, &y)
        .into_iter()
        .map(|c| c / (ny * ny))
        .collect();
    let np = l2(&p);
    if np == 0.0 {
        let (value, _) = cfg.norm.value_grad(&auto);
        return Ok(LossValueGrad {
            value,
            grad: vec![0.0; n],
        });
    }
    let cross: Vec<f64> = crate::spectral::circular_cross_correlation(&y, &p)
        .into_iter()
        .map(|c| c / (ny * np))
        .collect();
    let diff: Vec<f64> = auto.iter().zip(&cross).map(|(a, r)| a - r).collect();
    let (value, dn) = cfg.norm.value_grad(&diff);
    // ∂value/∂R = -∂‖·‖
    let g: Vec<f64> = dn.iter().map(|x| -x).collect();
    let along: f64 = g.iter().zip(&cross).map(|(gi, ri)| gi * ri).sum();
    let conv = circular_convolution(&g, &y);
    let mut grad: Vec<f64> = conv
        .iter()
        .zip(&p)
        .map(|(c, ps)| c / (ny * np) - ps * along / (np * np))
        .collect();
    if cfg.ncc == NccNormalization::MeanCentered {
        grad = centered(&grad);
    }
    Ok(LossValueGrad { value, grad })
}

/// `α·ashift + (1-α)·phase + γ·amp`; zero-weighted terms are not evaluated.
pub fn tilde_q(pair: &ForecastPair, cfg: &TildeQConfig) -> Result<LossValueGrad> {
    cfg.validate()?;
    let mut out = LossValueGrad::zero(pair.len());
    if cfg.alpha > 0.0 {
        out.add_scaled(cfg.alpha, &ashift_loss(pair)?);
    }
    if cfg.alpha < 1.0 {
        out.add_scaled(1.0 - cfg.alpha, &phase_loss(pair, cfg)?);
    }
    if cfg.gamma > 0.0 {
        out.add_scaled(cfg.gamma, &amp_loss(pair, cfg)?);
    }
    Ok(out)
}

/// Soft-min DP over all monotone alignments of the blended cost
/// `α·(y_i - ŷ_j)² + (1-α)·(i-j)²/T'²`. Returns the value and the expected
/// alignment matrix (row-major, `n × m`).
fn soft_alignment(truth: &[f64], pred: &[f64], alpha: f64, gamma: f64) -> (f64, Vec<f64>) {
    let n = truth.len();
    let m = pred.len();
    let horizon = n as f64;
    let cost = |i: usize, j: usize| {
        let d = truth[i] - pred[j];
        let off = i as f64 - j as f64;
        alpha * d * d + (1.0 - alpha) * off * off / (horizon * horizon)
    };

    let w = m + 2;
    let mut r = vec![f64::INFINITY; (n + 2) * w];
    let mut c = vec![0.0; (n + 2) * w];
    r[0] = 0.0;
    for i in 1..=n {
        for j in 1..=m {
            let local = cost(i - 1, j - 1);
            c[i * w + j] = local;
            let (a, b, d) = (r[(i - 1) * w + j - 1], r[(i - 1) * w + j], r[i * w + j - 1]);
            let lo = a.min(b).min(d);
            let sum = libm::exp(-(a - lo) / gamma) + libm::exp(-(b - lo) / gamma) + libm::exp(-(d - lo) / gamma);
            r[i * w + j] = local + lo - gamma * libm::log(sum);
        }
    }
    let value = r[n * w + m];

    for i in 1..=n {
        r[i * w + m + 1] = f64::NEG_INFINITY;
    }
    for j in 1..=m {
        r[(n + 1) * w + j] = f64::NEG_INFINITY;
    }
    r[(n + 1) * w + m + 1] = value;
    let mut e = vec![0.0; (n + 2) * w];
    e[(n + 1) * w + m + 1] = 1.0;
    for j in (1..=m).rev() {
        for i in (1..=n).rev() {
            let here = r[i * w + j];
            let a = libm::exp((r[(i + 1) * w + j] - here - c[(i + 1) * w + j]) / gamma);
            let b = libm::exp((r[i * w + j + 1] - here - c[i * w + j + 1]) / gamma);
            let d = libm::exp((r[(i + 1) * w + j + 1] - here - c[(i + 1) * w + j + 1]) / gamma);
            e[i * w + j] = e[(i + 1) * w + j] * a + e[i * w + j + 1] * b + e[(i + 1) * w + j + 1] * d;
        }
    }
    let mut expected = vec![0.0; n * m];
    for i in 0..n {
        expected[i * m..(i + 1) * m].copy_from_slice(&e[(i + 1) * w + 1..(i + 1) * w + 1 + m]);
    }
    (value, expected)
}

fn blended_soft_dtw(pair: &ForecastPair, alpha: f64, gamma: f64) -> LossValueGrad {
    let (y, p) = (pair.truth(), pair.pred());
    let (value, expected) = soft_alignment(y, p, alpha, gamma);
    let m = p.len();
    let grad = (0..m)
        .map(|j| {
            (0..y.len())
                .map(|i| expected[i * m + j] * 2.0 * alpha * (p[j] - y[i]))
                .sum()
        })
        .collect();
    LossValueGrad { value, grad }
}

/// Soft-DTW on squared differences; only `cfg.smoothing` is used.
pub fn soft_dtw(pair: &ForecastPair, cfg: &DilateConfig) -> Result<LossValueGrad> {
    if !(cfg.smoothing > 0.0 && cfg.smoothing.is_finite()) {
        return Err(invalid("soft-DTW smoothing must be positive"));
    }
    Ok(blended_soft_dtw(pair, 1.0, cfg.smoothing))
}

/// DILATE: soft-DTW over the shape cost blended with the squared
/// diagonal-deviation penalty.
pub fn dilate(pair: &ForecastPair, cfg: &DilateConfig) -> Result<LossValueGrad> {
    cfg.validate()?;
    Ok(blended_soft_dtw(pair, cfg.alpha, cfg.smoothing))
}

/// The objectives selectable for training.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Loss {
    Mse,
    SoftDtw(DilateConfig),
    Dilate(DilateConfig),
    TildeQ(TildeQConfig),
    AshiftOnly,
    PhaseOnly(TildeQConfig),
    AmpOnly(TildeQConfig),
}

impl Loss {
    pub fn name(&self) -> &'static str {
        match self {
            Loss::Mse => "mse",
            Loss::SoftDtw(_) => "soft_dtw",
            Loss::Dilate(_) => "dilate",
            Loss::TildeQ(_) => "tilde_q",
            Loss::AshiftOnly => "ashift_only",
            Loss::PhaseOnly(_) => "phase_only",
            Loss::AmpOnly(_) => "amp_only",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Loss::Mse | Loss::AshiftOnly => Ok(()),
            Loss::SoftDtw(cfg) | Loss::Dilate(cfg) => cfg.validate(),
            Loss::TildeQ(cfg) | Loss::PhaseOnly(cfg) | Loss::AmpOnly(cfg) => cfg.validate(),
        }
    }
}

impl ForecastLoss for Loss {
    fn evaluate(&self, pair: &ForecastPair) -> Result<LossValueGrad> {
        match self {
            Loss::Mse => Ok(mse(pair)),
            Loss::SoftDtw(cfg) => soft_dtw(pair, cfg),
            Loss::Dilate(cfg) => dilate(pair, cfg),
            Loss::TildeQ(cfg) => tilde_q(pair, cfg),
            Loss::AshiftOnly => ashift_loss(pair),
            Loss::PhaseOnly(cfg) => phase_loss(pair, cfg),
            Loss::AmpOnly(cfg) => amp_loss(pair, cfg),
        }
    }
}

/// Arithmetic mean of per-pair losses; gradients are scaled by `1/len`.
pub fn batch_mean(loss: &dyn ForecastLoss, pairs: &[ForecastPair]) -> Result<(f64, Vec<Vec<f64>>)> {
    if pairs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let scale = 1.0 / pairs.len() as f64;
    let mut total = 0.0;
    let mut grads = Vec::with_capacity(pairs.len());
    for pair in pairs {
        let lvg = loss.evaluate(pair)?;
        total += lvg.value;
        grads.push(lvg.grad.into_iter().map(|g| g * scale).collect());
    }
    Ok((total * scale, grads))
}
