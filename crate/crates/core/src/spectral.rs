//! Fourier and correlation kernels.
//!
//! Forward transforms use the `e^{-2πikt/n}` sign convention and are
//! unnormalized; inverse transforms carry the `1/n` factor. Power-of-two
//! lengths take an iterative radix-2 path, every other length a direct sum
//! over an exact twiddle table (index `k·t mod n`).

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::ops::{Add, AddAssign, Mul, Sub};

use crate::error::{invalid, Error, Result};
use crate::series::Series;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Complex {
    pub re: f64,
    pub im: f64,
}

impl Complex {
    pub const ZERO: Complex = Complex { re: 0.0, im: 0.0 };

    pub const fn new(re: f64, im: f64) -> Self {
        Self { re, im }
    }

    /// `e^{iθ}`
    pub fn cis(theta: f64) -> Self {
        Self::new(libm::cos(theta), libm::sin(theta))
    }

    pub fn conj(self) -> Self {
        Self::new(self.re, -self.im)
    }

    pub fn norm(self) -> f64 {
        libm::hypot(self.re, self.im)
    }

    pub fn scale(self, s: f64) -> Self {
        Self::new(self.re * s, self.im * s)
    }
}

impl Add for Complex {
    type Output = Complex;
    fn add(self, o: Complex) -> Complex {
        Complex::new(self.re + o.re, self.im + o.im)
    }
}

impl AddAssign for Complex {
    fn add_assign(&mut self, o: Complex) {
        self.re += o.re;
        self.im += o.im;
    }
}

impl Sub for Complex {
    type Output = Complex;
    fn sub(self, o: Complex) -> Complex {
        Complex::new(self.re - o.re, self.im - o.im)
    }
}

impl Mul for Complex {
    type Output = Complex;
    fn mul(self, o: Complex) -> Complex {
        Complex::new(
            self.re * o.re - self.im * o.im,
            self.re * o.im + self.im * o.re,
        )
    }
}

fn twiddles(n: usize, inverse: bool) -> Vec<Complex> {
    let sign = if inverse { 1.0 } else { -1.0 };
    (0..n)
        .map(|m| Complex::cis(sign * 2.0 * PI * m as f64 / n as f64))
        .collect()
}

fn radix2_in_place(data: &mut [Complex], inverse: bool) {
    let n = data.len();
    let bits = n.trailing_zeros();
    if n <= 1 {
        return;
    }
    for i in 0..n {
        let j = i.reverse_bits() >> (usize::BITS - bits);
        if j > i {
            data.swap(i, j);
        }
    }
    let table = twiddles(n, inverse);
    let mut size = 2;
    while size <= n {
        let half = size / 2;
        let step = n / size;
        for start in (0..n).step_by(size) {
            for k in 0..half {
                let w = table[k * step];
                let a = data[start + k];
                let b = data[start + k + half] * w;
                data[start + k] = a + b;
                data[start + k + half] = a - b;
            }
        }
        size *= 2;
    }
}

fn direct(input: &[Complex], inverse: bool) -> Vec<Complex> {
    let n = input.len();
    let table = twiddles(n, inverse);
    (0..n)
        .map(|k| {
            let mut acc = Complex::ZERO;
            for (t, &x) in input.iter().enumerate() {
                acc += x * table[(k * t) % n];
            }
            acc
        })
        .collect()
}

fn transform(input: &[Complex], inverse: bool) -> Vec<Complex> {
    if input.len().is_power_of_two() {
        let mut data = input.to_vec();
        radix2_in_place(&mut data, inverse);
        data
    } else {
        direct(input, inverse)
    }
}

/// Unnormalized forward DFT of a complex sequence.
pub fn fft(input: &[Complex]) -> Vec<Complex> {
    transform(input, false)
}

/// Inverse DFT, including the `1/n` factor.
pub fn ifft(input: &[Complex]) -> Vec<Complex> {
    let scale = 1.0 / input.len() as f64;
    transform(input, true)
        .into_iter()
        .map(|c| c.scale(scale))
        .collect()
}

pub(crate) fn fft_real(values: &[f64]) -> Vec<Complex> {
    let data: Vec<Complex> = values.iter().map(|&v| Complex::new(v, 0.0)).collect();
    fft(&data)
}

/// Fourier coefficients of a real series, one per bin `0..n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    coefficients: Vec<Complex>,
}

impl Spectrum {
    pub(crate) fn from_coefficients(coefficients: Vec<Complex>) -> Self {
        Self { coefficients }
    }

    pub fn coefficients(&self) -> &[Complex] {
        &self.coefficients
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.coefficients.iter().map(|c| c.norm()).collect()
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }
}

pub fn dft(series: &Series) -> Spectrum {
    Spectrum {
        coefficients: fft_real(series),
    }
}

/// Bins selected as dominant, sorted ascending, conjugate partners included.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DominantSet {
    indices: Vec<usize>,
    count: usize,
    len: usize,
}

impl DominantSet {
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// Number of bins requested before conjugate partners were added.
    pub fn count(&self) -> usize {
        self.count
    }

    pub fn contains(&self, bin: usize) -> bool {
        self.indices.binary_search(&bin).is_ok()
    }

    /// Membership mask over all `len` bins.
    pub fn mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.len];
        for &i in &self.indices {
            mask[i] = true;
        }
        mask
    }
}

/// The `count` largest-magnitude bins (ties to the lower index) plus their
/// conjugate partners `n - k`.
pub fn dominant_frequencies(spectrum: &Spectrum, count: usize) -> Result<DominantSet> {
    let n = spectrum.len();
    if count == 0 || count > n {
        return Err(invalid("dominant count must lie in 1..=len"));
    }
    let mags = spectrum.magnitudes();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| mags[b].total_cmp(&mags[a]).then(a.cmp(&b)));
    let mut indices: Vec<usize> = order[..count]
        .iter()
        .flat_map(|&k| [k, (n - k) % n])
        .collect();
    indices.sort_unstable();
    indices.dedup();
    Ok(DominantSet {
        indices,
        count,
        len: n,
    })
}

/// Default number of dominant bins for a horizon: `max(1, ⌈len/24⌉)`.
pub fn default_dominant_count(len: usize) -> usize {
    len.div_ceil(24).max(1)
}

/// How correlation sequences are normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NccNormalization {
    /// Divide by the product of the raw L2 norms.
    #[default]
    L2,
    /// Subtract each mean first, then divide by the centered norms.
    MeanCentered,
}

/// Circular cross-correlation `c[τ] = Σ_t a[t]·b[(t+τ) mod n]` via the
/// conjugate-multiply-inverse route.
pub fn circular_cross_correlation(a: &[f64], b: &[f64]) -> Vec<f64> {
    let fa = fft_real(a);
    let fb = fft_real(b);
    let prod: Vec<Complex> = fa.iter().zip(&fb).map(|(x, y)| x.conj() * *y).collect();
    ifft(&prod).into_iter().map(|c| c.re).collect()
}

/// Circular convolution `c[s] = Σ_τ g[τ]·a[(s-τ) mod n]`.
pub(crate) fn circular_convolution(g: &[f64], a: &[f64]) -> Vec<f64> {
    let fg = fft_real(g);
    let fa = fft_real(a);
    let prod: Vec<Complex> = fg.iter().zip(&fa).map(|(x, y)| *x * *y).collect();
    ifft(&prod).into_iter().map(|c| c.re).collect()
}

pub(crate) fn l2(values: &[f64]) -> f64 {
    libm::sqrt(values.iter().map(|v| v * v).sum())
}

pub(crate) fn centered(values: &[f64]) -> Vec<f64> {
    let m = crate::series::mean(values);
    values.iter().map(|v| v - m).collect()
}

/// Normalized circular cross-correlation over all lags.
///
/// When exactly one input has zero norm the correlation is defined as zero
/// at every lag; when both do, the result is [`Error::ZeroNorm`].
pub fn normalized_cross_correlation(a: &Series, b: &Series, mode: NccNormalization) -> Result<Vec<f64>> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            truth: a.len(),
            pred: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(Error::InsufficientLength {
            needed: 2,
            got: a.len(),
        });
    }
    let (a, b) = match mode {
        NccNormalization::L2 => (a.to_vec(), b.to_vec()),
        NccNormalization::MeanCentered => (centered(a), centered(b)),
    };
    let (na, nb) = (l2(&a), l2(&b));
    if na == 0.0 && nb == 0.0 {
        return Err(Error::ZeroNorm);
    }
    if na == 0.0 || nb == 0.0 {
        return Ok(vec![0.0; a.len()]);
    }
    let denom = na * nb;
    Ok(circular_cross_correlation(&a, &b)
        .into_iter()
        .map(|c| c / denom)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: Complex, re: f64, im: f64) -> bool {
        (a.re - re).abs() < 1e-12 && (a.im - im).abs() < 1e-12
    }

    #[test]
    fn constant_and_impulse() {
        let s = dft(&Series::new(vec![1.0; 4]).unwrap());
        assert!(close(s.coefficients()[0], 4.0, 0.0));
        assert!(s.coefficients()[1..].iter().all(|c| close(*c, 0.0, 0.0)));
        let s = dft(&Series::new(vec![1.0, 0.0, 0.0, 0.0]).unwrap());
        assert!(s.coefficients().iter().all(|c| close(*c, 1.0, 0.0)));
    }

    #[test]
    fn cosine_bin() {
        let s = dft(&Series::new(vec![1.0, 0.0, -1.0, 0.0]).unwrap());
        let c = s.coefficients();
        assert!(close(c[0], 0.0, 0.0));
        assert!(close(c[1], 2.0, 0.0));
        assert!(close(c[2], 0.0, 0.0));
        assert!(close(c[3], 2.0, 0.0));
    }

    #[test]
    fn inverse_round_trip_odd_length() {
        let data: Vec<Complex> = (0..7).map(|i| Complex::new(i as f64, -(i as f64) / 2.0)).collect();
        let back = ifft(&fft(&data));
        for (x, y) in data.iter().zip(&back) {
            assert!(close(*x, y.re, y.im));
        }
    }

    #[test]
    fn dominant_sets() {
        let n = 16;
        let sine = Series::new(
            (0..n)
                .map(|t| libm::sin(2.0 * PI * 3.0 * t as f64 / n as f64))
                .collect(),
        )
        .unwrap();
        let set = dominant_frequencies(&dft(&sine), 1).unwrap();
        assert_eq!(set.indices(), &[3, 13]);
        let constant = Series::new(vec![2.0; n]).unwrap();
        assert_eq!(dominant_frequencies(&dft(&constant), 1).unwrap().indices(), &[0]);
        assert!(dominant_frequencies(&dft(&constant), 0).is_err());
        assert!(dominant_frequencies(&dft(&constant), 17).is_err());
    }

    #[test]
    fn default_count() {
        assert_eq!(default_dominant_count(1), 1);
        assert_eq!(default_dominant_count(24), 1);
        assert_eq!(default_dominant_count(40), 2);
        assert_eq!(default_dominant_count(56), 3);
    }

    #[test]
    fn ncc_impulse_lag() {
        let a = Series::new(vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        let b = Series::new(vec![0.0, 1.0, 0.0, 0.0]).unwrap();
        let r = normalized_cross_correlation(&a, &b, NccNormalization::L2).unwrap();
        for (lag, v) in r.iter().enumerate() {
            let expected = if lag == 1 { 1.0 } else { 0.0 };
            assert!((v - expected).abs() < 1e-12, "lag {lag}: {v}");
        }
    }

    #[test]
    fn ncc_zero_norms() {
        let z = Series::new(vec![0.0; 4]).unwrap();
        let a = Series::new(vec![1.0, 2.0, 0.0, 0.0]).unwrap();
        assert_eq!(
            normalized_cross_correlation(&z, &z, NccNormalization::L2),
            Err(Error::ZeroNorm)
        );
        assert_eq!(
            normalized_cross_correlation(&a, &z, NccNormalization::L2).unwrap(),
            vec![0.0; 4]
        );
    }

    #[test]
    fn mean_centered_ignores_offsets() {
        let a = Series::new(vec![1.0, 3.0, 2.0, 5.0]).unwrap();
        let b = Series::new(a.iter().map(|v| v + 10.0).collect()).unwrap();
        let raa = normalized_cross_correlation(&a, &a, NccNormalization::MeanCentered).unwrap();
        let rab = normalized_cross_correlation(&a, &b, NccNormalization::MeanCentered).unwrap();
        for (x, y) in raa.iter().zip(&rab) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
