//! Complex baseband signal algebra shared by every stage of the pipeline.

mod convert;
pub mod fft;
pub mod io;
mod resample;

use num_complex::Complex64;

use crate::error::{Error, Result};

pub use convert::{lowpass_taps, to_baseband, to_passband, LowpassFilter};
pub use resample::{resample, KaiserSinc};

/// Output length at which [`convolve`] switches from the direct sum to
/// the FFT path.
pub const DEFAULT_CONV_CROSSOVER: usize = 256;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Uniformly sampled complex baseband time series.
#[derive(Debug, Clone, PartialEq)]
pub struct BasebandSignal {
    samples: Vec<Complex64>,
    sample_rate: f64,
}

impl BasebandSignal {
    pub fn new(samples: Vec<Complex64>, sample_rate: f64) -> Result<Self> {
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(Error::InvalidSignal(format!(
                "sample rate must be positive, got {sample_rate}"
            )));
        }
        if let Some(i) = samples.iter().position(|s| !(s.re.is_finite() && s.im.is_finite())) {
            return Err(Error::InvalidSignal(format!("non-finite sample at index {i}")));
        }
        Ok(Self { samples, sample_rate })
    }

    /// Builds a signal the caller knows to be valid.
    pub(crate) fn from_parts(samples: Vec<Complex64>, sample_rate: f64) -> Self {
        debug_assert!(sample_rate > 0.0);
        Self { samples, sample_rate }
    }

    pub fn zeros(len: usize, sample_rate: f64) -> Self {
        Self::from_parts(vec![ZERO; len], sample_rate)
    }

    pub fn impulse(len: usize, sample_rate: f64) -> Self {
        let mut s = Self::zeros(len.max(1), sample_rate);
        s.samples[0] = Complex64::new(1.0, 0.0);
        s
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [Complex64] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    pub fn energy(&self) -> f64 {
        energy(&self.samples)
    }

    pub fn mean_power(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            self.energy() / self.len() as f64
        }
    }

    /// Copy of `[start, start + len)`, zero-filled where the window leaves the buffer.
    pub fn window(&self, start: i64, len: usize) -> Self {
        let mut out = vec![ZERO; len];
        for (i, o) in out.iter_mut().enumerate() {
            let j = start + i as i64;
            if j >= 0 && (j as usize) < self.samples.len() {
                *o = self.samples[j as usize];
            }
        }
        Self::from_parts(out, self.sample_rate)
    }

    pub fn scaled(&self, gain: Complex64) -> Self {
        Self::from_parts(self.samples.iter().map(|s| s * gain).collect(), self.sample_rate)
    }

    /// Zero-pads (or truncates) to exactly `len` samples.
    pub fn resized(mut self, len: usize) -> Self {
        self.samples.resize(len, ZERO);
        self
    }

    pub fn check_rate(&self, other: &Self) -> Result<()> {
        if self.sample_rate != other.sample_rate {
            return Err(Error::RateMismatch {
                left: self.sample_rate,
                right: other.sample_rate,
            });
        }
        Ok(())
    }
}

/// Real-valued sampled passband waveform.
#[derive(Debug, Clone, PartialEq)]
pub struct PassbandSignal {
    pub samples: Vec<f64>,
    pub sample_rate: f64,
}

pub fn energy(x: &[Complex64]) -> f64 {
    x.iter().map(|v| v.norm_sqr()).sum()
}

/// Root-mean-square difference of two equal-length sequences.
pub fn rms_error(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len());
    if a.is_empty() {
        return 0.0;
    }
    (a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>() / a.len() as f64).sqrt()
}

/// Full linear convolution by the direct double sum.
pub fn convolve_direct(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![ZERO; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        if *x == ZERO {
            continue;
        }
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Full linear convolution through a zero-padded power-of-two FFT.
pub fn convolve_fft(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let out_len = a.len() + b.len() - 1;
    let n = out_len.next_power_of_two();
    let mut fa = fft::spectrum(a, n);
    let fb = fft::spectrum(b, n);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x *= y;
    }
    fft::inverse(&mut fa);
    let scale = 1.0 / n as f64;
    fa.truncate(out_len);
    fa.iter_mut().for_each(|v| *v *= scale);
    fa
}

/// Full linear convolution, choosing the direct or FFT path by size.
pub fn convolve_slices(a: &[Complex64], b: &[Complex64], crossover: usize) -> Vec<Complex64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    if a.len() + b.len() - 1 <= crossover || a.len().min(b.len()) <= 16 {
        convolve_direct(a, b)
    } else {
        convolve_fft(a, b)
    }
}

pub fn convolve(a: &BasebandSignal, b: &BasebandSignal) -> Result<BasebandSignal> {
    a.check_rate(b)?;
    Ok(BasebandSignal::from_parts(
        convolve_slices(&a.samples, &b.samples, DEFAULT_CONV_CROSSOVER),
        a.sample_rate,
    ))
}

/// `out[n] = conj(x[N-1-n])`, the sampled form of x*(-t).
pub fn conj_time_reverse(x: &BasebandSignal) -> BasebandSignal {
    BasebandSignal::from_parts(conj_reverse(&x.samples), x.sample_rate)
}

pub fn conj_reverse(x: &[Complex64]) -> Vec<Complex64> {
    x.iter().rev().map(|v| v.conj()).collect()
}

/// Cross-correlation as `x * ref*(-t)`. Output index `n` holds lag
/// `n - (ref.len() - 1)`.
pub fn cross_correlate(x: &BasebandSignal, reference: &BasebandSignal) -> Result<BasebandSignal> {
    convolve(x, &conj_time_reverse(reference))
}

/// Index of the largest magnitude; ties resolve to the earliest index.
pub fn argmax_abs(x: &[Complex64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in x.iter().enumerate() {
        let m = v.norm_sqr();
        if best.is_none_or(|(_, b)| m > b) {
            best = Some((i, m));
        }
    }
    best.map(|(i, _)| i)
}

/// Modified Bessel function of the first kind, order zero.
pub(crate) fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let half = x / 2.0;
    for k in 1..200 {
        term *= (half / k as f64) * (half / k as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

pub(crate) fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}
