//! Passband/baseband conversion and the shared low-pass FIR.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::{bessel_i0, convolve_slices, sinc, BasebandSignal, PassbandSignal};
use crate::error::{Error, Result};

/// Real linear-phase Kaiser low-pass taps with unit DC gain.
pub fn lowpass_taps(cutoff_hz: f64, sample_rate: f64, taps: usize, beta: f64) -> Vec<Complex64> {
    assert!(taps % 2 == 1, "low-pass length must be odd");
    let fc = cutoff_hz / sample_rate;
    let mid = (taps / 2) as f64;
    let norm = bessel_i0(beta);
    let mut h: Vec<f64> = (0..taps)
        .map(|i| {
            let d = i as f64 - mid;
            let r = d / mid.max(1.0);
            let win = bessel_i0(beta * (1.0 - r * r).max(0.0).sqrt()) / norm;
            2.0 * fc * sinc(2.0 * fc * d) * win
        })
        .collect();
    let sum: f64 = h.iter().sum();
    h.iter_mut().for_each(|v| *v /= sum);
    h.into_iter().map(|v| Complex64::new(v, 0.0)).collect()
}

/// Zero-phase low-pass filter: output is time-aligned with the input.
#[derive(Debug, Clone)]
pub struct LowpassFilter {
    taps: Vec<Complex64>,
}

impl LowpassFilter {
    pub const DEFAULT_TAPS: usize = 255;
    pub const DEFAULT_BETA: f64 = 8.0;
    /// Cutoff as a multiple of the signal half-bandwidth.
    pub const CUTOFF_MARGIN: f64 = 1.15;

    pub fn new(cutoff_hz: f64, sample_rate: f64) -> Self {
        Self {
            taps: lowpass_taps(cutoff_hz, sample_rate, Self::DEFAULT_TAPS, Self::DEFAULT_BETA),
        }
    }

    /// Filter for a signal occupying `|f| <= half_bw`.
    pub fn for_band(half_bw: f64, sample_rate: f64) -> Self {
        Self::new(half_bw * Self::CUTOFF_MARGIN, sample_rate)
    }

    pub fn group_delay(&self) -> usize {
        self.taps.len() / 2
    }

    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        if x.is_empty() {
            return Vec::new();
        }
        let full = convolve_slices(x, &self.taps, super::DEFAULT_CONV_CROSSOVER);
        let d = self.group_delay();
        full[d..d + x.len()].to_vec()
    }
}

/// `Re{x(t) e^{j2π f_c t}}` sampled at the baseband rate.
pub fn to_passband(x: &BasebandSignal, f_c: f64) -> Result<PassbandSignal> {
    let fs = x.sample_rate();
    if !(f_c > 0.0) || f_c >= fs / 2.0 {
        return Err(Error::Nyquist {
            band_edge: f_c,
            nyquist: fs / 2.0,
        });
    }
    let w = 2.0 * PI * f_c / fs;
    let samples = x
        .samples()
        .iter()
        .enumerate()
        .map(|(n, v)| (v * Complex64::from_polar(1.0, w * n as f64)).re)
        .collect();
    Ok(PassbandSignal {
        samples,
        sample_rate: fs,
    })
}

/// Mixes down by `f_c` and removes the image with a low-pass matched to
/// a signal of half-bandwidth `half_bw`.
pub fn to_baseband(x: &PassbandSignal, f_c: f64, half_bw: f64) -> Result<BasebandSignal> {
    let fs = x.sample_rate;
    if !(fs > 0.0) {
        return Err(Error::InvalidSignal(format!("sample rate must be positive, got {fs}")));
    }
    if !(f_c > 0.0) || f_c + half_bw > fs / 2.0 {
        return Err(Error::Nyquist {
            band_edge: f_c + half_bw,
            nyquist: fs / 2.0,
        });
    }
    let w = 2.0 * PI * f_c / fs;
    let mixed: Vec<Complex64> = x
        .samples
        .iter()
        .enumerate()
        .map(|(n, v)| Complex64::from_polar(2.0 * v, -w * n as f64))
        .collect();
    let filtered = LowpassFilter::for_band(half_bw, fs).apply(&mixed);
    BasebandSignal::new(filtered, fs)
}
