//! Cached FFT plans and spectral helpers.

use std::cell::RefCell;

use num_complex::Complex64;
use rustfft::FftPlanner;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// In-place unnormalized forward DFT.
pub fn forward(buf: &mut [Complex64]) {
    if buf.is_empty() {
        return;
    }
    let plan = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(buf.len()));
    plan.process(buf);
}

/// In-place unnormalized inverse DFT (no 1/N factor).
pub fn inverse(buf: &mut [Complex64]) {
    if buf.is_empty() {
        return;
    }
    let plan = PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(buf.len()));
    plan.process(buf);
}

/// Spectrum of `x` zero-padded to `n` points.
pub fn spectrum(x: &[Complex64], n: usize) -> Vec<Complex64> {
    let mut buf = vec![Complex64::new(0.0, 0.0); n.max(x.len())];
    buf[..x.len()].copy_from_slice(x);
    forward(&mut buf);
    buf
}

/// Maps a signed frequency bin to an index of an `n`-point transform.
pub fn bin_index(k: i64, n: usize) -> usize {
    k.rem_euclid(n as i64) as usize
}

/// Mean power of `x` restricted to |f| <= `half_band` Hz, per sample.
///
/// Computed from the periodogram: the in-band component of a white
/// process of variance s² has per-sample power s² × (2·half_band / fs).
pub fn in_band_power(x: &[Complex64], sample_rate: f64, half_band: f64) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    let n = x.len();
    let spec = spectrum(x, n);
    let df = sample_rate / n as f64;
    let mut acc = 0.0;
    for (i, v) in spec.iter().enumerate() {
        let k = if i <= n / 2 { i as f64 } else { i as f64 - n as f64 };
        if (k * df).abs() <= half_band {
            acc += v.norm_sqr();
        }
    }
    acc / (n as f64 * n as f64)
}
