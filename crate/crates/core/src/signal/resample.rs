//! Kaiser-windowed sinc interpolation for fractional delays and rate changes.

use std::sync::OnceLock;

use num_complex::Complex64;

use super::{bessel_i0, sinc, BasebandSignal};
use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Polyphase Kaiser-sinc interpolator.
///
/// The kernel spans `2 * half_width` input samples. Fractional offsets are
/// served from a table of `phases + 1` rows with linear blending between
/// adjacent rows, so evaluation costs one dot product per output sample.
#[derive(Debug, Clone)]
pub struct KaiserSinc {
    half_width: usize,
    phases: usize,
    table: Vec<f64>,
}

impl KaiserSinc {
    pub const DEFAULT_HALF_WIDTH: usize = 8;
    pub const DEFAULT_PHASES: usize = 4096;
    pub const DEFAULT_BETA: f64 = 8.0;

    pub fn new(half_width: usize, phases: usize, beta: f64) -> Self {
        assert!(half_width >= 1 && phases >= 1);
        let width = 2 * half_width;
        let norm = bessel_i0(beta);
        let mut table = vec![0.0; (phases + 1) * width];
        for p in 0..=phases {
            let frac = p as f64 / phases as f64;
            let row = &mut table[p * width..(p + 1) * width];
            // Tap i sits at input offset (i + 1 - half_width) from floor(pos).
            for (i, w) in row.iter_mut().enumerate() {
                let d = (i as f64 + 1.0 - half_width as f64) - frac;
                let r = d / half_width as f64;
                let win = if r.abs() >= 1.0 {
                    0.0
                } else {
                    bessel_i0(beta * (1.0 - r * r).sqrt()) / norm
                };
                *w = sinc(d) * win;
            }
            let sum: f64 = row.iter().sum();
            row.iter_mut().for_each(|w| *w /= sum);
        }
        Self {
            half_width,
            phases,
            table,
        }
    }

    /// Shared instance with the default 16-tap kernel.
    pub fn shared() -> &'static Self {
        static KERNEL: OnceLock<KaiserSinc> = OnceLock::new();
        KERNEL.get_or_init(|| Self::new(Self::DEFAULT_HALF_WIDTH, Self::DEFAULT_PHASES, Self::DEFAULT_BETA))
    }

    pub fn taps(&self) -> usize {
        2 * self.half_width
    }

    /// Band-limited value of `x` at fractional index `pos`; samples
    /// outside the buffer are treated as zero.
    pub fn value_at(&self, x: &[Complex64], pos: f64) -> Complex64 {
        let base = pos.floor();
        let frac = pos - base;
        let base = base as i64;
        if frac == 0.0 {
            return if base >= 0 && (base as usize) < x.len() {
                x[base as usize]
            } else {
                ZERO
            };
        }
        let hw = self.half_width as i64;
        let first = base + 1 - hw;
        let last = base + hw;
        if last < 0 || first >= x.len() as i64 {
            return ZERO;
        }
        let width = self.taps();
        let scaled = frac * self.phases as f64;
        let p = (scaled as usize).min(self.phases - 1);
        let blend = scaled - p as f64;
        let lo = &self.table[p * width..(p + 1) * width];
        let hi = &self.table[(p + 1) * width..(p + 2) * width];
        let mut acc = ZERO;
        if first >= 0 && last < x.len() as i64 {
            let seg = &x[first as usize..=last as usize];
            for ((s, a), b) in seg.iter().zip(lo).zip(hi) {
                acc += s * (a + blend * (b - a));
            }
        } else {
            for i in 0..width {
                let j = first + i as i64;
                if j >= 0 && (j as usize) < x.len() {
                    acc += x[j as usize] * (lo[i] + blend * (hi[i] - lo[i]));
                }
            }
        }
        acc
    }
}

/// Resamples so that `output[m] = x(m * factor)`.
///
/// A tone at frequency f becomes a tone at `f * factor` and the duration
/// shrinks by `factor`. Output length is `floor((N - 1) / factor) + 1`.
pub fn resample(x: &BasebandSignal, factor: f64) -> Result<BasebandSignal> {
    if !(factor > 0.9 && factor < 1.1) {
        return Err(Error::ResampleFactor(factor));
    }
    if x.is_empty() {
        return Ok(x.clone());
    }
    let n = x.len();
    let out_len = ((n - 1) as f64 / factor).floor() as usize + 1;
    let kernel = KaiserSinc::shared();
    let out = if factor == 1.0 {
        x.samples().to_vec()
    } else {
        (0..out_len)
            .map(|m| kernel.value_at(x.samples(), m as f64 * factor))
            .collect()
    };
    Ok(BasebandSignal::from_parts(out, x.sample_rate()))
}
