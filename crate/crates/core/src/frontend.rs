//! Receiver front end: frame detection, Doppler estimation from the CW
//! tone, resampling compensation and probe extraction.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::channel::MAX_DOPPLER;
use crate::error::{Error, Result};
use crate::signal::{cross_correlate, fft, BasebandSignal, KaiserSinc};
use crate::tx::{make_lfm, FrameLayout, OfdmConfig};

/// Correlation peak must exceed this multiple of the median magnitude.
pub const DETECTION_THRESHOLD: f64 = 8.0;
/// CW spectral peak must exceed this multiple of the median bin power.
pub const DOPPLER_RELIABILITY: f64 = 10.0;
const CW_ZERO_PAD: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyncResult {
    /// Buffer index of the first LFM sample along the strongest path.
    pub frame_start: usize,
    pub peak_value: f64,
    /// Peak over median correlation magnitude.
    pub detection_metric: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DopplerEstimate {
    pub a_hat: f64,
    /// Received CW frequency at passband.
    pub f_rx_hat: f64,
    /// Nominal transmitted CW frequency.
    pub f_tx: f64,
}

impl DopplerEstimate {
    pub fn from_frequency(f_rx_hat: f64, f_tx: f64) -> Self {
        Self {
            a_hat: f_rx_hat / f_tx - 1.0,
            f_rx_hat,
            f_tx,
        }
    }

    pub fn none(f_tx: f64) -> Self {
        Self::from_frequency(f_tx, f_tx)
    }
}

/// Doppler-corrected frame plus the index where the frame begins in it.
#[derive(Debug, Clone, PartialEq)]
pub struct CompensatedFrame {
    pub signal: BasebandSignal,
    /// Index of the frame's first sample; earlier samples are pre-roll.
    pub origin: usize,
}

impl CompensatedFrame {
    /// Window relative to the frame origin, zero-filled outside the buffer.
    pub fn window(&self, offset: i64, len: usize) -> BasebandSignal {
        self.signal.window(self.origin as i64 + offset, len)
    }
}

/// Received probe: the LFM plus its multipath tail.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeWindow {
    pub signal: BasebandSignal,
    /// Samples of precursor allowance before the synchronized LFM start.
    pub lead: usize,
}

/// Magnitude of the LFM matched-filter output, indexed by LFM start.
///
/// Entry `n` corresponds to an LFM starting at buffer index
/// `n - (lfm_len - 1)`.
pub fn correlation_magnitude(rx: &BasebandSignal, cfg: &OfdmConfig) -> Result<Vec<f64>> {
    let lfm = BasebandSignal::new(make_lfm(cfg).into_samples(), rx.sample_rate())?;
    if rx.sample_rate() != cfg.sample_rate {
        return Err(Error::RateMismatch {
            left: rx.sample_rate(),
            right: cfg.sample_rate,
        });
    }
    Ok(cross_correlate(rx, &lfm)?.samples().iter().map(|v| v.norm()).collect())
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    let mid = v.len() / 2;
    let (_, m, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
    *m
}

/// Locates the frame at the strongest arrival within one guard window
/// after the first threshold crossing.
pub fn synchronize(rx: &BasebandSignal, cfg: &OfdmConfig) -> Result<SyncResult> {
    let lfm_len = cfg.lfm_len();
    if rx.len() < lfm_len {
        return Err(Error::InvalidSignal(format!(
            "buffer of {} samples is shorter than the LFM",
            rx.len()
        )));
    }
    let mag = correlation_magnitude(rx, cfg)?;
    let floor = median(&mag);
    let (peak_idx, peak) = mag
        .iter()
        .copied()
        .enumerate()
        .fold((0, 0.0), |best, (i, m)| if m > best.1 { (i, m) } else { best });
    let threshold = DETECTION_THRESHOLD * floor;
    let no_frame = || Error::NoFrameDetected {
        metric: if floor > 0.0 { peak / floor } else { 0.0 },
        threshold: DETECTION_THRESHOLD,
    };
    if !(floor > 0.0) || peak <= threshold {
        return Err(no_frame());
    }
    let first = mag.iter().position(|m| *m > threshold).unwrap_or(peak_idx);
    let end = (first + cfg.guard_len().max(1)).min(mag.len());
    let (best, value) = mag[first..end]
        .iter()
        .copied()
        .enumerate()
        .fold((0, 0.0), |b, (i, m)| if m > b.1 { (i, m) } else { b });
    let idx = first + best;
    if idx + 1 < lfm_len {
        return Err(no_frame());
    }
    Ok(SyncResult {
        frame_start: idx + 1 - lfm_len,
        peak_value: value,
        detection_metric: value / floor,
    })
}

/// Hann-windowed, zero-padded power spectrum of the CW segment.
///
/// Only the stretch where every arrival within `l_max_samples` of the
/// probe window overlaps is used, so multipath onsets and tails do not
/// bias the peak. Returns `(baseband_frequency_hz, power)` pairs in FFT
/// bin order.
pub fn cw_spectrum(
    rx: &BasebandSignal,
    sync: &SyncResult,
    layout: &FrameLayout,
    cfg: &OfdmConfig,
    l_max_samples: usize,
) -> Vec<(f64, f64)> {
    let lead = probe_lead(l_max_samples);
    let trim = l_max_samples.min(layout.cw.len / 2);
    let start = sync.frame_start as i64 + (layout.cw.offset + trim) as i64 - lead.min(trim) as i64;
    let seg = rx.window(start, layout.cw.len - trim);
    let n = seg.len();
    let windowed: Vec<Complex64> = seg
        .samples()
        .iter()
        .enumerate()
        .map(|(i, v)| v * (0.5 - 0.5 * (2.0 * PI * i as f64 / (n - 1).max(1) as f64).cos()))
        .collect();
    let nfft = (CW_ZERO_PAD * n).next_power_of_two();
    let spec = fft::spectrum(&windowed, nfft);
    spec.iter()
        .enumerate()
        .map(|(k, v)| {
            let kk = if k > nfft / 2 { k as f64 - nfft as f64 } else { k as f64 };
            (kk * cfg.sample_rate / nfft as f64, v.norm_sqr())
        })
        .collect()
}

/// Measures the received CW frequency and converts it to a Doppler rate.
pub fn estimate_doppler(
    rx: &BasebandSignal,
    sync: &SyncResult,
    layout: &FrameLayout,
    cfg: &OfdmConfig,
    l_max_samples: usize,
) -> Result<DopplerEstimate> {
    let spec = cw_spectrum(rx, sync, layout, cfg, l_max_samples);
    let nfft = spec.len();
    let df = cfg.sample_rate / nfft as f64;
    let nominal = cfg.cw_freq - cfg.f_c;
    let reach = MAX_DOPPLER * cfg.cw_freq + 4.0 * df;
    let in_range = |f: f64| (f - nominal).abs() <= reach;
    let (k, peak) = spec
        .iter()
        .enumerate()
        .filter(|(_, (f, _))| in_range(*f))
        .fold((0, -1.0), |b, (k, (_, p))| if *p > b.1 { (k, *p) } else { b });
    let powers: Vec<f64> = spec.iter().map(|(_, p)| *p).collect();
    let floor = median(&powers);
    let ratio = if floor > 0.0 {
        peak / floor
    } else if peak > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    if !(ratio >= DOPPLER_RELIABILITY) {
        return Err(Error::DopplerUnreliable { ratio });
    }
    let at = |i: isize| powers[i.rem_euclid(nfft as isize) as usize].max(1e-300).ln();
    let (l, c, r) = (at(k as isize - 1), at(k as isize), at(k as isize + 1));
    let denom = l - 2.0 * c + r;
    let delta = if denom.abs() > 0.0 { 0.5 * (l - r) / denom } else { 0.0 };
    let f_bb = spec[k].0 + delta.clamp(-0.5, 0.5) * df;
    let est = DopplerEstimate::from_frequency(cfg.f_c + f_bb, cfg.cw_freq);
    if !(est.a_hat.abs() < MAX_DOPPLER) {
        return Err(Error::DopplerUnreliable { ratio });
    }
    Ok(est)
}

/// Removes a uniform Doppler rate: time-scales and derotates the buffer
/// from the synchronized start onward.
///
/// Output sample `m` reads input position
/// `frame_start + (m - origin) / (1 + a_hat)`. Up to one guard of
/// pre-roll is kept ahead of the frame so precursor arrivals survive.
pub fn compensate(
    rx: &BasebandSignal,
    sync: &SyncResult,
    doppler: &DopplerEstimate,
    cfg: &OfdmConfig,
) -> Result<CompensatedFrame> {
    let a = doppler.a_hat;
    let scale = 1.0 + a;
    if !(0.9 < 1.0 / scale && 1.0 / scale < 1.1) {
        return Err(Error::ResampleFactor(1.0 / scale));
    }
    let start = sync.frame_start;
    if start >= rx.len() {
        return Err(Error::WindowOutOfRange {
            start: start as i64,
            end: rx.len() as i64,
            len: rx.len(),
        });
    }
    let origin = cfg.guard_len().min((start as f64 * scale).floor() as usize);
    let remaining = (rx.len() - start) as f64;
    let out_len = origin + (remaining * scale).floor() as usize;
    let src = rx.samples();
    let samples: Vec<Complex64> = if a == 0.0 {
        src[start - origin..start - origin + out_len].to_vec()
    } else {
        let kernel = KaiserSinc::shared();
        let w = 2.0 * PI * cfg.f_c * a / cfg.sample_rate;
        (0..out_len)
            .map(|m| {
                let pos = start as f64 + (m as f64 - origin as f64) / scale;
                kernel.value_at(src, pos) * Complex64::from_polar(1.0, -w * pos)
            })
            .collect()
    };
    Ok(CompensatedFrame {
        signal: BasebandSignal::from_parts(samples, rx.sample_rate()),
        origin,
    })
}

/// Probe extension in samples for a declared spread: 25% margin.
pub fn probe_extension(delay_spread: f64) -> f64 {
    1.25 * delay_spread
}

/// Precursor allowance kept ahead of the synchronized LFM start.
pub fn probe_lead(l_max_samples: usize) -> usize {
    l_max_samples / 4
}

/// Cuts the LFM plus `l_max` seconds of multipath tail from the
/// compensated frame. The window opens `lead` samples early so arrivals
/// ahead of the strongest path are kept.
pub fn extract_probe(
    comp: &CompensatedFrame,
    layout: &FrameLayout,
    l_max: f64,
    cfg: &OfdmConfig,
) -> Result<ProbeWindow> {
    if !(l_max >= 0.0) || cfg.samples(l_max) > layout.guard1.len {
        return Err(Error::ProbeTooLong {
            l_max,
            guard: cfg.guard,
        });
    }
    let ext = cfg.samples(l_max);
    let lead = probe_lead(ext);
    let start = layout.lfm.offset as i64 - lead as i64;
    Ok(ProbeWindow {
        signal: comp.window(start, layout.lfm.len + ext),
        lead,
    })
}

/// Noise-only stretch of the second guard: after the CW's multipath tail
/// and before the earliest OFDM precursor. Offsets are frame-relative.
pub fn noise_window(layout: &FrameLayout, l_max_samples: usize) -> (i64, usize) {
    let lead = probe_lead(l_max_samples) as i64;
    let start = (layout.cw.end() + l_max_samples) as i64 - lead;
    let end = layout.ofdm_start() as i64 - lead;
    (start, (end - start).max(0) as usize)
}
