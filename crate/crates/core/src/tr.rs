//! Passive and virtual time-reversal preprocessing.
//!
//! Both variants convolve the received frame with a time-reversed copy of
//! the channel seen by the probe. The result is a compressed equivalent
//! channel, `tr_channel`, whose strongest tap is the focus. Demodulation
//! windows are then shifted by the focus position.

use crate::error::{Error, Result};
use crate::signal::{argmax_abs, conj_reverse, convolve_slices, BasebandSignal, DEFAULT_CONV_CROSSOVER};
use crate::tx::FrameLayout;

/// Taps at or above this fraction of the focus magnitude make the focus ambiguous.
pub const FOCUS_AMBIGUITY: f64 = 0.99;
/// Threshold for counting precursor taps, relative to the focus (−30 dB).
pub const PRECURSOR_LEVEL: f64 = 0.031_622_776_601_683_79;

#[derive(Debug, Clone, PartialEq)]
pub struct TrOutput {
    /// Received frame after time-reversal filtering.
    pub processed: BasebandSignal,
    /// Equivalent channel seen by the transmitted signal, unnormalized.
    pub tr_channel: BasebandSignal,
    pub focus_index: usize,
    /// Seconds of taps within −30 dB of the focus that precede it.
    pub precursor_span: f64,
    /// Offset between the processed timeline and the frame timeline once
    /// the focus is removed: content at frame position `u` lands at
    /// `u + focus_index - reference_lag`.
    pub reference_lag: usize,
    pub warnings: Vec<String>,
}

impl TrOutput {
    fn new(processed: BasebandSignal, tr_channel: BasebandSignal, reference_lag: usize) -> Self {
        let taps = tr_channel.samples();
        let focus_index = argmax_abs(taps).unwrap_or(0);
        let peak = taps.get(focus_index).map_or(0.0, |v| v.norm());
        let mut warnings = Vec::new();
        if peak > 0.0 {
            if let Some(rival) = taps
                .iter()
                .enumerate()
                .find(|(i, v)| *i != focus_index && v.norm() >= FOCUS_AMBIGUITY * peak)
            {
                warnings.push(format!(
                    "ambiguous focus: tap {} within 1% of tap {focus_index}",
                    rival.0
                ));
            }
        }
        // normalize to unit focus magnitude for the threshold only
        let first = taps
            .iter()
            .position(|v| peak > 0.0 && v.norm() / peak >= PRECURSOR_LEVEL)
            .unwrap_or(focus_index);
        let precursor_span = (focus_index - first.min(focus_index)) as f64 / tr_channel.sample_rate();
        Self {
            processed,
            tr_channel,
            focus_index,
            precursor_span,
            reference_lag,
            warnings,
        }
    }

    pub fn is_ambiguous(&self) -> bool {
        !self.warnings.is_empty()
    }

    /// Net shift from frame positions to processed positions.
    pub fn shift(&self) -> i64 {
        self.focus_index as i64 - self.reference_lag as i64
    }
}

/// Passive time reversal: `r * p_r*(−t) * p`.
///
/// `lead` is how many samples the received probe window opens ahead of the
/// synchronized LFM start. The reported channel is the received probe's
/// autocorrelation `p_r*(−t) * p_r`, which is what the processing applies
/// to the transmitted signal when the probe is noiseless.
pub fn ptrp(
    rx: &BasebandSignal,
    probe_rx: &BasebandSignal,
    probe_tx: &BasebandSignal,
    lead: usize,
) -> Result<TrOutput> {
    if probe_rx.is_empty() || probe_tx.is_empty() {
        return Err(Error::Empty("probe"));
    }
    rx.check_rate(probe_rx)?;
    rx.check_rate(probe_tx)?;
    let reversed = conj_reverse(probe_rx.samples());
    let filter = convolve_slices(&reversed, probe_tx.samples(), DEFAULT_CONV_CROSSOVER);
    let processed = convolve_slices(rx.samples(), &filter, DEFAULT_CONV_CROSSOVER);
    let tr = convolve_slices(&reversed, probe_rx.samples(), DEFAULT_CONV_CROSSOVER);
    let fs = rx.sample_rate();
    Ok(TrOutput::new(
        BasebandSignal::from_parts(processed, fs),
        BasebandSignal::from_parts(tr, fs),
        lead,
    ))
}

/// Virtual time reversal: `r * ĥ*(−t)`.
///
/// `h_hat[j]` is the tap at delay `j - lead` relative to the
/// synchronized path. When the true response is known (simulation) it is
/// passed on the same grid as `truth` and the reported channel is
/// `h * ĥ*(−t)`; otherwise `ĥ * ĥ*(−t)`.
pub fn vtrp(
    rx: &BasebandSignal,
    h_hat: &BasebandSignal,
    truth: Option<&BasebandSignal>,
    lead: usize,
) -> Result<TrOutput> {
    if h_hat.is_empty() || h_hat.energy() == 0.0 {
        return Err(Error::ZeroEstimate);
    }
    rx.check_rate(h_hat)?;
    let reversed = conj_reverse(h_hat.samples());
    let processed = convolve_slices(rx.samples(), &reversed, DEFAULT_CONV_CROSSOVER);
    let base = match truth {
        Some(h) => {
            rx.check_rate(h)?;
            h.samples()
        }
        None => h_hat.samples(),
    };
    let tr = convolve_slices(base, &reversed, DEFAULT_CONV_CROSSOVER);
    let fs = rx.sample_rate();
    Ok(TrOutput::new(
        BasebandSignal::from_parts(processed, fs),
        BasebandSignal::from_parts(tr, fs),
        lead,
    ))
}

/// Body start of every block in the processed timeline, given where the
/// frame begins in the unprocessed buffer.
pub fn resynchronize(out: &TrOutput, layout: &FrameLayout, origin: usize) -> Vec<i64> {
    layout
        .blocks
        .iter()
        .map(|b| origin as i64 + b.body_start() as i64 + out.shift())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{conj_time_reverse, convolve, rms_error};
    use crate::tx::{make_lfm, OfdmConfig};
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const FS: f64 = 48_000.0;

    fn sig(v: Vec<Complex64>) -> BasebandSignal {
        BasebandSignal::new(v, FS).unwrap()
    }

    fn random(len: usize, seed: u64) -> BasebandSignal {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        sig((0..len)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect())
    }

    fn taps(len: usize, entries: &[(usize, Complex64)]) -> BasebandSignal {
        let mut h = vec![Complex64::new(0.0, 0.0); len];
        for (i, a) in entries {
            h[*i] = *a;
        }
        sig(h)
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn delta_channel_ptrp_is_probe_autocorrelation_filter() {
        let cfg = OfdmConfig::default();
        let p = make_lfm(&cfg);
        let x = random(3000, 1);
        let out = ptrp(&x, &p, &p, 0).unwrap();
        let auto = convolve(&conj_time_reverse(&p), &p).unwrap();
        let want = convolve(&x, &auto).unwrap();
        assert!(rms_error(out.processed.samples(), want.samples()) <= 1e-6);
        assert_eq!(out.focus_index, p.len() - 1);
        assert!(!out.is_ambiguous());
    }

    #[test]
    fn vtrp_delta_estimate_is_identity() {
        let x = random(500, 2);
        let out = vtrp(&x, &taps(1, &[(0, c(1.0, 0.0))]), None, 0).unwrap();
        assert_eq!(out.processed, x);
        assert_eq!(out.shift(), 0);
    }

    #[test]
    fn exact_estimate_focus_and_symmetry() {
        let h = taps(40, &[(3, c(0.5, 0.2)), (10, c(1.0, 0.0)), (31, c(-0.3, 0.6))]);
        let out = vtrp(&random(100, 3), &h, Some(&h), 3).unwrap();
        let power: f64 = h.energy();
        let focus = out.tr_channel.samples()[out.focus_index];
        assert!((focus - c(power, 0.0)).norm() <= 1e-6);
        let t = out.tr_channel.samples();
        let f = out.focus_index;
        for m in 1..=f.min(t.len() - 1 - f) {
            assert!((t[f + m] - t[f - m].conj()).norm() <= 1e-6);
        }
    }

    #[test]
    fn focusing_gain_grows_with_path_count() {
        let n_paths = 6;
        let entries: Vec<(usize, Complex64)> = (0..n_paths)
            .map(|i| (i * 37, Complex64::from_polar(1.0, i as f64)))
            .collect();
        let h = taps(200, &entries);
        let out = vtrp(&random(16, 4), &h, Some(&h), 0).unwrap();
        let focus = out.tr_channel.samples()[out.focus_index].norm_sqr();
        let largest = h.samples().iter().map(|v| v.norm_sqr()).fold(0.0, f64::max);
        assert!(focus >= n_paths as f64 * largest);
    }

    #[test]
    fn zero_estimate_is_rejected() {
        let x = random(10, 5);
        assert!(matches!(vtrp(&x, &taps(4, &[]), None, 0), Err(Error::ZeroEstimate)));
        assert!(matches!(ptrp(&x, &taps(0, &[]), &x, 0), Err(Error::Empty(_))));
    }

    #[test]
    fn planted_shift_moves_mapping() {
        let cfg = OfdmConfig::default();
        let layout = FrameLayout::new(&cfg);
        let h = taps(60, &[(5, c(0.6, 0.0)), (12, c(1.0, 0.0)), (40, c(0.4, 0.3))]);
        let shifted = taps(60, &[(12, c(0.6, 0.0)), (19, c(1.0, 0.0)), (47, c(0.4, 0.3))]);
        let x = random(64, 6);
        let a = vtrp(&x, &h, Some(&h), 5).unwrap();
        let b = vtrp(&x, &shifted, Some(&h), 5).unwrap();
        let ma = resynchronize(&a, &layout, 100);
        let mb = resynchronize(&b, &layout, 100);
        for (p, q) in ma.iter().zip(&mb) {
            assert_eq!(p - q, 7);
        }
    }

    #[test]
    fn ties_resolve_to_earliest_with_warning() {
        let h = taps(4, &[(0, c(1.0, 0.0)), (3, c(1.0, 0.0))]);
        let out = vtrp(&random(8, 7), &h, Some(&taps(1, &[(0, c(1.0, 0.0))])), 0).unwrap();
        // tr = δ * reversed ĥ has two equal taps at 0 and 3
        assert_eq!(out.focus_index, 0);
        assert!(out.is_ambiguous());
    }

    #[test]
    fn precursor_span_counts_leading_taps() {
        let h = taps(20, &[(2, c(0.2, 0.0)), (10, c(1.0, 0.0))]);
        let out = vtrp(&random(8, 8), &h, Some(&h), 0).unwrap();
        // autocorrelation of h spans ±8 samples around the focus
        assert!((out.precursor_span - 8.0 / FS).abs() < 1e-12);
    }
}
