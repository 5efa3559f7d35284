//! OFDM demodulation, pilot channel estimation, zero-forcing equalization,
//! QPSK demapping and Viterbi decoding.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::signal::{fft, BasebandSignal};
use crate::tx::{conv_outputs, OfdmConfig, PilotLayout, CONSTRAINT_LENGTH};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Erasure floor relative to the median channel magnitude.
pub const ERASURE_FLOOR: f64 = 1e-3;

/// Frequency-domain samples of one block on the used subcarriers.
///
/// `z[i]` belongs to subcarrier `i - K/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct FreqObservation {
    pub z: Vec<Complex64>,
    pub block_index: usize,
}

/// Channel response on every used subcarrier, same indexing as
/// [`FreqObservation`].
#[derive(Debug, Clone, PartialEq)]
pub struct FreqChannelEstimate {
    pub h: Vec<Complex64>,
}

/// Equalized data symbols with per-bin reliability.
#[derive(Debug, Clone, PartialEq)]
pub struct Equalized {
    pub symbols: Vec<Complex64>,
    /// `|Ĥ|²` per data bin, zero for erasures.
    pub weights: Vec<f64>,
    pub erasures: Vec<bool>,
}

fn slot(k: i64, cfg_half: i64) -> usize {
    (k + cfg_half) as usize
}

/// Transforms the body starting at each given index and keeps the used
/// bins, undoing the transmitter's scaling.
pub fn ofdm_demod(frame: &BasebandSignal, body_starts: &[i64], cfg: &OfdmConfig) -> Result<Vec<FreqObservation>> {
    let n = cfg.fft_size;
    let scale = (cfg.subcarriers as f64).sqrt() / (cfg.ofdm_rms * n as f64);
    body_starts
        .iter()
        .enumerate()
        .map(|(b, &start)| {
            let end = start + n as i64;
            if start < 0 || end > frame.len() as i64 {
                return Err(Error::WindowOutOfRange {
                    start,
                    end,
                    len: frame.len(),
                });
            }
            let mut buf = frame.samples()[start as usize..end as usize].to_vec();
            fft::forward(&mut buf);
            let z = cfg
                .subcarrier_indices()
                .map(|k| buf[fft::bin_index(k, n)] * scale)
                .collect();
            Ok(FreqObservation { z, block_index: b })
        })
        .collect()
}

/// Least-squares estimates at the pilots, linearly interpolated across
/// the data bins and held flat beyond the outermost pilots.
pub fn ls_pilot_estimate(obs: &FreqObservation, layout: &PilotLayout) -> FreqChannelEstimate {
    let k_total = obs.z.len();
    let half = (k_total / 2) as i64;
    let pilots: Vec<(usize, Complex64)> = layout
        .pilot_indices
        .iter()
        .zip(&layout.pilot_symbols)
        .map(|(&k, &p)| {
            let i = slot(k, half);
            (i, obs.z[i] / p)
        })
        .collect();
    let mut h = vec![ZERO; k_total];
    let Some(&(first, first_h)) = pilots.first() else {
        return FreqChannelEstimate { h };
    };
    let (last, last_h) = *pilots.last().unwrap();
    h[..=first].fill(first_h);
    h[last..].fill(last_h);
    for w in pilots.windows(2) {
        let ((i0, h0), (i1, h1)) = (w[0], w[1]);
        let span = (i1 - i0) as f64;
        for (j, v) in h[i0..=i1].iter_mut().enumerate() {
            let t = j as f64 / span;
            *v = h0 + (h1 - h0) * t;
        }
    }
    FreqChannelEstimate { h }
}

/// Values on the data subcarriers, in `layout.data_indices` order.
pub fn data_bins(values: &[Complex64], layout: &PilotLayout) -> Vec<Complex64> {
    let half = (values.len() / 2) as i64;
    layout.data_indices.iter().map(|&k| values[slot(k, half)]).collect()
}

/// `ŝ = z / Ĥ` on the data bins. Bins whose channel magnitude falls under
/// the erasure floor are zeroed with zero weight.
pub fn zf_equalize(obs: &FreqObservation, est: &FreqChannelEstimate, layout: &PilotLayout) -> Equalized {
    let z = data_bins(&obs.z, layout);
    let h = data_bins(&est.h, layout);
    let mut mags: Vec<f64> = est.h.iter().map(|v| v.norm()).collect();
    let mid = mags.len() / 2;
    let median = if mags.is_empty() {
        0.0
    } else {
        *mags.select_nth_unstable_by(mid, f64::total_cmp).1
    };
    let floor = ERASURE_FLOOR * median;
    let mut out = Equalized {
        symbols: Vec::with_capacity(z.len()),
        weights: Vec::with_capacity(z.len()),
        erasures: Vec::with_capacity(z.len()),
    };
    for (zi, hi) in z.iter().zip(&h) {
        let erased = !(hi.norm() > floor) || !(hi.norm() > 0.0);
        out.erasures.push(erased);
        if erased {
            out.symbols.push(ZERO);
            out.weights.push(0.0);
        } else {
            out.symbols.push(zi / hi);
            out.weights.push(hi.norm_sqr());
        }
    }
    out
}

/// Sign decisions: imaginary part gives the first bit, real the second.
pub fn qpsk_demap_hard(symbols: &[Complex64]) -> Vec<u8> {
    symbols
        .iter()
        .flat_map(|s| [u8::from(s.im < 0.0), u8::from(s.re < 0.0)])
        .collect()
}

/// Scaled log-likelihood proxies, positive favouring bit 0.
pub fn qpsk_demap_soft(symbols: &[Complex64], weights: &[f64]) -> Vec<f64> {
    symbols
        .iter()
        .zip(weights)
        .flat_map(|(s, w)| [s.im * w, s.re * w])
        .collect()
}

/// Hard bits as unit-confidence soft values for the decoder.
pub fn bits_to_soft(bits: &[u8]) -> Vec<f64> {
    bits.iter().map(|&b| if b == 0 { 1.0 } else { -1.0 }).collect()
}

const STATES: usize = 1 << (CONSTRAINT_LENGTH - 1);

/// Maximum-likelihood decoding of a zero-terminated stream.
///
/// `soft` holds one value per coded bit, positive favouring 0. The six
/// tail bits are stripped from the result.
pub fn viterbi_decode(soft: &[f64]) -> Result<Vec<u8>> {
    if !soft.len().is_multiple_of(2) {
        return Err(Error::OddLength(soft.len()));
    }
    let steps = soft.len() / 2;
    if steps < CONSTRAINT_LENGTH - 1 {
        return Err(Error::InvalidSignal(format!(
            "coded stream of {} bits is shorter than the code tail",
            soft.len()
        )));
    }
    // branch outputs indexed by the 7-bit register
    let outputs: Vec<(u8, u8)> = (0..(STATES as u32 * 2)).map(conv_outputs).collect();
    let mut metric = [f64::NEG_INFINITY; STATES];
    metric[0] = 0.0;
    let mut decisions: Vec<u64> = Vec::with_capacity(steps);
    for step in soft.chunks_exact(2) {
        let (l0, l1) = (step[0], step[1]);
        let mut next = [f64::NEG_INFINITY; STATES];
        let mut chosen = 0u64;
        for (ns, slot) in next.iter_mut().enumerate() {
            let bit = (ns >> (CONSTRAINT_LENGTH - 2)) as u32;
            let mut best = f64::NEG_INFINITY;
            let mut pick = 0;
            for x in 0..2 {
                let ps = ((ns << 1) & (STATES - 1)) | x;
                let reg = (bit << (CONSTRAINT_LENGTH - 1)) | ps as u32;
                let (c0, c1) = outputs[reg as usize];
                let gain = if c0 == 0 { l0 } else { -l0 } + if c1 == 0 { l1 } else { -l1 };
                let m = metric[ps] + gain;
                if m > best {
                    best = m;
                    pick = x;
                }
            }
            *slot = best;
            chosen |= (pick as u64) << ns;
        }
        metric = next;
        decisions.push(chosen);
    }
    let mut state = 0usize;
    let mut bits = vec![0u8; steps];
    for (t, d) in decisions.iter().enumerate().rev() {
        bits[t] = (state >> (CONSTRAINT_LENGTH - 2)) as u8;
        let x = ((d >> state) & 1) as usize;
        state = ((state << 1) & (STATES - 1)) | x;
    }
    bits.truncate(steps - (CONSTRAINT_LENGTH - 1));
    Ok(bits)
}
