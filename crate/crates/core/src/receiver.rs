//! Complete receiver chains for every processing mode.
//!
//! A shared front end (band-limiting, detection, Doppler removal, probe
//! and noise measurement) feeds the mode-specific preprocessing, followed
//! by pilot-based estimation, zero-forcing equalization and decoding.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frontend::{
    compensate, estimate_doppler, extract_probe, noise_window, probe_extension, synchronize, CompensatedFrame,
    DopplerEstimate, ProbeWindow, SyncResult,
};
use crate::rx::{
    data_bins, ls_pilot_estimate, ofdm_demod, qpsk_demap_hard, qpsk_demap_soft, viterbi_decode, zf_equalize,
    FreqChannelEstimate, FreqObservation,
};
use crate::signal::{BasebandSignal, LowpassFilter};
use crate::sparse::{bpdn_estimate, build_dictionary, mp_estimate, refine_to_noise_level, BpdnOptions, CirEstimate};
use crate::tr::{ptrp, resynchronize, vtrp, TrOutput};
use crate::tx::{make_lfm, FrameLayout, FrameReference, OfdmConfig, PilotLayout, CONSTRAINT_LENGTH};

/// Receiver processing chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "NOTR")]
    Notr,
    #[serde(rename = "PTR")]
    Ptr,
    #[serde(rename = "VTR_MP")]
    VtrMp,
    #[serde(rename = "VTR_BPDN")]
    VtrBpdn,
    #[serde(rename = "KNOWN_CSI")]
    KnownCsi,
}

impl Mode {
    pub const ALL: [Mode; 5] = [Mode::Notr, Mode::Ptr, Mode::VtrMp, Mode::VtrBpdn, Mode::KnownCsi];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Notr => "NOTR",
            Mode::Ptr => "PTR",
            Mode::VtrMp => "VTR_MP",
            Mode::VtrBpdn => "VTR_BPDN",
            Mode::KnownCsi => "KNOWN_CSI",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown mode {s:?}")))
    }
}

/// Estimator settings shared by all trials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReceiverConfig {
    /// Declared channel delay spread, seconds; sizes the probe window.
    pub delay_spread: f64,
    pub mp_max_iters: usize,
    /// Largest number of taps kept by the ℓ₁ estimator before refitting.
    pub sparsity_cap: usize,
    pub bpdn: BpdnOptions,
}

impl ReceiverConfig {
    pub fn new(delay_spread: f64) -> Self {
        Self {
            delay_spread,
            mp_max_iters: 30,
            sparsity_cap: 64,
            bpdn: BpdnOptions::default(),
        }
    }
}

/// Everything the mode chains share.
#[derive(Debug, Clone)]
pub struct FrontEnd {
    pub sync: SyncResult,
    pub doppler: DopplerEstimate,
    pub frame: CompensatedFrame,
    pub probe: ProbeWindow,
    /// Extension of the probe window beyond the LFM, samples.
    pub probe_extension: usize,
    /// Per-sample in-band noise power measured in the second guard.
    pub noise_power: f64,
    /// Noise power over probe-window power.
    pub sigma: f64,
    /// Measured input SNR: OFDM-segment signal power over guard noise power.
    pub isnr_db: f64,
}

/// Restricts the buffer to the signal band before any processing.
pub fn band_limit(rx: &BasebandSignal, cfg: &OfdmConfig) -> BasebandSignal {
    let filter = LowpassFilter::for_band(cfg.bandwidth() / 2.0, rx.sample_rate());
    let y = filter.apply(rx.samples());
    BasebandSignal::from_parts(y, rx.sample_rate())
}

/// Runs detection and Doppler estimation, then compensates and measures.
pub fn front_end(
    rx: &BasebandSignal,
    cfg: &OfdmConfig,
    layout: &FrameLayout,
    rcfg: &ReceiverConfig,
) -> Result<FrontEnd> {
    let filtered = band_limit(rx, cfg);
    let sync = synchronize(&filtered, cfg)?;
    let ext = cfg.samples(probe_extension(rcfg.delay_spread));
    let doppler = estimate_doppler(&filtered, &sync, layout, cfg, ext)?;
    compensated_front_end(&filtered, sync, doppler, cfg, layout, rcfg)
}

/// Front end for a band-limited buffer with detection already done.
pub fn compensated_front_end(
    filtered: &BasebandSignal,
    sync: SyncResult,
    doppler: DopplerEstimate,
    cfg: &OfdmConfig,
    layout: &FrameLayout,
    rcfg: &ReceiverConfig,
) -> Result<FrontEnd> {
    let frame = compensate(filtered, &sync, &doppler, cfg)?;
    let l_max = probe_extension(rcfg.delay_spread);
    let probe = extract_probe(&frame, layout, l_max, cfg)?;
    let ext = cfg.samples(l_max);
    let (start, len) = noise_window(layout, ext);
    let noise_power = frame.window(start, len).mean_power();
    let probe_power = probe.signal.mean_power();
    let sigma = if probe_power > 0.0 {
        noise_power / probe_power
    } else {
        0.0
    };
    let ofdm_len = layout.total_len() - layout.ofdm_start();
    let segment_power = frame.window(layout.ofdm_start() as i64, ofdm_len).mean_power();
    let isnr_db = if noise_power > 0.0 {
        10.0 * ((segment_power - noise_power).max(0.0) / noise_power).log10()
    } else {
        f64::INFINITY
    };
    Ok(FrontEnd {
        sync,
        doppler,
        frame,
        probe,
        probe_extension: ext,
        noise_power,
        sigma,
        isnr_db,
    })
}

/// Per-mode side information.
#[derive(Debug, Clone, Default)]
pub struct ModeDiagnostics {
    pub focus_index: Option<usize>,
    pub precursor_span: Option<f64>,
    pub cir: Option<CirEstimate>,
    pub warnings: Vec<String>,
}

/// Frequency-domain observations with the estimate used to equalize them.
#[derive(Debug, Clone)]
pub struct Demodulated {
    pub observations: Vec<FreqObservation>,
    pub estimates: Vec<FreqChannelEstimate>,
    pub diagnostics: ModeDiagnostics,
}

/// Time-domain estimate of the probe channel, one tap per sample starting
/// `probe.lead` samples ahead of the synchronized path.
pub fn estimate_cir(fe: &FrontEnd, cfg: &OfdmConfig, rcfg: &ReceiverConfig, mode: Mode) -> Result<CirEstimate> {
    let lfm = make_lfm(cfg);
    let taps = fe.probe_extension + 1;
    let dict = build_dictionary(&lfm, taps, cfg.guard_len() + 1)?;
    let y = fe.probe.signal.samples();
    match mode {
        Mode::VtrMp => mp_estimate(y, &dict, rcfg.mp_max_iters, fe.sigma),
        Mode::VtrBpdn => {
            let est = bpdn_estimate(y, &dict, fe.sigma, &rcfg.bpdn)?;
            // the l1 solution is biased toward zero; refit the taps needed to
            // reach the noise level without the shrinkage
            let mut refined = refine_to_noise_level(y, &dict, &est, fe.sigma, rcfg.sparsity_cap)?;
            refined.solver_iters = est.solver_iters;
            refined.converged = est.converged;
            Ok(refined)
        }
        other => Err(Error::Config(format!("{other} does not use a sparse estimate"))),
    }
}

fn tr_diagnostics(out: &TrOutput, cir: Option<CirEstimate>) -> ModeDiagnostics {
    ModeDiagnostics {
        focus_index: Some(out.focus_index),
        precursor_span: Some(out.precursor_span),
        cir,
        warnings: out.warnings.clone(),
    }
}

fn direct_body_starts(fe: &FrontEnd, layout: &FrameLayout) -> Vec<i64> {
    layout
        .blocks
        .iter()
        .map(|b| (fe.frame.origin + b.body_start()) as i64)
        .collect()
}

/// Observations after the mode's preprocessing, and the buffer positions
/// they were taken from.
pub fn demodulate(
    mode: Mode,
    fe: &FrontEnd,
    cfg: &OfdmConfig,
    layout: &FrameLayout,
    pilots: &PilotLayout,
    rcfg: &ReceiverConfig,
    genie: Option<&[FreqChannelEstimate]>,
) -> Result<Demodulated> {
    let pilot_estimates =
        |obs: &[FreqObservation]| obs.iter().map(|o| ls_pilot_estimate(o, pilots)).collect::<Vec<_>>();
    match mode {
        Mode::Notr => {
            let observations = ofdm_demod(&fe.frame.signal, &direct_body_starts(fe, layout), cfg)?;
            Ok(Demodulated {
                estimates: pilot_estimates(&observations),
                observations,
                diagnostics: ModeDiagnostics::default(),
            })
        }
        Mode::KnownCsi => {
            let estimates = genie
                .ok_or_else(|| Error::Config("known-channel mode needs the true response".into()))?
                .to_vec();
            let observations = ofdm_demod(&fe.frame.signal, &direct_body_starts(fe, layout), cfg)?;
            if estimates.len() != observations.len() {
                return Err(Error::LengthMismatch {
                    left: estimates.len(),
                    right: observations.len(),
                });
            }
            Ok(Demodulated {
                observations,
                estimates,
                diagnostics: ModeDiagnostics::default(),
            })
        }
        Mode::Ptr => {
            let lfm = make_lfm(cfg);
            let out = ptrp(&fe.frame.signal, &fe.probe.signal, &lfm, fe.probe.lead)?;
            let starts = resynchronize(&out, layout, fe.frame.origin);
            let observations = ofdm_demod(&out.processed, &starts, cfg)?;
            Ok(Demodulated {
                estimates: pilot_estimates(&observations),
                observations,
                diagnostics: tr_diagnostics(&out, None),
            })
        }
        Mode::VtrMp | Mode::VtrBpdn => {
            let cir = estimate_cir(fe, cfg, rcfg, mode)?;
            let h_hat = cir.as_signal(cfg.sample_rate);
            let out = vtrp(&fe.frame.signal, &h_hat, None, fe.probe.lead)?;
            let starts = resynchronize(&out, layout, fe.frame.origin);
            let observations = ofdm_demod(&out.processed, &starts, cfg)?;
            Ok(Demodulated {
                estimates: pilot_estimates(&observations),
                observations,
                diagnostics: tr_diagnostics(&out, Some(cir)),
            })
        }
    }
}

/// Transmitted symbols on every used subcarrier of one block.
pub fn full_symbols(data: &[Complex64], pilots: &PilotLayout, cfg: &OfdmConfig) -> Vec<Complex64> {
    let half = (cfg.subcarriers / 2) as i64;
    let mut s = vec![Complex64::new(0.0, 0.0); cfg.subcarriers];
    for (&k, &p) in pilots.pilot_indices.iter().zip(&pilots.pilot_symbols) {
        s[(k + half) as usize] = p;
    }
    for (&k, &d) in pilots.data_indices.iter().zip(data) {
        s[(k + half) as usize] = d;
    }
    s
}

/// True per-subcarrier response: a noiseless observation divided by the
/// transmitted symbols.
pub fn genie_estimates(
    clean: &[FreqObservation],
    reference: &FrameReference,
    pilots: &PilotLayout,
    cfg: &OfdmConfig,
) -> Vec<FreqChannelEstimate> {
    clean
        .iter()
        .zip(&reference.block_symbols)
        .map(|(obs, data)| {
            let s = full_symbols(data, pilots, cfg);
            FreqChannelEstimate {
                h: obs.z.iter().zip(&s).map(|(z, s)| z / s).collect(),
            }
        })
        .collect()
}

/// Hard and soft decisions for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Decisions {
    /// Hard coded-bit decisions over the whole frame capacity.
    pub coded_hard: Vec<u8>,
    /// Coded-bit confidences over the whole frame capacity.
    pub coded_soft: Vec<f64>,
    pub payload_soft: Vec<u8>,
    pub payload_hard: Vec<u8>,
    pub erasures: usize,
}

/// Equalizes, demaps and decodes a payload of `payload_len` bits.
pub fn decide(dem: &Demodulated, pilots: &PilotLayout, payload_len: usize) -> Result<Decisions> {
    let mut coded_hard = Vec::new();
    let mut coded_soft = Vec::new();
    let mut erasures = 0;
    for (obs, est) in dem.observations.iter().zip(&dem.estimates) {
        let eq = zf_equalize(obs, est, pilots);
        erasures += eq.erasures.iter().filter(|e| **e).count();
        coded_hard.extend(qpsk_demap_hard(&eq.symbols));
        coded_soft.extend(qpsk_demap_soft(&eq.symbols, &eq.weights));
    }
    let (payload_soft, payload_hard) = if payload_len == 0 {
        (Vec::new(), Vec::new())
    } else {
        let used = 2 * (payload_len + CONSTRAINT_LENGTH - 1);
        if used > coded_soft.len() {
            return Err(Error::PayloadOverflow {
                required: used,
                available: coded_soft.len(),
            });
        }
        let soft = viterbi_decode(&coded_soft[..used])?;
        let hard_llr: Vec<f64> = crate::rx::bits_to_soft(&coded_hard[..used]);
        (soft, viterbi_decode(&hard_llr)?)
    };
    Ok(Decisions {
        coded_hard,
        coded_soft,
        payload_soft,
        payload_hard,
        erasures,
    })
}

/// Effective SNR on data subcarriers over all blocks, dB. A zero residual
/// gives `+∞`.
pub fn esnr_db(
    observations: &[FreqObservation],
    estimates: &[FreqChannelEstimate],
    symbols: &[Vec<Complex64>],
    pilots: &PilotLayout,
) -> Result<f64> {
    if pilots.data_count() == 0 || observations.is_empty() {
        return Err(Error::Empty("data subcarriers"));
    }
    let mut signal = 0.0;
    let mut residual = 0.0;
    for ((obs, est), s) in observations.iter().zip(estimates).zip(symbols) {
        let z = data_bins(&obs.z, pilots);
        let h = data_bins(&est.h, pilots);
        if s.len() != z.len() {
            return Err(Error::LengthMismatch {
                left: s.len(),
                right: z.len(),
            });
        }
        for ((zk, hk), sk) in z.iter().zip(&h).zip(s) {
            let fit = hk * sk;
            signal += fit.norm_sqr();
            residual += (zk - fit).norm_sqr();
        }
    }
    Ok(if residual == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (signal / residual).log10()
    })
}

/// Exact Hamming count: `(errors, total)`.
pub fn bit_errors(reference: &[u8], decoded: &[u8]) -> Result<(u64, u64)> {
    if reference.len() != decoded.len() {
        return Err(Error::LengthMismatch {
            left: reference.len(),
            right: decoded.len(),
        });
    }
    let errors = reference.iter().zip(decoded).filter(|(a, b)| a != b).count();
    Ok((errors as u64, reference.len() as u64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tx::{build_frame, random_bits};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn one_block(spacing: usize) -> (OfdmConfig, PilotLayout) {
        let cfg = OfdmConfig {
            pilot_spacing: spacing,
            ..OfdmConfig::default()
        };
        let pilots = PilotLayout::new(&cfg);
        (cfg, pilots)
    }

    #[test]
    fn mode_names_round_trip() {
        for m in Mode::ALL {
            assert_eq!(m.name().parse::<Mode>().unwrap(), m);
            assert_eq!(m.to_string(), m.name());
        }
        assert!("QAM".parse::<Mode>().is_err());
        assert_eq!("vtr_bpdn".parse::<Mode>().unwrap(), Mode::VtrBpdn);
    }

    #[test]
    fn esnr_infinite_on_exact_fit() {
        let (cfg, pilots) = one_block(5);
        let data = vec![c(0.0, 1.0); pilots.data_count()];
        let h = FreqChannelEstimate {
            h: vec![c(0.5, -0.25); cfg.subcarriers],
        };
        let z: Vec<Complex64> = full_symbols(&data, &pilots, &cfg).iter().map(|s| s * h.h[0]).collect();
        let obs = FreqObservation { z, block_index: 0 };
        let v = esnr_db(&[obs], &[h], &[data], &pilots).unwrap();
        assert_eq!(v, f64::INFINITY);
    }

    #[test]
    fn esnr_tracks_constructed_noise_and_is_scale_invariant() {
        let (cfg, pilots) = one_block(3);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let data: Vec<Complex64> = (0..pilots.data_count())
            .map(|i| Complex64::from_polar(1.0, i as f64))
            .collect();
        let h = FreqChannelEstimate {
            h: vec![c(1.0, 0.0); cfg.subcarriers],
        };
        let var: f64 = 0.05;
        let z: Vec<Complex64> = full_symbols(&data, &pilots, &cfg)
            .iter()
            .map(|s| {
                let n = c(StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng));
                s + n * (var / 2.0).sqrt()
            })
            .collect();
        let obs = FreqObservation { z, block_index: 0 };
        let v = esnr_db(
            std::slice::from_ref(&obs),
            std::slice::from_ref(&h),
            std::slice::from_ref(&data),
            &pilots,
        )
        .unwrap();
        assert!((v - 10.0 * (1.0 / var).log10()).abs() < 0.5, "{v}");
        let half = |x: &[Complex64]| x.iter().map(|v| v * 0.5).collect::<Vec<_>>();
        let obs2 = FreqObservation {
            z: half(&obs.z),
            block_index: 0,
        };
        let h2 = FreqChannelEstimate { h: half(&h.h) };
        let w = esnr_db(&[obs2], &[h2], &[data], &pilots).unwrap();
        assert!((v - w).abs() < 1e-9);
    }

    #[test]
    fn esnr_rejects_empty() {
        let (_, pilots) = one_block(3);
        assert!(esnr_db(&[], &[], &[], &pilots).is_err());
    }

    #[test]
    fn ber_counts() {
        let a = vec![0u8, 1, 1, 0, 1, 0, 0, 1];
        assert_eq!(bit_errors(&a, &a).unwrap(), (0, 8));
        let flipped: Vec<u8> = a.iter().map(|b| 1 - b).collect();
        assert_eq!(bit_errors(&a, &flipped).unwrap(), (8, 8));
        let mut three = a.clone();
        for i in [0, 3, 7] {
            three[i] ^= 1;
        }
        assert_eq!(bit_errors(&a, &three).unwrap(), (3, 8));
        assert!(bit_errors(&a, &a[..7]).is_err());
    }

    #[test]
    fn every_mode_decodes_clean_loopback() {
        let (mut cfg, _) = one_block(5);
        cfg.blocks_per_frame = 2;
        let pilots = PilotLayout::new(&cfg);
        let payload = random_bits(500, &mut ChaCha8Rng::seed_from_u64(4));
        let (frame, layout, reference) = build_frame(&payload, &cfg, &pilots).unwrap();
        let mut buf = vec![c(0.0, 0.0); cfg.guard_len()];
        buf.extend_from_slice(frame.samples());
        buf.extend(vec![c(0.0, 0.0); cfg.guard_len()]);
        let rx = BasebandSignal::new(buf, cfg.sample_rate).unwrap();
        let rcfg = ReceiverConfig::new(0.0);
        let fe = front_end(&rx, &cfg, &layout, &rcfg).unwrap();
        assert!(fe.doppler.a_hat.abs() < 1e-6);
        let clean = demodulate(Mode::Notr, &fe, &cfg, &layout, &pilots, &rcfg, None).unwrap();
        let genie = genie_estimates(&clean.observations, &reference, &pilots, &cfg);
        for mode in Mode::ALL {
            let dem = demodulate(mode, &fe, &cfg, &layout, &pilots, &rcfg, Some(&genie)).unwrap();
            let d = decide(&dem, &pilots, payload.len()).unwrap();
            assert_eq!(bit_errors(&reference.coded_bits, &d.coded_hard).unwrap().0, 0, "{mode}");
            assert_eq!(d.payload_soft, payload, "{mode}");
            assert_eq!(d.payload_hard, payload, "{mode}");
        }
    }
}
