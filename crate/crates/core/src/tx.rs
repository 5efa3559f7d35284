//! OFDM transmitter: waveform configuration, coding, mapping and frame assembly.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{fft, BasebandSignal};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Waveform constants shared by the transmitter and every receiver.
///
/// Durations are in seconds and are converted to whole samples with
/// [`OfdmConfig::samples`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OfdmConfig {
    pub sample_rate: f64,
    pub fft_size: usize,
    pub f_low: f64,
    pub f_high: f64,
    pub f_c: f64,
    /// Number of used subcarriers, indices `-K/2 .. K/2`.
    pub subcarriers: usize,
    /// Data subcarriers between consecutive pilots.
    pub pilot_spacing: usize,
    pub pilot_seed: u64,
    pub prefix: f64,
    pub postfix: f64,
    pub guard: f64,
    pub lfm_duration: f64,
    pub cw_duration: f64,
    pub cw_freq: f64,
    pub blocks_per_frame: usize,
    /// RMS amplitude of the OFDM body relative to the unit-peak LFM and CW.
    pub ofdm_rms: f64,
}

impl Default for OfdmConfig {
    fn default() -> Self {
        Self {
            sample_rate: 48_000.0,
            fft_size: 8192,
            f_low: 4_000.0,
            f_high: 12_000.0,
            f_c: 8_000.0,
            subcarriers: 1364,
            pilot_spacing: 3,
            pilot_seed: 0x5eed_0fd1,
            prefix: 0.050,
            postfix: 0.050,
            guard: 0.050,
            lfm_duration: 0.040,
            cw_duration: 0.050,
            cw_freq: 8_000.0,
            blocks_per_frame: 1,
            ofdm_rms: 0.5,
        }
    }
}

impl OfdmConfig {
    pub fn subcarrier_spacing(&self) -> f64 {
        self.sample_rate / self.fft_size as f64
    }

    pub fn symbol_duration(&self) -> f64 {
        self.fft_size as f64 / self.sample_rate
    }

    /// Occupied bandwidth of the used subcarriers.
    pub fn bandwidth(&self) -> f64 {
        self.subcarriers as f64 * self.subcarrier_spacing()
    }

    /// Sweep width of the LFM probe.
    pub fn lfm_bandwidth(&self) -> f64 {
        self.f_high - self.f_low
    }

    pub fn samples(&self, seconds: f64) -> usize {
        (seconds * self.sample_rate).round() as usize
    }

    pub fn prefix_len(&self) -> usize {
        self.samples(self.prefix)
    }

    pub fn postfix_len(&self) -> usize {
        self.samples(self.postfix)
    }

    pub fn guard_len(&self) -> usize {
        self.samples(self.guard)
    }

    pub fn lfm_len(&self) -> usize {
        self.samples(self.lfm_duration)
    }

    pub fn cw_len(&self) -> usize {
        self.samples(self.cw_duration)
    }

    pub fn block_len(&self) -> usize {
        self.prefix_len() + self.fft_size + self.postfix_len()
    }

    /// Signed subcarrier indices in transmission order.
    pub fn subcarrier_indices(&self) -> impl Iterator<Item = i64> {
        let half = (self.subcarriers / 2) as i64;
        -half..half
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.sample_rate > 0.0) || self.fft_size < 2 {
            return bad("sample rate and FFT size must be positive".into());
        }
        if self.subcarriers == 0 || !self.subcarriers.is_multiple_of(2) || self.subcarriers > self.fft_size {
            return bad(format!(
                "subcarrier count {} must be even and fit the FFT",
                self.subcarriers
            ));
        }
        if self.pilot_spacing == 0 {
            return bad("pilot spacing must be at least 1".into());
        }
        if !(self.f_low < self.f_high && self.f_low <= self.f_c && self.f_c <= self.f_high) {
            return bad("carrier must lie inside [f_low, f_high]".into());
        }
        if self.f_high > self.sample_rate / 2.0 {
            return Err(Error::Nyquist {
                band_edge: self.f_high,
                nyquist: self.sample_rate / 2.0,
            });
        }
        let df = self.subcarrier_spacing();
        let half = (self.subcarriers / 2) as f64;
        if self.f_c - half * df < self.f_low || self.f_c + (half - 1.0) * df > self.f_high {
            return bad(format!("{} subcarriers do not fit inside the band", self.subcarriers));
        }
        if self.bandwidth() > self.f_high - self.f_low {
            return bad("occupied bandwidth exceeds the band".into());
        }
        for (name, v) in [
            ("prefix", self.prefix),
            ("postfix", self.postfix),
            ("guard", self.guard),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be a non-negative duration"));
            }
        }
        if self.prefix_len() > self.fft_size || self.postfix_len() > self.fft_size {
            return bad("cyclic extensions cannot exceed the symbol body".into());
        }
        if self.lfm_len() < 2 || self.cw_len() < 2 {
            return bad("LFM and CW segments need at least two samples".into());
        }
        if (self.cw_freq - self.f_c).abs() >= self.sample_rate / 2.0 {
            return bad("CW tone outside the baseband Nyquist range".into());
        }
        if self.blocks_per_frame == 0 {
            return bad("at least one OFDM block per frame".into());
        }
        if !(self.ofdm_rms > 0.0 && self.ofdm_rms.is_finite()) {
            return bad("OFDM RMS amplitude must be positive".into());
        }
        Ok(())
    }
}

/// Partition of the used subcarriers into pilots and data.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotLayout {
    pub pilot_indices: Vec<i64>,
    pub data_indices: Vec<i64>,
    pub pilot_symbols: Vec<Complex64>,
}

impl PilotLayout {
    /// One pilot followed by `pilot_spacing` data subcarriers, repeating
    /// from the lowest index. Pilot values are seeded QPSK points.
    pub fn new(cfg: &OfdmConfig) -> Self {
        let period = cfg.pilot_spacing + 1;
        let (pilot_indices, data_indices): (Vec<i64>, Vec<i64>) = cfg
            .subcarrier_indices()
            .partition(|k| ((k + (cfg.subcarriers / 2) as i64) as usize).is_multiple_of(period));
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.pilot_seed);
        let pilot_symbols = (0..pilot_indices.len())
            .map(|_| qpsk_point(rng.random(), rng.random()))
            .collect();
        Self {
            pilot_indices,
            data_indices,
            pilot_symbols,
        }
    }

    pub fn data_count(&self) -> usize {
        self.data_indices.len()
    }

    pub fn pilot_count(&self) -> usize {
        self.pilot_indices.len()
    }
}

/// Position and extent of one frame segment, in samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub offset: usize,
    pub len: usize,
}

impl Segment {
    pub fn end(&self) -> usize {
        self.offset + self.len
    }
}

/// One OFDM block: prefix, body and postfix are contiguous.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockSegment {
    pub offset: usize,
    pub prefix: usize,
    pub body: usize,
    pub postfix: usize,
}

impl BlockSegment {
    pub fn body_start(&self) -> usize {
        self.offset + self.prefix
    }

    pub fn len(&self) -> usize {
        self.prefix + self.body + self.postfix
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn end(&self) -> usize {
        self.offset + self.len()
    }
}

/// Sample-exact timeline of a transmitted frame.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameLayout {
    pub lfm: Segment,
    pub guard1: Segment,
    pub cw: Segment,
    pub guard2: Segment,
    pub blocks: Vec<BlockSegment>,
}

impl FrameLayout {
    pub fn new(cfg: &OfdmConfig) -> Self {
        let lfm = Segment {
            offset: 0,
            len: cfg.lfm_len(),
        };
        let guard1 = Segment {
            offset: lfm.end(),
            len: cfg.guard_len(),
        };
        let cw = Segment {
            offset: guard1.end(),
            len: cfg.cw_len(),
        };
        let guard2 = Segment {
            offset: cw.end(),
            len: cfg.guard_len(),
        };
        let blocks = (0..cfg.blocks_per_frame)
            .map(|b| BlockSegment {
                offset: guard2.end() + b * cfg.block_len(),
                prefix: cfg.prefix_len(),
                body: cfg.fft_size,
                postfix: cfg.postfix_len(),
            })
            .collect();
        Self {
            lfm,
            guard1,
            cw,
            guard2,
            blocks,
        }
    }

    pub fn ofdm_start(&self) -> usize {
        self.guard2.end()
    }

    pub fn total_len(&self) -> usize {
        self.blocks.last().map_or(self.ofdm_start(), |b| b.end())
    }
}

/// What the receiver-side evaluation needs to score a frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameReference {
    pub payload_bits: Vec<u8>,
    /// Coded stream padded with zeros to the frame capacity.
    pub coded_bits: Vec<u8>,
    /// Data symbols per block, ordered as `PilotLayout::data_indices`.
    pub block_symbols: Vec<Vec<Complex64>>,
}

/// Constraint length of the convolutional code.
pub const CONSTRAINT_LENGTH: usize = 7;
/// Generator polynomials (octal 133 and 171), MSB is the newest bit.
pub const GENERATORS: [u32; 2] = [0o133, 0o171];

#[inline]
pub(crate) fn conv_outputs(reg: u32) -> (u8, u8) {
    (
        ((reg & GENERATORS[0]).count_ones() & 1) as u8,
        ((reg & GENERATORS[1]).count_ones() & 1) as u8,
    )
}

/// Rate-1/2 encoding with six zero tail bits appended.
pub fn conv_encode(bits: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(2 * (bits.len() + CONSTRAINT_LENGTH - 1));
    let mut state = 0u32;
    let tail = std::iter::repeat_n(0u8, CONSTRAINT_LENGTH - 1);
    for b in bits.iter().copied().chain(tail) {
        let reg = (u32::from(b & 1) << (CONSTRAINT_LENGTH - 1)) | state;
        let (c0, c1) = conv_outputs(reg);
        out.push(c0);
        out.push(c1);
        state = reg >> 1;
    }
    out
}

fn qpsk_point(b0: bool, b1: bool) -> Complex64 {
    let re = if b1 { -FRAC_1_SQRT_2 } else { FRAC_1_SQRT_2 };
    let im = if b0 { -FRAC_1_SQRT_2 } else { FRAC_1_SQRT_2 };
    Complex64::new(re, im)
}

/// Gray QPSK: the first bit of each pair sets the imaginary sign, the
/// second the real sign.
pub fn qpsk_map(bits: &[u8]) -> Result<Vec<Complex64>> {
    if !bits.len().is_multiple_of(2) {
        return Err(Error::OddLength(bits.len()));
    }
    Ok(bits.chunks_exact(2).map(|p| qpsk_point(p[0] != 0, p[1] != 0)).collect())
}

/// Synthesizes one block with its cyclic prefix and postfix.
pub fn build_ofdm_block(data_syms: &[Complex64], layout: &PilotLayout, cfg: &OfdmConfig) -> Result<BasebandSignal> {
    if data_syms.len() != layout.data_count() {
        return Err(Error::SymbolCount {
            expected: layout.data_count(),
            got: data_syms.len(),
        });
    }
    let n = cfg.fft_size;
    let mut spec = vec![ZERO; n];
    for (k, s) in layout.data_indices.iter().zip(data_syms) {
        spec[fft::bin_index(*k, n)] = *s;
    }
    for (k, p) in layout.pilot_indices.iter().zip(&layout.pilot_symbols) {
        spec[fft::bin_index(*k, n)] = *p;
    }
    fft::inverse(&mut spec);
    let gain = cfg.ofdm_rms / (cfg.subcarriers as f64).sqrt();
    spec.iter_mut().for_each(|v| *v *= gain);

    let (pre, post) = (cfg.prefix_len(), cfg.postfix_len());
    let mut block = Vec::with_capacity(pre + n + post);
    block.extend_from_slice(&spec[n - pre..]);
    block.extend_from_slice(&spec);
    block.extend_from_slice(&spec[..post]);
    Ok(BasebandSignal::from_parts(block, cfg.sample_rate))
}

/// Unit-amplitude chirp sweeping `f_low..f_high`, centred on `f_c`.
pub fn make_lfm(cfg: &OfdmConfig) -> BasebandSignal {
    let fs = cfg.sample_rate;
    let b = cfg.lfm_bandwidth();
    let f0 = cfg.f_low - cfg.f_c;
    let rate = b / cfg.lfm_duration;
    let s = (0..cfg.lfm_len())
        .map(|n| {
            let t = n as f64 / fs;
            Complex64::from_polar(1.0, 2.0 * PI * (f0 * t + 0.5 * rate * t * t))
        })
        .collect();
    BasebandSignal::from_parts(s, fs)
}

/// Unit-amplitude tone at `cw_freq`, expressed at baseband.
pub fn make_cw(cfg: &OfdmConfig) -> BasebandSignal {
    let fs = cfg.sample_rate;
    let f = cfg.cw_freq - cfg.f_c;
    let s = (0..cfg.cw_len())
        .map(|n| Complex64::from_polar(1.0, 2.0 * PI * f * n as f64 / fs))
        .collect();
    BasebandSignal::from_parts(s, fs)
}

/// Coded bits one frame can carry.
pub fn frame_capacity(cfg: &OfdmConfig, layout: &PilotLayout) -> usize {
    cfg.blocks_per_frame * layout.data_count() * 2
}

/// Largest payload whose coded form fits in one frame.
pub fn max_payload_bits(cfg: &OfdmConfig, layout: &PilotLayout) -> usize {
    (frame_capacity(cfg, layout) / 2).saturating_sub(CONSTRAINT_LENGTH - 1)
}

/// Assembles LFM, guard, CW, guard and the OFDM blocks.
pub fn build_frame(
    payload_bits: &[u8],
    cfg: &OfdmConfig,
    pilots: &PilotLayout,
) -> Result<(BasebandSignal, FrameLayout, FrameReference)> {
    cfg.validate()?;
    let capacity = frame_capacity(cfg, pilots);
    let mut coded = if payload_bits.is_empty() {
        Vec::new()
    } else {
        conv_encode(payload_bits)
    };
    if coded.len() > capacity {
        return Err(Error::PayloadOverflow {
            required: coded.len(),
            available: capacity,
        });
    }
    coded.resize(capacity, 0);

    let layout = FrameLayout::new(cfg);
    let mut frame = vec![ZERO; layout.total_len()];
    frame[layout.lfm.offset..layout.lfm.end()].copy_from_slice(make_lfm(cfg).samples());
    frame[layout.cw.offset..layout.cw.end()].copy_from_slice(make_cw(cfg).samples());

    let per_block = pilots.data_count() * 2;
    let mut block_symbols = Vec::with_capacity(cfg.blocks_per_frame);
    for (seg, bits) in layout.blocks.iter().zip(coded.chunks_exact(per_block)) {
        let syms = qpsk_map(bits)?;
        let block = build_ofdm_block(&syms, pilots, cfg)?;
        frame[seg.offset..seg.end()].copy_from_slice(block.samples());
        block_symbols.push(syms);
    }
    let reference = FrameReference {
        payload_bits: payload_bits.to_vec(),
        coded_bits: coded,
        block_symbols,
    };
    Ok((BasebandSignal::from_parts(frame, cfg.sample_rate), layout, reference))
}

/// Sidecar written next to a dumped frame so receivers can run from files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameManifest {
    pub config_hash: String,
    pub payload_seed: u64,
    pub payload_bits: usize,
    pub config: OfdmConfig,
    pub layout: FrameLayout,
}

/// Hex SHA-256 of any serializable value's TOML form.
pub fn config_hash<T: Serialize>(value: &T) -> String {
    use sha2::{Digest, Sha256};
    let text = toml::to_string(value).expect("configuration serializes to TOML");
    Sha256::digest(text.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Seeded pseudorandom payload.
pub fn random_bits(count: usize, rng: &mut impl Rng) -> Vec<u8> {
    (0..count).map(|_| rng.random_range(0..2u8)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{argmax_abs, cross_correlate};
    use proptest::prelude::*;

    fn cfg(spacing: usize, blocks: usize) -> OfdmConfig {
        OfdmConfig {
            pilot_spacing: spacing,
            blocks_per_frame: blocks,
            ..OfdmConfig::default()
        }
    }

    fn demod_body(body: &[Complex64], cfg: &OfdmConfig, k: i64) -> Complex64 {
        let spec = fft::spectrum(body, cfg.fft_size);
        spec[fft::bin_index(k, cfg.fft_size)] * (cfg.subcarriers as f64).sqrt() / (cfg.ofdm_rms * cfg.fft_size as f64)
    }

    #[test]
    fn default_constants() {
        let c = OfdmConfig::default();
        c.validate().unwrap();
        assert!((c.subcarrier_spacing() - 5.859_375).abs() < 1e-12);
        assert!((c.symbol_duration() * 1e3 - 170.666_666).abs() < 1e-3);
        assert_eq!(c.block_len(), 2400 + 8192 + 2400);
        assert_eq!(c.lfm_len(), 1920);
    }

    #[test]
    fn default_subcarrier_count_is_largest_fit() {
        let c = OfdmConfig::default();
        let bigger = OfdmConfig {
            subcarriers: c.subcarriers + 2,
            ..c.clone()
        };
        assert!(bigger.validate().is_err());
    }

    #[test]
    fn pilot_layout_partitions_band() {
        for spacing in [3, 5] {
            let c = cfg(spacing, 1);
            let p = PilotLayout::new(&c);
            let mut all: Vec<i64> = p.pilot_indices.iter().chain(&p.data_indices).copied().collect();
            all.sort();
            assert_eq!(all, c.subcarrier_indices().collect::<Vec<_>>());
            assert_eq!(p.pilot_count() + p.data_count(), c.subcarriers);
            assert!(p.pilot_symbols.iter().all(|s| (s.norm() - 1.0).abs() < 1e-12));
        }
        let p = PilotLayout::new(&cfg(3, 1));
        assert_eq!(p.pilot_count(), 341);
        // one pilot then three data subcarriers
        assert_eq!(p.pilot_indices[1] - p.pilot_indices[0], 4);
        assert_eq!(PilotLayout::new(&cfg(5, 1)).pilot_count(), 228);
    }

    #[test]
    fn encoder_zero_input() {
        let out = conv_encode(&[0; 100]);
        assert_eq!(out.len(), 212);
        assert!(out.iter().all(|b| *b == 0));
    }

    #[test]
    fn encoder_impulse_response_matches_generators() {
        let out = conv_encode(&[1]);
        // Output pair j reads bit (6 - j) of each generator.
        let want: Vec<u8> = (0..7)
            .flat_map(|j| [(0o133u32 >> (6 - j)) & 1, (0o171u32 >> (6 - j)) & 1])
            .map(|b| b as u8)
            .collect();
        assert_eq!(out, want);
        assert_eq!(&out[..6], &[1, 1, 0, 1, 1, 1]);
    }

    #[test]
    fn qpsk_table() {
        let s = qpsk_map(&[0, 0, 0, 1, 1, 1, 1, 0]).unwrap();
        let h = FRAC_1_SQRT_2;
        assert_eq!(
            s,
            vec![
                Complex64::new(h, h),
                Complex64::new(-h, h),
                Complex64::new(-h, -h),
                Complex64::new(h, -h)
            ]
        );
        assert!(matches!(qpsk_map(&[1]), Err(Error::OddLength(1))));
    }

    #[test]
    fn single_subcarrier_block_is_constant() {
        let c = OfdmConfig {
            subcarriers: 2,
            ..cfg(1, 1)
        };
        // k = -1 is the pilot, k = 0 carries the data symbol.
        let mut p = PilotLayout::new(&c);
        assert_eq!(p.data_indices, vec![0]);
        p.pilot_symbols = vec![ZERO];
        let one = Complex64::new(1.0, 0.0);
        let block = build_ofdm_block(&[one], &p, &c).unwrap();
        let level = c.ofdm_rms / 2f64.sqrt();
        assert_eq!(block.len(), c.block_len());
        assert!(block
            .samples()
            .iter()
            .all(|v| (v - Complex64::new(level, 0.0)).norm() < 1e-12));
    }

    #[test]
    fn block_round_trip_and_cyclic_copies() {
        let c = cfg(5, 1);
        let p = PilotLayout::new(&c);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let syms = qpsk_map(&random_bits(2 * p.data_count(), &mut rng)).unwrap();
        let block = build_ofdm_block(&syms, &p, &c).unwrap();
        let x = block.samples();
        let (pre, n, post) = (c.prefix_len(), c.fft_size, c.postfix_len());
        assert_eq!(&x[..pre], &x[n..n + pre]);
        assert_eq!(&x[pre + n..], &x[pre..pre + post]);
        let body = &x[pre..pre + n];
        for (k, s) in p.data_indices.iter().zip(&syms) {
            assert!((demod_body(body, &c, *k) - s).norm() <= 1e-9);
        }
        let spec = fft::spectrum(body, n);
        let used: std::collections::HashSet<usize> = c.subcarrier_indices().map(|k| fft::bin_index(k, n)).collect();
        for (i, v) in spec.iter().enumerate() {
            if !used.contains(&i) {
                assert!(v.norm() < 1e-9);
            }
        }
        let body_power = crate::signal::energy(body) / n as f64;
        assert!((body_power - c.ofdm_rms * c.ofdm_rms).abs() < 1e-9);
    }

    #[test]
    fn symbol_count_mismatch() {
        let c = cfg(3, 1);
        let p = PilotLayout::new(&c);
        assert!(matches!(
            build_ofdm_block(&[ZERO; 3], &p, &c),
            Err(Error::SymbolCount { got: 3, .. })
        ));
    }

    #[test]
    fn lfm_sweep_endpoints_and_amplitude() {
        let c = OfdmConfig::default();
        let x = make_lfm(&c);
        assert!(x.samples().iter().all(|v| (v.norm() - 1.0).abs() < 1e-12));
        let inst = |n: usize| {
            let d = x.samples()[n + 1] * x.samples()[n].conj();
            d.arg() * c.sample_rate / (2.0 * PI)
        };
        // the sweep moves rate / fs Hz per sample; allow two samples of slack
        let slack = 2.0 * c.lfm_bandwidth() / c.lfm_duration / c.sample_rate;
        assert!((inst(0) + 4_000.0).abs() < slack);
        assert!((inst(x.len() - 2) - 4_000.0).abs() < slack);
    }

    #[test]
    fn lfm_first_null_near_inverse_bandwidth() {
        let c = OfdmConfig::default();
        let x = make_lfm(&c);
        let r = cross_correlate(&x, &x).unwrap();
        let mid = x.len() - 1;
        let mag: Vec<f64> = r.samples().iter().map(|v| v.norm()).collect();
        let first_null = (1..50).find(|&i| mag[mid + i] < mag[mid + i + 1]).unwrap();
        let dt = first_null as f64 / c.sample_rate;
        let expected = 1.0 / c.lfm_bandwidth();
        assert!((dt - expected).abs() <= 1.0 / c.sample_rate, "null at {dt}");
    }

    #[test]
    fn cw_peak_at_offset() {
        let c = OfdmConfig {
            cw_freq: 8_300.0,
            ..OfdmConfig::default()
        };
        let x = make_cw(&c);
        let n = 1 << 16;
        let spec = fft::spectrum(x.samples(), n);
        let k = argmax_abs(&spec).unwrap();
        let f = k as f64 * c.sample_rate / n as f64;
        assert!((f - 300.0).abs() < c.subcarrier_spacing() / 2.0);
    }

    #[test]
    fn frame_layout_arithmetic() {
        let c = cfg(5, 3);
        let p = PilotLayout::new(&c);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let bits = random_bits(max_payload_bits(&c, &p), &mut rng);
        let (frame, layout, reference) = build_frame(&bits, &c, &p).unwrap();
        let want = c.lfm_len() + 2 * c.guard_len() + c.cw_len() + 3 * c.block_len();
        assert_eq!(frame.len(), want);
        assert_eq!(layout.total_len(), want);
        assert_eq!(reference.block_symbols.len(), 3);
        assert_eq!(reference.coded_bits.len(), frame_capacity(&c, &p));
        assert_eq!(max_payload_bits(&c, &p), 3402);
        for w in layout.blocks.windows(2) {
            assert_eq!(w[0].end(), w[1].offset);
        }
        let lfm = frame.window(layout.lfm.offset as i64, layout.lfm.len);
        let r = cross_correlate(&lfm, &make_lfm(&c)).unwrap();
        assert_eq!(argmax_abs(r.samples()).unwrap(), c.lfm_len() - 1);
    }

    #[test]
    fn overflow_and_empty_payload() {
        let c = cfg(3, 1);
        let p = PilotLayout::new(&c);
        let too_many = vec![0u8; max_payload_bits(&c, &p) + 1];
        assert!(matches!(
            build_frame(&too_many, &c, &p),
            Err(Error::PayloadOverflow { .. })
        ));
        let (_, _, reference) = build_frame(&[], &c, &p).unwrap();
        let zero = qpsk_map(&[0, 0]).unwrap()[0];
        assert!(reference.block_symbols[0].iter().all(|s| *s == zero));
    }

    #[test]
    fn config_hash_is_stable_and_sensitive() {
        let a = OfdmConfig::default();
        assert_eq!(config_hash(&a), config_hash(&a.clone()));
        assert_eq!(config_hash(&a).len(), 64);
        assert_ne!(config_hash(&a), config_hash(&cfg(5, 1)));
    }

    proptest! {
        #[test]
        fn encoder_is_linear(pairs in prop::collection::vec((0u8..2, 0u8..2), 1..200)) {
            let a: Vec<u8> = pairs.iter().map(|p| p.0).collect();
            let b: Vec<u8> = pairs.iter().map(|p| p.1).collect();
            let x: Vec<u8> = pairs.iter().map(|p| p.0 ^ p.1).collect();
            let sum: Vec<u8> = conv_encode(&a).iter().zip(conv_encode(&b)).map(|(p, q)| p ^ q).collect();
            prop_assert_eq!(conv_encode(&x), sum);
        }

        #[test]
        fn qpsk_is_unit_energy(bits in prop::collection::vec(0u8..2, 0..64).prop_map(|mut v| { v.truncate(v.len() & !1); v })) {
            for s in qpsk_map(&bits).unwrap() {
                prop_assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
            }
        }
    }
}
