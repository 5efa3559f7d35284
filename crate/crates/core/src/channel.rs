//! Sparse multipath channel with per-path Doppler, and calibrated noise.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::signal::{BasebandSignal, KaiserSinc};

/// Default ceiling on any single path delay.
pub const DEFAULT_MAX_DELAY: f64 = 0.200;
/// Largest Doppler rate for which the linear-delay model is trusted.
pub const MAX_DOPPLER: f64 = 1e-2;
/// Delays this close to a whole sample are applied as exact shifts.
const INTEGER_SNAP: f64 = 1e-6;

/// One propagation path at equivalent baseband.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arrival {
    /// Arrival delay in seconds.
    pub delay: f64,
    /// Complex amplitude, carrier phase already folded in.
    pub gain: Complex64,
    /// Time-compression rate.
    pub doppler: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ChannelTapList {
    pub paths: Vec<Arrival>,
}

impl ChannelTapList {
    pub fn new(paths: Vec<Arrival>) -> Result<Self> {
        let h = Self { paths };
        h.validate()?;
        Ok(h)
    }

    /// Single unit path with no delay or Doppler.
    pub fn identity() -> Self {
        Self {
            paths: vec![Arrival {
                delay: 0.0,
                gain: Complex64::new(1.0, 0.0),
                doppler: 0.0,
            }],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.paths.is_empty() {
            return Err(Error::NoPaths);
        }
        for (i, p) in self.paths.iter().enumerate() {
            if !(p.delay >= 0.0 && p.delay.is_finite()) {
                return Err(Error::Channel(format!("path {i}: delay must be finite and >= 0")));
            }
            if !(p.gain.re.is_finite() && p.gain.im.is_finite()) {
                return Err(Error::Channel(format!("path {i}: non-finite amplitude")));
            }
            if !(p.doppler.abs() < MAX_DOPPLER) {
                return Err(Error::Channel(format!(
                    "path {i}: Doppler rate {} outside ±{MAX_DOPPLER}",
                    p.doppler
                )));
            }
            for q in &self.paths[..i] {
                if q.delay == p.delay && q.doppler == p.doppler {
                    return Err(Error::Channel(format!("path {i} duplicates an earlier path")));
                }
            }
        }
        Ok(())
    }

    pub fn max_delay(&self) -> f64 {
        self.paths.iter().map(|p| p.delay).fold(0.0, f64::max)
    }

    pub fn min_delay(&self) -> f64 {
        self.paths.iter().map(|p| p.delay).fold(f64::INFINITY, f64::min)
    }

    /// Spread between the earliest and latest arrival.
    pub fn delay_spread(&self) -> f64 {
        if self.paths.is_empty() {
            0.0
        } else {
            self.max_delay() - self.min_delay()
        }
    }

    pub fn total_power(&self) -> f64 {
        self.paths.iter().map(|p| p.gain.norm_sqr()).sum()
    }

    pub fn is_static(&self) -> bool {
        self.paths.iter().all(|p| p.doppler == 0.0)
    }

    /// Same paths with every Doppler rate replaced by `a`.
    pub fn with_uniform_doppler(&self, a: f64) -> Self {
        Self {
            paths: self.paths.iter().map(|p| Arrival { doppler: a, ..*p }).collect(),
        }
    }

    /// Impulse response sampled on the integer grid; fractional delays are
    /// spread with the interpolation kernel. Ignores Doppler.
    pub fn sampled_response(&self, sample_rate: f64) -> BasebandSignal {
        let kernel = KaiserSinc::shared();
        let hw = (kernel.taps() / 2) as f64;
        let len = (self.max_delay() * sample_rate + hw).ceil() as usize + 1;
        let mut h = vec![Complex64::new(0.0, 0.0); len];
        let impulse = [Complex64::new(1.0, 0.0)];
        for p in &self.paths {
            let d = p.delay * sample_rate;
            for (n, v) in h.iter_mut().enumerate() {
                *v += p.gain * kernel.value_at(&impulse, n as f64 - snap(d));
            }
        }
        BasebandSignal::from_parts(h, sample_rate)
    }
}

fn snap(d: f64) -> f64 {
    if (d - d.round()).abs() < INTEGER_SNAP {
        d.round()
    } else {
        d
    }
}

/// Applies the channel with the default delay ceiling.
pub fn apply_channel(x: &BasebandSignal, h: &ChannelTapList, f_c: f64) -> Result<BasebandSignal> {
    apply_channel_limited(x, h, f_c, DEFAULT_MAX_DELAY)
}

/// `y(t) = Σ A_p · x((1 + a_p)t − τ_p) · e^{j2π f_c a_p t}`.
///
/// The carrier term is the baseband image of the passband time scaling;
/// without it a Doppler-shifted CW tone would stay at DC.
pub fn apply_channel_limited(
    x: &BasebandSignal,
    h: &ChannelTapList,
    f_c: f64,
    max_delay: f64,
) -> Result<BasebandSignal> {
    h.validate()?;
    if h.max_delay() > max_delay {
        return Err(Error::DelayTooLarge {
            delay: h.max_delay(),
            max: max_delay,
        });
    }
    let fs = x.sample_rate();
    let n = x.len();
    if n == 0 {
        return Ok(x.clone());
    }
    let kernel = KaiserSinc::shared();
    let hw = kernel.taps() / 2;
    let out_len = h
        .paths
        .iter()
        .map(|p| (((n - 1) as f64 + p.delay * fs) / (1.0 + p.doppler)).ceil() as usize + hw + 1)
        .max()
        .unwrap_or(n);
    let mut y = vec![Complex64::new(0.0, 0.0); out_len];
    let src = x.samples();
    for p in &h.paths {
        let d = snap(p.delay * fs);
        if p.doppler == 0.0 && d.fract() == 0.0 {
            let shift = d as usize;
            for (o, s) in y[shift..].iter_mut().zip(src) {
                *o += p.gain * s;
            }
            continue;
        }
        let scale = 1.0 + p.doppler;
        let w = 2.0 * PI * f_c * p.doppler / fs;
        for (m, o) in y.iter_mut().enumerate() {
            let pos = m as f64 * scale - d;
            if pos < -(hw as f64) || pos > (n + hw) as f64 {
                continue;
            }
            let v = kernel.value_at(src, pos);
            if p.doppler == 0.0 {
                *o += p.gain * v;
            } else {
                *o += p.gain * v * Complex64::from_polar(1.0, w * m as f64);
            }
        }
    }
    Ok(BasebandSignal::from_parts(y, fs))
}

/// Additive-noise settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    /// In-band SNR; `f64::INFINITY` disables noise.
    pub snr_db: f64,
    pub seed: u64,
    /// Width of the band over which SNR is defined, Hz.
    pub bandwidth: f64,
    /// Signal power the SNR refers to; `None` uses the mean power of the input.
    pub reference_power: Option<f64>,
}

impl NoiseSpec {
    pub fn new(snr_db: f64, seed: u64, bandwidth: f64) -> Self {
        Self {
            snr_db,
            seed,
            bandwidth,
            reference_power: None,
        }
    }

    /// Per-sample variance of white noise whose in-band power is
    /// `signal_power / snr`.
    pub fn sample_variance(&self, signal_power: f64, sample_rate: f64) -> f64 {
        if self.snr_db == f64::INFINITY {
            return 0.0;
        }
        let snr = 10f64.powf(self.snr_db / 10.0);
        signal_power * (sample_rate / self.bandwidth.min(sample_rate)) / snr
    }
}

/// Adds circular complex white Gaussian noise.
pub fn add_noise(x: &BasebandSignal, spec: &NoiseSpec) -> Result<BasebandSignal> {
    if spec.snr_db.is_nan() || spec.snr_db == f64::NEG_INFINITY {
        return Err(Error::Config(format!(
            "SNR must be finite or +inf, got {}",
            spec.snr_db
        )));
    }
    if !(spec.bandwidth > 0.0) {
        return Err(Error::Config("noise bandwidth must be positive".into()));
    }
    let power = spec.reference_power.unwrap_or_else(|| x.mean_power());
    if x.energy() == 0.0 || !(power > 0.0) {
        return Err(Error::ZeroEnergy);
    }
    if spec.snr_db == f64::INFINITY {
        return Ok(x.clone());
    }
    let sigma = (spec.sample_variance(power, x.sample_rate()) / 2.0).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let samples = x
        .samples()
        .iter()
        .map(|s| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            s + Complex64::new(re, im) * sigma
        })
        .collect();
    Ok(BasebandSignal::from_parts(samples, x.sample_rate()))
}

/// Parses `tau_seconds amp_real amp_imag doppler_rate` rows; `#` starts a comment.
pub fn parse_taps(text: &str) -> Result<ChannelTapList> {
    let mut paths = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(Error::TapFile {
                line: i + 1,
                msg: format!("expected 4 fields, found {}", fields.len()),
            });
        }
        let mut nums = [0.0; 4];
        for (slot, f) in nums.iter_mut().zip(&fields) {
            *slot = f.parse().map_err(|_| Error::TapFile {
                line: i + 1,
                msg: format!("not a number: {f:?}"),
            })?;
        }
        paths.push(Arrival {
            delay: nums[0],
            gain: Complex64::new(nums[1], nums[2]),
            doppler: nums[3],
        });
    }
    let h = ChannelTapList { paths };
    h.validate()?;
    Ok(h)
}

pub fn format_taps(h: &ChannelTapList) -> String {
    let mut out = String::from("# tau_seconds amp_real amp_imag doppler_rate\n");
    for p in &h.paths {
        let _ = writeln!(out, "{} {} {} {}", p.delay, p.gain.re, p.gain.im, p.doppler);
    }
    out
}

pub fn load_taps(path: &Path) -> Result<ChannelTapList> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_taps(&text)
}

pub fn save_taps(h: &ChannelTapList, path: &Path) -> Result<()> {
    fs::write(path, format_taps(h)).map_err(|e| Error::io(path, e))
}

/// The bundled eight-path reference channel.
pub fn reference_channel() -> ChannelTapList {
    parse_taps(REFERENCE_TAPS).expect("bundled reference channel is valid")
}

pub const REFERENCE_TAPS: &str = include_str!("../data/reference_channel.taps");
