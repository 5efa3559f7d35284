//! Monte-Carlo experiment orchestration.
//!
//! Every trial builds one random frame, passes it through the channel once
//! and runs all requested receiver modes on that same buffer. Sweeps
//! aggregate exact error counts per `(snr, pilot spacing, mode)` point and
//! write a CSV whose first line records the hash of the experiment.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::channel::{add_noise, apply_channel, load_taps, reference_channel, Arrival, ChannelTapList, NoiseSpec};
use crate::error::{Error, Result};
use crate::receiver::{
    band_limit, bit_errors, compensated_front_end, decide, demodulate, esnr_db, front_end, genie_estimates, Mode,
    ReceiverConfig,
};
use crate::signal::BasebandSignal;
use crate::tx::{
    build_frame, config_hash, max_payload_bits, random_bits, FrameLayout, FrameReference, OfdmConfig, PilotLayout,
};
use crate::Complex64;

/// Where the channel taps come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ChannelSpec {
    /// Bundled eight-path reference channel.
    Reference,
    /// Single unit path, no delay.
    Identity,
    /// Tap file on disk.
    File { path: PathBuf },
    /// Rows of `[delay_seconds, gain_re, gain_im, doppler_rate]`.
    Inline { taps: Vec<[f64; 4]> },
}

impl ChannelSpec {
    pub fn resolve(&self) -> Result<ChannelTapList> {
        match self {
            ChannelSpec::Reference => Ok(reference_channel()),
            ChannelSpec::Identity => Ok(ChannelTapList::identity()),
            ChannelSpec::File { path } => load_taps(path),
            ChannelSpec::Inline { taps } => ChannelTapList::new(
                taps.iter()
                    .map(|[delay, re, im, doppler]| Arrival {
                        delay: *delay,
                        gain: Complex64::new(*re, *im),
                        doppler: *doppler,
                    })
                    .collect(),
            ),
        }
    }
}

fn default_modes() -> Vec<Mode> {
    Mode::ALL.to_vec()
}

/// A full experiment grid. Loaded from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub base_seed: u64,
    pub trials_per_point: usize,
    pub snr_grid: Vec<f64>,
    pub pilot_spacings: Vec<usize>,
    #[serde(default = "default_modes")]
    pub modes: Vec<Mode>,
    /// Payload length; defaults to the largest that fits the frame.
    #[serde(default)]
    pub payload_bits: Option<usize>,
    /// Accept cyclic extensions shorter than the channel spread.
    #[serde(default)]
    pub allow_short_extensions: bool,
    #[serde(default)]
    pub ofdm: OfdmConfig,
    pub channel: ChannelSpec,
}

impl ExperimentSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::format(path, e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("experiment serializes to TOML")
    }

    pub fn hash(&self) -> String {
        config_hash(self)
    }

    /// Configuration for one pilot spacing.
    pub fn ofdm_for(&self, spacing: usize) -> OfdmConfig {
        OfdmConfig {
            pilot_spacing: spacing,
            ..self.ofdm.clone()
        }
    }

    pub fn validate(&self) -> Result<ChannelTapList> {
        if self.trials_per_point == 0 {
            return Err(Error::Config("trials_per_point must be at least 1".into()));
        }
        if self.snr_grid.is_empty() || self.pilot_spacings.is_empty() || self.modes.is_empty() {
            return Err(Error::Config(
                "snr_grid, pilot_spacings and modes must be nonempty".into(),
            ));
        }
        if self.snr_grid.iter().any(|s| s.is_nan() || *s == f64::NEG_INFINITY) {
            return Err(Error::Config("SNR values must be finite or +inf".into()));
        }
        let channel = self.channel.resolve()?;
        let spread = channel.delay_spread();
        for &spacing in &self.pilot_spacings {
            let cfg = self.ofdm_for(spacing);
            cfg.validate()?;
            if !self.allow_short_extensions && (cfg.prefix < spread || cfg.postfix < spread) {
                return Err(Error::Config(format!(
                    "prefix {} s and postfix {} s must cover the {spread} s channel spread",
                    cfg.prefix, cfg.postfix
                )));
            }
            let available = max_payload_bits(&cfg, &PilotLayout::new(&cfg));
            if let Some(bits) = self.payload_bits {
                if bits > available {
                    return Err(Error::PayloadOverflow {
                        required: bits,
                        available,
                    });
                }
            }
        }
        Ok(channel)
    }

    /// Grid points in output order: pilot spacing outer, SNR inner.
    pub fn points(&self) -> Vec<GridPoint> {
        self.pilot_spacings
            .iter()
            .flat_map(|&spacing| self.snr_grid.iter().map(move |&snr_db| (spacing, snr_db)))
            .enumerate()
            .map(|(index, (pilot_spacing, snr_db))| GridPoint {
                index,
                snr_db,
                pilot_spacing,
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub index: usize,
    pub snr_db: f64,
    pub pilot_spacing: usize,
}

/// Seed of one trial: `base ⊕ (point << 32) ⊕ trial`.
pub fn trial_seed(base_seed: u64, point_index: usize, trial_index: usize) -> u64 {
    base_seed ^ ((point_index as u64) << 32) ^ trial_index as u64
}

/// Outcome of one mode within a trial.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeReport {
    pub mode: Mode,
    pub uncoded_errors: u64,
    pub uncoded_bits: u64,
    pub coded_errors: u64,
    pub coded_bits: u64,
    /// Decoded errors when the decoder only sees hard decisions.
    pub coded_errors_hard: u64,
    pub esnr_db: f64,
    pub erasures: usize,
    pub solver_iters: Option<usize>,
    pub support_len: Option<usize>,
    pub converged: Option<bool>,
    pub focus_index: Option<usize>,
    pub warnings: Vec<String>,
    /// Checksum of the received buffer this mode consumed.
    pub buffer_checksum: String,
    pub failure: Option<String>,
}

impl ModeReport {
    fn failed(mode: Mode, checksum: String, reason: String) -> Self {
        Self {
            mode,
            uncoded_errors: 0,
            uncoded_bits: 0,
            coded_errors: 0,
            coded_bits: 0,
            coded_errors_hard: 0,
            esnr_db: f64::NAN,
            erasures: 0,
            solver_iters: None,
            support_len: None,
            converged: None,
            focus_index: None,
            warnings: Vec::new(),
            buffer_checksum: checksum,
            failure: Some(reason),
        }
    }

    pub fn uncoded_ber(&self) -> f64 {
        rate(self.uncoded_errors, self.uncoded_bits)
    }

    pub fn coded_ber(&self) -> f64 {
        rate(self.coded_errors, self.coded_bits)
    }
}

fn rate(errors: u64, bits: u64) -> f64 {
    if bits == 0 {
        0.0
    } else {
        errors as f64 / bits as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialReport {
    pub seed: u64,
    pub snr_db: f64,
    /// Input SNR measured by the receiver front end.
    pub isnr_db: f64,
    pub a_hat: f64,
    pub buffer_checksum: String,
    pub modes: Vec<ModeReport>,
}

impl TrialReport {
    pub fn mode(&self, mode: Mode) -> Option<&ModeReport> {
        self.modes.iter().find(|m| m.mode == mode)
    }
}

/// Transmitted frame and the buffer that reached the receiver.
#[derive(Debug, Clone)]
pub struct TrialBuffers {
    pub cfg: OfdmConfig,
    pub pilots: PilotLayout,
    pub layout: FrameLayout,
    pub reference: FrameReference,
    /// Channel output before noise.
    pub clean: BasebandSignal,
    pub received: BasebandSignal,
}

/// Builds a frame, pads it with one guard of silence on each side, applies
/// the channel and adds noise referenced to the received OFDM power.
pub fn make_trial_buffers(
    cfg: &OfdmConfig,
    channel: &ChannelTapList,
    snr_db: f64,
    payload_bits: Option<usize>,
    seed: u64,
) -> Result<TrialBuffers> {
    let pilots = PilotLayout::new(cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = payload_bits.unwrap_or_else(|| max_payload_bits(cfg, &pilots));
    let payload = random_bits(count, &mut rng);
    let noise_seed = rng.next_u64();
    let (frame, layout, reference) = build_frame(&payload, cfg, &pilots)?;
    let (clean, received) = transmit(&frame, &layout, cfg, channel, snr_db, noise_seed)?;
    Ok(TrialBuffers {
        cfg: cfg.clone(),
        pilots,
        layout,
        reference,
        clean,
        received,
    })
}

/// Pads `frame` with one guard of silence on each side, applies the
/// channel and adds noise whose in-band power sits `snr_db` below the
/// received OFDM segment. Returns the noiseless and noisy buffers.
pub fn transmit(
    frame: &BasebandSignal,
    layout: &FrameLayout,
    cfg: &OfdmConfig,
    channel: &ChannelTapList,
    snr_db: f64,
    noise_seed: u64,
) -> Result<(BasebandSignal, BasebandSignal)> {
    let pad = cfg.guard_len();
    let mut tx = vec![Complex64::new(0.0, 0.0); pad];
    tx.extend_from_slice(frame.samples());
    tx.resize(tx.len() + pad, Complex64::new(0.0, 0.0));
    let tx = BasebandSignal::new(tx, cfg.sample_rate)?;
    let clean = apply_channel(&tx, channel, cfg.f_c)?;
    let ofdm_len = layout.total_len() - layout.ofdm_start();
    let ofdm_power = clean.window((pad + layout.ofdm_start()) as i64, ofdm_len).mean_power();
    let noise = NoiseSpec {
        reference_power: Some(ofdm_power),
        ..NoiseSpec::new(snr_db, noise_seed, cfg.bandwidth())
    };
    let received = add_noise(&clean, &noise)?;
    Ok((clean, received))
}

/// Hex SHA-256 over the raw sample bits.
pub fn buffer_checksum(x: &BasebandSignal) -> String {
    let mut h = Sha256::new();
    for s in x.samples() {
        h.update(s.re.to_le_bytes());
        h.update(s.im.to_le_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// Runs every requested mode on one set of trial buffers.
pub fn run_modes(buffers: &TrialBuffers, modes: &[Mode], rcfg: &ReceiverConfig, seed: u64, snr_db: f64) -> TrialReport {
    let TrialBuffers {
        cfg,
        pilots,
        layout,
        reference,
        clean,
        received,
    } = buffers;
    let checksum = buffer_checksum(received);
    let mut report = TrialReport {
        seed,
        snr_db,
        isnr_db: f64::NAN,
        a_hat: f64::NAN,
        buffer_checksum: checksum.clone(),
        modes: Vec::with_capacity(modes.len()),
    };
    let fe = match front_end(received, cfg, layout, rcfg) {
        Ok(fe) => fe,
        Err(e) => {
            report.modes = modes
                .iter()
                .map(|&m| ModeReport::failed(m, checksum.clone(), e.to_string()))
                .collect();
            return report;
        }
    };
    report.isnr_db = fe.isnr_db;
    report.a_hat = fe.doppler.a_hat;

    // the true response seen through the same detection and compensation
    let genie = if modes.contains(&Mode::KnownCsi) {
        compensated_front_end(&band_limit(clean, cfg), fe.sync, fe.doppler, cfg, layout, rcfg)
            .and_then(|clean_fe| demodulate(Mode::Notr, &clean_fe, cfg, layout, pilots, rcfg, None))
            .map(|d| genie_estimates(&d.observations, reference, pilots, cfg))
            .ok()
    } else {
        None
    };

    for &mode in modes {
        let consumed = buffer_checksum(received);
        let run = || -> Result<ModeReport> {
            let dem = demodulate(mode, &fe, cfg, layout, pilots, rcfg, genie.as_deref())?;
            let dec = decide(&dem, pilots, reference.payload_bits.len())?;
            let (uncoded_errors, uncoded_bits) = bit_errors(&reference.coded_bits, &dec.coded_hard)?;
            let (coded_errors, coded_bits) = bit_errors(&reference.payload_bits, &dec.payload_soft)?;
            let (coded_errors_hard, _) = bit_errors(&reference.payload_bits, &dec.payload_hard)?;
            let esnr = esnr_db(&dem.observations, &dem.estimates, &reference.block_symbols, pilots)?;
            let cir = dem.diagnostics.cir.as_ref();
            Ok(ModeReport {
                mode,
                uncoded_errors,
                uncoded_bits,
                coded_errors,
                coded_bits,
                coded_errors_hard,
                esnr_db: esnr,
                erasures: dec.erasures,
                solver_iters: cir.map(|c| c.solver_iters),
                support_len: cir.map(|c| c.support.len()),
                converged: cir.map(|c| c.converged),
                focus_index: dem.diagnostics.focus_index,
                warnings: dem.diagnostics.warnings.clone(),
                buffer_checksum: consumed.clone(),
                failure: None,
            })
        };
        report
            .modes
            .push(run().unwrap_or_else(|e| ModeReport::failed(mode, consumed.clone(), e.to_string())));
    }
    report
}

/// One trial at a grid point.
pub fn run_trial(
    spec: &ExperimentSpec,
    channel: &ChannelTapList,
    point: &GridPoint,
    trial_index: usize,
) -> Result<TrialReport> {
    let seed = trial_seed(spec.base_seed, point.index, trial_index);
    let cfg = spec.ofdm_for(point.pilot_spacing);
    let buffers = make_trial_buffers(&cfg, channel, point.snr_db, spec.payload_bits, seed)?;
    let rcfg = ReceiverConfig::new(channel.delay_spread());
    Ok(run_modes(&buffers, &spec.modes, &rcfg, seed, point.snr_db))
}

/// Aggregate for one `(snr, spacing, mode)` row.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSummary {
    pub snr_db: f64,
    pub pilot_spacing: usize,
    pub mode: Mode,
    pub uncoded_errors: u64,
    pub uncoded_bits: u64,
    pub coded_errors: u64,
    pub coded_bits: u64,
    pub coded_errors_hard: u64,
    /// Mean of per-trial ESNR values in dB over successful trials.
    pub mean_esnr_db: f64,
    pub failed_trials: usize,
}

impl PointSummary {
    pub fn uncoded_ber(&self) -> f64 {
        rate(self.uncoded_errors, self.uncoded_bits)
    }

    pub fn coded_ber(&self) -> f64 {
        rate(self.coded_errors, self.coded_bits)
    }

    pub fn coded_ber_hard(&self) -> f64 {
        rate(self.coded_errors_hard, self.coded_bits)
    }
}

/// Sums counts across trials; rates are always recomputed from the sums.
pub fn summarize(point: &GridPoint, mode: Mode, trials: &[TrialReport]) -> PointSummary {
    let mut s = PointSummary {
        snr_db: point.snr_db,
        pilot_spacing: point.pilot_spacing,
        mode,
        uncoded_errors: 0,
        uncoded_bits: 0,
        coded_errors: 0,
        coded_bits: 0,
        coded_errors_hard: 0,
        mean_esnr_db: f64::NAN,
        failed_trials: 0,
    };
    let mut esnr_sum = 0.0;
    let mut esnr_count = 0usize;
    for r in trials.iter().filter_map(|t| t.mode(mode)) {
        if r.failure.is_some() {
            s.failed_trials += 1;
            continue;
        }
        s.uncoded_errors += r.uncoded_errors;
        s.uncoded_bits += r.uncoded_bits;
        s.coded_errors += r.coded_errors;
        s.coded_bits += r.coded_bits;
        s.coded_errors_hard += r.coded_errors_hard;
        esnr_sum += r.esnr_db;
        esnr_count += 1;
    }
    if esnr_count > 0 {
        s.mean_esnr_db = esnr_sum / esnr_count as f64;
    }
    s
}

pub const CSV_COLUMNS: [&str; 11] = [
    "snr_db",
    "pilot_spacing",
    "mode",
    "uncoded_errors",
    "uncoded_bits",
    "coded_errors",
    "coded_bits",
    "uncoded_ber",
    "coded_ber",
    "mean_esnr_db",
    "failed_trials",
];

fn format_f64(v: f64) -> String {
    if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else if v.is_nan() {
        "nan".into()
    } else {
        format!("{v}")
    }
}

fn parse_f64(s: &str) -> Option<f64> {
    match s {
        "inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        "nan" => Some(f64::NAN),
        _ => s.parse().ok(),
    }
}

fn csv_row(s: &PointSummary) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{}",
        format_f64(s.snr_db),
        s.pilot_spacing,
        s.mode,
        s.uncoded_errors,
        s.uncoded_bits,
        s.coded_errors,
        s.coded_bits,
        format_f64(s.uncoded_ber()),
        format_f64(s.coded_ber()),
        format_f64(s.mean_esnr_db),
        s.failed_trials
    )
}

fn csv_header(hash: &str) -> String {
    format!("# config_hash={hash}\n{}\n", CSV_COLUMNS.join(","))
}

/// Results of a sweep: rows for every point and, for points computed in
/// this run, the per-trial reports.
#[derive(Debug, Clone, Default)]
pub struct SweepResult {
    pub rows: Vec<PointSummary>,
    pub trials: BTreeMap<usize, Vec<TrialReport>>,
    /// Points skipped because a previous run already wrote them.
    pub resumed_points: usize,
}

/// Runs the grid. Trials run in parallel; rows are emitted in grid order.
pub fn sweep(spec: &ExperimentSpec) -> Result<SweepResult> {
    sweep_points(spec, &spec.points())
}

fn sweep_points(spec: &ExperimentSpec, points: &[GridPoint]) -> Result<SweepResult> {
    let channel = spec.validate()?;
    let jobs: Vec<(usize, usize)> = points
        .iter()
        .enumerate()
        .flat_map(|(p, _)| (0..spec.trials_per_point).map(move |t| (p, t)))
        .collect();
    let reports: Vec<Result<TrialReport>> = jobs
        .par_iter()
        .map(|&(p, t)| run_trial(spec, &channel, &points[p], t))
        .collect();
    let mut result = SweepResult::default();
    let mut grouped: Vec<Vec<TrialReport>> = vec![Vec::new(); points.len()];
    for ((p, _), r) in jobs.iter().zip(reports) {
        grouped[*p].push(r?);
    }
    for (point, trials) in points.iter().zip(grouped) {
        for &mode in &spec.modes {
            result.rows.push(summarize(point, mode, &trials));
        }
        result.trials.insert(point.index, trials);
    }
    Ok(result)
}

/// Sweep written to `out`. Points whose rows are already present in a CSV
/// with the same experiment hash are kept verbatim and not recomputed; a
/// fully complete file is left untouched.
pub fn sweep_to_csv(spec: &ExperimentSpec, out: &Path) -> Result<SweepResult> {
    let hash = spec.hash();
    let points = spec.points();
    let existing = match fs::read_to_string(out) {
        Ok(text) => completed_points(&text, &hash, spec),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => BTreeMap::new(),
        Err(e) => return Err(Error::io(out, e)),
    };
    let missing: Vec<GridPoint> = points
        .iter()
        .filter(|p| !existing.contains_key(&p.index))
        .copied()
        .collect();
    let mut result = if missing.is_empty() {
        spec.validate()?;
        SweepResult::default()
    } else {
        sweep_points(spec, &missing)?
    };
    result.resumed_points = points.len() - missing.len();
    if missing.is_empty() {
        result.rows = existing.values().flat_map(|(rows, _)| rows.clone()).collect();
        return Ok(result);
    }
    let mut fresh = result.rows.clone().into_iter().peekable();
    let mut text = csv_header(&hash);
    let mut rows = Vec::new();
    for p in &points {
        if let Some((parsed, lines)) = existing.get(&p.index) {
            for l in lines {
                text.push_str(l);
                text.push('\n');
            }
            rows.extend(parsed.iter().cloned());
        } else {
            for _ in &spec.modes {
                let row = fresh.next().expect("one row per mode per computed point");
                text.push_str(&csv_row(&row));
                text.push('\n');
                rows.push(row);
            }
        }
    }
    debug_assert!(fresh.peek().is_none());
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(out, text).map_err(|e| Error::io(out, e))?;
    result.rows = rows;
    Ok(result)
}

/// Parses result rows from CSV text, skipping comment lines.
pub fn parse_csv(text: &str) -> Result<Vec<PointSummary>> {
    let body: String = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| format!("{l}\n"))
        .collect();
    let mut reader = csv::Reader::from_reader(body.as_bytes());
    let headers = reader.headers().map_err(|e| Error::Config(e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != CSV_COLUMNS {
        return Err(Error::Config(format!("unexpected CSV columns {headers:?}")));
    }
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Config(e.to_string()))?;
        let bad = || Error::Config(format!("malformed CSV row {}", i + 1));
        let num = |k: usize| rec.get(k).and_then(|v| v.parse::<u64>().ok()).ok_or_else(bad);
        rows.push(PointSummary {
            snr_db: rec.get(0).and_then(parse_f64).ok_or_else(bad)?,
            pilot_spacing: num(1)? as usize,
            mode: rec.get(2).ok_or_else(bad)?.parse()?,
            uncoded_errors: num(3)?,
            uncoded_bits: num(4)?,
            coded_errors: num(5)?,
            coded_bits: num(6)?,
            coded_errors_hard: 0,
            mean_esnr_db: rec.get(9).and_then(parse_f64).ok_or_else(bad)?,
            failed_trials: num(10)? as usize,
        });
    }
    Ok(rows)
}

/// Point index → (rows, raw lines) for points fully present in `text`.
fn completed_points(
    text: &str,
    hash: &str,
    spec: &ExperimentSpec,
) -> BTreeMap<usize, (Vec<PointSummary>, Vec<String>)> {
    let mut done = BTreeMap::new();
    let mut lines = text.lines();
    if lines.next() != Some(format!("# config_hash={hash}").as_str()) {
        return done;
    }
    let data: Vec<&str> = lines.filter(|l| !l.starts_with('#')).collect();
    let Ok(rows) = parse_csv(&data.join("\n")) else {
        return done;
    };
    let raw = &data[1..];
    for p in spec.points() {
        let picked: Vec<(PointSummary, String)> = spec
            .modes
            .iter()
            .filter_map(|&m| {
                rows.iter()
                    .zip(raw)
                    .find(|(r, _)| r.mode == m && r.pilot_spacing == p.pilot_spacing && r.snr_db == p.snr_db)
                    .map(|(r, l)| (r.clone(), l.to_string()))
            })
            .collect();
        if picked.len() == spec.modes.len() {
            let (r, l): (Vec<_>, Vec<_>) = picked.into_iter().unzip();
            done.insert(p.index, (r, l));
        }
    }
    done
}

/// Human-readable table of a result CSV.
pub fn report(text: &str) -> Result<String> {
    let rows = parse_csv(text)?;
    let hash = text
        .lines()
        .next()
        .and_then(|l| l.strip_prefix("# config_hash="))
        .unwrap_or("unknown");
    let mut out = String::new();
    let _ = writeln!(out, "config {hash}");
    let _ = writeln!(
        out,
        "{:>7} {:>7} {:<10} {:>12} {:>12} {:>10} {:>7}",
        "snr_db", "spacing", "mode", "uncoded_ber", "coded_ber", "esnr_db", "failed"
    );
    for r in &rows {
        let _ = writeln!(
            out,
            "{:>7} {:>7} {:<10} {:>12.4e} {:>12.4e} {:>10.2} {:>7}",
            format_f64(r.snr_db),
            r.pilot_spacing,
            r.mode.name(),
            r.uncoded_ber(),
            r.coded_ber(),
            r.mean_esnr_db,
            r.failed_trials
        );
    }
    Ok(out)
}
