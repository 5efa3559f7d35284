//! Binary and CSV persistence for baseband signals.
//!
//! Binary layout, all little-endian: the 8-byte magic `TROFDMS1`, the
//! sample rate as `f64`, the sample count as `u64`, then interleaved
//! `f64` real/imaginary pairs.

use std::fs;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;

use super::BasebandSignal;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"TROFDMS1";
const HEADER: usize = 24;

pub fn encode(x: &BasebandSignal) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER + 16 * x.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&x.sample_rate().to_le_bytes());
    out.extend_from_slice(&(x.len() as u64).to_le_bytes());
    for s in x.samples() {
        out.extend_from_slice(&s.re.to_le_bytes());
        out.extend_from_slice(&s.im.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8], path: &Path) -> Result<BasebandSignal> {
    if bytes.len() < HEADER || &bytes[..8] != MAGIC {
        return Err(Error::format(path, "missing signal magic"));
    }
    let f64_at = |i: usize| f64::from_le_bytes(bytes[i..i + 8].try_into().unwrap());
    let rate = f64_at(8);
    let count = u64::from_le_bytes(bytes[16..24].try_into().unwrap()) as usize;
    let expected = count
        .checked_mul(16)
        .and_then(|b| b.checked_add(HEADER))
        .ok_or_else(|| Error::format(path, "sample count overflows"))?;
    if bytes.len() != expected {
        return Err(Error::format(
            path,
            format!("expected {expected} bytes for {count} samples, found {}", bytes.len()),
        ));
    }
    let samples = (0..count)
        .map(|i| {
            let at = HEADER + 16 * i;
            Complex64::new(f64_at(at), f64_at(at + 8))
        })
        .collect();
    BasebandSignal::new(samples, rate).map_err(|e| Error::format(path, e.to_string()))
}

pub fn save(x: &BasebandSignal, path: &Path) -> Result<()> {
    fs::write(path, encode(x)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<BasebandSignal> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, path)
}

/// Debug dump with columns `index,re,im`.
pub fn save_csv(x: &BasebandSignal, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
    let csv_err = |e: csv::Error| Error::format(path, e.to_string());
    w.write_record(["index", "re", "im"]).map_err(csv_err)?;
    for (i, s) in x.samples().iter().enumerate() {
        w.write_record([i.to_string(), s.re.to_string(), s.im.to_string()])
            .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes `(x, y)` rows under a two-column header, used for diagnostic traces.
pub fn save_trace(path: &Path, header: [&str; 2], rows: impl IntoIterator<Item = (f64, f64)>) -> Result<()> {
    let mut out = format!("{},{}\n", header[0], header[1]);
    for (a, b) in rows {
        out.push_str(&format!("{a},{b}\n"));
    }
    fs::File::create(path)
        .and_then(|mut f| f.write_all(out.as_bytes()))
        .map_err(|e| Error::io(path, e))
}
