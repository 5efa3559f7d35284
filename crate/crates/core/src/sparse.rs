//! Sparse time-domain channel estimation from the received probe.
//!
//! The received probe is modelled as `y = A h + n` where column `j` of `A`
//! is the transmitted probe delayed by `j` samples. Two estimators are
//! provided: greedy matching pursuit and an ℓ₂–ℓ₁ solver using iterative
//! shrinkage with Barzilai-Borwein steps and continuation on the penalty.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::signal::{conj_reverse, energy, fft, BasebandSignal};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Linear map used by the solvers. Only `apply` and `adjoint` are
/// required; the other methods have generic defaults that structured
/// operators may override with faster equivalents.
pub trait LinearOperator {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    fn apply(&self, x: &[Complex64]) -> Vec<Complex64>;
    fn adjoint(&self, y: &[Complex64]) -> Vec<Complex64>;

    fn column(&self, j: usize) -> Vec<Complex64> {
        let mut e = vec![ZERO; self.cols()];
        e[j] = Complex64::new(1.0, 0.0);
        self.apply(&e)
    }

    /// `AᴴA x`.
    fn gram(&self, x: &[Complex64]) -> Vec<Complex64> {
        self.adjoint(&self.apply(x))
    }

    /// `⟨a_i, a_j⟩` for every `i`.
    fn gram_column(&self, j: usize) -> Vec<Complex64> {
        self.adjoint(&self.column(j))
    }

    fn column_norm_sqr(&self, j: usize) -> f64 {
        energy(&self.column(j))
    }
}

/// Full linear convolution with a fixed kernel through a cached spectrum.
#[derive(Debug, Clone)]
struct FixedConv {
    size: usize,
    kernel_len: usize,
    spectrum: Vec<Complex64>,
}

impl FixedConv {
    fn new(kernel: &[Complex64], max_input: usize) -> Self {
        let size = (kernel.len() + max_input - 1).next_power_of_two();
        Self {
            size,
            kernel_len: kernel.len(),
            spectrum: fft::spectrum(kernel, size),
        }
    }

    /// Output samples `[skip, skip + take)` of `kernel * x`.
    fn run(&self, x: &[Complex64], skip: usize, take: usize) -> Vec<Complex64> {
        debug_assert!(x.len() + self.kernel_len - 1 <= self.size);
        let mut buf = fft::spectrum(x, self.size);
        for (b, k) in buf.iter_mut().zip(&self.spectrum) {
            *b *= k;
        }
        fft::inverse(&mut buf);
        let scale = 1.0 / self.size as f64;
        buf[skip..skip + take].iter().map(|v| v * scale).collect()
    }
}

/// Toeplitz convolution dictionary: `(N + L − 1) × L`, column `j` is the
/// probe delayed by `j` samples.
#[derive(Debug, Clone)]
pub struct Dictionary {
    probe: Vec<Complex64>,
    taps: usize,
    /// `autocorr[k + L - 1] = Σ conj(p[n]) p[n + k]` for `|k| < L`.
    autocorr: Vec<Complex64>,
    forward: FixedConv,
    backward: FixedConv,
    normal: FixedConv,
    pub warnings: Vec<String>,
}

impl Dictionary {
    pub fn probe(&self) -> &[Complex64] {
        &self.probe
    }

    pub fn taps(&self) -> usize {
        self.taps
    }

    /// `⟨a_i, a_j⟩`.
    pub fn gram_entry(&self, i: usize, j: usize) -> Complex64 {
        self.autocorr[i + self.taps - 1 - j]
    }

    /// Materializes the matrix, column-major.
    pub fn to_dense(&self) -> DenseOperator {
        let mut data = Vec::with_capacity(self.rows() * self.cols());
        for j in 0..self.cols() {
            data.extend(self.column(j));
        }
        DenseOperator {
            rows: self.rows(),
            cols: self.cols(),
            data,
        }
    }
}

/// Builds the dictionary for `taps` delays, rejecting spans above `bound`.
pub fn build_dictionary(probe_tx: &BasebandSignal, taps: usize, bound: usize) -> Result<Dictionary> {
    if probe_tx.is_empty() {
        return Err(Error::Empty("probe"));
    }
    if taps == 0 || taps > bound {
        return Err(Error::DictionaryTooLong { taps, bound });
    }
    let p = probe_tx.samples().to_vec();
    let n = p.len();
    let mut warnings = Vec::new();
    if n < taps {
        warnings.push(format!("probe of {n} samples is shorter than the {taps}-tap span"));
    }
    let rev = conj_reverse(&p);
    // autocorrelation lags -(N-1)..(N-1) from a single convolution
    let full = crate::signal::convolve_fft(&rev, &p);
    let autocorr: Vec<Complex64> = (0..2 * taps - 1)
        .map(|i| {
            let lag = i as i64 - (taps as i64 - 1);
            let idx = lag + n as i64 - 1;
            if idx >= 0 && (idx as usize) < full.len() {
                full[idx as usize]
            } else {
                ZERO
            }
        })
        .collect();
    let rows = n + taps - 1;
    Ok(Dictionary {
        forward: FixedConv::new(&p, taps),
        backward: FixedConv::new(&rev, rows),
        normal: FixedConv::new(&autocorr, taps),
        probe: p,
        taps,
        autocorr,
        warnings,
    })
}

impl LinearOperator for Dictionary {
    fn rows(&self) -> usize {
        self.probe.len() + self.taps - 1
    }

    fn cols(&self) -> usize {
        self.taps
    }

    fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.taps);
        self.forward.run(x, 0, self.rows())
    }

    fn adjoint(&self, y: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(y.len(), self.rows());
        self.backward.run(y, self.probe.len() - 1, self.taps)
    }

    fn column(&self, j: usize) -> Vec<Complex64> {
        let mut c = vec![ZERO; self.rows()];
        c[j..j + self.probe.len()].copy_from_slice(&self.probe);
        c
    }

    fn gram(&self, x: &[Complex64]) -> Vec<Complex64> {
        self.normal.run(x, self.taps - 1, self.taps)
    }

    fn gram_column(&self, j: usize) -> Vec<Complex64> {
        (0..self.taps).map(|i| self.gram_entry(i, j)).collect()
    }

    fn column_norm_sqr(&self, _j: usize) -> f64 {
        self.autocorr[self.taps - 1].re
    }
}

/// Explicit column-major matrix, used to cross-check the implicit operator.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseOperator {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Complex64>,
}

impl LinearOperator for DenseOperator {
    fn rows(&self) -> usize {
        self.rows
    }

    fn cols(&self) -> usize {
        self.cols
    }

    fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut y = vec![ZERO; self.rows];
        for (j, xj) in x.iter().enumerate() {
            let col = &self.data[j * self.rows..(j + 1) * self.rows];
            for (yi, a) in y.iter_mut().zip(col) {
                *yi += a * xj;
            }
        }
        y
    }

    fn adjoint(&self, y: &[Complex64]) -> Vec<Complex64> {
        (0..self.cols)
            .map(|j| {
                self.data[j * self.rows..(j + 1) * self.rows]
                    .iter()
                    .zip(y)
                    .map(|(a, v)| a.conj() * v)
                    .sum()
            })
            .collect()
    }
}

/// Sparse channel estimate on the dictionary's delay grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CirEstimate {
    pub taps: Vec<Complex64>,
    pub support: Vec<usize>,
    /// `‖y − A ĥ‖²`.
    pub residual_energy: f64,
    pub solver_iters: usize,
    pub converged: bool,
    /// Set when a least-squares refit fell back to the pseudo-inverse.
    pub rank_deficient: bool,
}

impl CirEstimate {
    fn from_taps<A: LinearOperator + ?Sized>(a: &A, y: &[Complex64], taps: Vec<Complex64>) -> Self {
        let support = taps
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != ZERO)
            .map(|(i, _)| i)
            .collect();
        let residual_energy = residual_energy(a, y, &taps);
        Self {
            taps,
            support,
            residual_energy,
            solver_iters: 0,
            converged: true,
            rank_deficient: false,
        }
    }

    pub fn as_signal(&self, sample_rate: f64) -> BasebandSignal {
        BasebandSignal::from_parts(self.taps.clone(), sample_rate)
    }

    /// Keeps only the `cap` largest-magnitude taps.
    pub fn limit_support(&mut self, cap: usize) {
        if self.support.len() <= cap {
            return;
        }
        let mut order = self.support.clone();
        order.sort_by(|a, b| {
            self.taps[*b]
                .norm_sqr()
                .total_cmp(&self.taps[*a].norm_sqr())
                .then(a.cmp(b))
        });
        for &i in &order[cap..] {
            self.taps[i] = ZERO;
        }
        order.truncate(cap);
        order.sort_unstable();
        self.support = order;
    }
}

pub fn residual_energy<A: LinearOperator + ?Sized>(a: &A, y: &[Complex64], x: &[Complex64]) -> f64 {
    a.apply(x).iter().zip(y).map(|(p, q)| (q - p).norm_sqr()).sum()
}

/// Greedy matching pursuit.
///
/// Stops once the residual energy is at most `res_tol · ‖y‖²` or after
/// `max_iters` selections. Correlations are updated through Gram columns,
/// so each iteration costs one column of `AᴴA`.
pub fn mp_estimate<A: LinearOperator + ?Sized>(
    y: &[Complex64],
    a: &A,
    max_iters: usize,
    res_tol: f64,
) -> Result<CirEstimate> {
    if y.len() != a.rows() {
        return Err(Error::LengthMismatch {
            left: y.len(),
            right: a.rows(),
        });
    }
    let y_energy = energy(y);
    let mut taps = vec![ZERO; a.cols()];
    if y_energy == 0.0 {
        return Ok(CirEstimate::from_taps(a, y, taps));
    }
    let norms: Vec<f64> = (0..a.cols()).map(|j| a.column_norm_sqr(j)).collect();
    let mut corr = a.adjoint(y);
    let mut res = y_energy;
    let stop = res_tol.max(0.0) * y_energy;
    let mut iters = 0;
    while iters < max_iters && res > stop {
        let (j, score) = corr
            .iter()
            .zip(&norms)
            .enumerate()
            .map(|(j, (c, n))| (j, if *n > 0.0 { c.norm_sqr() / n } else { 0.0 }))
            .fold((0, -1.0), |b, x| if x.1 > b.1 { x } else { b });
        if !(score > 0.0) {
            break;
        }
        let coef = corr[j] / norms[j];
        taps[j] += coef;
        let g = a.gram_column(j);
        for (c, gi) in corr.iter_mut().zip(&g) {
            *c -= gi * coef;
        }
        // the refreshed correlation with the chosen column is exactly zero
        corr[j] = ZERO;
        res = (res - score).max(0.0);
        iters += 1;
    }
    let mut est = CirEstimate::from_taps(a, y, taps);
    est.solver_iters = iters;
    est.converged = res <= stop;
    Ok(est)
}

/// Options for [`bpdn_estimate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BpdnOptions {
    /// Iteration cap shared across all continuation stages.
    pub max_iters: usize,
    /// Relative objective change that ends a stage.
    pub tolerance: f64,
    /// Penalty ratio between continuation stages.
    pub continuation: f64,
    /// Explicit penalty; overrides the σ rule when set.
    pub tau: Option<f64>,
}

impl Default for BpdnOptions {
    fn default() -> Self {
        Self {
            max_iters: 500,
            tolerance: 1e-6,
            continuation: 0.5,
            tau: None,
        }
    }
}

/// Penalty from normalized noise variance: `0.1 · σ · ‖Aᴴy‖∞`, floored at
/// `1e−4 · ‖Aᴴy‖∞`.
pub fn tau_rule(sigma: f64, correlation_peak: f64) -> f64 {
    (0.1 * sigma * correlation_peak).max(1e-4 * correlation_peak)
}

fn soft_threshold(u: Complex64, t: f64) -> Complex64 {
    let m = u.norm();
    if m <= t {
        ZERO
    } else {
        u * ((m - t) / m)
    }
}

fn l1(x: &[Complex64]) -> f64 {
    x.iter().map(|v| v.norm()).sum()
}

/// Objective pieces evaluated through the Gram operator:
/// `½‖Ax − y‖² = ½(xᴴGx − 2 Re xᴴAᴴy + ‖y‖²)`.
fn data_term(x: &[Complex64], gx: &[Complex64], aty: &[Complex64], y_energy: f64) -> f64 {
    let quad: f64 = x.iter().zip(gx).map(|(a, b)| (a.conj() * b).re).sum();
    let lin: f64 = x.iter().zip(aty).map(|(a, b)| (a.conj() * b).re).sum();
    (0.5 * (quad - 2.0 * lin + y_energy)).max(0.0)
}

/// ℓ₂–ℓ₁ estimate minimizing `½‖y − Ax‖² + τ‖x‖₁`.
pub fn bpdn_estimate<A: LinearOperator + ?Sized>(
    y: &[Complex64],
    a: &A,
    sigma: f64,
    opts: &BpdnOptions,
) -> Result<CirEstimate> {
    if y.len() != a.rows() {
        return Err(Error::LengthMismatch {
            left: y.len(),
            right: a.rows(),
        });
    }
    let n = a.cols();
    let aty = a.adjoint(y);
    let peak = aty.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let target = opts.tau.unwrap_or_else(|| tau_rule(sigma.max(0.0), peak));
    if peak == 0.0 || target >= peak {
        return Ok(CirEstimate::from_taps(a, y, vec![ZERO; n]));
    }
    let y_energy = energy(y);
    let col_max = (0..n).map(|j| a.column_norm_sqr(j)).fold(0.0, f64::max).max(1e-300);
    let (alpha_min, alpha_max) = (col_max * 1e-12, col_max * 1e12);

    let mut x = vec![ZERO; n];
    let mut gx = vec![ZERO; n];
    let mut alpha = col_max;
    let mut tau = (opts.continuation * peak).max(target);
    let mut iters = 0;
    let converged;
    loop {
        let mut obj = data_term(&x, &gx, &aty, y_energy) + tau * l1(&x);
        let mut stage_done = false;
        while iters < opts.max_iters {
            iters += 1;
            let grad: Vec<Complex64> = gx.iter().zip(&aty).map(|(g, b)| g - b).collect();
            // monotone acceptance with step backtracking
            let (x_new, gx_new, obj_new) = loop {
                let cand: Vec<Complex64> = x
                    .iter()
                    .zip(&grad)
                    .map(|(xi, gi)| soft_threshold(xi - gi / alpha, tau / alpha))
                    .collect();
                let gc = a.gram(&cand);
                let f = data_term(&cand, &gc, &aty, y_energy) + tau * l1(&cand);
                let step: f64 = cand.iter().zip(&x).map(|(c, o)| (c - o).norm_sqr()).sum();
                if f <= obj - 1e-5 * 0.5 * alpha * step || alpha >= alpha_max {
                    break (cand, gc, f);
                }
                alpha = (alpha * 2.0).min(alpha_max);
            };
            let s: Vec<Complex64> = x_new.iter().zip(&x).map(|(p, q)| p - q).collect();
            let ss: f64 = s.iter().map(|v| v.norm_sqr()).sum();
            let change = (obj - obj_new).abs() / obj.abs().max(1e-300);
            x = x_new;
            if ss > 0.0 {
                let gs: Vec<Complex64> = gx_new.iter().zip(&gx).map(|(p, q)| p - q).collect();
                let sgs: f64 = s.iter().zip(&gs).map(|(p, q)| (p.conj() * q).re).sum();
                alpha = (sgs / ss).clamp(alpha_min, alpha_max);
            }
            gx = gx_new;
            obj = obj_new;
            if change < opts.tolerance {
                stage_done = true;
                break;
            }
        }
        if tau <= target || iters >= opts.max_iters {
            converged = stage_done && tau <= target;
            break;
        }
        tau = (tau * opts.continuation).max(target);
    }
    let mut est = CirEstimate::from_taps(a, y, x);
    est.solver_iters = iters;
    est.converged = converged;
    Ok(est)
}

/// Least-squares refit on a fixed support.
///
/// Solves the normal equations by Cholesky; when the restricted system is
/// singular it falls back to an SVD pseudo-inverse and sets the flag.
pub fn ls_refine<A: LinearOperator + ?Sized>(y: &[Complex64], a: &A, support: &[usize]) -> Result<CirEstimate> {
    if y.len() != a.rows() {
        return Err(Error::LengthMismatch {
            left: y.len(),
            right: a.rows(),
        });
    }
    let n = a.cols();
    let mut support = support.to_vec();
    support.sort_unstable();
    support.dedup();
    if let Some(&bad) = support.iter().find(|&&j| j >= n) {
        return Err(Error::InvalidSignal(format!("support index {bad} outside {n} taps")));
    }
    let mut taps = vec![ZERO; n];
    if support.is_empty() {
        return Ok(CirEstimate::from_taps(a, y, taps));
    }
    let aty = a.adjoint(y);
    let k = support.len();
    let gram_cols: Vec<Vec<Complex64>> = support.iter().map(|&j| a.gram_column(j)).collect();
    let g = DMatrix::from_fn(k, k, |r, c| gram_cols[c][support[r]]);
    let b = DVector::from_iterator(k, support.iter().map(|&j| aty[j]));
    let scale = (0..k).map(|i| g[(i, i)].re).fold(0.0, f64::max);
    let mut rank_deficient = false;
    let solution = match g.clone().cholesky() {
        Some(ch) if well_conditioned(&ch.l(), scale) => ch.solve(&b),
        _ => {
            rank_deficient = true;
            let svd = g.svd(true, true);
            svd.solve(&b, 1e-10 * scale.max(1e-300))
                .map_err(|e| Error::InvalidSignal(format!("pseudo-inverse failed: {e}")))?
        }
    };
    for (&j, v) in support.iter().zip(solution.iter()) {
        taps[j] = *v;
    }
    let mut est = CirEstimate::from_taps(a, y, taps);
    est.rank_deficient = rank_deficient;
    Ok(est)
}

/// Least-squares refit on the smallest magnitude-ranked prefix of
/// `est.support` whose residual reaches `res_tol · ‖y‖²` (widened by a
/// two-sigma allowance for the noise-energy fluctuation), using at most
/// `cap` taps. Falls back to the `cap` largest taps when no prefix
/// reaches the tolerance.
///
/// Residuals of nested least-squares fits never increase, so the prefix
/// length is found by bisection.
pub fn refine_to_noise_level<A: LinearOperator + ?Sized>(
    y: &[Complex64],
    a: &A,
    est: &CirEstimate,
    res_tol: f64,
    cap: usize,
) -> Result<CirEstimate> {
    let mut ranked = est.support.clone();
    ranked.sort_by(|p, q| {
        est.taps[*q]
            .norm_sqr()
            .total_cmp(&est.taps[*p].norm_sqr())
            .then(p.cmp(q))
    });
    ranked.truncate(cap);
    // two standard deviations of the residual-energy statistic under
    // complex Gaussian noise, so a correct model is not padded with noise taps
    let margin = 1.0 + 2.0 / (y.len().max(1) as f64).sqrt();
    let target = res_tol.max(0.0) * margin * energy(y);
    let fit = |k: usize| ls_refine(y, a, &ranked[..k]);
    let best = fit(ranked.len())?;
    if ranked.is_empty() || best.residual_energy > target {
        return Ok(best);
    }
    // smallest k in [1, n] whose fit meets the target; k = n is known to pass
    let (mut lo, mut hi) = (1, ranked.len());
    let mut chosen = best;
    while lo < hi {
        let mid = (lo + hi) / 2;
        let trial = fit(mid)?;
        if trial.residual_energy <= target {
            hi = mid;
            chosen = trial;
        } else {
            lo = mid + 1;
        }
    }
    if chosen.support.len() != lo && lo < ranked.len() {
        chosen = fit(lo)?;
    }
    Ok(chosen)
}

fn well_conditioned(l: &DMatrix<Complex64>, scale: f64) -> bool {
    let diag_min = (0..l.nrows()).map(|i| l[(i, i)].norm()).fold(f64::INFINITY, f64::min);
    diag_min * diag_min > 1e-10 * scale
}

/// CSV dump with columns `tap_index,delay_seconds,re,im`. Tap `j` sits at
/// delay `(j - lead) / sample_rate` from the synchronized path.
pub fn save_cir_csv(est: &CirEstimate, lead: usize, sample_rate: f64, path: &Path) -> Result<()> {
    let mut out = String::from("tap_index,delay_seconds,re,im\n");
    for (j, v) in est.taps.iter().enumerate() {
        let delay = (j as f64 - lead as f64) / sample_rate;
        out.push_str(&format!("{j},{delay},{},{}\n", v.re, v.im));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}
