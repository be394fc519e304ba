//! Almost-periodicity analysis of sampled trajectories.
//!
//! Bohr means are computed as weighted averages over three nested windows
//! `T₀, 2T₀, 4T₀` and extrapolated; a smooth weight makes the leakage from
//! neighbouring frequencies decay faster than any power of the window
//! length. ε-periods are searched on the sample grid, spectra are scanned
//! with a chirp-z transform and refined by golden-section search.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::CVec;
use crate::trajectory::{ExtendedTrajectory, Trajectory};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ApError {
    #[error("frequency {r} needs step ≤ {max_step:.4e} (8 samples per period), got {h:.4e}")]
    UnderResolved { r: f64, h: f64, max_step: f64 },
    #[error("frequency grid spacing {spacing:.4e} exceeds π/T = {limit:.4e}")]
    GridTooCoarse { spacing: f64, limit: f64 },
    #[error("invalid frequency grid: {0}")]
    BadGrid(String),
    #[error("scan interval [{0}, {1}] must lie in [0, T/2] = [0, {2}]")]
    ScanOutOfRange(f64, f64, f64),
    #[error("spectrum incomplete, extension refused: defect {defect:.3e} > {allowed:.3e}")]
    ExtensionRefused { defect: f64, allowed: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Weighting {
    /// Plain trapezoid average.
    Boxcar,
    /// Average against a normalized bump on the window.
    Smooth,
}

fn bump_weight(u: f64) -> f64 {
    if u <= 0.0 || u >= 1.0 {
        0.0
    } else {
        (4.0 - 1.0 / (u * (1.0 - u))).exp()
    }
}

/// Normalized weighted mean of `e^{-irs} f(s)` over samples `start..=end`.
fn window_mean(f: &Trajectory, r: f64, start: usize, end: usize, weighting: Weighting) -> CVec {
    let h = f.step();
    let d = f.dim();
    let len = (end - start) as f64;
    let mut acc = CVec::zeros(d);
    let mut wsum = 0.0;
    let rot = Complex64::from_polar(1.0, -r * h);
    let mut phase = Complex64::new(1.0, 0.0);
    for i in start..=end {
        if (i - start).is_multiple_of(256) {
            phase = Complex64::from_polar(1.0, -r * i as f64 * h);
        }
        let w = match weighting {
            Weighting::Boxcar => {
                if i == start || i == end {
                    0.5
                } else {
                    1.0
                }
            }
            Weighting::Smooth => bump_weight((i - start) as f64 / len),
        };
        if w != 0.0 {
            acc.axpy(phase * w, f.value(i), Complex64::new(1.0, 0.0));
            wsum += w;
        }
        phase *= rot;
    }
    if wsum > 0.0 {
        acc / Complex64::new(wsum, 0.0)
    } else {
        acc
    }
}

/// `(1/T)∫₀^T e^{-irs} f(s) ds` by the trapezoid rule, `T` rounded down to
/// the grid.
pub fn partial_average(f: &Trajectory, r: f64, t: f64, weighting: Weighting) -> CVec {
    let end = ((t / f.step()) + 1e-9).floor() as usize;
    window_mean(f, r, 0, end.min(f.len() - 1), weighting)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BohrCoefficient {
    pub r: f64,
    pub value: Vec<Complex64>,
    /// `(T, average over [0, T])` for the three nested windows.
    pub windows: Vec<(f64, Vec<Complex64>)>,
    pub error_estimate: f64,
}

impl BohrCoefficient {
    pub fn vector(&self) -> CVec {
        CVec::from_column_slice(&self.value)
    }

    pub fn norm(&self) -> f64 {
        self.vector().norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BohrOptions {
    pub weighting: Weighting,
}

impl Default for BohrOptions {
    fn default() -> Self {
        Self { weighting: Weighting::Smooth }
    }
}

fn check_resolution(f: &Trajectory, r: f64) -> Result<(), ApError> {
    let max_step = if r == 0.0 { f64::INFINITY } else { 2.0 * PI / (8.0 * r.abs()) };
    if f.step() > max_step * (1.0 + 1e-12) {
        return Err(ApError::UnderResolved { r, h: f.step(), max_step });
    }
    Ok(())
}

pub fn bohr_coeff(f: &Trajectory, r: f64) -> Result<BohrCoefficient, ApError> {
    bohr_coeff_with(f, r, &BohrOptions::default())
}

/// Bohr mean at frequency `r`: windows `T₀, 2T₀, 4T₀` with `T₀ = T/4.1`,
/// value `2M(4T₀) - M(2T₀)`, and an error estimate combining twice the
/// window drift, the disagreement with the window shifted by `α = T₀/10`,
/// and a rounding floor.
pub fn bohr_coeff_with(f: &Trajectory, r: f64, opts: &BohrOptions) -> Result<BohrCoefficient, ApError> {
    check_resolution(f, r)?;
    let n = f.len() - 1;
    let n0 = ((n as f64) / 4.1).floor() as usize;
    let n0 = n0.max(2);
    let shift = (n0 / 10).max(1);
    let h = f.step();
    let m1 = window_mean(f, r, 0, n0, opts.weighting);
    let m2 = window_mean(f, r, 0, 2 * n0, opts.weighting);
    let m4 = window_mean(f, r, 0, 4 * n0, opts.weighting);
    let end_shifted = (shift + 4 * n0).min(n);
    // Shifted mean of e^{-irs}f(s) over [α, α+4T₀] carries the phase e^{-irα}
    // relative to the unshifted average of the same limit.
    let m4a = window_mean(f, r, shift, end_shifted, opts.weighting);
    let value = &m4 * Complex64::new(2.0, 0.0) - &m2;
    let sup = f.sup_norm();
    let floor = 64.0 * f64::EPSILON * sup * (n as f64).sqrt();
    let error_estimate = 2.0 * (&m4 - &m2).norm() + (&m4a - &m4).norm() + floor;
    Ok(BohrCoefficient {
        r,
        value: value.iter().copied().collect(),
        windows: vec![
            (n0 as f64 * h, m1.iter().copied().collect()),
            (2.0 * n0 as f64 * h, m2.iter().copied().collect()),
            (4.0 * n0 as f64 * h, m4.iter().copied().collect()),
        ],
        error_estimate,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrequencyGrid {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl FrequencyGrid {
    pub fn spacing(&self) -> f64 {
        if self.count <= 1 {
            0.0
        } else {
            (self.max - self.min) / (self.count - 1) as f64
        }
    }

    pub fn point(&self, k: usize) -> f64 {
        self.min + k as f64 * self.spacing()
    }

    pub fn validate(&self, horizon: f64) -> Result<(), ApError> {
        if self.count < 2 || !(self.max > self.min) {
            return Err(ApError::BadGrid(format!("need min < max and count ≥ 2, got {self:?}")));
        }
        let limit = PI / horizon;
        if self.spacing() > limit * (1.0 + 1e-12) {
            return Err(ApError::GridTooCoarse { spacing: self.spacing(), limit });
        }
        Ok(())
    }

    /// Smallest grid on `[min, max]` whose spacing is at most `π/T`.
    pub fn covering(min: f64, max: f64, horizon: f64) -> Self {
        let count = (((max - min) * horizon / PI).ceil() as usize + 1).max(2);
        Self { min, max, count }
    }
}

/// Smoothly weighted means at every grid frequency, via Bluestein's chirp-z
/// transform. Returns one vector per frequency.
pub fn chirp_means(f: &Trajectory, grid: &FrequencyGrid) -> Vec<CVec> {
    let n = f.len();
    let k = grid.count;
    let h = f.step();
    let d = f.dim();
    let theta = grid.spacing() * h;
    let len = (n + k - 1).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(len);
    let inv = planner.plan_fft_inverse(len);
    let chirp = |j: f64| Complex64::from_polar(1.0, 0.5 * theta * j * j);
    let weights: Vec<f64> = (0..n).map(|i| bump_weight(i as f64 / (n - 1) as f64)).collect();
    let wsum: f64 = weights.iter().sum();

    // b_m = e^{iθm²/2} for m = -(n-1)..(k-1), laid out circularly.
    let mut b = vec![ZERO; len];
    for m in 0..k {
        b[m] = chirp(m as f64);
    }
    for m in 1..n {
        b[len - m] = chirp(m as f64);
    }
    fwd.process(&mut b);

    let mut out = vec![CVec::zeros(d); k];
    for comp in 0..d {
        let mut a = vec![ZERO; len];
        for j in 0..n {
            let base = Complex64::from_polar(weights[j], -grid.min * j as f64 * h);
            a[j] = f.value(j)[comp] * base * chirp(j as f64).conj();
        }
        fwd.process(&mut a);
        for (x, y) in a.iter_mut().zip(&b) {
            *x *= y;
        }
        inv.process(&mut a);
        let scale = 1.0 / (len as f64 * wsum);
        for (m, o) in out.iter_mut().enumerate() {
            o[comp] = a[m] * chirp(m as f64).conj() * scale;
        }
    }
    out
}

fn full_mean_norm(f: &Trajectory, r: f64) -> f64 {
    window_mean(f, r, 0, f.len() - 1, Weighting::Smooth).norm()
}

fn golden_argmax<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        }
    }
    0.5 * (lo + hi)
}

/// Two vertex steps of a parabola through `ln g` at `x - s, x, x + s`.
fn parabolic_peak<F: Fn(f64) -> f64>(g: F, mut x: f64, s: f64) -> f64 {
    for _ in 0..2 {
        let (a, b, c) = (g(x - s).ln(), g(x).ln(), g(x + s).ln());
        let curv = a - 2.0 * b + c;
        if !(curv < 0.0) {
            break;
        }
        let dx = 0.5 * s * (a - c) / curv;
        if dx.abs() > s {
            break;
        }
        x += dx;
    }
    x
}

/// A scan hit whose window averages do not settle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceDiagnostic {
    pub r: f64,
    pub window_norms: Vec<f64>,
    pub error_estimate: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BohrSpectrum {
    pub coefficients: Vec<BohrCoefficient>,
    pub divergent: Vec<DivergenceDiagnostic>,
}

const SIDELOBE_REACH: usize = 32;
const SIDELOBE_RATIO: f64 = 10.0;

/// Frequencies with `‖P_r‖ > threshold`, sorted ascending. Grid maxima
/// within `SIDELOBE_REACH` steps of a peak `SIDELOBE_RATIO` times larger
/// are treated as window sidelobes and skipped.
pub fn bohr_spectrum(f: &Trajectory, grid: &FrequencyGrid, threshold: f64) -> Result<BohrSpectrum, ApError> {
    grid.validate(f.horizon())?;
    check_resolution(f, grid.min)?;
    check_resolution(f, grid.max)?;
    let means = chirp_means(f, grid);
    let norms: Vec<f64> = means.iter().map(|m| m.norm()).collect();
    let k = norms.len();
    let step = grid.spacing();
    let mut peaks = Vec::new();
    for j in 0..k {
        let left = if j > 0 { norms[j - 1] } else { f64::NEG_INFINITY };
        let right = if j + 1 < k { norms[j + 1] } else { f64::NEG_INFINITY };
        if norms[j] > threshold && norms[j] >= left && norms[j] > right {
            peaks.push(j);
        }
    }
    // Window sidelobes: local maxima close to a much larger peak.
    let candidates: Vec<f64> = peaks
        .iter()
        .filter(|&&j| {
            !peaks
                .iter()
                .any(|&i| i.abs_diff(j) <= SIDELOBE_REACH && norms[i] > SIDELOBE_RATIO * norms[j])
        })
        .map(|&j| grid.point(j))
        .collect();
    let refined: Vec<Result<(f64, BohrCoefficient), ApError>> = candidates
        .par_iter()
        .map(|&r0| {
            let lo = (r0 - step).max(grid.min);
            let hi = (r0 + step).min(grid.max);
            let r = golden_argmax(|r| full_mean_norm(f, r), lo, hi, 1e-3 * step);
            let r = parabolic_peak(|r| full_mean_norm(f, r), r, 0.05 * step);
            Ok((r, bohr_coeff(f, r)?))
        })
        .collect();
    let mut out = BohrSpectrum::default();
    let mut seen: Vec<f64> = Vec::new();
    for item in refined {
        let (r, c) = item?;
        if seen.iter().any(|&s| (s - r).abs() < 0.5 * step) {
            continue;
        }
        seen.push(r);
        let norm = c.norm();
        let window_norms: Vec<f64> = c.windows.iter().map(|(_, v)| CVec::from_column_slice(v).norm()).collect();
        if c.error_estimate > 0.1 * norm {
            out.divergent.push(DivergenceDiagnostic { r, window_norms, error_estimate: c.error_estimate });
        } else if norm > threshold {
            out.coefficients.push(c);
        }
    }
    out.coefficients.sort_by(|a, b| a.r.total_cmp(&b.r));
    out.divergent.sort_by(|a, b| a.r.total_cmp(&b.r));
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonPeriods {
    pub eps: f64,
    pub scan: (f64, f64),
    /// Maximal runs of consecutive grid shifts that are ε-periods.
    pub clusters: Vec<(f64, f64)>,
    pub count: usize,
    /// Longest stretch of the scan interval free of ε-periods, including the
    /// stretches before the first and after the last hit.
    pub max_gap: f64,
    /// Some period outside the trivial cluster at `τ = 0` was found (or that
    /// cluster covers the whole scan), so the gap between periods is finite.
    pub relatively_dense: bool,
}

impl EpsilonPeriods {
    pub fn periods(&self, h: f64) -> Vec<f64> {
        let mut out = Vec::new();
        for &(a, b) in &self.clusters {
            let mut t = a;
            while t <= b + 1e-9 * h {
                out.push(t);
                t += h;
            }
        }
        out
    }
}

fn is_period(f: &Trajectory, k: usize, eps: f64) -> bool {
    let vals = f.values();
    let n = vals.len();
    if k >= n {
        return false;
    }
    let over = |i: usize| (&vals[i + k] - &vals[i]).norm() > eps;
    // Coarse pass first so most non-periods exit early.
    let stride = 61;
    if (0..n - k).step_by(stride).any(over) {
        return false;
    }
    !(0..n - k).any(over)
}

/// Grid shifts `τ` in `scan` with `sup_t ‖f(t+τ) - f(t)‖ ≤ ε` on the overlap.
pub fn epsilon_periods(f: &Trajectory, eps: f64, scan: (f64, f64)) -> Result<EpsilonPeriods, ApError> {
    let half = 0.5 * f.horizon();
    let (lo, hi) = scan;
    if !(lo >= 0.0) || hi > half * (1.0 + 1e-12) || hi < lo {
        return Err(ApError::ScanOutOfRange(lo, hi, half));
    }
    let h = f.step();
    let k0 = (lo / h - 1e-9).ceil() as usize;
    let k1 = (hi / h + 1e-9).floor() as usize;
    let hits: Vec<bool> = (k0..=k1).into_par_iter().map(|k| is_period(f, k, eps)).collect();
    let mut clusters: Vec<(f64, f64)> = Vec::new();
    let mut count = 0;
    let mut run: Option<usize> = None;
    for (idx, &hit) in hits.iter().enumerate() {
        let k = k0 + idx;
        if hit {
            count += 1;
            if run.is_none() {
                run = Some(k);
            }
        } else if let Some(s) = run.take() {
            clusters.push((s as f64 * h, (k - 1) as f64 * h));
        }
    }
    if let Some(s) = run {
        clusters.push((s as f64 * h, k1 as f64 * h));
    }
    let scan_len = hi - lo;
    let max_gap = if clusters.is_empty() {
        scan_len
    } else {
        let mut g = clusters[0].0 - lo;
        for w in clusters.windows(2) {
            g = g.max(w[1].0 - w[0].1);
        }
        g.max(hi - clusters[clusters.len() - 1].1)
    };
    let relatively_dense = clusters.iter().any(|&(a, b)| a > 0.0 || b >= k1 as f64 * h);
    Ok(EpsilonPeriods {
        eps,
        scan,
        clusters,
        count,
        max_gap,
        relatively_dense,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Witness {
    /// Window sup-norms increase and the last is at least twice the first.
    Unbounded { window_sups: Vec<f64> },
    /// Relative spread of window sup-norms above 10%.
    SupNormDrift { window_sups: Vec<f64>, spread: f64 },
    /// No ε-periods away from the trivial cluster at `τ = 0`.
    NoEpsilonPeriods { eps: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    #[serde(rename = "AP-consistent")]
    ApConsistent,
    #[serde(rename = "not-AP")]
    NotAp,
    #[serde(rename = "inconclusive")]
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApOptions {
    pub eps: Vec<f64>,
    /// Interpret `eps` as fractions of the trajectory's sup-norm.
    pub relative: bool,
    /// Upper end of the ε-period scan; `None` scans up to `T/2`.
    pub max_scan: Option<f64>,
    pub spectrum: Option<(FrequencyGrid, f64)>,
}

impl Default for ApOptions {
    fn default() -> Self {
        Self { eps: vec![0.5, 0.25], relative: true, max_scan: None, spectrum: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApReport {
    pub sup_norm: f64,
    pub window_sups: Vec<f64>,
    pub rows: Vec<EpsilonPeriods>,
    pub spectrum: Option<BohrSpectrum>,
    pub witnesses: Vec<Witness>,
    pub verdict: Verdict,
}

fn window_sups(f: &Trajectory, parts: usize) -> Vec<f64> {
    let n = f.len();
    (0..parts).map(|p| f.sup_norm_range(p * n / parts, ((p + 1) * n / parts).max(p * n / parts + 1))).collect()
}

pub fn ap_verdict(f: &Trajectory, opts: &ApOptions) -> Result<ApReport, ApError> {
    let sup = f.sup_norm();
    let sups = window_sups(f, 4);
    let mut witnesses = Vec::new();
    let first = sups[0];
    let last = sups[sups.len() - 1];
    if sups.windows(2).all(|w| w[1] > w[0]) && last >= 2.0 * first {
        witnesses.push(Witness::Unbounded { window_sups: sups.clone() });
    }
    let max = sups.iter().cloned().fold(0.0, f64::max);
    let min = sups.iter().cloned().fold(f64::INFINITY, f64::min);
    let spread = if max > 0.0 { (max - min) / max } else { 0.0 };
    if spread > 0.1 {
        witnesses.push(Witness::SupNormDrift { window_sups: sups.clone(), spread });
    }
    let half = 0.5 * f.horizon();
    let hi = opts.max_scan.map_or(half, |m| m.min(half));
    let mut rows = Vec::with_capacity(opts.eps.len());
    for &e in &opts.eps {
        let eps = if opts.relative { e * sup } else { e };
        let row = epsilon_periods(f, eps, (0.0, hi))?;
        let nontrivial = row.clusters.iter().any(|&(a, _)| a > 0.0);
        if !nontrivial {
            witnesses.push(Witness::NoEpsilonPeriods { eps });
        }
        rows.push(row);
    }
    let spectrum = match &opts.spectrum {
        Some((grid, threshold)) => Some(bohr_spectrum(f, grid, *threshold)?),
        None => None,
    };
    let growth = witnesses
        .iter()
        .any(|w| matches!(w, Witness::Unbounded { .. } | Witness::SupNormDrift { .. }));
    let verdict = if growth {
        Verdict::NotAp
    } else if rows.iter().all(|r| r.relatively_dense) {
        Verdict::ApConsistent
    } else {
        Verdict::Inconclusive
    };
    Ok(ApReport { sup_norm: sup, window_sups: sups, rows, spectrum, witnesses, verdict })
}

/// Unit covectors `x ↦ Σ y_i x_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionalSet {
    pub covectors: Vec<Vec<Complex64>>,
}

impl FunctionalSet {
    /// The `dim` coordinate functionals followed by `random` seeded random
    /// unit covectors.
    pub fn standard_and_random(dim: usize, random: usize, seed: u64) -> Self {
        let mut covectors = Vec::with_capacity(dim + random);
        for k in 0..dim {
            let mut v = vec![ZERO; dim];
            v[k] = Complex64::new(1.0, 0.0);
            covectors.push(v);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..random {
            let v: Vec<Complex64> = (0..dim)
                .map(|_| {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    Complex64::new(re, im)
                })
                .collect();
            let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            covectors.push(v.into_iter().map(|z| z / n).collect());
        }
        Self { covectors }
    }

    pub fn from_covectors(covectors: Vec<Vec<Complex64>>) -> Self {
        let covectors = covectors
            .into_iter()
            .map(|v| {
                let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                v.into_iter().map(|z| z / n).collect()
            })
            .collect();
        Self { covectors }
    }

    pub fn len(&self) -> usize {
        self.covectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.covectors.is_empty()
    }
}

/// `ap_verdict` on every scalarization `x*(f(·))`, in functional order.
pub fn weak_ap_verdict(f: &Trajectory, set: &FunctionalSet, opts: &ApOptions) -> Result<Vec<ApReport>, ApError> {
    set.covectors.par_iter().map(|y| ap_verdict(&f.scalarize(y), opts)).collect()
}

pub const DEFAULT_EXTENSION_DELTA: f64 = 1e-3;

/// Trigonometric reconstruction `Σ P_r e^{irt}` of an orbit, valid on all
/// of ℝ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApExtension {
    pub coefficients: Vec<(f64, Vec<Complex64>)>,
    /// `sup ‖f - reconstruction‖` over the sample grid.
    pub defect: f64,
    pub sup_norm: f64,
    pub step: f64,
    pub horizon: f64,
}

impl ApExtension {
    pub fn dim(&self) -> usize {
        self.coefficients.first().map_or(0, |(_, v)| v.len())
    }

    pub fn eval(&self, t: f64) -> CVec {
        let mut out = CVec::zeros(self.dim());
        for (r, p) in &self.coefficients {
            let e = Complex64::new(0.0, r * t).exp();
            for (o, c) in out.iter_mut().zip(p) {
                *o += c * e;
            }
        }
        out
    }

    pub fn extended(&self) -> ExtendedTrajectory {
        let n = (self.horizon / self.step + 1e-9).floor() as i64;
        let values = (-n..=n).map(|k| self.eval(k as f64 * self.step)).collect();
        ExtendedTrajectory { h: self.step, values, coefficients: self.coefficients.clone() }
    }

    /// Sup of `‖F(t)‖` over `[lo, hi]`.
    pub fn refined_sup(&self, lo: f64, hi: f64) -> f64 {
        refined_sup(|t| self.eval(t).norm(), lo, hi, self.step)
    }

    /// `α F₁ + F₂` on concatenated coefficient lists.
    pub fn combine(&self, alpha: Complex64, other: &ApExtension) -> ApExtension {
        let mut coefficients: Vec<(f64, Vec<Complex64>)> = self
            .coefficients
            .iter()
            .map(|(r, p)| (*r, p.iter().map(|z| z * alpha).collect()))
            .collect();
        coefficients.extend(other.coefficients.iter().cloned());
        ApExtension {
            coefficients,
            defect: alpha.norm() * self.defect + other.defect,
            sup_norm: alpha.norm() * self.sup_norm + other.sup_norm,
            step: self.step.min(other.step),
            horizon: self.horizon.min(other.horizon),
        }
    }
}

/// Sup of `g` over `[lo, hi]`: scan at spacing `≤ step`, then golden-section
/// refinement around the best scan point.
pub fn refined_sup<F: Fn(f64) -> f64>(g: F, lo: f64, hi: f64, step: f64) -> f64 {
    let n = ((hi - lo) / step).ceil().max(1.0) as usize;
    let h = (hi - lo) / n as f64;
    let (mut best_t, mut best) = (lo, g(lo));
    for k in 1..=n {
        let t = lo + k as f64 * h;
        let v = g(t);
        if v > best {
            best = v;
            best_t = t;
        }
    }
    let a = (best_t - h).max(lo);
    let b = (best_t + h).min(hi);
    let t = golden_argmax(&g, a, b, 1e-10 * (1.0 + best_t.abs()));
    best.max(g(t))
}

/// Builds the extension, refusing when `sup‖f - Σ P_r e^{ir·}‖ > δ sup‖f‖`.
pub fn ap_extend(f: &Trajectory, spectrum: &[BohrCoefficient], delta: f64) -> Result<ApExtension, ApError> {
    let coefficients: Vec<(f64, Vec<Complex64>)> = spectrum.iter().map(|c| (c.r, c.value.clone())).collect();
    let mut ext = ApExtension {
        coefficients,
        defect: 0.0,
        sup_norm: f.sup_norm(),
        step: f.step(),
        horizon: f.horizon(),
    };
    if ext.coefficients.is_empty() {
        ext.coefficients.push((0.0, vec![ZERO; f.dim()]));
    }
    let defect = (0..f.len())
        .into_par_iter()
        .map(|i| (f.value(i) - ext.eval(f.time(i))).norm())
        .reduce(|| 0.0, f64::max);
    ext.defect = defect;
    let allowed = delta * ext.sup_norm;
    if defect > allowed {
        return Err(ApError::ExtensionRefused { defect, allowed });
    }
    Ok(ext)
}

/// Central five-point derivative, dropping two samples at each end. The
/// result is indexed from `t = 2h`.
pub fn derivative_trajectory(f: &Trajectory) -> Trajectory {
    let h = f.step();
    let v = f.values();
    let values: Vec<CVec> = (2..v.len() - 2)
        .map(|i| (&v[i - 2] - &v[i - 1] * Complex64::new(8.0, 0.0) + &v[i + 1] * Complex64::new(8.0, 0.0) - &v[i + 2]) / Complex64::new(12.0 * h, 0.0))
        .collect();
    Trajectory::new(h, values, format!("d/dt of {}", f.note())).expect("finite differences of finite data")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LandauCheck {
    pub sup: f64,
    pub sup_d1: f64,
    pub sup_d2: f64,
    /// `sup|h'|² - 4 sup|h| sup|h''|`; non-positive up to the grid tolerance
    /// when the inequality holds.
    pub excess: f64,
    pub holds: bool,
}

/// `sup|h'|² ≤ 4 sup|h| sup|h''| + tol` with five-point differences.
pub fn landau_check(f: &Trajectory, tol: f64) -> LandauCheck {
    let h = f.step();
    let v = f.values();
    let mut d1: f64 = 0.0;
    let mut d2: f64 = 0.0;
    for i in 2..v.len() - 2 {
        let a = (&v[i - 2] - &v[i + 2] + (&v[i + 1] - &v[i - 1]) * Complex64::new(8.0, 0.0)) / Complex64::new(12.0 * h, 0.0);
        let b = (-(&v[i - 2] + &v[i + 2]) + (&v[i + 1] + &v[i - 1]) * Complex64::new(16.0, 0.0) - &v[i] * Complex64::new(30.0, 0.0))
            / Complex64::new(12.0 * h * h, 0.0);
        d1 = d1.max(a.norm());
        d2 = d2.max(b.norm());
    }
    let sup = f.sup_norm();
    let excess = d1 * d1 - 4.0 * sup * d2;
    LandauCheck { sup, sup_d1: d1, sup_d2: d2, excess, holds: excess <= tol }
}

/// CSV `r, norm, error_estimate, re_1, im_1, …` for a spectrum.
pub fn spectrum_csv(spectrum: &BohrSpectrum, dim: usize) -> String {
    let mut s = String::from("r,norm,error_estimate");
    for k in 1..=dim {
        s.push_str(&format!(",re_{k},im_{k}"));
    }
    s.push('\n');
    for c in &spectrum.coefficients {
        s.push_str(&format!("{:.12e},{:.12e},{:.6e}", c.r, c.norm(), c.error_estimate));
        for z in &c.value {
            s.push_str(&format!(",{:.12e},{:.12e}", z.re, z.im));
        }
        s.push('\n');
    }
    s
}

/// CSV `eps, start, end` listing every ε-period cluster.
pub fn periods_csv(rows: &[EpsilonPeriods]) -> String {
    let mut s = String::from("eps,start,end\n");
    for row in rows {
        for &(a, b) in &row.clusters {
            s.push_str(&format!("{:.6e},{:.12e},{:.12e}\n", row.eps, a, b));
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::cvec;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn character(r: f64, v: &[Complex64], h: f64, t: f64) -> Trajectory {
        let v = cvec(v);
        Trajectory::sample(h, t, "character", move |s| &v * Complex64::new(0.0, r * s).exp()).unwrap()
    }

    #[test]
    fn character_coefficients() {
        let v = [c(1.0, 0.5), c(-0.3, 0.0)];
        let f = character(3.0, &v, 0.05, 400.0);
        let p = bohr_coeff(&f, 3.0).unwrap();
        assert!((p.vector() - cvec(&v)).norm() <= p.error_estimate.max(1e-12));
        let q = bohr_coeff(&f, 1.0).unwrap();
        assert!(q.norm() <= q.error_estimate);
        assert!(q.error_estimate < 1e-9);
    }

    #[test]
    fn cosine_splits_in_half() {
        let f = Trajectory::scalar(0.05, 400.0, "cos", |s| c((2.0 * s).cos(), 0.0)).unwrap();
        let p = bohr_coeff(&f, 2.0).unwrap();
        assert!((p.value[0] - c(0.5, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn boxcar_average_matches_closed_form() {
        let s2 = 2f64.sqrt();
        let tt = 300.0;
        let h = 0.01;
        let f = Trajectory::scalar(h, tt, "two", |s| Complex64::new(0.0, s).exp() + Complex64::new(0.0, s2 * s).exp()).unwrap();
        let avg = partial_average(&f, s2, tt, Weighting::Boxcar)[0];
        // (1/T)∫₀^T e^{i(1-√2)s} ds + 1
        let w = 1.0 - s2;
        let oracle = (Complex64::new(0.0, w * tt).exp() - 1.0) / Complex64::new(0.0, w * tt) + 1.0;
        assert!((avg - oracle).norm() < 1e-5);
        let p = bohr_coeff(&f, s2).unwrap();
        assert!((p.value[0] - c(1.0, 0.0)).norm() < 2.0 / tt);
    }

    #[test]
    fn under_resolved_grid_rejected() {
        let f = character(1.0, &[c(1.0, 0.0)], 0.5, 100.0);
        assert!(matches!(bohr_coeff(&f, 3.0), Err(ApError::UnderResolved { .. })));
    }

    #[test]
    fn spectrum_of_two_characters() {
        let tt = 600.0;
        let h = 0.05;
        let f = Trajectory::sample(h, tt, "two", |s| {
            cvec(&[Complex64::new(0.0, s).exp(), Complex64::new(0.0, 2.0 * s).exp() * 0.7])
        })
        .unwrap();
        let grid = FrequencyGrid::covering(-4.0, 4.0, tt);
        let s = bohr_spectrum(&f, &grid, 0.1).unwrap();
        assert_eq!(s.coefficients.len(), 2);
        assert!((s.coefficients[0].r - 1.0).abs() <= 1e-4);
        assert!((s.coefficients[1].r - 2.0).abs() <= 1e-4);
        assert!(s.divergent.is_empty());
    }

    #[test]
    fn chirp_matches_direct_means() {
        let f = Trajectory::scalar(0.1, 200.0, "x", |s| Complex64::new(0.0, 1.3 * s).exp() * (0.2 * s).cos()).unwrap();
        let grid = FrequencyGrid { min: -2.0, max: 2.0, count: 301 };
        let means = chirp_means(&f, &grid);
        for k in (0..301).step_by(37) {
            let direct = window_mean(&f, grid.point(k), 0, f.len() - 1, Weighting::Smooth);
            assert!((&means[k] - direct).norm() < 1e-10);
        }
    }

    #[test]
    fn spectrum_grid_too_coarse_rejected() {
        let f = character(1.0, &[c(1.0, 0.0)], 0.1, 100.0);
        let grid = FrequencyGrid { min: -1.0, max: 1.0, count: 10 };
        assert!(matches!(bohr_spectrum(&f, &grid, 0.1), Err(ApError::GridTooCoarse { .. })));
    }

    #[test]
    fn jordan_orbit_diverges() {
        let f = Trajectory::sample(0.1, 400.0, "jordan", |s| cvec(&[c(s, 0.0), c(1.0, 0.0)])).unwrap();
        let grid = FrequencyGrid::covering(-1.0, 1.0, 400.0);
        let s = bohr_spectrum(&f, &grid, 0.1).unwrap();
        assert!(s.coefficients.is_empty());
        assert!(!s.divergent.is_empty());
        let d = &s.divergent[0];
        assert!(d.window_norms[2] > 3.0 * d.window_norms[0]);
    }

    #[test]
    fn zero_trajectory_has_empty_spectrum() {
        let f = Trajectory::scalar(0.1, 100.0, "zero", |_| ZERO).unwrap();
        let grid = FrequencyGrid::covering(-2.0, 2.0, 100.0);
        assert!(bohr_spectrum(&f, &grid, 1e-6).unwrap().coefficients.is_empty());
    }

    #[test]
    fn periodic_function_periods() {
        let h = 2.0 * PI / 400.0;
        let f = character(1.0, &[c(1.0, 0.0)], h, 200.0);
        let p = epsilon_periods(&f, 0.01, (0.0, 0.5 * f.horizon())).unwrap();
        assert!(p.relatively_dense);
        for &(a, b) in &p.clusters {
            let k = (0.5 * (a + b) / (2.0 * PI)).round();
            assert!((0.5 * (a + b) - 2.0 * PI * k).abs() < 0.01);
        }
        assert!((p.max_gap - 2.0 * PI).abs() < 0.1 * 2.0 * PI);
    }

    #[test]
    fn two_frequency_periods_match_brute_force() {
        let s2 = 2f64.sqrt();
        let h = 1e-3;
        let g = |s: f64| Complex64::new(0.0, s).exp() + Complex64::new(0.0, s2 * s).exp();
        let f = Trajectory::scalar(h, 1000.0, "two", g).unwrap();
        let p = epsilon_periods(&f, 0.1, (0.0, 500.0)).unwrap();
        assert!(p.count > 0 && p.max_gap.is_finite());
        // Oracle: independent exhaustive scan on a coarser sample of t.
        let samples: Vec<Complex64> = f.values().iter().map(|v| v[0]).collect();
        let periods = p.periods(h);
        for &tau in periods.iter().step_by(97) {
            let k = (tau / h).round() as usize;
            let worst = (0..samples.len() - k).map(|i| (samples[i + k] - samples[i]).norm()).fold(0.0, f64::max);
            assert!(worst <= 0.1);
        }
        let mut misses = 0;
        for k in (0..=500_000usize).step_by(7919) {
            let worst = (0..samples.len() - k).map(|i| (samples[i + k] - samples[i]).norm()).fold(0.0, f64::max);
            let listed = periods.iter().any(|&t| ((t / h).round() as usize) == k);
            if (worst <= 0.1) != listed {
                misses += 1;
            }
        }
        assert_eq!(misses, 0);
    }

    #[test]
    fn jordan_orbit_has_no_periods() {
        let f = Trajectory::sample(0.01, 100.0, "jordan", |s| cvec(&[c(s, 0.0), c(1.0, 0.0)])).unwrap();
        let p = epsilon_periods(&f, 0.1, (1.0, 50.0)).unwrap();
        assert_eq!(p.count, 0);
        assert!(p.max_gap >= 49.0);
        let rep = ap_verdict(&f, &ApOptions { eps: vec![0.1], relative: false, ..ApOptions::default() }).unwrap();
        assert_eq!(rep.verdict, Verdict::NotAp);
        assert!(rep.witnesses.iter().any(|w| matches!(w, Witness::Unbounded { .. })));
    }

    #[test]
    fn scan_must_fit_in_half_window() {
        let f = character(1.0, &[c(1.0, 0.0)], 0.1, 100.0);
        assert!(matches!(epsilon_periods(&f, 0.1, (0.0, 60.0)), Err(ApError::ScanOutOfRange(..))));
    }

    #[test]
    fn verdicts() {
        let h = 0.02;
        let tp = Trajectory::scalar(h, 600.0, "tp", |s| {
            Complex64::new(0.0, s).exp() + Complex64::new(0.0, 2f64.sqrt() * s).exp() * 0.5 + Complex64::new(0.0, PI * s).exp() * 0.25
        })
        .unwrap();
        let rep = ap_verdict(&tp, &ApOptions { max_scan: Some(150.0), ..ApOptions::default() }).unwrap();
        assert_eq!(rep.verdict, Verdict::ApConsistent, "{:?}", rep.rows);

        let grow = Trajectory::scalar(h, 600.0, "grow", |s| Complex64::new(0.01 * s, s).exp()).unwrap();
        let rep = ap_verdict(&grow, &ApOptions::default()).unwrap();
        assert_eq!(rep.verdict, Verdict::NotAp);
        assert!(rep.witnesses.iter().any(|w| matches!(w, Witness::SupNormDrift { .. })));
    }

    #[test]
    fn weak_verdict_splits_jordan_orbit() {
        let f = Trajectory::sample(0.05, 200.0, "jordan", |s| cvec(&[c(s, 0.0), c(1.0, 0.0)])).unwrap();
        let set = FunctionalSet::standard_and_random(2, 0, 1);
        let reps = weak_ap_verdict(&f, &set, &ApOptions::default()).unwrap();
        assert_eq!(reps[0].verdict, Verdict::NotAp);
        assert_eq!(reps[1].verdict, Verdict::ApConsistent);

        let g = character(1.0, &[c(1.0, 0.0), ZERO], 0.05, 200.0);
        let reps = weak_ap_verdict(&g, &set, &ApOptions::default()).unwrap();
        assert!(reps.iter().all(|r| r.verdict == Verdict::ApConsistent));
        let rand = FunctionalSet::standard_and_random(2, 3, 9);
        for y in &rand.covectors {
            let n: f64 = y.iter().map(|z| z.norm_sqr()).sum::<f64>();
            assert!((n - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn extension_of_character() {
        let f = character(1.0, &[c(1.0, 0.0), ZERO], 0.05, 300.0);
        let grid = FrequencyGrid::covering(-2.0, 2.0, 300.0);
        let s = bohr_spectrum(&f, &grid, 0.1).unwrap();
        let ext = ap_extend(&f, &s.coefficients, DEFAULT_EXTENSION_DELTA).unwrap();
        assert!((ext.eval(-PI) - cvec(&[c(-1.0, 0.0), ZERO])).norm() < 1e-8);
        let neg = ext.refined_sup(-300.0, 0.0);
        let pos = ext.refined_sup(0.0, 300.0);
        assert!((neg - pos).abs() < 1e-4);
    }

    #[test]
    fn extension_refused_for_incomplete_spectrum() {
        let f = Trajectory::scalar(0.05, 300.0, "two", |s| Complex64::new(0.0, s).exp() + Complex64::new(0.0, 2.0 * s).exp()).unwrap();
        let p = bohr_coeff(&f, 1.0).unwrap();
        assert!(matches!(ap_extend(&f, &[p], 1e-3), Err(ApError::ExtensionRefused { .. })));
    }

    #[test]
    fn landau_on_trig_polynomial() {
        let f = Trajectory::scalar(0.01, 100.0, "tp", |s| c(s.sin() + 0.3 * (3.0 * s).cos(), 0.0)).unwrap();
        let l = landau_check(&f, 1e-6);
        assert!(l.holds);
        assert!((l.sup_d1 - derivative_trajectory(&f).sup_norm()).abs() < 1e-12);
    }

    #[test]
    fn bohr_transform_is_linear() {
        let h = 0.05;
        let f = Trajectory::scalar(h, 400.0, "f", |s| Complex64::new(0.0, 0.7 * s).exp() + (1.1 * s).cos()).unwrap();
        let g = Trajectory::scalar(h, 400.0, "g", |s| Complex64::new(0.0, -0.7 * s).exp() + Complex64::new(0.0, 0.7 * s).exp() * 2.0).unwrap();
        let alpha = c(0.4, -1.3);
        let fg = f.combine(alpha, &g);
        for &r in &[0.7, -0.7, 1.1, 0.3] {
            let a = bohr_coeff(&fg, r).unwrap();
            let b = bohr_coeff(&f, r).unwrap();
            let cc = bohr_coeff(&g, r).unwrap();
            let lhs = a.vector();
            let rhs = b.vector() * alpha + cc.vector();
            let tol = a.error_estimate + alpha.norm() * b.error_estimate + cc.error_estimate;
            assert!((lhs - rhs).norm() <= tol);
        }
    }

    #[test]
    fn shift_invariance_of_means() {
        let f = Trajectory::scalar(0.05, 800.0, "f", |s| Complex64::new(0.0, 0.9 * s).exp() * 1.5 + (2.3 * s).sin()).unwrap();
        for &r in &[0.9, 2.3, 1.0] {
            let p = bohr_coeff(&f, r).unwrap();
            let shifted = window_mean(&f, r, 400, 12000, Weighting::Smooth);
            assert!((shifted - p.vector()).norm() <= p.error_estimate + 1e-9);
        }
    }
}
