//! Integrated C-semigroups and C-cosine functions over model pairs, the
//! distribution actions they induce, and the defining axioms.
//!
//! With `S_0(t) = e^{tA}C` and `S_n = g_n ∗₀ S_0`, the distribution semigroup
//! acts on a test function by `G(φ) = (-1)^n ∫ φ^{(n)}(t) S_n(t) dt`. The
//! cosine case replaces `e^{tA}` by `cosh(t√A)`. Two evaluation strategies
//! exist: per-mode closed-form kernels in an eigenbasis, and matrix
//! exponentials for everything else.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{self, CMat, CVec, LinalgError};
use crate::modelops::{self, ModelError, OperatorPair};
use crate::quad::{self, QuadOptions};
use crate::testfn::{self, NormalizerZeta, SampledFunction, SmoothFn, TestFunction};
use crate::trajectory::{ExtendedTrajectory, Trajectory, TrajectoryError};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Semigroup,
    Cosine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    EigenClosedForm,
    ExponentialQuadrature,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SemigroupError {
    #[error("negative time {0}")]
    NegativeTime(f64),
    #[error("test function support ends at {hi}, beyond the horizon {tau}")]
    BeyondHorizon { hi: f64, tau: f64 },
    #[error("vector is outside the solution space (tail ratio {0:.3e})")]
    Inadmissible(f64),
    #[error("operation requires the cosine kind")]
    NotCosine,
    #[error("closed-form strategy needs a well-conditioned eigenbasis")]
    EigenUnavailable,
    #[error("test function must be supported in [0, ∞)")]
    NegativeSupport,
    #[error("dimension mismatch: expected {want}, got {got}")]
    Dimension { want: usize, got: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Trajectory(#[from] TrajectoryError),
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// `g_n(t) = t^{n-1}/(n-1)!` for `n ≥ 1`.
pub fn g_kernel(n: usize, t: f64) -> f64 {
    assert!(n >= 1);
    t.powi(n as i32 - 1) / factorial(n - 1)
}

/// `(g_n ∗₀ e^{λ·})(t)`.
///
/// Equals `λ^{-n}(e^{λt} - Σ_{k<n} (λt)^k/k!)`, evaluated as
/// `t^n Σ_j (λt)^j/(j+n)!` when `|λt| < 1`.
pub fn kernel_s(lambda: Complex64, n: usize, t: f64) -> Complex64 {
    if n == 0 {
        return (lambda * t).exp();
    }
    if t == 0.0 {
        return ZERO;
    }
    let z = lambda * t;
    if z.norm() < 1.0 {
        let mut term = Complex64::new(t.powi(n as i32) / factorial(n), 0.0);
        let mut sum = term;
        for j in 1..60 {
            term *= z / (j + n) as f64;
            sum += term;
            if term.norm() <= 1e-18 * sum.norm() {
                break;
            }
        }
        return sum;
    }
    let mut partial = ZERO;
    let mut term = ONE;
    for k in 0..n {
        partial += term;
        term *= z / (k + 1) as f64;
    }
    (z.exp() - partial) / lambda.powi(n as i32)
}

/// `(g_n ∗₀ cosh(√λ ·))(t)`.
pub fn kernel_c(lambda: Complex64, n: usize, t: f64) -> Complex64 {
    let mu = lambda.sqrt();
    if (mu * t).norm() < 1.0 {
        // Σ_k λ^k t^{2k+n}/(2k+n)!
        let mut term = Complex64::new(t.powi(n as i32) / factorial(n), 0.0);
        let mut sum = term;
        let t2 = t * t;
        for k in 1..60 {
            term *= lambda * t2 / ((2 * k + n - 1) * (2 * k + n)) as f64;
            sum += term;
            if term.norm() <= 1e-18 * sum.norm().max(f64::MIN_POSITIVE) {
                break;
            }
        }
        return sum;
    }
    (kernel_s(mu, n, t) + kernel_s(-mu, n, t)) * 0.5
}

#[derive(Debug, Clone)]
struct EigenBasis {
    values: Vec<Complex64>,
    v: CMat,
    v_inv: CMat,
}

/// `S_n` (semigroup kind) or `C_n` (cosine kind) over a model pair.
#[derive(Debug, Clone)]
pub struct IntegratedFamily {
    pair: OperatorPair,
    n: usize,
    kind: Kind,
    strategy: Strategy,
    horizon: f64,
    a: CMat,
    c: CMat,
    /// `[[0, I], [A, 0]]` for the cosine kind.
    a_block: Option<CMat>,
    eigen: Option<EigenBasis>,
    corruption: f64,
    quad: QuadOptions,
}

/// Horizon `64·2π/g` where `g` is the smallest gap between distinct
/// oscillation frequencies of the spectrum.
pub fn default_horizon(values: &[Complex64], kind: Kind) -> f64 {
    let mut freqs: Vec<f64> = values
        .iter()
        .map(|&l| match kind {
            Kind::Semigroup => l.im,
            Kind::Cosine => l.sqrt().im.abs(),
        })
        .collect();
    freqs.sort_by(f64::total_cmp);
    freqs.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    let gap = freqs.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    let gap = if gap.is_finite() { gap.min(1.0) } else { 1.0 };
    64.0 * 2.0 * std::f64::consts::PI / gap
}

impl IntegratedFamily {
    /// Picks the closed-form strategy whenever the eigenbasis has condition
    /// number below `1e8`.
    pub fn new(pair: OperatorPair, kind: Kind, n: usize) -> Result<Self, SemigroupError> {
        let a = pair.a_matrix();
        let c = pair.c_matrix();
        let d = pair.dim();
        let eigen = match &pair {
            OperatorPair::Spectral(s) => Some(EigenBasis {
                values: s.modes().iter().map(|m| m.lambda).collect(),
                v: CMat::identity(d, d),
                v_inv: CMat::identity(d, d),
            }),
            OperatorPair::Matrix(_) => {
                let e = linalg::eigen_decompose(&a)?;
                match &e.inverse {
                    Some(inv) if e.condition < 1e8 => Some(EigenBasis {
                        values: e.values.clone(),
                        v: e.vectors.clone(),
                        v_inv: inv.clone(),
                    }),
                    _ => None,
                }
            }
        };
        let strategy = if eigen.is_some() { Strategy::EigenClosedForm } else { Strategy::ExponentialQuadrature };
        let a_block = (kind == Kind::Cosine).then(|| cosine_block(&a));
        let horizon = match &eigen {
            Some(e) => default_horizon(&e.values, kind),
            None => 64.0 * 2.0 * std::f64::consts::PI,
        };
        Ok(Self {
            pair,
            n,
            kind,
            strategy,
            horizon,
            a,
            c,
            a_block,
            eigen,
            corruption: 1.0,
            quad: QuadOptions::with_tol(1e-13, 1e-12),
        })
    }

    pub fn with_strategy(mut self, strategy: Strategy) -> Result<Self, SemigroupError> {
        if strategy == Strategy::EigenClosedForm && self.eigen.is_none() {
            return Err(SemigroupError::EigenUnavailable);
        }
        self.strategy = strategy;
        Ok(self)
    }

    pub fn with_horizon(mut self, tau: f64) -> Self {
        self.horizon = tau;
        self
    }

    pub fn with_order(&self, n: usize) -> Self {
        let mut out = self.clone();
        out.n = n;
        out
    }

    /// Multiplies every `S_n` and every orbit by `factor`; exists to build
    /// deliberately broken families.
    pub fn corrupted(mut self, factor: f64) -> Self {
        self.corruption = factor;
        self
    }

    pub fn pair(&self) -> &OperatorPair {
        &self.pair
    }
    pub fn order(&self) -> usize {
        self.n
    }
    pub fn kind(&self) -> Kind {
        self.kind
    }
    pub fn strategy(&self) -> Strategy {
        self.strategy
    }
    pub fn horizon(&self) -> f64 {
        self.horizon
    }
    pub fn dim(&self) -> usize {
        self.a.nrows()
    }
    pub fn a(&self) -> &CMat {
        &self.a
    }
    pub fn c(&self) -> &CMat {
        &self.c
    }

    pub fn eigenvalues(&self) -> Option<&[Complex64]> {
        self.eigen.as_ref().map(|e| e.values.as_slice())
    }

    fn use_eigen(&self) -> Option<&EigenBasis> {
        match self.strategy {
            Strategy::EigenClosedForm => self.eigen.as_ref(),
            Strategy::ExponentialQuadrature => None,
        }
    }

    fn check_dim(&self, x: &CVec) -> Result<(), SemigroupError> {
        if x.len() != self.dim() {
            return Err(SemigroupError::Dimension { want: self.dim(), got: x.len() });
        }
        Ok(())
    }

    fn mode_kernel(&self, lambda: Complex64, order: usize, t: f64) -> Complex64 {
        match self.kind {
            Kind::Semigroup => kernel_s(lambda, order, t),
            Kind::Cosine => kernel_c(lambda, order, t),
        }
    }

    /// `e^{tA}` or `cosh(t√A)` as a matrix, by exponentiation.
    fn propagator(&self, t: f64) -> CMat {
        let d = self.dim();
        match self.kind {
            Kind::Semigroup => linalg::expm(&(&self.a * Complex64::new(t, 0.0))),
            Kind::Cosine => {
                let e = linalg::expm(&(self.a_block.as_ref().unwrap() * Complex64::new(t, 0.0)));
                e.view((d, d), (d, d)).into_owned()
            }
        }
    }

    /// `S_order(t)` as a matrix via the augmented exponential
    /// `exp(t [[B, K, 0, …], [0, N]])`, where `N` is a nilpotent chain that
    /// produces `g_order`.
    fn sn_block(&self, order: usize, t: f64) -> CMat {
        let d = self.dim();
        if order == 0 {
            return self.propagator(t) * &self.c;
        }
        let (gen, k, m) = match self.kind {
            Kind::Semigroup => (self.a.clone(), self.c.clone(), d),
            Kind::Cosine => {
                let mut k = CMat::zeros(2 * d, d);
                k.view_mut((d, 0), (d, d)).copy_from(&self.c);
                (self.a_block.clone().unwrap(), k, 2 * d)
            }
        };
        let size = m + order * d;
        let mut big = CMat::zeros(size, size);
        big.view_mut((0, 0), (m, m)).copy_from(&gen);
        big.view_mut((0, m + (order - 1) * d), (m, d)).copy_from(&k);
        for j in 1..order {
            let row = m + j * d;
            let col = m + (j - 1) * d;
            big.view_mut((row, col), (d, d)).copy_from(&CMat::identity(d, d));
        }
        let e = linalg::expm(&(big * Complex64::new(t, 0.0)));
        let block = e.view((0, m), (m, d)).into_owned();
        match self.kind {
            Kind::Semigroup => block,
            Kind::Cosine => block.view((d, 0), (d, d)).into_owned(),
        }
    }

    /// `S_order(t)` as a matrix, corruption included.
    pub fn sn_matrix(&self, order: usize, t: f64) -> CMat {
        let raw = match self.use_eigen() {
            Some(e) => {
                let k: Vec<Complex64> = e.values.iter().map(|&l| self.mode_kernel(l, order, t)).collect();
                &e.v * linalg::diag(&k) * &e.v_inv * &self.c
            }
            None => self.sn_block(order, t),
        };
        raw * Complex64::new(self.corruption, 0.0)
    }

    /// `S_n(t)x`. The exponential strategy integrates
    /// `g_n(t-s) e^{sA} C x` adaptively.
    pub fn eval_sn(&self, t: f64, x: &CVec) -> Result<CVec, SemigroupError> {
        self.eval_sn_order(self.n, t, x)
    }

    pub fn eval_sn_order(&self, order: usize, t: f64, x: &CVec) -> Result<CVec, SemigroupError> {
        if t < 0.0 {
            return Err(SemigroupError::NegativeTime(t));
        }
        self.check_dim(x)?;
        let scale = Complex64::new(self.corruption, 0.0);
        match self.use_eigen() {
            Some(e) => {
                let y = &e.v_inv * (&self.c * x);
                let z = CVec::from_iterator(
                    y.len(),
                    y.iter().zip(&e.values).map(|(yi, &l)| yi * self.mode_kernel(l, order, t)),
                );
                Ok(&e.v * z * scale)
            }
            None => {
                let cx = &self.c * x;
                if order == 0 {
                    return Ok(self.propagator(t) * cx * scale);
                }
                let panels = 4 + (linalg::op_norm(&self.a).sqrt().max(1.0) * t).ceil() as usize;
                let pts = testfn::uniform_nodes(0.0, t, panels);
                let q = quad::integrate_with_breakpoints(
                    |s: f64| self.propagator(s) * &cx * Complex64::new(g_kernel(order, t - s), 0.0),
                    &pts,
                    &self.quad,
                );
                Ok(q.value * scale)
            }
        }
    }

    /// `G(δ_t)x`: `e^{tA}x` or `cosh(t√A)x`.
    pub fn g_delta(&self, t: f64, x: &CVec) -> Result<CVec, SemigroupError> {
        if t < 0.0 {
            return Err(SemigroupError::NegativeTime(t));
        }
        self.check_dim(x)?;
        let ratio = self.pair.admissibility_ratio(x);
        if ratio > 1.0 {
            return Err(SemigroupError::Inadmissible(ratio));
        }
        Ok(self.g_delta_unchecked(t, x))
    }

    fn g_delta_unchecked(&self, t: f64, x: &CVec) -> CVec {
        let scale = Complex64::new(self.corruption, 0.0);
        match self.use_eigen() {
            Some(e) => {
                let y = &e.v_inv * x;
                let z = CVec::from_iterator(
                    y.len(),
                    y.iter().zip(&e.values).map(|(yi, &l)| yi * self.mode_kernel(l, 0, t)),
                );
                &e.v * z * scale
            }
            None => self.propagator(t) * x * scale,
        }
    }

    /// `(d/dt)^n C⁻¹ S_n(t) x` by central differences with four levels of
    /// Richardson extrapolation. `S_n` comes from a fixed composite rule
    /// applied to `g_n(t-s) e^{sA} C x` with only matrix exponentials, so
    /// this path shares nothing with the closed-form kernels.
    pub fn g_delta_by_differentiation(&self, t: f64, x: &CVec) -> Result<CVec, SemigroupError> {
        if t < 0.0 {
            return Err(SemigroupError::NegativeTime(t));
        }
        self.check_dim(x)?;
        let n = self.n;
        let c_lu = self.c.clone().lu();
        let cx = &self.c * x;
        let scale = Complex64::new(self.corruption, 0.0);
        let rho = linalg::op_norm(&self.a).max(1.0);
        let freq = match self.kind {
            Kind::Semigroup => rho,
            Kind::Cosine => rho.sqrt(),
        };
        let h0 = f64::EPSILON.powf(1.0 / (n as f64 + 2.0)) * 100.0 / freq;
        let panels = 8 + (2.0 * freq * (t + 4.0 * h0)).ceil() as usize;
        let c_inv_sn = |tt: f64| -> CVec {
            let sn = if n == 0 {
                self.propagator(tt) * &cx
            } else {
                quad::composite_gk15(
                    |s: f64| self.propagator(s) * &cx * Complex64::new(g_kernel(n, tt - s), 0.0),
                    0.0,
                    tt,
                    panels,
                )
            };
            c_lu.solve(&sn).unwrap_or_else(|| CVec::zeros(x.len()))
        };
        if n == 0 {
            return Ok(c_inv_sn(t) * scale);
        }
        let binom = |k: usize| factorial(n) / (factorial(k) * factorial(n - k));
        let diff = |h: f64| -> CVec {
            let mut acc = CVec::zeros(x.len());
            for k in 0..=n {
                let off = (n as f64 / 2.0 - k as f64) * h;
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                acc += c_inv_sn(t + off) * Complex64::new(sign * binom(k), 0.0);
            }
            acc / Complex64::new(h.powi(n as i32), 0.0)
        };
        let levels = 4;
        let mut table: Vec<CVec> = (0..levels).map(|j| diff(h0 / 2f64.powi(j as i32))).collect();
        for m in 1..levels {
            let f = 4f64.powi(m as i32);
            for j in (m..levels).rev() {
                table[j] = (&table[j] * Complex64::new(f, 0.0) - &table[j - 1]) / Complex64::new(f - 1.0, 0.0);
            }
        }
        Ok(table[levels - 1].clone() * scale)
    }

    fn integration_range(&self, phi: &dyn SmoothFn) -> Result<(f64, f64, Vec<f64>), SemigroupError> {
        let (lo, hi) = phi.support();
        if hi >= self.horizon {
            return Err(SemigroupError::BeyondHorizon { hi, tau: self.horizon });
        }
        let start = lo.max(0.0);
        let mut pts: Vec<f64> = phi.grid().into_iter().filter(|&t| t > start && t < hi).collect();
        // Closed-form test functions come with a fine sampling grid; a coarse
        // subset is enough for adaptive quadrature.
        if pts.len() > 64 && phi.max_derivative() > 16 {
            let stride = pts.len() / 32;
            pts = pts.into_iter().step_by(stride).collect();
        }
        let mut all = Vec::with_capacity(pts.len() + 2);
        all.push(start);
        all.extend(pts);
        all.push(hi.max(start));
        Ok((start, hi, all))
    }

    /// `G(φ)` as a matrix, via the order-`n` representation plus boundary
    /// terms `Σ_{j<n} (-1)^j φ^{(j)}(hi) S_{j+1}(hi)` that vanish for genuine
    /// test functions and keep truncated sampled functions consistent.
    pub fn g_phi_matrix(&self, phi: &dyn SmoothFn) -> Result<CMat, SemigroupError> {
        let n = self.n;
        let (start, hi, pts) = self.integration_range(phi)?;
        let d = self.dim();
        let sign = if n.is_multiple_of(2) { 1.0 } else { -1.0 };
        let mut out = CMat::zeros(d, d);
        if hi <= start {
            return Ok(out);
        }
        match self.use_eigen() {
            Some(e) => {
                let q = quad::integrate_with_breakpoints(
                    |t: f64| {
                        let w = phi.derivative_at(n, t);
                        CVec::from_iterator(e.values.len(), e.values.iter().map(|&l| w * self.mode_kernel(l, n, t)))
                    },
                    &pts,
                    &self.quad,
                );
                let mut g: Vec<Complex64> = q.value.iter().map(|z| z * sign).collect();
                for j in 0..n {
                    let w = phi.derivative_at(j, hi);
                    if w != ZERO {
                        let s = if j % 2 == 0 { 1.0 } else { -1.0 };
                        for (gk, &l) in g.iter_mut().zip(&e.values) {
                            *gk += w * self.mode_kernel(l, j + 1, hi) * s;
                        }
                    }
                }
                out = &e.v * linalg::diag(&g) * &e.v_inv * &self.c;
            }
            None => {
                let q = quad::integrate_with_breakpoints(
                    |t: f64| {
                        let w = phi.derivative_at(n, t);
                        let m = self.sn_block(n, t) * w;
                        CVec::from_column_slice(m.as_slice())
                    },
                    &pts,
                    &self.quad,
                );
                out = CMat::from_column_slice(d, d, q.value.as_slice()) * Complex64::new(sign, 0.0);
                for j in 0..n {
                    let w = phi.derivative_at(j, hi);
                    if w != ZERO {
                        let s = if j % 2 == 0 { 1.0 } else { -1.0 };
                        out += self.sn_block(j + 1, hi) * (w * s);
                    }
                }
            }
        }
        Ok(out * Complex64::new(self.corruption, 0.0))
    }

    pub fn g_phi(&self, phi: &dyn SmoothFn, x: &CVec) -> Result<CVec, SemigroupError> {
        self.check_dim(x)?;
        Ok(self.g_phi_matrix(phi)? * x)
    }

    /// `G⁻¹(φ) = -G(I(φ))`.
    pub fn g_inv_phi_matrix(&self, phi: &dyn SmoothFn, zeta: &NormalizerZeta) -> Result<CMat, SemigroupError> {
        let i = testfn::antideriv_i(phi, zeta);
        Ok(-self.g_phi_matrix(&i)?)
    }

    /// Orbit `t ↦ G(δ_t)x` on `0..T` with step `h`.
    pub fn orbit(&self, x: &CVec, h: f64, horizon: f64) -> Result<Trajectory, SemigroupError> {
        self.g_delta(0.0, x)?;
        let note = format!("G(δ_t)x, {:?} kind, {:?}", self.kind, self.strategy);
        Ok(Trajectory::sample(h, horizon, note, |t| self.g_delta_unchecked(t, x))?)
    }
}

/// `[[0, I], [A, 0]]`.
pub fn cosine_block(a: &CMat) -> CMat {
    let d = a.nrows();
    let mut m = CMat::zeros(2 * d, 2 * d);
    m.view_mut((0, d), (d, d)).copy_from(&CMat::identity(d, d));
    m.view_mut((d, 0), (d, d)).copy_from(a);
    m
}

/// `(C ⊕ C)` together with `[[0, I], [A, 0]]` on `E ⊕ E`.
#[derive(Debug, Clone)]
pub struct CosineReduction {
    pub pair: OperatorPair,
    d: usize,
}

pub fn cosine_reduction(pair: &OperatorPair) -> Result<CosineReduction, SemigroupError> {
    let d = pair.dim();
    let a = pair.a_matrix();
    let c = pair.c_matrix();
    let mut cc = CMat::zeros(2 * d, 2 * d);
    cc.view_mut((0, 0), (d, d)).copy_from(&c);
    cc.view_mut((d, d), (d, d)).copy_from(&c);
    let big = modelops::make_matrix_pair(cosine_block(&a), cc)?;
    Ok(CosineReduction { pair: big, d })
}

impl CosineReduction {
    pub fn base_dim(&self) -> usize {
        self.d
    }

    pub fn pi1(&self, v: &CVec) -> CVec {
        v.rows(0, self.d).into_owned()
    }

    pub fn pi2(&self, v: &CVec) -> CVec {
        v.rows(self.d, self.d).into_owned()
    }

    /// `(0, x)`.
    pub fn embed(&self, x: &CVec) -> CVec {
        let mut v = CVec::zeros(2 * self.d);
        v.rows_mut(self.d, self.d).copy_from(x);
        v
    }

    pub fn family(&self, n: usize) -> Result<IntegratedFamily, SemigroupError> {
        IntegratedFamily::new(self.pair.clone(), Kind::Semigroup, n)
    }

    /// `π₂(𝒢(δ_t)(0, x))`.
    pub fn g_delta(&self, family: &IntegratedFamily, t: f64, x: &CVec) -> Result<CVec, SemigroupError> {
        Ok(self.pi2(&family.g_delta(t, &self.embed(x))?))
    }
}

/// Residual of a defining axiom, measured as a matrix norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxiomResidual {
    /// `‖L - R‖ / max(‖L‖, ‖R‖)`, or 0 when both sides vanish.
    pub relative: f64,
    pub absolute: f64,
    pub lhs_norm: f64,
    pub rhs_norm: f64,
}

fn residual_of(lhs: &CMat, rhs: &CMat) -> AxiomResidual {
    let absolute = linalg::op_norm(&(lhs - rhs));
    let lhs_norm = linalg::op_norm(lhs);
    let rhs_norm = linalg::op_norm(rhs);
    let scale = lhs_norm.max(rhs_norm);
    let relative = if scale <= 1e-300 { 0.0 } else { absolute / scale };
    AxiomResidual { relative, absolute, lhs_norm, rhs_norm }
}

fn require_d0(f: &TestFunction) -> Result<(), SemigroupError> {
    if f.support_interval().0 < 0.0 {
        return Err(SemigroupError::NegativeSupport);
    }
    Ok(())
}

/// `G(φ∗₀ψ)C = G(φ)G(ψ)`.
pub fn check_cds_axiom(
    family: &IntegratedFamily,
    phi: &TestFunction,
    psi: &TestFunction,
) -> Result<AxiomResidual, SemigroupError> {
    require_d0(phi)?;
    require_d0(psi)?;
    let conv = testfn::convolve0(phi, psi).map_err(|_| SemigroupError::NegativeSupport)?;
    check_cds_axiom_with(family, phi, psi, &conv)
}

/// [`check_cds_axiom`] with a precomputed `conv = φ∗₀ψ`.
pub fn check_cds_axiom_with(
    family: &IntegratedFamily,
    phi: &TestFunction,
    psi: &TestFunction,
    conv: &SampledFunction,
) -> Result<AxiomResidual, SemigroupError> {
    let lhs = family.g_phi_matrix(conv)? * family.c();
    let rhs = family.g_phi_matrix(phi)? * family.g_phi_matrix(psi)?;
    Ok(residual_of(&lhs, &rhs))
}

/// `G⁻¹(φ∗₀ψ)C = G⁻¹(φ)G(ψ) + G(φ)G⁻¹(ψ)` with `G⁻¹(φ) = -G(I(φ))`.
pub fn check_cdcf_axiom(
    family: &IntegratedFamily,
    phi: &TestFunction,
    psi: &TestFunction,
    zeta: &NormalizerZeta,
) -> Result<AxiomResidual, SemigroupError> {
    if family.kind() != Kind::Cosine {
        return Err(SemigroupError::NotCosine);
    }
    require_d0(phi)?;
    require_d0(psi)?;
    let conv: SampledFunction = testfn::convolve0(phi, psi).map_err(|_| SemigroupError::NegativeSupport)?;
    check_cdcf_axiom_with(family, phi, psi, zeta, &conv)
}

/// [`check_cdcf_axiom`] with a precomputed `conv = φ∗₀ψ`.
pub fn check_cdcf_axiom_with(
    family: &IntegratedFamily,
    phi: &TestFunction,
    psi: &TestFunction,
    zeta: &NormalizerZeta,
    conv: &SampledFunction,
) -> Result<AxiomResidual, SemigroupError> {
    if family.kind() != Kind::Cosine {
        return Err(SemigroupError::NotCosine);
    }
    let lhs = family.g_inv_phi_matrix(conv, zeta)? * family.c();
    let g_phi = family.g_phi_matrix(phi)?;
    let g_psi = family.g_phi_matrix(psi)?;
    let gi_phi = family.g_inv_phi_matrix(phi, zeta)?;
    let gi_psi = family.g_inv_phi_matrix(psi, zeta)?;
    let rhs = &gi_phi * &g_psi + &g_phi * &gi_psi;
    Ok(residual_of(&lhs, &rhs))
}

/// `‖A ∫₀^t u - (u(t) - u(0))‖` (first order) or
/// `‖A ∫₀^t (t-s) u(s) ds - (u(t) - u(0))‖` (second order, zero velocity).
pub fn mild_residual_of<F>(a: &CMat, kind: Kind, u: F, t: f64) -> f64
where
    F: Fn(f64) -> CVec,
{
    let opts = QuadOptions::with_tol(1e-13, 1e-12);
    let panels = 4 + (linalg::op_norm(a).max(1.0) * t).ceil() as usize;
    let pts = testfn::uniform_nodes(0.0, t, panels);
    let integral = match kind {
        Kind::Semigroup => quad::integrate_with_breakpoints(&u, &pts, &opts).value,
        Kind::Cosine => quad::integrate_with_breakpoints(|s| u(s) * Complex64::new(t - s, 0.0), &pts, &opts).value,
    };
    (a * integral - (u(t) - u(0.0))).norm()
}

/// Mild-solution residual for the orbit of `x` up to time `t`.
pub fn mild_solution_residual(family: &IntegratedFamily, x: &CVec, t: f64) -> Result<f64, SemigroupError> {
    family.g_delta(0.0, x)?;
    if t < 0.0 {
        return Err(SemigroupError::NegativeTime(t));
    }
    Ok(mild_residual_of(family.a(), family.kind(), |s| family.g_delta_unchecked(s, x), t))
}

fn g_conv<F: Fn(f64) -> CVec>(order: usize, f: F, t: f64, dim: usize, freq: f64) -> CVec {
    if t == 0.0 {
        return CVec::zeros(dim);
    }
    let opts = QuadOptions::with_tol(1e-13, 1e-12);
    let panels = 4 + (freq.max(1.0) * t).ceil() as usize;
    let pts = testfn::uniform_nodes(0.0, t, panels);
    quad::integrate_with_breakpoints(|s| f(s) * Complex64::new(g_kernel(order, t - s), 0.0), &pts, &opts).value
}

fn extension_frequency(ext: &ExtendedTrajectory) -> f64 {
    ext.coefficients.iter().map(|(r, _)| r.abs()).fold(1.0, f64::max)
}

/// `S⁻_n(t)x = ∫₀^t g_n(t-s) C S(-s)x ds`, where `S(-s)x` is read from the
/// extension of the orbit of `x`. For `n = 0` this is `C S(-t)x`.
pub fn negative_integrated(
    family: &IntegratedFamily,
    ext: &ExtendedTrajectory,
    t: f64,
) -> Result<CVec, SemigroupError> {
    if t < 0.0 {
        return Err(SemigroupError::NegativeTime(t));
    }
    let c = family.c();
    let n = family.order();
    if n == 0 {
        return Ok(c * ext.eval(-t));
    }
    Ok(g_conv(n, |s| c * ext.eval(-s), t, family.dim(), extension_frequency(ext)))
}

/// Residual of `(-A) ∫₀^t S⁻_n(r)x dr = S⁻_n(t)x - g_{n+1}(t) Cx`,
/// the integrated-semigroup identity for the generator `-A`.
pub fn negative_identity_residual(
    family: &IntegratedFamily,
    ext: &ExtendedTrajectory,
    t: f64,
) -> Result<f64, SemigroupError> {
    let c = family.c();
    let n = family.order();
    let x0 = ext.eval(0.0);
    let lhs_int = g_conv(n + 1, |s| c * ext.eval(-s), t, family.dim(), extension_frequency(ext));
    let lhs = -(family.a() * lhs_int);
    let rhs = negative_integrated(family, ext, t)? - c * x0 * Complex64::new(g_kernel(n + 1, t), 0.0);
    Ok((lhs - rhs).norm())
}

/// Batch evaluation of `G(δ_t)x` over many times, in parallel.
pub fn g_delta_batch(family: &IntegratedFamily, ts: &[f64], x: &CVec) -> Result<Vec<CVec>, SemigroupError> {
    ts.par_iter().map(|&t| family.g_delta(t, x)).collect()
}
