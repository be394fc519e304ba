//! Compactly supported smooth test functions.
//!
//! A [`TestFunction`] is `P(t) * exp(1/ρ² - 1/((t-a)(b-t)))` on `(a, b)` and
//! zero elsewhere, with `ρ = (b-a)/2`. Every derivative has the shape
//! `m(t) * P_k(u) / q(u)^{2k}` where `u = t - c`, `q = ρ² - u²` and `m` is the
//! mollifier, so derivatives of any order are exact up to rounding.
//!
//! Convolutions and antiderivatives have no closed form and come back as
//! [`SampledFunction`]s carrying derivative layers at the nodes.

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::quad::{self, QuadOptions};
use nalgebra::DVector;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
/// Number of derivative polynomials precomputed per function.
const CACHED_ORDERS: usize = 8;
pub const DEFAULT_CELLS: usize = 2048;
pub const DEFAULT_LAYERS: usize = 5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TestFnError {
    #[error("degenerate support [{0}, {1}]")]
    DegenerateSupport(f64, f64),
    #[error("empty polynomial")]
    EmptyPolynomial,
    #[error("support [{0}, {1}] extends below 0")]
    NegativeSupport(f64, f64),
    #[error("supports differ: [{0}, {1}] vs [{2}, {3}]")]
    SupportMismatch(f64, f64, f64, f64),
    #[error("derivative orders differ: {0} vs {1}")]
    OrderMismatch(usize, usize),
}

/// Smooth compactly supported scalar functions that can be integrated
/// against operator families.
pub trait SmoothFn: Send + Sync {
    /// Closed interval outside which every derivative vanishes.
    fn support(&self) -> (f64, f64);
    /// Highest derivative order `derivative_at` supports.
    fn max_derivative(&self) -> usize;
    fn derivative_at(&self, k: usize, t: f64) -> Complex64;
    /// Breakpoints covering the support; quadrature panels and sample nodes
    /// are aligned to these.
    fn grid(&self) -> Vec<f64>;
    fn integral(&self) -> Complex64;

    fn value_at(&self, t: f64) -> Complex64 {
        self.derivative_at(0, t)
    }
}

fn poly_eval(p: &[Complex64], u: f64) -> Complex64 {
    p.iter().rev().fold(ZERO, |acc, &c| acc * u + c)
}

fn poly_add(p: &[Complex64], q: &[Complex64]) -> Vec<Complex64> {
    let n = p.len().max(q.len());
    (0..n)
        .map(|i| p.get(i).copied().unwrap_or(ZERO) + q.get(i).copied().unwrap_or(ZERO))
        .collect()
}

fn poly_mul(p: &[Complex64], q: &[Complex64]) -> Vec<Complex64> {
    if p.is_empty() || q.is_empty() {
        return Vec::new();
    }
    let mut out = vec![ZERO; p.len() + q.len() - 1];
    for (i, &a) in p.iter().enumerate() {
        for (j, &b) in q.iter().enumerate() {
            out[i + j] += a * b;
        }
    }
    out
}

fn poly_deriv(p: &[Complex64]) -> Vec<Complex64> {
    p.iter().enumerate().skip(1).map(|(i, &c)| c * i as f64).collect()
}

fn poly_scale(p: &[Complex64], s: Complex64) -> Vec<Complex64> {
    p.iter().map(|&c| c * s).collect()
}

/// Coefficients of `p(u + shift)`.
fn poly_shift(p: &[Complex64], shift: f64) -> Vec<Complex64> {
    let mut out = vec![ZERO; p.len()];
    // Horner in polynomial arithmetic: out = (...(p_n)(u+s) + p_{n-1})...
    for &c in p.iter().rev() {
        let mut next = vec![ZERO; out.len()];
        for i in 0..out.len() {
            if i + 1 < next.len() {
                next[i + 1] += out[i];
            }
            next[i] += out[i] * shift;
        }
        next[0] += c;
        out = next;
    }
    out
}

/// Next term of the derivative recurrence:
/// `P_{k+1} = q' P_k + q² P_k' - 2k q q' P_k` in the centered variable.
fn next_derivative_poly(p: &[Complex64], k: usize, rho2: f64) -> Vec<Complex64> {
    let q = [Complex64::new(rho2, 0.0), ZERO, Complex64::new(-1.0, 0.0)];
    let dq = [ZERO, Complex64::new(-2.0, 0.0)];
    let q2 = poly_mul(&q, &q);
    let qdq = poly_mul(&q, &dq);
    let t1 = poly_mul(&dq, p);
    let t2 = poly_mul(&q2, &poly_deriv(p));
    let t3 = poly_scale(&poly_mul(&qdq, p), Complex64::new(-2.0 * k as f64, 0.0));
    poly_add(&poly_add(&t1, &t2), &t3)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction {
    a: f64,
    b: f64,
    center: f64,
    radius: f64,
    /// `1/ρ²`, the log of the normalization constant.
    log_norm: f64,
    /// Derivative order relative to the base function.
    order: usize,
    /// `P_0, P_1, …` in the centered variable.
    polys: Vec<Vec<Complex64>>,
}

/// `poly(t) * exp(-1/((t-a)(b-t)))` on `(a, b)`, normalized to sup-norm 1 for
/// `poly ≡ 1`. Coefficients are in ascending powers of `t`.
pub fn make_bump(a: f64, b: f64, poly: &[Complex64]) -> Result<TestFunction, TestFnError> {
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return Err(TestFnError::DegenerateSupport(a, b));
    }
    if poly.is_empty() {
        return Err(TestFnError::EmptyPolynomial);
    }
    let base = poly_shift(poly, 0.5 * (a + b));
    Ok(TestFunction::from_centered(a, b, base, 0))
}

/// `make_bump` with a real polynomial.
pub fn bump(a: f64, b: f64, poly: &[f64]) -> Result<TestFunction, TestFnError> {
    let p: Vec<Complex64> = poly.iter().map(|&c| Complex64::new(c, 0.0)).collect();
    make_bump(a, b, &p)
}

impl TestFunction {
    fn from_centered(a: f64, b: f64, base: Vec<Complex64>, order: usize) -> Self {
        let center = 0.5 * (a + b);
        let radius = 0.5 * (b - a);
        let rho2 = radius * radius;
        let mut polys = Vec::with_capacity(order + CACHED_ORDERS + 1);
        polys.push(base);
        for k in 0..order + CACHED_ORDERS {
            let next = next_derivative_poly(&polys[k], k, rho2);
            polys.push(next);
        }
        Self {
            a,
            b,
            center,
            radius,
            log_norm: 1.0 / rho2,
            order,
            polys,
        }
    }

    pub fn support_interval(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Normalization constant `exp(1/ρ²)`.
    pub fn normalizer(&self) -> f64 {
        self.log_norm.exp()
    }

    /// Exact `k`-th derivative; same support.
    pub fn derivative(&self, k: usize) -> TestFunction {
        if k == 0 {
            return self.clone();
        }
        TestFunction::from_centered(self.a, self.b, self.polys[0].clone(), self.order + k)
    }

    pub fn scaled(&self, s: Complex64) -> TestFunction {
        let mut out = self.clone();
        for p in out.polys.iter_mut() {
            *p = poly_scale(p, s);
        }
        out
    }

    /// `alpha * self + other`; both must share the same support and order.
    pub fn combine(&self, alpha: Complex64, other: &TestFunction) -> Result<TestFunction, TestFnError> {
        if self.a != other.a || self.b != other.b {
            return Err(TestFnError::SupportMismatch(self.a, self.b, other.a, other.b));
        }
        if self.order != other.order {
            return Err(TestFnError::OrderMismatch(self.order, other.order));
        }
        let base = poly_add(&poly_scale(&self.polys[0], alpha), &other.polys[0]);
        Ok(TestFunction::from_centered(self.a, self.b, base, self.order))
    }

    fn poly_for(&self, k: usize) -> std::borrow::Cow<'_, [Complex64]> {
        let idx = self.order + k;
        if idx < self.polys.len() {
            std::borrow::Cow::Borrowed(&self.polys[idx])
        } else {
            let rho2 = self.radius * self.radius;
            let mut p = self.polys.last().unwrap().clone();
            for j in self.polys.len() - 1..idx {
                p = next_derivative_poly(&p, j, rho2);
            }
            std::borrow::Cow::Owned(p)
        }
    }

    /// `k`-th derivative of this function at `t`.
    pub fn eval_derivative(&self, k: usize, t: f64) -> Complex64 {
        if t <= self.a || t >= self.b {
            return ZERO;
        }
        let u = t - self.center;
        let q = (t - self.a) * (self.b - t);
        if q <= 0.0 {
            return ZERO;
        }
        let n = (self.order + k) as f64;
        let expo = self.log_norm - 1.0 / q - 2.0 * n * q.ln();
        if expo < -745.0 {
            return ZERO;
        }
        poly_eval(&self.poly_for(k), u) * expo.exp()
    }

    pub fn eval(&self, t: f64) -> Complex64 {
        self.eval_derivative(0, t)
    }

    /// Derivatives `0..count` at `t`, sharing one exponential.
    pub fn eval_derivatives(&self, t: f64, count: usize) -> Vec<Complex64> {
        if t <= self.a || t >= self.b {
            return vec![ZERO; count];
        }
        let q = (t - self.a) * (self.b - t);
        if q <= 0.0 {
            return vec![ZERO; count];
        }
        let expo = self.log_norm - 1.0 / q - 2.0 * self.order as f64 * q.ln();
        if expo < -700.0 {
            return (0..count).map(|k| self.eval_derivative(k, t)).collect();
        }
        let u = t - self.center;
        let step = 1.0 / (q * q);
        let mut scale = expo.exp();
        let mut out = Vec::with_capacity(count);
        for k in 0..count {
            out.push(poly_eval(&self.poly_for(k), u) * scale);
            scale *= step;
        }
        out
    }

    /// Adaptive quadrature over the support.
    pub fn integral_with(&self, opts: &QuadOptions) -> quad::Quad<Complex64> {
        let pts = uniform_nodes(self.a, self.b, 16);
        quad::integrate_with_breakpoints(|t| self.eval(t), &pts, opts)
    }

    pub fn integral(&self) -> Complex64 {
        self.integral_with(&QuadOptions::tight()).value
    }

    /// Sup of `|φ|`: dense scan followed by golden-section refinement.
    pub fn sup_norm(&self) -> f64 {
        sup_abs(|t| self.eval(t), &uniform_nodes(self.a, self.b, 4096))
    }
}

impl SmoothFn for TestFunction {
    fn support(&self) -> (f64, f64) {
        (self.a, self.b)
    }
    fn max_derivative(&self) -> usize {
        64
    }
    fn derivative_at(&self, k: usize, t: f64) -> Complex64 {
        self.eval_derivative(k, t)
    }
    fn grid(&self) -> Vec<f64> {
        uniform_nodes(self.a, self.b, DEFAULT_CELLS)
    }
    fn integral(&self) -> Complex64 {
        TestFunction::integral(self)
    }
}

pub fn uniform_nodes(a: f64, b: f64, cells: usize) -> Vec<f64> {
    let cells = cells.max(1);
    let h = (b - a) / cells as f64;
    let mut v: Vec<f64> = (0..=cells).map(|i| a + i as f64 * h).collect();
    v[cells] = b;
    v
}

fn golden_max<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, iters: usize) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..iters {
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
    if f1 > f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Maximum of `|f|` over a node set, refined around the best node.
pub fn sup_abs<F: Fn(f64) -> Complex64>(f: F, nodes: &[f64]) -> f64 {
    let mut best = 0usize;
    let mut best_val = 0.0;
    for (i, &t) in nodes.iter().enumerate() {
        let v = f(t).norm();
        if v > best_val {
            best_val = v;
            best = i;
        }
    }
    if nodes.len() < 3 {
        return best_val;
    }
    let lo = nodes[best.saturating_sub(1)];
    let hi = nodes[(best + 1).min(nodes.len() - 1)];
    let (_, refined) = golden_max(|t| f(t).norm(), lo, hi, 60);
    refined.max(best_val)
}

/// A function given by samples of itself and its derivatives at nodes,
/// interpolated by cubic Hermite pieces. Layer `k` holds `f^{(k)}` at the
/// nodes, so derivative `k` is interpolated from layers `k` and `k+1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledFunction {
    nodes: Vec<f64>,
    layers: Vec<Vec<Complex64>>,
    errors: Vec<f64>,
}

impl SampledFunction {
    pub fn new(nodes: Vec<f64>, layers: Vec<Vec<Complex64>>, errors: Vec<f64>) -> Self {
        assert!(nodes.len() >= 2, "need at least one cell");
        assert!(layers.len() >= 2, "need values and slopes");
        assert!(layers.iter().all(|l| l.len() == nodes.len()));
        assert!(nodes.windows(2).all(|w| w[0] < w[1]), "nodes must increase");
        Self { nodes, layers, errors }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn layer(&self, k: usize) -> &[Complex64] {
        &self.layers[k]
    }

    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }

    /// Per-node error estimates accumulated during construction.
    pub fn errors(&self) -> &[f64] {
        &self.errors
    }

    pub fn max_error(&self) -> f64 {
        self.errors.iter().cloned().fold(0.0, f64::max)
    }

    pub fn eval_derivative(&self, k: usize, t: f64) -> Complex64 {
        assert!(k + 1 < self.layers.len(), "derivative {k} not available");
        let n = self.nodes.len();
        if t < self.nodes[0] || t > self.nodes[n - 1] {
            return ZERO;
        }
        let i = self.nodes.partition_point(|&x| x <= t).clamp(1, n - 1) - 1;
        let (t0, t1) = (self.nodes[i], self.nodes[i + 1]);
        let h = t1 - t0;
        let s = (t - t0) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let y = &self.layers[k];
        let d = &self.layers[k + 1];
        y[i] * (2.0 * s3 - 3.0 * s2 + 1.0)
            + d[i] * (h * (s3 - 2.0 * s2 + s))
            + y[i + 1] * (-2.0 * s3 + 3.0 * s2)
            + d[i + 1] * (h * (s3 - s2))
    }

    pub fn eval(&self, t: f64) -> Complex64 {
        self.eval_derivative(0, t)
    }

    /// Exact integral of the Hermite interpolant.
    pub fn integral(&self) -> Complex64 {
        let y = &self.layers[0];
        let d = &self.layers[1];
        let mut total = ZERO;
        for i in 0..self.nodes.len() - 1 {
            let h = self.nodes[i + 1] - self.nodes[i];
            total += (y[i] + y[i + 1]) * (0.5 * h) + (d[i] - d[i + 1]) * (h * h / 12.0);
        }
        total
    }

    pub fn sup_norm(&self) -> f64 {
        sup_abs(|t| self.eval(t), &self.nodes)
    }

    /// CSV with columns `t, re, im` for layer 0.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,re,im\n");
        for (t, v) in self.nodes.iter().zip(&self.layers[0]) {
            s.push_str(&format!("{t:.17e},{:.17e},{:.17e}\n", v.re, v.im));
        }
        s
    }
}

impl SmoothFn for SampledFunction {
    fn support(&self) -> (f64, f64) {
        (self.nodes[0], self.nodes[self.nodes.len() - 1])
    }
    fn max_derivative(&self) -> usize {
        self.layers.len() - 2
    }
    fn derivative_at(&self, k: usize, t: f64) -> Complex64 {
        self.eval_derivative(k, t)
    }
    fn grid(&self) -> Vec<f64> {
        self.nodes.clone()
    }
    fn integral(&self) -> Complex64 {
        SampledFunction::integral(self)
    }
}

/// The fixed normalizer `ζ` supported in `[-2, -1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizerZeta {
    func: TestFunction,
    mass: f64,
}

impl NormalizerZeta {
    /// The unit-mass bump on `(-2, -1)`.
    pub fn standard() -> Self {
        Self::with_mass(1.0)
    }

    /// The same shape scaled to integral `mass`; anything other than 1 breaks
    /// the antiderivative operator and exists for perturbation tests.
    pub fn with_mass(mass: f64) -> Self {
        let base = bump(-2.0, -1.0, &[1.0]).expect("valid support");
        let raw = base.integral().re;
        let func = base.scaled(Complex64::new(mass / raw, 0.0));
        Self { func, mass }
    }

    pub fn function(&self) -> &TestFunction {
        &self.func
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }
}

impl Default for NormalizerZeta {
    fn default() -> Self {
        Self::standard()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ConvolveOptions {
    pub cells: usize,
    pub layers: usize,
    pub quad: QuadOptions,
}

impl Default for ConvolveOptions {
    fn default() -> Self {
        Self {
            cells: DEFAULT_CELLS,
            layers: DEFAULT_LAYERS,
            quad: QuadOptions {
                abs_tol: 1e-14,
                rel_tol: 1e-13,
                max_intervals: 400,
            },
        }
    }
}

/// `(φ ∗₀ ψ)(t) = ∫₀^t φ(t-s) ψ(s) ds` for `φ, ψ` supported in `[0, ∞)`.
///
/// Derivative layers use `∂ᵗ(φ∗₀ψ) = φ'∗₀ψ`, valid because `φ` vanishes to
/// all orders at 0.
pub fn convolve0(phi: &TestFunction, psi: &TestFunction) -> Result<SampledFunction, TestFnError> {
    convolve0_with(phi, psi, &ConvolveOptions::default())
}

pub fn convolve0_with(
    phi: &TestFunction,
    psi: &TestFunction,
    opts: &ConvolveOptions,
) -> Result<SampledFunction, TestFnError> {
    let (pa, pb) = phi.support_interval();
    let (qa, qb) = psi.support_interval();
    if pa < 0.0 {
        return Err(TestFnError::NegativeSupport(pa, pb));
    }
    if qa < 0.0 {
        return Err(TestFnError::NegativeSupport(qa, qb));
    }
    let layers = opts.layers.max(2);
    let nodes = uniform_nodes(pa + qa, pb + qb, opts.cells);
    let results: Vec<(Vec<Complex64>, f64)> = nodes
        .par_iter()
        .map(|&t| {
            let lo = qa.max(t - pb);
            let hi = qb.min(t - pa);
            if hi <= lo {
                return (vec![ZERO; layers], 0.0);
            }
            let q = quad::integrate(
                |s: f64| {
                    let w = psi.eval(s);
                    DVector::from_iterator(layers, phi.eval_derivatives(t - s, layers).into_iter().map(|v| v * w))
                },
                lo,
                hi,
                &opts.quad,
            );
            (q.value.iter().copied().collect(), q.error)
        })
        .collect();
    let mut out = vec![Vec::with_capacity(nodes.len()); layers];
    let mut errors = Vec::with_capacity(nodes.len());
    for (vals, err) in results {
        for (j, v) in vals.into_iter().enumerate() {
            out[j].push(v);
        }
        errors.push(err);
    }
    Ok(SampledFunction::new(nodes, out, errors))
}

fn merge_nodes(mut a: Vec<f64>, b: &[f64]) -> Vec<f64> {
    a.extend_from_slice(b);
    a.sort_by(|x, y| x.total_cmp(y));
    let span = (a[a.len() - 1] - a[0]).abs().max(1.0);
    let mut out: Vec<f64> = Vec::with_capacity(a.len());
    for t in a {
        if out.last().is_none_or(|&p| t - p > 1e-12 * span) {
            out.push(t);
        }
    }
    out
}

/// `I(f)(t) = ∫_{-∞}^t [f(s) - ζ(s) ∫f] ds`.
///
/// Layer 0 is the cumulative integral, cell by cell; layer `k ≥ 1` is
/// `f^{(k-1)} - (∫f) ζ^{(k-1)}` sampled at the nodes.
pub fn antideriv_i(f: &dyn SmoothFn, zeta: &NormalizerZeta) -> SampledFunction {
    let z = zeta.function();
    let mass = f.integral();
    let nodes = merge_nodes(z.grid(), &f.grid());
    let layers = (f.max_derivative() + 2).min(DEFAULT_LAYERS + 1);
    let g = |k: usize, t: f64| f.derivative_at(k, t) - z.eval_derivative(k, t) * mass;

    let cells: Vec<(Complex64, f64)> = nodes
        .par_windows(2)
        .map(|w| quad::gk15(&|t: f64| g(0, t), w[0], w[1]))
        .collect();
    let mut layer0 = Vec::with_capacity(nodes.len());
    let mut errors = Vec::with_capacity(nodes.len());
    let mut acc = ZERO;
    let mut err = 0.0;
    layer0.push(acc);
    errors.push(err);
    for (v, e) in cells {
        acc += v;
        err += e + 1e-16 * v.norm();
        layer0.push(acc);
        errors.push(err);
    }
    let mut out = vec![layer0];
    for k in 1..layers {
        out.push(nodes.par_iter().map(|&t| g(k - 1, t)).collect());
    }
    SampledFunction::new(nodes, out, errors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn bump_vanishes_at_support_ends_and_peaks_at_center() {
        let f = bump(0.0, 1.0, &[1.0]).unwrap();
        assert_eq!(f.eval(0.0), ZERO);
        assert_eq!(f.eval(1.0), ZERO);
        assert!((f.eval(0.5) - c(1.0)).norm() < 1e-15);
    }

    #[test]
    fn bump_matches_direct_formula() {
        let f = bump(0.0, 2.0, &[1.0]).unwrap();
        let direct = (-1.0f64 / (0.5 * 1.5)).exp() * 1.0f64.exp();
        assert!((f.eval(0.5).re - direct).abs() < 1e-12);
    }

    #[test]
    fn degenerate_support_rejected() {
        assert_eq!(bump(1.0, 1.0, &[1.0]), Err(TestFnError::DegenerateSupport(1.0, 1.0)));
        assert_eq!(make_bump(0.0, 1.0, &[]), Err(TestFnError::EmptyPolynomial));
    }

    #[test]
    fn first_derivative_zero_at_center() {
        let f = bump(0.0, 1.0, &[1.0]).unwrap();
        assert!(f.derivative(1).eval(0.5).norm() < 1e-14);
        assert_eq!(f.derivative(0), f);
    }

    #[test]
    fn second_derivative_matches_finite_difference() {
        let f = bump(0.0, 1.0, &[1.0]).unwrap();
        let h = 1e-4;
        let t = 0.3;
        let fd = (f.eval(t + h) - f.eval(t) * 2.0 + f.eval(t - h)) / (h * h);
        let exact = f.derivative(2).eval(t);
        assert!((fd - exact).norm() <= 1e-6 * exact.norm());
    }

    #[test]
    fn polynomial_factor_is_in_t() {
        let p = [c(1.0), c(-2.0), c(0.5)];
        let f = make_bump(0.5, 3.0, &p).unwrap();
        let g = bump(0.5, 3.0, &[1.0]).unwrap();
        for &t in &[0.7, 1.3, 2.9] {
            let poly = 1.0 - 2.0 * t + 0.5 * t * t;
            assert!((f.eval(t) - g.eval(t) * poly).norm() < 1e-13);
        }
    }

    #[test]
    fn zeta_has_unit_mass() {
        let z = NormalizerZeta::standard();
        assert!((z.function().integral() - c(1.0)).norm() < 1e-10);
        assert_eq!(z.function().support_interval(), (-2.0, -1.0));
    }

    #[test]
    fn derivative_integrates_to_zero() {
        let f = bump(0.2, 1.7, &[1.0, 3.0]).unwrap();
        assert!(f.derivative(1).integral().norm() < 1e-10);
    }

    #[test]
    fn sup_norm_matches_brute_force_scan() {
        let f = bump(0.0, 1.0, &[1.0]).unwrap();
        let brute = (0..=1_000_000)
            .map(|i| f.eval(i as f64 * 1e-6).norm())
            .fold(0.0, f64::max);
        assert!((f.sup_norm() - 1.0).abs() < 1e-8);
        assert!((f.sup_norm() - brute).abs() < 1e-8);
    }

    #[test]
    fn convolution_support_and_mass() {
        let f = bump(0.0, 1.0, &[1.0]).unwrap();
        let g = convolve0(&f, &f).unwrap();
        assert_eq!(g.support(), (0.0, 2.0));
        assert_eq!(g.eval(2.5), ZERO);
        let m = f.integral();
        assert!((g.integral() - m * m).norm() < 1e-8);
    }

    #[test]
    fn convolution_matches_riemann_sum() {
        let f = bump(0.0, 1.0, &[1.0]).unwrap();
        let g = convolve0(&f, &f).unwrap();
        let h = 1e-5;
        let n = (1.0 / h) as usize;
        let riemann: f64 = (0..n)
            .map(|i| {
                let s = (i as f64 + 0.5) * h;
                f.eval(1.0 - s).re * f.eval(s).re
            })
            .sum::<f64>()
            * h;
        assert!((g.eval(1.0).re - riemann).abs() < 1e-7);
    }

    #[test]
    fn convolution_rejects_negative_support() {
        let f = bump(-1.0, 1.0, &[1.0]).unwrap();
        let g = bump(0.0, 1.0, &[1.0]).unwrap();
        assert!(matches!(convolve0(&f, &g), Err(TestFnError::NegativeSupport(..))));
        assert!(matches!(convolve0(&g, &f), Err(TestFnError::NegativeSupport(..))));
    }

    #[test]
    fn convolution_derivative_layer_matches_difference_quotient() {
        let f = bump(0.0, 1.0, &[1.0]).unwrap();
        let g = bump(0.5, 1.5, &[1.0]).unwrap();
        let conv = convolve0(&f, &g).unwrap();
        let h = 1e-5;
        for &t in &[0.8, 1.2, 1.9] {
            let fd = (conv.eval(t + h) - conv.eval(t - h)) / (2.0 * h);
            assert!((fd - conv.eval_derivative(1, t)).norm() < 1e-6);
        }
    }

    #[test]
    fn antiderivative_of_derivative_recovers_function() {
        let z = NormalizerZeta::standard();
        let f = bump(0.3, 2.1, &[1.0, -0.4]).unwrap();
        let i = antideriv_i(&f.derivative(1), &z);
        for k in 0..40 {
            let t = -2.5 + k as f64 * 0.13;
            assert!((i.eval(t) - f.eval(t)).norm() < 1e-8, "t={t}");
        }
    }

    #[test]
    fn antiderivative_of_zeta_vanishes() {
        let z = NormalizerZeta::standard();
        let i = antideriv_i(z.function(), &z);
        for k in 0..50 {
            let t = -2.2 + k as f64 * 0.03;
            assert!(i.eval(t).norm() < 1e-12);
        }
    }

    #[test]
    fn antiderivative_of_mean_zero_function_is_running_integral() {
        let z = NormalizerZeta::standard();
        let f = bump(0.0, 1.5, &[0.0, 1.0, 2.0]).unwrap().derivative(1);
        let i = antideriv_i(&f, &z);
        for k in 0..10 {
            let t = 0.05 + k as f64 * 0.15;
            let q = quad::integrate(|s| f.eval(s), 0.0, t, &QuadOptions::tight());
            assert!((i.eval(t) - q.value).norm() < 1e-10, "t={t}");
        }
    }

    #[test]
    fn antiderivative_support_and_derivative() {
        let z = NormalizerZeta::standard();
        let f = bump(0.5, 1.5, &[1.0]).unwrap();
        let i = antideriv_i(&f, &z);
        assert_eq!(i.eval(-2.1), ZERO);
        assert!(i.eval(1.6).norm() < 1e-12);
        let m = f.integral();
        for &t in &[-1.5, 0.7, 1.1] {
            let expect = f.eval(t) - z.function().eval(t) * m;
            assert!((i.eval_derivative(1, t) - expect).norm() < 1e-9);
        }
    }

    #[test]
    fn convolution_is_bilinear() {
        let f1 = bump(0.0, 1.0, &[1.0]).unwrap();
        let f2 = bump(0.0, 1.0, &[0.0, 1.0]).unwrap();
        let g = bump(0.2, 0.9, &[1.0]).unwrap();
        let alpha = Complex64::new(0.3, -1.2);
        let lhs = convolve0(&f1.combine(alpha, &f2).unwrap(), &g).unwrap();
        let a = convolve0(&f1, &g).unwrap();
        let b = convolve0(&f2, &g).unwrap();
        for k in 0..=40 {
            let t = 0.2 + k as f64 * 0.045;
            assert!((lhs.eval(t) - (a.eval(t) * alpha + b.eval(t))).norm() < 1e-9);
        }
    }

    #[test]
    fn sampled_integral_is_exact_for_cubics() {
        let nodes = uniform_nodes(0.0, 2.0, 5);
        let y: Vec<Complex64> = nodes.iter().map(|&t| c(t * t * t)).collect();
        let d: Vec<Complex64> = nodes.iter().map(|&t| c(3.0 * t * t)).collect();
        let f = SampledFunction::new(nodes.clone(), vec![y, d], vec![0.0; nodes.len()]);
        assert!((f.integral() - c(4.0)).norm() < 1e-13);
        assert!((f.eval(1.3) - c(1.3f64.powi(3))).norm() < 1e-13);
    }

    fn arb_bump() -> impl Strategy<Value = TestFunction> {
        (0.0f64..3.0, 0.4f64..2.5, prop::collection::vec(-2.0f64..2.0, 1..4))
            .prop_map(|(a, w, p)| bump(a, a + w, &p).unwrap())
    }

    #[test]
    fn shared_exponential_matches_single_derivatives() {
        let f = bump(0.2, 1.4, &[1.0, 0.3, -0.2]).unwrap().derivative(1);
        for k in 1..40 {
            let t = 0.2 + 1.2 * k as f64 / 40.0;
            let all = f.eval_derivatives(t, 5);
            for (j, v) in all.iter().enumerate() {
                let want = f.eval_derivative(j, t);
                assert!((v - want).norm() <= 1e-12 * want.norm().max(1.0), "{j} at {t}");
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn vanishes_outside_support(f in arb_bump(), k in 0usize..5, off in 0.0f64..2.0) {
            let (a, b) = f.support_interval();
            prop_assert_eq!(f.eval_derivative(k, a), ZERO);
            prop_assert_eq!(f.eval_derivative(k, b), ZERO);
            prop_assert_eq!(f.eval_derivative(k, a - off), ZERO);
            prop_assert_eq!(f.eval_derivative(k, b + off), ZERO);
        }

        #[test]
        fn derivative_orders_compose(f in arb_bump(), j in 0usize..3, k in 0usize..3, s in prop::collection::vec(0.0f64..1.0, 100)) {
            let lhs = f.derivative(j).derivative(k);
            let rhs = f.derivative(j + k);
            let (a, b) = f.support_interval();
            for x in s {
                let t = a + x * (b - a);
                let (l, r) = (lhs.eval(t), rhs.eval(t));
                prop_assert!((l - r).norm() <= 1e-9 * (1.0 + r.norm()));
            }
        }

        #[test]
        fn antiderivative_inverts_derivative(f in arb_bump(), x in 0.0f64..1.0) {
            let i = antideriv_i(&f.derivative(1), &NormalizerZeta::standard());
            let (a, b) = f.support_interval();
            let t = a + x * (b - a);
            prop_assert!((i.eval(t) - f.eval(t)).norm() < 1e-8);
        }
    }
}
