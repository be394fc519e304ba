//! Adaptive Gauss–Kronrod quadrature for scalar, complex and vector-valued
//! integrands.
//!
//! The driver is the classic globally adaptive scheme: keep a pool of
//! subintervals, always bisect the one with the largest local error, stop once
//! the summed error drops below `max(abs_tol, rel_tol * |I|)`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::DVector;
use num_complex::Complex64;

/// Values that can be accumulated by the quadrature rules.
pub trait QuadValue: Clone {
    fn zeros_like(&self) -> Self;
    fn add_scaled(&mut self, other: &Self, w: f64);
    fn magnitude(&self) -> f64;
}

impl QuadValue for f64 {
    fn zeros_like(&self) -> Self {
        0.0
    }
    fn add_scaled(&mut self, other: &Self, w: f64) {
        *self += w * other;
    }
    fn magnitude(&self) -> f64 {
        self.abs()
    }
}

impl QuadValue for Complex64 {
    fn zeros_like(&self) -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn add_scaled(&mut self, other: &Self, w: f64) {
        *self += other * w;
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

impl QuadValue for DVector<Complex64> {
    fn zeros_like(&self) -> Self {
        DVector::zeros(self.len())
    }
    fn add_scaled(&mut self, other: &Self, w: f64) {
        self.axpy(Complex64::new(w, 0.0), other, Complex64::new(1.0, 0.0));
    }
    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

// 15-point Kronrod abscissae (non-negative half) and weights, with the
// embedded 7-point Gauss weights.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            max_intervals: 4000,
        }
    }
}

impl QuadOptions {
    pub fn tight() -> Self {
        Self {
            abs_tol: 1e-13,
            rel_tol: 1e-12,
            max_intervals: 8000,
        }
    }

    pub fn with_tol(abs_tol: f64, rel_tol: f64) -> Self {
        Self {
            abs_tol,
            rel_tol,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct Quad<T> {
    pub value: T,
    pub error: f64,
    pub evals: usize,
    pub converged: bool,
}

/// One application of the 15-point Kronrod rule on `[a, b]`; the error is
/// the distance to the embedded 7-point Gauss result.
pub fn gk15<T, F>(f: &F, a: f64, b: f64) -> (T, f64)
where
    T: QuadValue,
    F: Fn(f64) -> T,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kron = fc.zeros_like();
    let mut gauss = fc.zeros_like();
    kron.add_scaled(&fc, WGK[7]);
    gauss.add_scaled(&fc, WG[3]);
    for (j, &x) in XGK.iter().take(7).enumerate() {
        let dx = half * x;
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        kron.add_scaled(&f1, WGK[j]);
        kron.add_scaled(&f2, WGK[j]);
        if j % 2 == 1 {
            gauss.add_scaled(&f1, WG[j / 2]);
            gauss.add_scaled(&f2, WG[j / 2]);
        }
    }
    let mut scaled = kron.zeros_like();
    scaled.add_scaled(&kron, half);
    let mut diff = kron.clone();
    diff.add_scaled(&gauss, -1.0);
    (scaled, (half * diff.magnitude()).abs())
}

struct Segment<T> {
    a: f64,
    b: f64,
    value: T,
    error: f64,
}

impl<T> PartialEq for Segment<T> {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}
impl<T> Eq for Segment<T> {}
impl<T> PartialOrd for Segment<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T> Ord for Segment<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Adaptive integration over `[a, b]`.
pub fn integrate<T, F>(f: F, a: f64, b: f64, opts: &QuadOptions) -> Quad<T>
where
    T: QuadValue,
    F: Fn(f64) -> T,
{
    integrate_with_breakpoints(f, &[a, b], opts)
}

/// Adaptive integration over consecutive panels `points[0]..points[1]..`.
/// Panels of zero width are skipped; `points` must be non-decreasing.
pub fn integrate_with_breakpoints<T, F>(f: F, points: &[f64], opts: &QuadOptions) -> Quad<T>
where
    T: QuadValue,
    F: Fn(f64) -> T,
{
    assert!(points.len() >= 2, "need at least one panel");
    let mut heap = BinaryHeap::new();
    let mut evals = 0usize;
    let mut template: Option<T> = None;
    for w in points.windows(2) {
        if w[1] <= w[0] {
            continue;
        }
        let (value, error) = gk15(&f, w[0], w[1]);
        evals += 15;
        if template.is_none() {
            template = Some(value.zeros_like());
        }
        heap.push(Segment {
            a: w[0],
            b: w[1],
            value,
            error,
        });
    }
    let Some(zero) = template else {
        // Degenerate range: probe once to learn the value shape.
        let probe = f(points[0]);
        return Quad {
            value: probe.zeros_like(),
            error: 0.0,
            evals: 1,
            converged: true,
        };
    };

    let sum = |heap: &BinaryHeap<Segment<T>>| {
        let mut total = zero.clone();
        let mut err = 0.0;
        for s in heap.iter() {
            total.add_scaled(&s.value, 1.0);
            err += s.error;
        }
        (total, err)
    };

    let mut converged = false;
    while heap.len() < opts.max_intervals {
        let (total, err) = sum(&heap);
        if err <= opts.abs_tol.max(opts.rel_tol * total.magnitude()) {
            converged = true;
            break;
        }
        let worst = heap.pop().expect("non-empty pool");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Interval is at floating-point resolution; keep it and stop.
            heap.push(worst);
            break;
        }
        let (v1, e1) = gk15(&f, worst.a, mid);
        let (v2, e2) = gk15(&f, mid, worst.b);
        evals += 30;
        heap.push(Segment {
            a: worst.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Segment {
            a: mid,
            b: worst.b,
            value: v2,
            error: e2,
        });
    }
    // Sum in left-to-right order so results do not depend on heap layout.
    let mut segs: Vec<Segment<T>> = heap.into_vec();
    segs.sort_by(|x, y| x.a.total_cmp(&y.a));
    let mut value = zero;
    let mut error = 0.0;
    for s in &segs {
        value.add_scaled(&s.value, 1.0);
        error += s.error;
    }
    if !converged {
        converged = error <= opts.abs_tol.max(opts.rel_tol * value.magnitude());
    }
    Quad {
        value,
        error,
        evals,
        converged,
    }
}

/// Non-adaptive composite 15-point Kronrod rule on `panels` equal panels.
///
/// The result is an analytic function of the endpoints, which matters when
/// the caller differentiates it numerically.
pub fn composite_gk15<T, F>(f: F, a: f64, b: f64, panels: usize) -> T
where
    T: QuadValue,
    F: Fn(f64) -> T,
{
    let panels = panels.max(1);
    let width = (b - a) / panels as f64;
    let (mut total, _) = gk15(&f, a, a + width);
    for k in 1..panels {
        let lo = a + k as f64 * width;
        let (v, _) = gk15(&f, lo, lo + width);
        total.add_scaled(&v, 1.0);
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn polynomial_is_exact() {
        let q = integrate(|x: f64| x.powi(5) - 3.0 * x * x, -1.0, 2.0, &QuadOptions::default());
        let exact = (64.0 - 1.0) / 6.0 - (8.0 + 1.0);
        assert!((q.value - exact).abs() < 1e-13);
        assert!(q.converged);
    }

    #[test]
    fn complex_exponential() {
        let q = integrate(
            |s: f64| Complex64::new(0.0, s).exp(),
            0.0,
            PI,
            &QuadOptions::tight(),
        );
        // (e^{iπ} - 1)/i = 2i
        assert!((q.value - Complex64::new(0.0, 2.0)).norm() < 1e-13);
    }

    #[test]
    fn vector_integrand() {
        let q = integrate(
            |s: f64| DVector::from_vec(vec![Complex64::new(s, 0.0), Complex64::new(0.0, s * s)]),
            0.0,
            3.0,
            &QuadOptions::default(),
        );
        assert!((q.value[0] - Complex64::new(4.5, 0.0)).norm() < 1e-12);
        assert!((q.value[1] - Complex64::new(0.0, 9.0)).norm() < 1e-12);
    }

    #[test]
    fn breakpoints_handle_kinks() {
        let q = integrate_with_breakpoints(|x: f64| x.abs(), &[-1.0, 0.0, 2.0], &QuadOptions::default());
        assert!((q.value - 2.5).abs() < 1e-14);
        assert_eq!(q.evals, 30);
    }

    #[test]
    fn empty_range_is_zero() {
        let q = integrate(|x: f64| x, 1.0, 1.0, &QuadOptions::default());
        assert_eq!(q.value, 0.0);
    }

    #[test]
    fn halving_tolerance_moves_less_than_error() {
        let f = |x: f64| (-x * x).exp() * (3.0 * x).cos();
        let coarse = integrate(f, -4.0, 4.0, &QuadOptions::with_tol(1e-6, 1e-6));
        let fine = integrate(f, -4.0, 4.0, &QuadOptions::with_tol(5e-7, 5e-7));
        assert!((coarse.value - fine.value).abs() <= coarse.error.max(1e-15));
    }

    #[test]
    fn composite_matches_adaptive() {
        let f = |x: f64| Complex64::new(0.0, 2.0 * x).exp();
        let c: Complex64 = composite_gk15(f, 0.0, 10.0, 20);
        let a = integrate(f, 0.0, 10.0, &QuadOptions::tight());
        assert!((c - a.value).norm() < 1e-12);
    }
}
