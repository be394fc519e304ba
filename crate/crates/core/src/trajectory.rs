//! Uniformly sampled vector-valued paths.

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::linalg::CVec;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrajectoryError {
    #[error("step must be positive and finite, got {0}")]
    BadStep(f64),
    #[error("trajectory needs at least two samples")]
    TooShort,
    #[error("sample {0} is not finite")]
    NonFinite(usize),
    #[error("sample {index} has dimension {got}, expected {want}")]
    DimensionMismatch { index: usize, got: usize, want: usize },
}

/// Number of grid points `0, h, 2h, … ≤ horizon`.
pub fn grid_len(horizon: f64, h: f64) -> usize {
    (horizon / h + 1e-9).floor() as usize + 1
}

/// Samples `f(0), f(h), …, f(kh)` with `kh ≤ T`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    h: f64,
    values: Vec<CVec>,
    note: String,
}

impl Trajectory {
    pub fn new(h: f64, values: Vec<CVec>, note: impl Into<String>) -> Result<Self, TrajectoryError> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(TrajectoryError::BadStep(h));
        }
        if values.len() < 2 {
            return Err(TrajectoryError::TooShort);
        }
        let want = values[0].len();
        for (index, v) in values.iter().enumerate() {
            if v.len() != want {
                return Err(TrajectoryError::DimensionMismatch { index, got: v.len(), want });
            }
            if v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(TrajectoryError::NonFinite(index));
            }
        }
        Ok(Self { h, values, note: note.into() })
    }

    /// Evaluates `f` on the grid in parallel; the result does not depend on
    /// scheduling.
    pub fn sample<F>(h: f64, horizon: f64, note: impl Into<String>, f: F) -> Result<Self, TrajectoryError>
    where
        F: Fn(f64) -> CVec + Sync,
    {
        if !(h > 0.0) || !h.is_finite() {
            return Err(TrajectoryError::BadStep(h));
        }
        let n = grid_len(horizon, h);
        let values: Vec<CVec> = (0..n).into_par_iter().map(|i| f(i as f64 * h)).collect();
        Self::new(h, values, note)
    }

    pub fn scalar<F>(h: f64, horizon: f64, note: impl Into<String>, f: F) -> Result<Self, TrajectoryError>
    where
        F: Fn(f64) -> Complex64 + Sync,
    {
        Self::sample(h, horizon, note, |t| CVec::from_element(1, f(t)))
    }

    pub fn step(&self) -> f64 {
        self.h
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.values[0].len()
    }

    pub fn horizon(&self) -> f64 {
        (self.values.len() - 1) as f64 * self.h
    }

    pub fn time(&self, i: usize) -> f64 {
        i as f64 * self.h
    }

    pub fn values(&self) -> &[CVec] {
        &self.values
    }

    pub fn value(&self, i: usize) -> &CVec {
        &self.values[i]
    }

    pub fn note(&self) -> &str {
        &self.note
    }

    pub fn norms(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm()).collect()
    }

    /// Grid sup-norm over samples `lo..hi`.
    pub fn sup_norm_range(&self, lo: usize, hi: usize) -> f64 {
        self.values[lo..hi].iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn sup_norm(&self) -> f64 {
        self.sup_norm_range(0, self.len())
    }

    /// `t ↦ Σ y_i f_i(t)`.
    pub fn scalarize(&self, covector: &[Complex64]) -> Trajectory {
        let values = self
            .values
            .iter()
            .map(|v| CVec::from_element(1, v.iter().zip(covector).map(|(a, b)| a * b).sum()))
            .collect();
        Trajectory {
            h: self.h,
            values,
            note: format!("{} (scalarized)", self.note),
        }
    }

    pub fn map<F: Fn(f64, &CVec) -> CVec>(&self, f: F, note: impl Into<String>) -> Trajectory {
        let values = self.values.iter().enumerate().map(|(i, v)| f(self.time(i), v)).collect();
        Trajectory { h: self.h, values, note: note.into() }
    }

    /// `alpha * self + other` on a common grid.
    pub fn combine(&self, alpha: Complex64, other: &Trajectory) -> Trajectory {
        assert_eq!(self.len(), other.len());
        assert!((self.h - other.h).abs() <= 1e-15 * self.h);
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a * alpha + b).collect();
        Trajectory {
            h: self.h,
            values,
            note: format!("combination of {} and {}", self.note, other.note),
        }
    }

    pub fn truncated(&self, len: usize) -> Trajectory {
        Trajectory {
            h: self.h,
            values: self.values[..len.min(self.len())].to_vec(),
            note: self.note.clone(),
        }
    }

    /// CSV with columns `t, re_1, im_1, …`.
    pub fn to_csv(&self) -> String {
        let d = self.dim();
        let mut s = String::from("t");
        for k in 1..=d {
            s.push_str(&format!(",re_{k},im_{k}"));
        }
        s.push('\n');
        for (i, v) in self.values.iter().enumerate() {
            s.push_str(&format!("{:.12e}", self.time(i)));
            for z in v.iter() {
                s.push_str(&format!(",{:.12e},{:.12e}", z.re, z.im));
            }
            s.push('\n');
        }
        s
    }
}

/// Samples on the two-sided grid `-T, …, 0, …, T` with step `h`, together
/// with the frequency/coefficient list that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedTrajectory {
    pub h: f64,
    /// `values[i]` sits at `t = (i - half) h`, where `half = (len - 1) / 2`.
    pub values: Vec<CVec>,
    pub coefficients: Vec<(f64, Vec<Complex64>)>,
}

impl ExtendedTrajectory {
    pub fn half(&self) -> usize {
        (self.values.len() - 1) / 2
    }

    pub fn time(&self, i: usize) -> f64 {
        (i as f64 - self.half() as f64) * self.h
    }

    /// `Σ P_r e^{irt}` from the stored coefficients, at any real `t`.
    pub fn eval(&self, t: f64) -> CVec {
        let d = self
            .coefficients
            .first()
            .map(|(_, p)| p.len())
            .or_else(|| self.values.first().map(|v| v.len()))
            .unwrap_or(0);
        let mut out = CVec::zeros(d);
        for (r, p) in &self.coefficients {
            let e = Complex64::new(0.0, r * t).exp();
            for (o, c) in out.iter_mut().zip(p) {
                *o += c * e;
            }
        }
        out
    }

    pub fn sup_norm_negative(&self) -> f64 {
        self.values[..=self.half()].iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn sup_norm_positive(&self) -> f64 {
        self.values[self.half()..].iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn sup_norm(&self) -> f64 {
        self.sup_norm_negative().max(self.sup_norm_positive())
    }
}
