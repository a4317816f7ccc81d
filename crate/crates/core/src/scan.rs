//! Parameter grids over realizations, classified row by row.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extremality::{classify, full_alternation_check, lemma1_residuals, Verdict};
use crate::realization::{born_point, canonicalize_to, CanonTarget, QubitRealization};

/// Closed interval sampled at `steps` evenly spaced points; a single step
/// yields `min`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl Axis {
    pub fn fixed(v: f64) -> Self {
        Axis { min: v, max: v, steps: 1 }
    }

    pub fn value(&self, i: usize) -> f64 {
        if self.steps <= 1 {
            self.min
        } else {
            self.min + (self.max - self.min) * i as f64 / (self.steps - 1) as f64
        }
    }

    fn check(&self, name: &str) -> Result<()> {
        if self.steps < 1 || !(self.min <= self.max) || !self.min.is_finite() || !self.max.is_finite() {
            return Err(Error::InvalidArgument(format!("bad range for {name}")));
        }
        Ok(())
    }
}

/// Axes for `(theta, a0, a1, b0, b1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanSpec {
    pub axes: [Axis; 5],
}

pub const PARAM_NAMES: [&str; 5] = ["theta", "a0", "a1", "b0", "b1"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub realization: QubitRealization,
    pub verdict: Option<Verdict>,
    pub error: Option<String>,
    /// Alternation slacks of the canonical representative.
    pub margins: Option<[f64; 8]>,
    pub lemma1_residuals: Option<[f64; 4]>,
}

impl ScanSpec {
    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.steps).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Grid point `i` in lexicographic order of the axis indices (theta
    /// slowest).
    pub fn point(&self, mut i: usize) -> QubitRealization {
        let mut idx = [0; 5];
        for k in (0..5).rev() {
            idx[k] = i % self.axes[k].steps;
            i /= self.axes[k].steps;
        }
        let p: [f64; 5] = std::array::from_fn(|k| self.axes[k].value(idx[k]));
        QubitRealization::from_params(&p)
    }
}

pub fn scan_row(r: &QubitRealization) -> ScanRow {
    let p = born_point(r);
    let (verdict, error) = match classify(&p) {
        Ok(c) => (Some(c.verdict), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let (canon, _) = canonicalize_to(r, CanonTarget::Sector);
    let margins = full_alternation_check(&canon, false).ok().map(|a| a.margins);
    let lemma1 = lemma1_residuals(&p).ok();
    ScanRow { realization: *r, verdict, error, margins, lemma1_residuals: lemma1 }
}

/// Rows in grid order regardless of evaluation order.
pub fn run_scan(spec: &ScanSpec) -> Result<Vec<ScanRow>> {
    for (axis, name) in spec.axes.iter().zip(PARAM_NAMES) {
        axis.check(name)?;
    }
    Ok((0..spec.len()).into_par_iter().map(|i| scan_row(&spec.point(i))).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_order_and_endpoints() {
        let spec = ScanSpec {
            axes: [Axis { min: 0.1, max: 0.3, steps: 3 }, Axis::fixed(0.0), Axis { min: 1.0, max: 2.0, steps: 2 }, Axis::fixed(0.5), Axis::fixed(2.5)],
        };
        assert_eq!(spec.len(), 6);
        assert_eq!(spec.point(0).params(), [0.1, 0.0, 1.0, 0.5, 2.5]);
        assert_eq!(spec.point(1).params(), [0.1, 0.0, 2.0, 0.5, 2.5]);
        assert!((spec.point(5).theta - 0.3).abs() < 1e-15);
    }

    #[test]
    fn single_point_scan() {
        let spec = ScanSpec { axes: [Axis::fixed(0.7); 5] };
        let rows = run_scan(&spec).unwrap();
        assert_eq!(rows.len(), 1);
    }

    #[test]
    fn rejects_reversed_range() {
        let mut spec = ScanSpec { axes: [Axis::fixed(0.7); 5] };
        spec.axes[0] = Axis { min: 1.0, max: 0.0, steps: 4 };
        assert!(run_scan(&spec).is_err());
    }
}
