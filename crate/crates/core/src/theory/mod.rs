//! Brute-force checks of the excess-risk theory on finite classes.
//!
//! A [`FiniteClass`] is an `N × n` matrix whose rows are functions evaluated
//! at the `n` sample points, together with the labels `Y`. Empirical
//! expectations `Ê` are means over the `n` columns. All logarithms are
//! natural. All-zero rows are excluded from every supremum of a ratio.

mod bounds;
mod cover;
mod fuzz;
mod offset;
mod star_set;

pub use bounds::{
    excess_risk_synthetic, expectation_bound, hull_h_sample, lower_isometry_estimate,
    offset_coefficient, prefactor_full, prefactor_rounded, theory_constants, IsometryEstimate,
    TheoryConstants,
};
pub use cover::{
    cover_bound_h, cover_bound_h_expanded, cover_bound_sparse, empirical_distance, greedy_cover,
    CoverInputs,
};
pub use fuzz::{random_class, random_star_instance, FuzzParams};
pub use offset::{km_constants, lemma9_bound, offset_max, offset_sup, OffsetMode, EXACT_MAX_N};
pub use star_set::{
    corollary3_margin, geometric_margin, geometric_margin_exact, simplex_grid, star_set_minimize,
    StarInstance, StarSolution,
};

use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Constant of the geometric inequality for approximate minimizers.
pub const GEOM_C: f64 = 1.0 / 36.0;
/// Constant of the geometric inequality for an exact second-step minimizer.
pub const EXACT_GEOM_C: f64 = 1.0 / 18.0;

/// A Monte Carlo or exact estimate; `stderr` is zero for exact values.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Estimate { value, stderr: 0.0 }
    }

    /// Mean and standard error of the mean of `samples`.
    pub fn from_samples(samples: &[f64]) -> Self {
        let k = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / k;
        if samples.len() < 2 {
            return Estimate {
                value: mean,
                stderr: 0.0,
            };
        }
        let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (k - 1.0);
        Estimate {
            value: mean,
            stderr: (var / k).sqrt(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiniteClass {
    /// Row `i` is function `f_i` at the sample points.
    pub values: Array2<f64>,
    pub labels: Array1<f64>,
}

impl FiniteClass {
    pub fn new(values: Array2<f64>, labels: Array1<f64>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(Error::InvalidArgument(
                "a finite class needs N >= 1 and n >= 1".into(),
            ));
        }
        if values.ncols() != labels.len() {
            return Err(Error::Shape(format!(
                "{} sample points but {} labels",
                values.ncols(),
                labels.len()
            )));
        }
        if values.iter().chain(labels.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Numeric("class values must be finite".into()));
        }
        Ok(FiniteClass { values, labels })
    }

    /// Number of functions `N`.
    pub fn size(&self) -> usize {
        self.values.nrows()
    }

    /// Number of sample points `n`.
    pub fn n(&self) -> usize {
        self.values.ncols()
    }

    pub fn risks(&self) -> Vec<f64> {
        self.values
            .outer_iter()
            .map(|r| empirical_risk(r, self.labels.view()))
            .collect()
    }
}

/// `Ê(v − Y)²`.
pub fn empirical_risk(v: ArrayView1<f64>, y: ArrayView1<f64>) -> f64 {
    let n = v.len() as f64;
    v.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / n
}

/// Rows whose empirical risk is within `delta` of the smallest.
pub fn delta_erm_set(class: &FiniteClass, delta: f64) -> Vec<usize> {
    let risks = class.risks();
    let min = risks.iter().copied().fold(f64::INFINITY, f64::min);
    risks
        .iter()
        .enumerate()
        .filter(|(_, &r)| r <= min + delta)
        .map(|(i, _)| i)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn risk_examples() {
        assert_eq!(
            empirical_risk(array![1.0, 1.0].view(), array![0.0, 0.0].view()),
            1.0
        );
        let y = array![0.3, -2.0];
        assert_eq!(empirical_risk(y.view(), y.view()), 0.0);
    }

    #[test]
    fn delta_erm_examples() {
        let c = FiniteClass::new(array![[0.0, 0.0], [1.0, 1.0]], array![0.0, 0.0]).unwrap();
        assert_eq!(delta_erm_set(&c, 0.0), vec![0]);
        assert_eq!(delta_erm_set(&c, 0.5), vec![0]);
        assert_eq!(delta_erm_set(&c, 1.0), vec![0, 1]);
    }

    #[test]
    fn class_validation() {
        assert!(FiniteClass::new(Array2::zeros((0, 2)), Array1::zeros(2)).is_err());
        assert!(FiniteClass::new(Array2::zeros((1, 2)), Array1::zeros(3)).is_err());
    }
}
