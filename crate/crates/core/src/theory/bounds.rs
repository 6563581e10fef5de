use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use super::{km_constants, Estimate, GEOM_C};
use crate::data::SyntheticSpec;
use crate::seed::{self, stream};
use crate::{Error, Result};

/// Random members of `F − f* + Hull_d`: rows
/// `(f − f*) + Σ λ_i (f_i − f)` with `f, f_1 … f_d` uniform class rows and
/// `(λ, slack)` uniform on the `d+1` simplex, so `Σλ ≤ 1`.
pub fn hull_h_sample(
    values: &Array2<f64>,
    f_star: usize,
    d: usize,
    count: usize,
    rng: &mut dyn rand::RngCore,
) -> Result<Array2<f64>> {
    let big_n = values.nrows();
    if f_star >= big_n {
        return Err(Error::InvalidArgument(format!(
            "f* row {f_star} outside {big_n} rows"
        )));
    }
    if d == 0 {
        return Err(Error::InvalidArgument("d must be at least 1".into()));
    }
    let mut out = Array2::zeros((count, values.ncols()));
    for mut row in out.outer_iter_mut() {
        let f = rng.random_range(0..big_n);
        let e: Vec<f64> = (0..=d).map(|_| Exp1.sample(rng)).collect();
        let total: f64 = e.iter().sum();
        row.assign(&(&values.row(f) - &values.row(f_star)));
        for &ei in &e[..d] {
            let fi = rng.random_range(0..big_n);
            row.scaled_add(ei / total, &(&values.row(fi) - &values.row(f)));
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsometryEstimate {
    pub probability: Estimate,
    /// Functions skipped because `E f² = 0`.
    pub excluded: usize,
}

/// Monte Carlo estimate of `P(inf_{f≠0} (1/n)Σ f²(X_i) / E f² ≥ 1 − η)`.
///
/// `draw` returns the class evaluated at a fresh sample of `n` points (one
/// row per function) and `second_moments[j]` is `E f_j²`. Functions with zero
/// second moment are skipped and counted in `excluded`. The standard error
/// is binomial.
pub fn lower_isometry_estimate(
    mut draw: impl FnMut(&mut dyn rand::RngCore) -> Array2<f64>,
    second_moments: &[f64],
    eta: f64,
    trials: usize,
    seed: u64,
) -> Result<IsometryEstimate> {
    if trials == 0 {
        return Err(Error::InvalidArgument("need at least one trial".into()));
    }
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "eta must lie in (0, 1), got {eta}"
        )));
    }
    let mut rng = seed::rng(seed);
    let mut hits = 0usize;
    for _ in 0..trials {
        let vals = draw(&mut rng);
        if vals.nrows() != second_moments.len() {
            return Err(Error::Shape(format!(
                "draw returned {} functions but {} second moments were given",
                vals.nrows(),
                second_moments.len()
            )));
        }
        let inf = vals
            .outer_iter()
            .zip(second_moments)
            .filter(|(_, &m)| m > 0.0)
            .map(|(r, &m)| r.dot(&r) / r.len() as f64 / m)
            .fold(f64::INFINITY, f64::min);
        if inf >= 1.0 - eta {
            hits += 1;
        }
    }
    let p = hits as f64 / trials as f64;
    Ok(IsometryEstimate {
        probability: Estimate {
            value: p,
            stderr: (p * (1.0 - p) / trials as f64).sqrt(),
        },
        excluded: second_moments.iter().filter(|&&m| m <= 0.0).count(),
    })
}

/// Moment and offset constants of the excess-risk bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoryConstants {
    /// `sup_h E h⁴ / (E h²)²`; at least 1.
    pub a: f64,
    /// `E ξ⁴`.
    pub b: f64,
    pub k: f64,
    pub m: f64,
    pub c: f64,
}

/// `A` and `B` from population draws (`h_reference`, `xi_reference`), `K` and
/// `M` from the sample evaluation `h_sample` with noise `xi_sample`.
pub fn theory_constants(
    h_reference: &Array2<f64>,
    xi_reference: &[f64],
    h_sample: &Array2<f64>,
    xi_sample: &[f64],
    c: f64,
) -> Result<TheoryConstants> {
    if xi_reference.is_empty() {
        return Err(Error::InvalidArgument("need reference noise draws".into()));
    }
    let a = h_reference
        .outer_iter()
        .filter_map(|h| {
            let m2 = h.iter().map(|v| v * v).sum::<f64>() / h.len() as f64;
            let m4 = h.iter().map(|v| v.powi(4)).sum::<f64>() / h.len() as f64;
            (m2 > 0.0).then(|| m4 / (m2 * m2))
        })
        .fold(1.0, f64::max);
    let b = xi_reference.iter().map(|x| x.powi(4)).sum::<f64>() / xi_reference.len() as f64;
    let (k, m) = km_constants(h_sample, xi_sample, c)?;
    Ok(TheoryConstants { a, b, k, m, c })
}

/// Offset constant `C = min{c/(4F′), c/(4F(2+c))}` with `F = V(L+1)` and
/// `c` the geometric constant.
pub fn offset_coefficient(f_prime: f64, f_bound: f64) -> Result<f64> {
    if !(f_prime > 0.0 && f_bound > 0.0) {
        return Err(Error::InvalidArgument("F' and F must be positive".into()));
    }
    let c = GEOM_C;
    Ok((c / (4.0 * f_prime)).min(c / (4.0 * f_bound * (2.0 + c))))
}

/// Prefactor `2F′ + F(2+c)/2` of the expectation bound, as derived in full.
pub fn prefactor_full(f_prime: f64, f_bound: f64) -> f64 {
    2.0 * f_prime + f_bound * (2.0 + GEOM_C) / 2.0
}

/// The rounded prefactor `2(F′ + F)`; it dominates [`prefactor_full`].
pub fn prefactor_rounded(f_prime: f64, f_bound: f64) -> f64 {
    2.0 * (f_prime + f_bound)
}

/// `prefactor · (K + M · log_cover) / n`.
pub fn expectation_bound(prefactor: f64, k: f64, m: f64, log_cover: f64, n: usize) -> f64 {
    prefactor * (k + m * log_cover) / n as f64
}

/// `E(f̂ − Y)² − E(f* − Y)²` for a synthetic task. With independent noise
/// this equals `E(f̂ − f*)²`, estimated on `reference_n` fresh inputs drawn
/// from the `REFERENCE` stream of `seed`.
pub fn excess_risk_synthetic(
    predict: impl Fn(&Array2<f64>) -> Result<Array2<f64>>,
    spec: &SyntheticSpec,
    reference_n: usize,
    seed: u64,
) -> Result<Estimate> {
    if reference_n == 0 {
        return Err(Error::InvalidArgument(
            "need at least one reference point".into(),
        ));
    }
    let x = spec.sample_inputs(
        reference_n,
        &mut seed::rng(seed::child(seed, stream::REFERENCE)),
    );
    let truth = spec.f_star(&x)?;
    let got = predict(&x)?;
    if got.dim() != truth.dim() {
        return Err(Error::Shape(format!(
            "predictor returned {:?}, expected {:?}",
            got.dim(),
            truth.dim()
        )));
    }
    let per_point: Vec<f64> = got
        .outer_iter()
        .zip(truth.outer_iter())
        .map(|(a, b)| a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum())
        .collect();
    Ok(Estimate::from_samples(&per_point))
}
