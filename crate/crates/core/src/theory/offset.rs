use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Estimate;
use crate::seed;
use crate::{Error, Result};

/// Largest `n` for which [`OffsetMode::Auto`] enumerates all sign vectors.
pub const EXACT_MAX_N: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum OffsetMode {
    /// Enumerate all `2^n` sign vectors.
    Exact,
    /// Average over `trials` Rademacher draws.
    MonteCarlo { trials: usize, seed: u64 },
    /// Exact when `n ≤ 20`, otherwise Monte Carlo.
    Auto { trials: usize, seed: u64 },
}

fn check(set: &Array2<f64>, xi: &[f64], c: f64) -> Result<()> {
    if set.nrows() == 0 || set.ncols() == 0 {
        return Err(Error::InvalidArgument(
            "offset process needs a non-empty set".into(),
        ));
    }
    if set.ncols() != xi.len() {
        return Err(Error::Shape(format!(
            "vectors have length {} but xi has {}",
            set.ncols(),
            xi.len()
        )));
    }
    if c.is_nan() || c <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "offset constant must be positive, got {c}"
        )));
    }
    Ok(())
}

/// Coefficients `a_{v,i} = ξ_i v_i` and offsets `C Σ v_i²` for every row.
fn prepare(set: &Array2<f64>, xi: &[f64], c: f64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let a = set
        .outer_iter()
        .map(|v| v.iter().zip(xi).map(|(vi, x)| vi * x).collect())
        .collect();
    let q = set.outer_iter().map(|v| c * v.dot(&v)).collect();
    (a, q)
}

/// `max_v (1/n) Σ_i (σ_i ξ_i v_i − C v_i²)` for a fixed sign vector.
pub fn offset_max(set: &Array2<f64>, xi: &[f64], c: f64, sigma: &[f64]) -> f64 {
    let n = set.ncols() as f64;
    set.outer_iter()
        .map(|v| {
            v.iter()
                .zip(xi)
                .zip(sigma)
                .map(|((vi, x), s)| s * x * vi - c * vi * vi)
                .sum::<f64>()
                / n
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `E_σ max_v (1/n) Σ_i (σ_i ξ_i v_i − C v_i²)` over Rademacher signs.
///
/// The exact mode walks the sign vectors in Gray-code order, so each step
/// updates every row's linear term with one addition.
pub fn offset_sup(set: &Array2<f64>, xi: &[f64], c: f64, mode: OffsetMode) -> Result<Estimate> {
    check(set, xi, c)?;
    let n = set.ncols();
    let mode = match mode {
        OffsetMode::Auto { trials, seed } if n > EXACT_MAX_N => {
            OffsetMode::MonteCarlo { trials, seed }
        }
        OffsetMode::Auto { .. } => OffsetMode::Exact,
        m => m,
    };
    let (a, q) = prepare(set, xi, c);
    match mode {
        OffsetMode::Exact => {
            if n > 30 {
                return Err(Error::InvalidArgument(format!(
                    "exact enumeration over 2^{n} sign vectors is not supported"
                )));
            }
            let mut lin: Vec<f64> = a.iter().map(|r| r.iter().sum()).collect();
            let mut sigma = vec![1.0; n];
            let total = 1u64 << n;
            let mut acc = 0.0;
            for step in 0..total {
                if step > 0 {
                    let bit = step.trailing_zeros() as usize;
                    sigma[bit] = -sigma[bit];
                    for (l, row) in lin.iter_mut().zip(&a) {
                        *l += 2.0 * sigma[bit] * row[bit];
                    }
                }
                let m = lin
                    .iter()
                    .zip(&q)
                    .map(|(l, q)| l - q)
                    .fold(f64::NEG_INFINITY, f64::max);
                acc += m;
            }
            Ok(Estimate::exact(acc / total as f64 / n as f64))
        }
        OffsetMode::MonteCarlo { trials, seed } => {
            if trials == 0 {
                return Err(Error::InvalidArgument(
                    "Monte Carlo needs at least one trial".into(),
                ));
            }
            let mut rng = seed::rng(seed);
            let mut sigma = vec![0.0; n];
            let draws: Vec<f64> = (0..trials)
                .map(|_| {
                    sigma
                        .iter_mut()
                        .for_each(|s| *s = if rng.random::<bool>() { 1.0 } else { -1.0 });
                    offset_max(set, xi, c, &sigma)
                })
                .collect();
            Ok(Estimate::from_samples(&draws))
        }
        OffsetMode::Auto { .. } => unreachable!("resolved above"),
    }
}

/// `sup_{v≠0} Σ v_i² ξ_i² / (2C Σ v_i²)`; zero when every row is zero.
fn offset_m(set: &Array2<f64>, xi: &[f64], c: f64) -> f64 {
    set.outer_iter()
        .filter_map(|v| {
            let den = v.dot(&v);
            (den > 0.0).then(|| {
                v.iter().zip(xi).map(|(vi, x)| vi * vi * x * x).sum::<f64>() / (2.0 * c * den)
            })
        })
        .fold(0.0, f64::max)
}

/// Upper bound on the offset process for a set of `N` vectors.
///
/// Without `delta` this is the expectation bound `M ln N / n`. With `delta`
/// it is the level `M (ln N + ln(1/δ)) / n` exceeded with probability at most
/// `δ`.
pub fn lemma9_bound(set: &Array2<f64>, xi: &[f64], c: f64, delta: Option<f64>) -> Result<f64> {
    check(set, xi, c)?;
    let n = set.ncols() as f64;
    let m = offset_m(set, xi, c);
    let mut log = (set.nrows() as f64).ln();
    if let Some(d) = delta {
        if !(d > 0.0 && d < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "delta must lie in (0, 1), got {d}"
            )));
        }
        log += (1.0 / d).ln();
    }
    Ok(m * log / n)
}

/// The constants `(K, M)` of the excess-risk bound for a finite sample of the
/// localized class `H`: `K = 2(√(Σξ²/n) + C)` and
/// `M = sup_{h≠0} 4 Σ h² ξ² / (C Σ h²)`.
pub fn km_constants(h: &Array2<f64>, xi: &[f64], c: f64) -> Result<(f64, f64)> {
    check(h, xi, c)?;
    let n = xi.len() as f64;
    let k = 2.0 * ((xi.iter().map(|x| x * x).sum::<f64>() / n).sqrt() + c);
    let m = 8.0 * offset_m(h, xi, c);
    Ok((k, m))
}
