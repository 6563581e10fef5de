use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::nn::{predict, sample_sparse_network, NetworkSpec};
use crate::seed;
use crate::theory::{
    corollary3_margin, cover_bound_h, cover_bound_h_expanded, cover_bound_sparse,
    empirical_distance, geometric_margin, geometric_margin_exact, greedy_cover, lemma9_bound,
    lower_isometry_estimate, offset_max, offset_sup, random_star_instance, CoverInputs,
    FiniteClass, FuzzParams, OffsetMode, StarInstance, GEOM_C,
};
use crate::{Error, Result};

/// Margins below this count as violations of exact inequalities.
pub const MARGIN_TOL: f64 = 1e-9;
/// Monte Carlo draws per set in the deviation check.
pub const DEVIATION_DRAWS: usize = 2000;
/// Confidence level of the deviation check.
pub const DEVIATION_DELTA: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Geometric,
    Offset,
    Cover,
    Isometry,
    Corollary3,
    All,
}

impl std::str::FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "geometric" => Ok(Suite::Geometric),
            "offset" => Ok(Suite::Offset),
            "cover" => Ok(Suite::Cover),
            "isometry" => Ok(Suite::Isometry),
            "corollary3" => Ok(Suite::Corollary3),
            "all" => Ok(Suite::All),
            _ => Err(Error::InvalidArgument(format!(
                "unknown theory suite {s:?}"
            ))),
        }
    }
}

/// Outcome of one check over many seeded instances.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub instances: usize,
    /// Smallest slack over all instances; negative beyond the check's
    /// tolerance means a violation.
    pub min_margin: f64,
    pub violations: usize,
    /// Seed of every instance, in instance order.
    pub seeds: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub trials: usize,
    pub seed: u64,
    pub checks: Vec<CheckReport>,
}

impl SuiteReport {
    pub fn violations(&self) -> usize {
        self.checks.iter().map(|c| c.violations).sum()
    }
}

/// Per-instance outcome: `(margin, violated)`.
type Outcome = (f64, bool);

fn check(
    name: &str,
    stream: u64,
    instances: usize,
    seed: u64,
    run: impl Fn(u64) -> Result<Vec<Outcome>> + Sync,
) -> Result<CheckReport> {
    let seeds: Vec<u64> = (0..instances)
        .map(|i| seed::derive(seed, &[stream, i as u64]))
        .collect();
    let outcomes: Vec<Vec<Outcome>> = seeds.par_iter().map(|&s| run(s)).collect::<Result<_>>()?;
    let flat: Vec<Outcome> = outcomes.into_iter().flatten().collect();
    Ok(CheckReport {
        name: name.into(),
        instances: flat.len(),
        min_margin: flat.iter().map(|o| o.0).fold(f64::INFINITY, f64::min),
        violations: flat.iter().filter(|o| o.1).count(),
        seeds,
    })
}

fn star_instance(s: u64) -> Result<StarInstance> {
    random_star_instance(&FuzzParams::default(), &mut seed::rng(s))
}

/// Geometric inequality with approximate minimisers, on random finite classes.
pub fn geometric_check(trials: usize, seed: u64) -> Result<CheckReport> {
    check("geometric", 1, trials, seed, |s| {
        let (m, _) = geometric_margin(&star_instance(s)?, GEOM_C);
        Ok(vec![(m, m < -MARGIN_TOL)])
    })
}

/// Exact-minimiser form of the geometric inequality on the same instances.
pub fn geometric_exact_check(trials: usize, seed: u64) -> Result<CheckReport> {
    check("geometric_exact", 1, trials, seed, |s| {
        let (m, _) = geometric_margin_exact(&star_instance(s)?);
        Ok(vec![(m, m < -MARGIN_TOL)])
    })
}

/// A random finite set of vectors with `n ≤ 12`, noise `ξ` and constant `C`.
pub fn random_offset_set(rng: &mut dyn rand::RngCore) -> (Array2<f64>, Vec<f64>, f64) {
    let n = rng.random_range(1..=12);
    let size = rng.random_range(1..=40);
    let scale = [0.1, 1.0, 5.0][rng.random_range(0..3)];
    let mut set = Array2::from_shape_fn((size, n), |_| {
        let z: f64 = StandardNormal.sample(&mut *rng);
        scale * z
    });
    if rng.random_bool(0.2) {
        set.row_mut(0).fill(0.0);
    }
    let xi: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut *rng)).collect();
    let c = rng.random_range(0.05..2.0);
    (set, xi, c)
}

/// Exhaustive sign enumeration against the expectation bound.
pub fn offset_expectation_check(trials: usize, seed: u64) -> Result<CheckReport> {
    check("offset_expectation", 2, trials, seed, |s| {
        let (set, xi, c) = random_offset_set(&mut seed::rng(s));
        let exact = offset_sup(&set, &xi, c, OffsetMode::Exact)?.value;
        let bound = lemma9_bound(&set, &xi, c, None)?;
        let m = bound - exact;
        Ok(vec![(m, m < -1e-12)])
    })
}

/// Frequency of exceeding the deviation level at `δ = 0.1` over 2000 draws,
/// against `δ + 3·√(δ(1−δ)/2000)`. The margin is allowed minus observed.
pub fn offset_deviation_check(trials: usize, seed: u64) -> Result<CheckReport> {
    check("offset_deviation", 2, trials, seed, |s| {
        let mut rng = seed::rng(s);
        let (set, xi, c) = random_offset_set(&mut rng);
        let level = lemma9_bound(&set, &xi, c, Some(DEVIATION_DELTA))?;
        let n = xi.len();
        let mut sigma = vec![0.0; n];
        let mut over = 0usize;
        for _ in 0..DEVIATION_DRAWS {
            sigma
                .iter_mut()
                .for_each(|v| *v = if rng.random::<bool>() { 1.0 } else { -1.0 });
            if offset_max(&set, &xi, c, &sigma) > level {
                over += 1;
            }
        }
        let draws = DEVIATION_DRAWS as f64;
        let allowed =
            DEVIATION_DELTA + 3.0 * (DEVIATION_DELTA * (1.0 - DEVIATION_DELTA) / draws).sqrt();
        let m = allowed - over as f64 / draws;
        Ok(vec![(m, m < 0.0)])
    })
}

/// Architecture and sparsity of the covering check.
pub fn cover_class() -> (NetworkSpec, usize) {
    (
        NetworkSpec::new(vec![4, 8, 8, 1]).expect("valid widths"),
        40,
    )
}

pub const COVER_EPSILONS: [f64; 3] = [0.5, 0.2, 0.1];

/// Values of `members` sampled class networks at `inputs` points of
/// `[-1, 1]^4`, one row per network.
pub fn sample_cover_values(
    members: usize,
    inputs: usize,
    rng: &mut dyn rand::RngCore,
) -> Result<Array2<f64>> {
    let (spec, s) = cover_class();
    let x = Array2::from_shape_fn((inputs, spec.input_dim()), |_| rng.random_range(-1.0..=1.0));
    let mut values = Array2::zeros((members, inputs));
    for mut row in values.outer_iter_mut() {
        let params = sample_sparse_network(&spec, s, rng)?;
        row.assign(&predict(&spec, &params, x.view())?.column(0));
    }
    Ok(values)
}

/// Greedy nets over 500 class members on 100 inputs: every member is covered
/// and `ln |net| ≤ cover_bound_sparse(ε)`, at each ε.
pub fn cover_sparse_check(trials: usize, seed: u64) -> Result<CheckReport> {
    check("cover_sparse", 3, trials, seed, |s| {
        let values = sample_cover_values(500, 100, &mut seed::rng(s))?;
        let (spec, sp) = cover_class();
        let inp = CoverInputs::from_spec(&spec, sp)?;
        COVER_EPSILONS
            .iter()
            .map(|&eps| {
                let net = greedy_cover(&values, eps)?;
                let covered = values.outer_iter().all(|r| {
                    net.iter()
                        .any(|&c| empirical_distance(r, values.row(c)) <= eps)
                });
                let m = cover_bound_sparse(&inp, eps)? - (net.len() as f64).ln();
                Ok((m, m < 0.0 || !covered))
            })
            .collect()
    })
}

/// The localized-class entropy bound grows with `d`, `s`, `V` and shrinking
/// `ε`; its two forms agree at `ε = 1/n`. One outcome per comparison.
pub fn cover_monotone_check() -> Result<CheckReport> {
    let specs = [vec![2, 3, 1], vec![4, 8, 8, 1], vec![13, 64, 32, 1]];
    let mut out: Vec<Outcome> = Vec::new();
    for w in &specs {
        let spec = NetworkSpec::new(w.clone())?;
        for s in [0usize, 5, 40] {
            let inp = CoverInputs::from_spec(&spec, s)?;
            for n in [10usize, 100, 1000] {
                for d in 1..=5 {
                    let eps = 1.0 / n as f64;
                    let b = cover_bound_h(&inp, d, eps)?;
                    let e = cover_bound_h_expanded(&inp, d, n)?;
                    let agree = 1e-9 * b.abs() - (b - e).abs();
                    out.push((agree, agree < 0.0));
                    let increases = [
                        cover_bound_h(&inp, d + 1, eps)? - b,
                        cover_bound_h(&CoverInputs { s: s + 1, ..inp }, d, eps)? - b,
                        cover_bound_h(
                            &CoverInputs {
                                v: inp.v * 2.0,
                                ..inp
                            },
                            d,
                            eps,
                        )? - b,
                        cover_bound_h_expanded(&inp, d, n * 2)? - e,
                    ];
                    out.extend(increases.map(|m| (m, m <= 0.0)));
                }
            }
        }
    }
    Ok(CheckReport {
        name: "cover_monotone".into(),
        instances: out.len(),
        min_margin: out.iter().map(|o| o.0).fold(f64::INFINITY, f64::min),
        violations: out.iter().filter(|o| o.1).count(),
        seeds: Vec::new(),
    })
}

const ISOMETRY_DRAWS: usize = 400;
const ISOMETRY_NS: [usize; 3] = [8, 32, 128];

fn linear_class(rng: &mut dyn rand::RngCore, k: usize) -> (Array2<f64>, Vec<f64>) {
    let p = rng.random_range(1..=4);
    let theta = Array2::from_shape_fn((k, p), |_| StandardNormal.sample(&mut *rng));
    let moments = theta.outer_iter().map(|t| t.dot(&t)).collect();
    (theta, moments)
}

fn isometry_at(
    theta: &Array2<f64>,
    moments: &[f64],
    n: usize,
    eta: f64,
    s: u64,
) -> Result<crate::theory::Estimate> {
    let p = theta.ncols();
    let draw = |rng: &mut dyn rand::RngCore| {
        let x = Array2::from_shape_fn((n, p), |_| StandardNormal.sample(&mut *rng));
        theta.dot(&x.t())
    };
    Ok(lower_isometry_estimate(draw, moments, eta, ISOMETRY_DRAWS, s)?.probability)
}

/// For random linear classes under a standard normal design, the lower
/// isometry probability does not drop with `n` beyond 5 combined standard
/// errors (paired draws share a seed). Five rather than three keeps the
/// family-wise false alarm rate small over thousands of comparisons.
pub fn isometry_monotone_check(trials: usize, seed: u64) -> Result<CheckReport> {
    check("isometry_monotone", 4, trials, seed, |s| {
        let mut rng = seed::rng(s);
        let k = rng.random_range(1..=5);
        let (theta, m) = linear_class(&mut rng, k);
        let eta = [0.3, 0.5, 0.9][rng.random_range(0..3)];
        let est: Vec<_> = ISOMETRY_NS
            .iter()
            .map(|&n| isometry_at(&theta, &m, n, eta, s))
            .collect::<Result<_>>()?;
        Ok(est
            .windows(2)
            .map(|w| {
                let tol = 5.0 * (w[0].stderr.powi(2) + w[1].stderr.powi(2)).sqrt()
                    + 1.0 / ISOMETRY_DRAWS as f64;
                let margin = w[1].value - w[0].value + tol;
                (margin, margin < -1e-12)
            })
            .collect())
    })
}

/// A single linear function has `(1/n)Σf²/Ef² ~ χ²_n/n`, so the probability is
/// `P(χ²_n ≥ n(1−η))`. The estimate must lie within 5 binomial standard
/// errors plus one draw of resolution of it.
pub fn isometry_chi2_check(trials: usize, seed: u64) -> Result<CheckReport> {
    check("isometry_chi2", 5, trials, seed, |s| {
        let mut rng = seed::rng(s);
        let (theta, m) = linear_class(&mut rng, 1);
        let eta = [0.3, 0.5, 0.9, 0.99][rng.random_range(0..4)];
        ISOMETRY_NS
            .iter()
            .map(|&n| {
                let est = isometry_at(&theta, &m, n, eta, s)?;
                let chi =
                    ChiSquared::new(n as f64).map_err(|e| Error::InvalidArgument(e.to_string()))?;
                let oracle = 1.0 - chi.cdf(n as f64 * (1.0 - eta));
                let tol = 5.0 * (oracle * (1.0 - oracle) / ISOMETRY_DRAWS as f64).sqrt()
                    + 1.0 / ISOMETRY_DRAWS as f64;
                let margin = tol - (est.value - oracle).abs();
                Ok((margin, margin < 0.0))
            })
            .collect()
    })
}

/// Bounded random features `a·tanh(w·x + b)` evaluated at `x`.
fn tanh_class(params: &[(Array1<f64>, f64, f64)], x: &Array2<f64>) -> Array2<f64> {
    let mut v = Array2::zeros((params.len(), x.nrows()));
    for (mut row, (w, b, a)) in v.outer_iter_mut().zip(params) {
        row.assign(&x.dot(w).mapv(|z| a * (z + b).tanh()));
    }
    v
}

/// Population sample size of the corollary check.
pub const COROLLARY_REFERENCE: usize = 20_000;

/// The excess-risk decomposition for the star estimator on random classes of
/// bounded features, with population expectations over a disjoint reference
/// sample. Violation when the margin is below `−3·stderr`.
pub fn corollary3_check(trials: usize, seed: u64) -> Result<CheckReport> {
    check("corollary3", 6, trials, seed, |s| {
        let mut rng = seed::rng(s);
        let p = 2;
        let size = rng.random_range(2..=20);
        let n = rng.random_range(4..=16);
        let d = rng.random_range(1..=3);
        let delta1 = [0.0, 0.1][rng.random_range(0..2)];
        let noise = rng.random_range(0.0..0.5);
        let params: Vec<_> = (0..size)
            .map(|_| {
                let w = Array1::from_shape_fn(p, |_| StandardNormal.sample(&mut rng));
                (w, rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            })
            .collect();
        let target = |x: &Array2<f64>, rng: &mut dyn rand::RngCore| {
            x.outer_iter()
                .map(|r| {
                    let e: f64 = StandardNormal.sample(&mut *rng);
                    (r[0] * r[1]).sin() + noise * e
                })
                .collect::<Array1<f64>>()
        };
        let xs = Array2::from_shape_fn((n, p), |_| rng.random_range(-1.0..=1.0));
        let ys = target(&xs, &mut rng);
        let xp = Array2::from_shape_fn((COROLLARY_REFERENCE, p), |_| rng.random_range(-1.0..=1.0));
        let yp = target(&xp, &mut rng);
        let sample = FiniteClass::new(tanh_class(&params, &xs), ys)?;
        let population = FiniteClass::new(tanh_class(&params, &xp), yp)?;
        let pool = crate::theory::delta_erm_set(&sample, delta1);
        let erms: Vec<usize> = (0..d)
            .map(|_| pool[rng.random_range(0..pool.len())])
            .collect();
        let inst = StarInstance::new(sample, delta1, &erms, 10)?;
        let sol = &inst.solution;
        let fhat_pop = sol.combine(&population.values, false);
        let est = corollary3_margin(
            &inst.class,
            &population,
            sol.fhat.view(),
            fhat_pop.view(),
            delta1 + sol.delta2_certified,
            GEOM_C,
        )?;
        let m = est.value + 3.0 * est.stderr;
        Ok(vec![(m, m < -MARGIN_TOL)])
    })
}

/// Run one suite (or all). `trials` is the number of random instances per
/// check; for the covering check it is the number of independent member
/// samples.
pub fn run_theory_suite(suite: Suite, trials: usize, seed: u64) -> Result<SuiteReport> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be >= 1".into()));
    }
    let wants = |s: Suite| suite == s || suite == Suite::All;
    let mut checks = Vec::new();
    if wants(Suite::Geometric) {
        checks.push(geometric_check(trials, seed)?);
        checks.push(geometric_exact_check(trials, seed)?);
    }
    if wants(Suite::Offset) {
        checks.push(offset_expectation_check(trials, seed)?);
        checks.push(offset_deviation_check(trials, seed)?);
    }
    if wants(Suite::Cover) {
        checks.push(cover_sparse_check(trials, seed)?);
        checks.push(cover_monotone_check()?);
    }
    if wants(Suite::Isometry) {
        checks.push(isometry_monotone_check(trials, seed)?);
        checks.push(isometry_chi2_check(trials, seed)?);
    }
    if wants(Suite::Corollary3) {
        checks.push(corollary3_check(trials, seed)?);
    }
    Ok(SuiteReport {
        suite,
        trials,
        seed,
        checks,
    })
}
