use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{delta_erm_set, FiniteClass, StarInstance};
use crate::{Error, Result};

/// Ranges for random star instances.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FuzzParams {
    pub max_n: usize,
    pub max_size: usize,
    pub max_d: usize,
    pub delta1_choices: Vec<f64>,
    pub grid_res: usize,
}

impl Default for FuzzParams {
    fn default() -> Self {
        FuzzParams {
            max_n: 16,
            max_size: 40,
            max_d: 4,
            delta1_choices: vec![0.0, 0.1, 0.5],
            grid_res: 10,
        }
    }
}

/// A random finite class and labels, mixing three regimes: generic Gaussian
/// values, labels close to a mixture of rows, and values on a coarse lattice
/// so that ties and duplicate rows occur.
pub fn random_class(n: usize, size: usize, rng: &mut dyn rand::RngCore) -> Result<FiniteClass> {
    let mut values = Array2::from_shape_fn((size, n), |_| StandardNormal.sample(&mut *rng));
    let regime = rng.random_range(0..3);
    if regime == 2 {
        values.mapv_inplace(|v: f64| (v * 2.0).round() / 2.0);
    }
    let labels = if regime == 1 {
        let a = rng.random_range(0..size);
        let b = rng.random_range(0..size);
        let t: f64 = rng.random();
        Array1::from_shape_fn(n, |i| {
            let e: f64 = StandardNormal.sample(&mut *rng);
            t * values[[a, i]] + (1.0 - t) * values[[b, i]] + 0.1 * e
        })
    } else {
        Array1::from_shape_fn(n, |_| StandardNormal.sample(&mut *rng))
    };
    FiniteClass::new(values, labels)
}

/// A random class with `d` ERM rows drawn (with replacement) from its
/// `Δ₁`-ERM set, solved on the star set.
pub fn random_star_instance(p: &FuzzParams, rng: &mut dyn rand::RngCore) -> Result<StarInstance> {
    if p.max_n == 0 || p.max_size == 0 || p.max_d == 0 || p.delta1_choices.is_empty() {
        return Err(Error::InvalidArgument(
            "fuzz ranges must be non-empty".into(),
        ));
    }
    let n = rng.random_range(1..=p.max_n);
    let size = rng.random_range(1..=p.max_size);
    let d = rng.random_range(1..=p.max_d);
    let delta1 = p.delta1_choices[rng.random_range(0..p.delta1_choices.len())];
    let class = random_class(n, size, rng)?;
    let pool = delta_erm_set(&class, delta1);
    let erms: Vec<usize> = (0..d)
        .map(|_| pool[rng.random_range(0..pool.len())])
        .collect();
    StarInstance::new(class, delta1, &erms, p.grid_res)
}
