use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{NetParams, NetworkSpec};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparsityReport {
    pub active_entries: usize,
    pub max_entry_norm: f64,
}

fn class_entries(params: &NetParams) -> impl Iterator<Item = &f64> {
    params
        .weights
        .iter()
        .flat_map(|w| w.iter())
        .chain(params.shifts.iter().flat_map(|v| v.iter()))
}

/// Largest absolute weight or shift entry. Batch-norm state is not part of the class.
pub fn max_entry_norm(params: &NetParams) -> f64 {
    class_entries(params).fold(0.0, |m, x| m.max(x.abs()))
}

/// Weight and shift entries with `|value| > tol`.
pub fn sparsity_count(params: &NetParams, tol: f64) -> usize {
    class_entries(params).filter(|x| x.abs() > tol).count()
}

pub fn sparsity_report(params: &NetParams, tol: f64) -> SparsityReport {
    SparsityReport {
        active_entries: sparsity_count(params, tol),
        max_entry_norm: max_entry_norm(params),
    }
}

/// `∏ (p_l + 1)` over all widths, computed exactly in integers.
pub fn v_constant(spec: &NetworkSpec) -> Result<f64> {
    spec.widths
        .iter()
        .try_fold(1u128, |acc, &p| acc.checked_mul(p as u128 + 1))
        .map(|v| v as f64)
        .ok_or_else(|| Error::Numeric(format!("V overflows for widths {:?}", spec.widths)))
}

/// `V·(L+1)`, a bound on `|f(x)|` for class members and `‖x‖∞ ≤ 1`.
pub fn sup_norm_bound(spec: &NetworkSpec) -> Result<f64> {
    Ok(v_constant(spec)? * (spec.depth() + 1) as f64)
}

/// Clamp every weight and shift into `[-1, 1]`.
pub fn project_to_class(params: &NetParams) -> NetParams {
    let mut out = params.clone();
    for w in out.weights.iter_mut() {
        w.mapv_inplace(|x| x.clamp(-1.0, 1.0));
    }
    for v in out.shifts.iter_mut() {
        v.mapv_inplace(|x| x.clamp(-1.0, 1.0));
    }
    out
}

/// Network with `U[-1, 1]` entries at `s` uniformly chosen weight/shift
/// positions and zeros elsewhere.
pub fn sample_sparse_network(
    spec: &NetworkSpec,
    s: usize,
    rng: &mut dyn rand::RngCore,
) -> Result<NetParams> {
    let total = spec.param_count();
    if s > total {
        return Err(Error::InvalidArgument(format!(
            "sparsity {s} exceeds the {total} available parameters"
        )));
    }
    let mut params = NetParams::zeros(spec);
    let positions = rand::seq::index::sample(rng, total, s).into_vec();
    let values: Vec<(usize, f64)> = positions
        .into_iter()
        .map(|i| (i, rng.random_range(-1.0..=1.0)))
        .collect();
    let mut flat: Vec<&mut f64> = params
        .weights
        .iter_mut()
        .flat_map(|w| w.iter_mut())
        .chain(params.shifts.iter_mut().flat_map(|v| v.iter_mut()))
        .collect();
    for (i, v) in values {
        *flat[i] = v;
    }
    Ok(params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use ndarray::array;

    fn spec(w: &[usize]) -> NetworkSpec {
        NetworkSpec::new(w.to_vec()).unwrap()
    }

    #[test]
    fn v_constant_examples() {
        assert_eq!(v_constant(&spec(&[1, 2, 1])).unwrap(), 12.0);
        assert_eq!(v_constant(&spec(&[1, 1])).unwrap(), 4.0);
        assert_eq!(v_constant(&spec(&[90, 120, 20, 1])).unwrap(), 462_462.0);
        assert_eq!(sup_norm_bound(&spec(&[1, 2, 1])).unwrap(), 24.0);
        assert_eq!(sup_norm_bound(&spec(&[1, 1])).unwrap(), 4.0);
    }

    #[test]
    fn v_constant_overflow() {
        let s = spec(&[usize::MAX / 4; 4]);
        assert!(matches!(v_constant(&s), Err(Error::Numeric(_))));
    }

    #[test]
    fn norm_and_count() {
        let s = spec(&[2, 1]);
        let mut p = NetParams::zeros(&s);
        assert_eq!(max_entry_norm(&p), 0.0);
        assert_eq!(sparsity_count(&p, 0.0), 0);
        p.weights[0] = array![[0.5, -2.0]];
        assert_eq!(max_entry_norm(&p), 2.0);
        assert_eq!(sparsity_count(&p, 0.0), 2);
        assert_eq!(sparsity_count(&p, 1.0), 1);
    }

    #[test]
    fn projection_clamps() {
        let s = spec(&[2, 1]);
        let mut p = NetParams::zeros(&s);
        p.weights[0] = array![[2.5, -0.3]];
        let q = project_to_class(&p);
        assert_eq!(q.weights[0], array![[1.0, -0.3]]);
        assert_eq!(project_to_class(&q), q);
    }

    #[test]
    fn sparse_sampling_extremes() {
        let s = spec(&[3, 4, 1]);
        let mut rng = seed::rng(9);
        let zero = sample_sparse_network(&s, 0, &mut rng).unwrap();
        assert_eq!(sparsity_count(&zero, 0.0), 0);
        let full = sample_sparse_network(&s, s.param_count(), &mut rng).unwrap();
        assert_eq!(sparsity_count(&full, 0.0), s.param_count());
        assert!(sample_sparse_network(&s, s.param_count() + 1, &mut rng).is_err());
    }
}
