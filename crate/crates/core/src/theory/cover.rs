use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::nn::{v_constant, NetworkSpec};
use crate::{Error, Result};

/// Class parameters entering the entropy bounds: depth `L`, `V = ∏(p_l+1)`
/// and sparsity `s`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverInputs {
    pub depth: usize,
    pub v: f64,
    pub s: usize,
}

impl CoverInputs {
    pub fn from_spec(spec: &NetworkSpec, s: usize) -> Result<Self> {
        Ok(CoverInputs {
            depth: spec.depth(),
            v: v_constant(spec)?,
            s,
        })
    }

    fn check(&self) -> Result<()> {
        if !(self.v >= 1.0 && self.v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "V must be finite and >= 1, got {}",
                self.v
            )));
        }
        Ok(())
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "epsilon must be positive, got {eps}"
        )));
    }
    Ok(())
}

/// Log sup-norm covering number bound of the sparse class:
/// `(s+1) ln(2 ε⁻¹ (L+1) V²)`.
pub fn cover_bound_sparse(inp: &CoverInputs, eps: f64) -> Result<f64> {
    inp.check()?;
    check_eps(eps)?;
    let l1 = (inp.depth + 1) as f64;
    Ok((inp.s as f64 + 1.0) * (2.0 * l1 * inp.v * inp.v / eps).ln())
}

/// Log covering number bound of the localized class
/// `H = F − f* + Hull_d`:
/// `(d+2)[sparse(ε/(3(d+1))) + ln(6(d+1)V(L+1)/ε)]`.
pub fn cover_bound_h(inp: &CoverInputs, d: usize, eps: f64) -> Result<f64> {
    if d == 0 {
        return Err(Error::InvalidArgument("d must be at least 1".into()));
    }
    check_eps(eps)?;
    let k = (d + 1) as f64;
    let l1 = (inp.depth + 1) as f64;
    let sparse = cover_bound_sparse(inp, eps / (3.0 * k))?;
    Ok((d as f64 + 2.0) * (sparse + (6.0 * k * inp.v * l1 / eps).ln()))
}

/// The bound of [`cover_bound_h`] at `ε = 1/n`, written out:
/// `(d+2)[(s+1) ln(2V²(L+1)·3n(d+1)) + ln(6n(d+1)V(L+1))]`.
pub fn cover_bound_h_expanded(inp: &CoverInputs, d: usize, n: usize) -> Result<f64> {
    inp.check()?;
    if d == 0 || n == 0 {
        return Err(Error::InvalidArgument("d and n must be at least 1".into()));
    }
    let (k, l1, n) = ((d + 1) as f64, (inp.depth + 1) as f64, n as f64);
    let v = inp.v;
    Ok((d as f64 + 2.0)
        * ((inp.s as f64 + 1.0) * (2.0 * v * v * l1 * 3.0 * n * k).ln()
            + (6.0 * n * k * v * l1).ln()))
}

/// `√(Ê(a − b)²)`, the empirical L2 distance.
pub fn empirical_distance(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    let n = a.len() as f64;
    (a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / n).sqrt()
}

/// Farthest-point greedy `eps`-net of the rows of `points` under the
/// empirical L2 distance. Returns the chosen row indices; every row is
/// within `eps` of one of them.
pub fn greedy_cover(points: &Array2<f64>, eps: f64) -> Result<Vec<usize>> {
    check_eps(eps)?;
    if points.nrows() == 0 {
        return Ok(Vec::new());
    }
    let mut centers = vec![0usize];
    let mut dist: Vec<f64> = points
        .outer_iter()
        .map(|r| empirical_distance(r, points.row(0)))
        .collect();
    loop {
        let (far, &gap) = dist
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("non-empty");
        if gap <= eps {
            return Ok(centers);
        }
        centers.push(far);
        let c = points.row(far);
        for (d, r) in dist.iter_mut().zip(points.outer_iter()) {
            *d = d.min(empirical_distance(r, c));
        }
    }
}
