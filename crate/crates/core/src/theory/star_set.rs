use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use super::{empirical_risk, Estimate, FiniteClass, EXACT_GEOM_C};
use crate::{Error, Result};

/// All points of the simplex in `k` coordinates whose entries are multiples of
/// `1/res`. There are `C(res + k − 1, k − 1)` of them.
pub fn simplex_grid(k: usize, res: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    if k == 0 || res == 0 {
        return out;
    }
    let mut cur = vec![0usize; k];
    fill(&mut cur, 0, res, &mut |c| {
        out.push(c.iter().map(|&v| v as f64 / res as f64).collect())
    });
    out
}

fn fill(cur: &mut [usize], pos: usize, left: usize, emit: &mut impl FnMut(&[usize])) {
    if pos + 1 == cur.len() {
        cur[pos] = left;
        emit(cur);
        return;
    }
    for v in 0..=left {
        cur[pos] = v;
        fill(cur, pos + 1, left - v, emit);
    }
}

/// Result of minimising the empirical risk over the star set
/// `{Σ λ_i ĝ_i + λ_{d} f : f in the class, λ in the simplex}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StarSolution {
    /// Class rows used as `ĝ_1 … ĝ_d`.
    pub erms: Vec<usize>,
    /// Grid minimiser and its coordinates: `lambda[i]` weights `erms[i]` for
    /// `i < d` and `lambda[d]` weights `class_row`.
    pub fhat: Array1<f64>,
    pub class_row: usize,
    pub lambda: Vec<f64>,
    pub risk: f64,
    /// A priori grid slack `(2ρ + ρ²)D²` with `ρ = (d+1)/res` and `D²` the
    /// largest vertex risk.
    pub delta2_lipschitz: f64,
    /// Certified lower bound on the exact star-set minimum.
    pub lower_bound: f64,
    /// `risk − lower_bound`; an upper bound on the true grid slack.
    pub delta2_certified: f64,
    /// Best point found by the exact face solve.
    pub exact_row: usize,
    pub exact_lambda: Vec<f64>,
    pub exact_risk: f64,
}

impl StarSolution {
    /// Apply the stored weights to another evaluation of the same class.
    pub fn combine(&self, values: &Array2<f64>, exact: bool) -> Array1<f64> {
        let (row, lambda) = if exact {
            (self.exact_row, &self.exact_lambda)
        } else {
            (self.class_row, &self.lambda)
        };
        let d = self.erms.len();
        let mut out = values.row(row).to_owned() * lambda[d];
        for (&g, &l) in self.erms.iter().zip(lambda) {
            out.scaled_add(l, &values.row(g));
        }
        out
    }
}

/// Gram matrix of the residuals `v_j − Y` over the vertices, divided by `n`.
fn gram(vertices: &[ArrayView1<f64>], y: ArrayView1<f64>) -> Vec<Vec<f64>> {
    let n = y.len() as f64;
    let res: Vec<Array1<f64>> = vertices.iter().map(|v| v - &y).collect();
    let k = res.len();
    let mut q = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in i..k {
            let v = res[i].dot(&res[j]) / n;
            q[i][j] = v;
            q[j][i] = v;
        }
    }
    q
}

fn quad(q: &[Vec<f64>], l: &[f64]) -> f64 {
    let mut s = 0.0;
    for (i, row) in q.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            s += l[i] * v * l[j];
        }
    }
    s
}

/// Convexity lower bound `φ(λ) − gap(λ)` on `min φ` over the simplex.
fn certified_lower(q: &[Vec<f64>], l: &[f64]) -> f64 {
    let grad: Vec<f64> = q
        .iter()
        .map(|row| 2.0 * row.iter().zip(l).map(|(a, b)| a * b).sum::<f64>())
        .collect();
    let along: f64 = grad.iter().zip(l).map(|(g, v)| g * v).sum();
    let best = grad.iter().copied().fold(f64::INFINITY, f64::min);
    quad(q, l) - (along - best)
}

/// Solves `A x = b` for a small symmetric positive definite `A`; `None` when a
/// pivot falls below `1e-12` of the largest diagonal entry.
fn cholesky_solve(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let m = b.len();
    let scale = (0..m).map(|i| a[i][i]).fold(0.0, f64::max);
    if scale <= 0.0 {
        return None;
    }
    let mut l = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in 0..=i {
            let s: f64 = a[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>();
            if i == j {
                if s <= 1e-12 * scale {
                    return None;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    let mut z = vec![0.0; m];
    for i in 0..m {
        z[i] = (b[i] - (0..i).map(|k| l[i][k] * z[k]).sum::<f64>()) / l[i][i];
    }
    let mut x = vec![0.0; m];
    for i in (0..m).rev() {
        x[i] = (z[i] - (i + 1..m).map(|k| l[k][i] * x[k]).sum::<f64>()) / l[i][i];
    }
    Some(x)
}

/// Minimises `λᵀQλ` over the simplex by solving the affine problem on every
/// face spanned by affinely independent vertices.
fn exact_simplex_min(q: &[Vec<f64>]) -> Vec<f64> {
    let k = q.len();
    let mut best = (f64::INFINITY, vec![0.0; k]);
    for j in 0..k {
        let mut e = vec![0.0; k];
        e[j] = 1.0;
        if q[j][j] < best.0 {
            best = (q[j][j], e);
        }
    }
    for mask in 1u32..(1 << k) {
        let s: Vec<usize> = (0..k).filter(|i| mask & (1 << i) != 0).collect();
        if s.len() < 2 {
            continue;
        }
        let b0 = s[0];
        let rest = &s[1..];
        let u: Vec<Vec<f64>> = rest
            .iter()
            .map(|&i| {
                rest.iter()
                    .map(|&j| q[i][j] - q[i][b0] - q[j][b0] + q[b0][b0])
                    .collect()
            })
            .collect();
        let rhs: Vec<f64> = rest.iter().map(|&i| q[b0][b0] - q[i][b0]).collect();
        let Some(a) = cholesky_solve(&u, &rhs) else {
            continue;
        };
        let mut l = vec![0.0; k];
        l[b0] = 1.0 - a.iter().sum::<f64>();
        for (&i, &ai) in rest.iter().zip(&a) {
            l[i] = ai;
        }
        if l.iter().any(|&v| v < -1e-12) {
            continue;
        }
        l.iter_mut().for_each(|v| *v = v.max(0.0));
        let total: f64 = l.iter().sum();
        l.iter_mut().for_each(|v| *v /= total);
        let val = quad(q, &l);
        if val < best.0 {
            best = (val, l);
        }
    }
    best.1
}

/// Brute-force minimisation of the empirical risk over the star set around
/// the given ERM rows, on a simplex grid of spacing `1/grid_res`.
///
/// Besides the grid optimum this reports a certified lower bound on the exact
/// minimum, so `delta2_certified` is a valid slack for the second step.
pub fn star_set_minimize(
    class: &FiniteClass,
    erms: &[usize],
    grid_res: usize,
) -> Result<StarSolution> {
    if erms.is_empty() {
        return Err(Error::InvalidArgument("need at least one ERM row".into()));
    }
    if grid_res == 0 {
        return Err(Error::InvalidArgument("grid_res must be positive".into()));
    }
    if let Some(&bad) = erms.iter().find(|&&e| e >= class.size()) {
        return Err(Error::InvalidArgument(format!(
            "ERM row {bad} outside a class of {} rows",
            class.size()
        )));
    }
    let d = erms.len();
    let y = class.labels.view();
    let grid = simplex_grid(d + 1, grid_res);
    let mut grid_best = (f64::INFINITY, 0usize, 0usize);
    let mut exact_best = (f64::INFINITY, 0usize, Vec::new());
    let mut lower = f64::INFINITY;
    let mut max_vertex = 0.0f64;
    for f in 0..class.size() {
        let mut verts: Vec<ArrayView1<f64>> = erms.iter().map(|&e| class.values.row(e)).collect();
        verts.push(class.values.row(f));
        let q = gram(&verts, y);
        max_vertex = max_vertex.max((0..=d).map(|i| q[i][i]).fold(0.0, f64::max));
        let mut row_best = (f64::INFINITY, 0usize);
        for (gi, l) in grid.iter().enumerate() {
            let v = quad(&q, l);
            if v < row_best.0 {
                row_best = (v, gi);
            }
        }
        if row_best.0 < grid_best.0 {
            grid_best = (row_best.0, f, row_best.1);
        }
        let exact = exact_simplex_min(&q);
        let exact_val = quad(&q, &exact);
        let row_lower = certified_lower(&q, &exact)
            .max(certified_lower(&q, &grid[row_best.1]))
            .max(0.0);
        lower = lower.min(row_lower);
        if exact_val < exact_best.0 {
            exact_best = (exact_val, f, exact);
        }
    }
    let (_, class_row, gi) = grid_best;
    let lambda = grid[gi].clone();
    let mut sol = StarSolution {
        erms: erms.to_vec(),
        fhat: Array1::zeros(class.n()),
        class_row,
        lambda,
        risk: 0.0,
        delta2_lipschitz: 0.0,
        lower_bound: lower,
        delta2_certified: 0.0,
        exact_row: exact_best.1,
        exact_lambda: exact_best.2,
        exact_risk: 0.0,
    };
    sol.fhat = sol.combine(&class.values, false);
    sol.risk = empirical_risk(sol.fhat.view(), y);
    sol.exact_risk = empirical_risk(sol.combine(&class.values, true).view(), y);
    let rho = (d + 1) as f64 / grid_res as f64;
    sol.delta2_lipschitz = (2.0 * rho + rho * rho) * max_vertex;
    sol.delta2_certified = (sol.risk - lower).max(0.0);
    Ok(sol)
}

/// A finite class with its two-step star estimator solved.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StarInstance {
    pub class: FiniteClass,
    /// Tolerance used when choosing the ERM rows.
    pub delta1: f64,
    pub solution: StarSolution,
}

impl StarInstance {
    /// `erms` must all lie in the `delta1`-ERM set of `class`.
    pub fn new(class: FiniteClass, delta1: f64, erms: &[usize], grid_res: usize) -> Result<Self> {
        let ok = super::delta_erm_set(&class, delta1);
        if let Some(&bad) = erms.iter().find(|e| !ok.contains(e)) {
            return Err(Error::InvalidArgument(format!(
                "row {bad} is not a {delta1}-ERM"
            )));
        }
        let solution = star_set_minimize(&class, erms, grid_res)?;
        Ok(StarInstance {
            class,
            delta1,
            solution,
        })
    }
}

/// Smallest value over the class of
/// `Ê(h−Y)² − Ê(f̂−Y)² − cÊ(f̂−h)² + additive`, with the minimising row.
fn margin_at(class: &FiniteClass, fhat: ArrayView1<f64>, c: f64, additive: f64) -> (f64, usize) {
    let y = class.labels.view();
    let base = empirical_risk(fhat, y);
    let mut worst = (f64::INFINITY, 0);
    for (i, h) in class.values.outer_iter().enumerate() {
        let v = empirical_risk(h, y) - base - c * empirical_risk(fhat, h) + additive;
        if v < worst.0 {
            worst = (v, i);
        }
    }
    worst
}

/// Margin of the geometric inequality for the grid estimator with slack
/// `Δ₁` and the certified `Δ₂`:
/// `min_h Ê(h−Y)² − Ê(f̂−Y)² − cÊ(f̂−h)² + 2(1+c)(Δ₁+Δ₂)`.
/// Returns the margin and the row attaining it.
pub fn geometric_margin(inst: &StarInstance, c: f64) -> (f64, usize) {
    let additive = 2.0 * (1.0 + c) * (inst.delta1 + inst.solution.delta2_certified);
    margin_at(&inst.class, inst.solution.fhat.view(), c, additive)
}

/// Margin of the exact-minimiser form (constant `1/18`, additive `2Δ₁`) at the
/// face-solve optimum. The numerical residual of that solve enters as
/// `2(1+c)Δ₂` with `Δ₂ = exact_risk − lower_bound`.
pub fn geometric_margin_exact(inst: &StarInstance) -> (f64, usize) {
    let s = &inst.solution;
    let c = EXACT_GEOM_C;
    let slack = (s.exact_risk - s.lower_bound).max(0.0);
    let additive = 2.0 * inst.delta1 + 2.0 * (1.0 + c) * slack;
    let fhat = s.combine(&inst.class.values, true);
    margin_at(&inst.class, fhat.view(), c, additive)
}

/// `RHS − LHS` of the excess-risk decomposition
/// `E(f̂−Y)² − E(f*−Y)² − 2(1+c)Δ ≤ (Ê−E)[2(f*−Y)(f*−f̂)] + E(f*−f̂)² − (1+c)Ê(f*−f̂)²`,
/// where `f*` is the population risk minimiser over the class rows and
/// population expectations are taken over `population`, a second evaluation
/// of the same class. `delta` is `Δ₁ + Δ₂`. The standard error is that of the
/// per-point population contribution.
pub fn corollary3_margin(
    sample: &FiniteClass,
    population: &FiniteClass,
    fhat_sample: ArrayView1<f64>,
    fhat_population: ArrayView1<f64>,
    delta: f64,
    c: f64,
) -> Result<Estimate> {
    if sample.size() != population.size() {
        return Err(Error::Shape(
            "sample and population classes differ in size".into(),
        ));
    }
    if fhat_sample.len() != sample.n() || fhat_population.len() != population.n() {
        return Err(Error::Shape(
            "estimator length does not match its class".into(),
        ));
    }
    let pop_risks = population.risks();
    let star = pop_risks
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let fs = sample.values.row(star);
    let ys = sample.labels.view();
    let n = sample.n() as f64;
    let emp_cross: f64 = (0..sample.n())
        .map(|i| 2.0 * (fs[i] - ys[i]) * (fs[i] - fhat_sample[i]))
        .sum::<f64>()
        / n;
    let emp_sq = empirical_risk(fs, fhat_sample);
    let fp = population.values.row(star);
    let yp = population.labels.view();
    let per_point: Vec<f64> = (0..population.n())
        .map(|i| {
            let cross = 2.0 * (fp[i] - yp[i]) * (fp[i] - fhat_population[i]);
            let sq = (fp[i] - fhat_population[i]).powi(2);
            let rhs = -cross + sq;
            let lhs = (fhat_population[i] - yp[i]).powi(2) - (fp[i] - yp[i]).powi(2);
            rhs - lhs
        })
        .collect();
    let pop = Estimate::from_samples(&per_point);
    Ok(Estimate {
        value: emp_cross - (1.0 + c) * emp_sq + pop.value + 2.0 * (1.0 + c) * delta,
        stderr: pop.stderr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn grid_sizes() {
        assert_eq!(simplex_grid(2, 4).len(), 5);
        assert_eq!(simplex_grid(3, 10).len(), 66);
        assert_eq!(simplex_grid(5, 10).len(), 1001);
        for p in simplex_grid(4, 7) {
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn midpoint_example() {
        let class = FiniteClass::new(array![[1.0, 0.0], [0.0, 1.0]], array![0.5, 0.5]).unwrap();
        let s = star_set_minimize(&class, &[0], 10).unwrap();
        assert!(s.risk.abs() < 1e-15);
        assert_eq!(s.class_row, 1);
        assert!((s.lambda[0] - 0.5).abs() < 1e-12 && (s.lambda[1] - 0.5).abs() < 1e-12);
        assert!((s.fhat[0] - 0.5).abs() < 1e-12 && (s.fhat[1] - 0.5).abs() < 1e-12);
        assert!(s.delta2_certified < 1e-12);
    }

    #[test]
    fn exact_face_solve_beats_grid() {
        // Minimum of |λa + (1-λ)b - y|² at λ = 1/3 is off the grid of spacing 1/4.
        let class = FiniteClass::new(array![[3.0, 0.0], [0.0, 0.0]], array![1.0, 0.0]).unwrap();
        let s = star_set_minimize(&class, &[1], 4).unwrap();
        assert!(s.exact_risk < s.risk);
        assert!(s.exact_risk.abs() < 1e-14);
        assert!(s.lower_bound <= s.exact_risk + 1e-15);
        assert!(s.delta2_certified <= s.delta2_lipschitz);
    }

    #[test]
    fn cholesky_rejects_singular() {
        assert!(cholesky_solve(&[vec![1.0, 1.0], vec![1.0, 1.0]], &[1.0, 1.0]).is_none());
        let x = cholesky_solve(&[vec![4.0, 2.0], vec![2.0, 3.0]], &[2.0, 1.0]).unwrap();
        assert!((x[0] - 0.5).abs() < 1e-14 && x[1].abs() < 1e-14);
    }

    #[test]
    fn corollary_identity_holds_exactly() {
        let s = FiniteClass::new(
            array![[0.0, 1.0, 2.0], [1.0, 1.0, 0.0]],
            array![0.5, 1.0, 1.0],
        )
        .unwrap();
        let p = FiniteClass::new(array![[1.0, -1.0], [0.5, 0.0]], array![0.0, 0.2]).unwrap();
        let fs = array![0.2, 1.0, 1.2];
        let fp = array![0.8, -0.5];
        let got = corollary3_margin(&s, &p, fs.view(), fp.view(), 0.0, 0.1).unwrap();
        // Population terms cancel, so the value equals the sample margin at f*.
        let star = 1;
        let inst_margin = empirical_risk(s.values.row(star), s.labels.view())
            - empirical_risk(fs.view(), s.labels.view())
            - 0.1 * empirical_risk(fs.view(), s.values.row(star));
        assert!((got.value - inst_margin).abs() < 1e-12);
        assert!(got.stderr < 1e-12);
    }
}
