//! Test-side oracles written independently of the library internals.
#![allow(dead_code)]

use ndarray::{Array2, ArrayView2};
use rand::Rng;

use stard::nn::{backprop, Loss, Mode, NetParams, NetworkSpec, Targets, BN_EPS};
use stard::seed;

/// Owned targets so a check can re-evaluate the loss many times.
#[derive(Clone, Debug)]
pub enum OwnedTargets {
    Real(Array2<f64>),
    Class(Vec<usize>),
}

impl OwnedTargets {
    pub fn view(&self) -> Targets<'_> {
        match self {
            OwnedTargets::Real(y) => Targets::Real(y.view()),
            OwnedTargets::Class(c) => Targets::Class(c),
        }
    }
}

/// Naive triple-loop forward pass. Returns the output and the ReLU activity
/// pattern of every hidden unit on every row.
///
/// Train-mode dropout replays the library's mask draws: one uniform per
/// hidden unit, row-major, layer by layer, from `seed::rng(mask_seed)`.
pub fn reference_forward(
    spec: &NetworkSpec,
    params: &NetParams,
    x: ArrayView2<f64>,
    mode: Mode,
    mask_seed: u64,
) -> (Array2<f64>, Vec<bool>) {
    let b = x.nrows();
    let mut rng = seed::rng(mask_seed);
    let mut pattern = Vec::new();
    let mut h: Vec<Vec<f64>> = (0..b).map(|r| x.row(r).to_vec()).collect();
    let depth = spec.widths.len() - 2;
    for j in 0..=depth {
        let w = &params.weights[j];
        let mut z: Vec<Vec<f64>> = h
            .iter()
            .map(|row| {
                (0..w.nrows())
                    .map(|o| (0..w.ncols()).map(|i| w[[o, i]] * row[i]).sum())
                    .collect()
            })
            .collect();
        if j == depth {
            h = z;
            break;
        }
        let width = w.nrows();
        for row in z.iter_mut() {
            for (u, v) in row.iter_mut().enumerate() {
                let s = *v - params.shifts[j][u];
                pattern.push(s > 0.0);
                *v = s.max(0.0);
            }
        }
        if spec.batch_norm {
            let bn = &params.norms[j];
            for u in 0..width {
                let (mean, var) = match mode {
                    Mode::Train => {
                        let m = z.iter().map(|r| r[u]).sum::<f64>() / b as f64;
                        let v = z.iter().map(|r| (r[u] - m) * (r[u] - m)).sum::<f64>() / b as f64;
                        (m, v)
                    }
                    Mode::Eval => (bn.running_mean[u], bn.running_var[u]),
                };
                for r in z.iter_mut() {
                    r[u] = (r[u] - mean) / (var + BN_EPS).sqrt() * bn.gamma[u] + bn.beta[u];
                }
            }
        }
        if mode == Mode::Train && spec.dropout > 0.0 {
            for r in z.iter_mut() {
                for v in r.iter_mut() {
                    *v = if rng.random::<f64>() < spec.dropout {
                        0.0
                    } else {
                        *v / (1.0 - spec.dropout)
                    };
                }
            }
        }
        h = z;
    }
    let k = spec.output_dim();
    let out = Array2::from_shape_fn((b, k), |(r, c)| h[r][c]);
    (out, pattern)
}

pub fn reference_loss(loss: Loss, out: &Array2<f64>, targets: &OwnedTargets) -> f64 {
    let b = out.nrows() as f64;
    match (loss, targets) {
        (Loss::Squared, OwnedTargets::Real(y)) => (out - y).mapv(|r| r * r).sum() / b,
        (Loss::CrossEntropy, OwnedTargets::Class(c)) => {
            out.outer_iter()
                .zip(c)
                .map(|(row, &l)| {
                    let m = row.fold(f64::NEG_INFINITY, |a, &v| a.max(v));
                    m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln() - row[l]
                })
                .sum::<f64>()
                / b
        }
        _ => panic!("loss and target kinds disagree"),
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct GradCheck {
    pub max_rel_err: f64,
    /// Largest gap between library and reference forward outputs.
    pub forward_gap: f64,
    pub checked: usize,
    /// Coordinates where every trial step crosses a ReLU kink.
    pub kinks: usize,
}

/// Denominator floor: gradients smaller than this are compared absolutely
/// at `floor · tol`.
pub const REL_FLOOR: f64 = 1e-4;

/// Backprop against numerical derivatives of the reference loss, coordinate
/// by coordinate over every trainable parameter.
///
/// Each derivative is Ridders' extrapolation of central differences with
/// steps `h0, h0/1.4, …`. Steps whose `±h` evaluations change the ReLU
/// pattern are skipped; a coordinate with no valid step counts as a kink.
#[allow(clippy::too_many_arguments)]
pub fn gradient_check(
    spec: &NetworkSpec,
    params: &NetParams,
    x: ArrayView2<f64>,
    targets: &OwnedTargets,
    loss: Loss,
    mode: Mode,
    mask_seed: u64,
    h0: f64,
) -> GradCheck {
    let mut rng = seed::rng(mask_seed);
    let (value, grads, _) =
        backprop(spec, params, x, targets.view(), loss, mode, Some(&mut rng)).expect("backprop");
    let (out, pattern) = reference_forward(spec, params, x, mode, mask_seed);
    let mut res = GradCheck {
        forward_gap: (reference_loss(loss, &out, targets) - value).abs(),
        ..Default::default()
    };
    let analytic = grads.into_flat();
    let mut probe = params.clone();
    for (k, block) in analytic.iter().enumerate() {
        for (i, &g) in block.iter().enumerate() {
            let orig = probe.slices_mut()[k][i];
            let mut central = |h: f64| {
                probe.slices_mut()[k][i] = orig + h;
                let (op, pp) = reference_forward(spec, &probe, x, mode, mask_seed);
                probe.slices_mut()[k][i] = orig - h;
                let (om, pm) = reference_forward(spec, &probe, x, mode, mask_seed);
                probe.slices_mut()[k][i] = orig;
                (pp == pattern && pm == pattern).then(|| {
                    (reference_loss(loss, &op, targets) - reference_loss(loss, &om, targets))
                        / (2.0 * h)
                })
            };
            match ridders(&mut central, h0) {
                Some(fd) => {
                    let rel = (g - fd).abs() / g.abs().max(fd.abs()).max(REL_FLOOR);
                    res.max_rel_err = res.max_rel_err.max(rel);
                    res.checked += 1;
                }
                None => res.kinks += 1,
            }
        }
    }
    res
}

/// Ridders' polynomial extrapolation of `central(h)` as `h → 0`, starting at
/// the first step (of 12) for which `central` is defined.
fn ridders(central: &mut dyn FnMut(f64) -> Option<f64>, h0: f64) -> Option<f64> {
    const CON: f64 = 1.4;
    const NTAB: usize = 10;
    let mut hh = h0;
    let mut first = None;
    for _ in 0..12 {
        if let Some(v) = central(hh) {
            first = Some(v);
            break;
        }
        hh /= CON;
    }
    let mut prev = vec![first?];
    let (mut best, mut err) = (prev[0], f64::INFINITY);
    for i in 1..NTAB {
        hh /= CON;
        let mut row = vec![central(hh)?];
        let mut fac = CON * CON;
        for j in 1..=i {
            let v = (row[j - 1] * fac - prev[j - 1]) / (fac - 1.0);
            fac *= CON * CON;
            let e = (v - row[j - 1]).abs().max((v - prev[j - 1]).abs());
            if e <= err {
                err = e;
                best = v;
            }
            row.push(v);
        }
        if (row[i] - prev[i - 1]).abs() >= 2.0 * err {
            break;
        }
        prev = row;
    }
    Some(best)
}

/// A random network with nontrivial shifts and batch-norm state.
pub fn random_net(rng: &mut dyn rand::RngCore) -> (NetworkSpec, NetParams) {
    let depth = rng.random_range(1..=3);
    let mut widths = vec![rng.random_range(1..=5)];
    widths.extend((0..depth).map(|_| rng.random_range(1..=8)));
    widths.push(rng.random_range(1..=3));
    let dropout = if rng.random_bool(0.3) { 0.3 } else { 0.0 };
    let spec = NetworkSpec::new(widths)
        .unwrap()
        .with_dropout(dropout)
        .unwrap()
        .with_batch_norm(rng.random_bool(0.5));
    let mut p = NetParams::init(&spec, rng);
    for v in p.shifts.iter_mut() {
        v.mapv_inplace(|_| rng.random_range(-0.3..0.3));
    }
    for bn in p.norms.iter_mut() {
        bn.gamma.mapv_inplace(|_| rng.random_range(0.5..1.5));
        bn.beta.mapv_inplace(|_| rng.random_range(-0.5..0.5));
        bn.running_mean.mapv_inplace(|_| rng.random_range(0.0..1.0));
        bn.running_var.mapv_inplace(|_| rng.random_range(0.5..2.0));
    }
    (spec, p)
}

/// `E_σ max_v (1/n) Σ (σ_i ξ_i v_i − C v_i²)` by plain enumeration of all
/// sign vectors, written without the library's incremental update.
pub fn naive_offset_expectation(set: &Array2<f64>, xi: &[f64], c: f64) -> f64 {
    let n = xi.len();
    let mut total = 0.0;
    for mask in 0u64..(1 << n) {
        let best = set
            .outer_iter()
            .map(|v| {
                (0..n)
                    .map(|i| {
                        let s = if mask >> i & 1 == 1 { 1.0 } else { -1.0 };
                        s * xi[i] * v[i] - c * v[i] * v[i]
                    })
                    .sum::<f64>()
                    / n as f64
            })
            .fold(f64::NEG_INFINITY, f64::max);
        total += best;
    }
    total / (1u64 << n) as f64
}

/// `sup_{v≠0} Σ v²ξ² / (2C Σ v²)`; 0 when every vector is zero.
pub fn naive_offset_m(set: &Array2<f64>, xi: &[f64], c: f64) -> f64 {
    set.outer_iter()
        .filter_map(|v| {
            let den: f64 = v.iter().map(|a| a * a).sum();
            (den > 0.0).then(|| {
                v.iter().zip(xi).map(|(a, x)| a * a * x * x).sum::<f64>() / (2.0 * c * den)
            })
        })
        .fold(0.0, f64::max)
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

pub fn housing_path() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("data/housing.csv")
}
