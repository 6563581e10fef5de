use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;

use super::{Grads, Mode, NetParams, NetworkSpec, BN_EPS, BN_MOMENTUM};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Loss {
    /// Mean over the batch of the summed squared error.
    Squared,
    /// Mean over the batch of `-ln softmax(out)[label]`.
    CrossEntropy,
}

/// Targets of one batch, aligned with the rows of the network output.
#[derive(Clone, Copy, Debug)]
pub enum Targets<'a> {
    Real(ArrayView2<'a, f64>),
    Class(&'a [usize]),
}

#[derive(Clone, Debug)]
struct BnCache {
    xhat: Array2<f64>,
    inv_std: Array1<f64>,
    mean: Array1<f64>,
    var: Array1<f64>,
}

#[derive(Clone, Debug)]
struct HiddenCache {
    shifted: Array2<f64>,
    bn: Option<BnCache>,
    mask: Option<Array2<f64>>,
    out: Array2<f64>,
}

/// Intermediate values of one forward pass, consumed by [`backward`].
#[derive(Clone, Debug)]
pub struct ForwardCache {
    mode: Mode,
    input: Array2<f64>,
    hidden: Vec<HiddenCache>,
}

impl ForwardCache {
    pub fn batch_len(&self) -> usize {
        self.input.nrows()
    }
}

/// Batched forward pass. Rows of `x` are samples.
///
/// In train mode batch norm uses batch statistics and dropout draws a fresh
/// mask from `rng`, scaling retained units by `1/(1-p)`. In eval mode dropout
/// is the identity and batch norm uses the running statistics.
pub fn forward(
    spec: &NetworkSpec,
    params: &NetParams,
    x: ArrayView2<f64>,
    mode: Mode,
    mut rng: Option<&mut dyn rand::RngCore>,
) -> Result<(Array2<f64>, ForwardCache)> {
    if x.ncols() != spec.input_dim() {
        return Err(Error::Shape(format!(
            "input has {} features, network expects {}",
            x.ncols(),
            spec.input_dim()
        )));
    }
    let dropout = mode == Mode::Train && spec.dropout > 0.0;
    if dropout && rng.is_none() {
        return Err(Error::InvalidArgument(
            "train-mode dropout needs a random generator".into(),
        ));
    }
    let b = x.nrows();
    let mut h = x.dot(&params.weights[0].t());
    let mut hidden = Vec::with_capacity(spec.depth());
    for j in 1..=spec.depth() {
        let shifted = &h - &params.shifts[j - 1];
        let mut a = shifted.mapv(|z| z.max(0.0));
        let bn = if spec.batch_norm {
            let norm = &params.norms[j - 1];
            let (mean, var) = match mode {
                Mode::Train => {
                    let mean = a.mean_axis(Axis(0)).expect("non-empty batch");
                    let var = a.var_axis(Axis(0), 0.0);
                    (mean, var)
                }
                Mode::Eval => (norm.running_mean.clone(), norm.running_var.clone()),
            };
            let inv_std = var.mapv(|v| 1.0 / (v + BN_EPS).sqrt());
            let xhat = (&a - &mean) * &inv_std;
            a = &xhat * &norm.gamma + &norm.beta;
            Some(BnCache {
                xhat,
                inv_std,
                mean,
                var,
            })
        } else {
            None
        };
        let mask = if dropout {
            let r = rng.as_mut().expect("checked above");
            let keep = 1.0 / (1.0 - spec.dropout);
            let p = spec.dropout;
            let m =
                Array2::from_shape_fn(a.dim(), |_| if r.random::<f64>() < p { 0.0 } else { keep });
            a *= &m;
            Some(m)
        } else {
            None
        };
        let next = a.dot(&params.weights[j].t());
        hidden.push(HiddenCache {
            shifted,
            bn,
            mask,
            out: a,
        });
        h = next;
    }
    debug_assert_eq!(h.nrows(), b);
    Ok((
        h,
        ForwardCache {
            mode,
            input: x.to_owned(),
            hidden,
        },
    ))
}

/// Gradients of a scalar objective given its gradient `d_out` w.r.t. the
/// network output of the pass recorded in `cache`.
pub fn backward(params: &NetParams, cache: &ForwardCache, d_out: ArrayView2<f64>) -> Grads {
    let depth = cache.hidden.len();
    let mut d_weights = vec![Array2::zeros((0, 0)); depth + 1];
    let mut d_shifts = vec![Array1::zeros(0); depth];
    let mut d_gamma = Vec::new();
    let mut d_beta = Vec::new();
    let with_bn = !params.norms.is_empty();
    if with_bn {
        d_gamma = vec![Array1::zeros(0); depth];
        d_beta = vec![Array1::zeros(0); depth];
    }

    let mut dz = d_out.to_owned();
    for j in (0..=depth).rev() {
        let input = if j == 0 {
            &cache.input
        } else {
            &cache.hidden[j - 1].out
        };
        d_weights[j] = dz.t().dot(input);
        if j == 0 {
            break;
        }
        let hc = &cache.hidden[j - 1];
        let mut dh = dz.dot(&params.weights[j]);
        if let Some(mask) = &hc.mask {
            dh *= mask;
        }
        if let Some(bn) = &hc.bn {
            let norm = &params.norms[j - 1];
            d_gamma[j - 1] = (&dh * &bn.xhat).sum_axis(Axis(0));
            d_beta[j - 1] = dh.sum_axis(Axis(0));
            let dxhat = &dh * &norm.gamma;
            dh = match cache.mode {
                Mode::Eval => dxhat * &bn.inv_std,
                Mode::Train => {
                    let b = dh.nrows() as f64;
                    let sum_dxhat = dxhat.sum_axis(Axis(0));
                    let sum_dxhat_xhat = (&dxhat * &bn.xhat).sum_axis(Axis(0));
                    let mut da = dxhat * b - &sum_dxhat - &(&bn.xhat * &sum_dxhat_xhat);
                    da *= &(&bn.inv_std / b);
                    da
                }
            };
        }
        Zip::from(&mut dh).and(&hc.shifted).for_each(|g, &s| {
            if s <= 0.0 {
                *g = 0.0;
            }
        });
        d_shifts[j - 1] = -dh.sum_axis(Axis(0));
        dz = dh;
    }
    Grads {
        weights: d_weights,
        shifts: d_shifts,
        gamma: d_gamma,
        beta: d_beta,
    }
}

/// Fold the batch statistics of a train-mode pass into the running statistics.
pub fn update_running_stats(params: &mut NetParams, cache: &ForwardCache) {
    if cache.mode != Mode::Train {
        return;
    }
    let b = cache.batch_len() as f64;
    let unbias = if b > 1.0 { b / (b - 1.0) } else { 1.0 };
    for (norm, hc) in params.norms.iter_mut().zip(&cache.hidden) {
        if let Some(bn) = &hc.bn {
            norm.running_mean = &norm.running_mean * (1.0 - BN_MOMENTUM) + &bn.mean * BN_MOMENTUM;
            norm.running_var =
                &norm.running_var * (1.0 - BN_MOMENTUM) + &bn.var * (BN_MOMENTUM * unbias);
        }
    }
}

/// Mean batch loss and its gradient w.r.t. the outputs.
///
/// A non-finite per-sample loss is reported with the row index of the first
/// offending sample.
pub fn loss_and_grad(
    loss: Loss,
    out: &Array2<f64>,
    targets: Targets,
) -> Result<(f64, Array2<f64>)> {
    let b = out.nrows();
    if b == 0 {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let bf = b as f64;
    match (loss, targets) {
        (Loss::Squared, Targets::Real(y)) => {
            if y.dim() != out.dim() {
                return Err(Error::Shape(format!(
                    "targets {:?} do not match outputs {:?}",
                    y.dim(),
                    out.dim()
                )));
            }
            let resid = out - &y;
            let mut total = 0.0;
            for (i, row) in resid.outer_iter().enumerate() {
                let l: f64 = row.iter().map(|r| r * r).sum();
                if !l.is_finite() {
                    return Err(Error::Numeric(format!(
                        "loss is not finite at batch row {i}"
                    )));
                }
                total += l;
            }
            Ok((total / bf, resid * (2.0 / bf)))
        }
        (Loss::CrossEntropy, Targets::Class(labels)) => {
            if labels.len() != b {
                return Err(Error::Shape(format!(
                    "{} labels for {} outputs",
                    labels.len(),
                    b
                )));
            }
            let k = out.ncols();
            let mut grad = Array2::zeros(out.dim());
            let mut total = 0.0;
            for (i, (row, &label)) in out.outer_iter().zip(labels).enumerate() {
                if label >= k {
                    return Err(Error::InvalidArgument(format!(
                        "label {label} out of range for {k} classes"
                    )));
                }
                let m = row.fold(f64::NEG_INFINITY, |a, &x| a.max(x));
                let sum: f64 = row.iter().map(|&x| (x - m).exp()).sum();
                let log_z = m + sum.ln();
                let l = log_z - row[label];
                if !l.is_finite() {
                    return Err(Error::Numeric(format!(
                        "loss is not finite at batch row {i}"
                    )));
                }
                total += l;
                for c in 0..k {
                    let p = (row[c] - log_z).exp();
                    grad[[i, c]] = (p - if c == label { 1.0 } else { 0.0 }) / bf;
                }
            }
            Ok((total / bf, grad))
        }
        (Loss::Squared, Targets::Class(_)) => Err(Error::InvalidArgument(
            "squared loss needs real-valued targets".into(),
        )),
        (Loss::CrossEntropy, Targets::Real(_)) => Err(Error::InvalidArgument(
            "cross entropy needs class-index targets".into(),
        )),
    }
}

/// Loss and parameter gradients of one batch.
pub fn backprop(
    spec: &NetworkSpec,
    params: &NetParams,
    x: ArrayView2<f64>,
    targets: Targets,
    loss: Loss,
    mode: Mode,
    rng: Option<&mut dyn rand::RngCore>,
) -> Result<(f64, Grads, ForwardCache)> {
    if x.nrows() == 0 {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let (out, cache) = forward(spec, params, x, mode, rng)?;
    let (value, d_out) = loss_and_grad(loss, &out, targets)?;
    let grads = backward(params, &cache, d_out.view());
    Ok((value, grads, cache))
}

/// Single-sample forward evaluation.
pub fn mlp_forward(
    spec: &NetworkSpec,
    params: &NetParams,
    x: &[f64],
    mode: Mode,
    rng: Option<&mut dyn rand::RngCore>,
) -> Result<Vec<f64>> {
    let xv = ArrayView2::from_shape((1, x.len()), x).expect("contiguous row");
    let (out, _) = forward(spec, params, xv, mode, rng)?;
    Ok(out.iter().copied().collect())
}

/// Eval-mode batch forward.
pub fn predict(spec: &NetworkSpec, params: &NetParams, x: ArrayView2<f64>) -> Result<Array2<f64>> {
    forward(spec, params, x, Mode::Eval, None).map(|(out, _)| out)
}
