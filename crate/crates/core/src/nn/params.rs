use ndarray::{Array1, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::NetworkSpec;
use crate::{Error, Result};

/// Per-layer batch normalisation: learnable affine map plus running statistics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchNorm {
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
    pub running_mean: Array1<f64>,
    pub running_var: Array1<f64>,
}

impl BatchNorm {
    pub fn new(width: usize) -> Self {
        BatchNorm {
            gamma: Array1::ones(width),
            beta: Array1::zeros(width),
            running_mean: Array1::zeros(width),
            running_var: Array1::ones(width),
        }
    }
}

/// Weights `W_0..W_L` (`W_j` is `p_{j+1} × p_j`), shifts `v_1..v_L`, and
/// batch-norm state for each hidden layer when enabled.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetParams {
    pub weights: Vec<Array2<f64>>,
    /// `shifts[j - 1]` is `v_j`, of length `p_j`.
    pub shifts: Vec<Array1<f64>>,
    /// Empty when batch norm is disabled, otherwise one entry per hidden layer.
    pub norms: Vec<BatchNorm>,
}

impl NetParams {
    pub fn zeros(spec: &NetworkSpec) -> Self {
        let p = &spec.widths;
        let weights = p.windows(2).map(|w| Array2::zeros((w[1], w[0]))).collect();
        let shifts = p[1..p.len() - 1]
            .iter()
            .map(|&w| Array1::zeros(w))
            .collect();
        let norms = if spec.batch_norm {
            p[1..p.len() - 1]
                .iter()
                .map(|&w| BatchNorm::new(w))
                .collect()
        } else {
            Vec::new()
        };
        NetParams {
            weights,
            shifts,
            norms,
        }
    }

    /// Uniform `±1/sqrt(fan_in)` initialisation for weights and shifts.
    pub fn init(spec: &NetworkSpec, rng: &mut dyn rand::RngCore) -> Self {
        let mut params = Self::zeros(spec);
        for w in params.weights.iter_mut() {
            let bound = 1.0 / (w.ncols() as f64).sqrt();
            w.mapv_inplace(|_| rng.random_range(-bound..bound));
        }
        for (j, v) in params.shifts.iter_mut().enumerate() {
            let bound = 1.0 / (spec.widths[j] as f64).sqrt();
            v.mapv_inplace(|_| rng.random_range(-bound..bound));
        }
        params
    }

    pub fn check(&self, spec: &NetworkSpec) -> Result<()> {
        let p = &spec.widths;
        let l = spec.depth();
        if self.weights.len() != l + 1 || self.shifts.len() != l {
            return Err(Error::Shape(format!(
                "expected {} weight matrices and {} shift vectors, got {} and {}",
                l + 1,
                l,
                self.weights.len(),
                self.shifts.len()
            )));
        }
        for (j, w) in self.weights.iter().enumerate() {
            if w.dim() != (p[j + 1], p[j]) {
                return Err(Error::Shape(format!(
                    "W_{j} has shape {:?}, expected {:?}",
                    w.dim(),
                    (p[j + 1], p[j])
                )));
            }
        }
        for (j, v) in self.shifts.iter().enumerate() {
            if v.len() != p[j + 1] {
                return Err(Error::Shape(format!(
                    "v_{} has length {}, expected {}",
                    j + 1,
                    v.len(),
                    p[j + 1]
                )));
            }
        }
        let expected_norms = if spec.batch_norm { l } else { 0 };
        if self.norms.len() != expected_norms {
            return Err(Error::Shape(format!(
                "expected {expected_norms} batch-norm layers, got {}",
                self.norms.len()
            )));
        }
        for (j, bn) in self.norms.iter().enumerate() {
            let w = p[j + 1];
            if [&bn.gamma, &bn.beta, &bn.running_mean, &bn.running_var]
                .iter()
                .any(|a| a.len() != w)
            {
                return Err(Error::Shape(format!("batch norm {j} is not of width {w}")));
            }
        }
        if !self.all_finite() {
            return Err(Error::Numeric(
                "parameters contain non-finite entries".into(),
            ));
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.weights.iter().all(|w| w.iter().all(|x| x.is_finite()))
            && self.shifts.iter().all(|v| v.iter().all(|x| x.is_finite()))
            && self.norms.iter().all(|bn| {
                bn.gamma
                    .iter()
                    .chain(bn.beta.iter())
                    .chain(bn.running_mean.iter())
                    .chain(bn.running_var.iter())
                    .all(|x| x.is_finite())
            })
    }

    /// Trainable parameters in a fixed order: weights, shifts, BN gammas, BN betas.
    pub fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for w in self.weights.iter_mut() {
            out.push(w.as_slice_mut().expect("standard layout"));
        }
        for v in self.shifts.iter_mut() {
            out.push(v.as_slice_mut().expect("standard layout"));
        }
        let (gammas, betas): (Vec<_>, Vec<_>) = self
            .norms
            .iter_mut()
            .map(|bn| (&mut bn.gamma, &mut bn.beta))
            .unzip();
        for g in gammas {
            out.push(g.as_slice_mut().expect("standard layout"));
        }
        for b in betas {
            out.push(b.as_slice_mut().expect("standard layout"));
        }
        out
    }

    /// Copy of the trainable parameters in [`NetParams::slices_mut`] order.
    pub fn flat(&self) -> Vec<f64> {
        let mut c = self.clone();
        c.slices_mut()
            .into_iter()
            .flat_map(|s| s.to_vec())
            .collect()
    }
}

/// Gradients with the same layout as the trainable part of [`NetParams`].
#[derive(Clone, Debug, PartialEq)]
pub struct Grads {
    pub weights: Vec<Array2<f64>>,
    pub shifts: Vec<Array1<f64>>,
    pub gamma: Vec<Array1<f64>>,
    pub beta: Vec<Array1<f64>>,
}

impl Grads {
    /// Flattened in [`NetParams::slices_mut`] order.
    pub fn into_flat(self) -> Vec<Vec<f64>> {
        let mut out = Vec::new();
        // Logical row-major order: `dot` may return column-major arrays.
        out.extend(
            self.weights
                .into_iter()
                .map(|w| w.iter().copied().collect()),
        );
        out.extend(self.shifts.into_iter().map(|v| v.to_vec()));
        out.extend(self.gamma.into_iter().map(|v| v.to_vec()));
        out.extend(self.beta.into_iter().map(|v| v.to_vec()));
        out
    }

    pub fn scale(&mut self, k: f64) {
        for w in self.weights.iter_mut() {
            *w *= k;
        }
        for v in self
            .shifts
            .iter_mut()
            .chain(self.gamma.iter_mut())
            .chain(self.beta.iter_mut())
        {
            *v *= k;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.weights
            .iter()
            .flat_map(|w| w.iter())
            .chain(self.shifts.iter().flat_map(|v| v.iter()))
            .chain(self.gamma.iter().flat_map(|v| v.iter()))
            .chain(self.beta.iter().flat_map(|v| v.iter()))
            .fold(0.0f64, |m, x| m.max(x.abs()))
    }
}
