//! Dense feedforward ReLU networks with shifted activations.
//!
//! A network with architecture `(L, p)` computes
//! `W_L σ_{v_L} W_{L-1} … W_1 σ_{v_1} W_0 x`, where `σ_v(z) = max(z − v, 0)`
//! elementwise. Hidden layers may additionally apply batch normalisation and
//! inverted dropout after the activation; with both disabled the network is
//! exactly a member of the bounded sparse class used by [`crate::theory`].

mod class;
mod forward;
mod params;

pub use class::{
    max_entry_norm, project_to_class, sample_sparse_network, sparsity_count, sparsity_report,
    sup_norm_bound, v_constant, SparsityReport,
};
pub use forward::{
    backprop, backward, forward, loss_and_grad, mlp_forward, predict, update_running_stats,
    ForwardCache, Loss, Targets,
};
pub use params::{BatchNorm, Grads, NetParams};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Momentum of the batch-norm running statistics.
pub const BN_MOMENTUM: f64 = 0.1;
/// Added to variances before normalising.
pub const BN_EPS: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Train,
    Eval,
}

/// Architecture `(L, p)` plus the regularisers applied between hidden layers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    /// `p_0, …, p_{L+1}`.
    pub widths: Vec<usize>,
    pub dropout: f64,
    pub batch_norm: bool,
}

impl NetworkSpec {
    pub fn new(widths: Vec<usize>) -> Result<Self> {
        let spec = NetworkSpec {
            widths,
            dropout: 0.0,
            batch_norm: false,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_dropout(mut self, p: f64) -> Result<Self> {
        self.dropout = p;
        self.validate()?;
        Ok(self)
    }

    pub fn with_batch_norm(mut self, on: bool) -> Self {
        self.batch_norm = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths.len() < 2 {
            return Err(Error::InvalidArgument(format!(
                "width vector needs at least input and output entries, got {:?}",
                self.widths
            )));
        }
        if self.widths.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "all widths must be >= 1, got {:?}",
                self.widths
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidArgument(format!(
                "dropout probability must lie in [0, 1), got {}",
                self.dropout
            )));
        }
        Ok(())
    }

    /// Number of hidden layers `L`.
    pub fn depth(&self) -> usize {
        self.widths.len() - 2
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().expect("validated spec")
    }

    /// Weight and shift entries, the parameters counted by the sparsity `s`.
    pub fn param_count(&self) -> usize {
        let weights: usize = self.widths.windows(2).map(|w| w[0] * w[1]).sum();
        let shifts: usize = self.widths[1..self.widths.len() - 1].iter().sum();
        weights + shifts
    }
}

/// A network architecture together with its parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub spec: NetworkSpec,
    pub params: NetParams,
}

impl Network {
    pub fn new(spec: NetworkSpec, params: NetParams) -> Result<Self> {
        params.check(&spec)?;
        Ok(Network { spec, params })
    }

    /// Fresh network with the default uniform initialisation.
    pub fn init(spec: NetworkSpec, rng: &mut dyn rand::RngCore) -> Self {
        let params = NetParams::init(&spec, rng);
        Network { spec, params }
    }

    /// Eval-mode batch prediction, one output row per input row.
    pub fn predict(&self, x: ndarray::ArrayView2<f64>) -> Result<ndarray::Array2<f64>> {
        predict(&self.spec, &self.params, x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_validation() {
        assert!(NetworkSpec::new(vec![3]).is_err());
        assert!(NetworkSpec::new(vec![3, 0, 1]).is_err());
        assert!(NetworkSpec::new(vec![3, 1])
            .unwrap()
            .with_dropout(1.0)
            .is_err());
        let s = NetworkSpec::new(vec![1, 2, 1]).unwrap();
        assert_eq!(s.depth(), 1);
        // W0: 2, W1: 2, v1: 2
        assert_eq!(s.param_count(), 6);
    }
}
