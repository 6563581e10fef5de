//! The convex star aggregate, snapshot training and the experiment variants.
//!
//! A star fit freezes `d` trained members and trains one new block together
//! with a convex combining layer. The combining weights are `softmax(w)` of a
//! logit vector `w`, so they stay on the simplex without projection.

mod aggregate;
mod big;
mod star;
mod train;
mod variants;

pub use aggregate::{
    aggregate_forward, BigNet, ConvexAggregate, Predictor, PREDICTOR_FORMAT_VERSION,
};
pub use star::{star_d_train, BlockInit, StarOutcome, StarReport};
pub use train::{
    snapshot_run, snapshot_train, train_erm, train_from, Cycle, FitSettings, SnapshotOutcome,
    TrainedNet,
};
pub use variants::{budget_of, run_variant, SnapBudget, TrainPlan, Variant, VariantOutcome};

use serde::{Deserialize, Serialize};

/// Training cost actually spent.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BudgetCounter {
    /// Passes over the training set, counted once per trained model.
    pub epochs_consumed: usize,
    pub gradient_steps: usize,
}

impl BudgetCounter {
    pub fn absorb(&mut self, other: BudgetCounter) {
        self.epochs_consumed += other.epochs_consumed;
        self.gradient_steps += other.gradient_steps;
    }
}

/// Softmax with max-subtraction.
pub fn simplex_weights(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|&w| (w - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}
