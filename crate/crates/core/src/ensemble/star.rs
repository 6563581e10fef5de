use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use super::train::{eval_loss_of, run_phase, FitSettings, NetFit, Phase, Trainable};
use super::{simplex_weights, BudgetCounter, ConvexAggregate};
use crate::data::Dataset;
use crate::nn::{
    backward, forward, loss_and_grad, update_running_stats, Loss, Mode, Network, NetworkSpec,
};
use crate::optim::Optimizer;
use crate::seed::{self, stream};
use crate::{Error, Result};

/// Starting point of the trainable block.
#[derive(Clone, Debug)]
pub enum BlockInit {
    Fresh(NetworkSpec),
    From(Network),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StarReport {
    pub warmup_epochs: usize,
    pub joint_epochs: usize,
    /// Largest `|Σλ − 1|` seen after any joint-phase step.
    pub max_simplex_deviation: f64,
    pub final_weights: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct StarOutcome {
    pub aggregate: ConvexAggregate,
    pub budget: BudgetCounter,
    pub report: StarReport,
    pub final_train_loss: f64,
}

/// Joint phase: the block and the logits, with frozen outputs precomputed on
/// the training rows.
struct StarFit<'a> {
    frozen_out: &'a [Array2<f64>],
    block: Network,
    logits: Vec<f64>,
    max_dev: f64,
}

impl Trainable for StarFit<'_> {
    fn batch_grads(
        &mut self,
        data: &Dataset,
        idx: &[usize],
        loss: Loss,
        rng: &mut dyn rand::RngCore,
    ) -> Result<(f64, Vec<Vec<f64>>)> {
        let x = data.x.select(Axis(0), idx);
        let y = data.y.select(idx);
        let (out, cache) = forward(
            &self.block.spec,
            &self.block.params,
            x.view(),
            Mode::Train,
            Some(rng),
        )?;
        let lambda = simplex_weights(&self.logits);
        let d = self.frozen_out.len();
        let frozen: Vec<Array2<f64>> = self
            .frozen_out
            .iter()
            .map(|f| f.select(Axis(0), idx))
            .collect();
        let mut agg = &out * lambda[d];
        for (f, &l) in frozen.iter().zip(&lambda) {
            agg.scaled_add(l, f);
        }
        let (value, d_agg) = loss_and_grad(loss, &agg, y.as_targets())?;
        let d_block = &d_agg * lambda[d];
        let grads = backward(&self.block.params, &cache, d_block.view());
        update_running_stats(&mut self.block.params, &cache);

        let g: Vec<f64> = frozen
            .iter()
            .chain(std::iter::once(&out))
            .map(|m| (&d_agg * m).sum())
            .collect();
        let mean_g: f64 = lambda.iter().zip(&g).map(|(l, gi)| l * gi).sum();
        let d_logits: Vec<f64> = lambda
            .iter()
            .zip(&g)
            .map(|(l, gi)| l * (gi - mean_g))
            .collect();

        let mut flat = grads.into_flat();
        flat.push(d_logits);
        Ok((value, flat))
    }

    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut s = self.block.params.slices_mut();
        s.push(&mut self.logits);
        s
    }

    fn after_step(&mut self) {
        let sum: f64 = simplex_weights(&self.logits).iter().sum();
        self.max_dev = self.max_dev.max((sum - 1.0).abs());
    }
}

/// Train a new block against `d` frozen members and combine all `d+1`.
///
/// The first `⌊warmup_fraction·epochs⌋` epochs train the block alone on the
/// task loss; the remaining epochs train block and logits jointly with a
/// fresh optimizer. Logits start at zero. Frozen members are evaluated in
/// eval mode and never modified.
#[allow(clippy::too_many_arguments)]
pub fn star_d_train(
    frozen: &[Network],
    block: BlockInit,
    data: &Dataset,
    epochs: usize,
    warmup_fraction: f64,
    lr: f64,
    settings: &FitSettings,
    seed: u64,
) -> Result<StarOutcome> {
    if frozen.is_empty() {
        return Err(Error::InvalidArgument(
            "star training needs d >= 1 frozen members".into(),
        ));
    }
    if epochs == 0 {
        return Err(Error::InvalidArgument(
            "star training needs at least one epoch".into(),
        ));
    }
    if !(0.0..1.0).contains(&warmup_fraction) {
        return Err(Error::InvalidArgument(format!(
            "warm-up fraction {warmup_fraction} outside [0, 1)"
        )));
    }
    let block = match block {
        BlockInit::Fresh(spec) => {
            Network::init(spec, &mut seed::rng(seed::child(seed, stream::INIT)))
        }
        BlockInit::From(net) => net,
    };
    let width = block.spec.output_dim();
    if frozen.iter().any(|m| m.spec.output_dim() != width) {
        return Err(Error::Shape(
            "frozen members and block disagree on output width".into(),
        ));
    }
    let frozen_out: Vec<Array2<f64>> = frozen
        .iter()
        .map(|m| m.predict(data.x.view()))
        .collect::<Result<_>>()?;

    let warmup_epochs = (warmup_fraction * epochs as f64).floor() as usize;
    let joint_epochs = epochs - warmup_epochs;
    let mut budget = BudgetCounter::default();

    let mut warm = NetFit { net: block };
    if warmup_epochs > 0 {
        let lrs = vec![lr; warmup_epochs];
        let phase = Phase {
            lrs: &lrs,
            settings,
            seed,
            first_epoch: 0,
        };
        let mut opt = Optimizer::new(settings.optimizer);
        run_phase(
            &mut warm,
            data,
            &mut opt,
            &phase,
            &mut budget,
            |_, _| Ok(()),
        )?;
    }

    let mut fit = StarFit {
        frozen_out: &frozen_out,
        block: warm.net,
        logits: vec![0.0; frozen.len() + 1],
        max_dev: 0.0,
    };
    fit.after_step();
    let lrs = vec![lr; joint_epochs];
    let phase = Phase {
        lrs: &lrs,
        settings,
        seed,
        first_epoch: warmup_epochs,
    };
    let mut opt = Optimizer::new(settings.optimizer);
    run_phase(&mut fit, data, &mut opt, &phase, &mut budget, |_, _| Ok(()))?;

    let mut members = frozen.to_vec();
    members.push(fit.block);
    let mut flags = vec![true; frozen.len()];
    flags.push(false);
    let aggregate = ConvexAggregate::new(members, flags, fit.logits)?;
    let final_train_loss = eval_loss_of(
        &super::Predictor::Star {
            aggregate: aggregate.clone(),
        },
        data,
        settings.loss,
    )?;
    let report = StarReport {
        warmup_epochs,
        joint_epochs,
        max_simplex_deviation: fit.max_dev,
        final_weights: aggregate.weights(),
    };
    Ok(StarOutcome {
        aggregate,
        budget,
        report,
        final_train_loss,
    })
}
