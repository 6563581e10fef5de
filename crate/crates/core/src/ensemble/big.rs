use ndarray::{Array2, Axis};

use super::train::{run_phase, FitSettings, Phase, Trainable};
use super::{BigNet, BudgetCounter};
use crate::data::Dataset;
use crate::nn::{
    backward, forward, loss_and_grad, update_running_stats, Loss, Mode, Network, NetworkSpec,
};
use crate::optim::Optimizer;
use crate::seed::{self, stream};
use crate::{Error, Result};

impl Trainable for BigNet {
    fn batch_grads(
        &mut self,
        data: &Dataset,
        idx: &[usize],
        loss: Loss,
        rng: &mut dyn rand::RngCore,
    ) -> Result<(f64, Vec<Vec<f64>>)> {
        let x = data.x.select(Axis(0), idx);
        let y = data.y.select(idx);
        let mut outs = Vec::with_capacity(self.blocks.len());
        let mut caches = Vec::with_capacity(self.blocks.len());
        for b in &self.blocks {
            let (out, cache) = forward(&b.spec, &b.params, x.view(), Mode::Train, Some(&mut *rng))?;
            outs.push(out);
            caches.push(cache);
        }
        let mut agg = Array2::zeros(outs[0].dim());
        for (o, &w) in outs.iter().zip(&self.combine) {
            agg.scaled_add(w, o);
        }
        let (value, d_agg) = loss_and_grad(loss, &agg, y.as_targets())?;
        let mut flat = Vec::new();
        for ((b, cache), &w) in self.blocks.iter_mut().zip(&caches).zip(&self.combine) {
            let g = backward(&b.params, cache, (&d_agg * w).view());
            update_running_stats(&mut b.params, cache);
            flat.extend(g.into_flat());
        }
        flat.push(outs.iter().map(|o| (&d_agg * o).sum()).collect());
        Ok((value, flat))
    }

    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut s: Vec<&mut [f64]> = self
            .blocks
            .iter_mut()
            .flat_map(|b| b.params.slices_mut())
            .collect();
        s.push(&mut self.combine);
        s
    }
}

/// `k` blocks plus scalar combining weights (initialised to `1/k`), all
/// trained together for `epochs` at a constant learning rate.
pub(crate) fn train_big_nn(
    spec: &NetworkSpec,
    k: usize,
    data: &Dataset,
    epochs: usize,
    lr: f64,
    settings: &FitSettings,
    seed: u64,
) -> Result<(BigNet, BudgetCounter, f64)> {
    if k == 0 {
        return Err(Error::InvalidArgument("need at least one block".into()));
    }
    let blocks = (0..k)
        .map(|i| {
            let s = seed::derive(seed, &[stream::BLOCKS, i as u64]);
            Network::init(spec.clone(), &mut seed::rng(s))
        })
        .collect();
    let mut model = BigNet {
        blocks,
        combine: vec![1.0 / k as f64; k],
    };
    let lrs = vec![lr; epochs];
    let phase = Phase {
        lrs: &lrs,
        settings,
        seed,
        first_epoch: 0,
    };
    let mut budget = BudgetCounter::default();
    let mut opt = Optimizer::new(settings.optimizer);
    run_phase(&mut model, data, &mut opt, &phase, &mut budget, |_, _| {
        Ok(())
    })?;
    let out = model.predict(data.x.view())?;
    let (train_loss, _) = loss_and_grad(settings.loss, &out, data.y.as_targets())?;
    Ok((model, budget, train_loss))
}
