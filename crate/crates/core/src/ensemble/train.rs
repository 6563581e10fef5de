use ndarray::Axis;
use serde::{Deserialize, Serialize};

use super::BudgetCounter;
use crate::data::{batches, Dataset};
use crate::nn::{backprop, predict, update_running_stats, Loss, Mode, Network, NetworkSpec};
use crate::optim::{schedule_lr, LrSchedule, Optimizer, OptimizerKind};
use crate::seed::{self, stream};
use crate::{Error, Result};

/// Optimizer, batch size and loss shared by every phase of a training run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitSettings {
    pub optimizer: OptimizerKind,
    pub batch_size: usize,
    pub loss: Loss,
}

/// Something the mini-batch loop can optimise.
pub(crate) trait Trainable {
    /// Mean loss over rows `idx` of `data` and gradients in `slices_mut` order.
    /// Train-mode side effects (running statistics) happen here.
    fn batch_grads(
        &mut self,
        data: &Dataset,
        idx: &[usize],
        loss: Loss,
        rng: &mut dyn rand::RngCore,
    ) -> Result<(f64, Vec<Vec<f64>>)>;

    fn slices_mut(&mut self) -> Vec<&mut [f64]>;

    /// Called after every optimizer step.
    fn after_step(&mut self) {}
}

pub(crate) struct NetFit {
    pub net: Network,
}

impl Trainable for NetFit {
    fn batch_grads(
        &mut self,
        data: &Dataset,
        idx: &[usize],
        loss: Loss,
        rng: &mut dyn rand::RngCore,
    ) -> Result<(f64, Vec<Vec<f64>>)> {
        let x = data.x.select(Axis(0), idx);
        let y = data.y.select(idx);
        let (value, grads, cache) = backprop(
            &self.net.spec,
            &self.net.params,
            x.view(),
            y.as_targets(),
            loss,
            Mode::Train,
            Some(rng),
        )?;
        update_running_stats(&mut self.net.params, &cache);
        Ok((value, grads.into_flat()))
    }

    fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.net.params.slices_mut()
    }
}

/// One stretch of epochs driven by a per-epoch learning-rate table.
pub(crate) struct Phase<'a> {
    pub lrs: &'a [f64],
    pub settings: &'a FitSettings,
    /// Seed of the run; batch order is keyed by `(seed, first_epoch + e)`.
    pub seed: u64,
    /// Absolute index of the first epoch of this phase within the run.
    pub first_epoch: usize,
}

/// Mini-batch training over `phase.lrs.len()` epochs. `on_epoch` sees the
/// 1-based epoch number within the phase after each epoch.
pub(crate) fn run_phase<T: Trainable>(
    model: &mut T,
    data: &Dataset,
    opt: &mut Optimizer,
    phase: &Phase,
    budget: &mut BudgetCounter,
    mut on_epoch: impl FnMut(usize, &T) -> Result<()>,
) -> Result<()> {
    if data.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot train on an empty dataset".into(),
        ));
    }
    let mut dropout_rng = seed::rng(seed::derive(
        phase.seed,
        &[stream::DROPOUT, phase.first_epoch as u64],
    ));
    let batch_seed = seed::child(phase.seed, stream::BATCHES);
    for (e, &lr) in phase.lrs.iter().enumerate() {
        let epoch = phase.first_epoch + e;
        let order = batches(data.len(), phase.settings.batch_size, batch_seed, epoch)?;
        for (b, idx) in order.iter().enumerate() {
            let located = |err: Error| match err {
                Error::Numeric(m) => {
                    Error::Numeric(format!("epoch {}, batch {}: {m}", epoch + 1, b + 1))
                }
                other => other,
            };
            let (_, grads) = model
                .batch_grads(data, idx, phase.settings.loss, &mut dropout_rng)
                .map_err(located)?;
            opt.step(&mut model.slices_mut(), &grads, lr)
                .map_err(located)?;
            model.after_step();
            budget.gradient_steps += 1;
        }
        budget.epochs_consumed += 1;
        on_epoch(e + 1, model)?;
    }
    Ok(())
}

/// A trained network with its cost and final eval-mode training loss.
#[derive(Clone, Debug)]
pub struct TrainedNet {
    pub net: Network,
    pub budget: BudgetCounter,
    pub final_train_loss: f64,
}

pub(crate) fn eval_loss(net: &Network, data: &Dataset, loss: Loss) -> Result<f64> {
    let out = predict(&net.spec, &net.params, data.x.view())?;
    crate::nn::loss_and_grad(loss, &out, data.y.as_targets()).map(|(l, _)| l)
}

pub(crate) fn eval_loss_of(p: &super::Predictor, data: &Dataset, loss: Loss) -> Result<f64> {
    let out = p.predict(data.x.view())?;
    crate::nn::loss_and_grad(loss, &out, data.y.as_targets()).map(|(l, _)| l)
}

fn lr_table(schedule: &LrSchedule) -> Result<Vec<f64>> {
    (1..=schedule.total_epochs())
        .map(|e| schedule_lr(schedule, e))
        .collect()
}

/// Mini-batch ERM training of a freshly initialised network.
///
/// The run length is `schedule.total_epochs()`. Initialisation, batch order
/// and dropout masks are all derived from `seed`.
pub fn train_erm(
    spec: &NetworkSpec,
    data: &Dataset,
    schedule: &LrSchedule,
    settings: &FitSettings,
    seed: u64,
) -> Result<TrainedNet> {
    let net = Network::init(
        spec.clone(),
        &mut seed::rng(seed::child(seed, stream::INIT)),
    );
    train_from(net, data, schedule, settings, seed)
}

/// ERM training starting from the given parameters.
pub fn train_from(
    net: Network,
    data: &Dataset,
    schedule: &LrSchedule,
    settings: &FitSettings,
    seed: u64,
) -> Result<TrainedNet> {
    let lrs = lr_table(schedule)?;
    let mut model = NetFit { net };
    let mut opt = Optimizer::new(settings.optimizer);
    let mut budget = BudgetCounter::default();
    let phase = Phase {
        lrs: &lrs,
        settings,
        seed,
        first_epoch: 0,
    };
    run_phase(&mut model, data, &mut opt, &phase, &mut budget, |_, _| {
        Ok(())
    })?;
    let final_train_loss = eval_loss(&model.net, data, settings.loss)?;
    Ok(TrainedNet {
        net: model.net,
        budget,
        final_train_loss,
    })
}

/// One cosine cycle: `len` epochs annealed as if the cycle were `nominal` long.
/// `len < nominal` only for a truncated final cycle.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Cycle {
    pub len: usize,
    pub nominal: usize,
}

impl Cycle {
    /// The cycles of `m` cosine cycles over `t` epochs.
    pub fn split(t: usize, m: usize) -> Result<Vec<Cycle>> {
        let bounds = crate::optim::snapshot_boundaries(t, m)?;
        let nominal = t.div_ceil(m);
        let mut prev = 0;
        Ok(bounds
            .into_iter()
            .map(|b| {
                let c = Cycle {
                    len: b - prev,
                    nominal,
                };
                prev = b;
                c
            })
            .collect())
    }
}

#[derive(Clone, Debug)]
pub struct SnapshotOutcome {
    /// Parameters captured at the end of each cycle.
    pub shots: Vec<Network>,
    pub budget: BudgetCounter,
}

/// One training run through `cycles`, capturing a copy at the end of each.
pub fn snapshot_run(
    spec: &NetworkSpec,
    data: &Dataset,
    cycles: &[Cycle],
    base_lr: f64,
    settings: &FitSettings,
    seed: u64,
) -> Result<SnapshotOutcome> {
    if cycles.is_empty() || cycles.iter().any(|c| c.len == 0 || c.nominal == 0) {
        return Err(Error::InvalidArgument(
            "snapshot cycles must be non-empty".into(),
        ));
    }
    let lrs: Vec<f64> = cycles
        .iter()
        .flat_map(|c| {
            (0..c.len).map(move |t| {
                base_lr / 2.0 * ((std::f64::consts::PI * t as f64 / c.nominal as f64).cos() + 1.0)
            })
        })
        .collect();
    let mut ends = Vec::new();
    let mut acc = 0;
    for c in cycles {
        acc += c.len;
        ends.push(acc);
    }
    let net = Network::init(
        spec.clone(),
        &mut seed::rng(seed::child(seed, stream::INIT)),
    );
    let mut model = NetFit { net };
    let mut opt = Optimizer::new(settings.optimizer);
    let mut budget = BudgetCounter::default();
    let mut shots = Vec::with_capacity(cycles.len());
    let phase = Phase {
        lrs: &lrs,
        settings,
        seed,
        first_epoch: 0,
    };
    run_phase(
        &mut model,
        data,
        &mut opt,
        &phase,
        &mut budget,
        |epoch, m| {
            if ends.contains(&epoch) {
                shots.push(m.net.clone());
            }
            Ok(())
        },
    )?;
    Ok(SnapshotOutcome { shots, budget })
}

/// `d` snapshots from one run of `epochs` split into `d` cosine cycles.
pub fn snapshot_train(
    spec: &NetworkSpec,
    data: &Dataset,
    epochs: usize,
    d: usize,
    base_lr: f64,
    settings: &FitSettings,
    seed: u64,
) -> Result<SnapshotOutcome> {
    if d == 0 {
        return Err(Error::InvalidArgument("need at least one snapshot".into()));
    }
    snapshot_run(
        spec,
        data,
        &Cycle::split(epochs, d)?,
        base_lr,
        settings,
        seed,
    )
}
