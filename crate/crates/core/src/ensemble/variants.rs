use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::big::train_big_nn;
use super::star::{star_d_train, BlockInit, StarReport};
use super::train::{snapshot_run, train_erm, Cycle, FitSettings};
use super::{BudgetCounter, Predictor};
use crate::data::Dataset;
use crate::nn::{Loss, Network, NetworkSpec};
use crate::optim::{LrSchedule, OptimizerKind};
use crate::seed::{self, stream};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    SnapStarShotWarmup,
    SnapStarNewWarmup,
    SnapEnsemble,
    Ensemble,
    ClassicStarNoWarmup,
    ClassicStarNewWarmup,
    BigNn,
}

impl Variant {
    /// Every variant, in report-table order.
    pub const ALL: [Variant; 7] = [
        Variant::SnapStarShotWarmup,
        Variant::SnapStarNewWarmup,
        Variant::SnapEnsemble,
        Variant::Ensemble,
        Variant::ClassicStarNoWarmup,
        Variant::ClassicStarNewWarmup,
        Variant::BigNn,
    ];

    pub fn key(self) -> &'static str {
        match self {
            Variant::SnapStarShotWarmup => "snap_star_shot_warmup",
            Variant::SnapStarNewWarmup => "snap_star_new_warmup",
            Variant::SnapEnsemble => "snap_ensemble",
            Variant::Ensemble => "ensemble",
            Variant::ClassicStarNoWarmup => "classic_star_no_warmup",
            Variant::ClassicStarNewWarmup => "classic_star_new_warmup",
            Variant::BigNn => "big_nn",
        }
    }

    /// Display name used in report tables.
    pub fn label(self) -> &'static str {
        match self {
            Variant::SnapStarShotWarmup => "Snap Star (shot warm-up)",
            Variant::SnapStarNewWarmup => "Snap Star (new warm-up)",
            Variant::SnapEnsemble => "Snap Ensemble",
            Variant::Ensemble => "Ensemble",
            Variant::ClassicStarNoWarmup => "Classic Star (no warm-up)",
            Variant::ClassicStarNewWarmup => "Classic Star (new warm-up)",
            Variant::BigNn => "Big NN",
        }
    }

    fn is_snap(self) -> bool {
        matches!(
            self,
            Variant::SnapStarShotWarmup | Variant::SnapStarNewWarmup | Variant::SnapEnsemble
        )
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.key() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown variant {s:?}")))
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.key())
    }
}

/// How snapshot variants spend their budget.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnapBudget {
    /// One run of `epochs` yields the `d` shots; the final block or the
    /// continuation shot costs another `epochs`. Every snap variant costs
    /// `2·epochs`.
    Compact,
    /// Every cosine cycle lasts `epochs`. Shot warm-up continues to a fully
    /// trained shot `d+1` as the block start, costing `(d+2)·epochs`; the
    /// other two cost `(d+1)·epochs`.
    Extended,
}

impl std::str::FromStr for SnapBudget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "compact" => Ok(SnapBudget::Compact),
            "extended" => Ok(SnapBudget::Extended),
            _ => Err(Error::Config(format!("unknown snap budget {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainPlan {
    pub variant: Variant,
    pub spec: NetworkSpec,
    /// Number of frozen members in star variants; ensembles use `d+1` models.
    pub d: usize,
    /// Budget of one block.
    pub epochs: usize,
    pub warmup_fraction: f64,
    pub settings: FitSettings,
    pub lr: f64,
    /// Optimizer for snapshot runs (SGD or Adam with cyclic cosine rates).
    pub snapshot_settings: FitSettings,
    pub snapshot_lr: f64,
    pub snap_budget: SnapBudget,
    pub seed: u64,
}

impl TrainPlan {
    /// Adam at 0.01, batch 32, squared loss, 40% warm-up, compact snap budget.
    pub fn new(variant: Variant, spec: NetworkSpec, d: usize, epochs: usize, seed: u64) -> Self {
        let settings = FitSettings {
            optimizer: OptimizerKind::adam(),
            batch_size: 32,
            loss: Loss::Squared,
        };
        TrainPlan {
            variant,
            spec,
            d,
            epochs,
            warmup_fraction: 0.4,
            settings,
            lr: 0.01,
            snapshot_settings: settings,
            snapshot_lr: 0.01,
            snap_budget: SnapBudget::Compact,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        if self.d == 0 {
            return Err(Error::InvalidArgument("d must be >= 1".into()));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidArgument("epochs must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.warmup_fraction) {
            return Err(Error::InvalidArgument(format!(
                "warm-up fraction {} outside [0, 1)",
                self.warmup_fraction
            )));
        }
        for lr in [self.lr, self.snapshot_lr] {
            if !(lr > 0.0 && lr.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "learning rate {lr} must be > 0"
                )));
            }
        }
        if self.settings.batch_size == 0 || self.snapshot_settings.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be >= 1".into()));
        }
        if self.variant.is_snap() && self.snap_budget == SnapBudget::Compact && self.epochs < self.d
        {
            return Err(Error::InvalidArgument(format!(
                "{} epochs cannot hold {} snapshot cycles",
                self.epochs, self.d
            )));
        }
        Ok(())
    }

    fn member_seed(&self, i: usize) -> u64 {
        seed::derive(self.seed, &[stream::MEMBER, i as u64])
    }
}

/// Epochs a plan consumes, counted once per trained model and pass.
pub fn budget_of(plan: &TrainPlan) -> usize {
    let (d, e) = (plan.d, plan.epochs);
    match (plan.variant, plan.snap_budget) {
        (Variant::Ensemble | Variant::ClassicStarNoWarmup | Variant::ClassicStarNewWarmup, _) => {
            (d + 1) * e
        }
        (Variant::BigNn, _) => e,
        (_, SnapBudget::Compact) => 2 * e,
        (Variant::SnapStarShotWarmup, SnapBudget::Extended) => (d + 2) * e,
        (_, SnapBudget::Extended) => (d + 1) * e,
    }
}

#[derive(Clone, Debug)]
pub struct VariantOutcome {
    pub predictor: Predictor,
    pub budget: BudgetCounter,
    pub star: Option<StarReport>,
}

fn erm_members(
    plan: &TrainPlan,
    data: &Dataset,
    count: usize,
) -> Result<Vec<(Network, BudgetCounter)>> {
    let schedule = LrSchedule::Constant {
        base_lr: plan.lr,
        total_epochs: plan.epochs,
    };
    (0..count)
        .into_par_iter()
        .map(|i| {
            train_erm(
                &plan.spec,
                data,
                &schedule,
                &plan.settings,
                plan.member_seed(i),
            )
            .map(|t| (t.net, t.budget))
        })
        .collect()
}

fn snapshots(
    plan: &TrainPlan,
    data: &Dataset,
    cycles: &[Cycle],
) -> Result<(Vec<Network>, BudgetCounter)> {
    let out = snapshot_run(
        &plan.spec,
        data,
        cycles,
        plan.snapshot_lr,
        &plan.snapshot_settings,
        seed::child(plan.seed, stream::SNAPSHOT),
    )?;
    Ok((out.shots, out.budget))
}

fn full_cycles(count: usize, epochs: usize) -> Vec<Cycle> {
    vec![
        Cycle {
            len: epochs,
            nominal: epochs
        };
        count
    ]
}

/// Train one variant end to end.
pub fn run_variant(plan: &TrainPlan, data: &Dataset) -> Result<VariantOutcome> {
    plan.validate()?;
    let (d, e) = (plan.d, plan.epochs);
    let star_seed = seed::child(plan.seed, stream::STAR);
    let mut budget = BudgetCounter::default();

    let star = |frozen: Vec<Network>, block: BlockInit, wf: f64, budget: &mut BudgetCounter| {
        let out = star_d_train(
            &frozen,
            block,
            data,
            e,
            wf,
            plan.lr,
            &plan.settings,
            star_seed,
        )?;
        budget.absorb(out.budget);
        Ok::<_, Error>(VariantOutcome {
            predictor: Predictor::Star {
                aggregate: out.aggregate,
            },
            budget: *budget,
            star: Some(out.report),
        })
    };

    match plan.variant {
        Variant::Ensemble => {
            let members = erm_members(plan, data, d + 1)?;
            members.iter().for_each(|(_, b)| budget.absorb(*b));
            Ok(VariantOutcome {
                predictor: Predictor::Average {
                    members: members.into_iter().map(|(n, _)| n).collect(),
                },
                budget,
                star: None,
            })
        }
        Variant::ClassicStarNoWarmup | Variant::ClassicStarNewWarmup => {
            let members = erm_members(plan, data, d)?;
            members.iter().for_each(|(_, b)| budget.absorb(*b));
            let frozen = members.into_iter().map(|(n, _)| n).collect();
            let wf = if plan.variant == Variant::ClassicStarNoWarmup {
                0.0
            } else {
                plan.warmup_fraction
            };
            star(frozen, BlockInit::Fresh(plan.spec.clone()), wf, &mut budget)
        }
        Variant::BigNn => {
            let (model, b, _) = train_big_nn(
                &plan.spec,
                d + 1,
                data,
                e,
                plan.lr,
                &plan.settings,
                seed::child(plan.seed, stream::BLOCKS),
            )?;
            Ok(VariantOutcome {
                predictor: Predictor::BigNn { model },
                budget: b,
                star: None,
            })
        }
        Variant::SnapEnsemble => {
            let cycles = match plan.snap_budget {
                SnapBudget::Compact => {
                    let mut c = Cycle::split(e, d)?;
                    c.extend(full_cycles(1, e));
                    c
                }
                SnapBudget::Extended => full_cycles(d + 1, e),
            };
            let (shots, b) = snapshots(plan, data, &cycles)?;
            Ok(VariantOutcome {
                predictor: Predictor::Average { members: shots },
                budget: b,
                star: None,
            })
        }
        Variant::SnapStarNewWarmup => {
            let cycles = match plan.snap_budget {
                SnapBudget::Compact => Cycle::split(e, d)?,
                SnapBudget::Extended => full_cycles(d, e),
            };
            let (shots, b) = snapshots(plan, data, &cycles)?;
            budget.absorb(b);
            star(
                shots,
                BlockInit::Fresh(plan.spec.clone()),
                plan.warmup_fraction,
                &mut budget,
            )
        }
        Variant::SnapStarShotWarmup => {
            let (mut shots, b) = match plan.snap_budget {
                SnapBudget::Compact => snapshots(plan, data, &Cycle::split(e, d)?)?,
                SnapBudget::Extended => snapshots(plan, data, &full_cycles(d + 1, e))?,
            };
            budget.absorb(b);
            let block = match plan.snap_budget {
                SnapBudget::Compact => shots[d - 1].clone(),
                SnapBudget::Extended => shots.pop().expect("d + 1 shots"),
            };
            star(shots, BlockInit::From(block), 0.0, &mut budget)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plan(v: Variant, d: usize, e: usize) -> TrainPlan {
        TrainPlan::new(v, NetworkSpec::new(vec![1, 1]).unwrap(), d, e, 0)
    }

    #[test]
    fn budget_formulas() {
        assert_eq!(
            budget_of(&plan(Variant::ClassicStarNewWarmup, 5, 200)),
            1200
        );
        assert_eq!(budget_of(&plan(Variant::SnapEnsemble, 5, 30)), 60);
        assert_eq!(budget_of(&plan(Variant::BigNn, 5, 30)), 30);
        let mut p = plan(Variant::SnapStarShotWarmup, 3, 10);
        p.snap_budget = SnapBudget::Extended;
        assert_eq!(budget_of(&p), 50);
        p.variant = Variant::SnapStarNewWarmup;
        assert_eq!(budget_of(&p), 40);
    }

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.key().parse::<Variant>().unwrap(), v);
        }
        assert!("star".parse::<Variant>().is_err());
    }
}
