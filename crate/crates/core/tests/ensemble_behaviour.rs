use ndarray::{Array1, Array2};
use proptest::prelude::*;
use rand::Rng;

use stard::data::{synthetic_regression, Dataset, InputDist, Labels, SyntheticSpec};
use stard::ensemble::{
    aggregate_forward, budget_of, run_variant, simplex_weights, snapshot_train, star_d_train,
    train_erm, train_from, BlockInit, ConvexAggregate, FitSettings, Predictor, SnapBudget,
    TrainPlan, Variant,
};
use stard::nn::{Loss, Network, NetworkSpec};
use stard::optim::{LrSchedule, OptimizerKind};
use stard::seed;

fn adam(batch_size: usize) -> FitSettings {
    FitSettings {
        optimizer: OptimizerKind::adam(),
        batch_size,
        loss: Loss::Squared,
    }
}

fn constant(lr: f64, epochs: usize) -> LrSchedule {
    LrSchedule::Constant {
        base_lr: lr,
        total_epochs: epochs,
    }
}

fn toy(seed: u64, n: usize) -> Dataset {
    let task =
        SyntheticSpec::with_sampled_teacher(vec![2, 8, 1], 21, None, InputDist::Uniform, 0.2)
            .unwrap();
    synthetic_regression(&task, n, seed).unwrap().data
}

fn mse(pred: &Array2<f64>, data: &Dataset) -> f64 {
    let Labels::Real(y) = &data.y else {
        unreachable!()
    };
    (pred - y).mapv(|r| r * r).mean().unwrap()
}

/// Solve the normal equations `XᵀX w = Xᵀy` by Gaussian elimination.
fn least_squares(x: &Array2<f64>, y: &Array1<f64>) -> Array1<f64> {
    let p = x.ncols();
    let mut a = x.t().dot(x);
    let mut b = x.t().dot(y);
    for c in 0..p {
        let piv = (c..p)
            .max_by(|&i, &j| a[[i, c]].abs().total_cmp(&a[[j, c]].abs()))
            .unwrap();
        for k in 0..p {
            a.swap([c, k], [piv, k]);
        }
        b.swap(c, piv);
        for r in c + 1..p {
            let f = a[[r, c]] / a[[c, c]];
            for k in c..p {
                a[[r, k]] -= f * a[[c, k]];
            }
            b[r] -= f * b[c];
        }
    }
    let mut w = Array1::zeros(p);
    for c in (0..p).rev() {
        let s: f64 = (c + 1..p).map(|k| a[[c, k]] * w[k]).sum();
        w[c] = (b[c] - s) / a[[c, c]];
    }
    w
}

#[test]
fn linear_model_reaches_the_least_squares_optimum() {
    let mut rng = seed::rng(5);
    let n = 300;
    let x = Array2::from_shape_fn((n, 3), |_| rng.random_range(-1.0..1.0));
    let w_true = ndarray::array![1.0, -2.0, 0.5];
    let y: Array1<f64> = x.dot(&w_true) + Array1::from_shape_fn(n, |_| rng.random_range(-0.3..0.3));
    let w = least_squares(&x, &y);
    let optimum = (x.dot(&w) - &y).mapv(|r| r * r).mean().unwrap();
    let data = Dataset::new(x, Labels::Real(y.insert_axis(ndarray::Axis(1)))).unwrap();
    let spec = NetworkSpec::new(vec![3, 1]).unwrap();
    let out = train_erm(&spec, &data, &constant(0.01, 300), &adam(32), 1).unwrap();
    assert!(
        out.final_train_loss <= 1.05 * optimum,
        "{} vs optimum {optimum}",
        out.final_train_loss
    );
    assert_eq!(out.budget.epochs_consumed, 300);
}

#[test]
fn training_is_deterministic_and_reduces_risk() {
    let data = toy(3, 128);
    let spec = NetworkSpec::new(vec![2, 16, 1])
        .unwrap()
        .with_dropout(0.1)
        .unwrap();
    let a = train_erm(&spec, &data, &constant(0.01, 10), &adam(16), 9).unwrap();
    let b = train_erm(&spec, &data, &constant(0.01, 10), &adam(16), 9).unwrap();
    assert_eq!(a.net, b.net);
    for s in 0..10u64 {
        let net = Network::init(spec.clone(), &mut seed::rng(s));
        let before = mse(&net.predict(data.x.view()).unwrap(), &data);
        let out = train_from(net, &data, &constant(0.01, 15), &adam(16), s).unwrap();
        assert!(
            out.final_train_loss <= before,
            "seed {s}: {} > {before}",
            out.final_train_loss
        );
    }
}

#[test]
fn snapshots_differ_and_cost_the_run() {
    let data = toy(4, 128);
    let spec = NetworkSpec::new(vec![2, 16, 1]).unwrap();
    let out = snapshot_train(&spec, &data, 20, 2, 0.05, &adam(16), 2).unwrap();
    assert_eq!(out.shots.len(), 2);
    assert_eq!(out.budget.epochs_consumed, 20);
    assert_ne!(out.shots[0].params, out.shots[1].params);
}

#[test]
fn aggregate_matches_weighted_sum_oracle() {
    let spec = NetworkSpec::new(vec![3, 5, 2]).unwrap();
    let mut rng = seed::rng(12);
    for _ in 0..20 {
        let k = rng.random_range(2..5);
        let members: Vec<Network> = (0..k)
            .map(|_| Network::init(spec.clone(), &mut rng))
            .collect();
        let logits: Vec<f64> = (0..k).map(|_| rng.random_range(-3.0..3.0)).collect();
        let mut frozen = vec![true; k];
        frozen[k - 1] = false;
        let agg = ConvexAggregate::new(members.clone(), frozen, logits.clone()).unwrap();
        let x = Array2::from_shape_fn((7, 3), |_| rng.random_range(-1.0..1.0));
        let got = aggregate_forward(&agg, x.view()).unwrap();
        let z: f64 = logits.iter().map(|l| l.exp()).sum();
        let mut want = Array2::<f64>::zeros((7, 2));
        for (m, l) in members.iter().zip(&logits) {
            want.scaled_add(l.exp() / z, &m.predict(x.view()).unwrap());
        }
        assert!((&got - &want).mapv(f64::abs).iter().all(|&d| d <= 1e-12));
    }
}

/// The trained aggregate is at most the best member's train MSE plus 5% of
/// the spread between best and worst member.
#[test]
fn star_is_close_to_the_best_member_on_ten_seeds() {
    let spec = NetworkSpec::new(vec![2, 12, 1]).unwrap();
    for s in 0..10u64 {
        let data = toy(100 + s, 96);
        let frozen: Vec<Network> = (0..3u64)
            .map(|i| {
                let epochs = [2, 6, 20][i as usize];
                train_erm(&spec, &data, &constant(0.01, epochs), &adam(16), 10 * s + i)
                    .unwrap()
                    .net
            })
            .collect();
        let out = star_d_train(
            &frozen,
            BlockInit::Fresh(spec.clone()),
            &data,
            40,
            0.4,
            0.01,
            &adam(16),
            s,
        )
        .unwrap();
        let member: Vec<f64> = out
            .aggregate
            .members
            .iter()
            .map(|m| mse(&m.predict(data.x.view()).unwrap(), &data))
            .collect();
        let best = member.iter().copied().fold(f64::INFINITY, f64::min);
        let worst = member.iter().copied().fold(0.0, f64::max);
        let agg = mse(
            &aggregate_forward(&out.aggregate, data.x.view()).unwrap(),
            &data,
        );
        assert!(
            agg <= best + 0.05 * (worst - best),
            "seed {s}: {agg} vs {member:?}"
        );
    }
}

#[test]
fn zero_warm_up_skips_the_first_phase() {
    let data = toy(5, 64);
    let spec = NetworkSpec::new(vec![2, 6, 1]).unwrap();
    let frozen = vec![Network::init(spec.clone(), &mut seed::rng(1))];
    let out = star_d_train(
        &frozen,
        BlockInit::Fresh(spec.clone()),
        &data,
        5,
        0.0,
        0.01,
        &adam(16),
        1,
    )
    .unwrap();
    assert_eq!((out.report.warmup_epochs, out.report.joint_epochs), (0, 5));
    let out = star_d_train(
        &frozen,
        BlockInit::Fresh(spec),
        &data,
        5,
        0.4,
        0.01,
        &adam(16),
        1,
    )
    .unwrap();
    assert_eq!((out.report.warmup_epochs, out.report.joint_epochs), (2, 3));
}

#[test]
fn measured_budgets_match_the_formula() {
    let data = toy(6, 40);
    let spec = NetworkSpec::new(vec![2, 4, 1]).unwrap();
    let plan = TrainPlan::new(Variant::SnapEnsemble, spec.clone(), 5, 30, 0);
    assert_eq!(budget_of(&plan), 60);
    assert_eq!(
        run_variant(&plan, &data).unwrap().budget.epochs_consumed,
        60
    );
    let classic = TrainPlan::new(Variant::ClassicStarNewWarmup, spec.clone(), 5, 200, 0);
    assert_eq!(budget_of(&classic), 1200);
    let mut ext = TrainPlan::new(Variant::SnapStarShotWarmup, spec, 2, 4, 0);
    ext.snap_budget = SnapBudget::Extended;
    assert_eq!(budget_of(&ext), 16);
    assert_eq!(run_variant(&ext, &data).unwrap().budget.epochs_consumed, 16);
}

#[test]
fn variant_outcomes_are_reproducible() {
    let data = toy(7, 48);
    let spec = NetworkSpec::new(vec![2, 4, 1])
        .unwrap()
        .with_batch_norm(true);
    for v in Variant::ALL {
        let plan = TrainPlan::new(v, spec.clone(), 2, 3, 4);
        let a = run_variant(&plan, &data)
            .unwrap()
            .predictor
            .to_json()
            .unwrap();
        let b = run_variant(&plan, &data)
            .unwrap()
            .predictor
            .to_json()
            .unwrap();
        assert_eq!(a, b, "{v}");
        let back = Predictor::from_json(&a).unwrap();
        assert_eq!(back.to_json().unwrap(), a);
    }
}

proptest! {
    #[test]
    fn simplex_weights_are_a_distribution(logits in prop::collection::vec(-30.0f64..30.0, 1..12)) {
        let w = simplex_weights(&logits);
        prop_assert_eq!(w.len(), logits.len());
        prop_assert!(w.iter().all(|&v| v > 0.0));
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn shifting_logits_leaves_weights_unchanged(logits in prop::collection::vec(-10.0f64..10.0, 1..8), c in -50.0f64..50.0) {
        let a = simplex_weights(&logits);
        let shifted: Vec<f64> = logits.iter().map(|l| l + c).collect();
        let b = simplex_weights(&shifted);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }
}
