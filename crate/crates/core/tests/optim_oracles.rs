use proptest::prelude::*;

use stard::optim::{schedule_lr, snapshot_boundaries, LrSchedule, Optimizer, OptimizerKind};

/// Scalar Adam written from the textbook recurrence.
fn adam_trace(w0: f64, lr: f64, steps: usize, grad: impl Fn(f64) -> f64) -> Vec<f64> {
    let (b1, b2, eps) = (0.9f64, 0.999f64, 1e-8);
    let (mut w, mut m, mut v) = (w0, 0.0, 0.0);
    let mut out = Vec::new();
    for t in 1..=steps as i32 {
        let g = grad(w);
        m = b1 * m + (1.0 - b1) * g;
        v = b2 * v + (1.0 - b2) * g * g;
        let mh = m / (1.0 - b1.powi(t));
        let vh = v / (1.0 - b2.powi(t));
        w -= lr * mh / (vh.sqrt() + eps);
        out.push(w);
    }
    out
}

#[test]
fn adam_ten_steps_on_a_quadratic_match_the_recurrence() {
    // f(w) = 1.5 (w − 2)²
    let grad = |w: f64| 3.0 * (w - 2.0);
    let expect = adam_trace(-1.0, 0.05, 10, grad);
    let mut opt = Optimizer::new(OptimizerKind::adam());
    let mut w = vec![-1.0];
    for e in expect {
        let g = vec![vec![grad(w[0])]];
        opt.step(&mut [w.as_mut_slice()], &g, 0.05).unwrap();
        assert!(
            (w[0] - e).abs() <= 1e-15 * e.abs().max(1.0),
            "{} vs {e}",
            w[0]
        );
    }
    assert_eq!(opt.steps, 10);
}

#[test]
fn sgd_momentum_trace_matches_the_recurrence() {
    let grad = |w: f64| 2.0 * w;
    let mut opt = Optimizer::new(OptimizerKind::sgd(0.9));
    let (mut w, mut u) = (1.0f64, 0.0f64);
    let mut p = vec![1.0];
    for _ in 0..10 {
        let g = grad(w);
        u = 0.9 * u + g;
        w -= 0.1 * u;
        let gp = grad(p[0]);
        opt.step(&mut [p.as_mut_slice()], &[vec![gp]], 0.1).unwrap();
        assert!((p[0] - w).abs() <= 1e-15);
    }
}

#[test]
fn boundary_examples() {
    assert_eq!(snapshot_boundaries(10, 2).unwrap(), vec![5, 10]);
    assert_eq!(snapshot_boundaries(7, 3).unwrap(), vec![3, 6, 7]);
    assert_eq!(snapshot_boundaries(9, 1).unwrap(), vec![9]);
}

proptest! {
    #[test]
    fn boundaries_increase_and_end_at_t(t in 1usize..300, m in 1usize..20) {
        prop_assume!(m <= t);
        let b = snapshot_boundaries(t, m).unwrap();
        prop_assert_eq!(b.len(), m);
        prop_assert!(b.windows(2).all(|w| w[0] < w[1]));
        prop_assert_eq!(*b.last().unwrap(), t);
    }

    #[test]
    fn cosine_rates_stay_in_range_and_restart(t in 2usize..200, m in 1usize..10, lr in 1e-4f64..1.0) {
        prop_assume!(m <= t);
        let s = LrSchedule::CosineCyclic { base_lr: lr, total_epochs: t, cycles: m };
        let b = snapshot_boundaries(t, m).unwrap();
        for e in 1..=t {
            let r = schedule_lr(&s, e).unwrap();
            prop_assert!((0.0..=lr).contains(&r));
        }
        prop_assert_eq!(schedule_lr(&s, 1).unwrap(), lr);
        for &end in &b[..b.len() - 1] {
            prop_assert_eq!(schedule_lr(&s, end + 1).unwrap(), lr);
        }
    }

    #[test]
    fn zero_gradients_never_move_parameters(w in prop::collection::vec(-5.0f64..5.0, 1..8), adam in any::<bool>()) {
        let kind = if adam { OptimizerKind::adam() } else { OptimizerKind::sgd(0.9) };
        let mut opt = Optimizer::new(kind);
        let mut p = w.clone();
        for _ in 0..5 {
            opt.step(&mut [p.as_mut_slice()], &[vec![0.0; w.len()]], 0.1).unwrap();
        }
        prop_assert_eq!(p, w);
    }
}
