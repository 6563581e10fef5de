//! First-order optimizers and learning-rate schedules.

mod schedule;

pub use schedule::{schedule_lr, snapshot_boundaries, LrSchedule};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum OptimizerKind {
    /// Heavy-ball momentum: `u ← μu + g`, `w ← w − lr·u`.
    Sgd { momentum: f64 },
    /// Adam with bias-corrected moments.
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl OptimizerKind {
    pub fn sgd(momentum: f64) -> Self {
        OptimizerKind::Sgd { momentum }
    }

    pub fn adam() -> Self {
        OptimizerKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Optimizer state for one parameter set. Accumulators are shaped on the
/// first step and must keep that shape afterwards.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Optimizer {
    pub kind: OptimizerKind,
    /// SGD velocity or Adam first moment.
    first: Vec<Vec<f64>>,
    /// Adam second moment; empty for SGD.
    second: Vec<Vec<f64>>,
    pub steps: u64,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind) -> Self {
        Optimizer {
            kind,
            first: Vec::new(),
            second: Vec::new(),
            steps: 0,
        }
    }

    fn shape_state(&mut self, params: &[&mut [f64]], grads: &[Vec<f64>]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::Shape(format!(
                "{} parameter blocks but {} gradient blocks",
                params.len(),
                grads.len()
            )));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.len() != g.len() {
                return Err(Error::Shape(format!(
                    "block {i}: {} parameters but {} gradients",
                    p.len(),
                    g.len()
                )));
            }
        }
        if self.steps == 0 && self.first.is_empty() {
            self.first = params.iter().map(|p| vec![0.0; p.len()]).collect();
            if matches!(self.kind, OptimizerKind::Adam { .. }) {
                self.second = self.first.clone();
            }
        }
        let matches = self.first.len() == params.len()
            && self
                .first
                .iter()
                .zip(params)
                .all(|(a, p)| a.len() == p.len());
        if !matches {
            return Err(Error::Shape(
                "parameter layout changed since the optimizer was created".into(),
            ));
        }
        Ok(())
    }

    /// One update. Parameters and state are left untouched if any updated
    /// value would be non-finite.
    pub fn step(&mut self, params: &mut [&mut [f64]], grads: &[Vec<f64>], lr: f64) -> Result<()> {
        self.shape_state(params, grads)?;
        let t = self.steps + 1;
        let mut first = self.first.clone();
        let mut second = self.second.clone();
        let mut updated: Vec<Vec<f64>> = Vec::with_capacity(params.len());
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            let mut out = Vec::with_capacity(p.len());
            match self.kind {
                OptimizerKind::Sgd { momentum } => {
                    for ((w, &gj), u) in p.iter().zip(g).zip(first[i].iter_mut()) {
                        *u = momentum * *u + gj;
                        out.push(w - lr * *u);
                    }
                }
                OptimizerKind::Adam { beta1, beta2, eps } => {
                    let c1 = 1.0 - beta1.powi(t as i32);
                    let c2 = 1.0 - beta2.powi(t as i32);
                    for (((w, &gj), m), v) in p
                        .iter()
                        .zip(g)
                        .zip(first[i].iter_mut())
                        .zip(second[i].iter_mut())
                    {
                        *m = beta1 * *m + (1.0 - beta1) * gj;
                        *v = beta2 * *v + (1.0 - beta2) * gj * gj;
                        let m_hat = *m / c1;
                        let v_hat = *v / c2;
                        out.push(w - lr * m_hat / (v_hat.sqrt() + eps));
                    }
                }
            }
            if let Some(j) = out.iter().position(|x| !x.is_finite()) {
                return Err(Error::Numeric(format!(
                    "non-finite update in parameter block {i}, entry {j}"
                )));
            }
            updated.push(out);
        }
        for (p, u) in params.iter_mut().zip(updated) {
            p.copy_from_slice(&u);
        }
        self.first = first;
        self.second = second;
        self.steps = t;
        Ok(())
    }
}

/// Single SGD step on a flat parameter block.
pub fn sgd_step(params: &mut [f64], grads: &[f64], state: &mut Optimizer, lr: f64) -> Result<()> {
    if !matches!(state.kind, OptimizerKind::Sgd { .. }) {
        return Err(Error::InvalidArgument("state is not an SGD state".into()));
    }
    state.step(&mut [params], &[grads.to_vec()], lr)
}

/// Single Adam step on a flat parameter block.
pub fn adam_step(params: &mut [f64], grads: &[f64], state: &mut Optimizer, lr: f64) -> Result<()> {
    if !matches!(state.kind, OptimizerKind::Adam { .. }) {
        return Err(Error::InvalidArgument("state is not an Adam state".into()));
    }
    state.step(&mut [params], &[grads.to_vec()], lr)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plain_sgd_step() {
        let mut w = [1.0];
        let mut s = Optimizer::new(OptimizerKind::sgd(0.0));
        sgd_step(&mut w, &[2.0], &mut s, 0.1).unwrap();
        assert_eq!(w, [0.8]);
        sgd_step(&mut w, &[0.0], &mut s, 0.1).unwrap();
        assert_eq!(w, [0.8]);
    }

    #[test]
    fn momentum_two_steps() {
        // u1 = 1, w1 = 1 - 0.1 = 0.9; u2 = 0.9 + 1 = 1.9, w2 = 0.9 - 0.19 = 0.71
        let mut w = [1.0];
        let mut s = Optimizer::new(OptimizerKind::sgd(0.9));
        sgd_step(&mut w, &[1.0], &mut s, 0.1).unwrap();
        sgd_step(&mut w, &[1.0], &mut s, 0.1).unwrap();
        assert!((w[0] - 0.71).abs() < 1e-15);
    }

    #[test]
    fn adam_first_step() {
        let mut w = [0.0];
        let mut s = Optimizer::new(OptimizerKind::adam());
        adam_step(&mut w, &[1.0], &mut s, 0.001).unwrap();
        assert!((w[0] + 0.001 / (1.0 + 1e-8)).abs() < 1e-18);
    }

    #[test]
    fn zero_gradients_leave_params_bit_identical() {
        let mut w = [0.3, -1.7];
        let before = w;
        let mut s = Optimizer::new(OptimizerKind::adam());
        for _ in 0..5 {
            adam_step(&mut w, &[0.0, 0.0], &mut s, 0.01).unwrap();
        }
        assert_eq!(w, before);
    }

    #[test]
    fn non_finite_update_rejected_without_side_effects() {
        let mut w = [1.0];
        let mut s = Optimizer::new(OptimizerKind::sgd(0.0));
        let err = sgd_step(&mut w, &[f64::INFINITY], &mut s, 0.1).unwrap_err();
        assert!(matches!(err, Error::Numeric(_)));
        assert_eq!(w, [1.0]);
        assert_eq!(s.steps, 0);
    }

    #[test]
    fn shape_mismatch() {
        let mut w = [1.0, 2.0];
        let mut s = Optimizer::new(OptimizerKind::sgd(0.0));
        assert!(matches!(
            sgd_step(&mut w, &[1.0], &mut s, 0.1),
            Err(Error::Shape(_))
        ));
    }
}
