use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum LrSchedule {
    Constant {
        base_lr: f64,
        total_epochs: usize,
    },
    /// `cycles` cosine cycles of length `⌈T/M⌉`, restarting at `base_lr`.
    CosineCyclic {
        base_lr: f64,
        total_epochs: usize,
        cycles: usize,
    },
}

impl LrSchedule {
    pub fn total_epochs(&self) -> usize {
        match *self {
            LrSchedule::Constant { total_epochs, .. }
            | LrSchedule::CosineCyclic { total_epochs, .. } => total_epochs,
        }
    }

    pub fn base_lr(&self) -> f64 {
        match *self {
            LrSchedule::Constant { base_lr, .. } | LrSchedule::CosineCyclic { base_lr, .. } => {
                base_lr
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let lr = self.base_lr();
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "base learning rate must be positive, got {lr}"
            )));
        }
        if self.total_epochs() == 0 {
            return Err(Error::InvalidArgument(
                "schedule needs at least one epoch".into(),
            ));
        }
        if let LrSchedule::CosineCyclic {
            total_epochs,
            cycles,
            ..
        } = *self
        {
            if cycles == 0 || total_epochs < cycles {
                return Err(Error::InvalidArgument(format!(
                    "need 1 <= cycles <= epochs, got {cycles} cycles over {total_epochs} epochs"
                )));
            }
        }
        Ok(())
    }
}

/// Learning rate for the 1-based `epoch`.
///
/// Within a cosine cycle starting after epoch `b`, epoch `e` gets
/// `α0/2·(cos(π(e−1−b)/c) + 1)` with `c = ⌈T/M⌉`. Cycle starts are the
/// [`snapshot_boundaries`], so when `M ∣ T` this is `(e−1) mod c`.
pub fn schedule_lr(sched: &LrSchedule, epoch: usize) -> Result<f64> {
    sched.validate()?;
    let total = sched.total_epochs();
    if epoch == 0 || epoch > total {
        return Err(Error::InvalidArgument(format!(
            "epoch {epoch} outside 1..={total}"
        )));
    }
    match *sched {
        LrSchedule::Constant { base_lr, .. } => Ok(base_lr),
        LrSchedule::CosineCyclic {
            base_lr,
            total_epochs,
            cycles,
        } => {
            let c = total_epochs.div_ceil(cycles);
            let bounds = snapshot_boundaries(total_epochs, cycles)?;
            let start = bounds
                .iter()
                .rev()
                .find(|&&b| b < epoch)
                .copied()
                .unwrap_or(0);
            let t = (epoch - 1 - start) as f64;
            Ok(base_lr / 2.0 * ((std::f64::consts::PI * t / c as f64).cos() + 1.0))
        }
    }
}

/// Epochs at the end of each of the `m` cosine cycles over `t` epochs.
///
/// Cycle `k` ends at `min(k·c, t − (m − k))`, which is `k·c` whenever that
/// leaves every later cycle at least one epoch.
pub fn snapshot_boundaries(t: usize, m: usize) -> Result<Vec<usize>> {
    if m == 0 || t < m {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= cycles <= epochs, got {m} cycles over {t} epochs"
        )));
    }
    let c = t.div_ceil(m);
    Ok((1..=m).map(|k| (k * c).min(t - (m - k))).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cosine(t: usize, m: usize) -> LrSchedule {
        LrSchedule::CosineCyclic {
            base_lr: 0.1,
            total_epochs: t,
            cycles: m,
        }
    }

    #[test]
    fn boundaries() {
        assert_eq!(snapshot_boundaries(10, 2).unwrap(), vec![5, 10]);
        assert_eq!(snapshot_boundaries(7, 3).unwrap(), vec![3, 6, 7]);
        assert_eq!(snapshot_boundaries(9, 1).unwrap(), vec![9]);
        assert_eq!(snapshot_boundaries(5, 4).unwrap(), vec![2, 3, 4, 5]);
        assert!(snapshot_boundaries(2, 3).is_err());
    }

    #[test]
    fn cosine_values() {
        let s = cosine(10, 2);
        assert_eq!(schedule_lr(&s, 1).unwrap(), 0.1);
        assert_eq!(schedule_lr(&s, 6).unwrap(), 0.1);
        let c = 5.0;
        let last = 0.05 * ((std::f64::consts::PI * (c - 1.0) / c).cos() + 1.0);
        assert_eq!(schedule_lr(&s, 5).unwrap(), last);
        let s = cosine(8, 2);
        assert!((schedule_lr(&s, 3).unwrap() - 0.05).abs() < 1e-15);
        assert!(schedule_lr(&s, 0).is_err());
        assert!(schedule_lr(&s, 9).is_err());
    }

    #[test]
    fn constant() {
        let s = LrSchedule::Constant {
            base_lr: 0.01,
            total_epochs: 3,
        };
        assert_eq!(schedule_lr(&s, 2).unwrap(), 0.01);
    }
}
