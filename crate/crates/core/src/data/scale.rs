use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use super::{Dataset, Labels};
use crate::{Error, Result};

/// Per-column standardisation fitted on a training split.
///
/// Columns whose population standard deviation is zero pass through
/// unchanged and are listed in `constant_features`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub feature_mean: Array1<f64>,
    pub feature_std: Array1<f64>,
    pub constant_features: Vec<usize>,
    /// Mean and std of real targets when target scaling is enabled.
    pub target: Option<(Array1<f64>, Array1<f64>)>,
}

fn column_stats(a: &Array2<f64>) -> Result<(Array1<f64>, Array1<f64>, Vec<usize>)> {
    let mean = a
        .mean_axis(Axis(0))
        .ok_or_else(|| Error::InvalidArgument("cannot fit a scaler on zero rows".into()))?;
    let mut std = a.std_axis(Axis(0), 0.0);
    let mut constant = Vec::new();
    for (j, s) in std.iter_mut().enumerate() {
        if *s == 0.0 {
            constant.push(j);
        }
    }
    let mut mean = mean;
    for &j in &constant {
        mean[j] = 0.0;
        std[j] = 1.0;
    }
    Ok((mean, std, constant))
}

impl Scaler {
    pub fn fit(train: &Dataset, scale_targets: bool) -> Result<Scaler> {
        let (feature_mean, feature_std, constant_features) = column_stats(&train.x)?;
        let target = match (&train.y, scale_targets) {
            (Labels::Real(y), true) => {
                let (m, s, _) = column_stats(y)?;
                Some((m, s))
            }
            _ => None,
        };
        Ok(Scaler {
            feature_mean,
            feature_std,
            constant_features,
            target,
        })
    }

    /// An identity scaler for `p` features.
    pub fn identity(p: usize) -> Scaler {
        Scaler {
            feature_mean: Array1::zeros(p),
            feature_std: Array1::ones(p),
            constant_features: Vec::new(),
            target: None,
        }
    }

    pub fn transform_features(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.feature_mean.len() {
            return Err(Error::Shape(format!(
                "scaler fitted on {} features, got {}",
                self.feature_mean.len(),
                x.ncols()
            )));
        }
        Ok((x - &self.feature_mean) / &self.feature_std)
    }

    pub fn inverse_features(&self, x: &Array2<f64>) -> Array2<f64> {
        x * &self.feature_std + &self.feature_mean
    }

    pub fn transform_targets(&self, y: &Array2<f64>) -> Array2<f64> {
        match &self.target {
            Some((m, s)) => (y - m) / s,
            None => y.clone(),
        }
    }

    /// Map scaled predictions or targets back to original units.
    pub fn inverse_targets(&self, y: &Array2<f64>) -> Array2<f64> {
        match &self.target {
            Some((m, s)) => y * s + m,
            None => y.clone(),
        }
    }

    pub fn apply(&self, ds: &Dataset) -> Result<Dataset> {
        let x = self.transform_features(&ds.x)?;
        let y = match &ds.y {
            Labels::Real(y) => Labels::Real(self.transform_targets(y)),
            other => other.clone(),
        };
        Ok(Dataset {
            x,
            y,
            feature_names: ds.feature_names.clone(),
            target_name: ds.target_name.clone(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn standardises_and_inverts() {
        let ds = Dataset::new(
            array![[1.0, 5.0], [2.0, 5.0], [3.0, 5.0]],
            Labels::Real(array![[10.0], [20.0], [60.0]]),
        )
        .unwrap();
        let sc = Scaler::fit(&ds, true).unwrap();
        assert_eq!(sc.constant_features, vec![1]);
        let out = sc.apply(&ds).unwrap();
        let c0 = out.x.column(0);
        let k = 1.5f64.sqrt();
        for (v, e) in c0.iter().zip([-k, 0.0, k]) {
            assert!((v - e).abs() < 1e-12);
        }
        assert_eq!(out.x.column(1).to_vec(), vec![5.0, 5.0, 5.0]);
        let Labels::Real(y) = &out.y else {
            unreachable!()
        };
        assert!(y.mean().unwrap().abs() < 1e-12);
        let back = sc.inverse_targets(y);
        assert!((back - array![[10.0], [20.0], [60.0]])
            .iter()
            .all(|d| d.abs() < 1e-10));
        let xb = sc.inverse_features(&out.x);
        assert!((xb - &ds.x).iter().all(|d| d.abs() < 1e-10));
    }

    #[test]
    fn targets_untouched_unless_requested() {
        let ds = Dataset::new(array![[1.0], [3.0]], Labels::Real(array![[10.0], [20.0]])).unwrap();
        let sc = Scaler::fit(&ds, false).unwrap();
        assert_eq!(sc.apply(&ds).unwrap().y, ds.y);
    }
}
