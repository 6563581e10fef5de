use std::collections::BTreeMap;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::data::Labels;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Regression,
    Classification,
}

impl std::str::FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "regression" => Ok(Task::Regression),
            "classification" => Ok(Task::Classification),
            _ => Err(Error::Config(format!("unknown task {s:?}"))),
        }
    }
}

/// Metric name to value; `None` where a metric is undefined.
pub type MetricMap = BTreeMap<String, Option<f64>>;

/// MSE and MAE over all output entries and `R² = 1 − SSE/SST` with SST taken
/// around the column means. `R²` is `None` when SST is zero.
pub fn regression_metrics(pred: &Array2<f64>, y: &Array2<f64>) -> Result<MetricMap> {
    if pred.dim() != y.dim() {
        return Err(Error::Shape(format!(
            "predictions {:?} vs targets {:?}",
            pred.dim(),
            y.dim()
        )));
    }
    if y.is_empty() {
        return Err(Error::InvalidArgument(
            "metrics need at least one row".into(),
        ));
    }
    let count = y.len() as f64;
    let sse: f64 = pred.iter().zip(y).map(|(p, t)| (p - t) * (p - t)).sum();
    let sae: f64 = pred.iter().zip(y).map(|(p, t)| (p - t).abs()).sum();
    let means = y.mean_axis(ndarray::Axis(0)).expect("non-empty");
    let sst: f64 = y
        .outer_iter()
        .map(|row| {
            row.iter()
                .zip(&means)
                .map(|(t, m)| (t - m) * (t - m))
                .sum::<f64>()
        })
        .sum();
    let mut m = MetricMap::new();
    m.insert("mse".into(), Some(sse / count));
    m.insert("mae".into(), Some(sae / count));
    m.insert("r2".into(), (sst > 0.0).then(|| 1.0 - sse / sst));
    Ok(m)
}

/// Accuracy of the arg-max class (first index on ties) and mean
/// cross-entropy `−(1/n) Σ ln p(true class)` with `p = softmax(logits)`.
pub fn classification_metrics(logits: &Array2<f64>, labels: &[usize]) -> Result<MetricMap> {
    if logits.nrows() != labels.len() {
        return Err(Error::Shape(format!(
            "{} prediction rows but {} labels",
            logits.nrows(),
            labels.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::InvalidArgument(
            "metrics need at least one row".into(),
        ));
    }
    let mut correct = 0usize;
    let mut ce = 0.0;
    for (row, &l) in logits.outer_iter().zip(labels) {
        if l >= row.len() {
            return Err(Error::InvalidArgument(format!(
                "label {l} out of range for {} outputs",
                row.len()
            )));
        }
        let (arg, max) = row
            .iter()
            .enumerate()
            .fold(
                (0, f64::NEG_INFINITY),
                |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc },
            );
        if arg == l {
            correct += 1;
        }
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        ce += lse - row[l];
    }
    let n = labels.len() as f64;
    let mut m = MetricMap::new();
    m.insert("accuracy".into(), Some(correct as f64 / n));
    m.insert("entropy".into(), Some(ce / n));
    Ok(m)
}

/// Metrics appropriate for the label type.
pub fn metrics(pred: &Array2<f64>, targets: &Labels) -> Result<MetricMap> {
    match targets {
        Labels::Real(y) => regression_metrics(pred, y),
        Labels::Class { labels, .. } => classification_metrics(pred, labels),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn regression_examples() {
        let y = array![[1.0], [2.0], [4.0]];
        let m = regression_metrics(&y, &y).unwrap();
        assert_eq!(m["mse"], Some(0.0));
        assert_eq!(m["r2"], Some(1.0));
        let m = regression_metrics(&array![[0.0], [2.0]], &array![[0.0], [0.0]]).unwrap();
        assert_eq!(m["mse"], Some(2.0));
        assert_eq!(m["mae"], Some(1.0));
        assert_eq!(m["r2"], None);
    }

    #[test]
    fn entropy_of_a_coin() {
        let m = classification_metrics(&array![[0.0, 0.0], [3.0, 3.0]], &[0, 1]).unwrap();
        assert!((m["entropy"].unwrap() - 2f64.ln()).abs() < 1e-15);
        assert_eq!(m["accuracy"], Some(0.5));
    }

    #[test]
    fn errors() {
        assert!(regression_metrics(&Array2::zeros((0, 1)), &Array2::zeros((0, 1))).is_err());
        assert!(classification_metrics(&array![[0.0, 1.0]], &[2]).is_err());
    }
}
