//! Datasets, preprocessing, splitting, batching and synthetic teacher tasks.

mod csv_io;
mod scale;
mod split;
mod synth;

pub use csv_io::{load_csv, parse_csv, write_csv, TargetColumn};
pub use scale::Scaler;
pub use split::{batches, split, SplitMode};
pub use synth::{synthetic_regression, InputDist, SyntheticData, SyntheticSpec};

use ndarray::{Array2, Axis};

use crate::nn::Targets;
use crate::{Error, Result};

/// Regression targets (one row per sample) or class indices.
#[derive(Clone, Debug, PartialEq)]
pub enum Labels {
    Real(Array2<f64>),
    Class { labels: Vec<usize>, classes: usize },
}

impl Labels {
    pub fn len(&self) -> usize {
        match self {
            Labels::Real(y) => y.nrows(),
            Labels::Class { labels, .. } => labels.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn select(&self, idx: &[usize]) -> Labels {
        match self {
            Labels::Real(y) => Labels::Real(y.select(Axis(0), idx)),
            Labels::Class { labels, classes } => Labels::Class {
                labels: idx.iter().map(|&i| labels[i]).collect(),
                classes: *classes,
            },
        }
    }

    pub fn as_targets(&self) -> Targets<'_> {
        match self {
            Labels::Real(y) => Targets::Real(y.view()),
            Labels::Class { labels, .. } => Targets::Class(labels),
        }
    }

    /// Output width a network needs to fit these labels.
    pub fn output_dim(&self) -> usize {
        match self {
            Labels::Real(y) => y.ncols(),
            Labels::Class { classes, .. } => *classes,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub x: Array2<f64>,
    pub y: Labels,
    pub feature_names: Option<Vec<String>>,
    pub target_name: Option<String>,
}

impl Dataset {
    pub fn new(x: Array2<f64>, y: Labels) -> Result<Self> {
        let ds = Dataset {
            x,
            y,
            feature_names: None,
            target_name: None,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        if self.x.nrows() != self.y.len() {
            return Err(Error::Shape(format!(
                "{} feature rows but {} targets",
                self.x.nrows(),
                self.y.len()
            )));
        }
        if let Some(names) = &self.feature_names {
            if names.len() != self.x.ncols() {
                return Err(Error::Shape(format!(
                    "{} feature names for {} columns",
                    names.len(),
                    self.x.ncols()
                )));
            }
        }
        if let Some((i, _)) = self.x.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Numeric(format!("feature at {i:?} is not finite")));
        }
        match &self.y {
            Labels::Real(y) => {
                if let Some((i, _)) = y.indexed_iter().find(|(_, v)| !v.is_finite()) {
                    return Err(Error::Numeric(format!("target at {i:?} is not finite")));
                }
            }
            Labels::Class { labels, classes } => {
                if let Some(l) = labels.iter().find(|&&l| l >= *classes) {
                    return Err(Error::InvalidArgument(format!(
                        "label {l} out of range for {classes} classes"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.x.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_features(&self) -> usize {
        self.x.ncols()
    }

    /// Rows `idx` in the given order.
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select(Axis(0), idx),
            y: self.y.select(idx),
            feature_names: self.feature_names.clone(),
            target_name: self.target_name.clone(),
        }
    }

    /// Reinterpret single-column real targets as class indices `0..classes`.
    pub fn into_classification(self) -> Result<Dataset> {
        let Labels::Real(y) = &self.y else {
            return Ok(self);
        };
        if y.ncols() != 1 {
            return Err(Error::Shape("class targets need a single column".into()));
        }
        let mut labels = Vec::with_capacity(y.nrows());
        for (i, &v) in y.column(0).iter().enumerate() {
            if v < 0.0 || v.fract() != 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "target {v} at row {} is not a class index",
                    i + 1
                )));
            }
            labels.push(v as usize);
        }
        let classes = labels.iter().max().map_or(0, |m| m + 1);
        Ok(Dataset {
            y: Labels::Class { labels, classes },
            ..self
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn validation_and_subset() {
        let ds = Dataset::new(
            array![[1.0], [2.0], [3.0]],
            Labels::Real(array![[0.0], [1.0], [2.0]]),
        )
        .unwrap();
        let s = ds.subset(&[2, 0]);
        assert_eq!(s.x, array![[3.0], [1.0]]);
        assert_eq!(s.y, Labels::Real(array![[2.0], [0.0]]));
        let c = ds.into_classification().unwrap();
        assert_eq!(
            c.y,
            Labels::Class {
                labels: vec![0, 1, 2],
                classes: 3
            }
        );
        assert!(Dataset::new(array![[1.0]], Labels::Real(array![[0.0], [1.0]])).is_err());
        assert!(Dataset::new(array![[f64::NAN]], Labels::Real(array![[0.0]])).is_err());
    }
}
