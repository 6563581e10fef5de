use std::path::Path;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::simplex_weights;
use crate::nn::Network;
use crate::{Error, Result};

/// Members combined by `softmax(logits)`. In a star fit every member but the
/// last is frozen.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvexAggregate {
    pub members: Vec<Network>,
    pub frozen: Vec<bool>,
    pub logits: Vec<f64>,
}

impl ConvexAggregate {
    pub fn new(members: Vec<Network>, frozen: Vec<bool>, logits: Vec<f64>) -> Result<Self> {
        let agg = ConvexAggregate {
            members,
            frozen,
            logits,
        };
        agg.validate()?;
        Ok(agg)
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.members.len();
        if k == 0 || self.frozen.len() != k || self.logits.len() != k {
            return Err(Error::Shape(format!(
                "{k} members, {} frozen flags, {} logits",
                self.frozen.len(),
                self.logits.len()
            )));
        }
        let width = self.members[0].spec.output_dim();
        if self.members.iter().any(|m| m.spec.output_dim() != width) {
            return Err(Error::Shape("members disagree on output width".into()));
        }
        if self.logits.iter().any(|w| !w.is_finite()) {
            return Err(Error::Numeric("aggregate logits are not finite".into()));
        }
        Ok(())
    }

    pub fn weights(&self) -> Vec<f64> {
        simplex_weights(&self.logits)
    }
}

/// `Σ λ_i · member_i(x)` with `λ = softmax(logits)`, members in eval mode.
pub fn aggregate_forward(agg: &ConvexAggregate, x: ArrayView2<f64>) -> Result<Array2<f64>> {
    agg.validate()?;
    weighted_sum(&agg.members, &agg.weights(), x)
}

fn weighted_sum(members: &[Network], weights: &[f64], x: ArrayView2<f64>) -> Result<Array2<f64>> {
    let mut acc: Option<Array2<f64>> = None;
    for (m, &w) in members.iter().zip(weights) {
        let out = m.predict(x)?;
        match acc.as_mut() {
            None => acc = Some(out * w),
            Some(a) => {
                if a.dim() != out.dim() {
                    return Err(Error::Shape("members disagree on output width".into()));
                }
                a.scaled_add(w, &out);
            }
        }
    }
    acc.ok_or_else(|| Error::InvalidArgument("no members to combine".into()))
}

/// `d+1` blocks joined by unconstrained scalar weights, trained jointly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BigNet {
    pub blocks: Vec<Network>,
    pub combine: Vec<f64>,
}

impl BigNet {
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        if self.blocks.len() != self.combine.len() {
            return Err(Error::Shape(
                "one combining weight per block required".into(),
            ));
        }
        weighted_sum(&self.blocks, &self.combine, x)
    }
}

/// A fitted model of any variant. Predictions are eval-mode and deterministic.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Predictor {
    Single { net: Network },
    Average { members: Vec<Network> },
    Star { aggregate: ConvexAggregate },
    BigNn { model: BigNet },
}

/// Version written into serialized predictor files.
pub const PREDICTOR_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct PredictorFile {
    format: String,
    version: u32,
    predictor: Predictor,
}

const FORMAT_TAG: &str = "stard-predictor";

impl Predictor {
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        match self {
            Predictor::Single { net } => net.predict(x),
            Predictor::Average { members } => {
                let w = vec![1.0 / members.len() as f64; members.len()];
                weighted_sum(members, &w, x)
            }
            Predictor::Star { aggregate } => aggregate_forward(aggregate, x),
            Predictor::BigNn { model } => model.predict(x),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let file = PredictorFile {
            format: FORMAT_TAG.into(),
            version: PREDICTOR_FORMAT_VERSION,
            predictor: self.clone(),
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Predictor> {
        let file: PredictorFile = serde_json::from_str(text)?;
        if file.format != FORMAT_TAG || file.version != PREDICTOR_FORMAT_VERSION {
            return Err(Error::InvalidArgument(format!(
                "unsupported predictor file {} v{}",
                file.format, file.version
            )));
        }
        Ok(file.predictor)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Predictor> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
