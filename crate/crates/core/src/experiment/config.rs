use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::Task;
use crate::data::{SplitMode, TargetColumn};
use crate::ensemble::{FitSettings, SnapBudget, TrainPlan, Variant};
use crate::kv::KeyValues;
use crate::nn::{Loss, NetworkSpec};
use crate::optim::OptimizerKind;
use crate::{Error, Result};

/// Every key a run config may contain.
pub const RUN_KEYS: &[&str] = &[
    "name",
    "path",
    "target",
    "has_header",
    "split_ratio",
    "split_mode",
    "scale_features",
    "scale_targets",
    "batch_size",
    "seed",
    "task",
    "variants",
    "seeds",
    "d",
    "epochs",
    "warmup_fraction",
    "lr",
    "optimizer",
    "momentum",
    "snapshot_lr",
    "snapshot_optimizer",
    "snapshot_momentum",
    "snap_budget",
    "widths",
    "dropout",
    "batch_norm",
    "timing",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataConfig {
    pub path: PathBuf,
    /// Header name or 0-based column index.
    pub target: String,
    pub has_header: bool,
    pub split_ratio: f64,
    pub split_mode: SplitMode,
    pub scale_features: bool,
    pub scale_targets: bool,
    /// Seed of the train/test split.
    pub seed: u64,
}

impl DataConfig {
    pub fn target_column(&self) -> TargetColumn {
        self.target.parse().expect("infallible")
    }
}

/// A parsed run config. See [`RunConfig::parse`] for the keys.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub name: String,
    pub data: DataConfig,
    pub task: Task,
    pub variants: Vec<Variant>,
    pub seeds: Vec<u64>,
    /// Hidden-layer widths; input and output widths come from the data.
    pub widths: Vec<usize>,
    pub dropout: f64,
    pub batch_norm: bool,
    pub d: usize,
    pub epochs: usize,
    pub warmup_fraction: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub optimizer: OptimizerKind,
    pub snapshot_lr: f64,
    pub snapshot_optimizer: OptimizerKind,
    pub snap_budget: SnapBudget,
    /// Record wall time; off for byte-identical reports.
    pub timing: bool,
    /// SHA-256 of the normalised key-value text.
    pub hash: String,
}

fn optimizer(
    kv: &KeyValues,
    key: &str,
    momentum_key: &str,
    default: &str,
) -> Result<OptimizerKind> {
    match kv.raw(key).unwrap_or(default) {
        "adam" => Ok(OptimizerKind::adam()),
        "sgd" => Ok(OptimizerKind::sgd(kv.get_or(momentum_key, 0.9)?)),
        other => Err(Error::Config(format!(
            "key {key:?}: unknown optimizer {other:?}"
        ))),
    }
}

impl RunConfig {
    /// Parse a flat key-value config. A relative `path` is resolved against
    /// `base_dir`.
    ///
    /// Data keys: `path` and `target` (required), `has_header` (true),
    /// `split_ratio` (0.7), `split_mode` (shuffled|tail), `scale_features`
    /// (true), `scale_targets` (false), `seed` (0, the split seed).
    /// Plan keys: `widths` (required, hidden widths), `variants` (comma list
    /// or `all`), `seeds` (0), `d` (5), `epochs` (200), `warmup_fraction`
    /// (0.4), `lr` (0.01), `batch_size` (32), `optimizer` (adam|sgd, with
    /// `momentum` 0.9), `snapshot_lr` (= lr), `snapshot_optimizer`
    /// (= optimizer), `snapshot_momentum`, `snap_budget` (compact|extended),
    /// `dropout` (0), `batch_norm` (false), `task` (regression|classification).
    /// Report keys: `name`, `timing` (true).
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let kv = KeyValues::parse(text)?;
        kv.reject_unknown(RUN_KEYS)?;
        let path: PathBuf = kv.require::<String>("path")?.into();
        let path = if path.is_relative() {
            base_dir.join(path)
        } else {
            path
        };
        let data = DataConfig {
            path,
            target: kv.require("target")?,
            has_header: kv.flag("has_header", true)?,
            split_ratio: kv.get_or("split_ratio", 0.7)?,
            split_mode: kv.get_or("split_mode", SplitMode::Shuffled)?,
            scale_features: kv.flag("scale_features", true)?,
            scale_targets: kv.flag("scale_targets", false)?,
            seed: kv.get_or("seed", 0)?,
        };
        let variants = match kv.raw("variants") {
            None | Some("all") => Variant::ALL.to_vec(),
            Some(_) => kv
                .list::<String>("variants")?
                .unwrap_or_default()
                .iter()
                .map(|s| s.parse())
                .collect::<Result<Vec<Variant>>>()
                .map_err(|e| Error::Config(e.to_string()))?,
        };
        let seeds = kv.list::<u64>("seeds")?.unwrap_or_else(|| vec![0]);
        let widths = kv
            .list::<usize>("widths")?
            .ok_or_else(|| Error::Config("missing required key \"widths\"".into()))?;
        let opt_name = kv.raw("optimizer").unwrap_or("adam").to_string();
        let lr = kv.get_or("lr", 0.01)?;
        let cfg = RunConfig {
            name: kv.get_or("name", "experiment".to_string())?,
            data,
            task: kv.get_or("task", Task::Regression)?,
            variants,
            seeds,
            widths,
            dropout: kv.get_or("dropout", 0.0)?,
            batch_norm: kv.flag("batch_norm", false)?,
            d: kv.get_or("d", 5)?,
            epochs: kv.get_or("epochs", 200)?,
            warmup_fraction: kv.get_or("warmup_fraction", 0.4)?,
            lr,
            batch_size: kv.get_or("batch_size", 32)?,
            optimizer: optimizer(&kv, "optimizer", "momentum", "adam")?,
            snapshot_lr: kv.get_or("snapshot_lr", lr)?,
            snapshot_optimizer: optimizer(
                &kv,
                "snapshot_optimizer",
                "snapshot_momentum",
                &opt_name,
            )?,
            snap_budget: kv.get_or("snap_budget", SnapBudget::Compact)?,
            timing: kv.flag("timing", true)?,
            hash: config_hash(&kv),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    pub fn validate(&self) -> Result<()> {
        if self.variants.is_empty() {
            return Err(Error::Config("at least one variant is required".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        if !(self.data.split_ratio > 0.0 && self.data.split_ratio < 1.0) {
            return Err(Error::Config(format!(
                "split_ratio {} must lie in (0, 1)",
                self.data.split_ratio
            )));
        }
        let probe = self.plan(Variant::Ensemble, 0, 1, 1)?;
        probe.validate()
    }

    /// Training plan for one variant and seed on data with `inputs` features
    /// and `outputs` model outputs.
    pub fn plan(
        &self,
        variant: Variant,
        seed: u64,
        inputs: usize,
        outputs: usize,
    ) -> Result<TrainPlan> {
        let mut widths = Vec::with_capacity(self.widths.len() + 2);
        widths.push(inputs);
        widths.extend(&self.widths);
        widths.push(outputs);
        let spec = NetworkSpec::new(widths)?
            .with_dropout(self.dropout)?
            .with_batch_norm(self.batch_norm);
        let loss = match self.task {
            Task::Regression => Loss::Squared,
            Task::Classification => Loss::CrossEntropy,
        };
        let mut plan = TrainPlan::new(variant, spec, self.d, self.epochs, seed);
        plan.warmup_fraction = self.warmup_fraction;
        plan.lr = self.lr;
        plan.settings = FitSettings {
            optimizer: self.optimizer,
            batch_size: self.batch_size,
            loss,
        };
        plan.snapshot_lr = self.snapshot_lr;
        plan.snapshot_settings = FitSettings {
            optimizer: self.snapshot_optimizer,
            ..plan.settings
        };
        plan.snap_budget = self.snap_budget;
        Ok(plan)
    }
}

/// Hex SHA-256 over `key=value` lines in key order.
pub fn config_hash(kv: &KeyValues) -> String {
    let mut h = Sha256::new();
    for k in kv.keys() {
        h.update(k.as_bytes());
        h.update(b"=");
        h.update(kv.raw(k).unwrap_or("").as_bytes());
        h.update(b"\n");
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}
