use std::collections::BTreeMap;
use std::time::Instant;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{metrics, RunConfig, Task};
use crate::data::{load_csv, split, Dataset, Labels, Scaler};
use crate::ensemble::{run_variant, Variant};
use crate::{Error, Result};

/// A report column: metric key and table header.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub key: String,
    pub header: String,
}

impl Column {
    fn new(key: &str, header: &str) -> Self {
        Column {
            key: key.into(),
            header: header.into(),
        }
    }
}

/// Report columns in table order for a task.
pub fn columns(task: Task, timing: bool) -> Vec<Column> {
    let mut c = match task {
        Task::Regression => vec![
            Column::new("mse", "MSE"),
            Column::new("mae", "MAE"),
            Column::new("r2", "R²"),
            Column::new("train_mse", "TRAIN MSE"),
        ],
        Task::Classification => vec![
            Column::new("accuracy", "accuracy"),
            Column::new("entropy", "entropy"),
            Column::new("train_accuracy", "TRAIN accuracy"),
        ],
    };
    if timing {
        c.push(Column::new("time_sec", "TIME (sec)"));
    }
    c
}

/// Mean and sample standard deviation of the defined values of one column.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: Option<f64>,
    pub std: Option<f64>,
    /// Runs with a defined value.
    pub count: usize,
}

impl Summary {
    /// Two-pass mean and `n − 1` variance; the std of a single value is 0.
    pub fn of(values: &[f64]) -> Summary {
        let n = values.len();
        if n == 0 {
            return Summary {
                mean: None,
                std: None,
                count: 0,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n == 1 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        Summary {
            mean: Some(mean),
            std: Some(std),
            count: n,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedRun {
    pub seed: u64,
    pub values: BTreeMap<String, Option<f64>>,
    pub budget_epochs: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub seed: u64,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub name: String,
    pub variant: Variant,
    pub d: usize,
    pub seeds: Vec<u64>,
    /// One summary per report column, in column order.
    pub summaries: Vec<Summary>,
    pub runs: Vec<SeedRun>,
    pub failures: Vec<Failure>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub task: Task,
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub split_seed: u64,
    pub train_rows: usize,
    pub test_rows: usize,
    pub columns: Vec<Column>,
    pub rows: Vec<ExperimentRow>,
}

/// Train and test splits, scaled with statistics of the training split.
pub struct Prepared {
    pub train: Dataset,
    pub test: Dataset,
    pub train_scaled: Dataset,
    pub test_scaled: Dataset,
    pub scaler: Scaler,
}

pub fn prepare_data(cfg: &RunConfig) -> Result<Prepared> {
    let d = &cfg.data;
    let mut ds = load_csv(&d.path, &d.target_column(), d.has_header)?;
    if cfg.task == Task::Classification {
        ds = ds.into_classification()?;
    }
    let (train, test) = split(&ds, d.split_ratio, d.split_mode, d.seed)?;
    let scale_targets = d.scale_targets && cfg.task == Task::Regression;
    let mut scaler = Scaler::fit(&train, scale_targets)?;
    if !d.scale_features {
        let id = Scaler::identity(train.n_features());
        scaler.feature_mean = id.feature_mean;
        scaler.feature_std = id.feature_std;
        scaler.constant_features.clear();
    }
    Ok(Prepared {
        train_scaled: scaler.apply(&train)?,
        test_scaled: scaler.apply(&test)?,
        train,
        test,
        scaler,
    })
}

/// Predictions in original target units.
fn unscale(pred: Array2<f64>, scaler: &Scaler, task: Task) -> Array2<f64> {
    match task {
        Task::Regression => scaler.inverse_targets(&pred),
        Task::Classification => pred,
    }
}

fn one_run(cfg: &RunConfig, prep: &Prepared, variant: Variant, seed: u64) -> Result<SeedRun> {
    let start = Instant::now();
    let plan = cfg.plan(
        variant,
        seed,
        prep.train.n_features(),
        prep.train.y.output_dim(),
    )?;
    let out = run_variant(&plan, &prep.train_scaled)?;
    let test_pred = unscale(
        out.predictor.predict(prep.test_scaled.x.view())?,
        &prep.scaler,
        cfg.task,
    );
    let train_pred = unscale(
        out.predictor.predict(prep.train_scaled.x.view())?,
        &prep.scaler,
        cfg.task,
    );
    let mut values = metrics(&test_pred, &prep.test.y)?;
    let train = metrics(&train_pred, &prep.train.y)?;
    match &prep.train.y {
        Labels::Real(_) => values.insert("train_mse".into(), train["mse"]),
        Labels::Class { .. } => values.insert("train_accuracy".into(), train["accuracy"]),
    };
    if cfg.timing {
        values.insert("time_sec".into(), Some(start.elapsed().as_secs_f64()));
    }
    if let Some((k, _)) = values
        .iter()
        .find(|(_, v)| v.is_some_and(|x| !x.is_finite()))
    {
        return Err(Error::Numeric(format!("metric {k} is not finite")));
    }
    Ok(SeedRun {
        seed,
        values,
        budget_epochs: out.budget.epochs_consumed,
    })
}

/// Run every configured variant for every seed on the configured data.
///
/// Seeds run one after another so wall times are not distorted; a failing
/// run is recorded in its row and the others proceed.
pub fn run_experiment(cfg: &RunConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let prep = prepare_data(cfg)?;
    run_prepared(cfg, &prep)
}

pub fn run_prepared(cfg: &RunConfig, prep: &Prepared) -> Result<ExperimentReport> {
    let cols = columns(cfg.task, cfg.timing);
    let mut rows = Vec::with_capacity(cfg.variants.len());
    for &variant in &cfg.variants {
        let mut runs = Vec::new();
        let mut failures = Vec::new();
        for &seed in &cfg.seeds {
            match one_run(cfg, prep, variant, seed) {
                Ok(r) => runs.push(r),
                Err(e) => failures.push(Failure {
                    seed,
                    error: e.to_string(),
                }),
            }
        }
        let summaries = cols
            .iter()
            .map(|c| {
                let v: Vec<f64> = runs
                    .iter()
                    .filter_map(|r| r.values.get(&c.key).copied().flatten())
                    .collect();
                Summary::of(&v)
            })
            .collect();
        rows.push(ExperimentRow {
            name: variant.label().into(),
            variant,
            d: cfg.d,
            seeds: cfg.seeds.clone(),
            summaries,
            runs,
            failures,
        });
    }
    Ok(ExperimentReport {
        name: cfg.name.clone(),
        task: cfg.task,
        config_hash: cfg.hash.clone(),
        seeds: cfg.seeds.clone(),
        split_seed: cfg.data.seed,
        train_rows: prep.train.len(),
        test_rows: prep.test.len(),
        columns: cols,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_matches_two_pass() {
        let s = Summary::of(&[1.0, 2.0, 4.0]);
        assert_eq!(s.mean, Some(7.0 / 3.0));
        let m = 7.0 / 3.0;
        let var = ((1.0f64 - m).powi(2) + (2.0f64 - m).powi(2) + (4.0f64 - m).powi(2)) / 2.0;
        assert_eq!(s.std, Some(var.sqrt()));
        assert_eq!(Summary::of(&[3.0]).std, Some(0.0));
        assert_eq!(Summary::of(&[]).mean, None);
    }
}
