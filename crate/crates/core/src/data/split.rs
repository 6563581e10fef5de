use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::seed::{self, stream};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SplitMode {
    /// Seeded permutation, then the first `ratio` share is train.
    Shuffled,
    /// Original order; the final `1 − ratio` share is test.
    Tail,
}

impl std::str::FromStr for SplitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shuffled" => Ok(SplitMode::Shuffled),
            "tail" => Ok(SplitMode::Tail),
            _ => Err(Error::Config(format!("unknown split mode {s:?}"))),
        }
    }
}

/// Train/test split with `round(ratio·n)` training rows.
pub fn split(ds: &Dataset, ratio: f64, mode: SplitMode, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "split ratio {ratio} outside (0, 1)"
        )));
    }
    let n = ds.len();
    let n_train = (ratio * n as f64).round() as usize;
    if n_train == 0 || n_train == n {
        return Err(Error::InvalidArgument(format!(
            "ratio {ratio} on {n} rows leaves one side empty"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    if mode == SplitMode::Shuffled {
        idx.shuffle(&mut seed::rng(seed::child(seed, stream::SPLIT)));
    }
    let (train, test) = idx.split_at(n_train);
    Ok((ds.subset(train), ds.subset(test)))
}

/// Mini-batch index lists for one epoch; the order is a pure function of
/// `(seed, epoch)` and the last batch may be short.
pub fn batches(n: usize, batch_size: usize, seed: u64, epoch: usize) -> Result<Vec<Vec<usize>>> {
    if batch_size == 0 {
        return Err(Error::InvalidArgument("batch size must be >= 1".into()));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seed::rng(seed::derive(
        seed,
        &[stream::BATCHES, epoch as u64],
    )));
    Ok(idx.chunks(batch_size).map(<[usize]>::to_vec).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Labels;
    use ndarray::Array2;

    fn indexed(n: usize) -> Dataset {
        let x = Array2::from_shape_fn((n, 1), |(i, _)| i as f64);
        Dataset::new(x.clone(), Labels::Real(x)).unwrap()
    }

    #[test]
    fn shuffled_split_sizes_and_determinism() {
        let ds = indexed(10);
        let (tr, te) = split(&ds, 0.7, SplitMode::Shuffled, 3).unwrap();
        assert_eq!((tr.len(), te.len()), (7, 3));
        let (tr2, _) = split(&ds, 0.7, SplitMode::Shuffled, 3).unwrap();
        assert_eq!(tr, tr2);
    }

    #[test]
    fn tail_split_keeps_order() {
        let ds = indexed(20);
        let (tr, te) = split(&ds, 0.9, SplitMode::Tail, 0).unwrap();
        assert_eq!(tr.len(), 18);
        assert_eq!(te.x.column(0).to_vec(), vec![18.0, 19.0]);
    }

    #[test]
    fn empty_side_rejected() {
        assert!(split(&indexed(2), 0.1, SplitMode::Tail, 0).is_err());
        assert!(split(&indexed(2), 1.0, SplitMode::Tail, 0).is_err());
    }

    #[test]
    fn batch_sizes_and_cover() {
        let b = batches(10, 4, 1, 0).unwrap();
        assert_eq!(b.iter().map(Vec::len).collect::<Vec<_>>(), vec![4, 4, 2]);
        assert_eq!(b, batches(10, 4, 1, 0).unwrap());
        assert_ne!(b, batches(10, 4, 1, 1).unwrap());
        let mut all: Vec<usize> = b.concat();
        all.sort();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
    }
}
