use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SPLIT_RATIOS: (f64, f64, f64) = (0.7, 0.2, 0.1);

/// Random train/test/validation partition of `0..n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub cv: Vec<usize>,
    pub seed: u64,
}

/// `round(7n/10)` and `round(2n/10)`, rounding halves up, in exact integer arithmetic.
pub fn split_sizes(n: usize) -> (usize, usize, usize) {
    let train = (7 * n + 5) / 10;
    let test = (2 * n + 5) / 10;
    (train, test, n - train - test)
}

pub fn split_dataset(n: usize, seed: u64) -> Result<DatasetSplit> {
    if n < 10 {
        return Err(Error::TooFewRows(n));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (n_train, n_test, _) = split_sizes(n);
    let cv = order.split_off(n_train + n_test);
    let test = order.split_off(n_train);
    Ok(DatasetSplit {
        train: order,
        test,
        cv,
        seed,
    })
}

/// `k` distinct row indices drawn uniformly from `0..n`, in ascending order.
/// Returns every row when `k >= n`.
pub fn subsample_indices(n: usize, k: usize, seed: u64) -> Vec<usize> {
    if k >= n {
        return (0..n).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = rand::seq::index::sample(&mut rng, n, k).into_vec();
    rows.sort_unstable();
    rows
}
