use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::tree::{grow_tree, Node, Presorted, RegressionTree};
use super::Hyperparams;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::seed;

/// Forest output for one feature vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    /// Mean of the per-tree predictions.
    pub estimate: f64,
    pub min: f64,
    pub max: f64,
    /// Population standard deviation of the per-tree predictions.
    pub std: f64,
}

/// Bagged ensemble of regression trees. Immutable once fitted.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomForest {
    trees: Vec<RegressionTree>,
    params: Hyperparams,
    seed: u64,
    n_features: usize,
    impurity_decrease: Vec<f64>,
}

impl RandomForest {
    /// Reassembles a forest from stored parts, e.g. when loading a model file.
    pub fn from_parts(
        trees: Vec<RegressionTree>,
        params: Hyperparams,
        seed: u64,
        n_features: usize,
        impurity_decrease: Vec<f64>,
    ) -> Result<Self> {
        params.validate(n_features)?;
        if trees.len() != params.n_estimators {
            return Err(Error::MalformedModel(format!(
                "expected {} trees, found {}",
                params.n_estimators,
                trees.len()
            )));
        }
        if trees.iter().any(|t| t.n_features() != n_features) || impurity_decrease.len() != n_features {
            return Err(Error::MalformedModel("feature count mismatch".into()));
        }
        Ok(Self {
            trees,
            params,
            seed,
            n_features,
            impurity_decrease,
        })
    }

    pub fn trees(&self) -> &[RegressionTree] {
        &self.trees
    }

    pub fn params(&self) -> &Hyperparams {
        &self.params
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Total weighted impurity decrease per feature, summed over every split.
    pub fn impurity_decrease(&self) -> &[f64] {
        &self.impurity_decrease
    }

    pub fn tree_predictions(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_arity(x)?;
        Ok(self.trees.iter().map(|t| t.predict(x)).collect())
    }

    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        let values = self.tree_predictions(x)?;
        let n = values.len() as f64;
        let (min, max) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
        let mean = values.iter().sum::<f64>() / n;
        let estimate = mean.clamp(min, max);
        let var = values.iter().map(|v| (v - estimate).powi(2)).sum::<f64>() / n;
        Ok(Prediction {
            estimate,
            min,
            max,
            std: var.sqrt(),
        })
    }

    pub fn predict_value(&self, x: &[f64]) -> Result<f64> {
        self.predict(x).map(|p| p.estimate)
    }

    pub fn predict_rows(&self, x: &Matrix) -> Result<Vec<f64>> {
        x.iter_rows().map(|row| self.predict_value(row)).collect()
    }

    /// Impurity-based importance, normalised to sum to one. A forest without
    /// a single split reports the uniform vector.
    pub fn impurity_importance(&self) -> Vec<f64> {
        let total: f64 = self.impurity_decrease.iter().sum();
        if total > 0.0 {
            self.impurity_decrease.iter().map(|v| v / total).collect()
        } else {
            vec![1.0 / self.n_features as f64; self.n_features]
        }
    }

    fn check_arity(&self, x: &[f64]) -> Result<()> {
        if x.len() == self.n_features {
            Ok(())
        } else {
            Err(Error::FeatureArity {
                expected: self.n_features,
                got: x.len(),
            })
        }
    }
}

fn fit_one(
    x: &Matrix,
    y: &[f64],
    presorted: &Presorted,
    params: &Hyperparams,
    master_seed: u64,
    index: usize,
) -> RegressionTree {
    let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(master_seed, index as u64));
    let n = x.rows();
    let weights = if params.bootstrap {
        let mut w = vec![0u32; n];
        for _ in 0..n {
            w[rng.random_range(0..n)] += 1;
        }
        w
    } else {
        vec![1u32; n]
    };
    grow_tree(x, y, &weights, presorted, params, &mut rng)
}

/// Fits the forest on the current rayon pool.
///
/// Tree `i` draws its bootstrap sample and its feature subsets from its own
/// generator seeded with `seed::derive(master_seed, i)`, so the result does not
/// depend on how many threads run the fit.
pub fn fit_forest(x: &Matrix, y: &[f64], params: &Hyperparams, master_seed: u64) -> Result<RandomForest> {
    if y.len() != x.rows() {
        return Err(Error::LengthMismatch(x.rows(), y.len()));
    }
    if x.rows() < 2 {
        return Err(Error::InvalidParams(format!(
            "need at least 2 training rows, got {}",
            x.rows()
        )));
    }
    params.validate(x.cols())?;

    let presorted = Presorted::new(x);
    let trees: Vec<RegressionTree> = (0..params.n_estimators)
        .into_par_iter()
        .map(|i| fit_one(x, y, &presorted, params, master_seed, i))
        .collect();

    let mut impurity_decrease = vec![0.0; x.cols()];
    for tree in &trees {
        for node in tree.nodes() {
            if let Node::Split {
                feature, improvement, ..
            } = *node
            {
                impurity_decrease[feature] += improvement;
            }
        }
    }
    Ok(RandomForest {
        trees,
        params: *params,
        seed: master_seed,
        n_features: x.cols(),
        impurity_decrease,
    })
}

/// [`fit_forest`] on a dedicated pool of `workers` threads.
pub fn fit_forest_with_workers(
    x: &Matrix,
    y: &[f64],
    params: &Hyperparams,
    master_seed: u64,
    workers: usize,
) -> Result<RandomForest> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidParams(format!("cannot build thread pool: {e}")))?;
    pool.install(|| fit_forest(x, y, params, master_seed))
}
