//! Regression trees and the bagged random forest.
//!
//! Trees are grown greedily with the variance-reduction (MSE) criterion over
//! numeric thresholds. Candidate thresholds are the midpoints between
//! consecutive distinct sorted values; ties between equally good candidates go
//! to the lower feature index, then to the smaller threshold.

mod ensemble;
mod split;
mod tree;

pub use ensemble::{fit_forest, fit_forest_with_workers, Prediction, RandomForest};
pub use split::{best_split, SplitCandidate};
pub use tree::{fit_tree, Node, RegressionTree};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Hyperparams {
    pub n_estimators: usize,
    /// Features considered per split; `None` means all of them.
    pub max_features: Option<usize>,
    pub min_samples_leaf: usize,
    /// `None` grows until leaves are pure or too small to split.
    pub max_depth: Option<usize>,
    pub bootstrap: bool,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            n_estimators: 500,
            max_features: None,
            min_samples_leaf: 1,
            max_depth: None,
            bootstrap: true,
        }
    }
}

impl Hyperparams {
    pub fn with_trees(n_estimators: usize) -> Self {
        Self {
            n_estimators,
            ..Self::default()
        }
    }

    pub fn validate(&self, n_features: usize) -> Result<()> {
        if self.n_estimators == 0 {
            return Err(Error::InvalidParams("n_estimators must be at least 1".into()));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::InvalidParams("min_samples_leaf must be at least 1".into()));
        }
        if let Some(k) = self.max_features {
            if k == 0 || k > n_features {
                return Err(Error::InvalidParams(format!(
                    "max_features must be in 1..={n_features}, got {k}"
                )));
            }
        }
        Ok(())
    }

    pub(crate) fn features_per_split(&self, n_features: usize) -> usize {
        self.max_features.unwrap_or(n_features).min(n_features)
    }
}
