//! Model scoring, tree-count grid search and the linear baseline.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::{feature_names, CleanDataset, DatasetSplit};
use crate::error::{Error, Result};
use crate::forest::{fit_forest, Hyperparams, RandomForest};
use crate::matrix::Matrix;
use crate::seed;

/// Coefficient of determination `1 − SS_res / SS_tot`.
pub fn r2_score(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    if y_true.len() != y_pred.len() {
        return Err(Error::LengthMismatch(y_true.len(), y_pred.len()));
    }
    if y_true.len() < 2 {
        return Err(Error::UndefinedR2);
    }
    let mean = y_true.iter().sum::<f64>() / y_true.len() as f64;
    let ss_tot: f64 = y_true.iter().map(|y| (y - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(Error::UndefinedR2);
    }
    let ss_res: f64 = y_true.iter().zip(y_pred).map(|(y, p)| (y - p).powi(2)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// Pearson correlation; `None` when either input is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScore {
    pub feature: String,
    /// `null` when undefined (constant column).
    pub value: Option<f64>,
}

/// Pearson correlation of every encoded feature column with price.
pub fn feature_correlations(ds: &CleanDataset) -> Vec<FeatureScore> {
    feature_names()
        .into_iter()
        .enumerate()
        .map(|(j, feature)| {
            let col: Vec<f64> = ds.features.column(j).collect();
            FeatureScore {
                feature,
                value: pearson(&col, &ds.target),
            }
        })
        .collect()
}

/// Indices of features with `|r| >= threshold`; undefined correlations are dropped.
pub fn select_features(correlations: &[FeatureScore], threshold: f64) -> Vec<usize> {
    correlations
        .iter()
        .enumerate()
        .filter(|(_, s)| s.value.is_some_and(|r| r.abs() >= threshold))
        .map(|(j, _)| j)
        .collect()
}

/// Zeroes every column not in `keep`. A constant column is never split on, so
/// the forest ignores it while keeping the full input arity.
pub fn mask_features(x: &Matrix, keep: &[usize]) -> Matrix {
    let mut out = x.clone();
    for j in (0..x.cols()).filter(|j| !keep.contains(j)) {
        for i in 0..x.rows() {
            out.set(i, j, 0.0);
        }
    }
    out
}

/// Relative ridge added to the centred normal equations.
pub const RIDGE_JITTER: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearBaseline {
    pub weights: Vec<f64>,
    pub intercept: f64,
    /// Absolute ridge term actually used.
    pub ridge: f64,
}

impl LinearBaseline {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.intercept + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }

    pub fn predict_rows(&self, x: &Matrix) -> Vec<f64> {
        x.iter_rows().map(|r| self.predict(r)).collect()
    }
}

/// Ordinary least squares with an intercept.
///
/// Solves `(XcᵀXc + εI) w = Xcᵀyc` on mean-centred data by Cholesky, with
/// `ε = RIDGE_JITTER · trace(XcᵀXc) / d`; the intercept restores the means.
pub fn fit_linear_baseline(x: &Matrix, y: &[f64]) -> Result<LinearBaseline> {
    let (n, d) = (x.rows(), x.cols());
    if y.len() != n {
        return Err(Error::LengthMismatch(n, y.len()));
    }
    if n <= d {
        return Err(Error::RankDeficient);
    }
    let nf = n as f64;
    let x_mean: Vec<f64> = (0..d).map(|j| x.column(j).sum::<f64>() / nf).collect();
    let y_mean = y.iter().sum::<f64>() / nf;

    let mut gram = DMatrix::<f64>::zeros(d, d);
    let mut rhs = DVector::<f64>::zeros(d);
    let mut centred = vec![0.0; d];
    for (row, &yi) in x.iter_rows().zip(y) {
        for j in 0..d {
            centred[j] = row[j] - x_mean[j];
        }
        let dy = yi - y_mean;
        for a in 0..d {
            rhs[a] += centred[a] * dy;
            for b in a..d {
                gram[(a, b)] += centred[a] * centred[b];
            }
        }
    }
    for a in 0..d {
        for b in 0..a {
            gram[(a, b)] = gram[(b, a)];
        }
    }
    let ridge = RIDGE_JITTER * gram.trace() / d as f64;
    for a in 0..d {
        gram[(a, a)] += ridge;
    }
    let chol = gram.cholesky().ok_or(Error::RankDeficient)?;
    let w = chol.solve(&rhs);
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::RankDeficient);
    }
    let intercept = y_mean - w.iter().zip(&x_mean).map(|(w, m)| w * m).sum::<f64>();
    Ok(LinearBaseline {
        weights: w.iter().copied().collect(),
        intercept,
        ridge,
    })
}

/// Tree counts 50, 100, …, 500.
pub fn default_grid() -> Vec<usize> {
    (1..=10).map(|k| k * 50).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GridCandidate {
    pub n_estimators: usize,
    pub seed: u64,
    pub cv_r2: f64,
}

#[derive(Debug, Clone)]
pub struct GridSearchResult {
    pub best: Hyperparams,
    pub candidates: Vec<GridCandidate>,
    /// The winning forest, already fitted on the training rows.
    pub model: RandomForest,
}

impl GridSearchResult {
    pub fn best_candidate(&self) -> &GridCandidate {
        self.candidates
            .iter()
            .find(|c| c.n_estimators == self.best.n_estimators)
            .expect("best is one of the candidates")
    }
}

/// Fits one forest per tree count on the training rows and keeps the one with
/// the highest validation R²; ties go to fewer trees. Candidate `i` is seeded
/// with `seed::derive(master_seed, i)`.
pub fn grid_search(
    train: (&Matrix, &[f64]),
    cv: (&Matrix, &[f64]),
    grid: &[usize],
    base: &Hyperparams,
    master_seed: u64,
) -> Result<GridSearchResult> {
    if grid.is_empty() {
        return Err(Error::InvalidParams("empty grid".into()));
    }
    let mut candidates = Vec::with_capacity(grid.len());
    let mut best: Option<(GridCandidate, RandomForest)> = None;
    for (i, &n_estimators) in grid.iter().enumerate() {
        let params = Hyperparams { n_estimators, ..*base };
        let seed = seed::derive(master_seed, i as u64);
        let forest = fit_forest(train.0, train.1, &params, seed)?;
        let cv_r2 = r2_score(cv.1, &forest.predict_rows(cv.0)?)?;
        let candidate = GridCandidate {
            n_estimators,
            seed,
            cv_r2,
        };
        candidates.push(candidate);
        let better = match &best {
            None => true,
            Some((b, _)) => cv_r2 > b.cv_r2 || (cv_r2 == b.cv_r2 && n_estimators < b.n_estimators),
        };
        if better {
            best = Some((candidate, forest));
        }
    }
    let (_, model) = best.expect("grid is nonempty");
    Ok(GridSearchResult {
        best: *model.params(),
        candidates,
        model,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BaselineScores {
    pub train_r2: f64,
    pub test_r2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSizes {
    pub seed: u64,
    pub train: usize,
    pub test: usize,
    pub cv: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EvalReport {
    pub train_r2: f64,
    pub test_r2: f64,
    pub cv_r2: f64,
    pub n_estimators: usize,
    /// Searched tree counts and their validation scores. A model that was not
    /// grid-searched reports its own tree count as a one-point grid.
    pub grid: Vec<GridCandidate>,
    pub correlations: Vec<FeatureScore>,
    pub importances: Vec<FeatureScore>,
    pub baseline: BaselineScores,
    pub split: SplitSizes,
}

fn r2_on(ds: &CleanDataset, rows: &[usize], predict: impl Fn(&[f64]) -> Result<f64>) -> Result<f64> {
    let truth: Vec<f64> = rows.iter().map(|&i| ds.target[i]).collect();
    let pred = rows
        .iter()
        .map(|&i| predict(ds.features.row(i)))
        .collect::<Result<Vec<_>>>()?;
    r2_score(&truth, &pred)
}

/// Scores a fitted forest on every split slice. The forest is not refitted;
/// the closed-form linear baseline is fitted on the training slice.
pub fn evaluate(
    model: &RandomForest,
    ds: &CleanDataset,
    split: &DatasetSplit,
    grid: Option<&[GridCandidate]>,
) -> Result<EvalReport> {
    let train_r2 = r2_on(ds, &split.train, |x| model.predict_value(x))?;
    let test_r2 = r2_on(ds, &split.test, |x| model.predict_value(x))?;
    let cv_r2 = r2_on(ds, &split.cv, |x| model.predict_value(x))?;

    let train = ds.subset(&split.train);
    let baseline = fit_linear_baseline(&train.features, &train.target)?;
    let baseline = BaselineScores {
        train_r2: r2_on(ds, &split.train, |x| Ok(baseline.predict(x)))?,
        test_r2: r2_on(ds, &split.test, |x| Ok(baseline.predict(x)))?,
    };

    let n_estimators = model.params().n_estimators;
    let grid = match grid {
        Some(g) => g.to_vec(),
        None => vec![GridCandidate {
            n_estimators,
            seed: model.seed(),
            cv_r2,
        }],
    };
    let importances = feature_names()
        .into_iter()
        .zip(model.impurity_importance())
        .map(|(feature, v)| FeatureScore {
            feature,
            value: Some(v),
        })
        .collect();
    Ok(EvalReport {
        train_r2,
        test_r2,
        cv_r2,
        n_estimators,
        grid,
        correlations: feature_correlations(ds),
        importances,
        baseline,
        split: SplitSizes {
            seed: split.seed,
            train: split.train.len(),
            test: split.test.len(),
            cv: split.cv.len(),
        },
    })
}
