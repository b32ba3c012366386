use crate::matrix::Matrix;

/// Relative tolerance (against the node's total sum of squares) under which two
/// split scores are considered tied.
pub(crate) const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCandidate {
    pub feature: usize,
    pub threshold: f64,
    /// Parent variance minus the size-weighted child variances.
    pub reduction: f64,
}

/// Weighted target statistics of one node, centred on the node mean.
#[derive(Debug, Clone, Copy)]
pub(crate) struct NodeStats {
    pub weight: f64,
    pub mean: f64,
    /// Σ w·(y − mean); zero up to rounding.
    pub centred_sum: f64,
    /// Σ w·(y − mean)².
    pub sum_squares: f64,
}

impl NodeStats {
    pub fn from_targets(items: impl Iterator<Item = (f64, f64)> + Clone) -> Self {
        let (weight, sum) = items.clone().fold((0.0, 0.0), |(w, s), (y, wi)| (w + wi, s + wi * y));
        let mean = sum / weight;
        let (centred_sum, sum_squares) = items.fold((0.0, 0.0), |(s, ss), (y, wi)| {
            let d = y - mean;
            (s + wi * d, ss + wi * d * d)
        });
        Self {
            weight,
            mean,
            centred_sum,
            sum_squares,
        }
    }
}

/// Running best split at one node. Split quality is tracked through the proxy
/// `S_L²/W_L + S_R²/W_R` on centred targets, which differs from the weighted
/// variance reduction only by terms constant within the node.
pub(crate) struct SplitSearch {
    stats: NodeStats,
    min_leaf: f64,
    baseline: f64,
    eps: f64,
    best_proxy: f64,
    pub best: Option<(usize, f64, usize)>,
}

impl SplitSearch {
    pub fn new(stats: NodeStats, min_samples_leaf: usize) -> Self {
        let baseline = stats.centred_sum * stats.centred_sum / stats.weight;
        Self {
            stats,
            min_leaf: min_samples_leaf as f64,
            baseline,
            eps: TIE_TOLERANCE * stats.sum_squares,
            best_proxy: baseline,
            best: None,
        }
    }

    /// Scans one feature. `items` yields `(x, y, weight)` sorted by ascending `x`.
    /// A candidate replaces the incumbent only if it is better by more than the
    /// tie tolerance, so earlier features and smaller thresholds win ties.
    pub fn scan<I>(&mut self, feature: usize, items: I)
    where
        I: IntoIterator<Item = (f64, f64, f64)>,
    {
        let mut items = items.into_iter().peekable();
        let (mut w_left, mut s_left) = (0.0, 0.0);
        let mut position = 0;
        while let Some((x, y, w)) = items.next() {
            w_left += w;
            s_left += w * (y - self.stats.mean);
            position += 1;
            let Some(&(next_x, _, _)) = items.peek() else {
                break;
            };
            // Written negated so NaN never opens a threshold.
            #[allow(clippy::neg_cmp_op_on_partial_ord)]
            if !(x < next_x) {
                continue;
            }
            let w_right = self.stats.weight - w_left;
            if w_left < self.min_leaf || w_right < self.min_leaf {
                continue;
            }
            let s_right = self.stats.centred_sum - s_left;
            let proxy = s_left * s_left / w_left + s_right * s_right / w_right;
            if proxy > self.best_proxy + self.eps {
                self.best_proxy = proxy;
                self.best = Some((feature, midpoint(x, next_x), position));
            }
        }
    }

    /// Weighted impurity decrease `W · reduction` of the incumbent.
    pub fn improvement(&self) -> f64 {
        self.best_proxy - self.baseline
    }

    pub fn candidate(&self) -> Option<SplitCandidate> {
        self.best.map(|(feature, threshold, _)| SplitCandidate {
            feature,
            threshold,
            reduction: self.improvement() / self.stats.weight,
        })
    }
}

/// Threshold `t` with `lo <= t < hi`, as close to the midpoint as representable.
pub(crate) fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    if mid < hi && mid >= lo {
        mid
    } else {
        lo
    }
}

/// Best variance-reducing split of `rows` over the candidate `features`.
///
/// Returns `None` when no threshold gives a strictly positive reduction while
/// leaving at least `min_samples_leaf` rows on each side.
pub fn best_split(
    x: &Matrix,
    y: &[f64],
    rows: &[usize],
    features: &[usize],
    min_samples_leaf: usize,
) -> Option<SplitCandidate> {
    if rows.len() < 2 {
        return None;
    }
    let stats = NodeStats::from_targets(rows.iter().map(|&r| (y[r], 1.0)));
    if stats.sum_squares <= 0.0 {
        return None;
    }
    let mut features = features.to_vec();
    features.sort_unstable();
    features.dedup();

    let mut search = SplitSearch::new(stats, min_samples_leaf.max(1));
    let mut column: Vec<(f64, f64, f64)> = Vec::with_capacity(rows.len());
    for f in features {
        column.clear();
        column.extend(rows.iter().map(|&r| (x.get(r, f), y[r], 1.0)));
        column.sort_by(|a, b| a.0.total_cmp(&b.0));
        search.scan(f, column.iter().copied());
    }
    search.candidate()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_feature(xs: &[f64]) -> Matrix {
        Matrix::new(xs.len(), 1, xs.to_vec()).unwrap()
    }

    #[test]
    fn constant_target_has_no_split() {
        let x = single_feature(&[1.0, 2.0, 3.0]);
        assert_eq!(best_split(&x, &[5.0; 3], &[0, 1, 2], &[0], 1), None);
    }

    #[test]
    fn two_point_split() {
        let x = single_feature(&[1.0, 2.0]);
        let s = best_split(&x, &[0.0, 10.0], &[0, 1], &[0], 1).unwrap();
        assert_eq!(s.feature, 0);
        assert_eq!(s.threshold, 1.5);
        assert!((s.reduction - 25.0).abs() < 1e-12);
    }

    #[test]
    fn ties_prefer_lower_feature_then_smaller_threshold() {
        // Both columns order the rows identically.
        let x = Matrix::from_rows(&[[1.0, 10.0], [2.0, 20.0], [3.0, 30.0], [4.0, 40.0]]).unwrap();
        let s = best_split(&x, &[0.0, 0.0, 5.0, 5.0], &[0, 1, 2, 3], &[1, 0], 1).unwrap();
        assert_eq!((s.feature, s.threshold), (0, 2.5));

        // Symmetric target: thresholds 1.5 and 2.5 give the same reduction.
        let x = single_feature(&[1.0, 2.0, 3.0]);
        let s = best_split(&x, &[0.0, 1.0, 0.0], &[0, 1, 2], &[0], 1).unwrap();
        assert_eq!(s.threshold, 1.5);
    }

    #[test]
    fn min_samples_leaf_is_honoured() {
        let x = single_feature(&[1.0, 2.0, 3.0, 4.0]);
        let y = [100.0, 0.0, 0.0, 0.0];
        assert_eq!(best_split(&x, &y, &[0, 1, 2, 3], &[0], 1).unwrap().threshold, 1.5);
        assert_eq!(best_split(&x, &y, &[0, 1, 2, 3], &[0], 2).unwrap().threshold, 2.5);
        assert_eq!(best_split(&x, &y, &[0, 1, 2, 3], &[0], 3), None);
    }

    #[test]
    fn duplicate_feature_values_are_never_separated() {
        let x = single_feature(&[1.0, 1.0, 1.0]);
        assert_eq!(best_split(&x, &[1.0, 2.0, 3.0], &[0, 1, 2], &[0], 1), None);
    }

    #[test]
    fn midpoint_stays_below_upper_value() {
        let lo = 1.0f64;
        let hi = f64::from_bits(lo.to_bits() + 1);
        let t = midpoint(lo, hi);
        assert!(lo <= t && t < hi);
        assert_eq!(midpoint(2.0, 4.0), 3.0);
    }
}
