use rand::Rng;

use super::split::{NodeStats, SplitSearch};
use super::Hyperparams;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        n_samples: usize,
        /// Weighted impurity decrease `n_samples · variance reduction`.
        improvement: f64,
    },
    Leaf {
        value: f64,
        n_samples: usize,
    },
}

impl Node {
    pub fn n_samples(&self) -> usize {
        match *self {
            Node::Split { n_samples, .. } | Node::Leaf { n_samples, .. } => n_samples,
        }
    }
}

/// Regression tree stored as a node arena; node 0 is the root. Rows with
/// `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionTree {
    nodes: Vec<Node>,
    n_features: usize,
}

impl RegressionTree {
    /// Checks arena consistency: children exist, come after their parent and
    /// are referenced once, and sample counts add up.
    pub fn from_nodes(nodes: Vec<Node>, n_features: usize) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::MalformedModel("tree without nodes".into()));
        }
        let mut referenced = vec![false; nodes.len()];
        for (i, node) in nodes.iter().enumerate() {
            if let Node::Split {
                feature,
                left,
                right,
                n_samples,
                ..
            } = *node
            {
                if feature >= n_features {
                    return Err(Error::MalformedModel(format!("feature index {feature} out of range")));
                }
                for child in [left, right] {
                    if child <= i || child >= nodes.len() || referenced[child] {
                        return Err(Error::MalformedModel(format!("bad child index {child} at node {i}")));
                    }
                    referenced[child] = true;
                }
                if nodes[left].n_samples() + nodes[right].n_samples() != n_samples {
                    return Err(Error::MalformedModel(format!(
                        "sample counts do not add up at node {i}"
                    )));
                }
            }
        }
        if referenced.iter().skip(1).any(|r| !r) {
            return Err(Error::MalformedModel("unreachable tree node".into()));
        }
        Ok(Self { nodes, n_features })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { value, .. } => return value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => i = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub fn depth(&self) -> usize {
        let mut depth = vec![0usize; self.nodes.len()];
        for (i, node) in self.nodes.iter().enumerate() {
            if let Node::Split { left, right, .. } = *node {
                depth[left] = depth[i] + 1;
                depth[right] = depth[i] + 1;
            }
        }
        depth.into_iter().max().unwrap_or(0)
    }
}

/// Row indices sorted by `(value, row)` for every feature column.
pub(crate) struct Presorted {
    columns: Vec<Vec<u32>>,
}

impl Presorted {
    pub fn new(x: &Matrix) -> Self {
        let columns = (0..x.cols())
            .map(|j| {
                let mut order: Vec<u32> = (0..x.rows() as u32).collect();
                order.sort_by(|&a, &b| x.get(a as usize, j).total_cmp(&x.get(b as usize, j)).then(a.cmp(&b)));
                order
            })
            .collect();
        Self { columns }
    }
}

/// Per-row multiplicities of a row sample (bootstrap draws may repeat rows).
pub(crate) fn multiplicities(n: usize, rows: &[usize]) -> Vec<u32> {
    let mut w = vec![0u32; n];
    for &r in rows {
        w[r] += 1;
    }
    w
}

struct Task {
    node: usize,
    start: usize,
    end: usize,
    depth: usize,
}

/// Grows one tree on the rows with nonzero weight. Every feature keeps its
/// own sorted copy of the node's rows; splitting a node stably partitions all
/// copies, so no re-sorting happens below the root.
pub(crate) fn grow_tree<R: Rng + ?Sized>(
    x: &Matrix,
    y: &[f64],
    weights: &[u32],
    presorted: &Presorted,
    params: &Hyperparams,
    rng: &mut R,
) -> RegressionTree {
    let n_features = x.cols();
    let mut lists: Vec<Vec<u32>> = presorted
        .columns
        .iter()
        .map(|col| col.iter().copied().filter(|&r| weights[r as usize] > 0).collect())
        .collect();
    let n_rows = lists.first().map_or(0, Vec::len);
    let k = params.features_per_split(n_features);
    let min_leaf = params.min_samples_leaf.max(1);

    let mut goes_left = vec![false; x.rows()];
    let mut scratch: Vec<u32> = Vec::with_capacity(n_rows);
    let mut nodes = vec![Node::Leaf {
        value: 0.0,
        n_samples: 0,
    }];
    let mut stack = vec![Task {
        node: 0,
        start: 0,
        end: n_rows,
        depth: 0,
    }];

    while let Some(Task {
        node,
        start,
        end,
        depth,
    }) = stack.pop()
    {
        let members = &lists[0][start..end];
        let targets = members.iter().map(|&r| (y[r as usize], f64::from(weights[r as usize])));
        let stats = NodeStats::from_targets(targets.clone());
        let n_samples = stats.weight as usize;
        let (lo, hi) = targets.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (v, _)| {
            (lo.min(v), hi.max(v))
        });

        let splittable = n_samples >= 2 * min_leaf
            && params.max_depth.is_none_or(|d| depth < d)
            && lo < hi
            && stats.sum_squares > 0.0;
        let mut found = None;
        if splittable {
            let mut candidates: Vec<usize> = if k < n_features {
                rand::seq::index::sample(rng, n_features, k).into_vec()
            } else {
                (0..n_features).collect()
            };
            candidates.sort_unstable();
            let mut search = SplitSearch::new(stats, min_leaf);
            for &f in &candidates {
                let items = lists[f][start..end].iter().map(|&r| {
                    let r = r as usize;
                    (x.get(r, f), y[r], f64::from(weights[r]))
                });
                search.scan(f, items);
            }
            if let Some((feature, threshold, n_left)) = search.best {
                found = Some((feature, threshold, n_left, search.improvement()));
            }
        }

        let Some((feature, threshold, n_left, improvement)) = found else {
            let mean = if lo == hi { lo } else { stats.mean.clamp(lo, hi) };
            nodes[node] = Node::Leaf { value: mean, n_samples };
            continue;
        };

        let split_at = start + n_left;
        for &r in &lists[feature][start..end] {
            goes_left[r as usize] = false;
        }
        for &r in &lists[feature][start..split_at] {
            goes_left[r as usize] = true;
        }
        for (f, list) in lists.iter_mut().enumerate() {
            if f == feature {
                continue;
            }
            scratch.clear();
            let segment = &mut list[start..end];
            scratch.extend(segment.iter().copied().filter(|&r| !goes_left[r as usize]));
            let mut write = 0;
            for i in 0..segment.len() {
                let r = segment[i];
                if goes_left[r as usize] {
                    segment[write] = r;
                    write += 1;
                }
            }
            debug_assert_eq!(write, n_left);
            segment[write..].copy_from_slice(&scratch);
        }

        let left = nodes.len();
        let right = left + 1;
        let placeholder = Node::Leaf {
            value: 0.0,
            n_samples: 0,
        };
        nodes.push(placeholder.clone());
        nodes.push(placeholder);
        nodes[node] = Node::Split {
            feature,
            threshold,
            left,
            right,
            n_samples,
            improvement,
        };
        stack.push(Task {
            node: right,
            start: split_at,
            end,
            depth: depth + 1,
        });
        stack.push(Task {
            node: left,
            start,
            end: split_at,
            depth: depth + 1,
        });
    }

    RegressionTree { nodes, n_features }
}

/// Fits a single tree on `rows` (repeats allowed). `rng` drives the
/// per-split feature subsampling when `max_features` is below the column count.
pub fn fit_tree<R: Rng + ?Sized>(
    x: &Matrix,
    y: &[f64],
    params: &Hyperparams,
    rows: &[usize],
    rng: &mut R,
) -> Result<RegressionTree> {
    if y.len() != x.rows() {
        return Err(Error::LengthMismatch(x.rows(), y.len()));
    }
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if let Some(&bad) = rows.iter().find(|&&r| r >= x.rows()) {
        return Err(Error::InvalidParams(format!("row index {bad} out of range")));
    }
    params.validate(x.cols())?;
    let presorted = Presorted::new(x);
    let weights = multiplicities(x.rows(), rows);
    Ok(grow_tree(x, y, &weights, &presorted, params, rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forest::best_split;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(1)
    }

    fn unbootstrapped() -> Hyperparams {
        Hyperparams {
            n_estimators: 1,
            bootstrap: false,
            ..Hyperparams::default()
        }
    }

    fn random_data(n: usize, d: usize, seed: u64) -> (Matrix, Vec<f64>) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..n * d).map(|_| r.random_range(0..20) as f64).collect();
        let y = (0..n).map(|_| r.random::<f64>() * 1000.0).collect();
        (Matrix::new(n, d, data).unwrap(), y)
    }

    #[test]
    fn single_row_is_a_leaf() {
        let x = Matrix::from_rows(&[[3.0, 4.0]]).unwrap();
        let t = fit_tree(&x, &[7.5], &unbootstrapped(), &[0], &mut rng()).unwrap();
        assert_eq!(
            t.nodes(),
            &[Node::Leaf {
                value: 7.5,
                n_samples: 1
            }]
        );
    }

    #[test]
    fn min_samples_leaf_equal_to_n_gives_mean() {
        let (x, y) = random_data(12, 3, 5);
        let params = Hyperparams {
            min_samples_leaf: 12,
            ..unbootstrapped()
        };
        let t = fit_tree(&x, &y, &params, &(0..12).collect::<Vec<_>>(), &mut rng()).unwrap();
        assert_eq!(t.nodes().len(), 1);
        let mean = y.iter().sum::<f64>() / 12.0;
        assert!((t.predict(x.row(0)) - mean).abs() < 1e-9);
    }

    #[test]
    fn unique_rows_are_memorised() {
        let x = Matrix::new(50, 2, (0..100).map(|v| ((v * 37) % 101) as f64).collect()).unwrap();
        let y: Vec<f64> = (0..50).map(|i| (i as f64).sin() * 1e4).collect();
        let rows: Vec<usize> = (0..50).collect();
        let t = fit_tree(&x, &y, &unbootstrapped(), &rows, &mut rng()).unwrap();
        for (i, row) in x.iter_rows().enumerate() {
            assert_eq!(t.predict(row), y[i]);
        }
    }

    #[test]
    fn root_split_matches_best_split() {
        for seed in 0..20 {
            let (x, y) = random_data(40, 4, seed);
            let rows: Vec<usize> = (0..40).collect();
            let t = fit_tree(&x, &y, &unbootstrapped(), &rows, &mut rng()).unwrap();
            let expected = best_split(&x, &y, &rows, &[0, 1, 2, 3], 1).unwrap();
            match t.nodes()[0] {
                Node::Split { feature, threshold, .. } => {
                    assert_eq!((feature, threshold), (expected.feature, expected.threshold));
                }
                ref other => panic!("root is {other:?}"),
            }
        }
    }

    #[test]
    fn structure_invariants_hold() {
        let (x, y) = random_data(200, 3, 9);
        let rows: Vec<usize> = (0..200).map(|i| (i * 7) % 200).collect();
        let params = Hyperparams {
            min_samples_leaf: 3,
            max_depth: Some(6),
            max_features: Some(2),
            ..unbootstrapped()
        };
        let t = fit_tree(&x, &y, &params, &rows, &mut rng()).unwrap();
        assert!(t.depth() <= 6);
        let rebuilt = RegressionTree::from_nodes(t.nodes().to_vec(), 3).unwrap();
        assert_eq!(rebuilt, t);
        for node in t.nodes() {
            if let Node::Leaf { n_samples, .. } = node {
                assert!(*n_samples >= 3);
            }
        }
    }

    #[test]
    fn duplicated_rows_count_as_samples() {
        let x = Matrix::from_rows(&[[0.0], [1.0]]).unwrap();
        let y = [0.0, 30.0];
        let t = fit_tree(&x, &y, &unbootstrapped(), &[0, 0, 0, 1], &mut rng()).unwrap();
        assert_eq!(t.nodes()[0].n_samples(), 4);
        let params = Hyperparams {
            max_depth: Some(0),
            ..unbootstrapped()
        };
        let stump = fit_tree(&x, &y, &params, &[0, 0, 0, 1], &mut rng()).unwrap();
        assert_eq!(stump.predict(&[0.0]), 7.5);
    }

    #[test]
    fn empty_rows_is_an_error() {
        let x = Matrix::from_rows(&[[0.0]]).unwrap();
        assert!(fit_tree(&x, &[1.0], &unbootstrapped(), &[], &mut rng()).is_err());
    }

    #[test]
    fn corrupt_arena_is_rejected() {
        let nodes = vec![
            Node::Split {
                feature: 0,
                threshold: 0.5,
                left: 1,
                right: 1,
                n_samples: 2,
                improvement: 1.0,
            },
            Node::Leaf {
                value: 1.0,
                n_samples: 1,
            },
        ];
        assert!(RegressionTree::from_nodes(nodes, 1).is_err());
    }
}
