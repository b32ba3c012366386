//! `best_split` against exhaustive enumeration of every (feature, threshold).

use carprice_core::forest::best_split;
use carprice_core::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn population_variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n
}

/// All admissible candidates as (feature, threshold, reduction), in
/// (feature, threshold) order.
fn enumerate(x: &Matrix, y: &[f64], min_leaf: usize) -> Vec<(usize, f64, f64)> {
    let n = y.len();
    let parent = population_variance(y);
    let mut out = Vec::new();
    for f in 0..x.cols() {
        let mut values: Vec<f64> = x.column(f).collect();
        values.sort_by(f64::total_cmp);
        values.dedup();
        for w in values.windows(2) {
            let t = (w[0] + w[1]) / 2.0;
            let (l, r): (Vec<f64>, Vec<f64>) = (
                (0..n).filter(|&i| x.get(i, f) <= t).map(|i| y[i]).collect(),
                (0..n).filter(|&i| x.get(i, f) > t).map(|i| y[i]).collect(),
            );
            if l.len() < min_leaf || r.len() < min_leaf {
                continue;
            }
            let reduction = parent
                - l.len() as f64 / n as f64 * population_variance(&l)
                - r.len() as f64 / n as f64 * population_variance(&r);
            out.push((f, t, reduction));
        }
    }
    out
}

struct Outcome {
    checked: usize,
    ties: usize,
}

fn check_instance(x: &Matrix, y: &[f64], min_leaf: usize, outcome: &mut Outcome) {
    let rows: Vec<usize> = (0..y.len()).collect();
    let features: Vec<usize> = (0..x.cols()).collect();
    let got = best_split(x, y, &rows, &features, min_leaf);
    let candidates = enumerate(x, y, min_leaf);
    let parent_ss = population_variance(y) * y.len() as f64;
    let tol = 1e-9 * parent_ss.max(f64::MIN_POSITIVE);
    let best = candidates.iter().map(|c| c.2).fold(f64::NEG_INFINITY, f64::max);

    if candidates.is_empty() || best * y.len() as f64 <= tol {
        assert!(got.is_none(), "expected no split, got {got:?}");
        outcome.checked += 1;
        return;
    }
    let got = got.expect("oracle found a positive split");
    let near: Vec<&(usize, f64, f64)> = candidates
        .iter()
        .filter(|c| (best - c.2) * y.len() as f64 <= tol)
        .collect();
    assert!(
        (got.reduction - best).abs() * y.len() as f64 <= tol,
        "reduction {} vs {}",
        got.reduction,
        best
    );
    // Lowest feature, then smallest threshold, among the (near-)maximal set.
    let expected = near[0];
    assert_eq!(
        (got.feature, got.threshold),
        (expected.0, expected.1),
        "near set {near:?}"
    );
    if near.len() > 1 {
        outcome.ties += 1;
    }
    outcome.checked += 1;
}

#[test]
fn matches_exhaustive_enumeration_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5EED);
    let mut outcome = Outcome { checked: 0, ties: 0 };
    for instance in 0..400 {
        let n = rng.random_range(2..=50);
        let d = rng.random_range(1..=9);
        // Alternate continuous data with small-integer data, which produces
        // repeated values and exactly tied reductions.
        let integer = instance % 2 == 0;
        let data: Vec<f64> = (0..n * d)
            .map(|_| {
                if integer {
                    rng.random_range(0..5) as f64
                } else {
                    rng.random_range(-100.0..100.0)
                }
            })
            .collect();
        let x = Matrix::new(n, d, data).unwrap();
        let y: Vec<f64> = (0..n)
            .map(|_| {
                if integer {
                    rng.random_range(0..4) as f64
                } else {
                    rng.random_range(0.0..50_000.0)
                }
            })
            .collect();
        let min_leaf = if instance % 5 == 0 { rng.random_range(1..=3) } else { 1 };
        check_instance(&x, &y, min_leaf, &mut outcome);
    }
    assert!(outcome.checked >= 200);
    assert!(outcome.ties > 0, "no tie cases were exercised");
}

#[test]
fn duplicated_columns_tie_to_lower_index() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut outcome = Outcome { checked: 0, ties: 0 };
    for _ in 0..50 {
        let n = rng.random_range(4..=30);
        let col: Vec<f64> = (0..n).map(|_| rng.random_range(0..10) as f64).collect();
        let mut data = Vec::with_capacity(n * 3);
        for &v in &col {
            data.extend_from_slice(&[v, v, -v]);
        }
        let x = Matrix::new(n, 3, data).unwrap();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(0..100) as f64).collect();
        check_instance(&x, &y, 1, &mut outcome);
    }
    assert!(outcome.ties > 0);
}
