//! Classic unconstrained DTW with squared-difference local cost.
//!
//! Steps are `(1,0)`, `(0,1)` and `(1,1)`, costs are summed without weights or
//! length normalization, and paths are reported with 1-based indices.

use serde::{Deserialize, Serialize};

use crate::error::{Result, TtwError};
use crate::series::LabeledDataset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DtwResult {
    pub distance: f64,
    /// Index pairs `(i, j)` from `(1, 1)` to `(len(x), len(y))`.
    pub path: Vec<(usize, usize)>,
}

fn check_non_empty(x: &[f64], y: &[f64]) -> Result<()> {
    if x.is_empty() {
        return Err(TtwError::TooShort { index: 1, len: 0 });
    }
    if y.is_empty() {
        return Err(TtwError::TooShort { index: 2, len: 0 });
    }
    Ok(())
}

#[inline]
fn cost(a: f64, b: f64) -> f64 {
    let d = a - b;
    d * d
}

/// DTW distance and one optimal path.
///
/// On backtracking, ties prefer the diagonal predecessor, then the vertical
/// one (advancing `x` only), then the horizontal one.
pub fn dtw_distance(x: &[f64], y: &[f64]) -> Result<DtwResult> {
    check_non_empty(x, y)?;
    let (n, m) = (x.len(), y.len());
    let width = m + 1;
    let mut acc = vec![f64::INFINITY; (n + 1) * width];
    acc[0] = 0.0;
    for i in 1..=n {
        for j in 1..=m {
            let best = acc[(i - 1) * width + j - 1]
                .min(acc[(i - 1) * width + j])
                .min(acc[i * width + j - 1]);
            acc[i * width + j] = cost(x[i - 1], y[j - 1]) + best;
        }
    }

    let mut path = Vec::with_capacity(n + m);
    let (mut i, mut j) = (n, m);
    path.push((i, j));
    while (i, j) != (1, 1) {
        let diag = acc[(i - 1) * width + j - 1];
        let up = acc[(i - 1) * width + j];
        let left = acc[i * width + j - 1];
        if diag <= up && diag <= left {
            i -= 1;
            j -= 1;
        } else if up <= left {
            i -= 1;
        } else {
            j -= 1;
        }
        path.push((i, j));
    }
    path.reverse();
    Ok(DtwResult {
        distance: acc[n * width + m],
        path,
    })
}

/// Distance only, in O(min) memory. Same recurrence as [`dtw_distance`].
pub fn dtw_cost(x: &[f64], y: &[f64]) -> Result<f64> {
    check_non_empty(x, y)?;
    let mut prev = vec![f64::INFINITY; y.len() + 1];
    let mut cur = vec![f64::INFINITY; y.len() + 1];
    prev[0] = 0.0;
    for &xi in x {
        cur[0] = f64::INFINITY;
        for (j, &yj) in y.iter().enumerate() {
            let best = prev[j].min(prev[j + 1]).min(cur[j]);
            cur[j + 1] = cost(xi, yj) + best;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[y.len()])
}

/// `Σ_n DTW(x_n, candidate)` over the dataset.
pub fn dtw_sum(candidate: &[f64], data: &LabeledDataset) -> Result<f64> {
    dtw_sum_rows(candidate, data.series().iter().map(|s| s.values()))
}

/// [`dtw_sum`] over arbitrary rows, which may differ in length.
pub fn dtw_sum_rows<'a>(
    candidate: &[f64],
    rows: impl IntoIterator<Item = &'a [f64]>,
) -> Result<f64> {
    rows.into_iter().map(|r| dtw_cost(r, candidate)).sum()
}

pub const BRUTE_FORCE_MAX_LEN: usize = 10;

/// Minimum path cost by exhaustive enumeration of every monotone path.
/// Exponential; only for lengths up to [`BRUTE_FORCE_MAX_LEN`].
pub fn dtw_brute_force(x: &[f64], y: &[f64]) -> Result<f64> {
    check_non_empty(x, y)?;
    for len in [x.len(), y.len()] {
        if len > BRUTE_FORCE_MAX_LEN {
            return Err(TtwError::BruteForceTooLong { len });
        }
    }
    fn walk(x: &[f64], y: &[f64], i: usize, j: usize, so_far: f64, best: &mut f64) {
        let total = so_far + cost(x[i], y[j]);
        if i + 1 == x.len() && j + 1 == y.len() {
            *best = best.min(total);
            return;
        }
        if i + 1 < x.len() {
            walk(x, y, i + 1, j, total, best);
        }
        if j + 1 < y.len() {
            walk(x, y, i, j + 1, total, best);
        }
        if i + 1 < x.len() && j + 1 < y.len() {
            walk(x, y, i + 1, j + 1, total, best);
        }
    }
    let mut best = f64::INFINITY;
    walk(x, y, 0, 0, 0.0, &mut best);
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identical_series_follow_the_diagonal() {
        let x = [1.0, 3.0, -2.0, 0.5];
        let r = dtw_distance(&x, &x).unwrap();
        assert_eq!(r.distance, 0.0);
        assert_eq!(r.path, vec![(1, 1), (2, 2), (3, 3), (4, 4)]);
    }

    #[test]
    fn hand_checked_distances() {
        assert_eq!(
            dtw_distance(&[1.0, 2.0, 3.0], &[1.0, 3.0])
                .unwrap()
                .distance,
            1.0
        );
        assert_eq!(dtw_brute_force(&[1.0, 2.0, 3.0], &[1.0, 3.0]).unwrap(), 1.0);
        assert_eq!(
            dtw_distance(&[2.5], &[2.5, 2.5, 2.5]).unwrap().distance,
            0.0
        );
        assert_eq!(dtw_brute_force(&[0.0, 1.0], &[1.0, 0.0]).unwrap(), 2.0);
        assert_eq!(
            dtw_distance(&[0.0, 1.0], &[1.0, 0.0]).unwrap().distance,
            2.0
        );
    }

    #[test]
    fn tie_break_prefers_diagonal_then_vertical() {
        // every path has cost 0; backtracking must take the diagonal
        let r = dtw_distance(&[1.0; 3], &[1.0; 3]).unwrap();
        assert_eq!(r.path, vec![(1, 1), (2, 2), (3, 3)]);
        // from (3,2) the diagonal (2,1) and vertical (2,2) tie at 0
        let r = dtw_distance(&[0.0, 0.0, 0.0], &[0.0, 0.0]).unwrap();
        assert_eq!(r.path, vec![(1, 1), (2, 1), (3, 2)]);
        let r = dtw_distance(&[0.0, 5.0, 5.0], &[0.0, 5.0]).unwrap();
        assert_eq!(r.path, vec![(1, 1), (2, 2), (3, 2)]);
    }

    #[test]
    fn dtw_sum_hand_values() {
        let single = LabeledDataset::unlabeled(vec![vec![1.0, 2.0, 3.0]]).unwrap();
        assert_eq!(dtw_sum(&[1.0, 2.0, 3.0], &single).unwrap(), 0.0);
        let twins = LabeledDataset::unlabeled(vec![vec![4.0, 1.0], vec![4.0, 1.0]]).unwrap();
        assert_eq!(dtw_sum(&[4.0, 1.0], &twins).unwrap(), 0.0);
        let rows: [&[f64]; 2] = [&[1.0, 2.0, 3.0], &[1.0, 3.0]];
        assert_eq!(dtw_sum_rows(&[1.0, 3.0], rows).unwrap(), 1.0);
    }

    #[test]
    fn empty_and_oversized_inputs_are_rejected() {
        assert!(dtw_distance(&[], &[1.0]).is_err());
        assert!(dtw_cost(&[1.0], &[]).is_err());
        assert!(matches!(
            dtw_brute_force(&[0.0; 11], &[0.0; 3]),
            Err(TtwError::BruteForceTooLong { len: 11 })
        ));
    }

    fn pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (
            prop::collection::vec(-5.0f64..5.0, 1..=8),
            prop::collection::vec(-5.0f64..5.0, 1..=8),
        )
    }

    proptest! {
        #[test]
        fn dp_matches_brute_force((x, y) in pair()) {
            let dp = dtw_distance(&x, &y).unwrap();
            prop_assert_eq!(dp.distance, dtw_brute_force(&x, &y).unwrap());
            prop_assert_eq!(dp.distance, dtw_cost(&x, &y).unwrap());
        }

        #[test]
        fn distance_is_symmetric((x, y) in pair()) {
            let a = dtw_cost(&x, &y).unwrap();
            let b = dtw_cost(&y, &x).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
        }

        #[test]
        fn path_is_valid_and_sums_to_distance((x, y) in pair()) {
            let r = dtw_distance(&x, &y).unwrap();
            prop_assert_eq!(r.path[0], (1, 1));
            prop_assert_eq!(*r.path.last().unwrap(), (x.len(), y.len()));
            for w in r.path.windows(2) {
                let step = (w[1].0 - w[0].0, w[1].1 - w[0].1);
                prop_assert!(matches!(step, (1, 0) | (0, 1) | (1, 1)));
            }
            let along: f64 = r.path.iter().map(|&(i, j)| cost(x[i - 1], y[j - 1])).sum();
            prop_assert!((along - r.distance).abs() <= 1e-12 * r.distance.max(1.0));
            prop_assert!(r.distance >= 0.0);
        }

        #[test]
        fn bounded_by_lockstep_cost(x in prop::collection::vec(-5.0f64..5.0, 1..20), shift in -1.0f64..1.0) {
            let y: Vec<f64> = x.iter().rev().map(|v| v + shift).collect();
            let lockstep: f64 = x.iter().zip(&y).map(|(a, b)| cost(*a, *b)).sum();
            prop_assert!(dtw_cost(&x, &y).unwrap() <= lockstep + 1e-12);
        }
    }
}
