//! Minimum-cost rectangular assignment (Kuhn-Munkres, shortest augmenting path form).

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Solves the linear assignment problem on a `rows x cols` cost matrix.
///
/// Returns `(row, col)` pairs sorted by row, covering `min(rows, cols)` rows and
/// columns with minimal total cost. Rectangular input needs no padding: the
/// solver always iterates over the shorter side. An empty matrix yields no pairs.
pub fn hungarian<T: Real>(cost: &[Vec<T>]) -> Result<Vec<(usize, usize)>> {
    let rows = cost.len();
    if rows == 0 {
        return Ok(Vec::new());
    }
    let cols = cost[0].len();
    if cost.iter().any(|r| r.len() != cols) {
        return Err(Error::InvalidConfig("ragged cost matrix".into()));
    }
    if cols == 0 {
        return Ok(Vec::new());
    }
    if cost.iter().flatten().any(|c| !c.is_finite()) {
        return Err(Error::InvalidConfig("non-finite cost".into()));
    }

    let mut pairs = if rows <= cols {
        solve(rows, cols, |i, j| cost[i][j])
    } else {
        solve(cols, rows, |i, j| cost[j][i])
            .into_iter()
            .map(|(c, r)| (r, c))
            .collect()
    };
    pairs.sort_unstable();
    Ok(pairs)
}

/// Total cost of a set of pairs.
pub fn assignment_cost<T: Real>(cost: &[Vec<T>], pairs: &[(usize, usize)]) -> T {
    pairs.iter().fold(T::zero(), |acc, &(i, j)| acc + cost[i][j])
}

// Potentials-based O(n^2 m) solver for n <= m, 1-indexed internally with a
// virtual column 0 holding the row currently being inserted.
fn solve<T: Real>(n: usize, m: usize, a: impl Fn(usize, usize) -> T) -> Vec<(usize, usize)> {
    let inf = T::infinity();
    let mut u = vec![T::zero(); n + 1];
    let mut v = vec![T::zero(); m + 1];
    // p[j]: row matched to column j (0 = free)
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];

    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![inf; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = a(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] = u[p[j]] + delta;
                    v[j] = v[j] - delta;
                } else {
                    minv[j] = minv[j] - delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    (1..=m)
        .filter(|&j| p[j] != 0)
        .map(|j| (p[j] - 1, j - 1))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // Exhaustive minimum over all injective row->col (or col->row) maps.
    fn brute_force(cost: &[Vec<f64>]) -> f64 {
        let rows = cost.len();
        let cols = cost[0].len();
        let k = rows.min(cols);
        let mut best = f64::INFINITY;
        let mut used = vec![false; rows.max(cols)];
        fn rec(
            cost: &[Vec<f64>],
            transposed: bool,
            depth: usize,
            k: usize,
            acc: f64,
            used: &mut Vec<bool>,
            best: &mut f64,
        ) {
            if depth == k {
                *best = best.min(acc);
                return;
            }
            let other = if transposed { cost.len() } else { cost[0].len() };
            for t in 0..other {
                if used[t] {
                    continue;
                }
                used[t] = true;
                let c = if transposed { cost[t][depth] } else { cost[depth][t] };
                rec(cost, transposed, depth + 1, k, acc + c, used, best);
                used[t] = false;
            }
        }
        rec(cost, rows > cols, 0, k, 0.0, &mut used, &mut best);
        best
    }

    fn check_partial_permutation(pairs: &[(usize, usize)], rows: usize, cols: usize) {
        assert_eq!(pairs.len(), rows.min(cols));
        let mut r = vec![false; rows];
        let mut c = vec![false; cols];
        for &(i, j) in pairs {
            assert!(!r[i] && !c[j], "index reused");
            r[i] = true;
            c[j] = true;
        }
    }

    #[test]
    fn identity_pattern() {
        let cost = vec![
            vec![0.0, 1.0, 1.0],
            vec![1.0, 0.0, 1.0],
            vec![1.0, 1.0, 0.0],
        ];
        let pairs = hungarian(&cost).unwrap();
        assert_eq!(pairs, vec![(0, 0), (1, 1), (2, 2)]);
        assert_eq!(assignment_cost(&cost, &pairs), 0.0);
    }

    #[test]
    fn single_cell() {
        assert_eq!(hungarian(&[vec![7.5f32]]).unwrap(), vec![(0, 0)]);
    }

    #[test]
    fn empty_inputs() {
        let empty: Vec<Vec<f64>> = vec![];
        assert!(hungarian(&empty).unwrap().is_empty());
        assert!(hungarian(&[Vec::<f64>::new(), Vec::new()]).unwrap().is_empty());
    }

    #[test]
    fn rejects_bad_input() {
        assert!(hungarian(&[vec![1.0, 2.0], vec![1.0]]).is_err());
        assert!(hungarian(&[vec![f64::NAN]]).is_err());
    }

    #[test]
    fn classic_example() {
        let cost = vec![vec![4.0, 1.0, 3.0], vec![2.0, 0.0, 5.0], vec![3.0, 2.0, 2.0]];
        let pairs = hungarian(&cost).unwrap();
        assert_eq!(assignment_cost(&cost, &pairs), 5.0);
    }

    #[test]
    fn tall_and_wide() {
        let wide = vec![vec![5.0, 1.0, 9.0, 3.0], vec![2.0, 8.0, 1.0, 4.0]];
        let pairs = hungarian(&wide).unwrap();
        check_partial_permutation(&pairs, 2, 4);
        assert_eq!(assignment_cost(&wide, &pairs), 2.0);

        let tall: Vec<Vec<f64>> = (0..4).map(|j| wide.iter().map(|r| r[j]).collect()).collect();
        let pairs = hungarian(&tall).unwrap();
        check_partial_permutation(&pairs, 4, 2);
        assert_eq!(assignment_cost(&tall, &pairs), 2.0);
    }

    #[test]
    fn random_4x4_matches_all_permutations() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let cost: Vec<Vec<f64>> = (0..4)
                .map(|_| (0..4).map(|_| rng.random_range(0..20) as f64).collect())
                .collect();
            let pairs = hungarian(&cost).unwrap();
            assert_eq!(assignment_cost(&cost, &pairs), brute_force(&cost));
        }
    }

    proptest! {
        #[test]
        fn optimal_on_float_matrices(
            rows in 1usize..=6,
            cols in 1usize..=6,
            seed in any::<u64>(),
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let cost: Vec<Vec<f64>> = (0..rows)
                .map(|_| (0..cols).map(|_| rng.random_range(-5.0..5.0)).collect())
                .collect();
            let pairs = hungarian(&cost).unwrap();
            check_partial_permutation(&pairs, rows, cols);
            let got = assignment_cost(&cost, &pairs);
            prop_assert!((got - brute_force(&cost)).abs() < 1e-9);
        }
    }
}
