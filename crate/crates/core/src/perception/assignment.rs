//! Minimum-cost assignment (Kuhn-Munkres / Hungarian algorithm).

/// Solve the rectangular assignment problem for a finite, non-negative cost
/// matrix. Returns the optimal maximal matching as `(row, col)` pairs sorted
/// by row; rectangular inputs are padded internally with a large constant,
/// so exactly `min(rows, cols)` pairs come back.
///
/// O(n^3) shortest-augmenting-path formulation with row/column potentials.
pub fn assign_min_cost(cost: &[Vec<f64>]) -> Vec<(usize, usize)> {
    let rows = cost.len();
    if rows == 0 {
        return Vec::new();
    }
    let cols = cost[0].len();
    assert!(cost.iter().all(|r| r.len() == cols), "irregular cost matrix");
    if cols == 0 {
        return Vec::new();
    }
    for row in cost {
        for &c in row {
            assert!(c.is_finite() && c >= 0.0, "costs must be finite and non-negative");
        }
    }

    let dim = rows.max(cols);
    const PAD: f64 = 1e6;
    let at = |i: usize, j: usize| -> f64 {
        // 1-based into the virtually padded square matrix
        let (r, c) = (i - 1, j - 1);
        if r < rows && c < cols {
            cost[r][c]
        } else {
            PAD
        }
    };

    // Potentials u (rows), v (cols); p[j] = row matched to column j; 0 = free.
    let mut u = vec![0.0f64; dim + 1];
    let mut v = vec![0.0f64; dim + 1];
    let mut p = vec![0usize; dim + 1];
    let mut way = vec![0usize; dim + 1];

    for i in 1..=dim {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; dim + 1];
        let mut used = vec![false; dim + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=dim {
                if !used[j] {
                    let cur = at(i0, j) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=dim {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        // Augment along the alternating path back to the root.
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut out: Vec<(usize, usize)> = (1..=dim)
        .filter(|&j| p[j] >= 1 && p[j] <= rows && j <= cols)
        .map(|j| (p[j] - 1, j - 1))
        .collect();
    out.sort_unstable();
    out
}

/// Total cost of an assignment, summed in row order.
pub fn assignment_cost(cost: &[Vec<f64>], assignment: &[(usize, usize)]) -> f64 {
    let mut sorted: Vec<_> = assignment.to_vec();
    sorted.sort_unstable();
    sorted.iter().map(|&(r, c)| cost[r][c]).sum()
}

#[cfg(test)]
pub(crate) fn brute_force_min_cost(cost: &[Vec<f64>]) -> f64 {
    // Exhaustive minimum over all maximal matchings of a square matrix.
    let n = cost.len();
    assert!(n > 0 && cost.iter().all(|r| r.len() == n));
    let mut cols: Vec<usize> = (0..n).collect();
    let mut best = f64::INFINITY;
    permute(&mut cols, 0, &mut |perm| {
        let total: f64 = perm.iter().enumerate().map(|(r, &c)| cost[r][c]).sum();
        if total < best {
            best = total;
        }
    });
    best
}

#[cfg(test)]
fn permute(items: &mut Vec<usize>, k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == items.len() {
        visit(items);
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permute(items, k + 1, visit);
        items.swap(k, i);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_cell() {
        assert_eq!(assign_min_cost(&[vec![0.0]]), vec![(0, 0)]);
    }

    #[test]
    fn two_by_two_prefers_swap() {
        let cost = vec![vec![1.0, 2.0], vec![2.0, 4.0]];
        let a = assign_min_cost(&cost);
        assert_eq!(a, vec![(0, 1), (1, 0)]);
        // identity costs 5, swap costs 4
        assert_eq!(assignment_cost(&cost, &a), 4.0);
    }

    #[test]
    fn rectangular_matches_min_side() {
        let cost = vec![vec![5.0, 1.0, 3.0], vec![2.0, 7.0, 4.0]];
        let a = assign_min_cost(&cost);
        assert_eq!(a.len(), 2);
        assert_eq!(assignment_cost(&cost, &a), 3.0); // (0,1)+(1,0)
        // tall matrix: one row stays unassigned
        let tall = vec![vec![1.0], vec![0.5], vec![2.0]];
        let a = assign_min_cost(&tall);
        assert_eq!(a, vec![(1, 0)]);
    }

    #[test]
    fn matches_exhaustive_minimum_on_random_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for n in 2..=6 {
            for _ in 0..200 {
                let cost: Vec<Vec<f64>> =
                    (0..n).map(|_| (0..n).map(|_| rng.random_range(0.0..1.0)).collect()).collect();
                let a = assign_min_cost(&cost);
                assert_eq!(a.len(), n);
                let total = assignment_cost(&cost, &a);
                let best = brute_force_min_cost(&cost);
                assert_eq!(total, best, "n = {n}");
            }
        }
    }

    #[test]
    #[should_panic(expected = "non-negative")]
    fn rejects_negative_costs() {
        assign_min_cost(&[vec![-1.0]]);
    }
}
