//! Maximum-score bipartite matching.
//!
//! The optimum is found with the O(n^3) shortest-augmenting-path Hungarian
//! method on the negated, zero-padded square matrix. Among matchings with the
//! same optimal total, the one whose row-sorted pair sequence is
//! lexicographically smallest is returned: the dual potentials identify the
//! tight edges, and rows are fixed greedily to their smallest tight column
//! that still admits a perfect matching on the tight subgraph.

use super::{CostMatrix, Matching};

struct Solution {
    /// `row_to_col[i]` for the padded square problem.
    row_to_col: Vec<usize>,
    u: Vec<f64>,
    v: Vec<f64>,
}

/// Minimizes `cost` (square, row-major `n x n`).
fn hungarian_min(cost: &[f64], n: usize) -> Solution {
    let inf = f64::INFINITY;
    // 1-based potentials and column owners; index 0 is the virtual column.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![inf; n + 1];
    let mut used = vec![false; n + 1];

    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0usize;
        minv.iter_mut().for_each(|m| *m = inf);
        used.iter_mut().for_each(|b| *b = false);
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut row_to_col = vec![0usize; n];
    for j in 1..=n {
        if owner[j] > 0 {
            row_to_col[owner[j] - 1] = j - 1;
        }
    }
    Solution {
        row_to_col,
        u: u[1..].to_vec(),
        v: v[1..].to_vec(),
    }
}

/// Kuhn's augmenting-path search restricted to `allowed` edges.
fn augment(
    row: usize,
    allowed: &[Vec<usize>],
    col_owner: &mut [Option<usize>],
    seen: &mut [bool],
) -> bool {
    for &c in &allowed[row] {
        if seen[c] {
            continue;
        }
        seen[c] = true;
        if col_owner[c].is_none_or(|r| augment(r, allowed, col_owner, seen)) {
            col_owner[c] = Some(row);
            return true;
        }
    }
    false
}

/// Whether rows `from..n` can be perfectly matched into the columns not in
/// `taken` using only `allowed` edges.
fn completable(from: usize, allowed: &[Vec<usize>], taken: &[bool]) -> bool {
    let n = allowed.len();
    let mut col_owner: Vec<Option<usize>> = vec![None; n];
    let mut seen = vec![false; n];
    let filtered: Vec<Vec<usize>> = allowed
        .iter()
        .map(|cols| cols.iter().copied().filter(|&c| !taken[c]).collect())
        .collect();
    for r in from..n {
        seen.iter_mut().for_each(|s| *s = false);
        if !augment(r, &filtered, &mut col_owner, &mut seen) {
            return false;
        }
    }
    true
}

fn to_matching(row_to_col: &[usize], rows: usize, cols: usize) -> Matching {
    let pairs = row_to_col
        .iter()
        .enumerate()
        .filter(|&(r, &c)| r < rows && c < cols)
        .map(|(r, &c)| (r, c))
        .collect();
    Matching::from_pairs(pairs, rows, cols)
}

/// Optimal assignment maximizing the total fused score. The matching has
/// `min(rows, cols)` pairs.
pub fn solve_assignment(cost: &CostMatrix) -> Matching {
    let (rows, cols) = cost.shape();
    let n = rows.max(cols);
    if rows == 0 || cols == 0 {
        return Matching::from_pairs(Vec::new(), rows, cols);
    }
    let mut square = vec![0.0; n * n];
    let mut scale = 0.0f64;
    for r in 0..rows {
        for c in 0..cols {
            let v = -cost.get(r, c);
            square[r * n + c] = v;
            scale = scale.max(v.abs());
        }
    }
    let sol = hungarian_min(&square, n);
    let baseline = to_matching(&sol.row_to_col, rows, cols);

    let eps = 1e-9 * (1.0 + scale);
    let tight: Vec<Vec<usize>> = (0..n)
        .map(|r| {
            (0..n)
                .filter(|&c| square[r * n + c] - sol.u[r] - sol.v[c] <= eps)
                .collect()
        })
        .collect();
    if tight.iter().all(|t| t.len() == 1) {
        return baseline;
    }

    // Lexicographic refinement over real rows; real columns before padding.
    let mut taken = vec![false; n];
    let mut chosen = vec![usize::MAX; n];
    for r in 0..rows {
        let mut fixed = false;
        for &c in &tight[r] {
            if taken[c] {
                continue;
            }
            taken[c] = true;
            if completable(r + 1, &tight, &taken) {
                chosen[r] = c;
                fixed = true;
                break;
            }
            taken[c] = false;
        }
        if !fixed {
            return baseline;
        }
    }
    let refined = to_matching(&chosen[..rows], rows, cols);
    if refined.total(cost) >= baseline.total(cost) {
        refined
    } else {
        baseline
    }
}

/// Rows in ascending order each take their best still-unused column (ties to
/// the lower column).
pub fn solve_greedy(cost: &CostMatrix) -> Matching {
    let (rows, cols) = cost.shape();
    let mut used = vec![false; cols];
    let mut pairs = Vec::new();
    for r in 0..rows {
        let best =
            (0..cols)
                .filter(|&c| !used[c])
                .fold(None, |best: Option<usize>, c| match best {
                    Some(b) if cost.get(r, b) >= cost.get(r, c) => Some(b),
                    _ => Some(c),
                });
        if let Some(c) = best {
            used[c] = true;
            pairs.push((r, c));
        }
    }
    Matching::from_pairs(pairs, rows, cols)
}
