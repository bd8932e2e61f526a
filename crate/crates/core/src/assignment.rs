//! Gated minimum-cost linear assignment.
//!
//! The solver is the shortest-augmenting-path form of the Hungarian method with
//! row and column potentials, O(n^2 m) for an n x m matrix with n <= m. Pairs whose
//! cost exceeds the gate (or is not finite) are forbidden: they are replaced by a
//! sentinel large enough that any matching using one fewer forbidden pair is always
//! cheaper, and filtered out of the result.

use serde::{Deserialize, Serialize};

/// Row-major cost grid with a gate above which a pairing is not allowed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    costs: Vec<f64>,
    gate: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Assignment {
    /// `(row, col)` pairs in increasing row order.
    pub matches: Vec<(usize, usize)>,
    pub unmatched_rows: Vec<usize>,
    pub unmatched_cols: Vec<usize>,
}

impl CostMatrix {
    /// Panics if `costs.len() != rows * cols`.
    pub fn new(rows: usize, cols: usize, costs: Vec<f64>, gate: f64) -> Self {
        assert_eq!(costs.len(), rows * cols, "cost grid must hold rows*cols entries");
        Self {
            rows,
            cols,
            costs,
            gate,
        }
    }

    /// Builds the matrix from a cost function evaluated at every `(row, col)`.
    pub fn from_fn(rows: usize, cols: usize, gate: f64, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut costs = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                costs.push(f(r, c));
            }
        }
        Self::new(rows, cols, costs, gate)
    }

    /// Matrix without a gate; only non-finite entries are forbidden.
    pub fn ungated(rows: usize, cols: usize, costs: Vec<f64>) -> Self {
        Self::new(rows, cols, costs, f64::INFINITY)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn gate(&self) -> f64 {
        self.gate
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.costs[row * self.cols + col]
    }

    pub fn is_allowed(&self, row: usize, col: usize) -> bool {
        let c = self.get(row, col);
        c.is_finite() && c <= self.gate
    }

    /// Sum of the costs of `matches`, accumulated in the given order.
    pub fn total_cost(&self, matches: &[(usize, usize)]) -> f64 {
        matches.iter().map(|&(r, c)| self.get(r, c)).sum()
    }
}

pub fn solve(c: &CostMatrix) -> Assignment {
    let (n, m) = (c.rows, c.cols);
    if n == 0 || m == 0 {
        return Assignment {
            matches: Vec::new(),
            unmatched_rows: (0..n).collect(),
            unmatched_cols: (0..m).collect(),
        };
    }

    let max_allowed = (0..n)
        .flat_map(|r| (0..m).map(move |col| (r, col)))
        .filter(|&(r, col)| c.is_allowed(r, col))
        .map(|(r, col)| c.get(r, col).abs())
        .fold(0.0f64, f64::max);
    let sentinel = (n.min(m) as f64 + 1.0) * (max_allowed + 1.0);

    let transposed = n > m;
    let (rows, cols) = if transposed { (m, n) } else { (n, m) };
    let cost = |r: usize, col: usize| {
        let (i, j) = if transposed { (col, r) } else { (r, col) };
        if c.is_allowed(i, j) {
            c.get(i, j)
        } else {
            sentinel
        }
    };

    let col_owner = hungarian(rows, cols, cost);

    let mut matches: Vec<(usize, usize)> = col_owner
        .iter()
        .enumerate()
        .filter_map(|(col, owner)| owner.map(|r| (r, col)))
        .map(|(r, col)| if transposed { (col, r) } else { (r, col) })
        .filter(|&(i, j)| c.is_allowed(i, j))
        .collect();
    matches.sort_unstable();

    let mut row_used = vec![false; n];
    let mut col_used = vec![false; m];
    for &(i, j) in &matches {
        row_used[i] = true;
        col_used[j] = true;
    }
    Assignment {
        unmatched_rows: (0..n).filter(|&i| !row_used[i]).collect(),
        unmatched_cols: (0..m).filter(|&j| !col_used[j]).collect(),
        matches,
    }
}

/// Minimum-cost assignment of every row to a distinct column (`rows <= cols`).
/// Returns, per column, the row assigned to it.
fn hungarian(rows: usize, cols: usize, cost: impl Fn(usize, usize) -> f64) -> Vec<Option<usize>> {
    debug_assert!(rows <= cols);
    // 1-based indexing; column 0 is the virtual source of each augmenting search.
    let mut u = vec![0.0f64; rows + 1];
    let mut v = vec![0.0f64; cols + 1];
    let mut owner = vec![0usize; cols + 1];
    let mut way = vec![0usize; cols + 1];

    for i in 1..=rows {
        owner[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; cols + 1];
        let mut used = vec![false; cols + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=cols {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=cols {
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

    (1..=cols).map(|j| (owner[j] != 0).then(|| owner[j] - 1)).collect()
}

#[cfg(test)]
pub(crate) mod brute {
    //! Exhaustive reference matcher used by the optimality tests.
    use super::CostMatrix;

    /// Best `(forbidden_count, allowed_cost)` over every injective row->col map of the
    /// smaller side, compared lexicographically. Returns the allowed pairs of the optimum.
    pub fn best(c: &CostMatrix) -> (usize, f64, Vec<(usize, usize)>) {
        let (n, m) = (c.rows(), c.cols());
        let k = n.min(m);
        let mut best: Option<(usize, f64, Vec<(usize, usize)>)> = None;
        let mut chosen = Vec::with_capacity(k);
        let mut used = vec![false; n.max(m)];
        rec(c, n <= m, k, &mut chosen, &mut used, &mut best);
        best.unwrap_or((0, 0.0, Vec::new()))
    }

    fn rec(
        c: &CostMatrix,
        rows_small: bool,
        k: usize,
        chosen: &mut Vec<usize>,
        used: &mut [bool],
        best: &mut Option<(usize, f64, Vec<(usize, usize)>)>,
    ) {
        if chosen.len() == k {
            let mut pairs: Vec<(usize, usize)> = chosen
                .iter()
                .enumerate()
                .map(|(a, &b)| if rows_small { (a, b) } else { (b, a) })
                .collect();
            pairs.sort_unstable();
            let forbidden = pairs.iter().filter(|&&(r, col)| !c.is_allowed(r, col)).count();
            let allowed: Vec<(usize, usize)> = pairs.into_iter().filter(|&(r, col)| c.is_allowed(r, col)).collect();
            let cost = c.total_cost(&allowed);
            let better = match best {
                None => true,
                Some((bf, bc, _)) => forbidden < *bf || (forbidden == *bf && cost < *bc),
            };
            if better {
                *best = Some((forbidden, cost, allowed));
            }
            return;
        }
        let other = if rows_small { c.cols() } else { c.rows() };
        for b in 0..other {
            if !used[b] {
                used[b] = true;
                chosen.push(b);
                rec(c, rows_small, k, chosen, used, best);
                chosen.pop();
                used[b] = false;
            }
        }
    }
}
