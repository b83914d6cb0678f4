//! Minimum-cost rectangular assignment.
//!
//! The matrix is padded square with zero-cost dummies and solved once by
//! shortest augmenting paths with row and column potentials, O(n³). Every
//! optimal matching uses only edges that are tight under the final
//! potentials, so the lexicographically smallest optimum (by the column
//! assigned to row 0, then row 1, ...) is extracted from that subgraph by
//! rerouting alternating paths. Results therefore do not depend on the
//! order the solver happens to explore ties.

#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// `(row, col)` pairs sorted by row; `min(n, m)` of them.
    pub pairs: Vec<(usize, usize)>,
    pub total: f64,
}

struct Solution {
    /// Column per row.
    col_of: Vec<usize>,
    /// Potentials, 0-based; `c(i, j) - u[i] - v[j] >= 0`.
    u: Vec<f64>,
    v: Vec<f64>,
}

/// Shortest augmenting path with potentials on an `n x n` matrix.
fn solve(n: usize, c: impl Fn(usize, usize) -> f64) -> Solution {
    // 1-based internally; index 0 is the virtual root
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = c(i0 - 1, j - 1) - u[i0] - v[j];
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
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut col_of = vec![0usize; n];
    for j in 1..=n {
        col_of[row_of[j] - 1] = j - 1;
    }
    Solution {
        col_of,
        u: u[1..].to_vec(),
        v: v[1..].to_vec(),
    }
}

/// Perfect matching on the tight subgraph, with some rows and columns
/// frozen.
struct Tight {
    adj: Vec<Vec<usize>>,
    col_of: Vec<usize>,
    row_of: Vec<usize>,
    row_fixed: Vec<bool>,
    col_fixed: Vec<bool>,
}

impl Tight {
    /// Finds a column for `row` along an alternating path that ends at
    /// `target`, the single free column, avoiding frozen vertices.
    fn augment(&mut self, row: usize, target: usize, seen: &mut [bool]) -> bool {
        for k in 0..self.adj[row].len() {
            let c = self.adj[row][k];
            if seen[c] || self.col_fixed[c] {
                continue;
            }
            seen[c] = true;
            let next = self.row_of[c];
            if c == target || (!self.row_fixed[next] && self.augment(next, target, seen)) {
                self.col_of[row] = c;
                self.row_of[c] = row;
                return true;
            }
        }
        false
    }

    /// Matches `r` to `c` if a perfect matching of the unfrozen part still
    /// exists afterwards, and freezes both.
    fn try_fix(&mut self, r: usize, c: usize) -> bool {
        let old_col = self.col_of[r];
        if old_col != c {
            let displaced = self.row_of[c];
            // tentatively give c to r; `displaced` must reach old_col
            self.row_of[c] = r;
            self.col_fixed[c] = true;
            self.row_fixed[r] = true;
            self.row_of[old_col] = usize::MAX;
            let mut seen = vec![false; self.row_of.len()];
            if !self.augment(displaced, old_col, &mut seen) {
                self.row_of[c] = displaced;
                self.row_of[old_col] = r;
                self.col_fixed[c] = false;
                self.row_fixed[r] = false;
                return false;
            }
            self.col_of[r] = c;
        }
        self.row_fixed[r] = true;
        self.col_fixed[c] = true;
        true
    }
}

/// Minimum-total-cost matching of `min(n, m)` pairs over a rectangular
/// cost matrix given as rows. Costs must be finite.
pub fn hungarian(cost: &[Vec<f64>]) -> Assignment {
    let n = cost.len();
    let m = cost.first().map_or(0, Vec::len);
    assert!(
        cost.iter().all(|r| r.len() == m),
        "cost matrix must be rectangular"
    );
    assert!(
        cost.iter().flatten().all(|c| c.is_finite()),
        "costs must be finite"
    );
    if n == 0 || m == 0 {
        return Assignment {
            pairs: Vec::new(),
            total: 0.0,
        };
    }

    let size = n.max(m);
    let padded = |i: usize, j: usize| if i < n && j < m { cost[i][j] } else { 0.0 };
    let sol = solve(size, padded);
    let scale = cost.iter().flatten().fold(1.0f64, |a, c| a.max(c.abs()));
    let tol = 1e-9 * scale;

    let mut tight = Tight {
        adj: (0..size)
            .map(|i| {
                (0..size)
                    .filter(|&j| padded(i, j) - sol.u[i] - sol.v[j] <= tol)
                    .collect()
            })
            .collect(),
        row_of: {
            let mut r = vec![0; size];
            for (i, &j) in sol.col_of.iter().enumerate() {
                r[j] = i;
            }
            r
        },
        col_of: sol.col_of,
        row_fixed: vec![false; size],
        col_fixed: vec![false; size],
    };

    // real columns come first in each row's tight list, so a row only
    // falls back to a dummy (stays unmatched) when no real column fits
    for r in 0..n {
        let candidates = tight.adj[r].clone();
        let fixed = candidates
            .into_iter()
            .any(|c| !tight.col_fixed[c] && tight.try_fix(r, c));
        debug_assert!(fixed, "the current matching always admits its own edge");
    }

    let pairs: Vec<(usize, usize)> = (0..n)
        .map(|r| (r, tight.col_of[r]))
        .filter(|&(_, c)| c < m)
        .collect();
    debug_assert_eq!(pairs.len(), n.min(m));
    let total = pairs.iter().map(|&(i, j)| cost[i][j]).sum();
    Assignment { pairs, total }
}
