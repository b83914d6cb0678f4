use super::CalibError;

/// Monotone, continuous alignment between `reference` (i) and `test` (j).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WarpPath(Vec<(usize, usize)>);

impl WarpPath {
    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Starts at (0,0), ends at (n-1,m-1), and every step advances i, j or
    /// both by exactly one.
    pub fn is_valid_for(&self, n: usize, m: usize) -> bool {
        let p = &self.0;
        if n == 0 || m == 0 || p.first() != Some(&(0, 0)) || p.last() != Some(&(n - 1, m - 1)) {
            return false;
        }
        p.windows(2).all(|w| {
            let di = w[1].0 as isize - w[0].0 as isize;
            let dj = w[1].1 as isize - w[0].1 as isize;
            matches!((di, dj), (1, 0) | (0, 1) | (1, 1))
        })
    }

    pub fn is_diagonal(&self) -> bool {
        self.0.iter().all(|&(i, j)| i == j)
    }

    #[cfg(test)]
    pub(crate) fn from_pairs(pairs: Vec<(usize, usize)>) -> Self {
        Self(pairs)
    }
}

/// Classic DTW with `|a - b|` cost and no window constraint.
///
/// `D[i][j] = cost(i,j) + min(D[i-1][j], D[i][j-1], D[i-1][j-1])`. The
/// returned path backtracks from the far corner preferring the diagonal
/// predecessor, then the one that advanced `i`, on ties.
pub fn dtw(reference: &[f64], test: &[f64]) -> Result<(f64, WarpPath), CalibError> {
    let n = reference.len();
    let m = test.len();
    if n == 0 || m == 0 {
        return Err(CalibError::EmptyInput);
    }
    let mut d = vec![0.0f64; n * m];
    let at = |i: usize, j: usize| i * m + j;
    for i in 0..n {
        for j in 0..m {
            let cost = (reference[i] - test[j]).abs();
            let best = match (i, j) {
                (0, 0) => 0.0,
                (0, _) => d[at(0, j - 1)],
                (_, 0) => d[at(i - 1, 0)],
                _ => d[at(i - 1, j - 1)]
                    .min(d[at(i - 1, j)])
                    .min(d[at(i, j - 1)]),
            };
            d[at(i, j)] = cost + best;
        }
    }

    let mut path = vec![(n - 1, m - 1)];
    let (mut i, mut j) = (n - 1, m - 1);
    while (i, j) != (0, 0) {
        (i, j) = if i == 0 {
            (0, j - 1)
        } else if j == 0 {
            (i - 1, 0)
        } else {
            let diag = d[at(i - 1, j - 1)];
            let up = d[at(i - 1, j)];
            let left = d[at(i, j - 1)];
            if diag <= up && diag <= left {
                (i - 1, j - 1)
            } else if up <= left {
                (i - 1, j)
            } else {
                (i, j - 1)
            }
        };
        path.push((i, j));
    }
    path.reverse();
    Ok((d[at(n - 1, m - 1)], WarpPath(path)))
}

/// For each reference index, the mean of the test values the path matches
/// to it. The path must be valid for `(reference_len, test.len())`.
pub fn warp_onto_reference(reference_len: usize, test: &[f64], path: &WarpPath) -> Vec<f64> {
    debug_assert!(path.is_valid_for(reference_len, test.len()));
    let mut sums = vec![0.0; reference_len];
    let mut counts = vec![0usize; reference_len];
    for &(i, j) in path.pairs() {
        sums[i] += test[j];
        counts[i] += 1;
    }
    sums.iter()
        .zip(&counts)
        .map(|(s, &c)| s / c as f64)
        .collect()
}
