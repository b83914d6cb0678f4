//! Hodrick-Prescott trend/cycle decomposition.
//!
//! The trend minimizes `Σ(y - τ)² + λ Σ(Δ²τ)²`, i.e. solves
//! `(I + λ DᵀD) τ = y` with `D` the second-difference operator. The system
//! is symmetric positive definite and pentadiagonal; it is factored with a
//! band Cholesky in O(n).
//!
//! We solve for the cycle directly, `(I + λ DᵀD) c = λ DᵀD y`, and take
//! `τ = y - c`. Both are the same system; this route returns an exact zero
//! cycle whenever the second differences of `y` vanish.

use super::CalibError;

pub const DEFAULT_LAMBDA: f64 = 1600.0;
const HALF_BAND: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct HpDecomposition {
    pub trend: Vec<f64>,
    pub cycle: Vec<f64>,
}

pub fn hp_filter(y: &[f64], lambda: f64) -> Result<HpDecomposition, CalibError> {
    let n = y.len();
    if n < 4 {
        return Err(CalibError::SeriesTooShort {
            needed: 4,
            found: n,
        });
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(CalibError::NonPositiveLambda(lambda));
    }

    let second_diff: Vec<f64> = y.windows(3).map(|w| w[0] - 2.0 * w[1] + w[2]).collect();
    let mut rhs = vec![0.0; n];
    for (r, &d) in second_diff.iter().enumerate() {
        rhs[r] += lambda * d;
        rhs[r + 1] -= 2.0 * lambda * d;
        rhs[r + 2] += lambda * d;
    }

    let band = penalty_band(n, lambda);
    let chol = band_cholesky(&band);
    let cycle = band_solve(&chol, &rhs);
    let trend = y.iter().zip(&cycle).map(|(a, c)| a - c).collect();
    Ok(HpDecomposition { trend, cycle })
}

/// Lower band of `I + λ DᵀD`: `band[i][k] = A[i][i-k]`.
fn penalty_band(n: usize, lambda: f64) -> Vec<[f64; HALF_BAND + 1]> {
    const COEF: [f64; 3] = [1.0, -2.0, 1.0];
    let mut band = vec![[0.0; HALF_BAND + 1]; n];
    for row in band.iter_mut() {
        row[0] = 1.0;
    }
    for r in 0..n - 2 {
        for a in 0..3 {
            for b in 0..=a {
                band[r + a][a - b] += lambda * COEF[a] * COEF[b];
            }
        }
    }
    band
}

fn band_cholesky(a: &[[f64; HALF_BAND + 1]]) -> Vec<[f64; HALF_BAND + 1]> {
    let n = a.len();
    let mut l = vec![[0.0; HALF_BAND + 1]; n];
    for i in 0..n {
        for j in i.saturating_sub(HALF_BAND)..=i {
            let mut sum = a[i][i - j];
            for k in i.saturating_sub(HALF_BAND)..j {
                sum -= l[i][i - k] * l[j][j - k];
            }
            l[i][i - j] = if i == j { sum.sqrt() } else { sum / l[j][0] };
        }
    }
    l
}

fn band_solve(l: &[[f64; HALF_BAND + 1]], b: &[f64]) -> Vec<f64> {
    let n = l.len();
    let mut z = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in i.saturating_sub(HALF_BAND)..i {
            s -= l[i][i - k] * z[k];
        }
        z[i] = s / l[i][0];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = z[i];
        for k in i + 1..(i + HALF_BAND + 1).min(n) {
            s -= l[k][k - i] * x[k];
        }
        x[i] = s / l[i][0];
    }
    x
}

/// `Σ(y - τ)² + λ Σ(Δ²τ)²`.
pub fn hp_objective(y: &[f64], trend: &[f64], lambda: f64) -> f64 {
    let fit: f64 = y.iter().zip(trend).map(|(a, b)| (a - b).powi(2)).sum();
    let smooth: f64 = trend
        .windows(3)
        .map(|w| (w[2] - 2.0 * w[1] + w[0]).powi(2))
        .sum();
    fit + lambda * smooth
}
