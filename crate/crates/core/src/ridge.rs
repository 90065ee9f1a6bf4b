//! Weighted ridge regression by direct normal-equations solve.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct RidgeFit<T> {
    pub coefficients: Vec<T>,
    pub intercept: T,
}

/// Fits `y ≈ b + X·β` minimizing `Σ ŵᵢ (yᵢ − b − xᵢ·β)² + α‖β‖²`.
///
/// `design` is row-major `n × d`. Weights are normalized to `Σ ŵ = 1`, so
/// replicating the whole sample set leaves the fit unchanged. The intercept
/// is not penalized.
pub fn weighted_ridge<T: Scalar>(design: &[T], d: usize, y: &[T], weights: &[T], alpha: T) -> Result<RidgeFit<T>> {
    let n = y.len();
    if d == 0 || design.len() != n * d || weights.len() != n {
        return Err(Error::Input(format!(
            "ridge: design has {} values for {n} rows × {d} columns, {} weights",
            design.len(),
            weights.len()
        )));
    }
    if alpha < T::zero() {
        return Err(Error::Input("ridge strength must be non-negative".into()));
    }
    let total: T = weights.iter().copied().sum();
    if !(total > T::zero()) || weights.iter().any(|&w| w < T::zero()) {
        return Err(Error::Input("ridge weights must be non-negative with a positive sum".into()));
    }

    let mut x_mean = vec![T::zero(); d];
    let mut y_mean = T::zero();
    for ((row, &yi), &wi) in design.chunks(d).zip(y).zip(weights) {
        let w = wi / total;
        for (m, &x) in x_mean.iter_mut().zip(row) {
            *m += w * x;
        }
        y_mean += w * yi;
    }

    let mut gram = vec![T::zero(); d * d];
    let mut rhs = vec![T::zero(); d];
    let mut centered = vec![T::zero(); d];
    for ((row, &yi), &wi) in design.chunks(d).zip(y).zip(weights) {
        let w = wi / total;
        for ((c, &x), &m) in centered.iter_mut().zip(row).zip(&x_mean) {
            *c = x - m;
        }
        let yc = yi - y_mean;
        for a in 0..d {
            let wa = w * centered[a];
            rhs[a] += wa * yc;
            for b in 0..=a {
                gram[a * d + b] += wa * centered[b];
            }
        }
    }
    for a in 0..d {
        gram[a * d + a] += alpha;
        for b in 0..a {
            gram[b * d + a] = gram[a * d + b];
        }
    }

    let coefficients = cholesky_solve(&mut gram, d, &rhs)?;
    let intercept = y_mean - coefficients.iter().zip(&x_mean).map(|(&c, &m)| c * m).sum::<T>();
    Ok(RidgeFit { coefficients, intercept })
}

/// Solves `A x = b` for symmetric positive definite `A` (overwritten by its factor).
pub fn cholesky_solve<T: Scalar>(a: &mut [T], d: usize, b: &[T]) -> Result<Vec<T>> {
    let scale = (0..d).map(|j| a[j * d + j].abs()).fold(T::zero(), T::max);
    let floor = T::epsilon() * T::lit(d as f64) * scale;
    for j in 0..d {
        let mut diag = a[j * d + j];
        for k in 0..j {
            diag -= a[j * d + k] * a[j * d + k];
        }
        if !(diag > floor) {
            return Err(Error::Internal(format!("normal matrix is not positive definite (pivot {j})")));
        }
        let diag = diag.sqrt();
        a[j * d + j] = diag;
        for i in j + 1..d {
            let mut v = a[i * d + j];
            for k in 0..j {
                v -= a[i * d + k] * a[j * d + k];
            }
            a[i * d + j] = v / diag;
        }
    }
    let mut z = b.to_vec();
    for i in 0..d {
        for k in 0..i {
            z[i] = z[i] - a[i * d + k] * z[k];
        }
        z[i] = z[i] / a[i * d + i];
    }
    for i in (0..d).rev() {
        for k in i + 1..d {
            z[i] = z[i] - a[k * d + i] * z[k];
        }
        z[i] = z[i] / a[i * d + i];
    }
    Ok(z)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Gauss-Jordan elimination with partial pivoting on the augmented system.
    fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for col in 0..n {
            let p = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
            a.swap(col, p);
            b.swap(col, p);
            for r in 0..n {
                if r != col {
                    let f = a[r][col] / a[col][col];
                    for c in col..n {
                        a[r][c] -= f * a[col][c];
                    }
                    b[r] -= f * b[col];
                }
            }
        }
        (0..n).map(|i| b[i] / a[i][i]).collect()
    }

    fn sample(n: usize, d: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let x: Vec<f64> = (0..n * d).map(|i| ((i * 7919) % 13) as f64 / 13.0).collect();
        let y: Vec<f64> = x.chunks(d).enumerate().map(|(i, r)| 0.5 + 2.0 * r[0] - r[d - 1] + 0.01 * (i as f64).sin()).collect();
        let w: Vec<f64> = (0..n).map(|i| 0.5 + (i % 3) as f64 * 0.25).collect();
        (x, y, w)
    }

    #[test]
    fn matches_augmented_normal_equations() {
        let (n, d, alpha) = (40, 4, 0.3);
        let (x, y, w) = sample(n, d);
        let fit = weighted_ridge(&x, d, &y, &w, alpha).unwrap();
        // Oracle: solve the (d+1)-dimensional system with an explicit intercept column,
        // penalizing only the slope entries.
        let total: f64 = w.iter().sum();
        let mut a = vec![vec![0.0; d + 1]; d + 1];
        let mut b = vec![0.0; d + 1];
        for i in 0..n {
            let row: Vec<f64> = std::iter::once(1.0).chain(x[i * d..(i + 1) * d].iter().copied()).collect();
            for p in 0..=d {
                b[p] += w[i] / total * row[p] * y[i];
                for q in 0..=d {
                    a[p][q] += w[i] / total * row[p] * row[q];
                }
            }
        }
        for p in 1..=d {
            a[p][p] += alpha;
        }
        let sol = gauss_solve(a, b);
        assert!((fit.intercept - sol[0]).abs() < 1e-10);
        for (c, s) in fit.coefficients.iter().zip(&sol[1..]) {
            assert!((c - s).abs() < 1e-10);
        }
    }

    #[test]
    fn constant_response_gives_zero_slopes() {
        let (n, d) = (30, 5);
        let (x, _, w) = sample(n, d);
        let fit = weighted_ridge(&x, d, &vec![0.42; n], &w, 1.0).unwrap();
        assert!(fit.coefficients.iter().all(|c| c.abs() < 1e-12));
        assert!((fit.intercept - 0.42).abs() < 1e-12);
    }

    #[test]
    fn duplicating_samples_changes_nothing() {
        let (n, d) = (25, 3);
        let (x, y, w) = sample(n, d);
        let a = weighted_ridge(&x, d, &y, &w, 1.0).unwrap();
        let x2 = [x.clone(), x].concat();
        let y2 = [y.clone(), y].concat();
        let w2 = [w.clone(), w].concat();
        let b = weighted_ridge(&x2, d, &y2, &w2, 1.0).unwrap();
        for (p, q) in a.coefficients.iter().zip(&b.coefficients) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn singular_without_ridge_is_an_internal_error() {
        // two identical columns
        let x = vec![1.0, 1.0, 0.0, 0.0, 1.0, 1.0];
        let r = weighted_ridge(&x, 2, &[1.0, 0.0, 1.0], &[1.0; 3], 0.0);
        assert!(matches!(r, Err(Error::Internal(_))));
    }
}
