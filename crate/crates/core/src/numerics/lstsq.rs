//! Linear least squares by Householder QR.

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct FitResult {
    pub coefficients: Vec<f64>,
    /// Euclidean norm of the residual vector.
    pub residual_norm: f64,
    /// Diagonal of `sigma^2 (R^T R)^{-1}` with `sigma^2 = |r|^2 / (m - n)`;
    /// zero when the system has no redundancy.
    pub covariance_diag: Vec<f64>,
}

/// Minimises `|A x - b|` for the design matrix given by `rows`.
pub fn linear_least_squares(rows: &[Vec<f64>], observations: &[f64]) -> Result<FitResult> {
    let m = rows.len();
    if m != observations.len() {
        return Err(Error::InsufficientData(format!(
            "{m} design rows but {} observations",
            observations.len()
        )));
    }
    let n = rows.first().map_or(0, Vec::len);
    if n == 0 {
        return Err(Error::InsufficientData("empty design matrix".into()));
    }
    if m < n {
        return Err(Error::Underdetermined { rows: m, cols: n });
    }
    if rows.iter().any(|r| r.len() != n) {
        return Err(Error::InsufficientData("ragged design matrix".into()));
    }

    // column-major copy
    let mut a: Vec<Vec<f64>> = (0..n).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
    let mut b = observations.to_vec();
    let col_norms: Vec<f64> = a.iter().map(|col| norm(col)).collect();

    for k in 0..n {
        let alpha = norm(&a[k][k..]);
        if alpha <= 1e-13 * col_norms[k].max(f64::MIN_POSITIVE) {
            return Err(Error::RankDeficient { column: k });
        }
        let alpha = if a[k][k] > 0.0 { -alpha } else { alpha };
        let mut v: Vec<f64> = a[k][k..].to_vec();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 > 0.0 {
            for col in a.iter_mut().skip(k) {
                reflect(&v, vnorm2, &mut col[k..]);
            }
            reflect(&v, vnorm2, &mut b[k..]);
        }
        a[k][k] = alpha;
    }

    // back substitution with R
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = b[i];
        for j in i + 1..n {
            s -= a[j][i] * x[j];
        }
        x[i] = s / a[i][i];
    }
    let residual_norm = norm(&b[n..]);

    // diag((R^T R)^{-1}) = row norms^2 of R^{-1}
    let mut rinv = vec![vec![0.0; n]; n];
    for j in 0..n {
        rinv[j][j] = 1.0 / a[j][j];
        for i in (0..j).rev() {
            let mut s = 0.0;
            for k in i + 1..=j {
                s += a[k][i] * rinv[k][j];
            }
            rinv[i][j] = -s / a[i][i];
        }
    }
    let sigma2 = if m > n { residual_norm * residual_norm / (m - n) as f64 } else { 0.0 };
    let covariance_diag = (0..n)
        .map(|i| sigma2 * rinv[i].iter().map(|x| x * x).sum::<f64>())
        .collect();

    Ok(FitResult { coefficients: x, residual_norm, covariance_diag })
}

fn norm(v: &[f64]) -> f64 {
    let scale = v.iter().fold(0.0f64, |s, x| s.max(x.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    scale * v.iter().map(|x| (x / scale).powi(2)).sum::<f64>().sqrt()
}

fn reflect(v: &[f64], vnorm2: f64, x: &mut [f64]) {
    let dot: f64 = v.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
    let f = 2.0 * dot / vnorm2;
    for (xi, vi) in x.iter_mut().zip(v) {
        *xi -= f * vi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let t: Vec<f64> = (0..10).map(f64::from).collect();
        let rows: Vec<Vec<f64>> = t.iter().map(|&t| vec![t, 1.0]).collect();
        let y: Vec<f64> = t.iter().map(|t| 2.0 * t + 3.0).collect();
        let fit = linear_least_squares(&rows, &y).unwrap();
        assert!((fit.coefficients[0] - 2.0).abs() < 1e-12);
        assert!((fit.coefficients[1] - 3.0).abs() < 1e-12);
        assert!(fit.residual_norm < 1e-12);
    }

    #[test]
    fn log_corrected_model_recovered() {
        let t: Vec<f64> = (10..=100).map(f64::from).collect();
        let rows: Vec<Vec<f64>> = t.iter().map(|&t| vec![t, t.ln(), 1.0]).collect();
        let y: Vec<f64> = t.iter().map(|t| t + 0.5 * t.ln() + 1.0).collect();
        let fit = linear_least_squares(&rows, &y).unwrap();
        for (got, want) in fit.coefficients.iter().zip([1.0, 0.5, 1.0]) {
            assert!((got - want).abs() < 1e-10, "{got} vs {want}");
        }
    }

    #[test]
    fn perturbed_residual_matches_grid_search() {
        // y = 1.5 t - 0.7 + wiggle; brute-force minimum of |r| over a fine
        // (slope, intercept) grid refined three times
        let t: Vec<f64> = (0..25).map(|i| f64::from(i) * 0.4).collect();
        let y: Vec<f64> = t.iter().map(|t| 1.5 * t - 0.7 + 0.3 * (3.1 * t).sin()).collect();
        let rows: Vec<Vec<f64>> = t.iter().map(|&t| vec![t, 1.0]).collect();
        let fit = linear_least_squares(&rows, &y).unwrap();

        let resid = |s: f64, c: f64| {
            t.iter().zip(&y).map(|(t, y)| (s * t + c - y).powi(2)).sum::<f64>().sqrt()
        };
        let (mut s0, mut c0, mut span) = (0.0, 0.0, 4.0);
        for _ in 0..6 {
            let mut best = (f64::INFINITY, s0, c0);
            for i in -100..=100 {
                for j in -100..=100 {
                    let s = s0 + span * f64::from(i) / 100.0;
                    let c = c0 + span * f64::from(j) / 100.0;
                    let r = resid(s, c);
                    if r < best.0 {
                        best = (r, s, c);
                    }
                }
            }
            s0 = best.1;
            c0 = best.2;
            span /= 20.0;
        }
        assert!((fit.residual_norm - resid(s0, c0)).abs() < 1e-6);
    }

    #[test]
    fn rank_deficiency_names_column() {
        let rows: Vec<Vec<f64>> = (0..6).map(|i| vec![f64::from(i), 2.0 * f64::from(i), 1.0]).collect();
        let y = vec![0.0; 6];
        match linear_least_squares(&rows, &y) {
            Err(Error::RankDeficient { column }) => assert_eq!(column, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn underdetermined() {
        let rows = vec![vec![1.0, 2.0]];
        assert!(matches!(
            linear_least_squares(&rows, &[1.0]),
            Err(Error::Underdetermined { .. })
        ));
    }

    #[test]
    fn covariance_is_nonnegative() {
        let t: Vec<f64> = (1..30).map(f64::from).collect();
        let rows: Vec<Vec<f64>> = t.iter().map(|&t| vec![t, t.ln(), 1.0]).collect();
        let y: Vec<f64> = t.iter().map(|t| 2.0 * t + (0.7 * t).cos()).collect();
        let fit = linear_least_squares(&rows, &y).unwrap();
        assert!(fit.covariance_diag.iter().all(|&v| v > 0.0));
    }
}
