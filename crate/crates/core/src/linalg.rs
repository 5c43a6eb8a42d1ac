//! Cholesky factorization for positive semidefinite matrices.

use nalgebra::DMatrix;

/// Pivot that fell below `-pivot_tol`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NegativePivot {
    pub index: usize,
    pub pivot: f64,
}

/// Lower-triangular `L` with `L L^T = a` for symmetric PSD `a`.
///
/// Pivots in `[-pivot_tol, pivot_tol]` are treated as exact zeros and the
/// corresponding column of `L` is zeroed; a pivot below `-pivot_tol`
/// aborts. No diagonal jitter is ever added.
pub fn psd_cholesky(a: &DMatrix<f64>, pivot_tol: f64) -> Result<DMatrix<f64>, NegativePivot> {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "square matrix required");
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d < -pivot_tol {
            return Err(NegativePivot { index: j, pivot: d });
        }
        if d <= pivot_tol {
            continue;
        }
        let ljj = d.sqrt();
        l[(j, j)] = ljj;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(l)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reconstructs_positive_definite() {
        let a = DMatrix::from_row_slice(3, 3, &[4.0, 2.0, 0.4, 2.0, 5.0, 1.0, 0.4, 1.0, 3.0]);
        let l = psd_cholesky(&a, 1e-12).unwrap();
        assert!((&l * l.transpose() - &a).abs().max() < 1e-14);
    }

    #[test]
    fn handles_zero_rows() {
        // Brownian covariance on {0, 0.5, 1}
        let a = DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 0.0, 0.0, 0.5, 0.5, 0.0, 0.5, 1.0]);
        let l = psd_cholesky(&a, 1e-10).unwrap();
        assert!((&l * l.transpose() - &a).abs().max() < 1e-14);
        assert_eq!(l[(0, 0)], 0.0);
    }

    #[test]
    fn rejects_indefinite() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let err = psd_cholesky(&a, 1e-10).unwrap_err();
        assert_eq!(err.index, 1);
        assert!(err.pivot < 0.0);
    }
}
