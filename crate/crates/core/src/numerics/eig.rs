use std::cmp::Ordering;

use faer::{c64, Mat, MatRef};

use crate::error::{Error, Result};

/// Spectrum of a small dense real matrix.
///
/// Pairs are ordered by descending modulus, then descending real part, then
/// descending imaginary part. Eigenvector columns have unit 2-norm and their
/// largest-modulus component is real and positive.
#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<c64>,
    pub eigenvectors: Mat<c64>,
}

fn order(a: &c64, b: &c64) -> Ordering {
    let (ma, mb) = (a.norm(), b.norm());
    let scale = ma.max(mb).max(f64::MIN_POSITIVE);
    let close = |x: f64, y: f64| (x - y).abs() <= 1e-12 * scale;
    if !close(ma, mb) {
        return mb.total_cmp(&ma);
    }
    if !close(a.re, b.re) {
        return b.re.total_cmp(&a.re);
    }
    b.im.total_cmp(&a.im)
}

pub fn dense_eig(a: MatRef<'_, f64>) -> Result<EigenDecomposition> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::dims(format!("eigen-decomposition of a {}x{} matrix", n, a.ncols())));
    }
    if n == 0 {
        return Ok(EigenDecomposition {
            eigenvalues: Vec::new(),
            eigenvectors: Mat::zeros(0, 0),
        });
    }
    for j in 0..n {
        for i in 0..n {
            if !a[(i, j)].is_finite() {
                return Err(Error::invalid(format!("non-finite entry at ({i}, {j})")));
            }
        }
    }
    let evd = a.eigen().map_err(|_| Error::NoConvergence)?;
    let values: Vec<c64> = evd.S().column_vector().iter().copied().collect();
    let vectors = evd.U();
    if values.iter().any(|l| !(l.re.is_finite() && l.im.is_finite())) {
        return Err(Error::NoConvergence);
    }

    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| order(&values[i], &values[j]));

    let mut eigenvectors = Mat::<c64>::zeros(n, n);
    for (dst, &src) in idx.iter().enumerate() {
        let mut col: Vec<c64> = (0..n).map(|i| vectors[(i, src)]).collect();
        let mut norm = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            // defective eigenvalue: back-substitution broke down
            col = null_vector(a, values[src])?;
            norm = 1.0;
        }
        let pivot = col
            .iter()
            .copied()
            .max_by(|x, y| x.norm().total_cmp(&y.norm()))
            .unwrap();
        let phase = pivot.conj() / pivot.norm();
        for (i, z) in col.iter().enumerate() {
            eigenvectors[(i, dst)] = z * phase / norm;
        }
    }
    Ok(EigenDecomposition {
        eigenvalues: idx.iter().map(|&i| values[i]).collect(),
        eigenvectors,
    })
}

/// Right singular vector of `a - λI` for its smallest singular value.
fn null_vector(a: MatRef<'_, f64>, lambda: c64) -> Result<Vec<c64>> {
    let n = a.nrows();
    let shifted = Mat::from_fn(n, n, |i, j| {
        let v = c64::new(a[(i, j)], 0.0);
        if i == j {
            v - lambda
        } else {
            v
        }
    });
    let svd = shifted.svd().map_err(|_| Error::NoConvergence)?;
    let v = svd.V();
    let col: Vec<c64> = (0..n).map(|i| v[(i, n - 1)]).collect();
    if col.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::NoConvergence);
    }
    Ok(col)
}
