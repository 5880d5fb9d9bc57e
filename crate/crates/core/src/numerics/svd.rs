use faer::{Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Singular values below this fraction of the largest one are treated as zero.
pub const SINGULAR_CUTOFF: f64 = 1e-13;

/// Default energy fraction retained when no fixed rank is requested.
pub const DEFAULT_ENERGY: f64 = 0.9999;

/// How many singular triplets to keep.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankRule {
    /// Keep exactly `r` triplets (clamped to the numerical rank).
    Fixed(usize),
    /// Keep the smallest `r` with `sum_{i<=r} s_i^2 >= tau * sum s_i^2`.
    Energy(f64),
}

impl Default for RankRule {
    fn default() -> Self {
        RankRule::Energy(DEFAULT_ENERGY)
    }
}

/// Rank-`r` factors `u * diag(sigma) * v^T`.
#[derive(Clone, Debug)]
pub struct TruncatedSvd {
    pub u: Mat<f64>,
    pub sigma: Vec<f64>,
    pub v: Mat<f64>,
    /// Notes about rank clamping; empty when the rule was honored as given.
    pub warnings: Vec<String>,
}

impl TruncatedSvd {
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    pub fn reconstruct(&self) -> Mat<f64> {
        let us = Mat::from_fn(self.u.nrows(), self.rank(), |i, j| self.u[(i, j)] * self.sigma[j]);
        &us * self.v.transpose()
    }
}

/// Numerical rank: the number of singular values above the cutoff.
pub fn numerical_rank(sigma: &[f64]) -> usize {
    let smax = sigma.first().copied().unwrap_or(0.0);
    if smax <= 0.0 {
        return 0;
    }
    sigma.iter().take_while(|&&s| s > SINGULAR_CUTOFF * smax).count()
}

pub fn truncated_svd(m: MatRef<'_, f64>, rule: RankRule) -> Result<TruncatedSvd> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Err(Error::invalid("cannot factor an empty matrix"));
    }
    let svd = m.thin_svd().map_err(|_| Error::NoConvergence)?;
    let full: Vec<f64> = svd.S().column_vector().iter().copied().collect();
    let numeric = numerical_rank(&full);
    if numeric == 0 {
        return Err(Error::RankZero("matrix has no nonzero singular values".into()));
    }
    let min_dim = m.nrows().min(m.ncols());
    let mut warnings = Vec::new();
    let r = match rule {
        RankRule::Fixed(0) => return Err(Error::invalid("fixed rank must be positive")),
        RankRule::Fixed(r) => {
            let mut r = r;
            if r > min_dim {
                warnings.push(format!("rank {r} clamped to matrix dimension {min_dim}"));
                r = min_dim;
            }
            if r > numeric {
                warnings.push(format!("rank {r} clamped to numerical rank {numeric}"));
                r = numeric;
            }
            r
        }
        RankRule::Energy(tau) => {
            if !(tau > 0.0 && tau <= 1.0) {
                return Err(Error::invalid(format!("energy threshold {tau} outside (0, 1]")));
            }
            let total: f64 = full.iter().map(|s| s * s).sum();
            let mut acc = 0.0;
            let mut r = full.len();
            for (i, s) in full.iter().enumerate() {
                acc += s * s;
                if acc >= tau * total {
                    r = i + 1;
                    break;
                }
            }
            r.min(numeric)
        }
    };
    Ok(TruncatedSvd {
        u: svd.U().subcols(0, r).to_owned(),
        sigma: full[..r].to_vec(),
        v: svd.V().subcols(0, r).to_owned(),
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn orthonormality_error(q: MatRef<'_, f64>) -> f64 {
        let g = q.transpose() * q;
        let mut err: f64 = 0.0;
        for i in 0..g.nrows() {
            for j in 0..g.ncols() {
                let target = if i == j { 1.0 } else { 0.0 };
                err = err.max((g[(i, j)] - target).abs());
            }
        }
        err
    }

    #[test]
    fn diagonal_fixed_rank() {
        let m = Mat::from_fn(3, 3, |i, j| if i == j { 3.0 - i as f64 } else { 0.0 });
        let t = truncated_svd(m.as_ref(), RankRule::Fixed(2)).unwrap();
        assert_eq!(t.rank(), 2);
        assert!((t.sigma[0] - 3.0).abs() < 1e-14);
        assert!((t.sigma[1] - 2.0).abs() < 1e-14);
        assert!(t.warnings.is_empty());
    }

    #[test]
    fn rank_one_energy() {
        let a = [1.0, -2.0, 0.5, 3.0];
        let b = [2.0, 1.0, -1.0];
        let m = Mat::from_fn(4, 3, |i, j| a[i] * b[j]);
        let t = truncated_svd(m.as_ref(), RankRule::Energy(0.999)).unwrap();
        assert_eq!(t.rank(), 1);
        // even a fixed request cannot keep the zero singular values
        let t = truncated_svd(m.as_ref(), RankRule::Fixed(3)).unwrap();
        assert_eq!(t.rank(), 1);
        assert_eq!(t.warnings.len(), 1);
    }

    #[test]
    fn zero_matrix_is_rank_zero() {
        let m = Mat::<f64>::zeros(3, 2);
        assert!(matches!(
            truncated_svd(m.as_ref(), RankRule::default()),
            Err(Error::RankZero(_))
        ));
    }

    #[test]
    fn oversized_fixed_rank_is_clamped() {
        let m = Mat::from_fn(2, 4, |i, j| (i * 4 + j) as f64 + if i == j { 1.0 } else { 0.0 });
        let t = truncated_svd(m.as_ref(), RankRule::Fixed(9)).unwrap();
        assert_eq!(t.rank(), 2);
        assert!(t.warnings[0].contains("clamped"));
    }

    #[test]
    fn bad_energy_threshold() {
        let m = Mat::from_fn(2, 2, |i, j| (i + j + 1) as f64);
        assert!(truncated_svd(m.as_ref(), RankRule::Energy(0.0)).is_err());
        assert!(truncated_svd(m.as_ref(), RankRule::Energy(1.5)).is_err());
        assert!(truncated_svd(m.as_ref(), RankRule::Fixed(0)).is_err());
    }

    #[test]
    fn full_rank_reconstruction_and_orthonormality() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        let m = Mat::from_fn(5, 5, |_, _| rng.gen_range(-1.0..1.0));
        let t = truncated_svd(m.as_ref(), RankRule::Fixed(5)).unwrap();
        let diff = &t.reconstruct() - &m;
        assert!(diff.norm_l2() <= 1e-12 * m.norm_l2());
        assert!(orthonormality_error(t.u.as_ref()) < 1e-12);
        assert!(orthonormality_error(t.v.as_ref()) < 1e-12);
        assert!(t.sigma.windows(2).all(|w| w[0] >= w[1]));
    }
}
