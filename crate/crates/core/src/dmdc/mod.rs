//! Dynamic Mode Decomposition with control.
//!
//! Given transitions `x_{k+1} ≈ A x_k + B u_k`, the stacked matrix
//! `Ω = [X; Υ]` and the shifted matrix `X'` are factored by truncated SVDs
//!
//! ```text
//! Ω ≈ Ũ Σ̃ Ṽᵀ,  Ũ = [Ũ₁; Ũ₂]        X' ≈ Û Σ̂ V̂ᵀ
//! ```
//!
//! and the reduced operators are
//!
//! ```text
//! Ã = Ûᵀ X' Ṽ Σ̃⁻¹ Ũ₁ᵀ Û     B̃ = Ûᵀ X' Ṽ Σ̃⁻¹ Ũ₂ᵀ     Φ = X' Ṽ Σ̃⁻¹ Ũ₁ᵀ Û W
//! ```
//!
//! where `Ã W = W Λ`. Without inputs the output basis is taken from the SVD
//! of `X`, so the fit is exactly the standard (exact) DMD.

mod io;

use faer::{c64, Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{dense_eig, numerical_rank, truncated_svd, EigenDecomposition, RankRule};
use crate::snapshots::{demean, shift_pair, NormalizationRecord, ShiftPair, SnapshotMatrix};

pub use io::{load_model, read_model_header, save_model, DmdcHeader};
pub(crate) use io::{read_blocks, write_blocks};

/// Ratio of smallest to largest retained stacked singular value below which
/// a fit carries a conditioning warning.
pub const CONDITION_WARNING: f64 = 1e-10;

/// Exogenous inputs, one column per transition. Zero rows means no control.
#[derive(Clone, Debug, PartialEq)]
pub struct InputMatrix {
    values: Mat<f64>,
}

impl InputMatrix {
    pub fn new(values: Mat<f64>) -> Result<Self> {
        for j in 0..values.ncols() {
            for i in 0..values.nrows() {
                if !values[(i, j)].is_finite() {
                    return Err(Error::invalid(format!("non-finite input at ({i}, {j})")));
                }
            }
        }
        Ok(Self { values })
    }

    /// Plain DMD: no input channels over `n_cols` transitions.
    pub fn none(n_cols: usize) -> Self {
        Self {
            values: Mat::zeros(0, n_cols),
        }
    }

    /// Columns `start..start + count` of a snapshot matrix.
    pub fn from_snapshots(s: &SnapshotMatrix, start: usize, count: usize) -> Result<Self> {
        if start + count > s.n_time() {
            return Err(Error::invalid(format!(
                "input columns {start}..{} requested from {} available",
                start + count,
                s.n_time()
            )));
        }
        Self::new(s.values().subcols(start, count).to_owned())
    }

    pub fn n_input(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> MatRef<'_, f64> {
        self.values.as_ref()
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        (0..self.n_input()).map(|i| self.values[(i, k)]).collect()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            values: Mat::from_fn(self.n_input(), self.n_cols(), |i, j| c * self.values[(i, j)]),
        }
    }
}

/// Truncation choices for a fit.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Rank of the stacked `[X; Υ]` factorization. `None` picks the output
    /// rank plus the numerical rank of the input matrix.
    pub rank_omega: Option<RankRule>,
    /// Rank of the output basis `Û`.
    pub rank_output: RankRule,
}

impl FitOptions {
    pub fn with_output_rank(r: usize) -> Self {
        Self {
            rank_omega: None,
            rank_output: RankRule::Fixed(r),
        }
    }

    pub fn fixed(rank_omega: usize, rank_output: usize) -> Self {
        Self {
            rank_omega: Some(RankRule::Fixed(rank_omega)),
            rank_output: RankRule::Fixed(rank_output),
        }
    }
}

/// A fitted surrogate. Immutable after construction.
#[derive(Clone, Debug)]
pub struct DmdcModel {
    pub(crate) basis: Mat<f64>,
    pub(crate) a_reduced: Mat<f64>,
    pub(crate) b_reduced: Mat<f64>,
    pub(crate) eigen: EigenDecomposition,
    pub(crate) modes: Mat<c64>,
    pub(crate) rank_omega: usize,
    pub(crate) normalization: Option<NormalizationRecord>,
    pub(crate) dt: f64,
    pub(crate) t0: f64,
    pub(crate) label: String,
    pub(crate) warnings: Vec<String>,
}

/// Continuous-time counterpart of a discrete eigenvalue.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ContinuousFrequency {
    Finite(c64),
    /// `λ = 0`: the mode vanishes after one step and has no logarithm.
    Decayed,
}

fn check_finite(m: MatRef<'_, f64>, what: &str) -> Result<()> {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if !m[(i, j)].is_finite() {
                return Err(Error::invalid(format!("non-finite {what} entry at ({i}, {j})")));
            }
        }
    }
    Ok(())
}

/// Fits a model from a shift pair. Time metadata defaults to `dt = 1`,
/// `t0 = 0`; [`fit_snapshots`] fills it from the data.
pub fn fit(pair: ShiftPair<'_>, inputs: &InputMatrix, opts: &FitOptions) -> Result<DmdcModel> {
    let x = pair.x;
    let xp = pair.x_prime;
    let n = x.nrows();
    let m = x.ncols();
    if xp.nrows() != n || xp.ncols() != m {
        return Err(Error::dims("shift pair halves differ in shape"));
    }
    if inputs.n_cols() != m {
        return Err(Error::invalid(format!(
            "{} input columns for {m} transitions",
            inputs.n_cols()
        )));
    }
    check_finite(x, "snapshot")?;
    check_finite(xp, "snapshot")?;
    if let (Some(RankRule::Fixed(p)), RankRule::Fixed(r)) = (opts.rank_omega, opts.rank_output) {
        if p < r {
            return Err(Error::invalid(format!(
                "stacked rank {p} is smaller than output rank {r}"
            )));
        }
    }

    let l = inputs.n_input();
    let mut warnings = Vec::new();

    let (basis, omega) = if l == 0 {
        let out = truncated_svd(x, opts.rank_output)?;
        let p_rule = opts.rank_omega.unwrap_or(RankRule::Fixed(out.rank()));
        let omega = truncated_svd(x, p_rule)?;
        if omega.rank() < out.rank() {
            return Err(Error::invalid(format!(
                "stacked rank {} is smaller than output rank {}",
                omega.rank(),
                out.rank()
            )));
        }
        warnings.extend(out.warnings.iter().cloned());
        (out.u, omega)
    } else {
        let out = truncated_svd(xp, opts.rank_output)?;
        let r = out.rank();
        let p_rule = match opts.rank_omega {
            Some(rule) => rule,
            None => {
                let s = inputs.values().thin_svd().map_err(|_| Error::NoConvergence)?;
                let sv: Vec<f64> = s.S().column_vector().iter().copied().collect();
                RankRule::Fixed((r + numerical_rank(&sv)).min(n + l).min(m))
            }
        };
        let stacked = Mat::from_fn(n + l, m, |i, j| {
            if i < n {
                x[(i, j)]
            } else {
                inputs.values()[(i - n, j)]
            }
        });
        let omega = truncated_svd(stacked.as_ref(), p_rule)?;
        warnings.extend(out.warnings.iter().cloned());
        (out.u, omega)
    };
    warnings.extend(omega.warnings.iter().map(|w| format!("stacked: {w}")));
    let p = omega.rank();
    let r = basis.ncols();
    if r == 0 {
        return Err(Error::RankZero("output rank resolved to zero".into()));
    }
    let smin = omega.sigma[p - 1];
    if smin / omega.sigma[0] < CONDITION_WARNING {
        warnings.push(format!(
            "ill-conditioned stacked data: sigma_min/sigma_max = {:.3e}",
            smin / omega.sigma[0]
        ));
    }

    // G = X' Ṽ Σ̃⁻¹ (n × p)
    let v_scaled = Mat::from_fn(m, p, |i, j| omega.v[(i, j)] / omega.sigma[j]);
    let g = xp * &v_scaled;
    let u1 = omega.u.subrows(0, n);
    let u1t_basis = u1.transpose() * &basis; // p × r
    let g_proj = basis.transpose() * &g; // r × p
    let a_reduced = &g_proj * &u1t_basis;
    let b_reduced = if l == 0 {
        Mat::zeros(r, 0)
    } else {
        let u2 = omega.u.subrows(n, l);
        &g_proj * u2.transpose()
    };

    let eigen = dense_eig(a_reduced.as_ref())?;
    let pre_modes = &g * &u1t_basis; // n × r
    let modes = Mat::from_fn(n, r, |i, k| {
        (0..r).fold(c64::new(0.0, 0.0), |acc, j| {
            acc + eigen.eigenvectors[(j, k)] * pre_modes[(i, j)]
        })
    });

    Ok(DmdcModel {
        basis,
        a_reduced,
        b_reduced,
        eigen,
        modes,
        rank_omega: p,
        normalization: None,
        dt: 1.0,
        t0: 0.0,
        label: String::new(),
        warnings,
    })
}

/// Fits on all consecutive pairs of `s`, optionally removing the temporal
/// mean first. `inputs` must have `s.n_time() - 1` columns.
pub fn fit_snapshots(
    s: &SnapshotMatrix,
    inputs: &InputMatrix,
    opts: &FitOptions,
    demean_data: bool,
) -> Result<DmdcModel> {
    let (data, record) = if demean_data {
        let (d, r) = demean(s);
        (d, Some(r))
    } else {
        (s.clone(), None)
    };
    let pair = shift_pair(&data)?;
    let mut model = fit(pair, inputs, opts)?;
    model.normalization = record;
    model.dt = s.dt();
    model.t0 = s.t0();
    model.label = s.label().to_string();
    Ok(model)
}

impl DmdcModel {
    pub fn n_dof(&self) -> usize {
        self.basis.nrows()
    }

    pub fn n_input(&self) -> usize {
        self.b_reduced.ncols()
    }

    pub fn rank_output(&self) -> usize {
        self.basis.ncols()
    }

    pub fn rank_omega(&self) -> usize {
        self.rank_omega
    }

    pub fn basis(&self) -> MatRef<'_, f64> {
        self.basis.as_ref()
    }

    pub fn a_reduced(&self) -> MatRef<'_, f64> {
        self.a_reduced.as_ref()
    }

    pub fn b_reduced(&self) -> MatRef<'_, f64> {
        self.b_reduced.as_ref()
    }

    pub fn eigen(&self) -> &EigenDecomposition {
        &self.eigen
    }

    pub fn modes(&self) -> MatRef<'_, c64> {
        self.modes.as_ref()
    }

    pub fn normalization(&self) -> Option<&NormalizationRecord> {
        self.normalization.as_ref()
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Full-order state operator `Û Ã Ûᵀ`.
    pub fn full_state_operator(&self) -> Mat<f64> {
        &self.basis * (&self.a_reduced * self.basis.transpose())
    }

    /// Full-order input operator `Û B̃`.
    pub fn full_input_operator(&self) -> Mat<f64> {
        &self.basis * &self.b_reduced
    }

    pub fn eigenvalues(&self) -> &[c64] {
        &self.eigen.eigenvalues
    }

    /// `ln(λ) / dt` for every eigenvalue, in the same order.
    pub fn continuous_frequencies(&self) -> Vec<ContinuousFrequency> {
        self.eigen
            .eigenvalues
            .iter()
            .map(|l| {
                if l.norm() < f64::MIN_POSITIVE {
                    ContinuousFrequency::Decayed
                } else {
                    ContinuousFrequency::Finite(l.ln() / self.dt)
                }
            })
            .collect()
    }

    fn check_step_dims(&self, x: &[f64], u: &[f64]) -> Result<()> {
        if x.len() != self.n_dof() {
            return Err(Error::dims(format!(
                "state of length {} for a model with {} DOFs",
                x.len(),
                self.n_dof()
            )));
        }
        if u.len() != self.n_input() {
            return Err(Error::dims(format!(
                "input of length {} for a model with {} inputs",
                u.len(),
                self.n_input()
            )));
        }
        Ok(())
    }

    fn project(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rank_output())
            .map(|j| self.basis.col_as_slice(j).iter().zip(x).map(|(b, v)| b * v).sum())
            .collect()
    }

    fn reduced_step(&self, a: &[f64], u: &[f64]) -> Vec<f64> {
        let r = self.rank_output();
        (0..r)
            .map(|i| {
                let ax: f64 = (0..r).map(|j| self.a_reduced[(i, j)] * a[j]).sum();
                let bu: f64 = (0..u.len()).map(|j| self.b_reduced[(i, j)] * u[j]).sum();
                ax + bu
            })
            .collect()
    }

    /// One step of the surrogate, `Û (Ã Ûᵀ x + B̃ u)`, in the coordinates the
    /// model was fitted in (no normalization is applied).
    pub fn advance(&self, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        self.check_step_dims(x, u)?;
        let a = self.reduced_step(&self.project(x), u);
        let lifted = &self.basis * Mat::from_fn(a.len(), 1, |i, _| a[i]);
        Ok((0..self.n_dof()).map(|i| lifted[(i, 0)]).collect())
    }

    /// Trajectory of `n_steps + 1` columns: the projection of `x0`, then
    /// `n_steps` applications of [`advance`](Self::advance) fed with input
    /// columns `0..n_steps`. The recursion runs in reduced coordinates and is
    /// lifted once at the end. A normalization record, if any, is removed
    /// from `x0` first and restored on every output column. The returned
    /// matrix starts at the model's `t0`.
    pub fn rollout(&self, x0: &[f64], inputs: &InputMatrix, n_steps: usize) -> Result<SnapshotMatrix> {
        if n_steps == 0 {
            return Err(Error::invalid("rollout needs at least one step"));
        }
        if inputs.n_input() != self.n_input() {
            return Err(Error::dims(format!(
                "{} input channels for a model with {}",
                inputs.n_input(),
                self.n_input()
            )));
        }
        if self.n_input() > 0 && inputs.n_cols() < n_steps {
            return Err(Error::invalid(format!(
                "{n_steps} steps requested but only {} input columns supplied",
                inputs.n_cols()
            )));
        }
        if x0.len() != self.n_dof() {
            return Err(Error::dims(format!(
                "initial state of length {} for a model with {} DOFs",
                x0.len(),
                self.n_dof()
            )));
        }
        let start = match &self.normalization {
            Some(rec) => rec.remove(x0),
            None => x0.to_vec(),
        };
        let r = self.rank_output();
        let mut reduced = Mat::<f64>::zeros(r, n_steps + 1);
        let mut a = self.project(&start);
        for k in 0..=n_steps {
            for (i, v) in a.iter().enumerate() {
                reduced[(i, k)] = *v;
            }
            if k < n_steps {
                let u = if self.n_input() > 0 { inputs.column(k) } else { Vec::new() };
                a = self.reduced_step(&a, &u);
            }
        }
        let mut lifted = &self.basis * &reduced;
        if let Some(rec) = self.normalization.as_ref().filter(|r| r.applied) {
            for k in 0..=n_steps {
                for (i, m) in rec.mean.iter().enumerate() {
                    lifted[(i, k)] += m;
                }
            }
        }
        SnapshotMatrix::new(lifted, self.dt, self.t0, self.label.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    /// Forward simulation of x_{k+1} = A x_k + B u_k, the independent oracle.
    fn simulate(a: &[Vec<f64>], b: &[Vec<f64>], x0: &[f64], u: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let mut xs = vec![x0.to_vec()];
        for uk in u {
            let x = xs.last().unwrap();
            let next: Vec<f64> = (0..x0.len())
                .map(|i| {
                    (0..x0.len()).map(|j| a[i][j] * x[j]).sum::<f64>()
                        + (0..uk.len()).map(|j| b[i][j] * uk[j]).sum::<f64>()
                })
                .collect();
            xs.push(next);
        }
        xs
    }

    fn diag_lti() -> (Vec<Vec<f64>>, Vec<Vec<f64>>, SnapshotMatrix, InputMatrix) {
        let a = vec![vec![0.9, 0.0], vec![0.0, 0.5]];
        let b = vec![vec![1.0], vec![1.0]];
        let mut rng = rand::rngs::StdRng::seed_from_u64(11);
        let u: Vec<Vec<f64>> = (0..30).map(|_| vec![rng.gen_range(-1.0..1.0)]).collect();
        let xs = simulate(&a, &b, &[1.0, 1.0], &u);
        let s = SnapshotMatrix::from_columns(&xs, 0.1, 0.0, "lti").unwrap();
        let inputs = InputMatrix::new(Mat::from_fn(1, 30, |_, j| u[j][0])).unwrap();
        (a, b, s, inputs)
    }

    #[test]
    fn recovers_diagonal_lti() {
        let (a, b, s, inputs) = diag_lti();
        let model = fit_snapshots(&s, &inputs, &FitOptions::fixed(3, 2), false).unwrap();
        let fa = model.full_state_operator();
        let fb = model.full_input_operator();
        for i in 0..2 {
            for j in 0..2 {
                assert!((fa[(i, j)] - a[i][j]).abs() < 1e-8);
            }
            assert!((fb[(i, 0)] - b[i][0]).abs() < 1e-8);
        }
        let l = model.eigenvalues();
        assert!((l[0] - c64::new(0.9, 0.0)).norm() < 1e-8);
        assert!((l[1] - c64::new(0.5, 0.0)).norm() < 1e-8);
        // auto stacked rank = output rank + input rank
        let auto = fit_snapshots(&s, &inputs, &FitOptions::with_output_rank(2), false).unwrap();
        assert_eq!(auto.rank_omega(), 3);
    }

    #[test]
    fn advance_and_rollout_match_lti() {
        let (a, b, s, inputs) = diag_lti();
        let model = fit_snapshots(&s, &inputs, &FitOptions::fixed(3, 2), false).unwrap();
        let y = model.advance(&[1.0, 1.0], &[0.0]).unwrap();
        assert!((y[0] - 0.9).abs() < 1e-8 && (y[1] - 0.5).abs() < 1e-8);
        assert_eq!(model.advance(&[0.0, 0.0], &[0.0]).unwrap(), vec![0.0, 0.0]);

        let u: Vec<Vec<f64>> = (0..10).map(|k| vec![(k as f64 * 0.7).sin()]).collect();
        let oracle = simulate(&a, &b, &[0.3, -0.2], &u);
        let feed = InputMatrix::new(Mat::from_fn(1, 10, |_, j| u[j][0])).unwrap();
        let traj = model.rollout(&[0.3, -0.2], &feed, 10).unwrap();
        assert_eq!(traj.n_time(), 11);
        for (k, col) in oracle.iter().enumerate() {
            for i in 0..2 {
                assert!((traj.column(k)[i] - col[i]).abs() < 1e-8);
            }
        }
        assert!(model.advance(&[1.0], &[0.0]).is_err());
        assert!(model.rollout(&[0.0, 0.0], &feed, 11).is_err());
    }

    #[test]
    fn scalar_plain_dmd() {
        let xs: Vec<Vec<f64>> = (0..8).map(|k| vec![0.5f64.powi(k)]).collect();
        let s = SnapshotMatrix::from_columns(&xs, 0.02, 0.0, "x").unwrap();
        let model = fit_snapshots(&s, &InputMatrix::none(7), &FitOptions::default(), false).unwrap();
        assert_eq!(model.n_input(), 0);
        assert!((model.eigenvalues()[0] - c64::new(0.5, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn frequencies() {
        let xs: Vec<Vec<f64>> = (0..5).map(|k| vec![(-0.02 * k as f64).exp()]).collect();
        let s = SnapshotMatrix::from_columns(&xs, 0.02, 0.0, "x").unwrap();
        let model = fit_snapshots(&s, &InputMatrix::none(4), &FitOptions::default(), false).unwrap();
        match model.continuous_frequencies()[0] {
            ContinuousFrequency::Finite(w) => {
                assert!((w.re + 1.0).abs() < 1e-12 && w.im.abs() < 1e-12)
            }
            ContinuousFrequency::Decayed => panic!("unexpected decayed mode"),
        }

        let xs = vec![vec![1.0], vec![1.0], vec![1.0]];
        let s = SnapshotMatrix::from_columns(&xs, 0.3, 0.0, "x").unwrap();
        let model = fit_snapshots(&s, &InputMatrix::none(2), &FitOptions::default(), false).unwrap();
        assert_eq!(
            model.continuous_frequencies()[0],
            ContinuousFrequency::Finite(c64::new(0.0, 0.0))
        );
    }

    #[test]
    fn decayed_mode_sentinel() {
        let s = SnapshotMatrix::from_columns(&[vec![1.0], vec![0.5]], 1.0, 0.0, "x").unwrap();
        let mut model =
            fit_snapshots(&s, &InputMatrix::none(1), &FitOptions::default(), false).unwrap();
        model.eigen.eigenvalues[0] = c64::new(0.0, 0.0);
        assert_eq!(model.continuous_frequencies()[0], ContinuousFrequency::Decayed);
    }

    #[test]
    fn projection_kills_orthogonal_start() {
        let (_, _, s, inputs) = diag_lti();
        // rank-1 output basis; start orthogonal to it
        let model = fit_snapshots(&s, &inputs, &FitOptions::fixed(2, 1), false).unwrap();
        let q = model.basis();
        let x0 = vec![-q[(1, 0)], q[(0, 0)]];
        let traj = model.rollout(&x0, &InputMatrix::new(Mat::zeros(1, 5)).unwrap(), 5).unwrap();
        for k in 0..6 {
            assert!(traj.column(k).iter().all(|v| v.abs() < 1e-15));
        }
    }

    #[test]
    fn error_paths() {
        let (_, _, s, inputs) = diag_lti();
        let zero = SnapshotMatrix::new(Mat::zeros(2, 5), 1.0, 0.0, "z").unwrap();
        assert!(matches!(
            fit_snapshots(&zero, &InputMatrix::none(4), &FitOptions::default(), false),
            Err(Error::RankZero(_))
        ));
        let short = InputMatrix::new(Mat::zeros(1, 10)).unwrap();
        assert!(matches!(
            fit_snapshots(&s, &short, &FitOptions::default(), false),
            Err(Error::InvalidArgument(_))
        ));
        assert!(fit_snapshots(&s, &inputs, &FitOptions::fixed(1, 2), false).is_err());
    }

    #[test]
    fn demeaned_fit_restores_mean() {
        let xs: Vec<Vec<f64>> = (0..12).map(|k| vec![3.0 + 0.8f64.powi(k), 3.0 - 0.8f64.powi(k)]).collect();
        let s = SnapshotMatrix::from_columns(&xs, 0.1, 0.0, "p").unwrap();
        let model = fit_snapshots(&s, &InputMatrix::none(11), &FitOptions::default(), true).unwrap();
        let rec = model.normalization().unwrap();
        assert!(rec.applied);
        let traj = model.rollout(s.column(0), &InputMatrix::none(0), 11).unwrap();
        // columns keep their offset of 3 rather than collapsing to the demeaned frame
        assert!(traj.column(0).iter().all(|v| *v > 1.0));
    }
}
