use super::*;
use crate::dmdc::{fit_snapshots, FitOptions, InputMatrix};
use faer::Mat;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

const N: usize = 3;
const DT: f64 = 0.1;

fn excitation(n_time: usize, seed: u64) -> SnapshotMatrix {
    let mut rng = StdRng::seed_from_u64(seed);
    let d = Mat::from_fn(N, n_time, |_, _| rng.gen_range(-1.0..1.0));
    SnapshotMatrix::new(d, DT, 0.0, "desired").unwrap()
}

/// `y_{k+1} = a y_k + d_k` from `y_0 = (1, -0.5, 0.25)`.
fn forward_lti(a: f64, d: &SnapshotMatrix, label: &str) -> SnapshotMatrix {
    let n = d.n_time();
    let mut cols = vec![vec![1.0, -0.5, 0.25]];
    for k in 1..n {
        let prev = &cols[k - 1];
        cols.push((0..N).map(|i| a * prev[i] + d.values()[(i, k - 1)]).collect());
    }
    SnapshotMatrix::from_columns(&cols, DT, 0.0, label).unwrap()
}

/// `z_{k-1} = a z_k + d_k` from `z_{n-1} = 0`.
fn backward_lti(a: f64, d: &SnapshotMatrix) -> SnapshotMatrix {
    let n = d.n_time();
    let mut cols = vec![vec![0.0; N]; n];
    for k in (1..n).rev() {
        cols[k - 1] = (0..N).map(|i| a * cols[k][i] + d.values()[(i, k)]).collect();
    }
    SnapshotMatrix::from_columns(&cols, DT, 0.0, "adjoint").unwrap()
}

fn forward_config() -> TrainConfig {
    TrainConfig {
        state_fit: FitOptions::fixed(2 * N, N),
        adjoint_fit: FitOptions::fixed(2 * N, N),
        ..TrainConfig::default()
    }
    .adjoint(InputSource::Desired, TimeDirection::Forward)
}

fn max_diff(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> f64 {
    assert_eq!((a.nrows(), a.ncols()), (b.nrows(), b.ncols()));
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max((a[(i, j)] - b[(i, j)]).abs());
        }
    }
    m
}

fn scaled_identity(c: f64) -> Mat<f64> {
    Mat::from_fn(N, N, |i, j| if i == j { c } else { 0.0 })
}

#[test]
fn coupled_pair_operators_recovered() {
    let d = excitation(25, 1);
    let y = forward_lti(0.9, &d, "state");
    let z = forward_lti(0.8, &d, "adjoint");
    let m = train(&y, &z, &d, 1e-2, &[0, 2], &forward_config(), None).unwrap();
    let eye = scaled_identity(1.0);
    assert!(max_diff(m.state_model().full_state_operator().as_ref(), scaled_identity(0.9).as_ref()) < 1e-8);
    assert!(max_diff(m.state_model().full_input_operator().as_ref(), eye.as_ref()) < 1e-8);
    assert!(max_diff(m.adjoint_model().full_state_operator().as_ref(), scaled_identity(0.8).as_ref()) < 1e-8);
    assert!(max_diff(m.adjoint_model().full_input_operator().as_ref(), eye.as_ref()) < 1e-8);
}

#[test]
fn zero_adjoint_is_rank_zero() {
    let d = excitation(12, 2);
    let y = forward_lti(0.9, &d, "state");
    let z = SnapshotMatrix::new(Mat::zeros(N, 12), DT, 0.0, "adjoint").unwrap();
    let err = train(&y, &z, &d, 1.0, &[0], &forward_config(), None).unwrap_err();
    assert!(matches!(err, Error::RankZero(_)), "{err:?}");
}

#[test]
fn recover_control_divides() {
    let d = excitation(12, 3);
    let y = forward_lti(0.9, &d, "state");
    let z = forward_lti(0.8, &d, "adjoint");
    let m = train(&y, &z, &d, 1e-2, &[1], &forward_config(), None).unwrap();
    assert_eq!(m.recover_control(&[0.0, 0.05, 3.0]).unwrap(), vec![0.05 / 1e-2]);
    assert!((m.recover_control(&[0.0, 0.05, 3.0]).unwrap()[0] - 5.0).abs() < 1e-12);
    assert_eq!(m.recover_control(&[0.0; N]).unwrap(), vec![0.0]);
    assert!(matches!(m.recover_control(&[1.0]), Err(Error::DimensionMismatch(_))));
}

#[test]
fn control_identity_holds_on_every_column() {
    let d = excitation(30, 4);
    let y = forward_lti(0.9, &d, "state");
    let z = forward_lti(0.8, &d, "adjoint");
    let alpha = 0.3;
    let m = train(&y, &z, &d, alpha, &[0, 1, 2], &forward_config(), None).unwrap();
    let rec = m.reconstruct(y.column(0), z.column(0), &d, 20).unwrap();
    let pred = m.predict(y.column(20), z.column(20), &d.columns(20, 10).unwrap(), 9).unwrap();
    for t in [rec, pred] {
        for k in 0..t.adjoint.n_time() {
            for (c, &dof) in m.control_dofs().iter().enumerate() {
                let zk = t.adjoint.values()[(dof, k)];
                let uk = t.control.values()[(c, k)];
                assert_eq!(uk, zk / alpha);
                assert!((alpha * uk - zk).abs() <= f64::EPSILON * zk.abs());
            }
        }
    }
}

#[test]
fn adjoint_ranks_leave_state_untouched() {
    let d = excitation(25, 5);
    let y = forward_lti(0.9, &d, "state");
    let z = forward_lti(0.8, &d, "adjoint");
    let mut cfg = forward_config();
    let a = train(&y, &z, &d, 1.0, &[0], &cfg, None).unwrap();
    cfg.adjoint_fit = FitOptions::with_output_rank(1);
    let b = train(&y, &z, &d, 1.0, &[0], &cfg, None).unwrap();
    let ra = a.reconstruct(y.column(0), z.column(0), &d, 24).unwrap();
    let rb = b.reconstruct(y.column(0), z.column(0), &d, 24).unwrap();
    assert_eq!(ra.state, rb.state);
    assert_ne!(ra.adjoint, rb.adjoint);
}

#[test]
fn misaligned_inputs_change_the_input_operator() {
    let d = excitation(26, 6);
    let y = forward_lti(0.9, &d, "state");
    let z = forward_lti(0.8, &d, "adjoint");
    let cfg = forward_config();
    let aligned = train(&y.columns(0, 25).unwrap(), &z.columns(0, 25).unwrap(), &d.columns(0, 25).unwrap(), 1.0, &[0], &cfg, None).unwrap();
    let shifted = SnapshotMatrix::new(d.values().subcols(1, 25).to_owned(), DT, 0.0, "desired").unwrap();
    let off = train(&y.columns(0, 25).unwrap(), &z.columns(0, 25).unwrap(), &shifted, 1.0, &[0], &cfg, None).unwrap();
    let gap = max_diff(
        aligned.state_model().full_input_operator().as_ref(),
        off.state_model().full_input_operator().as_ref(),
    );
    assert!(gap > 1e-2, "B barely moved: {gap}");
}

#[test]
fn decoupled_forecast_matches_individual_fits() {
    let d = excitation(40, 7);
    let y = forward_lti(0.9, &d, "state");
    let z = forward_lti(0.8, &d, "adjoint");
    let (yt, zt, dt_) = (y.columns(0, 20).unwrap(), z.columns(0, 20).unwrap(), d.columns(0, 20).unwrap());
    let cfg = forward_config();
    let m = train(&yt, &zt, &dt_, 0.5, &[2], &cfg, None).unwrap();
    let future = d.columns(19, 21).unwrap();
    let pred = m.predict(y.column(19), z.column(19), &future, 20).unwrap();

    let inputs = InputMatrix::from_snapshots(&dt_, 0, 19).unwrap();
    let future_inputs = InputMatrix::from_snapshots(&future, 0, 20).unwrap();
    for (data, got) in [(&yt, &pred.state), (&zt, &pred.adjoint)] {
        let alone = fit_snapshots(data, &inputs, &cfg.state_fit, false).unwrap();
        let roll = alone.rollout(data.column(19), &future_inputs, 20).unwrap();
        assert_eq!(roll.values().subcols(1, 20), got.values());
    }
    // and both agree with the true future
    let truth_y = y.columns(20, 20).unwrap();
    let truth_z = z.columns(20, 20).unwrap();
    assert!(max_diff(truth_y.values(), pred.state.values()) < 1e-8);
    assert!(max_diff(truth_z.values(), pred.adjoint.values()) < 1e-8);
    assert!((pred.state.t0() - 20.0 * DT).abs() < 1e-12);
}

#[test]
fn predicting_the_training_window_replays_reconstruction() {
    let d = excitation(30, 8);
    let y = forward_lti(0.9, &d, "state");
    let z = forward_lti(0.8, &d, "adjoint");
    let mut cfg = forward_config();
    cfg.state_fit = FitOptions::with_output_rank(2);
    cfg.adjoint_fit = FitOptions::with_output_rank(2);
    let m = train(&y, &z, &d, 1.0, &[0], &cfg, None).unwrap();
    let rec = m.reconstruct(y.column(0), z.column(0), &d, 29).unwrap();
    let pred = m.predict(y.column(0), z.column(0), &d, 29).unwrap();
    assert_eq!(rec.state.values().subcols(1, 29), pred.state.values());
    assert_eq!(rec.adjoint.values().subcols(1, 29), pred.adjoint.values());
}

#[test]
fn reversed_adjoint_runs_back_from_the_terminal_value() {
    let n = 31;
    let d = excitation(n, 9);
    let y = forward_lti(0.9, &d, "state");
    let z = backward_lti(0.7, &d);
    let t_final = (n - 1) as f64 * DT;
    let cfg = TrainConfig {
        state_fit: FitOptions::fixed(2 * N, N),
        adjoint_fit: FitOptions::fixed(2 * N, N),
        ..TrainConfig::default()
    }
    .adjoint(InputSource::Desired, TimeDirection::Reversed);
    let train_n = 15;
    let (yt, zt, dtr) = (
        y.columns(0, train_n).unwrap(),
        z.columns(0, train_n).unwrap(),
        d.columns(0, train_n).unwrap(),
    );
    assert!(matches!(train(&yt, &zt, &dtr, 1.0, &[0], &cfg, None), Err(Error::InvalidArgument(_))));
    let m = train(&yt, &zt, &dtr, 1.0, &[0], &cfg, Some(t_final)).unwrap();
    assert!(max_diff(m.adjoint_model().full_state_operator().as_ref(), scaled_identity(0.7).as_ref()) < 1e-8);

    let rec = m.reconstruct(y.column(0), zt.column(train_n - 1), &dtr, train_n - 1).unwrap();
    assert!(max_diff(rec.adjoint.values(), zt.values()) < 1e-8);
    assert!(max_diff(rec.state.values(), yt.values()) < 1e-8);

    let future = d.columns(train_n - 1, n - train_n + 1).unwrap();
    let pred = m.predict_from_tail(&future, 10).unwrap();
    let truth = z.columns(train_n, 10).unwrap();
    assert!(max_diff(pred.adjoint.values(), truth.values()) < 1e-8);
    // the horizon past the final time is refused
    assert!(m.predict_from_tail(&future, n).is_err());
}

#[test]
fn reversed_with_state_inputs() {
    // z_{k-1} = 0.6 z_k + 0.5 y_k + d_k
    let n = 30;
    let d = excitation(n, 10);
    let y = forward_lti(0.9, &d, "state");
    let mut cols = vec![vec![0.0; N]; n];
    for k in (1..n).rev() {
        cols[k - 1] = (0..N)
            .map(|i| 0.6 * cols[k][i] + 0.5 * y.values()[(i, k)] + d.values()[(i, k)])
            .collect();
    }
    let z = SnapshotMatrix::from_columns(&cols, DT, 0.0, "adjoint").unwrap();
    let cfg = TrainConfig {
        state_fit: FitOptions::fixed(2 * N, N),
        adjoint_fit: FitOptions::fixed(3 * N, N),
        ..TrainConfig::default()
    };
    assert_eq!(cfg.adjoint_inputs, InputSource::DesiredAndState);
    assert_eq!(cfg.adjoint_direction, TimeDirection::Reversed);
    let m = train(&y, &z, &d, 1.0, &[1], &cfg, Some((n - 1) as f64 * DT)).unwrap();
    let rec = m.reconstruct(y.column(0), &[0.0; N], &d, n - 1).unwrap();
    assert!(max_diff(rec.adjoint.values(), z.values()) < 1e-8);
}

#[test]
fn train_validates() {
    let d = excitation(12, 11);
    let y = forward_lti(0.9, &d, "state");
    let z = forward_lti(0.8, &d, "adjoint");
    let cfg = forward_config();
    assert!(matches!(train(&y, &z, &d, 0.0, &[0], &cfg, None), Err(Error::InvalidArgument(_))));
    assert!(matches!(train(&y, &z, &d, 1.0, &[N], &cfg, None), Err(Error::InvalidArgument(_))));
    let short = d.columns(0, 11).unwrap();
    assert!(matches!(train(&y, &z, &short, 1.0, &[0], &cfg, None), Err(Error::DimensionMismatch(_))));
    let other_dt = SnapshotMatrix::new(d.values().to_owned(), 2.0 * DT, 0.0, "d").unwrap();
    assert!(matches!(train(&y, &z, &other_dt, 1.0, &[0], &cfg, None), Err(Error::InvalidArgument(_))));
    let m = train(&y, &z, &d, 1.0, &[0], &cfg, None).unwrap();
    assert!(m.reconstruct(y.column(0), z.column(0), &d, 13).is_err());
    assert!(m.reconstruct(y.column(0), z.column(0), &other_dt, 5).is_err());
}

#[test]
fn save_load_roundtrip() {
    let d = excitation(20, 12);
    let y = forward_lti(0.9, &d, "state");
    let z = backward_lti(0.7, &d);
    let cfg = TrainConfig::with_ranks(2, 2);
    let m = train(&y, &z, &d, 0.25, &[0, 2], &cfg, Some(1.9 + 0.5)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("pm.json");
    let sources = SourceFiles {
        state: Some("y.snp".into()),
        ..SourceFiles::default()
    };
    save_partitioned(&m, &sources, &path).unwrap();
    let (back, src) = load_partitioned(&path).unwrap();
    assert_eq!(src, sources);
    assert_eq!(back.config(), m.config());
    assert_eq!(back.tail(), m.tail());
    let a = m.reconstruct(y.column(0), z.column(19), &d, 19).unwrap();
    let b = back.reconstruct(y.column(0), z.column(19), &d, 19).unwrap();
    assert_eq!(a.state, b.state);
    assert_eq!(a.adjoint, b.adjoint);
    assert_eq!(a.control, b.control);
}
