use super::*;
use crate::dmdc::FitOptions;
use crate::partitioned::{InputSource, TimeDirection};
use faer::Mat;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

#[test]
fn hand_values() {
    assert_eq!(pointwise_relative_error(&[3.0, 4.0], &[3.0, 4.0]).unwrap(), Some(0.0));
    assert_eq!(pointwise_relative_error(&[3.0, 4.0], &[0.0, 0.0]).unwrap(), Some(1.0));
    let e = pointwise_relative_error(&[1.0, 0.0], &[0.0, 1.0]).unwrap().unwrap();
    assert!((e - std::f64::consts::SQRT_2).abs() <= 1e-15);
}

#[test]
fn zero_reference() {
    assert_eq!(pointwise_relative_error(&[0.0, 0.0], &[0.0, 0.0]).unwrap(), Some(0.0));
    assert_eq!(pointwise_relative_error(&[0.0, 0.0], &[1e-30, 0.0]).unwrap(), None);
    assert!(pointwise_relative_error(&[1.0], &[1.0, 2.0]).is_err());
}

#[test]
fn extreme_magnitudes_do_not_overflow() {
    let e = pointwise_relative_error(&[1e200, 1e200], &[0.0, 0.0]).unwrap().unwrap();
    assert!((e - 1.0).abs() < 1e-15);
    let e = pointwise_relative_error(&[1e-200, 0.0], &[2e-200, 0.0]).unwrap().unwrap();
    assert!((e - 1.0).abs() < 1e-15);
}

fn snap(m: Mat<f64>) -> SnapshotMatrix {
    SnapshotMatrix::new(m, 0.5, 0.0, "x").unwrap()
}

#[test]
fn curves() {
    let t = snap(Mat::from_fn(4, 5, |i, j| (i + 2 * j + 1) as f64));
    let same = reconstruction_curve(&t, &t).unwrap();
    assert_eq!(same.values, vec![0.0; 5]);
    assert_eq!(same.abscissae, vec![0, 1, 2, 3, 4]);
    let twice = t.scaled(2.0).unwrap();
    assert_eq!(reconstruction_curve(&t, &twice).unwrap().values, vec![1.0; 5]);
    let narrow = snap(Mat::zeros(4, 4));
    assert!(matches!(reconstruction_curve(&t, &narrow), Err(Error::DimensionMismatch(_))));

    let mut z = Mat::from_fn(2, 3, |_, _| 1.0);
    z[(0, 1)] = 0.0;
    z[(1, 1)] = 0.0;
    let mut a = z.clone();
    a[(0, 1)] = 0.5;
    let err = reconstruction_curve(&snap(z), &snap(a)).unwrap_err();
    assert!(matches!(err, Error::UndefinedError { column: 1 }), "{err:?}");
}

#[test]
fn mean_of_two_columns() {
    let t = snap(Mat::from_fn(1, 2, |_, _| 1.0));
    let a = snap(Mat::from_fn(1, 2, |_, j| if j == 0 { 1.1 } else { 1.3 }));
    assert!((mean_prediction_error(&t, &a).unwrap() - 0.2).abs() < 1e-14);
}

#[test]
fn mean_matches_curve_mean() {
    let mut rng = StdRng::seed_from_u64(3);
    for _ in 0..10 {
        let t = snap(Mat::from_fn(6, 7, |_, _| rng.gen_range(-1.0..1.0)));
        let a = snap(Mat::from_fn(6, 7, |i, j| t.values()[(i, j)] + rng.gen_range(-0.1..0.1)));
        let curve = reconstruction_curve(&t, &a).unwrap();
        assert_eq!(mean_prediction_error(&t, &a).unwrap(), curve.mean().unwrap());
    }
}

#[test]
fn curve_rejects_bad_values() {
    assert!(ErrorCurve::new(vec![1], vec![-1.0], "x", CurveKind::Reconstruction).is_err());
    assert!(ErrorCurve::new(vec![1], vec![f64::NAN], "x", CurveKind::Reconstruction).is_err());
    assert!(ErrorCurve::new(vec![1, 2], vec![0.0], "x", CurveKind::Reconstruction).is_err());
}

#[test]
fn csv_layout() {
    let c = ErrorCurve::new(vec![10, 20], vec![0.5, 0.25], "state", CurveKind::PredictionSweep).unwrap();
    assert_eq!(c.to_csv(), "train_size,mean_error\n10,0.5\n20,0.25\n");
    let r = ErrorCurve::new(vec![0, 1], vec![0.0, 0.1], "state", CurveKind::Reconstruction).unwrap();
    assert_eq!(r.to_csv(), "k,E_k\n0,0\n1,0.1\n");
    assert_eq!(r.mean_over(1..2), Some(0.1));
    assert_eq!(r.mean_over(5..9), None);
}

#[test]
fn timing() {
    let t = TimingReport::new(100.0, 0.5, 1.5).unwrap();
    assert_eq!(t.speedup, 50.0);
    assert!((t.speedup - t.fom_seconds / t.surrogate_seconds()).abs() <= 1e-12 * t.speedup);
    assert!(TimingReport::new(0.0, 0.5, 1.5).is_err());
    assert!(TimingReport::new(1.0, -0.5, 1.5).is_err());
    assert!(TimingReport::new(1.0, 0.5, f64::NAN).is_err());
}

/// y and z driven by the same excitation, exactly linear.
fn lti_data(n_time: usize) -> (SnapshotMatrix, SnapshotMatrix, SnapshotMatrix) {
    let mut rng = StdRng::seed_from_u64(17);
    let d = Mat::from_fn(2, n_time, |_, _| rng.gen_range(-1.0..1.0));
    let mut y = Mat::zeros(2, n_time);
    let mut z = Mat::zeros(2, n_time);
    y[(0, 0)] = 1.0;
    z[(1, 0)] = 1.0;
    for k in 1..n_time {
        for i in 0..2 {
            y[(i, k)] = 0.9 * y[(i, k - 1)] + d[(i, k - 1)];
            z[(i, k)] = 0.7 * z[(i, k - 1)] - 0.5 * d[(i, k - 1)];
        }
    }
    let mk = |m: Mat<f64>, l: &str| SnapshotMatrix::new(m, 0.1, 0.0, l).unwrap();
    (mk(y, "state"), mk(z, "adjoint"), mk(d, "desired"))
}

fn lti_config() -> TrainConfig {
    TrainConfig {
        state_fit: FitOptions::fixed(4, 2),
        adjoint_fit: FitOptions::fixed(4, 2),
        ..TrainConfig::default()
    }
    .adjoint(InputSource::Desired, TimeDirection::Forward)
}

#[test]
fn sweep_on_exact_system() {
    let (y, z, d) = lti_data(40);
    let u = z.rows(&[1]).unwrap().scaled(1.0 / 0.5).unwrap();
    let data = SweepData {
        state: &y,
        adjoint: &z,
        desired: &d,
        control: Some(&u),
        alpha: 0.5,
        control_dofs: &[1],
        final_time: None,
    };
    let r = sweep_train_size(&data, &[8, 12, 20], 20, &lti_config()).unwrap();
    assert_eq!(r.state.abscissae, vec![8, 12, 20]);
    assert_eq!(r.test_start, 20);
    for c in [&r.state, &r.adjoint, r.control.as_ref().unwrap()] {
        assert_eq!(c.kind, CurveKind::PredictionSweep);
        assert!(c.values.iter().all(|&v| v <= 1e-8), "{c:?}");
    }
    let again = sweep_train_size(&data, &[8, 12, 20], 20, &lti_config()).unwrap();
    assert_eq!(r, again);
}

#[test]
fn sweep_preconditions() {
    let (y, z, d) = lti_data(30);
    let data = SweepData {
        state: &y,
        adjoint: &z,
        desired: &d,
        control: None,
        alpha: 1.0,
        control_dofs: &[0],
        final_time: None,
    };
    let cfg = lti_config();
    for sizes in [&[10, 10][..], &[12, 10], &[], &[1]] {
        assert!(matches!(sweep_train_size(&data, sizes, 5, &cfg), Err(Error::InvalidArgument(_))), "{sizes:?}");
    }
    assert!(matches!(sweep_train_size(&data, &[10, 11], 20, &cfg), Err(Error::InvalidArgument(_))));
    assert!(sweep_train_size(&data, &[10], 20, &cfg).is_ok());
    assert!(sweep_train_size(&data, &[10], 0, &cfg).is_err());
}
