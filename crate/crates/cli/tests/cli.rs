use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ocpdmd::ocp::{tiny, ControlKind};
use ocpdmd::snapshots::{load, save_binary};
use ocpdmd::SnapshotMatrix;
use serde_json::Value;

fn ocpdmd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ocpdmd"))
        .args(args)
        .env_remove("OCPDMD_THREADS")
        .output()
        .expect("binary runs")
}

fn summary(out: &Output) -> Value {
    let stdout = String::from_utf8_lossy(&out.stdout);
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines.len(), 1, "stdout: {stdout}\nstderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_str(lines[0]).unwrap()
}

fn ok(out: &Output) -> Value {
    assert_eq!(
        out.status.code(),
        Some(0),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let s = summary(out);
    assert_eq!(s["status"], "ok");
    s
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Tiny boundary-control FOM written to `dir/fom`.
fn tiny_fom(dir: &Path) -> PathBuf {
    let cfg = dir.join("tiny.json");
    fs::write(&cfg, serde_json::to_string(&tiny(ControlKind::Boundary, 12)).unwrap()).unwrap();
    let out = dir.join("fom");
    ok(&ocpdmd(&["fom", "--config", s(&cfg), "--out", s(&out)]));
    out
}

#[test]
fn fom_writes_snapshots_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = tiny_fom(dir.path());
    for name in ["state.snp", "control.snp", "adjoint.snp", "desired.snp", "fom.json", "manifest.json"] {
        assert!(out.join(name).exists(), "{name}");
    }
    assert_eq!(load(out.join("state.snp")).unwrap().n_time(), 13);
    let manifest: Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 5);
    assert_eq!(manifest["inputs"].as_array().unwrap().len(), 1);
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
    assert!(manifest["wall_times"]["kkt_solve"].as_f64().unwrap() > 0.0);
}

#[test]
fn graetz_preset_has_51_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("g1");
    let sm = ok(&ocpdmd(&["fom", "--preset", "graetz_analog", "--out", s(&out)]));
    assert_eq!(sm["n_time"], 51);
    assert_eq!(sm["dims"]["kkt"], 33300);
    for name in ["state.snp", "control.snp", "adjoint.snp"] {
        assert_eq!(load(out.join(name)).unwrap().n_time(), 51);
    }
}

#[test]
fn distributed_preset_records_alpha() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d1");
    let sm = ok(&ocpdmd(&["fom", "--preset", "distributed_analog", "--out", s(&out)]));
    assert_eq!(sm["alpha"].as_f64(), Some(1e-5));
    let record: Value = serde_json::from_str(&fs::read_to_string(out.join("fom.json")).unwrap()).unwrap();
    assert_eq!(record["alpha"].as_f64(), Some(1e-5));
}

#[test]
fn usage_errors_leave_no_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("never");
    let r = ocpdmd(&["fom", "--preset", "no_such_problem", "--out", s(&out)]);
    assert_eq!(r.status.code(), Some(2));
    assert_eq!(summary(&r)["status"], "error");
    assert!(!out.exists());

    let r = ocpdmd(&["fom", "--out", s(&out)]);
    assert_eq!(r.status.code(), Some(2));
    assert!(!out.exists());

    let mut bad = tiny(ControlKind::Boundary, 3);
    bad.alpha = -1.0;
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, serde_json::to_string(&bad).unwrap()).unwrap();
    let r = ocpdmd(&["fom", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(r.status.code(), Some(2));
    assert!(!out.exists());

    let r = Command::new(env!("CARGO_BIN_EXE_ocpdmd"))
        .args(["fom", "--preset", "graetz_analog", "--out", s(&out)])
        .env("OCPDMD_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(r.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn fit_reconstruct_predict_chain() {
    let dir = tempfile::tempdir().unwrap();
    let fom = tiny_fom(dir.path());
    let fit_out = dir.path().join("fit");
    let sm = ok(&ocpdmd(&[
        "fit", "--from", s(&fom), "--ranks", "2,2", "--n-train", "8", "--out", s(&fit_out),
    ]));
    assert_eq!(sm["n_train"], 8);
    let model = fit_out.join("model.json");
    assert!(model.exists());

    let rec_out = dir.path().join("rec");
    let sm = ok(&ocpdmd(&["reconstruct", "--model", s(&model), "--steps", "7", "--out", s(&rec_out)]));
    assert!(sm["first_step_state_error"].as_f64().unwrap() < 1.0);
    let rs = load(rec_out.join("reconstruction_state.snp")).unwrap();
    assert_eq!(rs.n_time(), 8);
    let csv = fs::read_to_string(rec_out.join("reconstruction_state.csv")).unwrap();
    assert!(csv.starts_with("k,E_k\n0,"));

    let pred_out = dir.path().join("pred");
    let sm = ok(&ocpdmd(&["predict", "--model", s(&model), "--steps", "4", "--out", s(&pred_out)]));
    assert_eq!(sm["first_index"], 8);
    for name in ["state", "adjoint", "control"] {
        assert_eq!(load(pred_out.join(format!("prediction_{name}.snp"))).unwrap().n_time(), 4);
    }
    assert!(sm["mean_errors"]["state"].as_f64().is_some());

    // control identity on the forecast
    let z = load(pred_out.join("prediction_adjoint.snp")).unwrap();
    let u = load(pred_out.join("prediction_control.snp")).unwrap();
    let record: Value = serde_json::from_str(&fs::read_to_string(fom.join("fom.json")).unwrap()).unwrap();
    let alpha = record["alpha"].as_f64().unwrap();
    let dofs: Vec<usize> = serde_json::from_value(record["control_dofs"].clone()).unwrap();
    for k in 0..z.n_time() {
        for (c, &d) in dofs.iter().enumerate() {
            assert_eq!(u.values()[(c, k)], z.values()[(d, k)] / alpha);
        }
    }
}

#[test]
fn mismatched_dt_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let fom = tiny_fom(dir.path());
    let fit_out = dir.path().join("fit");
    ok(&ocpdmd(&["fit", "--from", s(&fom), "--ranks", "2,2", "--out", s(&fit_out)]));
    let d = load(fom.join("desired.snp")).unwrap();
    let stretched = SnapshotMatrix::new(d.values().to_owned(), 2.0 * d.dt(), d.t0(), "d").unwrap();
    let path = dir.path().join("stretched.snp");
    save_binary(&stretched, &path).unwrap();
    let out = dir.path().join("rec");
    let r = ocpdmd(&[
        "reconstruct", "--model", s(&fit_out.join("model.json")), "--desired", s(&path), "--out", s(&out),
    ]);
    assert_eq!(r.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn rank_zero_fit_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let fom = tiny_fom(dir.path());
    let z = load(fom.join("adjoint.snp")).unwrap();
    let zero = SnapshotMatrix::new(ocpdmd::Mat::zeros(z.n_dof(), z.n_time()), z.dt(), z.t0(), "z").unwrap();
    let path = dir.path().join("zero.snp");
    save_binary(&zero, &path).unwrap();
    let out = dir.path().join("fit");
    let r = ocpdmd(&["fit", "--from", s(&fom), "--adjoint", s(&path), "--out", s(&out)]);
    assert_eq!(r.status.code(), Some(4), "{}", String::from_utf8_lossy(&r.stderr));
    assert!(!out.exists());
}

#[test]
fn sweep_outputs_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let fom = tiny_fom(dir.path());
    let out = dir.path().join("sweep");
    let sm = ok(&ocpdmd(&[
        "sweep", "--from", s(&fom), "--ranks", "2,2", "--sizes", "4,6,8", "--test", "4", "--out", s(&out),
    ]));
    assert_eq!(sm["state"].as_array().unwrap().len(), 3);
    assert!(sm["speedup"].as_f64().is_some());
    for name in ["state", "adjoint", "control"] {
        let csv = fs::read_to_string(out.join(format!("sweep_{name}.csv"))).unwrap();
        assert!(csv.starts_with("train_size,mean_error\n"));
        assert_eq!(csv.lines().count(), 4);
    }
    assert!(out.join("timing.json").exists());

    for sizes in ["4,4", "8,6", "10"] {
        let bad = dir.path().join(format!("bad{sizes}"));
        let r = ocpdmd(&["sweep", "--from", s(&fom), "--sizes", sizes, "--test", "4", "--out", s(&bad)]);
        assert_eq!(r.status.code(), Some(2), "{sizes}");
        assert!(!bad.exists());
    }
}

#[test]
fn test_window_defaults_to_20() {
    let dir = tempfile::tempdir().unwrap();
    let fom = tiny_fom(dir.path());
    // 13 snapshots cannot hold a 20-column test window
    let out = dir.path().join("sweep");
    let r = ocpdmd(&["sweep", "--from", s(&fom), "--sizes", "4", "--out", s(&out)]);
    assert_eq!(r.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&r.stderr);
    assert!(msg.contains("20-column"), "{msg}");
}

#[test]
fn pipeline_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let fom = tiny_fom(dir.path());
    let record: Value = serde_json::from_str(&fs::read_to_string(fom.join("fom.json")).unwrap()).unwrap();
    let manifest = serde_json::json!({
        "state": "fom/state.snp",
        "adjoint": "fom/adjoint.snp",
        "desired": "fom/desired.snp",
        "control": "fom/control.snp",
        "alpha": record["alpha"],
        "control_dofs": record["control_dofs"],
        "ranks": [2, 2],
        "n_train": 6,
        "n_test": 4,
        "sizes": [4, 6],
    });
    let mpath = dir.path().join("pipeline.json");
    fs::write(&mpath, manifest.to_string()).unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&ocpdmd(&["run", "--manifest", s(&mpath), "--out", s(&a)]));
    ok(&ocpdmd(&["run", "--manifest", s(&mpath), "--out", s(&b)]));
    let mut names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.iter().any(|n| n == "reconstruction_state.snp"));
    for name in names {
        let n = name.to_str().unwrap();
        if n.ends_with(".snp") || n.ends_with(".csv") {
            assert_eq!(fs::read(a.join(n)).unwrap(), fs::read(b.join(n)).unwrap(), "{n}");
        }
    }
}
