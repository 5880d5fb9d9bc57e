//! Subcommand bodies. Each one loads and checks every input, computes, and
//! only then creates the output directory.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ocpdmd::dmdc::FitOptions;
use ocpdmd::metrics::{mean_prediction_error, reconstruction_curve, sweep_train_size, ErrorCurve, SweepData, TimingReport};
use ocpdmd::ocp::{assemble, preset, solve_assembled, PRESETS};
use ocpdmd::partitioned::{load_partitioned, save_partitioned, train, SourceFiles, Trajectories};
use ocpdmd::pipeline::{execute, PipelineManifest};
use ocpdmd::snapshots::save_binary;
use ocpdmd::{ParabolicOcpConfig, PartitionedModel, SnapshotMatrix, TimeDirection, TrainConfig};
use serde_json::{json, Value};

use crate::data::{absolute, read_snapshots, require, FomFiles, FomRecord, Resolved, FOM_FORMAT, FOM_RECORD};
use crate::error::{CliError, CliResult};
use crate::manifest::{write_atomic, RunManifest};
use crate::{DataArgs, FitArgs, FomArgs, ModelArgs, PredictArgs, ReconstructArgs, RunArgs, SweepArgs};

fn create_out(out: &Path) -> CliResult<()> {
    fs::create_dir_all(out).map_err(|e| CliError::output(out, e))
}

fn save_snp(s: &SnapshotMatrix, path: PathBuf, written: &mut Vec<PathBuf>) -> CliResult<()> {
    save_binary(s, &path).map_err(|e| CliError::output(&path, e))?;
    written.push(path);
    Ok(())
}

fn save_json(value: &impl serde::Serialize, path: PathBuf, written: &mut Vec<PathBuf>) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::output(&path, e))?;
    write_atomic(&path, text.as_bytes())?;
    written.push(path);
    Ok(())
}

fn save_curve(c: &ErrorCurve, path: PathBuf, written: &mut Vec<PathBuf>) -> CliResult<()> {
    c.save_csv(&path).map_err(|e| CliError::output(&path, e))?;
    written.push(path);
    Ok(())
}

fn finish(mut manifest: RunManifest, out: &Path, written: &[PathBuf]) -> CliResult<String> {
    manifest.add_outputs(out, written)?;
    let path = manifest.write(out)?;
    Ok(path.display().to_string())
}

fn load_config(a: &FomArgs) -> CliResult<ParabolicOcpConfig> {
    match (&a.preset, &a.config) {
        (Some(name), None) => preset(name).map_err(|_| {
            CliError::usage(format!("unknown preset `{name}`; available: {}", PRESETS.join(", ")))
        }),
        (None, Some(path)) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
        }
        _ => Err(CliError::usage("give exactly one of --preset and --config")),
    }
}

pub fn fom(a: &FomArgs) -> CliResult<Value> {
    let cfg = load_config(a)?;
    cfg.validate().map_err(CliError::input)?;
    let ops = assemble(&cfg).map_err(CliError::input)?;
    for w in &ops.warnings {
        eprintln!("warning: {w}");
    }
    let clock = Instant::now();
    let sol = solve_assembled(&ops, &cfg).map_err(CliError::Solver)?;
    let wall = clock.elapsed().as_secs_f64();

    let mut manifest = RunManifest::new(&cfg)?;
    if let Some(p) = &a.config {
        manifest.add_input(p)?;
    }
    create_out(&a.out)?;
    let mut written = Vec::new();
    let files = FomFiles {
        state: "state.snp".into(),
        control: "control.snp".into(),
        adjoint: "adjoint.snp".into(),
        desired: "desired.snp".into(),
    };
    save_snp(&sol.state, a.out.join(&files.state), &mut written)?;
    save_snp(&sol.control, a.out.join(&files.control), &mut written)?;
    save_snp(&sol.adjoint, a.out.join(&files.adjoint), &mut written)?;
    save_snp(&sol.desired, a.out.join(&files.desired), &mut written)?;
    let record = FomRecord {
        format: FOM_FORMAT.into(),
        final_time: cfg.final_time(),
        config: cfg,
        dims: sol.dims,
        objective: sol.objective,
        kkt_residual: sol.kkt_residual,
        optimality_residual: sol.optimality_residual,
        alpha: sol.alpha,
        control_dofs: sol.control_dofs.clone(),
        files,
        warnings: sol.warnings.clone(),
        wall_time: wall,
        solve_time: sol.solve_time,
    };
    save_json(&record, a.out.join(FOM_RECORD), &mut written)?;
    manifest.time("fom_wall", wall);
    manifest.time("kkt_solve", sol.solve_time);
    let manifest_path = finish(manifest, &a.out, &written)?;
    Ok(json!({
        "out": a.out,
        "manifest": manifest_path,
        "dims": sol.dims,
        "n_time": sol.state.n_time(),
        "alpha": sol.alpha,
        "objective": sol.objective,
        "kkt_residual": sol.kkt_residual,
        "optimality_residual": sol.optimality_residual,
        "solve_seconds": sol.solve_time,
    }))
}

fn train_config(m: &ModelArgs) -> TrainConfig {
    TrainConfig {
        state_fit: FitOptions::with_output_rank(m.ranks[0]),
        adjoint_fit: FitOptions::with_output_rank(m.ranks[1]),
        adjoint_inputs: m.inputs.into(),
        adjoint_direction: m.direction.into(),
        demean_state: m.demean_state,
        demean_adjoint: m.demean_adjoint,
    }
}

/// Fully loaded training data.
struct Training {
    state: SnapshotMatrix,
    adjoint: SnapshotMatrix,
    desired: SnapshotMatrix,
    control: Option<SnapshotMatrix>,
    alpha: f64,
    control_dofs: Vec<usize>,
    final_time: f64,
    fom_seconds: Option<f64>,
    paths: Vec<PathBuf>,
}

fn load_training(d: &DataArgs) -> CliResult<Training> {
    let r = d.resolve()?;
    let alpha = r.alpha()?;
    let sp = require(&r.state, "state")?;
    let zp = require(&r.adjoint, "adjoint")?;
    let dp = require(&r.desired, "desired")?;
    let state = read_snapshots(sp)?;
    let adjoint = read_snapshots(zp)?;
    let desired = read_snapshots(dp)?;
    let mut paths = vec![sp.to_path_buf(), zp.to_path_buf(), dp.to_path_buf()];
    let control = match &r.control {
        Some(p) => {
            paths.push(p.clone());
            Some(read_snapshots(p)?)
        }
        None => None,
    };
    let control_dofs = r.control_dofs.clone().unwrap_or_else(|| (0..adjoint.n_dof()).collect());
    if let Some(bad) = control_dofs.iter().find(|&&c| c >= adjoint.n_dof()) {
        return Err(CliError::usage(format!("control DOF {bad} outside the {}-row adjoint", adjoint.n_dof())));
    }
    let n = state.n_time();
    if adjoint.n_time() != n || desired.n_time() != n {
        return Err(CliError::usage(format!(
            "state, adjoint and desired have {}, {} and {} columns",
            n,
            adjoint.n_time(),
            desired.n_time()
        )));
    }
    if let Some(u) = &control {
        if u.n_dof() != control_dofs.len() || u.n_time() != n {
            return Err(CliError::usage("control snapshots do not match the control DOFs"));
        }
    }
    let final_time = r.final_time.unwrap_or_else(|| state.time(n - 1));
    Ok(Training {
        state,
        adjoint,
        desired,
        control,
        alpha,
        control_dofs,
        final_time,
        fom_seconds: r.fom_seconds,
        paths,
    })
}

pub fn fit(a: &FitArgs) -> CliResult<Value> {
    let t = load_training(&a.data)?;
    let n = t.state.n_time();
    let nt = a.n_train.unwrap_or(n);
    if nt < 2 || nt > n {
        return Err(CliError::usage(format!("--n-train must lie in 2..={n}, got {nt}")));
    }
    let config = train_config(&a.model);
    let cols = |s: &SnapshotMatrix| s.columns(0, nt).map_err(CliError::input);
    let clock = Instant::now();
    let model = train(
        &cols(&t.state)?,
        &cols(&t.adjoint)?,
        &cols(&t.desired)?,
        t.alpha,
        &t.control_dofs,
        &config,
        Some(t.final_time),
    )
    .map_err(CliError::fit)?;
    let fit_seconds = clock.elapsed().as_secs_f64();

    let mut manifest = RunManifest::new(&(&config, t.alpha, &t.control_dofs, nt))?;
    for p in &t.paths {
        manifest.add_input(p)?;
    }
    let sources = SourceFiles {
        state: Some(absolute(&t.paths[0])),
        adjoint: Some(absolute(&t.paths[1])),
        desired: Some(absolute(&t.paths[2])),
    };
    create_out(&a.out)?;
    let model_path = a.out.join("model.json");
    save_partitioned(&model, &sources, &model_path).map_err(|e| CliError::output(&model_path, e))?;
    let written = model_files(&model_path);
    manifest.time("fit", fit_seconds);
    let manifest_path = finish(manifest, &a.out, &written)?;
    Ok(json!({
        "out": a.out,
        "manifest": manifest_path,
        "model": model_path,
        "n_train": nt,
        "ranks": [model.state_model().rank_output(), model.adjoint_model().rank_output()],
        "fit_seconds": fit_seconds,
    }))
}

/// The model header plus its block files, in a fixed order.
fn model_files(header: &Path) -> Vec<PathBuf> {
    let mut files = vec![header.to_path_buf()];
    let stem = header.file_stem().and_then(|s| s.to_str()).unwrap_or("model");
    if let Some(dir) = header.parent() {
        let mut blocks: Vec<PathBuf> = fs::read_dir(dir)
            .into_iter()
            .flatten()
            .flatten()
            .map(|e| e.path())
            .filter(|p| {
                p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.starts_with(&format!("{stem}.")) && n.ends_with(".snp"))
            })
            .collect();
        blocks.sort();
        files.extend(blocks);
    }
    files
}

fn load_model(path: &Path) -> CliResult<(PartitionedModel, SourceFiles)> {
    load_partitioned(path).map_err(CliError::input)
}

fn check_dt(model: &PartitionedModel, s: &SnapshotMatrix, what: &str) -> CliResult<()> {
    if (s.dt() - model.dt()).abs() > 1e-9 * model.dt().abs() {
        return Err(CliError::usage(format!(
            "{what} has dt = {}, the model was fitted with dt = {}",
            s.dt(),
            model.dt()
        )));
    }
    Ok(())
}

fn column_at(s: &SnapshotMatrix, t: f64) -> Option<usize> {
    let k = ((t - s.t0()) / s.dt()).round();
    (k >= 0.0 && (k as usize) < s.n_time() && (s.time(k as usize) - t).abs() <= 1e-9 * s.dt().max(1.0)).then_some(k as usize)
}

fn write_trajectories(stage: &str, t: &Trajectories, out: &Path, written: &mut Vec<PathBuf>) -> CliResult<()> {
    for (name, s) in [("state", &t.state), ("adjoint", &t.adjoint), ("control", &t.control)] {
        save_snp(&s.clone().with_label(format!("{stage}/{name}")), out.join(format!("{stage}_{name}.snp")), written)?;
    }
    Ok(())
}

pub fn reconstruct(a: &ReconstructArgs) -> CliResult<Value> {
    let (model, sources) = load_model(&a.model)?;
    let r: Resolved = a.data.resolve()?.with_sources(&sources);
    let state = read_snapshots(require(&r.state, "state")?)?;
    let adjoint = read_snapshots(require(&r.adjoint, "adjoint")?)?;
    let desired = read_snapshots(require(&r.desired, "desired")?)?;
    for (s, what) in [(&state, "state"), (&adjoint, "adjoint"), (&desired, "desired state")] {
        check_dt(&model, s, what)?;
    }
    let reversed = model.config().adjoint_direction == TimeDirection::Reversed;
    let available = desired.n_time().min(state.n_time()).min(adjoint.n_time());
    let steps = a.steps.unwrap_or(available.saturating_sub(1));
    if steps == 0 || steps + 1 > available {
        return Err(CliError::usage(format!(
            "--steps must lie in 1..{available} for {available} available snapshots"
        )));
    }
    let boundary = if reversed { adjoint.column(steps) } else { adjoint.column(0) };
    let clock = Instant::now();
    let rec = model
        .reconstruct(state.column(0), boundary, &desired, steps)
        .map_err(CliError::fit)?;
    let seconds = clock.elapsed().as_secs_f64();

    let window = |s: &SnapshotMatrix, count: usize| s.columns(0, count).map_err(CliError::input);
    let state_curve = reconstruction_curve(&window(&state, steps + 1)?, &rec.state).map_err(CliError::input)?;
    // the terminal adjoint column is excluded (zero reference)
    let adjoint_curve =
        reconstruction_curve(&window(&adjoint, steps)?, &window(&rec.adjoint, steps)?).map_err(CliError::input)?;

    let mut manifest = RunManifest::new(&(model.config(), steps))?;
    manifest.add_input(&a.model)?;
    for p in [&r.state, &r.adjoint, &r.desired].into_iter().flatten() {
        manifest.add_input(p)?;
    }
    create_out(&a.out)?;
    let mut written = Vec::new();
    write_trajectories("reconstruction", &rec, &a.out, &mut written)?;
    save_curve(&state_curve.clone().with_label("state"), a.out.join("reconstruction_state.csv"), &mut written)?;
    save_curve(&adjoint_curve.clone().with_label("adjoint"), a.out.join("reconstruction_adjoint.csv"), &mut written)?;
    manifest.time("reconstruct", seconds);
    let manifest_path = finish(manifest, &a.out, &written)?;
    Ok(json!({
        "out": a.out,
        "manifest": manifest_path,
        "steps": steps,
        "first_step_state_error": state_curve.values[0],
        "state_mean_error": state_curve.mean_over(1..steps + 1),
        "adjoint_mean_error": adjoint_curve.mean(),
    }))
}

pub fn predict(a: &PredictArgs) -> CliResult<Value> {
    let (model, sources) = load_model(&a.model)?;
    let r = a.data.resolve()?.with_sources(&sources);
    let desired = read_snapshots(require(&r.desired, "desired")?)?;
    check_dt(&model, &desired, "desired state")?;
    if a.steps == 0 {
        return Err(CliError::usage("--steps must be positive"));
    }
    let start = column_at(&desired, model.tail().time).ok_or_else(|| {
        CliError::usage(format!(
            "the desired state does not cover the end of training at t = {}",
            model.tail().time
        ))
    })?;
    let future = desired
        .columns(start, desired.n_time() - start)
        .map_err(CliError::input)?;
    let clock = Instant::now();
    let pred = model.predict_from_tail(&future, a.steps).map_err(CliError::fit)?;
    let seconds = clock.elapsed().as_secs_f64();

    // score against reference snapshots when they cover the forecast
    let mut errors = serde_json::Map::new();
    let mut curves = Vec::new();
    let mut inputs = vec![r.desired.clone()];
    for (name, path, got) in [("state", &r.state, &pred.state), ("adjoint", &r.adjoint, &pred.adjoint)] {
        let Some(path) = path else { continue };
        let Ok(truth) = read_snapshots(path) else { continue };
        if truth.n_dof() != got.n_dof() || start + 1 + a.steps > truth.n_time() {
            continue;
        }
        let window = truth.columns(start + 1, a.steps).map_err(CliError::input)?;
        if let Ok(mut curve) = reconstruction_curve(&window, got) {
            curve.abscissae = (start + 1..start + 1 + a.steps).collect();
            errors.insert(name.into(), json!(mean_prediction_error(&window, got).ok()));
            curves.push(curve.with_label(name));
            inputs.push(Some(path.clone()));
        }
    }

    let mut manifest = RunManifest::new(&(model.config(), a.steps))?;
    manifest.add_input(&a.model)?;
    for p in inputs.iter().flatten() {
        manifest.add_input(p)?;
    }
    create_out(&a.out)?;
    let mut written = Vec::new();
    write_trajectories("prediction", &pred, &a.out, &mut written)?;
    for c in &curves {
        save_curve(c, a.out.join(format!("prediction_{}.csv", c.label)), &mut written)?;
    }
    manifest.time("predict", seconds);
    let manifest_path = finish(manifest, &a.out, &written)?;
    Ok(json!({
        "out": a.out,
        "manifest": manifest_path,
        "steps": a.steps,
        "first_index": start + 1,
        "mean_errors": errors,
        "predict_seconds": seconds,
    }))
}

pub fn sweep(a: &SweepArgs) -> CliResult<Value> {
    let t = load_training(&a.data)?;
    let n = t.state.n_time();
    if let Some(w) = a.sizes.windows(2).find(|w| w[1] <= w[0]) {
        return Err(CliError::usage(format!("--sizes must be strictly increasing ({} then {})", w[0], w[1])));
    }
    let largest = *a.sizes.last().unwrap_or(&0);
    if a.sizes.first().is_some_and(|&s| s < 2) || a.test == 0 || largest + a.test > n {
        return Err(CliError::usage(format!(
            "sizes {:?} with a {}-column test window do not fit in {n} snapshots",
            a.sizes, a.test
        )));
    }
    let config = train_config(&a.model);
    let data = SweepData {
        state: &t.state,
        adjoint: &t.adjoint,
        desired: &t.desired,
        control: t.control.as_ref(),
        alpha: t.alpha,
        control_dofs: &t.control_dofs,
        final_time: Some(t.final_time),
    };
    let result = sweep_train_size(&data, &a.sizes, a.test, &config).map_err(CliError::fit)?;

    // timing on the largest train size, outside the sweep
    let cols = |s: &SnapshotMatrix| s.columns(0, largest).map_err(CliError::input);
    let clock = Instant::now();
    let model = train(
        &cols(&t.state)?,
        &cols(&t.adjoint)?,
        &cols(&t.desired)?,
        t.alpha,
        &t.control_dofs,
        &config,
        Some(t.final_time),
    )
    .map_err(CliError::fit)?;
    let fit_seconds = clock.elapsed().as_secs_f64();
    let future = t.desired.columns(largest - 1, n - largest + 1).map_err(CliError::input)?;
    let clock = Instant::now();
    model.predict_from_tail(&future, a.test).map_err(CliError::fit)?;
    let predict_seconds = clock.elapsed().as_secs_f64();
    let timing = match t.fom_seconds {
        Some(fom) => Some(
            TimingReport::new(fom, fit_seconds.max(f64::MIN_POSITIVE), predict_seconds.max(f64::MIN_POSITIVE))
                .map_err(CliError::input)?,
        ),
        None => None,
    };

    let mut manifest = RunManifest::new(&(&config, &a.sizes, a.test, t.alpha))?;
    for p in &t.paths {
        manifest.add_input(p)?;
    }
    create_out(&a.out)?;
    let mut written = Vec::new();
    for c in [Some(&result.state), Some(&result.adjoint), result.control.as_ref()].into_iter().flatten() {
        save_curve(c, a.out.join(format!("sweep_{}.csv", c.label)), &mut written)?;
    }
    save_json(&result, a.out.join("sweep.json"), &mut written)?;
    let timing_json = json!({
        "fit_seconds": fit_seconds,
        "predict_seconds": predict_seconds,
        "report": timing,
    });
    let timing_path = a.out.join("timing.json");
    let text = serde_json::to_string_pretty(&timing_json).map_err(|e| CliError::output(&timing_path, e))?;
    write_atomic(&timing_path, text.as_bytes())?;
    manifest.time("fit_largest", fit_seconds);
    manifest.time("predict_largest", predict_seconds);
    let manifest_path = finish(manifest, &a.out, &written)?;
    Ok(json!({
        "out": a.out,
        "manifest": manifest_path,
        "sizes": a.sizes,
        "test": a.test,
        "state": result.state.values,
        "adjoint": result.adjoint.values,
        "control": result.control.as_ref().map(|c| c.values.clone()),
        "speedup": timing.map(|t| t.speedup),
    }))
}

pub fn run(a: &RunArgs) -> CliResult<Value> {
    let m = PipelineManifest::load(&a.manifest).map_err(CliError::input)?;
    let base = a.manifest.parent().unwrap_or(Path::new("."));
    let inputs = m.inputs(base).map_err(CliError::input)?;
    let clock = Instant::now();
    let result = execute(&inputs, &m.settings).map_err(CliError::fit)?;
    let seconds = clock.elapsed().as_secs_f64();

    let mut manifest = RunManifest::new(&m)?;
    manifest.add_input(&a.manifest)?;
    for p in [Some(&m.state), Some(&m.adjoint), Some(&m.desired), m.control.as_ref()].into_iter().flatten() {
        manifest.add_input(&base.join(p))?;
    }
    create_out(&a.out)?;
    let written = result
        .write(&a.out, &m.sources())
        .map_err(|e| CliError::output(&a.out, e))?;
    let mut all = Vec::new();
    for p in written {
        if p.extension().is_some_and(|e| e == "json") && p.file_name().is_some_and(|n| n == "model.json") {
            all.extend(model_files(&p));
        } else {
            all.push(p);
        }
    }
    manifest.time("pipeline", seconds);
    let manifest_path = finish(manifest, &a.out, &all)?;
    let r = &result.report;
    Ok(json!({
        "out": a.out,
        "manifest": manifest_path,
        "reconstruction": {
            "first_step_state": r.reconstruction.first_step_state,
            "state_mean": r.reconstruction.state_mean,
            "adjoint_mean": r.reconstruction.adjoint_mean,
            "control_mean": r.reconstruction.control_mean,
        },
        "prediction": {
            "state": r.prediction.state,
            "adjoint": r.prediction.adjoint,
            "control": r.prediction.control,
        },
        "speedup": r.timing.speedup.map(|t| t.speedup),
    }))
}
