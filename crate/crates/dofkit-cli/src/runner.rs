//! Command implementations: each writes its artifacts into the output
//! directory and finishes with a run record.

use dofkit::dof::{
    dof_modulated, empirical_vs_closed_form, heuristic_dof, CutGeometry, DofReport, ModulatedDof,
    Regime,
};
use dofkit::geometry::{
    build_circular_cut_sets, build_spherical_cut_sets, LinearMap, SupportSet,
};
use dofkit::operator::{assemble, build_kernel, AssembleOptions, Resolution};
use dofkit::spectrum::{eigenvalues, scaled_transition, EigenCount, TransitionReport};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;
use std::path::Path;
use std::time::Instant;

use crate::config::{Command, DofSpec, JobConfig, ScalingSpec};
use crate::error::CliError;
use crate::output::{artifact, config_hash, fmt_f64, write_json, Csv, RunRecord};

pub struct Job<'a> {
    pub config: &'a JobConfig,
    pub raw_config: &'a [u8],
    pub out_dir: &'a Path,
}

pub fn run(job: &Job) -> Result<(), CliError> {
    let started = Instant::now();
    let result = match job.config.command {
        Command::Spectrum => run_spectrum(job),
        Command::Sweep => run_sweep(job),
        Command::Dof => run_dof(job),
        Command::Verify => run_verify(job),
    };
    let (artifacts, deferred) = match result {
        Ok(a) => (a, None),
        // a partial sweep still produced artifacts worth recording
        Err((a, e)) => (a, Some(e)),
    };
    let record = RunRecord {
        command: job.config.command.to_string(),
        config_sha256: config_hash(job.raw_config),
        toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
        wall_time_ms: started.elapsed().as_millis(),
        artifacts: artifacts.clone(),
    };
    write_json(&artifact(job.out_dir, "run_record.json"), &record)?;
    match deferred {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

type RunResult = Result<Vec<String>, (Vec<String>, CliError)>;

fn fail(e: impl Into<CliError>) -> (Vec<String>, CliError) {
    (Vec::new(), e.into())
}

fn assemble_options(config: &JobConfig) -> Result<AssembleOptions, CliError> {
    let mut options = AssembleOptions::default();
    if let Some(cap) = config.dense_cap {
        options.dense_cap = cap;
    }
    if let Ok(value) = std::env::var("DOFKIT_DENSE_CAP") {
        options.dense_cap = value.parse().map_err(|_| {
            CliError::config(format!("DOFKIT_DENSE_CAP must be an integer, got `{value}`"))
        })?;
    }
    Ok(options)
}

#[derive(Serialize)]
struct SpectrumSummary<'a> {
    #[serde(flatten)]
    report: &'a TransitionReport,
}

fn run_spectrum(job: &Job) -> RunResult {
    let config = job.config;
    if config.scaling.is_some() {
        return Err(fail(CliError::config(
            "`scaling` applies to the sweep command; spectrum uses identity maps",
        )));
    }
    let (p, q) = config.geometry().map_err(fail)?.build().map_err(fail)?;
    let resolution = config.resolution().map_err(fail)?;
    let options = assemble_options(config).map_err(fail)?;
    let eps = config.eps_list().map_err(fail)?;
    let identity = LinearMap::identity(p.dim());
    let report = scaled_transition(
        &p,
        &q,
        &identity,
        &identity,
        eps,
        &resolution,
        &options,
        "identity".to_string(),
    )
    .map_err(fail)?;

    let mut csv = Csv::new(&["k", "lambda", "n_width"]);
    for (k, lambda) in report.spectrum.eigenvalues.iter().enumerate() {
        csv.row(&[k.to_string(), fmt_f64(*lambda), fmt_f64(lambda.sqrt())]);
    }
    let csv_path = artifact(job.out_dir, "spectrum.csv");
    csv.write(&csv_path).map_err(fail)?;

    let summary_path = artifact(job.out_dir, "summary.json");
    write_json(&summary_path, &SpectrumSummary { report: &report }).map_err(fail)?;
    Ok(vec![
        csv_path.display().to_string(),
        summary_path.display().to_string(),
    ])
}

fn sweep_points(
    spec: &ScalingSpec,
    dim: usize,
) -> Result<Vec<(String, LinearMap, LinearMap)>, CliError> {
    let mut points = Vec::new();
    match spec {
        ScalingSpec::Landau { betas } => {
            for beta in betas {
                points.push((
                    format!("beta={beta}"),
                    LinearMap::scalar(dim, *beta)?,
                    LinearMap::identity(dim),
                ));
            }
        }
        ScalingSpec::Anisotropic { pairs } => {
            for (tau, rho) in pairs {
                let mut a_diag = vec![1.0; dim];
                a_diag[0] = *tau;
                let mut b_diag = vec![*rho; dim];
                b_diag[0] = 1.0;
                points.push((
                    format!("tau={tau},rho={rho}"),
                    LinearMap::diagonal(&a_diag)?,
                    LinearMap::diagonal(&b_diag)?,
                ));
            }
        }
    }
    Ok(points)
}

fn run_sweep(job: &Job) -> RunResult {
    let config = job.config;
    let (p, q) = config.geometry().map_err(fail)?.build().map_err(fail)?;
    let scaling = config
        .scaling
        .as_ref()
        .ok_or_else(|| fail(CliError::config("missing field `scaling`")))?;
    let resolution = config.resolution().map_err(fail)?;
    let options = assemble_options(config).map_err(fail)?;
    let eps = config.eps_list().map_err(fail)?;
    let points = sweep_points(scaling, p.dim()).map_err(fail)?;

    // points run concurrently; collect() keeps sweep order in the output
    let results: Vec<Result<TransitionReport, String>> = points
        .par_iter()
        .map(|(label, a, b)| {
            scaled_transition(
                &p,
                &q,
                a,
                b,
                eps,
                &resolution,
                &options,
                label.clone(),
            )
            .map_err(|e| e.to_string())
        })
        .collect();

    let mut header = vec![
        "index",
        "scaling",
        "active_points",
        "trace",
        "trace_squared",
        "leading_term",
        "transition_point",
        "width",
    ];
    let eps_headers: Vec<(String, String, String)> = (0..eps.len())
        .map(|i| {
            (
                format!("eps_{i}"),
                format!("count_{i}"),
                format!("normalized_error_{i}"),
            )
        })
        .collect();
    for (a, b, c) in &eps_headers {
        header.push(a);
        header.push(b);
        header.push(c);
    }
    header.push("error");
    let mut csv = Csv::new(&header);

    let mut failed = 0usize;
    for (index, (point, result)) in points.iter().zip(&results).enumerate() {
        let mut cells = vec![index.to_string(), point.0.clone()];
        match result {
            Ok(report) => {
                cells.push(report.spectrum.active_points.to_string());
                cells.push(fmt_f64(report.trace.sum));
                cells.push(fmt_f64(report.trace.sum_squared));
                cells.push(fmt_f64(report.leading_term));
                cells.push(report.transition_point.to_string());
                cells.push(report.width.to_string());
                for i in 0..eps.len() {
                    cells.push(fmt_f64(report.counts[i].0));
                    cells.push(report.counts[i].1.to_string());
                    cells.push(fmt_f64(report.normalized_errors[i].1));
                }
                cells.push(String::new());
            }
            Err(message) => {
                failed += 1;
                cells.extend(std::iter::repeat(String::new()).take(6 + 3 * eps.len()));
                cells.push(format!("\"{}\"", message.replace('"', "\"\"")));
            }
        }
        csv.row(&cells);
    }

    let csv_path = artifact(job.out_dir, "sweep.csv");
    csv.write(&csv_path).map_err(fail)?;
    let artifacts = vec![csv_path.display().to_string()];
    if failed > 0 {
        return Err((artifacts, CliError::PartialSweep { failed }));
    }
    Ok(artifacts)
}

#[derive(Serialize)]
struct DofArtifact {
    report: DofReport,
    closed_form_only: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    modulated: Option<ModulatedDof>,
    /// Heuristic frequency-integration value; baseband jobs only.
    #[serde(skip_serializing_if = "Option::is_none")]
    heuristic: Option<f64>,
}

fn cut_sets(spec: &DofSpec) -> Result<(SupportSet, SupportSet), CliError> {
    match spec.cut {
        CutGeometry::Circular { r } => Ok(build_circular_cut_sets(spec.omega, spec.t, r)?),
        CutGeometry::Spherical { r } => Ok(build_spherical_cut_sets(spec.omega, spec.t, r)?),
        CutGeometry::Rotational { .. } => Err(CliError::config(
            "the empirical path supports circular and spherical cuts only",
        )),
    }
}

fn run_dof(job: &Job) -> RunResult {
    let config = job.config;
    let spec = config
        .dof
        .as_ref()
        .ok_or_else(|| fail(CliError::config("missing field `dof`")))?;

    let mut modulated = None;
    let closed_form = match spec.band {
        Some((lo, hi)) => {
            let m = dof_modulated(spec.t, lo, hi, &spec.cut).map_err(fail)?;
            let value = m.leading_term;
            modulated = Some(m);
            value
        }
        None => spec.cut.closed_form(spec.omega, spec.t).map_err(fail)?,
    };
    let heuristic = match spec.band {
        Some(_) => None,
        None => Some(heuristic_dof(&spec.cut, spec.omega, spec.t).map_err(fail)?),
    };

    let report = match spec.empirical_scale {
        None => empirical_vs_closed_form(None, closed_form, spec.epsilon, Regime::Combined)
            .map_err(fail)?,
        Some((tau, rho)) => {
            if modulated.is_some() {
                return Err(fail(CliError::config(
                    "the empirical path applies to baseband jobs; drop `band`",
                )));
            }
            let (p, q) = cut_sets(spec).map_err(fail)?;
            let resolution = config.resolution().map_err(fail)?;
            let options = assemble_options(config).map_err(fail)?;
            let dim = p.dim();
            let mut a_diag = vec![1.0; dim];
            a_diag[0] = tau;
            let mut b_diag = vec![rho; dim];
            b_diag[0] = 1.0;
            let a = LinearMap::diagonal(&a_diag).map_err(fail)?;
            let b = LinearMap::diagonal(&b_diag).map_err(fail)?;
            let scale = a.determinant().abs() * b.determinant().abs();
            let kernel = build_kernel(&q, &b).map_err(fail)?;
            let op = assemble(&p, &a, &kernel, &resolution, &options).map_err(fail)?;
            let spectrum = eigenvalues(&op, EigenCount::All).map_err(fail)?;
            empirical_vs_closed_form(
                Some(&spectrum),
                closed_form * scale,
                spec.epsilon,
                Regime::Combined,
            )
            .map_err(fail)?
        }
    };

    let out = DofArtifact {
        closed_form_only: report.dof_empirical.is_none(),
        report,
        modulated,
        heuristic,
    };
    let path = artifact(job.out_dir, "dof.json");
    write_json(&path, &out).map_err(fail)?;
    Ok(vec![path.display().to_string()])
}

struct Check {
    name: &'static str,
    passed: bool,
    metric: f64,
    bound: f64,
}

fn trace_checks(checks: &mut Vec<Check>) -> Result<(), CliError> {
    let cases = [
        (
            SupportSet::centered_box(&[0.5])?,
            SupportSet::centered_box(&[PI])?,
            "trace identity 1-D",
        ),
        (
            SupportSet::axis_box(vec![0.0, 0.0], vec![1.0, 1.0])?,
            SupportSet::centered_box(&[PI, PI])?,
            "trace identity 2-D",
        ),
    ];
    for (p, q, name) in cases {
        let n = p.dim() as i32;
        let lead = (2.0 * PI).powi(-n) * p.measure()?.value * q.measure()?.value;
        let kernel = build_kernel(&q, &LinearMap::identity(p.dim()))?;
        let op = assemble(
            &p,
            &LinearMap::identity(p.dim()),
            &kernel,
            &Resolution::NyquistFraction(0.5),
            &AssembleOptions::default(),
        )?;
        let metric = ((op.trace() - lead) / lead).abs();
        checks.push(Check {
            name,
            passed: metric <= 1e-2,
            metric,
            bound: 1e-2,
        });
    }
    Ok(())
}

fn kernel_scaling_check(seed: u64, checks: &mut Vec<Check>) -> Result<(), CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q = SupportSet::centered_box(&[1.3, 0.7, 2.1])?;
    let diag: Vec<f64> = (0..3).map(|_| rng.gen_range(0.3..3.0)).collect();
    let b = LinearMap::diagonal(&diag)?;
    let scaled = build_kernel(&q, &b)?;
    let base = build_kernel(&q, &LinearMap::identity(3))?;
    let det = b.determinant().abs();
    let mut worst = 0.0f64;
    let mut passed = true;
    for _ in 0..100 {
        let u: Vec<f64> = (0..3).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let lhs = scaled.eval(&u);
        let rhs = det * base.eval(&b.apply_transpose(&u));
        let gap = (lhs - rhs).abs();
        worst = worst.max(gap);
        passed &= gap <= 1e-9 * lhs.abs() + 1e-12;
    }
    checks.push(Check {
        name: "kernel scaling",
        passed,
        metric: worst,
        bound: 1e-9,
    });
    Ok(())
}

fn heuristic_check(checks: &mut Vec<Check>) -> Result<(), CliError> {
    let mut worst = 0.0f64;
    for i in 0..10 {
        let omega = 0.5 + 0.45 * i as f64;
        let t = 1.0 + 0.3 * i as f64;
        let scale = 0.5 + 0.25 * i as f64;
        for geometry in [
            CutGeometry::Circular { r: scale },
            CutGeometry::Spherical { r: scale },
            CutGeometry::Rotational {
                area: 4.0 * PI * scale * scale,
            },
        ] {
            let h = heuristic_dof(&geometry, omega, t)?;
            let c = geometry.closed_form(omega, t)?;
            worst = worst.max(((h - c) / c).abs());
        }
    }
    checks.push(Check {
        name: "heuristic vs closed form",
        passed: worst <= 1e-8,
        metric: worst,
        bound: 1e-8,
    });
    Ok(())
}

fn operator_checks(job: &Job, checks: &mut Vec<Check>) -> Result<(), CliError> {
    let config = job.config;
    let (p, q) = match &config.geometry {
        Some(g) => g.build()?,
        None => (
            SupportSet::centered_box(&[0.5])?,
            SupportSet::centered_box(&[10.0 * PI])?,
        ),
    };
    let resolution = config
        .resolution
        .as_ref()
        .map(|r| r.to_resolution())
        .unwrap_or(Resolution::NyquistFraction(0.5));
    let mut options = assemble_options(config)?;
    // under-resolved grids must reach the spectral-range check instead of
    // being rejected up front; this is the negative-control path
    options.enforce_nyquist = false;
    let identity = LinearMap::identity(p.dim());
    let kernel = build_kernel(&q, &identity)?;
    let op = assemble(&p, &identity, &kernel, &resolution, &options)?;

    let symmetric = match op.dense() {
        Ok(m) => (0..m.nrows())
            .all(|i| (0..m.ncols()).all(|j| m[(i, j)].to_bits() == m[(j, i)].to_bits())),
        Err(_) => true,
    };
    checks.push(Check {
        name: "matrix symmetry",
        passed: symmetric,
        metric: if symmetric { 0.0 } else { 1.0 },
        bound: 0.0,
    });

    let tol = 1e-6;
    let spectrum = eigenvalues(&op, EigenCount::All);
    // an out-of-range eigenvalue is the under-resolution signature
    let (passed, metric) = match &spectrum {
        Ok(_) => (true, 0.0),
        Err(_) => (false, 1.0),
    };
    checks.push(Check {
        name: "spectral range",
        passed,
        metric,
        bound: tol,
    });
    Ok(())
}

fn run_verify(job: &Job) -> RunResult {
    let mut checks = Vec::new();
    trace_checks(&mut checks).map_err(fail)?;
    kernel_scaling_check(job.config.seed.unwrap_or(0), &mut checks).map_err(fail)?;
    heuristic_check(&mut checks).map_err(fail)?;
    operator_checks(job, &mut checks).map_err(fail)?;

    let mut csv = Csv::new(&["check", "passed", "metric", "bound"]);
    let mut failures = 0usize;
    for check in &checks {
        println!(
            "{:<28} {:>4}  metric {:.3e}  bound {:.1e}",
            check.name,
            if check.passed { "pass" } else { "FAIL" },
            check.metric,
            check.bound
        );
        if !check.passed {
            failures += 1;
        }
        csv.row(&[
            check.name.to_string(),
            check.passed.to_string(),
            fmt_f64(check.metric),
            fmt_f64(check.bound),
        ]);
    }
    let path = artifact(job.out_dir, "verify.csv");
    csv.write(&path).map_err(fail)?;
    let artifacts = vec![path.display().to_string()];
    if failures > 0 {
        return Err((
            artifacts,
            CliError::Numerical(format!("{failures} verification check(s) failed")),
        ));
    }
    Ok(artifacts)
}
