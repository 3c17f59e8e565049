//! Subcommand implementations. Each writes its data files plus a
//! `manifest.json` into the output directory.

use std::path::Path;
use std::time::Instant;

use anyhow::{anyhow, Context};
use serde_json::json;

use brokenpde::{
    extract_nodal, frequency_profile, harmonic_inversion_exact, nodal_length, normal_at,
    phi_freeze, picard_solve, sign_measures, transmission_1d, vanishing_order, w_transform,
    FrequencyFields, GridSpec, OracleSolution, Point, ScalarField, SolveReport,
};

use crate::config::ExperimentConfig;
use crate::output::{self, Manifest};
use crate::CliError;

pub struct CommonArgs {
    pub seed: u64,
    pub threads: Option<usize>,
}

fn finish(
    out: &Path,
    command: &str,
    config: Option<&Path>,
    common: &CommonArgs,
    started: Instant,
) -> Result<(), CliError> {
    let config_sha256 = match config {
        Some(path) => Some(output::sha256_file(path)?),
        None => None,
    };
    output::write_manifest(
        out,
        &Manifest {
            command: command.to_string(),
            config_sha256,
            seed: common.seed,
            threads: common.threads,
            wall_time_s: started.elapsed().as_secs_f64(),
        },
    )?;
    Ok(())
}

fn solve_from_config(
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<(SolveReport, serde_json::Value), CliError> {
    let problem = cfg.problem()?;
    let started = Instant::now();
    let report = picard_solve(&problem).map_err(|e| CliError::Other(e.into()))?;
    let wall = started.elapsed().as_secs_f64();
    let structure = problem
        .coeff
        .check_structure(&problem.grid, seed)
        .map_err(|e| CliError::Other(anyhow!("structure audit failed: {e}")))?;
    let ranges: Vec<serde_json::Value> = structure
        .coefficient_ranges
        .iter()
        .map(|r| json!({"name": r.name, "min": r.min, "max": r.max}))
        .collect();
    let report_json = json!({
        "converged": report.converged,
        "picard_iterations": report.picard_iterations,
        "cg_iterations": report.cg_iterations,
        "final_nonlinear_residual": report.final_nonlinear_residual,
        "update_history": report.update_history,
        "wall_time_s": wall,
        "structure": {
            "coefficient_ranges": ranges,
            "f_max": structure.f_max,
            "holder_quotient": structure.holder_quotient,
            "lambda_bounds_ok": structure.lambda_bounds_ok,
            "f_bound_ok": structure.f_bound_ok,
            "holder_ok": structure.holder_ok,
            "pass": structure.pass(),
        },
    });
    Ok((report, report_json))
}

pub fn cmd_solve(config_path: &Path, out: &Path, common: &CommonArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let cfg = ExperimentConfig::load(config_path)?;
    output::ensure_dir(out)?;
    let (report, report_json) = solve_from_config(&cfg, common.seed)?;
    output::write_scalar_csv(out, "u.csv", &report.u)?;
    output::write_json(out, "report.json", &report_json)?;
    finish(out, "solve", Some(config_path), common, started)?;
    log::info!(
        "solve: converged={} picard={} residual={:.3e}",
        report.converged,
        report.picard_iterations,
        report.final_nonlinear_residual
    );
    if !report.converged {
        return Err(CliError::NonConvergence(format!(
            "picard stopped after {} iterations with residual {:.3e}",
            report.picard_iterations, report.final_nonlinear_residual
        )));
    }
    Ok(())
}

/// Obtains the solution field: from `--in` when given, otherwise by solving.
fn obtain_u(
    cfg: &ExperimentConfig,
    input: Option<&Path>,
    seed: u64,
) -> Result<ScalarField, CliError> {
    match input {
        Some(path) => Ok(output::read_scalar_csv(path)?),
        None => {
            let (report, _) = solve_from_config(cfg, seed)?;
            if !report.converged {
                return Err(CliError::NonConvergence(
                    "transform input solve did not converge".into(),
                ));
            }
            Ok(report.u)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum TransformKind {
    /// Frozen-coefficient transform at the base point `z`.
    Freeze,
    /// Variable-coefficient transform with lower-order fields.
    W,
    /// Node-wise scalar transform (no derivative fields needed).
    #[value(name = "phi_s", alias = "phi-s")]
    PhiS,
}

pub fn cmd_transform(
    config_path: &Path,
    kind: TransformKind,
    z: Point,
    input: Option<&Path>,
    out: &Path,
    common: &CommonArgs,
) -> Result<(), CliError> {
    let started = Instant::now();
    let cfg = ExperimentConfig::load(config_path)?;
    output::ensure_dir(out)?;
    let model = cfg.model()?;
    let u = obtain_u(&cfg, input, common.seed)?;
    match kind {
        TransformKind::Freeze => {
            let v = phi_freeze(&u, z, &model).map_err(|e| CliError::Other(e.into()))?;
            output::write_scalar_csv(out, "v.csv", &v)?;
        }
        TransformKind::W => {
            let tf = w_transform(&u, &model).map_err(|e| CliError::Other(e.into()))?;
            output::write_scalar_csv(out, "v.csv", &tf.v)?;
            output::write_vector_csv(out, "bvec.csv", &tf.b_vec)?;
            output::write_scalar_csv(out, "c.csv", &tf.c)?;
        }
        TransformKind::PhiS => {
            // Same field as the w transform, but computable for merely
            // evaluable (non-differentiable) coefficients.
            let spec = u.spec().clone();
            let values = (0..spec.node_count())
                .map(|idx| {
                    let p = spec.node_point(idx);
                    let uv = u.values()[idx];
                    match model.phases() {
                        brokenpde::Phases::Jump { a_plus, a_minus } => {
                            let ap = a_plus.evaluate(p[0], p[1])?;
                            let am = a_minus.evaluate(p[0], p[1])?;
                            Ok(brokenpde::phi_jump(uv, ap, am))
                        }
                        brokenpde::Phases::Power { a, b } => {
                            let av = a.evaluate(p[0], p[1])?;
                            let bv = b.evaluate(p[0], p[1])?;
                            Ok(brokenpde::phi_s(uv, av, bv, model.s()))
                        }
                    }
                })
                .collect::<Result<Vec<f64>, brokenpde::EvalError>>()
                .map_err(|e| CliError::Other(anyhow!("transform evaluation failed: {e}")))?;
            let v = ScalarField::from_values(&spec, values)
                .map_err(|e| CliError::Other(e.into()))?;
            output::write_scalar_csv(out, "v.csv", &v)?;
        }
    }
    finish(out, "transform", Some(config_path), common, started)
}

pub fn cmd_nodal(
    config_path: &Path,
    input: &Path,
    out: &Path,
    common: &CommonArgs,
) -> Result<(), CliError> {
    let started = Instant::now();
    let cfg = ExperimentConfig::load(config_path)?;
    output::ensure_dir(out)?;
    let model = cfg.model()?;
    let u = output::read_scalar_csv(input)?;
    let grid = u.spec().clone();
    let ns = extract_nodal(&u);
    output::write_segments_csv(out, "segments.csv", &ns)?;

    // Normals from the regime-appropriate straightening transform.
    let r_fit = cfg.effective_r_fit(&grid);
    let mut normals = Vec::new();
    let mut degenerate_points = 0usize;
    if grid.dim() == 2 {
        let w_field = if model.is_jump() {
            None
        } else {
            Some(w_transform(&u, &model).map_err(|e| CliError::Other(e.into()))?.v)
        };
        for &z in &ns.sample_points {
            if !grid.contains_ball(z, r_fit) {
                continue;
            }
            let frozen;
            let v = match &w_field {
                Some(w) => w,
                None => {
                    frozen = phi_freeze(&u, z, &model).map_err(|e| CliError::Other(e.into()))?;
                    &frozen
                }
            };
            match normal_at(v, z, r_fit) {
                Ok(sample) => normals.push(sample),
                Err(brokenpde::NodalError::DegenerateGradient { .. }) => degenerate_points += 1,
                Err(brokenpde::NodalError::OutOfBounds { .. }) => {}
            }
        }
    }
    output::write_normals_csv(out, "normals.csv", &normals)?;

    let a = &cfg.analysis;
    let measures = if grid.dim() == 2 {
        let radius = a.measure_radius;
        let (pos, neg) = sign_measures(&u, a.z, radius);
        let len_half = nodal_length(&ns, a.z, radius / 2.0);
        json!({
            "center": a.z,
            "radius": radius,
            "positive_measure": pos,
            "negative_measure": neg,
            "nodal_length_half_ball": len_half,
            "nodal_length_total": ns.total_length(),
            "segments": ns.segments.len(),
            "sample_points": ns.sample_points.len(),
            "normals": normals.len(),
            "degenerate_points": degenerate_points,
            "r_fit": r_fit,
        })
    } else {
        json!({
            "sample_points": ns.sample_points.len(),
            "crossings": ns.sample_points.iter().map(|p| p[0]).collect::<Vec<_>>(),
        })
    };
    output::write_json(out, "measures.json", &measures)?;
    finish(out, "nodal", Some(config_path), common, started)
}

pub fn cmd_order(
    input: &Path,
    z: Point,
    r_max: f64,
    levels: usize,
    out: &Path,
    common: &CommonArgs,
) -> Result<(), CliError> {
    let started = Instant::now();
    output::ensure_dir(out)?;
    let u = output::read_scalar_csv(input)?;
    let est = vanishing_order(&u, z, r_max, levels)
        .map_err(|e| CliError::Other(anyhow!("order estimation failed: {e}")))?;
    let path = out.join("orders.csv");
    let mut w = std::io::BufWriter::new(std::fs::File::create(&path).context("orders.csv")?);
    use std::io::Write;
    writeln!(w, "x,y,d_hat,gap").map_err(anyhow::Error::from)?;
    writeln!(
        w,
        "{:.16e},{:.16e},{:.16e},{:.16e}",
        est.z[0], est.z[1], est.d_hat, est.nearest_integer_gap
    )
    .map_err(anyhow::Error::from)?;
    w.flush().map_err(anyhow::Error::from)?;
    log::info!("order: d_hat = {:.4}, gap = {:.4}", est.d_hat, est.nearest_integer_gap);
    finish(out, "order", None, common, started)
}

#[allow(clippy::too_many_arguments)]
pub fn cmd_frequency(
    input: &Path,
    u_path: Option<&Path>,
    bvec_path: Option<&Path>,
    c_path: Option<&Path>,
    z: Point,
    r_min: f64,
    r_max: f64,
    steps: usize,
    out: &Path,
    common: &CommonArgs,
) -> Result<(), CliError> {
    let started = Instant::now();
    output::ensure_dir(out)?;
    let w_field = output::read_scalar_csv(input)?;
    let fields = match (bvec_path, c_path) {
        (Some(bp), Some(cp)) => {
            let b = output::read_vector_csv(bp)?;
            let c = output::read_scalar_csv(cp)?;
            // The jump-regime equation pairs the lower-order fields with the
            // transform itself, so `--u` defaults to the input field.
            let u = match u_path {
                Some(up) => output::read_scalar_csv(up)?,
                None => w_field.clone(),
            };
            FrequencyFields::with_lower_order(&w_field, &u, &b, &c)
        }
        (None, None) => FrequencyFields::new(&w_field),
        _ => {
            return Err(CliError::Other(anyhow!(
                "--bvec and --c must be given together"
            )))
        }
    };
    if steps < 2 || !(r_min > 0.0 && r_min < r_max) {
        return Err(CliError::Other(anyhow!("need 0 < rmin < rmax and steps >= 2")));
    }
    let dr = (r_max - r_min) / (steps - 1) as f64;
    let radii: Vec<f64> = (0..steps).map(|k| r_min + dr * k as f64).collect();
    let profile = frequency_profile(&fields, z, &radii);

    let path = out.join("frequency.csv");
    let mut w = std::io::BufWriter::new(std::fs::File::create(&path).context("frequency.csv")?);
    use std::io::Write;
    writeln!(w, "r,H,I,N,doubling").map_err(anyhow::Error::from)?;
    for row in &profile.rows {
        let n = row.n.map(|v| format!("{v:.16e}")).unwrap_or_default();
        let d = row.doubling.map(|v| format!("{v:.16e}")).unwrap_or_default();
        writeln!(w, "{:.16e},{:.16e},{:.16e},{n},{d}", row.r, row.h, row.i)
            .map_err(anyhow::Error::from)?;
    }
    w.flush().map_err(anyhow::Error::from)?;
    for (r, msg) in &profile.skipped {
        log::warn!("frequency: radius {r} skipped: {msg}");
    }
    finish(out, "frequency", None, common, started)
}

pub fn cmd_oracle_compare(
    config_path: &Path,
    out: &Path,
    common: &CommonArgs,
) -> Result<(), CliError> {
    let started = Instant::now();
    let cfg = ExperimentConfig::load(config_path)?;
    output::ensure_dir(out)?;
    let problem = cfg.problem()?;
    let grid = problem.grid.clone();
    let (report, report_json) = solve_from_config(&cfg, common.seed)?;
    output::write_json(out, "report.json", &report_json)?;

    let (oracle, kind): (OracleSolution, &str) = if grid.dim() == 1 {
        let g = &problem.boundary;
        let (lo, hi) = grid.bounds(0);
        let g_left = g.evaluate(lo, 0.0).map_err(|e| CliError::Other(anyhow!("{e}")))?;
        let g_right = g.evaluate(hi, 0.0).map_err(|e| CliError::Other(anyhow!("{e}")))?;
        let a_plus = constant_of(&cfg, &grid, true)?;
        let a_minus = constant_of(&cfg, &grid, false)?;
        (
            transmission_1d(a_plus, a_minus, g_left, g_right, lo, hi)
                .map_err(|e| CliError::Other(e.into()))?,
            "transmission-1d",
        )
    } else {
        (
            harmonic_inversion_exact(&problem.coeff, &problem.boundary, &grid)
                .map_err(|e| CliError::Other(e.into()))?,
            "harmonic-inversion",
        )
    };
    let exact = oracle.sample(&grid).map_err(|e| CliError::Other(e.into()))?;
    let mut sup = 0.0_f64;
    let mut sq = 0.0_f64;
    for (a, b) in report.u.values().iter().zip(exact.values()) {
        let d = a - b;
        sup = sup.max(d.abs());
        sq += d * d;
    }
    let mut cell = grid.spacing(0);
    if grid.dim() == 2 {
        cell *= grid.spacing(1);
    }
    let l2 = (sq * cell).sqrt();
    let interface_offset = oracle.interface().map(|x0| {
        let crossing = crossing_1d(&report.u).unwrap_or(f64::NAN);
        (crossing - x0).abs()
    });
    let value = json!({
        "oracle": kind,
        "sup_error": sup,
        "l2_error": l2,
        "interface_offset": interface_offset,
        "converged": report.converged,
        "grid_spacing": grid.max_spacing(),
    });
    output::write_json(out, "error.json", &value)?;
    finish(out, "oracle-compare", Some(config_path), common, started)?;
    if !report.converged {
        return Err(CliError::NonConvergence("oracle comparison solve did not converge".into()));
    }
    Ok(())
}

fn constant_of(
    cfg: &ExperimentConfig,
    grid: &GridSpec,
    plus: bool,
) -> Result<f64, CliError> {
    let model = cfg.model()?;
    let brokenpde::Phases::Jump { a_plus, a_minus } = model.phases() else {
        return Err(CliError::Other(anyhow!(
            "the 1-d transmission oracle needs the jump regime"
        )));
    };
    let e = if plus { a_plus } else { a_minus };
    let f = ScalarField::sample(e, grid).map_err(|e| CliError::Other(e.into()))?;
    let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in f.values() {
        min = min.min(v);
        max = max.max(v);
    }
    if max - min > 1e-12 * max.abs().max(1.0) {
        return Err(CliError::Other(anyhow!(
            "the 1-d transmission oracle needs constant phases"
        )));
    }
    Ok(0.5 * (min + max))
}

/// Linear zero crossing of a 1-d field (first sign change).
pub fn crossing_1d(u: &ScalarField) -> Option<f64> {
    let g = u.spec();
    for i in 0..g.n(0) - 1 {
        let (a, b) = (u.values()[i], u.values()[i + 1]);
        if (a <= 0.0) != (b <= 0.0) {
            let t = a / (a - b);
            return Some(g.coord(0, i) + t * g.spacing(0));
        }
    }
    None
}
