use std::path::{Path, PathBuf};

use babenko_core::critlayer::{
    f_field, find_vertical_tangent, stream_extension, trace_and_classify, trace_zero_set, CritOptions, CritReport,
    StreamEvaluator,
};
use babenko_core::model::{exact_solution, exact_solution_n, laminar_flow, Params};
use babenko_core::solver::{continue_branch, continue_from_bifurcation, locate_event, newton_solve, EventKind, PathSpec};
use babenko_core::{Branch, HoloTrace, Solution, SolverOptions, WaveClass, WaveError};
use serde::Serialize;
use serde_json::Value;

use crate::config::{Resolved, TableFormat};
use crate::files::{self, BranchRecord, SolutionRecord, FORMAT_VERSION};
use crate::{validate, CliError};

pub fn run(r: &Resolved) -> Result<(), CliError> {
    std::fs::create_dir_all(&r.out).map_err(|e| CliError::Io(format!("{}: {e}", r.out.display())))?;
    match r.command.as_str() {
        "exact" => exact(r),
        "solve" => solve(r),
        "continue" => continue_cmd(r),
        "events" => events(r),
        "critlayer" => critlayer(r),
        "validate" => validate::run(r),
        other => Err(CliError::Config(format!("unknown command `{other}`"))),
    }
}

fn config_value(r: &Resolved) -> Option<Value> {
    serde_json::to_value(r).ok()
}

fn out_path(r: &Resolved, name: &str) -> PathBuf {
    r.out.join(name)
}

fn table_path(r: &Resolved, stem: &str) -> PathBuf {
    match r.format {
        TableFormat::Csv => out_path(r, &format!("{stem}.csv")),
        TableFormat::Json => out_path(r, &format!("{stem}.json")),
    }
}

fn write_table<R: Serialize>(r: &Resolved, stem: &str, rows: &[R]) -> Result<PathBuf, CliError> {
    let path = table_path(r, stem);
    match r.format {
        TableFormat::Csv => files::write_csv(&path, rows)?,
        TableFormat::Json => files::write_json(&path, &rows)?,
    }
    Ok(path)
}

fn write_solution(r: &Resolved, name: &str, sol: &Solution) -> Result<PathBuf, CliError> {
    let path = out_path(r, name);
    files::write_json(&path, &SolutionRecord::from_solution(sol, config_value(r)))?;
    Ok(path)
}

fn announce(sol: &Solution, path: &Path) {
    println!(
        "{}: N = {}, residual {:.3e}, class {}",
        path.display(),
        sol.trace.order(),
        sol.residual_norm,
        sol.class.as_str()
    );
}

fn load_solution(path: &Path, opts: &SolverOptions) -> Result<Solution, CliError> {
    let rec: SolutionRecord = files::read_json(path)?;
    rec.to_solution(&opts.geometry)
}

fn exact(r: &Resolved) -> Result<(), CliError> {
    let a = r.require(&r.a, "a")?;
    let opts = r.solver_options()?;
    let trace = match r.n {
        Some(n) => exact_solution_n(a, n)?,
        None => exact_solution(a)?,
    };
    let sol = Solution::new(trace, Params::new(0.0, a, 0.0)?.into(), &opts.geometry)?;
    let path = write_solution(r, "solution.json", &sol)?;
    write_table(r, "profile", &files::profile_rows(&sol)?)?;
    announce(&sol, &path);
    Ok(())
}

fn solve(r: &Resolved) -> Result<(), CliError> {
    let g = r.require(&r.g, "g")?;
    let a = r.require(&r.a, "a")?;
    let l = r.l.unwrap_or(0.0);
    let opts = r.solver_options()?;
    let params = Params::new(g, a, l)?;
    let guess = match &r.init {
        Some(p) => {
            let rec: SolutionRecord = files::read_json(p)?;
            let t = rec.trace()?;
            match r.n {
                Some(n) => t.resized(n),
                None => t,
            }
        }
        None => HoloTrace::constant(opts.order, laminar_flow(&params.flow())?),
    };
    let sol = newton_solve(&guess, params, &opts)?;
    let path = write_solution(r, "solution.json", &sol)?;
    write_table(r, "profile", &files::profile_rows(&sol)?)?;
    announce(&sol, &path);
    Ok(())
}

#[derive(Serialize)]
struct SummaryRow {
    index: usize,
    a: f64,
    b1: f64,
    min_x_alpha: f64,
    min_self_gap: f64,
    class: String,
    residual_norm: f64,
    n: usize,
}

fn summary_rows(b: &Branch) -> Vec<SummaryRow> {
    b.points
        .iter()
        .enumerate()
        .map(|(i, p)| SummaryRow {
            index: i,
            a: p.a().unwrap_or(f64::NAN),
            b1: p.trace.coeffs().get(1).copied().unwrap_or(0.0),
            min_x_alpha: p.min_x_slope(),
            min_self_gap: p.self_gap(),
            class: p.class.as_str().to_string(),
            residual_norm: p.residual_norm,
            n: p.trace.order(),
        })
        .collect()
}

fn write_branch(r: &Resolved, name: &str, b: &Branch) -> Result<PathBuf, CliError> {
    let path = out_path(r, name);
    files::write_json(&path, &BranchRecord::from_branch(b, config_value(r)))?;
    Ok(path)
}

fn continue_cmd(r: &Resolved) -> Result<(), CliError> {
    let opts = r.solver_options()?;
    let a_end = r.a_end()?;
    let from_bif = r.from_bifurcation.unwrap_or(false);
    let result = if from_bif {
        if r.init.is_some() {
            return Err(CliError::Config("`from_bifurcation` and `init` are mutually exclusive".into()));
        }
        let g = r.require(&r.g, "g")?;
        continue_from_bifurcation(g, r.l.unwrap_or(0.0), a_end, &opts)
    } else {
        let init = r.require(&r.init, "init (or from_bifurcation)")?;
        let rec: SolutionRecord = files::read_json(&init)?;
        let p = rec
            .model_params()?
            .family()
            .ok_or_else(|| CliError::Config("continuation needs a solution on the (G, a, l) family".into()))?;
        if r.g.is_some_and(|g| g != p.gravity) || r.l.is_some_and(|l| l != p.l) {
            return Err(CliError::Config(format!(
                "initial solution has G = {}, l = {}, which differs from the requested path",
                p.gravity, p.l
            )));
        }
        let t = rec.trace()?;
        let t = match r.n {
            Some(n) => t.resized(n),
            None => t,
        };
        let start = newton_solve(&t, p, &opts)?;
        let path = PathSpec {
            gravity: p.gravity,
            l: p.l,
            a_start: p.a,
            a_end,
        };
        continue_branch(&start, path, &opts)
    };
    let branch = match result {
        Ok(b) => b,
        Err(WaveError::StalledBranch { at, reason, partial }) => {
            write_branch(r, "branch_partial.json", &partial)?;
            write_table(r, "summary_partial", &summary_rows(&partial))?;
            return Err(WaveError::StalledBranch { at, reason, partial }.into());
        }
        Err(e) => return Err(e.into()),
    };
    let path = write_branch(r, "branch.json", &branch)?;
    write_table(r, "summary", &summary_rows(&branch))?;
    println!(
        "{}: {} points, a in [{:.8}, {:.8}], termination {}",
        path.display(),
        branch.points.len(),
        branch.points.first().and_then(|p| p.a()).unwrap_or(f64::NAN),
        branch.last().and_then(|p| p.a()).unwrap_or(f64::NAN),
        match branch.termination {
            Some(t) => format!("{t:?}").to_lowercase(),
            None => "none".into(),
        }
    );
    for e in &branch.events {
        println!("  event {} at a = {:.10}", e.kind.as_str(), e.a);
    }
    Ok(())
}

/// A solution record with the event fields alongside, so it can be fed
/// back to any command that reads solutions.
#[derive(Serialize)]
struct EventFile {
    event: String,
    event_a: f64,
    #[serde(flatten)]
    solution: SolutionRecord,
}

fn events(r: &Resolved) -> Result<(), CliError> {
    let opts = r.solver_options()?;
    let kind_name = r.require(&r.kind, "kind")?;
    let kind = EventKind::parse(&kind_name).ok_or_else(|| {
        CliError::Config(format!(
            "unknown event kind `{kind_name}` (bifurcation, breaking, overhang_onset, touching)"
        ))
    })?;
    let path = r.require(&r.branch, "branch")?;
    let rec: BranchRecord = files::read_json(&path)?;
    let branch = rec.to_branch(&opts.geometry)?;
    let (a, sol) = locate_event(&branch, kind, &opts)?;
    let out = out_path(r, &format!("event_{}.json", kind.as_str()));
    files::write_json(
        &out,
        &EventFile {
            event: kind.as_str().to_string(),
            event_a: a,
            solution: SolutionRecord::from_solution(&sol, config_value(r)),
        },
    )?;
    println!(
        "{} a* = {a:.12} (min x_alpha {:.3e}, class {})",
        kind.as_str(),
        sol.min_x_slope(),
        sol.class.as_str()
    );
    println!("{}", out.display());
    Ok(())
}

#[derive(Serialize)]
struct FieldRow {
    alpha: f64,
    beta: f64,
    #[serde(rename = "F")]
    f: f64,
}

#[derive(Serialize)]
struct ContourRow {
    alpha: f64,
    beta: f64,
    x: f64,
    y: f64,
}

#[derive(Serialize)]
struct CritFile {
    version: u32,
    config: Option<Value>,
    n: usize,
    residual_norm: f64,
    /// `vertical_tangent` or `laminar`.
    mode: String,
    alpha_crit: Option<f64>,
    k: Option<u32>,
    side: Option<String>,
    fitted_exponent: Option<f64>,
    fitted_coefficient: Option<f64>,
    predicted_coefficient: Option<f64>,
    c1: Option<f64>,
    c2: Option<f64>,
    fit_half_width: Option<f64>,
    /// Physical height of the laminar critical layer, `-1/omega`.
    layer_y: Option<f64>,
    contour_points: usize,
    field_window: [f64; 4],
}

fn contour_rows(e: &StreamEvaluator, pts: &[(f64, f64)]) -> Result<Vec<ContourRow>, CliError> {
    pts.iter()
        .map(|&(alpha, beta)| {
            let p = e.point(alpha, beta)?;
            Ok(ContourRow { alpha, beta, x: p.x, y: p.y })
        })
        .collect()
}

fn field_rows(e: &StreamEvaluator, alpha: (f64, f64), beta: (f64, f64), pts: usize) -> Result<Vec<FieldRow>, CliError> {
    let grid = f_field(e, alpha, beta, (pts, pts))?;
    let mut rows = Vec::with_capacity(grid.values.len());
    for (i, &b) in grid.betas.iter().enumerate() {
        for (j, &a) in grid.alphas.iter().enumerate() {
            rows.push(FieldRow { alpha: a, beta: b, f: grid.at(i, j) });
        }
    }
    Ok(rows)
}

fn critlayer(r: &Resolved) -> Result<(), CliError> {
    let opts = r.solver_options()?;
    let input = r.require(&r.input, "input")?;
    let sol = load_solution(&input, &opts)?;
    let e = stream_extension(&sol)?;
    let flow = *e.flow();
    let depth = flow.depth;
    let field_pts = r.field_points.unwrap_or(101).max(2);
    let floor = |b: f64| if depth.is_finite() { b.max(-depth.value()) } else { b };

    let base = CritFile {
        version: FORMAT_VERSION,
        config: config_value(r),
        n: sol.trace.order(),
        residual_norm: sol.residual_norm,
        mode: String::new(),
        alpha_crit: None,
        k: None,
        side: None,
        fitted_exponent: None,
        fitted_coefficient: None,
        predicted_coefficient: None,
        c1: None,
        c2: None,
        fit_half_width: None,
        layer_y: None,
        contour_points: 0,
        field_window: [0.0; 4],
    };

    if sol.class == WaveClass::Laminar && r.alpha.is_none() {
        // Flat surface: F vanishes on the horizontal line y = -1/omega.
        if flow.omega == 0.0 {
            return Err(WaveError::Parameter("irrotational laminar flow has no critical layer".into()).into());
        }
        let y_layer = -1.0 / flow.omega;
        let b0 = sol.trace.coeffs()[0];
        let reach = (y_layer - b0).abs();
        let beta = (floor(r.beta_min.unwrap_or(-(reach + 1.0))), e.beta_max().min(reach + 1.0));
        let alpha = (0.0, 2.0 * std::f64::consts::PI);
        let columns = r.columns.unwrap_or(64).max(2);
        let pts = trace_zero_set(&e, alpha, beta, columns, 400)?;
        let contour = contour_rows(&e, &pts)?;
        write_table(r, "contour", &contour)?;
        write_table(r, "field", &field_rows(&e, alpha, beta, field_pts)?)?;
        let report = CritFile {
            mode: "laminar".into(),
            layer_y: Some(y_layer),
            contour_points: contour.len(),
            field_window: [alpha.0, alpha.1, beta.0, beta.1],
            ..base
        };
        files::write_json(&out_path(r, "crit_report.json"), &report)?;
        println!("laminar critical layer at y = {y_layer:.12} ({} contour points)", contour.len());
        return Ok(());
    }

    let alpha_crit = match r.alpha {
        Some(a) => a,
        None => find_vertical_tangent(&sol, opts.geometry.slope_tol.max(1e-6))?,
    };
    let d = CritOptions::default();
    let copts = CritOptions {
        half_width: r.half_width.unwrap_or(d.half_width),
        columns: r.columns.unwrap_or(d.columns),
        experimental_finite_depth: r.experimental_finite_depth.unwrap_or(false),
        slope_tol: opts.geometry.slope_tol.max(d.slope_tol),
    };
    let rep: CritReport = trace_and_classify(&e, alpha_crit, &copts)?;
    let contour = contour_rows(&e, &rep.contour)?;
    write_table(r, "contour", &contour)?;
    let w = 4.0 * copts.half_width;
    let alpha = (alpha_crit - w, alpha_crit + w);
    let beta = (floor(r.beta_min.unwrap_or(-w)), e.beta_max().min(w));
    write_table(r, "field", &field_rows(&e, alpha, beta, field_pts)?)?;
    let report = CritFile {
        mode: "vertical_tangent".into(),
        alpha_crit: Some(rep.alpha_crit),
        k: Some(rep.k),
        side: Some(rep.side.as_str().to_string()),
        fitted_exponent: Some(rep.fitted_exponent),
        fitted_coefficient: Some(rep.fitted_coefficient),
        predicted_coefficient: Some(rep.predicted_coefficient),
        c1: Some(rep.c1),
        c2: Some(rep.c2),
        fit_half_width: Some(rep.fit_half_width),
        contour_points: contour.len(),
        field_window: [alpha.0, alpha.1, beta.0, beta.1],
        ..base
    };
    files::write_json(&out_path(r, "crit_report.json"), &report)?;
    println!(
        "critical layer at alpha = {:.10}: side {}, k = {}, coefficient {:.6} (predicted {:.6})",
        rep.alpha_crit,
        rep.side.as_str(),
        rep.k,
        rep.fitted_coefficient,
        rep.predicted_coefficient
    );
    Ok(())
}
