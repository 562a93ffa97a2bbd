//! The three experiments behind the CLI subcommands.

use std::path::Path;

use serde::Serialize;
use stiga_core::field::evaluate_field;
use stiga_core::geometry::GeometryMap;
use stiga_core::solver::{
    fixed_point_solve, l2_error, FixedPointConfig, LinearSolverChoice, MonodomainProblem, SolveResult,
};
use stiga_core::spline::{SplineSpace1D, TensorSpaceTime};
use stiga_core::{Error, Parameters};

use crate::config::{ExperimentConfig, Method};
use crate::error::CliError;
use crate::output::{create, write_csv, FieldSet};
use crate::sources::{manufactured_solution, SourceTerm};

pub fn build_problem(cfg: &ExperimentConfig) -> Result<MonodomainProblem, CliError> {
    let params: Parameters = cfg.problem.into();
    let geometry = cfg.geometry_map()?;
    let space = cfg.space()?;
    let source = cfg.source.build(&params, cfg.discretization.final_time)?;
    Ok(MonodomainProblem {
        params,
        geometry,
        space,
        source,
    })
}

/// Summary of one fixed-point solve.
#[derive(Debug, Clone, Serialize)]
pub struct MethodReport {
    pub method: Method,
    pub converged: bool,
    pub error: Option<String>,
    pub n_dof: usize,
    pub iterations: usize,
    pub increments: Vec<f64>,
    pub average_gmres: f64,
    pub average_pcg: f64,
    /// `max |u_h|` where the exact solution vanishes (see [`oscillation_metric`]).
    pub oscillation: Option<f64>,
    pub wall_time: f64,
    pub used_direct: bool,
}

impl MethodReport {
    fn failed(method: Method, n_dof: usize, e: &Error) -> Self {
        let increments = match e {
            Error::NonConvergence { increments, .. } => increments.clone(),
            _ => Vec::new(),
        };
        Self {
            method,
            converged: false,
            error: Some(e.to_string()),
            n_dof,
            iterations: increments.len(),
            increments,
            average_gmres: f64::NAN,
            average_pcg: f64::NAN,
            oscillation: None,
            wall_time: f64::NAN,
            used_direct: false,
        }
    }
}

/// Last time up to which no basis function touching `[activation, T]` is
/// active: one degree's worth of elements before the element containing
/// `activation`. Before this time the discrete space can represent the
/// exact zero solution.
pub fn quiet_until(time: &SplineSpace1D, final_time: f64, activation: f64) -> Option<f64> {
    if activation >= final_time {
        return Some(final_time);
    }
    let e = time.element_of((activation / final_time).clamp(0.0, 1.0));
    let first = time.element(e).0 - time.degree() as f64 * time.mesh_size();
    (first > 0.0).then_some(first * final_time)
}

/// `max |u_h|` over `Ω × [0, t_q]` with `t_q` from [`quiet_until`], sampled
/// on a uniform parametric grid with `samples` points per element and
/// direction. `None` if the source has no activation time or `t_q` is not
/// positive.
pub fn oscillation_metric(
    u: &[f64],
    st: &TensorSpaceTime,
    map: &GeometryMap,
    source: &SourceTerm,
    samples: usize,
) -> Result<Option<f64>, CliError> {
    let tf = map.final_time();
    let Some(t_q) = source.activation_time().and_then(|a| quiet_until(st.time(), tf, a)) else {
        return Ok(None);
    };
    let grid: Vec<usize> = st.spatial().iter().map(|s| s.num_elements() * samples + 1).collect();
    let nt = ((t_q / tf) * (st.time().num_elements() * samples) as f64).ceil() as usize + 1;
    let n: usize = grid.iter().product();
    let mut eta = vec![0.0; st.dim()];
    let mut max = 0.0f64;
    for it in 0..nt {
        let tau = (t_q / tf) * it as f64 / (nt - 1).max(1) as f64;
        for k in 0..n {
            let mut rem = k;
            for (l, &g) in grid.iter().enumerate() {
                eta[l] = (rem % g) as f64 / (g - 1) as f64;
                rem /= g;
            }
            max = max.max(evaluate_field(u, st, map, &eta, tau, false)?.value.abs());
        }
    }
    Ok(Some(max))
}

fn summarize(method: Method, r: &SolveResult, oscillation: Option<f64>, n_dof: usize) -> MethodReport {
    MethodReport {
        method,
        converged: true,
        error: None,
        n_dof,
        iterations: r.iterations,
        increments: r.increments(),
        average_gmres: r.average_gmres(),
        average_pcg: r.average_pcg(),
        oscillation,
        wall_time: r.wall_time.as_secs_f64(),
        used_direct: r.used_direct,
    }
}

fn write_history(path: &Path, r: &SolveResult) -> Result<(), CliError> {
    let rows: Vec<Vec<f64>> = r
        .history
        .iter()
        .enumerate()
        .map(|(k, h)| {
            vec![
                (k + 1) as f64,
                h.increment,
                h.gmres_iterations as f64,
                h.pcg_average,
                h.theta_rank as f64,
                h.theta_max,
            ]
        })
        .collect();
    write_csv(
        path,
        &["iteration", "increment", "gmres_iterations", "pcg_average", "theta_rank", "theta_max"],
        &rows,
    )
}

fn write_report<T: Serialize>(path: &Path, cfg: &ExperimentConfig, results: &T) -> Result<(), CliError> {
    let doc = serde_json::json!({ "config": cfg, "results": results });
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, &doc).map_err(std::io::Error::from)?;
    use std::io::Write;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Writes snapshots, the section, Θ̂ and the iteration history to `dir`.
fn write_fields(cfg: &ExperimentConfig, problem: &MonodomainProblem, r: &SolveResult, dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)?;
    write_history(&dir.join("history.csv"), r)?;
    let fields = FieldSet {
        st: &problem.space,
        map: &problem.geometry,
        u: &r.u,
        w: &r.w,
        theta: r.theta.as_ref(),
    };
    let grid: Vec<usize> = match &cfg.output.grid {
        Some(g) => g.clone(),
        None => problem.space.spatial().iter().map(|s| 4 * s.num_elements() + 1).collect(),
    };
    for (i, &t) in cfg.output.times.iter().enumerate() {
        fields.write_snapshot(dir, i, t, &grid)?;
    }
    if let Some(section) = &cfg.output.section {
        fields.write_section(&dir.join("section.csv"), section)?;
    }
    if let (true, Some(th)) = (cfg.output.theta, &r.theta) {
        let mut w = create(&dir.join("theta.csv"))?;
        th.write_csv(&mut w)?;
    }
    Ok(())
}

fn solve_method(
    cfg: &ExperimentConfig,
    problem: &MonodomainProblem,
    method: Method,
) -> Result<(SolveResult, MethodReport), Error> {
    let r = fixed_point_solve(problem, &cfg.fixed_point(method))?;
    let osc = oscillation_metric(&r.u, &problem.space, &problem.geometry, &cfg.source, cfg.output.oscillation_samples)
        .map_err(|e| match e {
            CliError::Solver(e) => e,
            other => Error::InvalidParameter(other.to_string()),
        })?;
    let report = summarize(method, &r, osc, problem.space.n_dof());
    Ok((r, report))
}

/// Single solve with the configured method.
pub fn run_solve(cfg: &ExperimentConfig, out: &Path) -> Result<MethodReport, CliError> {
    let problem = build_problem(cfg)?;
    let method = cfg.stabilization.method;
    match solve_method(cfg, &problem, method) {
        Ok((r, report)) => {
            write_fields(cfg, &problem, &r, out)?;
            write_report(&out.join("report.json"), cfg, &report)?;
            Ok(report)
        }
        Err(e) => {
            write_report(&out.join("report.json"), cfg, &MethodReport::failed(method, problem.space.n_dof(), &e))?;
            Err(e.into())
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareReport {
    pub galerkin: MethodReport,
    pub su: MethodReport,
}

impl CompareReport {
    /// SU over Galerkin oscillation metric.
    pub fn oscillation_ratio(&self) -> Option<f64> {
        match (self.galerkin.oscillation, self.su.oscillation) {
            (Some(g), Some(s)) if g > 0.0 => Some(s / g),
            _ => None,
        }
    }
}

/// Galerkin and SU on the same discretization. A failing method is
/// reported and does not stop the other one.
pub fn run_compare(cfg: &ExperimentConfig, out: &Path) -> Result<CompareReport, CliError> {
    let problem = build_problem(cfg)?;
    let mut reports = Vec::with_capacity(2);
    for (method, sub) in [(Method::Galerkin, "galerkin"), (Method::Su, "su")] {
        log::info!("compare: running {sub}");
        let report = match solve_method(cfg, &problem, method) {
            Ok((r, report)) => {
                write_fields(cfg, &problem, &r, &out.join(sub))?;
                report
            }
            Err(e @ (Error::NonConvergence { .. } | Error::LinearNonConvergence { .. })) => {
                log::warn!("{sub}: {e}");
                MethodReport::failed(method, problem.space.n_dof(), &e)
            }
            Err(e) => return Err(e.into()),
        };
        reports.push(report);
    }
    let su = reports.pop().expect("two reports");
    let galerkin = reports.pop().expect("two reports");
    let report = CompareReport { galerkin, su };
    let row = |r: &MethodReport| {
        vec![
            r.iterations as f64,
            r.average_gmres,
            r.average_pcg,
            r.oscillation.unwrap_or(f64::NAN),
            r.wall_time,
        ]
    };
    let header = [
        "method",
        "fixed_point_iterations",
        "average_gmres",
        "average_pcg",
        "oscillation",
        "wall_time_s",
    ];
    let mut w = create(&out.join("compare.csv"))?;
    {
        use std::io::Write;
        writeln!(w, "{}", header.join(","))?;
        for (name, r) in [("galerkin", &report.galerkin), ("su", &report.su)] {
            let cells: Vec<String> = row(r).into_iter().map(crate::output::fmt17).collect();
            writeln!(w, "{name},{}", cells.join(","))?;
        }
        w.flush()?;
    }
    write_report(&out.join("report.json"), cfg, &report)?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRow {
    pub degree: usize,
    pub h: f64,
    pub error: f64,
    /// `log2(e_{h*2} / e_h)`.
    pub order: Option<f64>,
    pub iterations: usize,
    pub failure: Option<String>,
}

/// Least-squares slope of `log e` against `log h`.
pub fn regression_slope(rows: &[&ConvergenceRow]) -> f64 {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.error > 0.0 && r.error.is_finite())
        .map(|r| (r.h.ln(), r.error.ln()))
        .collect();
    let n = pts.len() as f64;
    let (mx, my) = pts.iter().fold((0.0, 0.0), |a, p| (a.0 + p.0 / n, a.1 + p.1 / n));
    let (sxy, sxx) = pts
        .iter()
        .fold((0.0, 0.0), |a, p| (a.0 + (p.0 - mx) * (p.1 - my), a.1 + (p.0 - mx).powi(2)));
    sxy / sxx
}

/// The manufactured problem on `(0,1) × (0,1)` with `w ≡ 0`.
pub fn manufactured_problem(params: Parameters, degree: usize, elements: usize) -> Result<MonodomainProblem, CliError> {
    let space = TensorSpaceTime::uniform(degree, &[elements], degree, elements)?;
    Ok(MonodomainProblem {
        params,
        geometry: GeometryMap::identity(1, 1.0)?,
        space,
        source: SourceTerm::Manufactured1d.build(&params, 1.0)?,
    })
}

/// Relative L2 errors of SU on the manufactured solution for every
/// configured degree and level, without relaxation and with `w` frozen.
pub fn run_convergence(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<ConvergenceRow>, CliError> {
    let params: Parameters = cfg.problem.into();
    let cc = &cfg.convergence;
    let fp = FixedPointConfig {
        alpha: cc.alpha,
        delta: cc.delta,
        max_iterations: cc.max_iterations,
        stabilization: cfg.stabilization.for_method(Method::Su),
        linear_solver: LinearSolverChoice::Auto,
        freeze_recovery: true,
        ..FixedPointConfig::default()
    };
    let mut rows: Vec<ConvergenceRow> = Vec::new();
    for &p in &cc.degrees {
        let mut prev: Option<f64> = None;
        for &level in &cc.levels {
            let m = 1usize << level;
            let h = 1.0 / m as f64;
            let problem = manufactured_problem(params, p, m)?;
            let row = match fixed_point_solve(&problem, &fp) {
                Ok(r) => {
                    let e = l2_error(&r.u, &|x: &[f64], t| manufactured_solution(x[0], t), &problem.space, &problem.geometry)?;
                    let order = prev.filter(|&q| q > 0.0).map(|q| (q / e.value).log2());
                    prev = Some(e.value);
                    ConvergenceRow {
                        degree: p,
                        h,
                        error: e.value,
                        order,
                        iterations: r.iterations,
                        failure: None,
                    }
                }
                Err(e @ (Error::NonConvergence { .. } | Error::LinearNonConvergence { .. })) => {
                    log::warn!("p = {p}, h = {h}: {e}");
                    prev = None;
                    ConvergenceRow {
                        degree: p,
                        h,
                        error: f64::NAN,
                        order: None,
                        iterations: 0,
                        failure: Some(e.to_string()),
                    }
                }
                Err(e) => return Err(e.into()),
            };
            log::info!("p = {p}, h = {h}: error {:e}", row.error);
            rows.push(row);
        }
    }
    let table: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| vec![r.degree as f64, r.h, r.error, r.order.unwrap_or(f64::NAN), r.iterations as f64])
        .collect();
    write_csv(&out.join("convergence.csv"), &["degree", "h", "error", "order", "iterations"], &table)?;
    write_report(&out.join("report.json"), cfg, &rows)?;
    Ok(rows)
}
