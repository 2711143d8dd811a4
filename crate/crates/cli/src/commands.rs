//! Subcommand implementations.

use std::path::{Path, PathBuf};
use std::time::Instant;

use biased_spline::geometry::{indicatrix_samples, sectional_from};
use biased_spline::solvers::{solve, sup_distance, BoundaryProblem, Method, SolverReport};
use biased_spline::systems::SystemDefinition;
use serde::Serialize;

use crate::config::{split_seed, Format, MethodSpec, Quadratic, RunConfig};
use crate::output::{trajectory_table, write_json, write_table, Summary, Table};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    Tensors,
    Indicatrix,
    Compare,
}

pub struct Context<'a> {
    pub config: &'a RunConfig,
    pub out: &'a Path,
    pub verbose: bool,
}

impl Context<'_> {
    fn log(&self, msg: impl AsRef<str>) {
        if self.verbose {
            eprintln!("{}", msg.as_ref());
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

pub fn run(command: Command, config: &RunConfig, out: &Path, verbose: bool) -> Result<(), CliError> {
    let system = config.build_system()?;
    let ctx = Context {
        config,
        out,
        verbose,
    };
    match command {
        Command::Solve => solve_command(&ctx, &system),
        Command::Compare => compare_command(&ctx, &system),
        Command::Tensors => tensors_command(&ctx, &system),
        Command::Indicatrix => indicatrix_command(&ctx, &system),
    }
}

fn extension(format: Format) -> &'static str {
    match format {
        Format::Csv => "csv",
        Format::Json => "json",
    }
}

fn intervals(problem: &BoundaryProblem, method: Method) -> usize {
    match method {
        Method::Collocation => problem.settings.nodes.saturating_sub(1),
        _ => problem.settings.steps,
    }
}

/// Row stride that thins a trajectory to `output.samples` intervals.
fn stride(ctx: &Context, problem: &BoundaryProblem, method: Method) -> Result<usize, CliError> {
    let n = intervals(problem, method);
    match ctx.config.output.samples {
        None => Ok(1),
        Some(s) if s > 0 && n % s == 0 => Ok(n / s),
        Some(s) => Err(CliError::Invalid(format!(
            "output.samples: {s} does not divide the {n} intervals of the {} grid",
            method.name()
        ))),
    }
}

fn methods(spec: MethodSpec) -> Vec<Method> {
    match spec {
        MethodSpec::Shooting => vec![Method::Shooting],
        MethodSpec::Collocation => vec![Method::Collocation],
        MethodSpec::Both => vec![Method::Shooting, Method::Collocation],
    }
}

struct Run {
    report: SolverReport,
    wall_time_ms: f64,
}

/// Shooting tries each configured seed in turn and keeps the first that
/// converges; the default seeding runs last.
fn run_solver(ctx: &Context, problem: &BoundaryProblem, method: Method) -> Result<Run, CliError> {
    let start = Instant::now();
    let d = problem.system.dim();
    let seeds = &ctx.config.solver.seeds;
    let mut report = None;
    if method == Method::Shooting && !problem.is_geodesic() {
        for (i, seed) in seeds.iter().enumerate() {
            let mut p = problem.clone();
            p.settings.seed = Some(split_seed(seed, d));
            let r = solve(&p, method)?;
            ctx.log(format!("seed {i}: converged {}", r.converged));
            if r.converged {
                report = Some(r);
                break;
            }
        }
    }
    let report = match report {
        Some(r) => r,
        None => {
            let mut p = problem.clone();
            p.settings.seed = None;
            solve(&p, method)?
        }
    };
    let wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
    ctx.log(format!(
        "{}: converged {} after {} iterations, residual {:e}, cost {}",
        method.name(),
        report.converged,
        report.iterations,
        report.residual_norm,
        report.cost
    ));
    Ok(Run {
        report,
        wall_time_ms,
    })
}

fn trajectory_name(ctx: &Context, method: Method, several: bool) -> String {
    let out = &ctx.config.output;
    if several {
        format!("{}_{}.{}", out.trajectory, method.name(), extension(out.format))
    } else {
        format!("{}.{}", out.trajectory, extension(out.format))
    }
}

/// Writes the trajectory of a converged run and returns its summary.
fn record(
    ctx: &Context,
    system: &SystemDefinition,
    run: &Run,
    stride: usize,
    several: bool,
) -> Result<Summary, CliError> {
    let mut summary = Summary::new(&system.name, &run.report, run.wall_time_ms);
    if run.report.converged {
        if let Some(traj) = &run.report.trajectory {
            let name = trajectory_name(ctx, run.report.method, several);
            write_table(&ctx.path(&name), &trajectory_table(traj, stride), ctx.config.output.format)?;
            summary.trajectory_file = Some(name);
        }
    }
    Ok(summary)
}

fn not_converged(summaries: &[Summary]) -> Result<(), CliError> {
    let failed: Vec<String> = summaries
        .iter()
        .filter(|s| !s.converged)
        .map(|s| {
            format!(
                "{} did not converge (residual {:e}{})",
                s.method,
                s.residual_norm,
                s.message.as_deref().map(|m| format!(": {m}")).unwrap_or_default()
            )
        })
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::NotConverged(failed.join("; ")))
    }
}

#[derive(Serialize)]
struct Runs<'a> {
    runs: &'a [Summary],
}

fn solve_command(ctx: &Context, system: &SystemDefinition) -> Result<(), CliError> {
    let problem = ctx.config.build_problem(system)?;
    let methods = methods(ctx.config.solver.method);
    let strides = methods
        .iter()
        .map(|m| stride(ctx, &problem, *m))
        .collect::<Result<Vec<_>, _>>()?;
    std::fs::create_dir_all(ctx.out)?;
    let several = methods.len() > 1;
    let mut summaries = vec![];
    for (method, stride) in methods.iter().zip(strides) {
        let run = run_solver(ctx, &problem, *method)?;
        summaries.push(record(ctx, system, &run, stride, several)?);
    }
    let path = ctx.path(&ctx.config.output.summary);
    if several {
        write_json(&path, &Runs { runs: &summaries })?;
    } else {
        write_json(&path, &summaries[0])?;
    }
    not_converged(&summaries)
}

#[derive(Serialize)]
struct Comparison<'a> {
    runs: &'a [Summary],
    cost_gap: Option<f64>,
    relative_cost_gap: Option<f64>,
    sup_distance: Option<f64>,
}

fn compare_command(ctx: &Context, system: &SystemDefinition) -> Result<(), CliError> {
    let problem = ctx.config.build_problem(system)?;
    let stride_s = stride(ctx, &problem, Method::Shooting)?;
    let stride_c = stride(ctx, &problem, Method::Collocation)?;
    std::fs::create_dir_all(ctx.out)?;
    let (shooting, collocation) = std::thread::scope(|s| {
        let handle = s.spawn(|| run_solver(ctx, &problem, Method::Collocation));
        let shooting = run_solver(ctx, &problem, Method::Shooting);
        let collocation = handle.join().expect("collocation thread panicked");
        (shooting, collocation)
    });
    let (shooting, collocation) = (shooting?, collocation?);
    let summaries = vec![
        record(ctx, system, &shooting, stride_s, true)?,
        record(ctx, system, &collocation, stride_c, true)?,
    ];
    let (a, b) = (&shooting.report, &collocation.report);
    let both = a.converged && b.converged;
    let cost_gap = both.then(|| (a.cost - b.cost).abs());
    let comparison = Comparison {
        runs: &summaries,
        cost_gap,
        relative_cost_gap: cost_gap.map(|g| g / a.cost.abs().max(b.cost.abs()).max(f64::MIN_POSITIVE)),
        sup_distance: match (&a.trajectory, &b.trajectory) {
            (Some(x), Some(y)) if both => Some(sup_distance(x, y)),
            _ => None,
        },
    };
    write_json(&ctx.path("comparison.json"), &comparison)?;
    not_converged(&summaries)
}

fn matrix_columns(prefix: &str, d: usize) -> Vec<String> {
    let mut h = vec![];
    for i in 1..=d {
        for j in 1..=d {
            h.push(format!("{prefix}_{i}_{j}"));
        }
    }
    h
}

/// Header of the tensor grid: coordinates, `M`, `Ñ`, `N`, `h*` and `Γ` entries,
/// the largest compatibility-tensor entry, and the sectional curvature
/// when `d = 2`.
pub fn tensor_header(d: usize) -> Vec<String> {
    let mut h: Vec<String> = (1..=d).map(|i| format!("q{i}")).collect();
    for prefix in ["M", "Nt", "N", "hstar"] {
        h.extend(matrix_columns(prefix, d));
    }
    for k in 1..=d {
        h.extend(matrix_columns(&format!("Gamma_{k}"), d));
    }
    h.push("tau_maxabs".into());
    if d == 2 {
        h.push("K".into());
    }
    h
}

pub fn tensor_table(system: &SystemDefinition, points: &[Vec<f64>]) -> Result<Table, CliError> {
    let d = system.dim();
    let mut rows = vec![];
    for q in points {
        let g = system.geometry(q)?;
        let mut row = q.clone();
        for m in [&g.metric, &g.cometric, &g.induced, &g.hstar] {
            for i in 0..d {
                for j in 0..d {
                    row.push(m[(i, j)]);
                }
            }
        }
        for k in 0..d {
            for i in 0..d {
                for j in 0..d {
                    row.push(g.christoffel[[k, i, j]]);
                }
            }
        }
        row.push(g.compatibility.max_abs());
        if d == 2 {
            row.push(sectional_from(&g.metric, &g.curvature));
        }
        rows.push(row);
    }
    Ok(Table {
        header: tensor_header(d),
        rows,
    })
}

fn tensors_command(ctx: &Context, system: &SystemDefinition) -> Result<(), CliError> {
    let points = ctx.config.grid_points(system)?;
    let table = tensor_table(system, &points)?;
    std::fs::create_dir_all(ctx.out)?;
    let name = format!("tensors.{}", extension(ctx.config.output.format));
    ctx.log(format!("writing {} grid points to {name}", table.rows.len()));
    write_table(&ctx.path(&name), &table, ctx.config.output.format)
}

/// Boundary points of the unit ball of the selected form at each grid point.
pub fn indicatrix_table(
    system: &SystemDefinition,
    points: &[Vec<f64>],
    which: Quadratic,
    count: usize,
) -> Result<Table, CliError> {
    if system.dim() != 2 {
        return Err(CliError::Invalid(format!(
            "indicatrix: needs a 2-dimensional system, `{}` has d = {}",
            system.name,
            system.dim()
        )));
    }
    if count == 0 {
        return Err(CliError::Invalid("indicatrix.count: must be positive".into()));
    }
    let mut rows = vec![];
    for (index, q) in points.iter().enumerate() {
        let g = system.geometry(q)?;
        let form = match which {
            Quadratic::Metric => &g.metric,
            Quadratic::Cometric => &g.cometric,
            Quadratic::Induced => &g.induced,
        };
        for (k, x) in indicatrix_samples(form, count)?.iter().enumerate() {
            rows.push(vec![index as f64, q[0], q[1], k as f64, x[0], x[1]]);
        }
    }
    Ok(Table {
        header: ["point", "q1", "q2", "k", "x1", "x2"]
            .map(String::from)
            .to_vec(),
        rows,
    })
}

fn indicatrix_command(ctx: &Context, system: &SystemDefinition) -> Result<(), CliError> {
    let points = ctx.config.grid_points(system)?;
    let spec = ctx.config.indicatrix;
    let table = indicatrix_table(system, &points, spec.which, spec.count)?;
    std::fs::create_dir_all(ctx.out)?;
    let name = format!("indicatrix.{}", extension(ctx.config.output.format));
    write_table(&ctx.path(&name), &table, ctx.config.output.format)
}
