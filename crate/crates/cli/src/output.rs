//! File formats: trajectory tables, tensor grids, indicatrix points and
//! summaries.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use biased_spline::dynamics::{trajectory_cost, CurveSample};
use biased_spline::geometry::gamma_contract;
use biased_spline::hamiltonian::HamiltonianTrajectory;
use biased_spline::solvers::SolverReport;
use biased_spline::systems::SystemDefinition;
use nalgebra::DVector;
use serde::Serialize;

use crate::config::Format;
use crate::CliError;

/// A header row and numeric rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn indexed(prefix: &str, d: usize) -> impl Iterator<Item = String> + '_ {
    (1..=d).map(move |i| format!("{prefix}{i}"))
}

pub fn trajectory_header(d: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    for prefix in ["q", "v", "a", "F", "E", "alpha", "p"] {
        h.extend(indexed(prefix, d));
    }
    h.push("H".into());
    h.push("cost_density".into());
    h
}

/// Every `stride`-th node of the trajectory, endpoints included.
pub fn trajectory_table(traj: &HamiltonianTrajectory, stride: usize) -> Table {
    let d = traj.states[0].dim();
    let rows = (0..traj.len())
        .step_by(stride.max(1))
        .map(|i| {
            let s = &traj.states[i];
            let f = &traj.forces[i];
            let mut row = vec![traj.times[i]];
            for v in [&s.q, &s.v, &f.a, &f.force, &f.effort, &s.alpha, &s.p] {
                row.extend(v.iter());
            }
            row.push(traj.hamiltonian[i]);
            row.push(f.cost_density);
            row
        })
        .collect();
    Table {
        header: trajectory_header(d),
        rows,
    }
}

pub fn write_csv(path: &Path, table: &Table) -> Result<(), CliError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(csv_error)?;
    w.write_record(&table.header).map_err(csv_error)?;
    for row in &table.rows {
        w.write_record(row.iter().map(|x| format_float(*x)))
            .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// `{"columns": [...], "rows": [[...], ...]}`.
pub fn write_json_table(path: &Path, table: &Table) -> Result<(), CliError> {
    #[derive(Serialize)]
    struct Doc<'a> {
        columns: &'a [String],
        rows: &'a [Vec<f64>],
    }
    write_json(
        path,
        &Doc {
            columns: &table.header,
            rows: &table.rows,
        },
    )
}

pub fn write_table(path: &Path, table: &Table, format: Format) -> Result<(), CliError> {
    match format {
        Format::Csv => write_csv(path, table),
        Format::Json => write_json_table(path, table),
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)
        .map_err(|e| CliError::Invalid(format!("serializing {}: {e}", path.display())))?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn csv_error(e: csv::Error) -> CliError {
    CliError::Invalid(format!("csv: {e}"))
}

pub fn read_csv(path: &Path) -> Result<Table, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(csv_error)?;
    let header = r
        .headers()
        .map_err(csv_error)?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = vec![];
    for (i, record) in r.records().enumerate() {
        let record = record.map_err(csv_error)?;
        let row = record
            .iter()
            .map(|x| {
                x.parse::<f64>()
                    .map_err(|e| CliError::Invalid(format!("row {}: `{x}`: {e}", i + 1)))
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    Ok(Table { header, rows })
}

/// Rebuilds curve samples from a trajectory table, recovering the coordinate
/// acceleration from the covariant one as `q̈ = a − Γ(v, v)`.
pub fn samples_from_table(
    system: &SystemDefinition,
    table: &Table,
) -> Result<Vec<CurveSample>, CliError> {
    let d = system.dim();
    if table.header != trajectory_header(d) {
        return Err(CliError::Invalid(format!(
            "trajectory header does not match a {d}-dimensional system"
        )));
    }
    table
        .rows
        .iter()
        .map(|row| {
            let q = DVector::from_column_slice(&row[1..1 + d]);
            let v = DVector::from_column_slice(&row[1 + d..1 + 2 * d]);
            let a = DVector::from_column_slice(&row[1 + 2 * d..1 + 3 * d]);
            let geom = system.geometry(q.as_slice())?;
            let qdd = a - gamma_contract(&geom.christoffel, &v, &v);
            Ok(CurveSample { t: row[0], q, v, qdd })
        })
        .collect()
}

/// Cost of a written trajectory, recomputed from positions, velocities and
/// accelerations.
pub fn recompute_cost(system: &SystemDefinition, path: &Path) -> Result<f64, CliError> {
    let table = read_csv(path)?;
    let samples = samples_from_table(system, &table)?;
    Ok(trajectory_cost(system, &samples)?)
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub converged: bool,
    pub method: String,
    pub iterations: usize,
    pub residual_norm: f64,
    pub tolerance: f64,
    pub cost: Option<f64>,
    pub shooting_parameters: Vec<f64>,
    pub wall_time_ms: f64,
    pub system: String,
    pub hamiltonian_drift: Option<f64>,
    pub trajectory_file: Option<String>,
    pub message: Option<String>,
}

impl Summary {
    pub fn new(system: &str, report: &SolverReport, wall_time_ms: f64) -> Self {
        Self {
            converged: report.converged,
            method: report.method.name().to_string(),
            iterations: report.iterations,
            residual_norm: report.residual_norm,
            tolerance: report.tolerance,
            cost: report.cost.is_finite().then_some(report.cost),
            shooting_parameters: report.shooting_parameters.clone(),
            wall_time_ms,
            system: system.to_string(),
            hamiltonian_drift: report.trajectory.as_ref().map(|t| t.hamiltonian_drift()),
            trajectory_file: None,
            message: report.message.clone(),
        }
    }
}
