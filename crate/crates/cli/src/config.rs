//! Run configuration: one JSON document naming a system, a boundary-value
//! problem, solver settings and output options.

use std::collections::BTreeMap;
use std::path::Path;

use biased_spline::solvers::{BoundaryProblem, SolverSettings, Velocity};
use biased_spline::systems::{builtin, system_from_expressions, SystemDefinition};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemSpec,
    #[serde(default)]
    pub problem: Option<ProblemSpec>,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub output: OutputSpec,
    /// Rectangular grid for `tensors` and `indicatrix`.
    #[serde(default)]
    pub grid: Option<Vec<Axis>>,
    #[serde(default)]
    pub indicatrix: IndicatrixSpec,
}

/// Exactly one of `builtin` and `expression`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub builtin: Option<String>,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    pub expression: Option<ExpressionSystem>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpressionSystem {
    #[serde(default = "default_expression_name")]
    pub name: String,
    pub coordinates: Vec<String>,
    pub metric: Vec<Vec<String>>,
    pub cometric: Vec<Vec<String>>,
    #[serde(default)]
    pub sample_box: Option<Vec<(f64, f64)>>,
}

fn default_expression_name() -> String {
    "expression".into()
}

/// A velocity vector or the string `"FREE"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VelocitySpec {
    Fixed(Vec<f64>),
    Marker(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub q0: Vec<f64>,
    pub v0: VelocitySpec,
    pub qf: Vec<f64>,
    pub vf: VelocitySpec,
    #[serde(default = "one", rename = "T", alias = "horizon")]
    pub horizon: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodSpec {
    #[default]
    Shooting,
    Collocation,
    Both,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    #[serde(default)]
    pub method: MethodSpec,
    pub steps: Option<usize>,
    pub nodes: Option<usize>,
    pub tolerance: Option<f64>,
    /// Newton iteration cap for shooting.
    pub max_iter: Option<usize>,
    pub collocation_max_iter: Option<usize>,
    /// Shooting seeds `[α₀…, p₀…]`, tried in order before the Hermite seed.
    #[serde(default)]
    pub seeds: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// Trajectory file stem; the method is appended when both solvers run.
    #[serde(default = "default_trajectory")]
    pub trajectory: String,
    #[serde(default = "default_summary")]
    pub summary: String,
    #[serde(default)]
    pub format: Format,
    /// Number of intervals in the written trajectory; must divide the
    /// solver's interval count. All nodes are written when absent.
    pub samples: Option<usize>,
}

fn default_trajectory() -> String {
    "trajectory".into()
}

fn default_summary() -> String {
    "summary.json".into()
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            trajectory: default_trajectory(),
            summary: default_summary(),
            format: Format::Csv,
            samples: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Axis {
    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.min];
        }
        (0..self.count)
            .map(|i| self.min + (self.max - self.min) * i as f64 / (self.count - 1) as f64)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quadratic {
    #[default]
    Metric,
    Cometric,
    Induced,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndicatrixSpec {
    #[serde(default)]
    pub which: Quadratic,
    #[serde(default = "default_count")]
    pub count: usize,
}

fn default_count() -> usize {
    64
}

impl Default for IndicatrixSpec {
    fn default() -> Self {
        Self {
            which: Quadratic::Metric,
            count: default_count(),
        }
    }
}

fn invalid(field: &str, message: impl std::fmt::Display) -> CliError {
    CliError::Invalid(format!("{field}: {message}"))
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Invalid(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Invalid(format!("--config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn build_system(&self) -> Result<SystemDefinition, CliError> {
        let spec = &self.system;
        match (&spec.builtin, &spec.expression) {
            (Some(name), None) => {
                builtin(name, &spec.params).map_err(|e| invalid("system.builtin", e))
            }
            (None, Some(expr)) => system_from_expressions(
                &expr.name,
                &expr.coordinates,
                &expr.metric,
                &expr.cometric,
                &spec.params,
                expr.sample_box.clone(),
            )
            .map_err(|e| invalid("system.expression", e)),
            (Some(_), Some(_)) => Err(invalid(
                "system",
                "give either `builtin` or `expression`, not both",
            )),
            (None, None) => Err(invalid("system", "missing `builtin` or `expression`")),
        }
    }

    /// The boundary-value problem, checked against the system's dimension and
    /// chart.
    pub fn build_problem(&self, system: &SystemDefinition) -> Result<BoundaryProblem, CliError> {
        let spec = self
            .problem
            .as_ref()
            .ok_or_else(|| invalid("problem", "missing problem block"))?;
        let d = system.dim();
        let vector = |field: &str, v: &[f64]| -> Result<DVector<f64>, CliError> {
            if v.len() != d {
                return Err(invalid(
                    field,
                    format!("expected {d} components for `{}`, got {}", system.name, v.len()),
                ));
            }
            Ok(DVector::from_column_slice(v))
        };
        let velocity = |field: &str, v: &VelocitySpec| -> Result<Velocity, CliError> {
            match v {
                VelocitySpec::Fixed(v) => Ok(Velocity::Fixed(vector(field, v)?)),
                VelocitySpec::Marker(m) if m == "FREE" => Ok(Velocity::Free),
                VelocitySpec::Marker(m) => Err(invalid(
                    field,
                    format!("expected a vector or \"FREE\", got \"{m}\""),
                )),
            }
        };
        let v0 = velocity("problem.v0", &spec.v0)?;
        let vf = velocity("problem.vf", &spec.vf)?;
        if v0.is_free() != vf.is_free() {
            return Err(invalid(
                "problem.vf",
                "end velocities must be both fixed or both FREE",
            ));
        }
        let solver = &self.solver;
        let defaults = SolverSettings::default();
        let mut settings = SolverSettings {
            steps: solver.steps.unwrap_or(defaults.steps),
            nodes: solver.nodes.unwrap_or(defaults.nodes),
            tolerance: solver.tolerance.unwrap_or(defaults.tolerance),
            max_iter: solver.max_iter.unwrap_or(defaults.max_iter),
            collocation_max_iter: solver
                .collocation_max_iter
                .unwrap_or(defaults.collocation_max_iter),
            ..defaults
        };
        if let Some(first) = solver.seeds.first() {
            if v0.is_free() {
                return Err(invalid("solver.seeds", "seeds apply to fixed-velocity problems only"));
            }
            for (i, s) in solver.seeds.iter().enumerate() {
                if s.len() != 2 * d {
                    return Err(invalid(
                        &format!("solver.seeds[{i}]"),
                        format!("expected {} components (alpha then p), got {}", 2 * d, s.len()),
                    ));
                }
            }
            settings.seed = Some(split_seed(first, d));
        }
        let problem = BoundaryProblem {
            system: system.clone(),
            q0: vector("problem.q0", &spec.q0)?,
            v0,
            qf: vector("problem.qf", &spec.qf)?,
            vf,
            horizon: spec.horizon,
            settings,
        };
        problem.validate().map_err(|e| invalid("problem", e))?;
        Ok(problem)
    }

    /// Grid points in lexicographic order, last axis fastest.
    pub fn grid_points(&self, system: &SystemDefinition) -> Result<Vec<Vec<f64>>, CliError> {
        let axes = self
            .grid
            .as_ref()
            .ok_or_else(|| invalid("grid", "missing grid block"))?;
        if axes.len() != system.dim() {
            return Err(invalid(
                "grid",
                format!("expected {} axes for `{}`, got {}", system.dim(), system.name, axes.len()),
            ));
        }
        for (i, a) in axes.iter().enumerate() {
            if a.count == 0 || !(a.min.is_finite() && a.max.is_finite()) || a.max < a.min {
                return Err(invalid(
                    &format!("grid[{i}]"),
                    "need finite min <= max and count >= 1",
                ));
            }
        }
        let mut points = vec![vec![]];
        for axis in axes {
            points = points
                .into_iter()
                .flat_map(|p| {
                    axis.values().into_iter().map(move |x| {
                        let mut q = p.clone();
                        q.push(x);
                        q
                    })
                })
                .collect();
        }
        for q in &points {
            system.check_point(q).map_err(|e| invalid("grid", e))?;
        }
        Ok(points)
    }
}

pub fn split_seed(seed: &[f64], d: usize) -> (DVector<f64>, DVector<f64>) {
    (
        DVector::from_column_slice(&seed[..d]),
        DVector::from_column_slice(&seed[d..]),
    )
}
