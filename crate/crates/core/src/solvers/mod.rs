//! Two-point boundary-value solvers.
//!
//! * [`solve_spline_shooting`]: Newton on the initial costates `(α₀, p₀)`.
//! * [`solve_geodesic`]: Newton on the initial velocity with zero costates,
//!   for problems with free end velocities.
//! * [`solve_collocation`]: direct minimization of the discretized cost over
//!   node positions, independent of the Hamiltonian formulation.

mod collocation;
mod newton;
mod shooting;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::hamiltonian::{ExtendedState, HamiltonianTrajectory};
use crate::systems::SystemDefinition;

pub use collocation::solve_collocation;
pub use newton::{fd_jacobian, newton_solve, newton_step, NewtonResult, NewtonStep, StepStatus};
pub use shooting::{hermite_seed, solve_geodesic, solve_spline_shooting};

#[derive(Debug, Clone, PartialEq)]
pub enum Velocity {
    Fixed(DVector<f64>),
    Free,
}

impl Velocity {
    pub fn fixed(v: &[f64]) -> Self {
        Self::Fixed(DVector::from_column_slice(v))
    }

    pub fn is_free(&self) -> bool {
        matches!(self, Self::Free)
    }

    pub fn value(&self) -> Option<&DVector<f64>> {
        match self {
            Self::Fixed(v) => Some(v),
            Self::Free => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverSettings {
    /// RK4 steps over the horizon.
    pub steps: usize,
    pub tolerance: f64,
    pub max_iter: usize,
    /// Relative forward-difference step for Newton jacobians.
    pub fd_step: f64,
    /// Collocation node count, endpoints included.
    pub nodes: usize,
    pub collocation_max_iter: usize,
    /// Number of continuation stages from the dual cometric.
    pub homotopy_steps: usize,
    /// Number of initial-direction seeds for geodesic multi-start.
    pub geodesic_seeds: usize,
    /// Explicit `(α₀, p₀)` seed overriding the Hermite one.
    pub seed: Option<(DVector<f64>, DVector<f64>)>,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            steps: 1000,
            tolerance: 1e-10,
            max_iter: 50,
            fd_step: 1e-7,
            nodes: 200,
            collocation_max_iter: 20_000,
            homotopy_steps: 5,
            geodesic_seeds: 8,
            seed: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BoundaryProblem {
    pub system: SystemDefinition,
    pub q0: DVector<f64>,
    pub v0: Velocity,
    pub qf: DVector<f64>,
    pub vf: Velocity,
    pub horizon: f64,
    pub settings: SolverSettings,
}

impl BoundaryProblem {
    /// Fixed-velocity problem on `[0, 1]` with default settings.
    pub fn new(system: SystemDefinition, q0: &[f64], v0: &[f64], qf: &[f64], vf: &[f64]) -> Self {
        Self {
            system,
            q0: DVector::from_column_slice(q0),
            v0: Velocity::fixed(v0),
            qf: DVector::from_column_slice(qf),
            vf: Velocity::fixed(vf),
            horizon: 1.0,
            settings: SolverSettings::default(),
        }
    }

    /// Free-velocity (geodesic) problem on `[0, 1]`.
    pub fn free(system: SystemDefinition, q0: &[f64], qf: &[f64]) -> Self {
        Self {
            system,
            q0: DVector::from_column_slice(q0),
            v0: Velocity::Free,
            qf: DVector::from_column_slice(qf),
            vf: Velocity::Free,
            horizon: 1.0,
            settings: SolverSettings::default(),
        }
    }

    pub fn with_horizon(mut self, horizon: f64) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn with_settings(mut self, settings: SolverSettings) -> Self {
        self.settings = settings;
        self
    }

    pub fn is_geodesic(&self) -> bool {
        self.v0.is_free()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.system.dim();
        let check = |what: &str, v: &DVector<f64>| -> Result<()> {
            if v.len() != d {
                return Err(Error::Dimension(format!(
                    "{what} has {} components but `{}` is {d}-dimensional",
                    v.len(),
                    self.system.name
                )));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidProblem(format!("{what} is not finite")));
            }
            Ok(())
        };
        check("q0", &self.q0)?;
        check("qf", &self.qf)?;
        if let Some(v) = self.v0.value() {
            check("v0", v)?;
        }
        if let Some(v) = self.vf.value() {
            check("vf", v)?;
        }
        if self.v0.is_free() != self.vf.is_free() {
            return Err(Error::InvalidProblem(
                "end velocities must be both fixed or both free".into(),
            ));
        }
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(Error::InvalidProblem(format!(
                "horizon must be positive, got {}",
                self.horizon
            )));
        }
        let s = &self.settings;
        if s.steps < 2 {
            return Err(Error::InvalidProblem(format!(
                "steps must be at least 2, got {}",
                s.steps
            )));
        }
        if s.nodes < 8 {
            return Err(Error::InvalidProblem(format!(
                "nodes must be at least 8, got {}",
                s.nodes
            )));
        }
        if !(s.tolerance > 0.0) {
            return Err(Error::InvalidProblem("tolerance must be positive".into()));
        }
        if let Some((a, p)) = &s.seed {
            check("seed alpha", a)?;
            check("seed p", p)?;
        }
        self.system.check_point(self.q0.as_slice())?;
        self.system.check_point(self.qf.as_slice())?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Shooting,
    Geodesic,
    Collocation,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Self::Shooting => "shooting",
            Self::Geodesic => "geodesic",
            Self::Collocation => "collocation",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolverReport {
    pub method: Method,
    pub converged: bool,
    pub iterations: usize,
    /// Boundary residual norm for shooting methods, gradient infinity-norm
    /// for collocation.
    pub residual_norm: f64,
    /// The threshold `residual_norm` had to meet.
    pub tolerance: f64,
    pub cost: f64,
    /// `(α₀, p₀)` stacked for spline shooting, `v₀` for geodesics, empty for
    /// collocation.
    pub shooting_parameters: Vec<f64>,
    pub trajectory: Option<HamiltonianTrajectory>,
    /// Failure chain for unconverged runs; for converged shooting runs, the
    /// fallback that succeeded.
    pub message: Option<String>,
}

impl SolverReport {
    pub fn initial_state(&self) -> Option<&ExtendedState> {
        self.trajectory.as_ref().map(|t| t.initial())
    }
}

/// Runs `method`; shooting on a free-velocity problem becomes a geodesic
/// solve.
pub fn solve(problem: &BoundaryProblem, method: Method) -> Result<SolverReport> {
    match method {
        Method::Shooting if problem.is_geodesic() => solve_geodesic(problem),
        Method::Shooting => solve_spline_shooting(problem),
        Method::Geodesic => solve_geodesic(problem),
        Method::Collocation => solve_collocation(problem),
    }
}

/// Position on a trajectory at time `t` by cubic Hermite interpolation of the
/// node positions and velocities.
pub fn position_at(traj: &HamiltonianTrajectory, t: f64) -> DVector<f64> {
    let n = traj.times.len();
    let t0 = traj.times[0];
    let h = traj.times[1] - t0;
    let s = ((t - t0) / h).clamp(0.0, (n - 1) as f64);
    let i = (s.floor() as usize).min(n - 2);
    let u = s - i as f64;
    let (a, b) = (&traj.states[i], &traj.states[i + 1]);
    let h00 = 2.0 * u.powi(3) - 3.0 * u * u + 1.0;
    let h10 = u.powi(3) - 2.0 * u * u + u;
    let h01 = -2.0 * u.powi(3) + 3.0 * u * u;
    let h11 = u.powi(3) - u * u;
    &a.q * h00 + &a.v * (h10 * h) + &b.q * h01 + &b.v * (h11 * h)
}

/// Largest coordinate distance between two trajectories, compared on the
/// nodes of `b` after mapping its times onto `a`'s horizon.
pub fn sup_distance(a: &HamiltonianTrajectory, b: &HamiltonianTrajectory) -> f64 {
    let scale = a.horizon() / b.horizon();
    b.times
        .iter()
        .zip(&b.states)
        .map(|(t, s)| (position_at(a, t * scale) - &s.q).amax())
        .fold(0.0, f64::max)
}
