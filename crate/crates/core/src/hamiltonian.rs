//! The extended Hamiltonian system on `(q, v, α, p)` and its RK4 integration.
//!
//! In chart coordinates:
//!
//! ```text
//! q̇ = v
//! v̇^i = ½ h*^ij α_j − Γ^i_jk v^j v^k
//! α̇_i = Γ^j_ki v^k α_j − p_i
//! ṗ_i = Γ^j_ki v^k p_j − ¼ τ_i^jk α_j α_k + R^l_ijk v^j v^k α_l
//! ```
//!
//! with conserved `H = ¼ h*(α, α) + ⟨p, v⟩`.

use nalgebra::DVector;

use crate::dynamics::{compatibility_term, curvature_term, trapezoid, CurveSample, ForceData};
use crate::error::{Error, Result};
use crate::fd;
use crate::geometry::{gamma_covector, LocalGeometry};
use crate::systems::SystemDefinition;

#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedState {
    pub q: DVector<f64>,
    pub v: DVector<f64>,
    pub alpha: DVector<f64>,
    pub p: DVector<f64>,
}

impl ExtendedState {
    pub fn new(q: &[f64], v: &[f64], alpha: &[f64], p: &[f64]) -> Self {
        Self {
            q: DVector::from_column_slice(q),
            v: DVector::from_column_slice(v),
            alpha: DVector::from_column_slice(alpha),
            p: DVector::from_column_slice(p),
        }
    }

    pub fn zeros(d: usize) -> Self {
        Self {
            q: DVector::zeros(d),
            v: DVector::zeros(d),
            alpha: DVector::zeros(d),
            p: DVector::zeros(d),
        }
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    /// Flattened as `[q, v, α, p]`.
    pub fn to_vec(&self) -> Vec<f64> {
        [&self.q, &self.v, &self.alpha, &self.p]
            .iter()
            .flat_map(|x| x.iter().copied())
            .collect()
    }

    pub fn from_slice(x: &[f64]) -> Self {
        let d = x.len() / 4;
        Self::new(&x[..d], &x[d..2 * d], &x[2 * d..3 * d], &x[3 * d..])
    }

    pub fn is_finite(&self) -> bool {
        [&self.q, &self.v, &self.alpha, &self.p]
            .iter()
            .all(|x| x.iter().all(|c| c.is_finite()))
    }

    fn axpy(&self, h: f64, k: &ExtendedState) -> ExtendedState {
        ExtendedState {
            q: &self.q + &k.q * h,
            v: &self.v + &k.v * h,
            alpha: &self.alpha + &k.alpha * h,
            p: &self.p + &k.p * h,
        }
    }
}

fn check_state(system: &SystemDefinition, state: &ExtendedState) -> Result<()> {
    let d = system.dim();
    if [&state.q, &state.v, &state.alpha, &state.p]
        .iter()
        .any(|x| x.len() != d)
    {
        return Err(Error::Dimension(format!(
            "extended state does not match the {d}-dimensional chart of `{}`",
            system.name
        )));
    }
    Ok(())
}

/// Vector field at a state, given the geometry at `state.q`.
pub fn rhs_with(geom: &LocalGeometry, state: &ExtendedState) -> ExtendedState {
    let (v, alpha, p) = (&state.v, &state.alpha, &state.p);
    let gamma = &geom.christoffel;
    let vdot = &geom.hstar * alpha * 0.5 - geom.gamma_contract(v, v);
    let adot = gamma_covector(gamma, v, alpha) - p;
    let pdot = gamma_covector(gamma, v, p) - compatibility_term(&geom.compatibility, alpha) * 0.25
        + curvature_term(&geom.curvature, v, alpha);
    ExtendedState {
        q: v.clone(),
        v: vdot,
        alpha: adot,
        p: pdot,
    }
}

pub fn rhs(system: &SystemDefinition, state: &ExtendedState) -> Result<ExtendedState> {
    check_state(system, state)?;
    let geom = system.geometry(state.q.as_slice())?;
    Ok(rhs_with(&geom, state))
}

pub fn hamiltonian_with(geom: &LocalGeometry, state: &ExtendedState) -> f64 {
    0.25 * state.alpha.dot(&(&geom.hstar * &state.alpha)) + state.p.dot(&state.v)
}

/// `H = ¼ h*(α, α) + ⟨p, v⟩`.
pub fn hamiltonian_value(system: &SystemDefinition, state: &ExtendedState) -> Result<f64> {
    check_state(system, state)?;
    let geom = system.geometry(state.q.as_slice())?;
    Ok(hamiltonian_with(&geom, state))
}

/// Uniform-grid solution of the Hamiltonian system with per-node derived
/// quantities.
#[derive(Debug, Clone)]
pub struct HamiltonianTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<ExtendedState>,
    /// Coordinate acceleration `v̇` at each node.
    pub qdd: Vec<DVector<f64>>,
    pub forces: Vec<ForceData>,
    pub hamiltonian: Vec<f64>,
}

impl HamiltonianTrajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn horizon(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0) - self.times.first().copied().unwrap_or(0.0)
    }

    pub fn initial(&self) -> &ExtendedState {
        &self.states[0]
    }

    pub fn last(&self) -> &ExtendedState {
        &self.states[self.states.len() - 1]
    }

    /// Trapezoid integral of the cost density.
    pub fn cost(&self) -> f64 {
        let density: Vec<f64> = self.forces.iter().map(|f| f.cost_density).collect();
        trapezoid(&self.times, &density)
    }

    /// `max |H(t) − H(0)| / (1 + |H(0)|)`.
    pub fn hamiltonian_drift(&self) -> f64 {
        let h0 = self.hamiltonian[0];
        self.hamiltonian
            .iter()
            .map(|h| (h - h0).abs())
            .fold(0.0, f64::max)
            / (1.0 + h0.abs())
    }

    pub fn samples(&self) -> Vec<CurveSample> {
        self.times
            .iter()
            .zip(&self.states)
            .zip(&self.qdd)
            .map(|((t, s), a)| CurveSample {
                t: *t,
                q: s.q.clone(),
                v: s.v.clone(),
                qdd: a.clone(),
            })
            .collect()
    }

    /// Builds the extended trajectory of a sampled curve, recovering the
    /// costates from `α = 2 N a` and `p = Γ(v)ᵀα − α̇`.
    pub fn from_curve(system: &SystemDefinition, samples: &[CurveSample]) -> Result<Self> {
        let times: Vec<f64> = samples.iter().map(|s| s.t).collect();
        let h = fd::uniform_step(&times)?;
        let mut geoms = Vec::with_capacity(samples.len());
        let mut forces = Vec::with_capacity(samples.len());
        for s in samples {
            let g = system.geometry(s.q.as_slice())?;
            forces.push(ForceData::from_geometry(&g, s));
            geoms.push(g);
        }
        let alphas: Vec<DVector<f64>> = forces.iter().map(|f| &f.effort * 2.0).collect();
        let adot = fd::derivative_vec(&alphas, h, 1)?;
        let mut states = Vec::with_capacity(samples.len());
        let mut hamiltonian = Vec::with_capacity(samples.len());
        for (n, s) in samples.iter().enumerate() {
            let p = gamma_covector(&geoms[n].christoffel, &s.v, &alphas[n]) - &adot[n];
            let state = ExtendedState {
                q: s.q.clone(),
                v: s.v.clone(),
                alpha: alphas[n].clone(),
                p,
            };
            hamiltonian.push(hamiltonian_with(&geoms[n], &state));
            states.push(state);
        }
        Ok(Self {
            times,
            qdd: samples.iter().map(|s| s.qdd.clone()).collect(),
            states,
            forces,
            hamiltonian,
        })
    }
}

fn rk4_step(system: &SystemDefinition, x: &ExtendedState, dt: f64) -> Result<ExtendedState> {
    let k1 = rhs(system, x)?;
    let k2 = rhs(system, &x.axpy(0.5 * dt, &k1))?;
    let k3 = rhs(system, &x.axpy(0.5 * dt, &k2))?;
    let k4 = rhs(system, &x.axpy(dt, &k3))?;
    Ok(ExtendedState {
        q: &x.q + (&k1.q + (&k2.q + &k3.q) * 2.0 + &k4.q) * (dt / 6.0),
        v: &x.v + (&k1.v + (&k2.v + &k3.v) * 2.0 + &k4.v) * (dt / 6.0),
        alpha: &x.alpha + (&k1.alpha + (&k2.alpha + &k3.alpha) * 2.0 + &k4.alpha) * (dt / 6.0),
        p: &x.p + (&k1.p + (&k2.p + &k3.p) * 2.0 + &k4.p) * (dt / 6.0),
    })
}

fn march(
    system: &SystemDefinition,
    initial: &ExtendedState,
    horizon: f64,
    steps: usize,
    mut visit: impl FnMut(&ExtendedState),
) -> Result<ExtendedState> {
    check_state(system, initial)?;
    if steps < 2 {
        return Err(Error::InvalidProblem(format!(
            "at least 2 integration steps are required, got {steps}"
        )));
    }
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::InvalidProblem(format!(
            "horizon must be positive, got {horizon}"
        )));
    }
    let dt = horizon / steps as f64;
    let mut x = initial.clone();
    visit(&x);
    for n in 0..steps {
        let last_valid_time = n as f64 * dt;
        let next = rk4_step(system, &x, dt).map_err(|e| Error::Diverged {
            last_valid_time,
            cause: e.to_string(),
        })?;
        if !next.is_finite() {
            return Err(Error::Diverged {
                last_valid_time,
                cause: "state became non-finite".into(),
            });
        }
        x = next;
        visit(&x);
    }
    Ok(x)
}

/// Final state only, without per-node bookkeeping.
pub fn integrate_endpoint(
    system: &SystemDefinition,
    initial: &ExtendedState,
    horizon: f64,
    steps: usize,
) -> Result<ExtendedState> {
    march(system, initial, horizon, steps, |_| {})
}

/// Classical RK4 with `steps` uniform steps on `[0, horizon]`.
pub fn integrate(
    system: &SystemDefinition,
    initial: &ExtendedState,
    horizon: f64,
    steps: usize,
) -> Result<HamiltonianTrajectory> {
    let mut states = Vec::with_capacity(steps + 1);
    let last = march(system, initial, horizon, steps, |x| states.push(x.clone()))?;
    debug_assert_eq!(states.last(), Some(&last));
    let dt = horizon / steps as f64;
    let times: Vec<f64> = (0..=steps).map(|n| n as f64 * dt).collect();
    let mut qdd = Vec::with_capacity(states.len());
    let mut forces = Vec::with_capacity(states.len());
    let mut hamiltonian = Vec::with_capacity(states.len());
    for (t, x) in times.iter().zip(&states) {
        let geom = system
            .geometry(x.q.as_slice())
            .map_err(|e| Error::Diverged {
                last_valid_time: *t,
                cause: e.to_string(),
            })?;
        let d = rhs_with(&geom, x);
        let sample = CurveSample {
            t: *t,
            q: x.q.clone(),
            v: x.v.clone(),
            qdd: d.v.clone(),
        };
        forces.push(ForceData::from_geometry(&geom, &sample));
        hamiltonian.push(hamiltonian_with(&geom, x));
        qdd.push(d.v);
    }
    Ok(HamiltonianTrajectory {
        times,
        states,
        qdd,
        forces,
        hamiltonian,
    })
}
