//! Direct minimization of the discretized cost over node positions.
//!
//! Nodes `Q_0 … Q_{n-1}` sit on a uniform grid; interior nodes are the
//! unknowns. Velocities and accelerations are central differences. Fixed end
//! velocities enter through ghost nodes `Q_{-1} = Q_1 − 2Δt v₀` and
//! `Q_n = Q_{n-2} + 2Δt v_f`; with free end velocities the endpoint terms
//! are dropped. The cost is the trapezoid sum of `aᵀ N a`.

use nalgebra::{DMatrix, DVector};

use super::{BoundaryProblem, Method, SolverReport};
use crate::dynamics::CurveSample;
use crate::error::{Error, Result};
use crate::geometry::{christoffel_with_partials, gamma_contract, induced_jet, FieldJet, Order};
use crate::hamiltonian::HamiltonianTrajectory;
use crate::systems::SystemDefinition;

struct Grid<'a> {
    system: &'a SystemDefinition,
    d: usize,
    n: usize,
    dt: f64,
    q0: DVector<f64>,
    qf: DVector<f64>,
    ends: Option<(DVector<f64>, DVector<f64>)>,
}

struct NodeTerms {
    cost: f64,
    dq: DVector<f64>,
    dv: DVector<f64>,
    dqdd: DVector<f64>,
    induced: DMatrix<f64>,
}

impl Grid<'_> {
    fn node(&self, x: &DVector<f64>, j: usize) -> DVector<f64> {
        if j == 0 {
            self.q0.clone()
        } else if j == self.n - 1 {
            self.qf.clone()
        } else {
            x.rows((j - 1) * self.d, self.d).into_owned()
        }
    }

    fn nodes(&self, x: &DVector<f64>) -> Vec<DVector<f64>> {
        (0..self.n).map(|j| self.node(x, j)).collect()
    }

    fn active(&self) -> std::ops::Range<usize> {
        if self.ends.is_some() {
            0..self.n
        } else {
            1..self.n - 1
        }
    }

    fn weight(&self, j: usize) -> f64 {
        if self.ends.is_some() && (j == 0 || j == self.n - 1) {
            0.5 * self.dt
        } else {
            self.dt
        }
    }

    /// Velocity and acceleration at node `j` from the difference stencils.
    fn kinematics(&self, q: &[DVector<f64>], j: usize) -> (DVector<f64>, DVector<f64>) {
        let (dt, n) = (self.dt, self.n);
        match (&self.ends, j) {
            (Some((v0, _)), 0) => (v0.clone(), (&q[1] - &q[0] - v0 * dt) * (2.0 / (dt * dt))),
            (Some((_, vf)), j) if j == n - 1 => (
                vf.clone(),
                (&q[n - 2] - &q[n - 1] + vf * dt) * (2.0 / (dt * dt)),
            ),
            (None, 0) => (
                (&q[1] * 4.0 - &q[0] * 3.0 - &q[2]) / (2.0 * dt),
                (&q[0] * 2.0 - &q[1] * 5.0 + &q[2] * 4.0 - &q[3]) / (dt * dt),
            ),
            (None, j) if j == n - 1 => (
                (&q[j] * 3.0 - &q[j - 1] * 4.0 + &q[j - 2]) / (2.0 * dt),
                (&q[j] * 2.0 - &q[j - 1] * 5.0 + &q[j - 2] * 4.0 - &q[j - 3]) / (dt * dt),
            ),
            _ => (
                (&q[j + 1] - &q[j - 1]) / (2.0 * dt),
                (&q[j + 1] - &q[j] * 2.0 + &q[j - 1]) / (dt * dt),
            ),
        }
    }

    /// `c = aᵀ N a` and its partials with respect to position, velocity and
    /// coordinate acceleration at one node.
    fn terms(
        &self,
        q: &DVector<f64>,
        v: &DVector<f64>,
        qdd: &DVector<f64>,
        with_grad: bool,
    ) -> Result<NodeTerms> {
        let d = self.d;
        let qs = q.as_slice();
        self.system.check_point(qs)?;
        let order = if with_grad {
            Order::Second
        } else {
            Order::First
        };
        let m = self.system.metric.jet(qs, order)?;
        let c = self.system.cometric.jet(
            qs,
            if with_grad {
                Order::First
            } else {
                Order::Value
            },
        )?;
        if !with_grad {
            let gamma = crate::geometry::christoffel_from_jet(&m, qs)?;
            let induced = crate::geometry::induced_metric_matrix(&m.value, &c.value);
            let a = qdd + gamma_contract(&gamma, v, v);
            return Ok(NodeTerms {
                cost: a.dot(&(&induced * &a)),
                dq: DVector::zeros(0),
                dv: DVector::zeros(0),
                dqdd: DVector::zeros(0),
                induced,
            });
        }
        let (gamma, dgamma) = christoffel_with_partials(&m, qs)?;
        let m1 = FieldJet {
            value: m.value.clone(),
            first: m.first.clone(),
            second: None,
        };
        let n = induced_jet(&m1, &c);
        let a = qdd + gamma_contract(&gamma, v, v);
        let e = &n.value * &a * 2.0;
        let cost = 0.5 * a.dot(&e);
        let dq = DVector::from_fn(d, |mm, _| {
            let mut s = a.dot(&(n.d(mm) * &a));
            for k in 0..d {
                for i in 0..d {
                    for j in 0..d {
                        s += e[k] * dgamma[[mm, k, i, j]] * v[i] * v[j];
                    }
                }
            }
            s
        });
        let dv = DVector::from_fn(d, |i, _| {
            let mut s = 0.0;
            for k in 0..d {
                for j in 0..d {
                    s += 2.0 * e[k] * gamma[[k, i, j]] * v[j];
                }
            }
            s
        });
        Ok(NodeTerms {
            cost,
            dq,
            dv,
            dqdd: e,
            induced: n.value,
        })
    }

    fn objective(&self, x: &DVector<f64>) -> Result<f64> {
        let q = self.nodes(x);
        let mut f = 0.0;
        for j in self.active() {
            let (v, qdd) = self.kinematics(&q, j);
            f += self.weight(j) * self.terms(&q[j], &v, &qdd, false)?.cost;
        }
        Ok(f)
    }

    /// Objective, gradient with respect to the interior nodes, and the
    /// induced metric at every node.
    fn evaluate(&self, x: &DVector<f64>) -> Result<(f64, DVector<f64>, Vec<DMatrix<f64>>)> {
        let (d, n, dt) = (self.d, self.n, self.dt);
        let q = self.nodes(x);
        let mut f = 0.0;
        let mut grad = DVector::zeros(x.len());
        let mut induced = vec![DMatrix::zeros(d, d); n];
        let mut add = |node: usize, g: &DVector<f64>| {
            if node >= 1 && node <= n - 2 {
                let mut slot = grad.rows_mut((node - 1) * d, d);
                slot += g;
            }
        };
        for j in self.active() {
            let (v, qdd) = self.kinematics(&q, j);
            let t = self.terms(&q[j], &v, &qdd, true)?;
            let w = self.weight(j);
            f += w * t.cost;
            induced[j] = t.induced;
            let inv2 = 1.0 / (dt * dt);
            match (&self.ends, j) {
                (Some(_), 0) => add(1, &(&t.dqdd * (2.0 * w * inv2))),
                (Some(_), j) if j == n - 1 => add(n - 2, &(&t.dqdd * (2.0 * w * inv2))),
                _ => {
                    add(j, &((&t.dq - &t.dqdd * (2.0 * inv2)) * w));
                    add(j + 1, &((&t.dqdd * inv2 + &t.dv / (2.0 * dt)) * w));
                    add(j - 1, &((&t.dqdd * inv2 - &t.dv / (2.0 * dt)) * w));
                }
            }
        }
        Ok((f, grad, induced))
    }

    /// Hessian of the cost with geometry frozen and Christoffel terms
    /// ignored: `Σ 2 w_j B_jᵀ N_j B_j`, `B_j` the acceleration stencil.
    fn preconditioner(
        &self,
        induced: &[DMatrix<f64>],
    ) -> Option<nalgebra::Cholesky<f64, nalgebra::Dyn>> {
        let (d, n, dt) = (self.d, self.n, self.dt);
        let size = d * (n - 2);
        let mut p = DMatrix::zeros(size, size);
        let inv2 = 1.0 / (dt * dt);
        for j in self.active() {
            let stencil: Vec<(usize, f64)> = match (&self.ends, j) {
                (Some(_), 0) => vec![(1, 2.0 * inv2)],
                (Some(_), j) if j == n - 1 => vec![(n - 2, 2.0 * inv2)],
                _ => vec![(j - 1, inv2), (j, -2.0 * inv2), (j + 1, inv2)],
            };
            let w = 2.0 * self.weight(j);
            for &(a, ca) in &stencil {
                for &(b, cb) in &stencil {
                    if a == 0 || b == 0 || a == n - 1 || b == n - 1 {
                        continue;
                    }
                    let mut block = p.view_mut(((a - 1) * d, (b - 1) * d), (d, d));
                    block += &induced[j] * (w * ca * cb);
                }
            }
        }
        p.cholesky()
    }

    fn samples(&self, x: &DVector<f64>) -> Vec<CurveSample> {
        let q = self.nodes(x);
        (0..self.n)
            .map(|j| {
                let (v, qdd) = self.kinematics(&q, j);
                CurveSample {
                    t: j as f64 * self.dt,
                    q: q[j].clone(),
                    v,
                    qdd,
                }
            })
            .collect()
    }
}

const MEMORY: usize = 10;

/// Direct-collocation oracle: preconditioned Barzilai–Borwein descent with a
/// nonmonotone backtracking line search.
///
/// Stops when the gradient infinity-norm drops below `1e-6 (1 + cost)`.
pub fn solve_collocation(problem: &BoundaryProblem) -> Result<SolverReport> {
    problem.validate()?;
    let settings = &problem.settings;
    let system = &problem.system;
    let d = system.dim();
    let n = settings.nodes;
    let t_end = problem.horizon;
    let ends = match (problem.v0.value(), problem.vf.value()) {
        (Some(a), Some(b)) => Some((a.clone(), b.clone())),
        _ => None,
    };
    let grid = Grid {
        system,
        d,
        n,
        dt: t_end / (n - 1) as f64,
        q0: problem.q0.clone(),
        qf: problem.qf.clone(),
        ends: ends.clone(),
    };

    // Hermite cubic (or straight line) between the boundary data
    let mut x = DVector::zeros(d * (n - 2));
    let (v0, vf) = ends.unwrap_or_else(|| {
        let v = (&problem.qf - &problem.q0) / t_end;
        (v.clone(), v)
    });
    for j in 1..n - 1 {
        let s = j as f64 / (n - 1) as f64;
        let h00 = 2.0 * s.powi(3) - 3.0 * s * s + 1.0;
        let h10 = s.powi(3) - 2.0 * s * s + s;
        let h01 = -2.0 * s.powi(3) + 3.0 * s * s;
        let h11 = s.powi(3) - s * s;
        let q = &problem.q0 * h00 + &v0 * (h10 * t_end) + &problem.qf * h01 + &vf * (h11 * t_end);
        x.rows_mut((j - 1) * d, d).copy_from(&q);
    }

    let (mut f, mut g, induced) = grid.evaluate(&x)?;
    let mut chol = grid.preconditioner(&induced).ok_or_else(|| {
        Error::Evaluation("collocation preconditioner is not positive definite".into())
    })?;
    let mut history = vec![f];
    let mut step = 1.0;
    let mut iterations = 0;
    let mut converged = false;
    let mut message = None;
    let tol = |f: f64| 1e-6 * (1.0 + f);
    while iterations < settings.collocation_max_iter {
        if g.amax() < tol(f) {
            converged = true;
            break;
        }
        iterations += 1;
        let dir = -chol.solve(&g);
        let slope = g.dot(&dir);
        if !(slope < 0.0) {
            message = Some("preconditioned direction is not a descent direction".to_string());
            break;
        }
        let reference = history
            .iter()
            .rev()
            .take(MEMORY)
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let mut t = step;
        let mut accepted = None;
        for _ in 0..60 {
            let trial = &x + &dir * t;
            if let Ok(ft) = grid.objective(&trial) {
                if ft.is_finite() && ft <= reference + 1e-4 * t * slope {
                    accepted = Some(trial);
                    break;
                }
            }
            t *= 0.5;
        }
        let Some(trial) = accepted else {
            message = Some("line search failed".to_string());
            break;
        };
        let (f_new, g_new, induced) = grid.evaluate(&trial)?;
        let s = &trial - &x;
        let y = &g_new - &g;
        let sy = s.dot(&y);
        // BB1 step measured in the preconditioner's metric; P s = -t g
        let sps = -t * s.dot(&g);
        step = if sy > 0.0 {
            (sps / sy).clamp(1e-8, 1e8)
        } else {
            1.0
        };
        x = trial;
        f = f_new;
        g = g_new;
        history.push(f);
        if iterations % 100 == 0 {
            if let Some(c) = grid.preconditioner(&induced) {
                chol = c;
            }
        }
    }
    if !converged && message.is_none() {
        message = Some(format!(
            "iteration limit {} reached",
            settings.collocation_max_iter
        ));
    }
    let residual_norm = g.amax();
    let trajectory = HamiltonianTrajectory::from_curve(system, &grid.samples(&x)).ok();
    Ok(SolverReport {
        method: Method::Collocation,
        converged,
        iterations,
        residual_norm,
        tolerance: tol(f),
        cost: f,
        shooting_parameters: vec![],
        trajectory,
        message,
    })
}
