use nalgebra::DVector;

use super::newton::{newton_solve, NewtonResult};
use super::{BoundaryProblem, Method, SolverReport};
use crate::error::{Error, Result};
use crate::hamiltonian::{integrate, integrate_endpoint, ExtendedState};
use crate::systems::SystemDefinition;

/// `(α₀, p₀)` of the chart-space Hermite cubic through the boundary data,
/// with the induced metric frozen at `q₀`.
pub fn hermite_seed(
    system: &SystemDefinition,
    q0: &DVector<f64>,
    v0: &DVector<f64>,
    qf: &DVector<f64>,
    vf: &DVector<f64>,
    horizon: f64,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let t = horizon;
    let geom = system.geometry(q0.as_slice())?;
    let accel = ((qf - q0) * 6.0 - (v0 * 4.0 + vf * 2.0) * t) / (t * t);
    let jerk = ((q0 - qf) * 12.0 + (v0 + vf) * (6.0 * t)) / (t * t * t);
    let a = accel + geom.gamma_contract(v0, v0);
    let alpha = &geom.induced * a * 2.0;
    let p =
        crate::geometry::gamma_covector(&geom.christoffel, v0, &alpha) - &geom.induced * jerk * 2.0;
    Ok((alpha, p))
}

fn split(x: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
    let d = x.len() / 2;
    (x.rows(0, d).into_owned(), x.rows(d, d).into_owned())
}

fn stack(a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(a.len() + b.len(), a.iter().chain(b.iter()).copied())
}

/// Boundary residual accepted at intermediate continuation stages.
const STAGE_TOLERANCE: f64 = 1e-6;
const STAGE_MAX_ITER: usize = 15;
/// Newton budget from the Hermite seed before falling back to continuation.
const DIRECT_MAX_ITER: usize = 20;
/// Intermediate stages integrate with this fraction of the requested steps.
const STAGE_STEP_DIVISOR: usize = 4;

struct Shot<'a> {
    system: &'a SystemDefinition,
    q0: &'a DVector<f64>,
    v0: &'a DVector<f64>,
    qf: &'a DVector<f64>,
    vf: &'a DVector<f64>,
    horizon: f64,
    steps: usize,
}

impl<'a> Shot<'a> {
    fn on<'b>(&self, system: &'b SystemDefinition) -> Shot<'b>
    where
        'a: 'b,
    {
        Shot { system, ..*self }
    }

    fn initial(&self, x: &DVector<f64>) -> ExtendedState {
        let (alpha, p) = split(x);
        ExtendedState {
            q: self.q0.clone(),
            v: self.v0.clone(),
            alpha,
            p,
        }
    }

    fn residual(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let end = integrate_endpoint(self.system, &self.initial(x), self.horizon, self.steps)?;
        Ok(stack(&(end.q - self.qf), &(end.v - self.vf)))
    }

    fn newton(&self, x0: &DVector<f64>, problem: &BoundaryProblem) -> Result<NewtonResult> {
        self.newton_to(
            x0,
            problem,
            problem.settings.tolerance,
            problem.settings.max_iter,
        )
    }

    fn newton_to(
        &self,
        x0: &DVector<f64>,
        problem: &BoundaryProblem,
        tolerance: f64,
        max_iter: usize,
    ) -> Result<NewtonResult> {
        let s = &problem.settings;
        newton_solve(
            |x| self.residual(x),
            x0,
            s.fd_step,
            tolerance,
            max_iter.min(s.max_iter),
        )
    }
}

/// Indirect shooting for a biased spline.
///
/// Newton on `(α₀, p₀)` from the Hermite seed (or `settings.seed`). When that
/// stagnates, the fallbacks are tried in order: continuation along the Hermite
/// curve over growing horizons, a seed recovered from the collocation
/// solution, and continuation from the dual cometric along
/// `Ñ_s = (1 − s) M⁻¹ + s Ñ`. The report message names the fallback that
/// succeeded.
pub fn solve_spline_shooting(problem: &BoundaryProblem) -> Result<SolverReport> {
    problem.validate()?;
    let (Some(v0), Some(vf)) = (problem.v0.value(), problem.vf.value()) else {
        return Err(Error::InvalidProblem(
            "spline shooting needs fixed end velocities; use the geodesic solver".into(),
        ));
    };
    let settings = &problem.settings;
    let target = Shot {
        system: &problem.system,
        q0: &problem.q0,
        v0,
        qf: &problem.qf,
        vf,
        horizon: problem.horizon,
        steps: settings.steps,
    };
    let x0 = match &settings.seed {
        Some((a, p)) => stack(a, p),
        None => {
            let (a, p) = hermite_seed(
                &problem.system,
                &problem.q0,
                v0,
                &problem.qf,
                vf,
                problem.horizon,
            )?;
            stack(&a, &p)
        }
    };

    let mut iterations = 0;
    let mut best: Option<NewtonResult> = None;
    let mut failures: Vec<String> = vec![];
    match target.newton_to(&x0, problem, settings.tolerance, DIRECT_MAX_ITER) {
        Ok(r) if r.converged => {
            return finish(problem, &target, r.x, r.norm, r.iterations, true, None);
        }
        Ok(r) => {
            iterations += r.iterations;
            failures.push(format!("direct Newton stagnated at residual {:e}", r.norm));
            best = Some(r);
        }
        Err(e) => failures.push(format!("seed {:?} failed: {e}", x0.as_slice())),
    }

    type Fallback = fn(&BoundaryProblem, &Shot<'_>) -> Attempt;
    let fallbacks: [(&str, Fallback); 3] = [
        ("horizon continuation", hermite_continuation),
        ("collocation seed", collocation_seed),
        ("cometric homotopy", cometric_homotopy),
    ];
    for (name, fallback) in fallbacks {
        let attempt = fallback(problem, &target);
        iterations += attempt.iterations;
        match attempt.outcome {
            Ok(x) => {
                let norm = target.residual(&x)?.norm();
                if norm < settings.tolerance {
                    let note = format!("converged via {name}");
                    return finish(problem, &target, x, norm, iterations, true, Some(note));
                }
                failures.push(format!("{name} ended at residual {norm:e}"));
            }
            Err(msg) => failures.push(format!("{name}: {msg}")),
        }
    }

    let msg = failures.join("; ");
    match best {
        Some(b) => finish(problem, &target, b.x, b.norm, iterations, false, Some(msg)),
        None => Ok(diverged(problem, &x0, iterations, msg)),
    }
}

struct Attempt {
    outcome: std::result::Result<DVector<f64>, String>,
    iterations: usize,
}

/// Marches `s` from 0 to 1 with adaptive step: `solve(s, seed)` must solve
/// the stage problem at `s`, `seed` being the previous stage's solution.
fn march<F>(first_ds: f64, min_ds: f64, start: Option<DVector<f64>>, mut solve: F) -> Attempt
where
    F: FnMut(f64, Option<&DVector<f64>>) -> Result<NewtonResult>,
{
    let mut iterations = 0;
    let mut s: f64 = 0.0;
    let mut ds = first_ds;
    let mut x = start;
    while s < 1.0 {
        let next = (s + ds).min(1.0);
        match solve(next, x.as_ref()) {
            Ok(r) if r.converged => {
                iterations += r.iterations;
                x = Some(r.x);
                s = next;
                ds *= 1.5;
            }
            other => {
                if let Ok(r) = &other {
                    iterations += r.iterations;
                }
                ds *= 0.5;
                if ds < min_ds {
                    return Attempt {
                        outcome: Err(format!("stalled at s = {s}")),
                        iterations,
                    };
                }
            }
        }
    }
    Attempt {
        outcome: x.ok_or_else(|| "made no progress".to_string()),
        iterations,
    }
}

fn stage_settings(problem: &BoundaryProblem, target: &Shot<'_>, s: f64) -> (f64, usize) {
    if s < 1.0 {
        (
            problem.settings.tolerance.max(STAGE_TOLERANCE),
            (target.steps / STAGE_STEP_DIVISOR).max(50),
        )
    } else {
        (problem.settings.tolerance, target.steps)
    }
}

/// Chart Hermite cubic through the boundary data, evaluated at `t`.
fn hermite_state(shot: &Shot<'_>, t: f64) -> (DVector<f64>, DVector<f64>) {
    let u = t / shot.horizon;
    let h = shot.horizon;
    let (q0, v0, qf, vf) = (shot.q0, shot.v0, shot.qf, shot.vf);
    let q = q0 * (2.0 * u.powi(3) - 3.0 * u * u + 1.0)
        + v0 * (h * (u.powi(3) - 2.0 * u * u + u))
        + qf * (-2.0 * u.powi(3) + 3.0 * u * u)
        + vf * (h * (u.powi(3) - u * u));
    let v = q0 * ((6.0 * u * u - 6.0 * u) / h)
        + v0 * (3.0 * u * u - 4.0 * u + 1.0)
        + qf * ((-6.0 * u * u + 6.0 * u) / h)
        + vf * (3.0 * u * u - 2.0 * u);
    (q, v)
}

/// Solves the sub-problems on `[0, sT]` ending at the Hermite state at `sT`
/// for growing `s`; short horizons are close to their Hermite seeds.
fn hermite_continuation(problem: &BoundaryProblem, target: &Shot<'_>) -> Attempt {
    march(0.125, 1e-3, None, |s, seed| {
        let (qf, vf) = if s < 1.0 {
            hermite_state(target, s * target.horizon)
        } else {
            (target.qf.clone(), target.vf.clone())
        };
        let (tolerance, steps) = stage_settings(problem, target, s);
        let stage = Shot {
            qf: &qf,
            vf: &vf,
            horizon: s * target.horizon,
            steps,
            ..*target
        };
        let x0 = match seed {
            Some(x) => x.clone(),
            None => {
                let (a, p) =
                    hermite_seed(stage.system, stage.q0, stage.v0, &qf, &vf, stage.horizon)?;
                stack(&a, &p)
            }
        };
        stage.newton_to(&x0, problem, tolerance, STAGE_MAX_ITER)
    })
}

/// Newton from the initial costates of the collocation minimizer.
fn collocation_seed(problem: &BoundaryProblem, target: &Shot<'_>) -> Attempt {
    let seeded = super::solve_collocation(problem).and_then(|report| {
        let init = report
            .initial_state()
            .ok_or_else(|| Error::Evaluation("collocation produced no trajectory".into()))?;
        target.newton(&stack(&init.alpha, &init.p), problem)
    });
    match seeded {
        Ok(r) if r.converged => Attempt {
            iterations: r.iterations,
            outcome: Ok(r.x),
        },
        Ok(r) => Attempt {
            iterations: r.iterations,
            outcome: Err(format!("stagnated at residual {:e}", r.norm)),
        },
        Err(e) => Attempt {
            iterations: 0,
            outcome: Err(e.to_string()),
        },
    }
}

/// Continuation in the cometric, starting from the dual cometric whose
/// solutions are Riemannian splines.
fn cometric_homotopy(problem: &BoundaryProblem, target: &Shot<'_>) -> Attempt {
    let stages = problem.settings.homotopy_steps.max(1);
    let dual = problem.system.blended_cometric(0.0);
    let start = hermite_seed(
        &dual,
        target.q0,
        target.v0,
        target.qf,
        target.vf,
        target.horizon,
    )
    .and_then(|(a, p)| target.on(&dual).newton(&stack(&a, &p), problem));
    let x = match start {
        Ok(r) if r.converged => r.x,
        Ok(r) => {
            return Attempt {
                iterations: r.iterations,
                outcome: Err(format!(
                    "dual-cometric start stagnated at residual {:e}",
                    r.norm
                )),
            }
        }
        Err(e) => {
            return Attempt {
                iterations: 0,
                outcome: Err(format!("dual-cometric start failed: {e}")),
            }
        }
    };
    let step = 1.0 / stages as f64;
    march(step, step / 64.0, Some(x), |s, seed| {
        let system = problem.system.blended_cometric(s);
        let (tolerance, steps) = stage_settings(problem, target, s);
        let stage = Shot {
            steps,
            ..target.on(&system)
        };
        let seed = seed.expect("homotopy starts from a solution");
        stage.newton_to(seed, problem, tolerance, STAGE_MAX_ITER)
    })
}

fn diverged(
    problem: &BoundaryProblem,
    x: &DVector<f64>,
    iterations: usize,
    msg: String,
) -> SolverReport {
    SolverReport {
        method: Method::Shooting,
        converged: false,
        iterations,
        residual_norm: f64::INFINITY,
        tolerance: problem.settings.tolerance,
        cost: f64::NAN,
        shooting_parameters: x.as_slice().to_vec(),
        trajectory: None,
        message: Some(msg),
    }
}

fn finish(
    problem: &BoundaryProblem,
    shot: &Shot<'_>,
    x: DVector<f64>,
    norm: f64,
    iterations: usize,
    converged: bool,
    message: Option<String>,
) -> Result<SolverReport> {
    match integrate(
        shot.system,
        &shot.initial(&x),
        problem.horizon,
        problem.settings.steps,
    ) {
        Ok(traj) => Ok(SolverReport {
            method: Method::Shooting,
            converged,
            iterations,
            residual_norm: norm,
            tolerance: problem.settings.tolerance,
            cost: traj.cost(),
            shooting_parameters: x.as_slice().to_vec(),
            trajectory: Some(traj),
            message,
        }),
        Err(e) => Ok(diverged(problem, &x, iterations, e.to_string())),
    }
}

/// Initial directions for geodesic multi-start: the straight-line velocity
/// rotated by `2πk / count` in the plane of the first two coordinates.
fn geodesic_seeds(base: &DVector<f64>, count: usize) -> Vec<DVector<f64>> {
    if base.len() < 2 {
        return vec![base.clone()];
    }
    (0..count.max(1))
        .map(|k| {
            let (s, c) = (std::f64::consts::TAU * k as f64 / count as f64).sin_cos();
            let mut v = base.clone();
            v[0] = c * base[0] - s * base[1];
            v[1] = s * base[0] + c * base[1];
            v
        })
        .collect()
}

/// Geodesic between the endpoints by shooting on `v₀` with zero costates.
///
/// Every seed is run; among converged ones the shortest path wins, ties
/// going to the lowest seed index.
pub fn solve_geodesic(problem: &BoundaryProblem) -> Result<SolverReport> {
    problem.validate()?;
    if !problem.is_geodesic() {
        return Err(Error::InvalidProblem(
            "geodesic solver needs free end velocities".into(),
        ));
    }
    let settings = &problem.settings;
    let system = &problem.system;
    let d = system.dim();
    let zero = DVector::zeros(d);
    let residual = |v: &DVector<f64>| -> Result<DVector<f64>> {
        let init = ExtendedState {
            q: problem.q0.clone(),
            v: v.clone(),
            alpha: zero.clone(),
            p: zero.clone(),
        };
        Ok(integrate_endpoint(system, &init, problem.horizon, settings.steps)?.q - &problem.qf)
    };
    let base = (&problem.qf - &problem.q0) / problem.horizon;
    let metric0 = system.metric.value(problem.q0.as_slice())?;

    let mut iterations = 0;
    // (length, seed index, velocity, residual norm)
    let mut best: Option<(f64, usize, DVector<f64>, f64)> = None;
    let mut closest: Option<(f64, DVector<f64>)> = None;
    for (k, seed) in geodesic_seeds(&base, settings.geodesic_seeds)
        .iter()
        .enumerate()
    {
        let Ok(r) = newton_solve(
            residual,
            seed,
            settings.fd_step,
            settings.tolerance,
            settings.max_iter,
        ) else {
            continue;
        };
        iterations += r.iterations;
        if !r.converged {
            if closest.as_ref().map_or(true, |(n, _)| r.norm < *n) {
                closest = Some((r.norm, r.x));
            }
            continue;
        }
        let length = problem.horizon * r.x.dot(&(&metric0 * &r.x)).max(0.0).sqrt();
        let better = match &best {
            None => true,
            Some((l, _, _, _)) => length < *l - 1e-9 * (1.0 + l),
        };
        if better {
            best = Some((length, k, r.x, r.norm));
        }
    }

    let (v, norm, converged, message) = match (best, closest) {
        (Some((_, k, v, n)), _) => (v, n, true, (k > 0).then(|| format!("selected seed {k}"))),
        (None, Some((n, v))) => (v, n, false, Some("no geodesic seed converged".to_string())),
        (None, None) => {
            return Ok(SolverReport {
                method: Method::Geodesic,
                converged: false,
                iterations,
                residual_norm: f64::INFINITY,
                tolerance: settings.tolerance,
                cost: f64::NAN,
                shooting_parameters: base.as_slice().to_vec(),
                trajectory: None,
                message: Some("every geodesic seed diverged".into()),
            })
        }
    };
    let init = ExtendedState {
        q: problem.q0.clone(),
        v: v.clone(),
        alpha: zero.clone(),
        p: zero,
    };
    let traj = integrate(system, &init, problem.horizon, settings.steps)?;
    Ok(SolverReport {
        method: Method::Geodesic,
        converged,
        iterations,
        residual_norm: norm,
        tolerance: settings.tolerance,
        cost: traj.cost(),
        shooting_parameters: v.as_slice().to_vec(),
        trajectory: Some(traj),
        message,
    })
}
