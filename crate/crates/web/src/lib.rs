//! WebAssembly bindings for the demo page in `www/`.
//!
//! Curves come back as flat `[t, q1, q2, t, q1, q2, ...]` arrays and
//! indicatrix grids as flat `[q1, q2, x1, x2, ...]` arrays, `count` boundary
//! points per grid point.

use std::collections::BTreeMap;

use biased_spline::geometry::indicatrix_samples;
use biased_spline::solvers::{solve_geodesic, solve_spline_shooting, BoundaryProblem, SolverReport, SolverSettings};
use biased_spline::systems::{builtin, SystemDefinition};
use wasm_bindgen::prelude::*;

/// A solved trajectory.
#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct Curve {
    points: Vec<f64>,
    cost: f64,
    converged: bool,
    message: String,
}

#[wasm_bindgen]
impl Curve {
    /// `[t, q1, q2, ...]` for every node.
    #[wasm_bindgen(getter)]
    pub fn points(&self) -> Vec<f64> {
        self.points.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn cost(&self) -> f64 {
        self.cost
    }

    #[wasm_bindgen(getter)]
    pub fn converged(&self) -> bool {
        self.converged
    }

    #[wasm_bindgen(getter)]
    pub fn message(&self) -> String {
        self.message.clone()
    }
}

impl Curve {
    fn from_report(r: &SolverReport) -> Self {
        let points = r
            .trajectory
            .as_ref()
            .map(|traj| {
                traj.times
                    .iter()
                    .zip(&traj.states)
                    .flat_map(|(t, s)| std::iter::once(*t).chain(s.q.iter().copied()))
                    .collect()
            })
            .unwrap_or_default();
        Self {
            points,
            cost: r.cost,
            converged: r.converged,
            message: r.message.clone().unwrap_or_default(),
        }
    }

    fn failed(message: String) -> Self {
        Self {
            points: vec![],
            cost: f64::NAN,
            converged: false,
            message,
        }
    }
}

fn system(name: &str) -> Result<SystemDefinition, String> {
    builtin(name, &BTreeMap::new()).map_err(|e| e.to_string())
}

/// Coarser than the library default; the page re-solves on every drag.
fn demo_settings() -> SolverSettings {
    SolverSettings {
        steps: 300,
        tolerance: 1e-8,
        ..SolverSettings::default()
    }
}

fn spline(name: &str, q0: &[f64], v0: &[f64], qf: &[f64], vf: &[f64]) -> Curve {
    let run = || -> Result<Curve, String> {
        let p = BoundaryProblem::new(system(name)?, q0, v0, qf, vf).with_settings(demo_settings());
        let r = solve_spline_shooting(&p).map_err(|e| e.to_string())?;
        Ok(Curve::from_report(&r))
    };
    run().unwrap_or_else(Curve::failed)
}

/// Minimum-torque spline on `sphere_torque` (identity cometric) between two
/// `(λ, φ)` states, over a unit horizon.
#[wasm_bindgen]
pub fn torque_spline(q0: &[f64], v0: &[f64], qf: &[f64], vf: &[f64]) -> Curve {
    spline("sphere_torque", q0, v0, qf, vf)
}

/// Riemannian cubic for the same boundary data (`sphere_dual`).
#[wasm_bindgen]
pub fn riemannian_spline(q0: &[f64], v0: &[f64], qf: &[f64], vf: &[f64]) -> Curve {
    spline("sphere_dual", q0, v0, qf, vf)
}

/// Geodesic of a built-in system between two points.
#[wasm_bindgen]
pub fn geodesic(system_name: &str, q0: &[f64], qf: &[f64]) -> Curve {
    let run = || -> Result<Curve, String> {
        let p = BoundaryProblem::free(system(system_name)?, q0, qf).with_settings(demo_settings());
        let r = solve_geodesic(&p).map_err(|e| e.to_string())?;
        Ok(Curve::from_report(&r))
    };
    run().unwrap_or_else(Curve::failed)
}

/// Unit-ball boundaries of the metric, cometric or induced metric on an
/// `nx × ny` grid over the system's sample box. Grid points outside the
/// chart are skipped.
#[wasm_bindgen]
pub fn indicatrix_grid(
    system_name: &str,
    which: &str,
    nx: usize,
    ny: usize,
    count: usize,
) -> Result<Vec<f64>, String> {
    let sys = system(system_name)?;
    let bx = &sys.chart.sample_box;
    let at = |(lo, hi): (f64, f64), i: usize, n: usize| lo + (hi - lo) * (i as f64 + 0.5) / n as f64;
    let mut out = vec![];
    for i in 0..nx {
        for j in 0..ny {
            let q = [at(bx[0], i, nx), at(bx[1], j, ny)];
            let Ok(g) = sys.geometry(&q) else { continue };
            let form = match which {
                "metric" => &g.metric,
                "cometric" => &g.cometric,
                "induced" => &g.induced,
                other => return Err(format!("unknown form `{other}`")),
            };
            for x in indicatrix_samples(form, count).map_err(|e| e.to_string())? {
                out.extend([q[0], q[1], x[0], x[1]]);
            }
        }
    }
    Ok(out)
}

/// `[lo1, hi1, lo2, hi2]` of a system's sample box.
#[wasm_bindgen]
pub fn sample_box(system_name: &str) -> Result<Vec<f64>, String> {
    let sys = system(system_name)?;
    Ok(sys.chart.sample_box.iter().flat_map(|(a, b)| [*a, *b]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn torque_spline_is_flatter_than_riemannian() {
        let args = ([-0.8, 0.3], [1.2, 0.6], [0.8, 0.3], [1.2, -0.6]);
        let a = torque_spline(&args.0, &args.1, &args.2, &args.3);
        let b = riemannian_spline(&args.0, &args.1, &args.2, &args.3);
        assert!(a.converged && b.converged);
        let max_phi = |c: &Curve| c.points.chunks(3).map(|p| p[2]).fold(f64::MIN, f64::max);
        assert!(max_phi(&a) < max_phi(&b));
        assert_eq!(a.points.len() % 3, 0);
        assert_eq!(&a.points[..3], &[0.0, -0.8, 0.3]);
    }

    #[test]
    fn geodesic_on_equator() {
        let c = geodesic("sphere_torque", &[0.0, 0.0], &[1.0, 0.0]);
        assert!(c.converged);
        assert!(c.points.chunks(3).all(|p| p[2].abs() < 1e-8));
        assert!(!geodesic("nowhere", &[0.0, 0.0], &[1.0, 0.0]).converged);
    }

    #[test]
    fn indicatrix_grid_layout() {
        let v = indicatrix_grid("flat_quadratic", "metric", 3, 2, 8).unwrap();
        assert_eq!(v.len(), 3 * 2 * 8 * 4);
        for p in v.chunks(4) {
            assert!((p[2].hypot(p[3]) - 1.0).abs() < 1e-12);
        }
        assert!(indicatrix_grid("flat_quadratic", "volume", 1, 1, 4).is_err());
        assert_eq!(sample_box("sphere_torque").unwrap().len(), 4);
    }
}
