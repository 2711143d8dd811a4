//! Kinematic and force quantities along sampled curves, and residuals of the
//! spline equations.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::fd;
use crate::geometry::{gamma_contract, gamma_covector, LocalGeometry};
use crate::systems::SystemDefinition;
use crate::tensor::{Tensor3, Tensor4};

/// Position, velocity and coordinate acceleration at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveSample {
    pub t: f64,
    pub q: DVector<f64>,
    pub v: DVector<f64>,
    pub qdd: DVector<f64>,
}

impl CurveSample {
    pub fn new(t: f64, q: &[f64], v: &[f64], qdd: &[f64]) -> Self {
        Self {
            t,
            q: DVector::from_column_slice(q),
            v: DVector::from_column_slice(v),
            qdd: DVector::from_column_slice(qdd),
        }
    }
}

/// Covariant acceleration `a`, force `F = M a`, effort `E = N a` and cost
/// density `Fᵀ Ñ F`.
#[derive(Debug, Clone, PartialEq)]
pub struct ForceData {
    pub a: DVector<f64>,
    pub force: DVector<f64>,
    pub effort: DVector<f64>,
    pub cost_density: f64,
}

impl ForceData {
    pub fn from_geometry(geom: &LocalGeometry, sample: &CurveSample) -> Self {
        let a = &sample.qdd + geom.gamma_contract(&sample.v, &sample.v);
        let force = &geom.metric * &a;
        let effort = &geom.induced * &a;
        let cost_density = force.dot(&(&geom.cometric * &force));
        Self {
            a,
            force,
            effort,
            cost_density,
        }
    }

    /// `aᵀ N a`, equal to `cost_density` up to roundoff.
    pub fn effort_cost_density(&self) -> f64 {
        self.a.dot(&self.effort)
    }
}

/// Uniformly sampled curve built from closed-form position, velocity and
/// acceleration, `n + 1` samples on `[t0, t1]`.
pub fn sample_curve<Q, V, A>(t0: f64, t1: f64, n: usize, q: Q, v: V, qdd: A) -> Vec<CurveSample>
where
    Q: Fn(f64) -> Vec<f64>,
    V: Fn(f64) -> Vec<f64>,
    A: Fn(f64) -> Vec<f64>,
{
    (0..=n)
        .map(|i| {
            let t = t0 + (t1 - t0) * i as f64 / n as f64;
            CurveSample::new(t, &q(t), &v(t), &qdd(t))
        })
        .collect()
}

/// Samples from positions alone; velocities and accelerations by
/// fourth-order finite differences.
pub fn curve_from_positions(times: &[f64], positions: &[DVector<f64>]) -> Result<Vec<CurveSample>> {
    if times.len() != positions.len() {
        return Err(Error::Dimension(format!(
            "{} times for {} positions",
            times.len(),
            positions.len()
        )));
    }
    let h = fd::uniform_step(times)?;
    let v = fd::derivative_vec(positions, h, 1)?;
    let a = fd::derivative_vec(positions, h, 2)?;
    Ok(times
        .iter()
        .zip(positions)
        .zip(v.into_iter().zip(a))
        .map(|((t, q), (v, qdd))| CurveSample {
            t: *t,
            q: q.clone(),
            v,
            qdd,
        })
        .collect())
}

fn check_sample(system: &SystemDefinition, s: &CurveSample) -> Result<()> {
    let d = system.dim();
    if s.q.len() != d || s.v.len() != d || s.qdd.len() != d {
        return Err(Error::Dimension(format!(
            "curve sample does not match the {d}-dimensional chart"
        )));
    }
    Ok(())
}

/// `a^k = q̈^k + Γ^k_ij v^i v^j`.
pub fn covariant_acceleration(
    system: &SystemDefinition,
    sample: &CurveSample,
) -> Result<DVector<f64>> {
    check_sample(system, sample)?;
    let gamma = crate::geometry::christoffel(&system.metric, sample.q.as_slice())?;
    Ok(&sample.qdd + gamma_contract(&gamma, &sample.v, &sample.v))
}

pub fn force_and_effort(system: &SystemDefinition, sample: &CurveSample) -> Result<ForceData> {
    check_sample(system, sample)?;
    let geom = system.geometry(sample.q.as_slice())?;
    Ok(ForceData::from_geometry(&geom, sample))
}

/// Composite trapezoid over samples.
pub fn trapezoid(times: &[f64], values: &[f64]) -> f64 {
    times
        .windows(2)
        .zip(values.windows(2))
        .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0] + v[1]))
        .sum()
}

/// `∫ g̃(F, F) dt` by the trapezoid rule on the sample times.
pub fn trajectory_cost(system: &SystemDefinition, samples: &[CurveSample]) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: samples.len(),
        });
    }
    let mut times = Vec::with_capacity(samples.len());
    let mut density = Vec::with_capacity(samples.len());
    for s in samples {
        times.push(s.t);
        density.push(force_and_effort(system, s)?.cost_density);
    }
    Ok(trapezoid(&times, &density))
}

/// `(R(x, y) z)^l = R^l_ijk x^i y^j z^k`.
pub fn curvature_apply(
    r: &Tensor4,
    x: &DVector<f64>,
    y: &DVector<f64>,
    z: &DVector<f64>,
) -> DVector<f64> {
    let d = r.dim();
    DVector::from_fn(d, |l, _| {
        let mut s = 0.0;
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    s += r[[l, i, j, k]] * x[i] * y[j] * z[k];
                }
            }
        }
        s
    })
}

/// `(R(•, v) v)` paired with a covector: `R^l_ijk v^j v^k w_l`.
fn curvature_covector(r: &Tensor4, v: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
    let d = r.dim();
    DVector::from_fn(d, |i, _| {
        let mut s = 0.0;
        for l in 0..d {
            for j in 0..d {
                for k in 0..d {
                    s += r[[l, i, j, k]] * v[j] * v[k] * w[l];
                }
            }
        }
        s
    })
}

/// `τ_i^jk w_j w_k`.
fn compatibility_contract(tau: &Tensor3, w: &DVector<f64>) -> DVector<f64> {
    let d = tau.dim();
    DVector::from_fn(d, |i, _| {
        let mut s = 0.0;
        for j in 0..d {
            for k in 0..d {
                s += tau[[i, j, k]] * w[j] * w[k];
            }
        }
        s
    })
}

struct Along {
    h: f64,
    geoms: Vec<LocalGeometry>,
    accel: Vec<DVector<f64>>,
}

fn along(system: &SystemDefinition, samples: &[CurveSample]) -> Result<Along> {
    if samples.len() < 6 {
        return Err(Error::TooFewSamples {
            needed: 6,
            got: samples.len(),
        });
    }
    let times: Vec<f64> = samples.iter().map(|s| s.t).collect();
    let h = fd::uniform_step(&times)?;
    let mut geoms = Vec::with_capacity(samples.len());
    let mut accel = Vec::with_capacity(samples.len());
    for s in samples {
        check_sample(system, s)?;
        let g = system.geometry(s.q.as_slice())?;
        accel.push(&s.qdd + g.gamma_contract(&s.v, &s.v));
        geoms.push(g);
    }
    Ok(Along { h, geoms, accel })
}

/// Per-sample `s + R(a, v) v`, where the covariant jerk and snap come from
/// finite differences along the samples. Vanishes on Riemannian cubics.
pub fn riemannian_spline_residual(
    system: &SystemDefinition,
    samples: &[CurveSample],
) -> Result<Vec<DVector<f64>>> {
    let Along { h, geoms, accel } = along(system, samples)?;
    let adot = fd::derivative_vec(&accel, h, 1)?;
    let jerk: Vec<DVector<f64>> = (0..samples.len())
        .map(|n| &adot[n] + geoms[n].gamma_contract(&samples[n].v, &accel[n]))
        .collect();
    let jdot = fd::derivative_vec(&jerk, h, 1)?;
    Ok((0..samples.len())
        .map(|n| {
            let v = &samples[n].v;
            let snap = &jdot[n] + geoms[n].gamma_contract(v, &jerk[n]);
            snap + curvature_apply(&geoms[n].curvature, &accel[n], v, v)
        })
        .collect())
}

/// Per-sample residual covector of the fourth-order biased spline equation,
/// built from the effort `E = N a`: its second dual-covariant derivative,
/// minus `½ τ(E, E)`, plus `R(•, v) v` paired with `E`.
pub fn biased_ode_residual(
    system: &SystemDefinition,
    samples: &[CurveSample],
) -> Result<Vec<DVector<f64>>> {
    let Along { h, geoms, accel } = along(system, samples)?;
    let effort: Vec<DVector<f64>> = geoms
        .iter()
        .zip(&accel)
        .map(|(g, a)| &g.induced * a)
        .collect();
    let edot = fd::derivative_vec(&effort, h, 1)?;
    let yank: Vec<DVector<f64>> = (0..samples.len())
        .map(|n| &edot[n] - gamma_covector(&geoms[n].christoffel, &samples[n].v, &effort[n]))
        .collect();
    let ydot = fd::derivative_vec(&yank, h, 1)?;
    Ok((0..samples.len())
        .map(|n| {
            let g = &geoms[n];
            let v = &samples[n].v;
            let tug = &ydot[n] - gamma_covector(&g.christoffel, v, &yank[n]);
            tug - compatibility_contract(&g.compatibility, &effort[n]) * 0.5
                + curvature_covector(&g.curvature, v, &effort[n])
        })
        .collect())
}

/// Root mean square of the Euclidean norms of a residual series.
pub fn rms(residuals: &[DVector<f64>]) -> f64 {
    if residuals.is_empty() {
        return 0.0;
    }
    (residuals.iter().map(|r| r.norm_squared()).sum::<f64>() / residuals.len() as f64).sqrt()
}

pub(crate) fn compatibility_term(tau: &Tensor3, w: &DVector<f64>) -> DVector<f64> {
    compatibility_contract(tau, w)
}

pub(crate) fn curvature_term(r: &Tensor4, v: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
    curvature_covector(r, v, w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::{builtin, system_from_expressions};
    use approx::assert_relative_eq;
    use std::collections::BTreeMap;
    use std::f64::consts::FRAC_PI_4;

    fn line() -> SystemDefinition {
        let one = vec![vec!["1".to_string()]];
        system_from_expressions("line", &["q".into()], &one, &one, &BTreeMap::new(), None).unwrap()
    }

    fn sys(name: &str) -> SystemDefinition {
        builtin(name, &BTreeMap::new()).unwrap()
    }

    #[test]
    fn flat_acceleration_is_coordinate_acceleration() {
        let s = CurveSample::new(0.0, &[0.3, -2.0], &[1.0, 4.0], &[0.5, -0.25]);
        let a = covariant_acceleration(&sys("flat_quadratic"), &s).unwrap();
        assert_eq!(a.as_slice(), &[0.5, -0.25]);
    }

    #[test]
    fn sphere_latitude_line() {
        let w = 1.7;
        let s = CurveSample::new(0.0, &[0.0, FRAC_PI_4], &[w, 0.0], &[0.0, 0.0]);
        let a = covariant_acceleration(&sys("sphere_dual"), &s).unwrap();
        assert!(a[0].abs() < 1e-15);
        assert_relative_eq!(a[1], w * w / 2.0, epsilon = 1e-14);
        let equator = CurveSample::new(0.0, &[0.4, 0.0], &[w, 0.0], &[0.0, 0.0]);
        assert!(
            covariant_acceleration(&sys("sphere_dual"), &equator)
                .unwrap()
                .amax()
                < 1e-15
        );
    }

    #[test]
    fn sphere_force_lowers_with_metric() {
        let phi: f64 = 0.6;
        let s = CurveSample::new(0.0, &[0.0, phi], &[0.0, 0.0], &[0.8, -1.1]);
        let f = force_and_effort(&sys("sphere_torque"), &s).unwrap();
        assert_relative_eq!(f.force[0], phi.cos().powi(2) * 0.8, epsilon = 1e-15);
        assert_relative_eq!(f.force[1], -1.1, epsilon = 1e-15);
        assert_relative_eq!(f.cost_density, f.effort_cost_density(), epsilon = 1e-12);
        let still = CurveSample::new(0.0, &[0.0, phi], &[0.0, 0.0], &[0.0, 0.0]);
        let f = force_and_effort(&sys("sphere_torque"), &still).unwrap();
        assert_eq!(
            (f.force.amax(), f.effort.amax(), f.cost_density),
            (0.0, 0.0, 0.0)
        );
    }

    #[test]
    fn effort_equals_force_for_dual_cometric() {
        let s = CurveSample::new(0.0, &[0.2, -0.5], &[1.0, 0.3], &[0.4, 0.9]);
        let f = force_and_effort(&sys("sphere_dual"), &s).unwrap();
        assert!((&f.effort - &f.force).amax() < 1e-12);
    }

    #[test]
    fn hermite_cubic_cost() {
        let samples = sample_curve(
            0.0,
            1.0,
            2000,
            |t| vec![3.0 * t * t - 2.0 * t.powi(3)],
            |t| vec![6.0 * t - 6.0 * t * t],
            |t| vec![6.0 - 12.0 * t],
        );
        let c = trajectory_cost(&line(), &samples).unwrap();
        // trapezoid error for a quadratic integrand is (b-a) h² f''/12
        assert_relative_eq!(c, 12.0, epsilon = 1e-5);
    }

    #[test]
    fn latitude_line_cost() {
        let w = 1.3;
        let samples = sample_curve(
            0.0,
            1.0,
            10,
            |t| vec![w * t, FRAC_PI_4],
            |_| vec![w, 0.0],
            |_| vec![0.0, 0.0],
        );
        assert_relative_eq!(
            trajectory_cost(&sys("sphere_dual"), &samples).unwrap(),
            w.powi(4) / 4.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn cubic_has_zero_spline_residual() {
        let samples = sample_curve(
            0.0,
            1.0,
            1000,
            |t| vec![1.0 + t - 2.0 * t * t + 0.5 * t.powi(3)],
            |t| vec![1.0 - 4.0 * t + 1.5 * t * t],
            |t| vec![-4.0 + 3.0 * t],
        );
        let r = riemannian_spline_residual(&line(), &samples).unwrap();
        assert!(r.iter().all(|x| x.amax() < 1e-6));
        let b = biased_ode_residual(&line(), &samples).unwrap();
        assert!(b.iter().all(|x| x.amax() < 1e-6));
    }

    #[test]
    fn quintic_residual_is_fourth_derivative() {
        let samples = sample_curve(
            0.0,
            1.0,
            1000,
            |t| vec![t.powi(5)],
            |t| vec![5.0 * t.powi(4)],
            |t| vec![20.0 * t.powi(3)],
        );
        let r = riemannian_spline_residual(&line(), &samples).unwrap();
        for (s, x) in samples.iter().zip(&r) {
            assert_relative_eq!(x[0], 120.0 * s.t, epsilon = 1e-6);
        }
    }

    #[test]
    fn geodesic_residuals_vanish() {
        let w = 0.9;
        let samples = sample_curve(
            0.0,
            1.0,
            50,
            |t| vec![w * t, 0.0],
            |_| vec![w, 0.0],
            |_| vec![0.0, 0.0],
        );
        let s = sys("sphere_torque");
        assert!(rms(&biased_ode_residual(&s, &samples).unwrap()) < 1e-12);
        assert!(rms(&riemannian_spline_residual(&s, &samples).unwrap()) < 1e-12);
        assert_eq!(trajectory_cost(&s, &samples).unwrap(), 0.0);
    }

    #[test]
    fn positions_only_curve() {
        let times: Vec<f64> = (0..=100).map(|i| i as f64 / 100.0).collect();
        let qs: Vec<DVector<f64>> = times
            .iter()
            .map(|t| DVector::from_column_slice(&[t * t * t]))
            .collect();
        let c = curve_from_positions(&times, &qs).unwrap();
        assert_relative_eq!(c[100].v[0], 3.0, epsilon = 1e-9);
        assert_relative_eq!(c[0].qdd[0], 0.0, epsilon = 1e-8);
        assert!(matches!(
            curve_from_positions(&times[..3], &qs[..3]),
            Err(Error::TooFewSamples { .. })
        ));
    }

    #[test]
    fn two_link_torques_at_illustrated_configuration() {
        let p: BTreeMap<String, f64> = [("L1", 1.4), ("L2", 0.6), ("m", 2.0)]
            .iter()
            .map(|(k, v)| (k.to_string(), *v))
            .collect();
        let (l, ell, m) = (1.4, 0.6, 2.0);
        let arm = builtin("twolink_serial", &p).unwrap();
        let q = [std::f64::consts::FRAC_PI_2, -std::f64::consts::FRAC_PI_2];
        let jac = crate::systems::serial_arm_jacobian(l, ell, &q);
        let jinv = jac.clone().try_inverse().unwrap();
        let dual = arm.with_dual_cometric();
        for (dir, expect) in [
            ([1.0, 0.0], [-m * l, 0.0]),
            ([0.0, 1.0], [m * ell, m * ell]),
        ] {
            // joint acceleration producing the unit Cartesian acceleration at rest
            let qdd = &jinv * DVector::from_column_slice(&dir);
            let s = CurveSample::new(0.0, &q, &[0.0, 0.0], qdd.as_slice());
            let f = force_and_effort(&dual, &s).unwrap();
            assert!(
                (f.force[0] - expect[0]).abs() <= 1e-12 && (f.force[1] - expect[1]).abs() <= 1e-12
            );
            assert_relative_eq!(f.cost_density, m, epsilon = 1e-12);
        }
    }
}
