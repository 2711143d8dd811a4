//! Damped Newton iteration with a forward-difference Jacobian.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepStatus {
    /// The input already met the tolerance; nothing was changed.
    AlreadyConverged,
    /// A step reduced the residual norm.
    Accepted,
    /// Neither the Newton direction nor any damped variant reduced the
    /// residual norm; the input is returned unchanged.
    Stagnated,
}

#[derive(Debug, Clone)]
pub struct NewtonStep {
    pub x: DVector<f64>,
    pub residual: DVector<f64>,
    pub norm: f64,
    pub status: StepStatus,
}

const MAX_HALVINGS: usize = 12;
const ARMIJO: f64 = 1e-4;

fn norm_or_inf<F>(f: &mut F, x: &DVector<f64>) -> (Option<DVector<f64>>, f64)
where
    F: FnMut(&DVector<f64>) -> Result<DVector<f64>>,
{
    match f(x) {
        Ok(r) if r.iter().all(|c| c.is_finite()) => {
            let n = r.norm();
            (Some(r), n)
        }
        _ => (None, f64::INFINITY),
    }
}

/// Forward-difference Jacobian; falls back to a backward difference for a
/// column whose forward probe cannot be evaluated.
pub fn fd_jacobian<F>(
    f: &mut F,
    x: &DVector<f64>,
    r0: &DVector<f64>,
    fd_step: f64,
) -> Result<DMatrix<f64>>
where
    F: FnMut(&DVector<f64>) -> Result<DVector<f64>>,
{
    let n = x.len();
    let m = r0.len();
    let mut jac = DMatrix::zeros(m, n);
    for j in 0..n {
        let h = fd_step * x[j].abs().max(1.0);
        let mut probe = x.clone();
        probe[j] += h;
        let col = match norm_or_inf(f, &probe) {
            (Some(r), _) => (r - r0) / h,
            (None, _) => {
                probe[j] = x[j] - h;
                match norm_or_inf(f, &probe) {
                    (Some(r), _) => (r0 - r) / h,
                    (None, _) => {
                        return Err(Error::Evaluation(format!(
                            "residual cannot be evaluated near the current guess in direction {j}"
                        )))
                    }
                }
            }
        };
        jac.set_column(j, &col);
    }
    Ok(jac)
}

fn levenberg_direction(jac: &DMatrix<f64>, r: &DVector<f64>, mu: f64) -> Option<DVector<f64>> {
    let n = jac.ncols();
    let jtj = jac.transpose() * jac + DMatrix::identity(n, n) * mu;
    let rhs = -(jac.transpose() * r);
    jtj.cholesky().map(|c| c.solve(&rhs))
}

/// One damped Newton step on `f(x) = 0`.
///
/// The Newton direction is tried with step lengths `1, ½, ¼, …`; if none
/// gives sufficient decrease of `‖f‖`, Levenberg-damped directions with
/// growing damping are tried. Points where `f` fails count as infinitely bad.
pub fn newton_step<F>(
    mut f: F,
    x: &DVector<f64>,
    fd_step: f64,
    tolerance: f64,
) -> Result<NewtonStep>
where
    F: FnMut(&DVector<f64>) -> Result<DVector<f64>>,
{
    let r0 = f(x)?;
    let n0 = r0.norm();
    if !n0.is_finite() {
        return Err(Error::Evaluation(
            "residual is not finite at the current guess".into(),
        ));
    }
    if n0 < tolerance {
        return Ok(NewtonStep {
            x: x.clone(),
            residual: r0,
            norm: n0,
            status: StepStatus::AlreadyConverged,
        });
    }
    let jac = fd_jacobian(&mut f, x, &r0, fd_step)?;
    let newton = if jac.is_square() {
        jac.clone()
            .lu()
            .solve(&(-&r0))
            .filter(|d| d.iter().all(|c| c.is_finite()))
    } else {
        None
    };
    let scale = jac.norm_squared().max(f64::MIN_POSITIVE);
    let direction = newton.or_else(|| levenberg_direction(&jac, &r0, 1e-12 * scale));

    if let Some(dir) = direction {
        let mut lambda = 1.0;
        for _ in 0..=MAX_HALVINGS {
            let trial = x + &dir * lambda;
            if let (Some(r), n) = norm_or_inf(&mut f, &trial) {
                if n <= (1.0 - ARMIJO * lambda) * n0 {
                    return Ok(NewtonStep {
                        x: trial,
                        residual: r,
                        norm: n,
                        status: StepStatus::Accepted,
                    });
                }
            }
            lambda *= 0.5;
        }
    }

    let mut mu = 1e-6 * scale;
    for _ in 0..8 {
        if let Some(dir) = levenberg_direction(&jac, &r0, mu) {
            let trial = x + dir;
            if let (Some(r), n) = norm_or_inf(&mut f, &trial) {
                if n < n0 {
                    return Ok(NewtonStep {
                        x: trial,
                        residual: r,
                        norm: n,
                        status: StepStatus::Accepted,
                    });
                }
            }
        }
        mu *= 10.0;
    }

    Ok(NewtonStep {
        x: x.clone(),
        residual: r0,
        norm: n0,
        status: StepStatus::Stagnated,
    })
}

#[derive(Debug, Clone)]
pub struct NewtonResult {
    pub x: DVector<f64>,
    pub norm: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Repeats [`newton_step`] until the tolerance is met, the iteration budget
/// is spent, or the iteration stagnates.
pub fn newton_solve<F>(
    mut f: F,
    x0: &DVector<f64>,
    fd_step: f64,
    tolerance: f64,
    max_iter: usize,
) -> Result<NewtonResult>
where
    F: FnMut(&DVector<f64>) -> Result<DVector<f64>>,
{
    let mut x = x0.clone();
    let mut norm = f64::INFINITY;
    for it in 0..=max_iter {
        let step = newton_step(&mut f, &x, fd_step, tolerance)?;
        norm = step.norm;
        match step.status {
            StepStatus::AlreadyConverged => {
                return Ok(NewtonResult {
                    x,
                    norm,
                    iterations: it,
                    converged: true,
                })
            }
            StepStatus::Stagnated => {
                return Ok(NewtonResult {
                    x,
                    norm,
                    iterations: it,
                    converged: false,
                })
            }
            StepStatus::Accepted => {
                x = step.x;
                norm = step.norm;
                if it == max_iter {
                    break;
                }
            }
        }
    }
    Ok(NewtonResult {
        converged: norm < tolerance,
        x,
        norm,
        iterations: max_iter,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn linear_residual_in_one_step() {
        let a = DMatrix::from_row_slice(2, 2, &[3.0, 1.0, -1.0, 2.0]);
        let b = DVector::from_column_slice(&[1.0, 4.0]);
        let f = |x: &DVector<f64>| Ok(&a * x - &b);
        let step = newton_step(f, &DVector::zeros(2), 1e-7, 1e-12).unwrap();
        let exact = a.clone().lu().solve(&b).unwrap();
        assert_eq!(step.status, StepStatus::Accepted);
        assert!((step.x - exact).amax() < 1e-8);
    }

    #[test]
    fn square_root_of_four() {
        let f = |x: &DVector<f64>| Ok(DVector::from_element(1, x[0] * x[0] - 4.0));
        let step = newton_step(f, &DVector::from_element(1, 3.0), 1e-8, 1e-12).unwrap();
        assert_relative_eq!(step.x[0], 13.0 / 6.0, epsilon = 1e-6);
        let done = newton_solve(f, &DVector::from_element(1, 3.0), 1e-8, 1e-12, 50).unwrap();
        assert!(done.converged);
        assert_relative_eq!(done.x[0], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn converged_guess_is_unchanged() {
        let f = |x: &DVector<f64>| Ok(x * 1e-14);
        let x = DVector::from_column_slice(&[0.5, -0.25]);
        let step = newton_step(f, &x, 1e-7, 1e-12).unwrap();
        assert_eq!(step.status, StepStatus::AlreadyConverged);
        assert_eq!(step.x, x);
    }

    #[test]
    fn singular_jacobian_falls_back_to_damping() {
        // r = (x0 + x1 - 2, x0 + x1 - 2): rank one, minimum-norm progress
        let f = |x: &DVector<f64>| {
            let s = x[0] + x[1] - 2.0;
            Ok(DVector::from_column_slice(&[s, s]))
        };
        let step = newton_step(f, &DVector::zeros(2), 1e-7, 1e-12).unwrap();
        assert_eq!(step.status, StepStatus::Accepted);
        assert!(step.norm < 1e-6);
    }

    #[test]
    fn stagnation_is_signalled() {
        // |r| has a nonzero minimum at x = 0
        let f = |x: &DVector<f64>| Ok(DVector::from_element(1, x[0] * x[0] + 1.0));
        let step = newton_step(f, &DVector::from_element(1, 0.0), 1e-7, 1e-12).unwrap();
        assert_eq!(step.status, StepStatus::Stagnated);
    }
}
