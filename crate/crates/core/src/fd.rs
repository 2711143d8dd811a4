//! Fourth-order finite-difference stencils on uniform grids.

use nalgebra::DVector;

use crate::error::{Error, Result};

// Coefficients over 12h (first derivative) and 12h^2 (second derivative).
const D1_CENTRAL: [f64; 5] = [1.0, -8.0, 0.0, 8.0, -1.0];
const D1_EDGE0: [f64; 5] = [-25.0, 48.0, -36.0, 16.0, -3.0];
const D1_EDGE1: [f64; 5] = [-3.0, -10.0, 18.0, -6.0, 1.0];

const D2_CENTRAL: [f64; 5] = [-1.0, 16.0, -30.0, 16.0, -1.0];
const D2_EDGE0: [f64; 6] = [45.0, -154.0, 214.0, -156.0, 61.0, -10.0];
const D2_EDGE1: [f64; 6] = [10.0, -15.0, -4.0, 14.0, -6.0, 1.0];

/// Derivative of order 1 or 2 of uniformly spaced samples.
///
/// Central five-point stencils in the interior; at the two outermost samples
/// on each side, one-sided stencils of the same order of accuracy.
pub fn derivative(values: &[f64], h: f64, order: usize) -> Result<Vec<f64>> {
    let n = values.len();
    let needed = if order == 1 { 5 } else { 6 };
    if n < needed {
        return Err(Error::TooFewSamples { needed, got: n });
    }
    let (central, edge0, edge1, scale): (&[f64], &[f64], &[f64], f64) = match order {
        1 => (&D1_CENTRAL, &D1_EDGE0, &D1_EDGE1, 12.0 * h),
        2 => (&D2_CENTRAL, &D2_EDGE0, &D2_EDGE1, 12.0 * h * h),
        _ => {
            return Err(Error::InvalidProblem(format!(
                "unsupported derivative order {order}"
            )))
        }
    };
    let dot = |coeffs: &[f64], start: usize| -> f64 {
        coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| c * values[start + k])
            .sum()
    };
    // mirrored stencil for the right edge; odd derivatives flip sign
    let sign = if order == 1 { -1.0 } else { 1.0 };
    let dot_rev = |coeffs: &[f64], end: usize| -> f64 {
        sign * coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| c * values[end - k])
            .sum::<f64>()
    };
    let mut out = vec![0.0; n];
    out[0] = dot(edge0, 0) / scale;
    out[1] = dot(edge1, 0) / scale;
    for i in 2..n - 2 {
        out[i] = dot(central, i - 2) / scale;
    }
    out[n - 1] = dot_rev(edge0, n - 1) / scale;
    out[n - 2] = dot_rev(edge1, n - 1) / scale;
    Ok(out)
}

/// Componentwise [`derivative`] of a vector-valued series.
pub fn derivative_vec(series: &[DVector<f64>], h: f64, order: usize) -> Result<Vec<DVector<f64>>> {
    let n = series.len();
    let d = series.first().map_or(0, |v| v.len());
    let mut out = vec![DVector::zeros(d); n];
    let mut column = vec![0.0; n];
    for c in 0..d {
        for (slot, v) in column.iter_mut().zip(series) {
            *slot = v[c];
        }
        for (o, x) in out.iter_mut().zip(derivative(&column, h, order)?) {
            o[c] = x;
        }
    }
    if d == 0 && n < 6 {
        return Err(Error::TooFewSamples { needed: 6, got: n });
    }
    Ok(out)
}

/// Checks that `times` is strictly increasing with constant spacing and
/// returns that spacing.
pub fn uniform_step(times: &[f64]) -> Result<f64> {
    if times.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: times.len(),
        });
    }
    let h = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
    if h <= 0.0 || !h.is_finite() {
        return Err(Error::NonUniformGrid);
    }
    let scale = times[0].abs().max(times[times.len() - 1].abs()).max(h);
    for (i, t) in times.iter().enumerate() {
        if (t - (times[0] + i as f64 * h)).abs() > 1e-9 * scale {
            return Err(Error::NonUniformGrid);
        }
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grid(n: usize, h: f64, f: impl Fn(f64) -> f64) -> Vec<f64> {
        (0..n).map(|i| f(i as f64 * h)).collect()
    }

    #[test]
    fn exact_on_quartics() {
        let h = 0.1;
        let f = |t: f64| 2.0 - t + 3.0 * t * t - 0.5 * t.powi(3) + 0.25 * t.powi(4);
        let df = |t: f64| -1.0 + 6.0 * t - 1.5 * t * t + t.powi(3);
        let ddf = |t: f64| 6.0 - 3.0 * t + 3.0 * t * t;
        let v = grid(9, h, f);
        let d1 = derivative(&v, h, 1).unwrap();
        let d2 = derivative(&v, h, 2).unwrap();
        for i in 0..9 {
            let t = i as f64 * h;
            assert_relative_eq!(d1[i], df(t), epsilon = 1e-11);
            assert_relative_eq!(d2[i], ddf(t), epsilon = 1e-9);
        }
    }

    #[test]
    fn fourth_order_convergence() {
        let err = |n: usize| {
            let h = 1.0 / (n - 1) as f64;
            let d = derivative(&grid(n, h, f64::sin), h, 1).unwrap();
            d.iter()
                .enumerate()
                .map(|(i, x)| (x - (i as f64 * h).cos()).abs())
                .fold(0.0, f64::max)
        };
        let ratio = err(21) / err(41);
        assert!(ratio > 12.0, "ratio {ratio}");
    }

    #[test]
    fn rejects_short_series() {
        assert_eq!(
            derivative(&[0.0; 4], 0.1, 1),
            Err(Error::TooFewSamples { needed: 5, got: 4 })
        );
        assert!(derivative(&[0.0; 5], 0.1, 2).is_err());
    }

    #[test]
    fn uniform_grid_detection() {
        assert_eq!(uniform_step(&[0.0, 0.5, 1.0]).unwrap(), 0.5);
        assert_eq!(uniform_step(&[0.0, 0.4, 1.0]), Err(Error::NonUniformGrid));
        assert_eq!(uniform_step(&[1.0, 0.5, 0.0]), Err(Error::NonUniformGrid));
    }
}
