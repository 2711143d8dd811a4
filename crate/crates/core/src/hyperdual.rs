//! Second-order forward-mode differentiation.
//!
//! A [`HyperDual`] carries a value together with its gradient and Hessian with
//! respect to `n` independent variables, i.e. the truncated second-order Taylor
//! jet. Arithmetic propagates all three exactly, so derivatives are correct to
//! roundoff rather than to a finite-difference step.

use std::ops::{Add, Div, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, PartialEq)]
pub struct HyperDual {
    value: f64,
    grad: Vec<f64>,
    // row-major n x n, symmetric
    hess: Vec<f64>,
}

impl HyperDual {
    pub fn constant(value: f64, n: usize) -> Self {
        Self {
            value,
            grad: vec![0.0; n],
            hess: vec![0.0; n * n],
        }
    }

    /// The `index`-th independent variable at `value`.
    pub fn variable(value: f64, index: usize, n: usize) -> Self {
        let mut x = Self::constant(value, n);
        x.grad[index] = 1.0;
        x
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn num_vars(&self) -> usize {
        self.grad.len()
    }

    pub fn gradient(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.grad)
    }

    pub fn hessian(&self) -> DMatrix<f64> {
        let n = self.grad.len();
        DMatrix::from_row_slice(n, n, &self.hess)
    }

    /// True when no derivative component is nonzero.
    pub fn is_constant(&self) -> bool {
        self.grad.iter().all(|g| *g == 0.0) && self.hess.iter().all(|h| *h == 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.value.is_finite()
            && self.grad.iter().all(|g| g.is_finite())
            && self.hess.iter().all(|h| h.is_finite())
    }

    /// Composes a scalar function with known value `f0`, first derivative
    /// `f1` and second derivative `f2` at `self.value`.
    pub fn chain(&self, f0: f64, f1: f64, f2: f64) -> Self {
        let n = self.grad.len();
        let mut hess = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let mut h = 0.0;
                if f1 != 0.0 {
                    h += f1 * self.hess[i * n + j];
                }
                if f2 != 0.0 {
                    h += f2 * self.grad[i] * self.grad[j];
                }
                hess[i * n + j] = h;
            }
        }
        Self {
            value: f0,
            grad: self.grad.iter().map(|g| f1 * g).collect(),
            hess,
        }
    }

    pub fn sin(&self) -> Self {
        let (s, c) = self.value.sin_cos();
        self.chain(s, c, -s)
    }

    pub fn cos(&self) -> Self {
        let (s, c) = self.value.sin_cos();
        self.chain(c, -s, -c)
    }

    pub fn tan(&self) -> Self {
        let t = self.value.tan();
        let sec2 = 1.0 + t * t;
        self.chain(t, sec2, 2.0 * t * sec2)
    }

    pub fn exp(&self) -> Self {
        let e = self.value.exp();
        self.chain(e, e, e)
    }

    pub fn ln(&self) -> Self {
        let x = self.value;
        self.chain(x.ln(), 1.0 / x, -1.0 / (x * x))
    }

    pub fn sqrt(&self) -> Self {
        let r = self.value.sqrt();
        self.chain(r, 0.5 / r, -0.25 / (r * self.value))
    }

    pub fn recip(&self) -> Self {
        let x = self.value;
        self.chain(1.0 / x, -1.0 / (x * x), 2.0 / (x * x * x))
    }

    /// Integer power; well defined for negative bases.
    pub fn powi(&self, n: i32) -> Self {
        let x = self.value;
        if n == 0 {
            return Self::constant(1.0, self.grad.len());
        }
        let nf = f64::from(n);
        let f1 = nf * x.powi(n - 1);
        let f2 = if n == 1 {
            0.0
        } else {
            nf * (nf - 1.0) * x.powi(n - 2)
        };
        self.chain(x.powi(n), f1, f2)
    }

    /// Real power with a constant exponent; requires a positive base unless
    /// the exponent is integral.
    pub fn powf(&self, p: f64) -> Self {
        if p.fract() == 0.0 && p.abs() <= f64::from(i32::MAX) {
            return self.powi(p as i32);
        }
        let x = self.value;
        self.chain(
            x.powf(p),
            p * x.powf(p - 1.0),
            p * (p - 1.0) * x.powf(p - 2.0),
        )
    }

    /// `self ^ exponent` where both may carry derivatives.
    pub fn pow(&self, exponent: &HyperDual) -> Self {
        if exponent.is_constant() {
            return self.powf(exponent.value);
        }
        (exponent * &self.ln()).exp()
    }
}

impl Add for &HyperDual {
    type Output = HyperDual;
    fn add(self, rhs: &HyperDual) -> HyperDual {
        HyperDual {
            value: self.value + rhs.value,
            grad: self
                .grad
                .iter()
                .zip(&rhs.grad)
                .map(|(a, b)| a + b)
                .collect(),
            hess: self
                .hess
                .iter()
                .zip(&rhs.hess)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl Sub for &HyperDual {
    type Output = HyperDual;
    fn sub(self, rhs: &HyperDual) -> HyperDual {
        HyperDual {
            value: self.value - rhs.value,
            grad: self
                .grad
                .iter()
                .zip(&rhs.grad)
                .map(|(a, b)| a - b)
                .collect(),
            hess: self
                .hess
                .iter()
                .zip(&rhs.hess)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

impl Mul for &HyperDual {
    type Output = HyperDual;
    fn mul(self, rhs: &HyperDual) -> HyperDual {
        let n = self.grad.len();
        let (a, b) = (self.value, rhs.value);
        let mut hess = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                hess[i * n + j] = a * rhs.hess[i * n + j]
                    + b * self.hess[i * n + j]
                    + self.grad[i] * rhs.grad[j]
                    + rhs.grad[i] * self.grad[j];
            }
        }
        HyperDual {
            value: a * b,
            grad: self
                .grad
                .iter()
                .zip(&rhs.grad)
                .map(|(da, db)| a * db + b * da)
                .collect(),
            hess,
        }
    }
}

impl Div for &HyperDual {
    type Output = HyperDual;
    fn div(self, rhs: &HyperDual) -> HyperDual {
        self * &rhs.recip()
    }
}

impl Neg for &HyperDual {
    type Output = HyperDual;
    fn neg(self) -> HyperDual {
        HyperDual {
            value: -self.value,
            grad: self.grad.iter().map(|g| -g).collect(),
            hess: self.hess.iter().map(|h| -h).collect(),
        }
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr for HyperDual {
            type Output = HyperDual;
            fn $m(self, rhs: HyperDual) -> HyperDual {
                (&self).$m(&rhs)
            }
        }
    };
}

forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);
forward_owned!(Div, div);

impl Neg for HyperDual {
    type Output = HyperDual;
    fn neg(self) -> HyperDual {
        -&self
    }
}
