//! Pointwise tensor data of a configuration chart carrying a kinetic metric
//! `M` and an actuation cometric `Ñ`.
//!
//! Index conventions, used throughout the crate:
//!
//! * first partials of a matrix field: `[k][i][j] = ∂_k T_ij`
//! * second partials: `[k][l][i][j] = ∂_k ∂_l T_ij`
//! * Christoffel symbols: `[k][i][j] = Γ^k_ij`
//! * curvature: `[l][i][j][k] = R^l_ijk`, so that `R(X,Y)Z` has components
//!   `R^l_ijk X^i Y^j Z^k`
//! * compatibility tensor: `[i][j][k] = τ_i^jk`, derivative direction first

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::tensor::{Tensor3, Tensor4};

/// How many derivative levels a caller needs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Order {
    Value,
    First,
    Second,
}

/// A matrix field and (some of) its partial derivatives at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldJet {
    pub value: DMatrix<f64>,
    pub first: Option<Tensor3>,
    pub second: Option<Tensor4>,
}

impl FieldJet {
    pub fn value_only(value: DMatrix<f64>) -> Self {
        Self {
            value,
            first: None,
            second: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.value.nrows()
    }

    /// `∂_k T` as a matrix. Panics if first partials are absent.
    pub fn d(&self, k: usize) -> DMatrix<f64> {
        let t = self.first.as_ref().expect("first partials not computed");
        let d = self.dim();
        DMatrix::from_fn(d, d, |i, j| t[[k, i, j]])
    }

    /// `∂_k ∂_l T` as a matrix. Panics if second partials are absent.
    pub fn dd(&self, k: usize, l: usize) -> DMatrix<f64> {
        let t = self.second.as_ref().expect("second partials not computed");
        let d = self.dim();
        DMatrix::from_fn(d, d, |i, j| t[[k, l, i, j]])
    }

    fn from_parts(
        value: DMatrix<f64>,
        first: Option<Vec<DMatrix<f64>>>,
        second: Option<Vec<DMatrix<f64>>>,
    ) -> Self {
        let d = value.nrows();
        let first = first.map(|mats| {
            let mut t = Tensor3::zeros(d);
            for (k, m) in mats.iter().enumerate() {
                for i in 0..d {
                    for j in 0..d {
                        t[[k, i, j]] = m[(i, j)];
                    }
                }
            }
            t
        });
        let second = second.map(|mats| {
            let mut t = Tensor4::zeros(d);
            for k in 0..d {
                for l in 0..d {
                    let m = &mats[k * d + l];
                    for i in 0..d {
                        for j in 0..d {
                            t[[k, l, i, j]] = m[(i, j)];
                        }
                    }
                }
            }
            t
        });
        Self {
            value,
            first,
            second,
        }
    }

    fn first_mats(&self) -> Option<Vec<DMatrix<f64>>> {
        self.first
            .as_ref()
            .map(|_| (0..self.dim()).map(|k| self.d(k)).collect())
    }

    fn second_mats(&self) -> Option<Vec<DMatrix<f64>>> {
        let d = self.dim();
        self.second
            .as_ref()
            .map(|_| (0..d * d).map(|kl| self.dd(kl / d, kl % d)).collect())
    }

    /// Jet of the matrix product `self · other`.
    pub fn mul(&self, other: &FieldJet) -> FieldJet {
        let d = self.dim();
        let (a1, b1) = (self.first_mats(), other.first_mats());
        let first = match (&a1, &b1) {
            (Some(a1), Some(b1)) => Some(
                (0..d)
                    .map(|k| &a1[k] * &other.value + &self.value * &b1[k])
                    .collect::<Vec<_>>(),
            ),
            _ => None,
        };
        let second = match (&a1, &b1, self.second_mats(), other.second_mats()) {
            (Some(a1), Some(b1), Some(a2), Some(b2)) => Some(
                (0..d * d)
                    .map(|kl| {
                        let (k, l) = (kl / d, kl % d);
                        &a2[kl] * &other.value
                            + &a1[k] * &b1[l]
                            + &a1[l] * &b1[k]
                            + &self.value * &b2[kl]
                    })
                    .collect(),
            ),
            _ => None,
        };
        FieldJet::from_parts(&self.value * &other.value, first, second)
    }

    /// Jet of the matrix inverse, given the already computed inverse value.
    fn inverse_with(&self, inv: DMatrix<f64>) -> FieldJet {
        let d = self.dim();
        let a1 = self.first_mats();
        // X ∂_k A X, reused by both orders
        let xax: Option<Vec<DMatrix<f64>>> = a1
            .as_ref()
            .map(|a1| a1.iter().map(|m| &inv * m * &inv).collect());
        let first = xax.as_ref().map(|xax| xax.iter().map(|m| -m).collect());
        let second = match (&a1, &xax, self.second_mats()) {
            (Some(a1), Some(xax), Some(a2)) => Some(
                (0..d * d)
                    .map(|kl| {
                        let (k, l) = (kl / d, kl % d);
                        &xax[k] * &a1[l] * &inv + &xax[l] * &a1[k] * &inv - &inv * &a2[kl] * &inv
                    })
                    .collect(),
            ),
            _ => None,
        };
        FieldJet::from_parts(inv, first, second)
    }

    fn symmetrize(&mut self) {
        self.value = (&self.value + self.value.transpose()) * 0.5;
        let d = self.dim();
        if let Some(t) = &mut self.first {
            for k in 0..d {
                for i in 0..d {
                    for j in i + 1..d {
                        let m = 0.5 * (t[[k, i, j]] + t[[k, j, i]]);
                        t[[k, i, j]] = m;
                        t[[k, j, i]] = m;
                    }
                }
            }
        }
        if let Some(t) = &mut self.second {
            for k in 0..d {
                for l in 0..d {
                    for i in 0..d {
                        for j in 0..d {
                            if (k, l, i, j) < (l, k, j, i) {
                                let m = 0.25
                                    * (t[[k, l, i, j]]
                                        + t[[l, k, i, j]]
                                        + t[[k, l, j, i]]
                                        + t[[l, k, j, i]]);
                                t[[k, l, i, j]] = m;
                                t[[l, k, i, j]] = m;
                                t[[k, l, j, i]] = m;
                                t[[l, k, j, i]] = m;
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Anything that can evaluate a symmetric matrix field on a chart.
///
/// `jet` must always fill `value`; partials up to `order` should be filled
/// when the source knows them exactly and left `None` otherwise, in which
/// case [`TensorField`] falls back to finite differences.
pub trait FieldSource: Send + Sync {
    fn dim(&self) -> usize;
    fn jet(&self, q: &[f64], order: Order) -> Result<FieldJet>;
}

/// An immutable, shareable symmetric matrix field.
#[derive(Clone)]
pub struct TensorField {
    source: Arc<dyn FieldSource>,
    positive: bool,
    label: String,
}

impl fmt::Debug for TensorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TensorField")
            .field("label", &self.label)
            .field("dim", &self.dim())
            .field("positive", &self.positive)
            .finish()
    }
}

struct Constant(DMatrix<f64>);

impl FieldSource for Constant {
    fn dim(&self) -> usize {
        self.0.nrows()
    }

    fn jet(&self, _q: &[f64], order: Order) -> Result<FieldJet> {
        let d = self.dim();
        Ok(FieldJet {
            value: self.0.clone(),
            first: (order >= Order::First).then(|| Tensor3::zeros(d)),
            second: (order >= Order::Second).then(|| Tensor4::zeros(d)),
        })
    }
}

type ValueFn = dyn Fn(&[f64]) -> Result<DMatrix<f64>> + Send + Sync;
type FirstFn = dyn Fn(&[f64]) -> Result<Tensor3> + Send + Sync;
type SecondFn = dyn Fn(&[f64]) -> Result<Tensor4> + Send + Sync;

struct Closures {
    dim: usize,
    value: Box<ValueFn>,
    first: Option<Box<FirstFn>>,
    second: Option<Box<SecondFn>>,
}

impl FieldSource for Closures {
    fn dim(&self) -> usize {
        self.dim
    }

    fn jet(&self, q: &[f64], order: Order) -> Result<FieldJet> {
        let value = (self.value)(q)?;
        let first = match (&self.first, order >= Order::First) {
            (Some(f), true) => Some(f(q)?),
            _ => None,
        };
        let second = match (&self.second, order >= Order::Second) {
            (Some(f), true) => Some(f(q)?),
            _ => None,
        };
        Ok(FieldJet {
            value,
            first,
            second,
        })
    }
}

struct Inverse(TensorField);

impl FieldSource for Inverse {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn jet(&self, q: &[f64], order: Order) -> Result<FieldJet> {
        let jet = self.0.jet(q, order)?;
        let inv =
            spd_inverse(&jet.value).ok_or_else(|| Error::SingularMetric { point: q.to_vec() })?;
        Ok(jet.inverse_with(inv))
    }
}

struct Blend {
    from: TensorField,
    to: TensorField,
    s: f64,
}

impl FieldSource for Blend {
    fn dim(&self) -> usize {
        self.from.dim()
    }

    fn jet(&self, q: &[f64], order: Order) -> Result<FieldJet> {
        let a = self.from.jet(q, order)?;
        let b = self.to.jet(q, order)?;
        let (u, s) = (1.0 - self.s, self.s);
        let mix3 = |x: &Option<Tensor3>, y: &Option<Tensor3>| {
            x.as_ref().zip(y.as_ref()).map(|(x, y)| {
                let mut t = Tensor3::zeros(x.dim());
                let d = x.dim();
                for i in 0..d {
                    for j in 0..d {
                        for k in 0..d {
                            t[[i, j, k]] = u * x[[i, j, k]] + s * y[[i, j, k]];
                        }
                    }
                }
                t
            })
        };
        let mix4 = |x: &Option<Tensor4>, y: &Option<Tensor4>| {
            x.as_ref().zip(y.as_ref()).map(|(x, y)| {
                let d = x.dim();
                let mut t = Tensor4::zeros(d);
                for i in 0..d {
                    for j in 0..d {
                        for k in 0..d {
                            for l in 0..d {
                                t[[i, j, k, l]] = u * x[[i, j, k, l]] + s * y[[i, j, k, l]];
                            }
                        }
                    }
                }
                t
            })
        };
        Ok(FieldJet {
            value: &a.value * u + &b.value * s,
            first: mix3(&a.first, &b.first),
            second: mix4(&a.second, &b.second),
        })
    }
}

struct InducedDual {
    metric: TensorField,
    cometric: TensorField,
}

impl FieldSource for InducedDual {
    fn dim(&self) -> usize {
        self.metric.dim()
    }

    fn jet(&self, q: &[f64], order: Order) -> Result<FieldJet> {
        let m = self.metric.jet(q, order)?;
        let c = self.cometric.jet(q, order)?;
        induced_dual_jet(&m, &c)
    }
}

/// Jet of `N = M Ñ M`.
pub fn induced_jet(metric: &FieldJet, cometric: &FieldJet) -> FieldJet {
    let mut n = metric.mul(cometric).mul(metric);
    n.symmetrize();
    n
}

/// Jet of `h* = (M Ñ M)⁻¹`.
pub fn induced_dual_jet(metric: &FieldJet, cometric: &FieldJet) -> Result<FieldJet> {
    let n = induced_jet(metric, cometric);
    let inv = spd_inverse(&n.value).ok_or(Error::DegenerateInducedMetric)?;
    let mut h = n.inverse_with(inv);
    h.symmetrize();
    Ok(h)
}

impl TensorField {
    pub fn from_source(
        source: Arc<dyn FieldSource>,
        positive: bool,
        label: impl Into<String>,
    ) -> Self {
        Self {
            source,
            positive,
            label: label.into(),
        }
    }

    /// A field with the same value everywhere and vanishing partials.
    pub fn constant(matrix: DMatrix<f64>, label: impl Into<String>) -> Result<Self> {
        if !matrix.is_square() || matrix.nrows() == 0 {
            return Err(Error::Dimension(format!(
                "constant field needs a nonempty square matrix, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let label = label.into();
        check_matrix(&matrix, true, &label, &[])?;
        Ok(Self::from_source(Arc::new(Constant(matrix)), true, label))
    }

    pub fn identity(dim: usize, label: impl Into<String>) -> Self {
        Self::from_source(Arc::new(Constant(DMatrix::identity(dim, dim))), true, label)
    }

    /// A field given only by its values; partials come from finite
    /// differences.
    pub fn from_fn<F>(dim: usize, label: impl Into<String>, f: F) -> Self
    where
        F: Fn(&[f64]) -> Result<DMatrix<f64>> + Send + Sync + 'static,
    {
        Self::from_source(
            Arc::new(Closures {
                dim,
                value: Box::new(f),
                first: None,
                second: None,
            }),
            true,
            label,
        )
    }

    /// A field with closed-form first and second partials.
    pub fn analytic<F, G, H>(
        dim: usize,
        label: impl Into<String>,
        value: F,
        first: G,
        second: H,
    ) -> Self
    where
        F: Fn(&[f64]) -> Result<DMatrix<f64>> + Send + Sync + 'static,
        G: Fn(&[f64]) -> Result<Tensor3> + Send + Sync + 'static,
        H: Fn(&[f64]) -> Result<Tensor4> + Send + Sync + 'static,
    {
        Self::from_source(
            Arc::new(Closures {
                dim,
                value: Box::new(value),
                first: Some(Box::new(first)),
                second: Some(Box::new(second)),
            }),
            true,
            label,
        )
    }

    /// Pointwise matrix inverse, with exact partials whenever `self` has them.
    pub fn inverse(&self) -> Self {
        Self::from_source(
            Arc::new(Inverse(self.clone())),
            true,
            format!("inverse of {}", self.label),
        )
    }

    /// `(1 − s)·from + s·to`.
    pub fn blend(from: &TensorField, to: &TensorField, s: f64) -> Self {
        Self::from_source(
            Arc::new(Blend {
                from: from.clone(),
                to: to.clone(),
                s,
            }),
            true,
            format!("blend({}, {}, {s})", from.label, to.label),
        )
    }

    /// The cometric `h* = (M Ñ M)⁻¹` dual to the induced metric.
    pub fn induced_dual(metric: &TensorField, cometric: &TensorField) -> Self {
        Self::from_source(
            Arc::new(InducedDual {
                metric: metric.clone(),
                cometric: cometric.clone(),
            }),
            true,
            "induced dual cometric",
        )
    }

    /// Disables the positive-definiteness check (symmetry is still checked).
    pub fn allow_indefinite(mut self) -> Self {
        self.positive = false;
        self
    }

    pub fn dim(&self) -> usize {
        self.source.dim()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn is_positive(&self) -> bool {
        self.positive
    }

    /// Validated, symmetrized value at `q`.
    pub fn value(&self, q: &[f64]) -> Result<DMatrix<f64>> {
        Ok(self.jet(q, Order::Value)?.value)
    }

    /// Value and partials up to `order`, falling back to finite differences
    /// for partials the source does not provide.
    pub fn jet(&self, q: &[f64], order: Order) -> Result<FieldJet> {
        let d = self.dim();
        if q.len() != d {
            return Err(Error::Dimension(format!(
                "{} expects a point with {d} coordinates, got {}",
                self.label,
                q.len()
            )));
        }
        let mut jet = self.source.jet(q, order)?;
        if jet.value.nrows() != d || jet.value.ncols() != d {
            return Err(Error::Dimension(format!(
                "{} evaluated to a {}x{} matrix, expected {d}x{d}",
                self.label,
                jet.value.nrows(),
                jet.value.ncols()
            )));
        }
        if jet.value.iter().any(|x| !x.is_finite()) {
            return Err(Error::Evaluation(format!(
                "{} is not finite at {q:?}",
                self.label
            )));
        }
        check_matrix(&jet.value, self.positive, &self.label, q)?;
        if order >= Order::First && jet.first.is_none() {
            jet.first = Some(self.fd_first(q)?);
        }
        if order >= Order::Second && jet.second.is_none() {
            jet.second = Some(self.fd_second(q)?);
        }
        jet.symmetrize();
        Ok(jet)
    }

    fn raw_value(&self, q: &[f64]) -> Result<DMatrix<f64>> {
        Ok(self.source.jet(q, Order::Value)?.value)
    }

    /// Central differences of values with a relative step.
    pub fn fd_first(&self, q: &[f64]) -> Result<Tensor3> {
        let d = self.dim();
        let mut t = Tensor3::zeros(d);
        let mut x = q.to_vec();
        for k in 0..d {
            let h = fd_step(q[k], 1e-5, 1e-7);
            x[k] = q[k] + h;
            let plus = self.raw_value(&x)?;
            x[k] = q[k] - h;
            let minus = self.raw_value(&x)?;
            x[k] = q[k];
            for i in 0..d {
                for j in 0..d {
                    t[[k, i, j]] = (plus[(i, j)] - minus[(i, j)]) / (2.0 * h);
                }
            }
        }
        Ok(t)
    }

    /// Second partials: central differences of exact first partials when the
    /// source has them, otherwise second differences of values.
    pub fn fd_second(&self, q: &[f64]) -> Result<Tensor4> {
        let d = self.dim();
        let mut t = Tensor4::zeros(d);
        let mut x = q.to_vec();
        let probe = self.source.jet(q, Order::First)?;
        if probe.first.is_some() {
            for l in 0..d {
                let h = fd_step(q[l], 1e-5, 1e-5);
                x[l] = q[l] + h;
                let plus = self.source.jet(&x, Order::First)?.first;
                x[l] = q[l] - h;
                let minus = self.source.jet(&x, Order::First)?.first;
                x[l] = q[l];
                let (Some(plus), Some(minus)) = (plus, minus) else {
                    return Err(Error::Evaluation(format!(
                        "{} stopped providing partials near {q:?}",
                        self.label
                    )));
                };
                for k in 0..d {
                    for i in 0..d {
                        for j in 0..d {
                            t[[k, l, i, j]] = (plus[[k, i, j]] - minus[[k, i, j]]) / (2.0 * h);
                        }
                    }
                }
            }
            return Ok(t);
        }
        let center = self.raw_value(q)?;
        for k in 0..d {
            let hk = fd_step(q[k], 1e-4, 1e-4);
            x[k] = q[k] + hk;
            let plus = self.raw_value(&x)?;
            x[k] = q[k] - hk;
            let minus = self.raw_value(&x)?;
            x[k] = q[k];
            for i in 0..d {
                for j in 0..d {
                    t[[k, k, i, j]] =
                        (plus[(i, j)] - 2.0 * center[(i, j)] + minus[(i, j)]) / (hk * hk);
                }
            }
            for l in k + 1..d {
                let hl = fd_step(q[l], 1e-4, 1e-4);
                let mut corner = |sk: f64, sl: f64| {
                    x[k] = q[k] + sk * hk;
                    x[l] = q[l] + sl * hl;
                    let v = self.raw_value(&x);
                    x[k] = q[k];
                    x[l] = q[l];
                    v
                };
                let pp = corner(1.0, 1.0)?;
                let pm = corner(1.0, -1.0)?;
                let mp = corner(-1.0, 1.0)?;
                let mm = corner(-1.0, -1.0)?;
                for i in 0..d {
                    for j in 0..d {
                        let v =
                            (pp[(i, j)] - pm[(i, j)] - mp[(i, j)] + mm[(i, j)]) / (4.0 * hk * hl);
                        t[[k, l, i, j]] = v;
                        t[[l, k, i, j]] = v;
                    }
                }
            }
        }
        Ok(t)
    }
}

fn fd_step(x: f64, relative: f64, floor: f64) -> f64 {
    (relative * x.abs()).max(floor)
}

fn check_matrix(m: &DMatrix<f64>, positive: bool, label: &str, q: &[f64]) -> Result<()> {
    let scale = m.iter().fold(1.0_f64, |s, x| s.max(x.abs()));
    let asymmetry = (m - m.transpose()).amax();
    if asymmetry > 1e-12 * scale {
        return Err(Error::NotSymmetric {
            what: label.to_string(),
            point: q.to_vec(),
            asymmetry,
        });
    }
    if positive && m.clone().cholesky().is_none() {
        return Err(Error::NotPositiveDefinite {
            what: label.to_string(),
            point: q.to_vec(),
        });
    }
    Ok(())
}

/// Inverse of a symmetric positive definite matrix, `None` if the Cholesky
/// factorization fails.
pub fn spd_inverse(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let inv = m.clone().cholesky()?.inverse();
    Some((&inv + inv.transpose()) * 0.5)
}

/// Christoffel symbols `Γ^k_ij` from the metric and its first partials.
pub fn christoffel_from_jet(m: &FieldJet, q: &[f64]) -> Result<Tensor3> {
    let d = m.dim();
    let minv = spd_inverse(&m.value).ok_or_else(|| Error::SingularMetric { point: q.to_vec() })?;
    let dm = m.first.as_ref().expect("metric jet lacks first partials");
    let lowered = lowered_christoffel(dm, d);
    let mut g = Tensor3::zeros(d);
    for k in 0..d {
        for i in 0..d {
            for j in i..d {
                let s: f64 = (0..d).map(|l| minv[(k, l)] * lowered[[l, i, j]]).sum();
                g[[k, i, j]] = s;
                g[[k, j, i]] = s;
            }
        }
    }
    Ok(g)
}

// C_lij = ½(∂_i g_lj + ∂_j g_li − ∂_l g_ij)
fn lowered_christoffel(dm: &Tensor3, d: usize) -> Tensor3 {
    let mut c = Tensor3::zeros(d);
    for l in 0..d {
        for i in 0..d {
            for j in 0..d {
                c[[l, i, j]] = 0.5 * (dm[[i, l, j]] + dm[[j, l, i]] - dm[[l, i, j]]);
            }
        }
    }
    c
}

/// Christoffel symbols and their partials `[m][k][i][j] = ∂_m Γ^k_ij`.
pub fn christoffel_with_partials(m: &FieldJet, q: &[f64]) -> Result<(Tensor3, Tensor4)> {
    let d = m.dim();
    let minv = spd_inverse(&m.value).ok_or_else(|| Error::SingularMetric { point: q.to_vec() })?;
    let dm = m.first.as_ref().expect("metric jet lacks first partials");
    let ddm = m.second.as_ref().expect("metric jet lacks second partials");
    let c = lowered_christoffel(dm, d);
    let mut gamma = Tensor3::zeros(d);
    for k in 0..d {
        for i in 0..d {
            for j in 0..d {
                gamma[[k, i, j]] = (0..d).map(|l| minv[(k, l)] * c[[l, i, j]]).sum();
            }
        }
    }
    // ∂_m Γ^k_ij = −M^{ka} ∂_m M_ab Γ^b_ij + M^{kl} ∂_m C_lij
    let mut dgamma = Tensor4::zeros(d);
    for mm in 0..d {
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    let mut s = 0.0;
                    for a in 0..d {
                        let mut t = 0.0;
                        for b in 0..d {
                            t += dm[[mm, a, b]] * gamma[[b, i, j]];
                        }
                        let dc = 0.5
                            * (ddm[[mm, i, a, j]] + ddm[[mm, j, a, i]] - ddm[[mm, a, i, j]]);
                        s += minv[(k, a)] * (dc - t);
                    }
                    dgamma[[mm, k, i, j]] = s;
                }
            }
        }
    }
    Ok((gamma, dgamma))
}

/// `R^l_ijk = ∂_i Γ^l_jk − ∂_j Γ^l_ik + Γ^n_jk Γ^l_in − Γ^n_ik Γ^l_jn`.
pub fn curvature_from_christoffel(gamma: &Tensor3, dgamma: &Tensor4) -> Tensor4 {
    let d = gamma.dim();
    let mut r = Tensor4::zeros(d);
    for l in 0..d {
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    let mut s = dgamma[[i, l, j, k]] - dgamma[[j, l, i, k]];
                    for n in 0..d {
                        s += gamma[[n, j, k]] * gamma[[l, i, n]]
                            - gamma[[n, i, k]] * gamma[[l, j, n]];
                    }
                    r[[l, i, j, k]] = s;
                }
            }
        }
    }
    r
}

/// `τ_i^jk = ∂_i h*^jk + Γ^j_il h*^lk + Γ^k_il h*^jl`.
pub fn compatibility_from_jet(hstar: &FieldJet, gamma: &Tensor3) -> Tensor3 {
    let d = hstar.dim();
    let dh = hstar
        .first
        .as_ref()
        .expect("cometric jet lacks first partials");
    let h = &hstar.value;
    let mut tau = Tensor3::zeros(d);
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                let mut s = dh[[i, j, k]];
                for l in 0..d {
                    s += gamma[[j, i, l]] * h[(l, k)] + gamma[[k, i, l]] * h[(j, l)];
                }
                tau[[i, j, k]] = s;
            }
        }
    }
    tau
}

pub fn christoffel(metric: &TensorField, q: &[f64]) -> Result<Tensor3> {
    christoffel_from_jet(&metric.jet(q, Order::First)?, q)
}

pub fn curvature(metric: &TensorField, q: &[f64]) -> Result<Tensor4> {
    let (g, dg) = christoffel_with_partials(&metric.jet(q, Order::Second)?, q)?;
    Ok(curvature_from_christoffel(&g, &dg))
}

/// Sectional (Gaussian) curvature of a 2-dimensional chart.
pub fn sectional_curvature(metric: &TensorField, q: &[f64]) -> Result<f64> {
    if metric.dim() != 2 {
        return Err(Error::Dimension(format!(
            "sectional curvature is defined here for d = 2, got d = {}",
            metric.dim()
        )));
    }
    let m = metric.value(q)?;
    let r = curvature(metric, q)?;
    Ok(sectional_from(&m, &r))
}

/// Sectional curvature from an already evaluated metric and curvature tensor.
pub fn sectional_from(m: &DMatrix<f64>, r: &Tensor4) -> f64 {
    // <R(e1, e2) e2, e1> / det g
    let num: f64 = (0..2).map(|l| m[(0, l)] * r[[l, 0, 1, 1]]).sum();
    num / m.determinant()
}

/// `N = M Ñ M`.
pub fn induced_metric(
    metric: &TensorField,
    cometric: &TensorField,
    q: &[f64],
) -> Result<DMatrix<f64>> {
    let m = metric.value(q)?;
    let c = cometric.value(q)?;
    Ok(induced_metric_matrix(&m, &c))
}

pub fn induced_metric_matrix(m: &DMatrix<f64>, cometric: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m * cometric * m;
    (&n + n.transpose()) * 0.5
}

/// `h* = N⁻¹`.
pub fn dual_cometric(n: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !n.is_square() {
        return Err(Error::Dimension("induced metric must be square".into()));
    }
    spd_inverse(n).ok_or(Error::DegenerateInducedMetric)
}

pub fn compatibility_tensor(
    hstar: &TensorField,
    metric: &TensorField,
    q: &[f64],
) -> Result<Tensor3> {
    let gamma = christoffel(metric, q)?;
    Ok(compatibility_from_jet(&hstar.jet(q, Order::First)?, &gamma))
}

/// `M = Σ w_b J_bᵀ J_b`; weights default to 1.
pub fn mass_matrix_from_jacobians(
    jacobians: &[DMatrix<f64>],
    weights: Option<&[f64]>,
) -> Result<DMatrix<f64>> {
    let Some(first) = jacobians.first() else {
        return Err(Error::Dimension("at least one jacobian is required".into()));
    };
    let d = first.ncols();
    if let Some(w) = weights {
        if w.len() != jacobians.len() {
            return Err(Error::Dimension(format!(
                "{} weights for {} jacobians",
                w.len(),
                jacobians.len()
            )));
        }
    }
    let mut m = DMatrix::zeros(d, d);
    for (b, j) in jacobians.iter().enumerate() {
        if j.ncols() != d {
            return Err(Error::Dimension(format!(
                "jacobian {b} has {} columns, expected {d}",
                j.ncols()
            )));
        }
        let w = weights.map_or(1.0, |w| w[b]);
        m += j.transpose() * j * w;
    }
    Ok((&m + m.transpose()) * 0.5)
}

/// Constant diagonal cometric `diag(k_1, …, k_n)` of actuator weights.
pub fn torque_cometric(weights: &[f64]) -> Result<TensorField> {
    if weights.is_empty() {
        return Err(Error::Dimension(
            "at least one actuator weight is required".into(),
        ));
    }
    for (index, &value) in weights.iter().enumerate() {
        if !(value > 0.0) || !value.is_finite() {
            return Err(Error::NonPositiveWeight { index, value });
        }
    }
    TensorField::constant(
        DMatrix::from_diagonal(&DVector::from_column_slice(weights)),
        "torque cometric",
    )
}

fn check_jacobian(j: &DMatrix<f64>, d: usize) -> Result<()> {
    if j.nrows() != d || j.ncols() != d {
        return Err(Error::Dimension(format!(
            "change-of-chart jacobian must be {d}x{d}, got {}x{}",
            j.nrows(),
            j.ncols()
        )));
    }
    let scale = j.amax().max(f64::MIN_POSITIVE);
    if j.determinant().abs() <= 1e-14 * scale.powi(d as i32) {
        return Err(Error::SingularJacobian);
    }
    Ok(())
}

/// `Jᵀ Ñ J`: the cometric seen from a chart whose force components `F'`
/// relate to the original ones by `F = J F'`.
pub fn pullback_cometric(cometric: &DMatrix<f64>, jacobian: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_jacobian(jacobian, cometric.nrows())?;
    let out = jacobian.transpose() * cometric * jacobian;
    Ok((&out + out.transpose()) * 0.5)
}

/// `Jᵀ M J` with `J = ∂(old)/∂(new)`.
pub fn pullback_metric(metric: &DMatrix<f64>, jacobian: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    pullback_cometric(metric, jacobian)
}

/// `count` points on the unit ellipse `uᵀ A u = 1`, equally spaced in angle.
pub fn indicatrix_samples(matrix: &DMatrix<f64>, count: usize) -> Result<Vec<DVector<f64>>> {
    if matrix.nrows() != 2 || matrix.ncols() != 2 {
        return Err(Error::Dimension(format!(
            "indicatrix samples need a 2x2 matrix, got {}x{}",
            matrix.nrows(),
            matrix.ncols()
        )));
    }
    check_matrix(matrix, true, "indicatrix form", &[])?;
    Ok((0..count)
        .map(|k| {
            let theta = std::f64::consts::TAU * k as f64 / count as f64;
            let (s, c) = theta.sin_cos();
            // exact zeros on the axes
            let (c, s) = (snap(c), snap(s));
            let e = DVector::from_column_slice(&[c, s]);
            let len2 = (e.transpose() * matrix * &e)[(0, 0)];
            e / len2.sqrt()
        })
        .collect())
}

fn snap(x: f64) -> f64 {
    if x.abs() < 1e-15 {
        0.0
    } else {
        x
    }
}

/// Everything the Hamiltonian vector field needs at one point.
#[derive(Debug, Clone)]
pub struct LocalGeometry {
    pub metric: DMatrix<f64>,
    pub cometric: DMatrix<f64>,
    pub induced: DMatrix<f64>,
    pub hstar: DMatrix<f64>,
    pub christoffel: Tensor3,
    pub curvature: Tensor4,
    pub compatibility: Tensor3,
}

/// `N = M Ñ M`, `h* = N⁻¹` and `∂_k h* = −h* ∂_k N h*` from first-order
/// jets.
fn induced_dual_first(m: &FieldJet, c: &FieldJet) -> Result<(DMatrix<f64>, FieldJet)> {
    let d = m.dim();
    let dm = m.first.as_ref().expect("metric jet lacks first partials");
    let dc = c.first.as_ref().expect("cometric jet lacks first partials");
    let cm = &c.value * &m.value;
    let mut n = &m.value * &cm;
    n = (&n + n.transpose()) * 0.5;
    let h = spd_inverse(&n).ok_or(Error::DegenerateInducedMetric)?;
    let mc = &m.value * &c.value;
    let mut dh = Tensor3::zeros(d);
    let mut dn = DMatrix::zeros(d, d);
    for k in 0..d {
        // ∂N = ∂M (ÑM) + M ∂Ñ M + (MÑ) ∂M
        for i in 0..d {
            for j in 0..d {
                let mut s = 0.0;
                for a in 0..d {
                    s += dm[[k, i, a]] * cm[(a, j)] + mc[(i, a)] * dm[[k, a, j]];
                    let mut t = 0.0;
                    for b in 0..d {
                        t += dc[[k, a, b]] * m.value[(b, j)];
                    }
                    s += m.value[(i, a)] * t;
                }
                dn[(i, j)] = s;
            }
        }
        let hdnh = &h * &dn * &h;
        for i in 0..d {
            for j in 0..d {
                dh[[k, i, j]] = -0.5 * (hdnh[(i, j)] + hdnh[(j, i)]);
            }
        }
    }
    Ok((
        n,
        FieldJet {
            value: h,
            first: Some(dh),
            second: None,
        },
    ))
}

impl LocalGeometry {
    pub fn evaluate(metric: &TensorField, cometric: &TensorField, q: &[f64]) -> Result<Self> {
        let m = metric.jet(q, Order::Second)?;
        let c = cometric.jet(q, Order::First)?;
        let (gamma, dgamma) = christoffel_with_partials(&m, q)?;
        let curvature = curvature_from_christoffel(&gamma, &dgamma);
        let (induced, h) = induced_dual_first(&m, &c)?;
        let compatibility = compatibility_from_jet(&h, &gamma);
        Ok(Self {
            induced,
            metric: m.value,
            cometric: c.value,
            hstar: h.value,
            christoffel: gamma,
            curvature,
            compatibility,
        })
    }

    pub fn dim(&self) -> usize {
        self.metric.nrows()
    }

    /// `Γ^k_ij x^i y^j`.
    pub fn gamma_contract(&self, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
        gamma_contract(&self.christoffel, x, y)
    }
}

/// `Γ^k_ij x^i y^j`.
pub fn gamma_contract(gamma: &Tensor3, x: &DVector<f64>, y: &DVector<f64>) -> DVector<f64> {
    let d = gamma.dim();
    DVector::from_fn(d, |k, _| {
        let mut s = 0.0;
        for i in 0..d {
            for j in 0..d {
                s += gamma[[k, i, j]] * x[i] * y[j];
            }
        }
        s
    })
}

/// Dual-connection derivative correction for a covector:
/// `(Γ^j_ki v^k w_j)_i`.
pub fn gamma_covector(gamma: &Tensor3, v: &DVector<f64>, w: &DVector<f64>) -> DVector<f64> {
    let d = gamma.dim();
    DVector::from_fn(d, |i, _| {
        let mut s = 0.0;
        for j in 0..d {
            for k in 0..d {
                s += gamma[[j, k, i]] * v[k] * w[j];
            }
        }
        s
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_4};

    fn sphere_metric() -> TensorField {
        TensorField::analytic(
            2,
            "sphere",
            |q| {
                Ok(DMatrix::from_row_slice(
                    2,
                    2,
                    &[q[1].cos().powi(2), 0.0, 0.0, 1.0],
                ))
            },
            |q| {
                let mut t = Tensor3::zeros(2);
                t[[1, 0, 0]] = -(2.0 * q[1]).sin();
                Ok(t)
            },
            |q| {
                let mut t = Tensor4::zeros(2);
                t[[1, 1, 0, 0]] = -2.0 * (2.0 * q[1]).cos();
                Ok(t)
            },
        )
    }

    fn sphere_values_only() -> TensorField {
        TensorField::from_fn(2, "sphere (values)", |q| {
            Ok(DMatrix::from_row_slice(
                2,
                2,
                &[q[1].cos().powi(2), 0.0, 0.0, 1.0],
            ))
        })
    }

    #[test]
    fn flat_christoffel_vanishes() {
        let g = christoffel(&TensorField::identity(3, "flat"), &[0.3, -1.0, 2.0]).unwrap();
        assert_eq!(g.max_abs(), 0.0);
        assert_eq!(
            curvature(&TensorField::identity(2, "flat"), &[1.0, 2.0])
                .unwrap()
                .max_abs(),
            0.0
        );
    }

    #[test]
    fn sphere_christoffel_at_45_degrees() {
        let g = christoffel(&sphere_metric(), &[0.0, FRAC_PI_4]).unwrap();
        assert_relative_eq!(g[[0, 0, 1]], -1.0, epsilon = 1e-15);
        assert_relative_eq!(g[[0, 1, 0]], -1.0, epsilon = 1e-15);
        assert_relative_eq!(g[[1, 0, 0]], 0.5, epsilon = 1e-15);
        for (k, i, j) in [(0, 0, 0), (0, 1, 1), (1, 0, 1), (1, 1, 0), (1, 1, 1)] {
            assert_eq!(g[[k, i, j]], 0.0);
        }
    }

    #[test]
    fn sphere_christoffel_at_equator() {
        assert!(
            christoffel(&sphere_metric(), &[0.0, 0.0])
                .unwrap()
                .max_abs()
                < 1e-16
        );
    }

    #[test]
    fn sphere_has_unit_curvature() {
        let k = sectional_curvature(&sphere_metric(), &[0.0, FRAC_PI_4]).unwrap();
        assert_relative_eq!(k, 1.0, epsilon = 1e-12);
        // <R(e1, e2) e2, e1> / (g11 g22)
        let r = curvature(&sphere_metric(), &[0.0, FRAC_PI_4]).unwrap();
        let m = sphere_metric().value(&[0.0, FRAC_PI_4]).unwrap();
        let r1212: f64 = (0..2).map(|l| m[(0, l)] * r[[l, 0, 1, 1]]).sum();
        assert_relative_eq!(r1212 / (m[(0, 0)] * m[(1, 1)]), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn finite_difference_curvature_close_to_analytic() {
        let q = [0.2, 0.6];
        let exact = curvature(&sphere_metric(), &q).unwrap();
        let approx = curvature(&sphere_values_only(), &q).unwrap();
        assert!(
            exact.max_abs_diff(&approx) < 1e-5,
            "{}",
            exact.max_abs_diff(&approx)
        );
    }

    #[test]
    fn induced_and_dual() {
        let m = DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 1.0]);
        let n = induced_metric_matrix(&m, &DMatrix::identity(2, 2));
        assert_eq!(n, DMatrix::from_row_slice(2, 2, &[0.25, 0.0, 0.0, 1.0]));
        let minv = spd_inverse(&m).unwrap();
        assert_relative_eq!(induced_metric_matrix(&m, &minv), m, epsilon = 1e-15);

        let c = FRAC_PI_3.cos().powi(4);
        let h = dual_cometric(&DMatrix::from_row_slice(2, 2, &[c, 0.0, 0.0, 1.0])).unwrap();
        assert_relative_eq!(
            h,
            DMatrix::from_row_slice(2, 2, &[16.0, 0.0, 0.0, 1.0]),
            epsilon = 1e-12
        );
        let h = dual_cometric(&DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 1.0])).unwrap();
        assert_relative_eq!(
            h,
            DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 2.0]),
            epsilon = 1e-14
        );
        assert_eq!(
            dual_cometric(&DMatrix::identity(3, 3)).unwrap(),
            DMatrix::identity(3, 3)
        );
        assert_eq!(
            dual_cometric(&DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0])),
            Err(Error::DegenerateInducedMetric)
        );
    }

    #[test]
    fn compatibility_of_quadratic_cometric() {
        let hstar = TensorField::analytic(
            2,
            "h*",
            |q| {
                Ok(DMatrix::from_row_slice(
                    2,
                    2,
                    &[1.0 / (1.0 + 10.0 * q[1] * q[1]), 0.0, 0.0, 1.0],
                ))
            },
            |q| {
                let mut t = Tensor3::zeros(2);
                let s = 1.0 + 10.0 * q[1] * q[1];
                t[[1, 0, 0]] = -20.0 * q[1] / (s * s);
                Ok(t)
            },
            |_| Ok(Tensor4::zeros(2)),
        );
        let tau =
            compatibility_tensor(&hstar, &TensorField::identity(2, "flat"), &[0.0, 1.0]).unwrap();
        assert_relative_eq!(tau[[1, 0, 0]], -20.0 / 121.0, epsilon = 1e-15);
        let mut rest = tau.clone();
        rest[[1, 0, 0]] = 0.0;
        assert_eq!(rest.max_abs(), 0.0);
    }

    #[test]
    fn compatibility_vanishes_for_dual_metric() {
        let m = sphere_metric();
        let tau = compatibility_tensor(&m.inverse(), &m, &[0.4, -0.7]).unwrap();
        assert!(tau.max_abs() < 1e-12);
        let flat = TensorField::identity(2, "flat");
        let tau = compatibility_tensor(
            &TensorField::constant(DMatrix::identity(2, 2) * 3.0, "c").unwrap(),
            &flat,
            &[1.0, 1.0],
        )
        .unwrap();
        assert_eq!(tau.max_abs(), 0.0);
    }

    #[test]
    fn induced_dual_field_matches_pointwise_inverse() {
        let m = sphere_metric();
        let c = TensorField::identity(2, "I");
        let h = TensorField::induced_dual(&m, &c);
        let q = [0.1, 0.5];
        let jet = h.jet(&q, Order::Second).unwrap();
        let fd1 = h.fd_first(&q).unwrap();
        assert!(jet.first.as_ref().unwrap().max_abs_diff(&fd1) < 1e-8);
        let c4 = (0.5f64).cos().powi(4);
        assert_relative_eq!(jet.value[(0, 0)], 1.0 / c4, epsilon = 1e-12);
        let values_only = TensorField::from_fn(2, "h values", move |q| h.value(q));
        let fd2 = values_only.fd_second(&q).unwrap();
        assert!(jet.second.as_ref().unwrap().max_abs_diff(&fd2) < 1e-5);
    }

    #[test]
    fn mass_matrix_examples() {
        let id = DMatrix::identity(2, 2);
        assert_eq!(mass_matrix_from_jacobians(&[id.clone()], None).unwrap(), id);
        let (l, ell, mass) = (1.3, 0.7, 2.5);
        let j = DMatrix::from_row_slice(2, 2, &[-l, 0.0, ell, ell]);
        let m = mass_matrix_from_jacobians(&[j], Some(&[mass])).unwrap();
        let expect =
            DMatrix::from_row_slice(2, 2, &[l * l + ell * ell, ell * ell, ell * ell, ell * ell])
                * mass;
        assert_relative_eq!(m, expect, epsilon = 1e-14);
        // sphere embedding (cosφ cosλ, cosφ sinλ, sinφ)
        let (lam, phi) = (0.3_f64, 0.8_f64);
        let j = DMatrix::from_row_slice(
            3,
            2,
            &[
                -phi.cos() * lam.sin(),
                -phi.sin() * lam.cos(),
                phi.cos() * lam.cos(),
                -phi.sin() * lam.sin(),
                0.0,
                phi.cos(),
            ],
        );
        let m = mass_matrix_from_jacobians(&[j], None).unwrap();
        assert_relative_eq!(
            m,
            DMatrix::from_row_slice(2, 2, &[phi.cos().powi(2), 0.0, 0.0, 1.0]),
            epsilon = 1e-15
        );
        let bad = [DMatrix::identity(2, 2), DMatrix::identity(3, 3)];
        assert!(matches!(
            mass_matrix_from_jacobians(&bad, None),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn torque_cometric_examples() {
        let t = torque_cometric(&[1.0, 1.0]).unwrap();
        assert_eq!(t.value(&[5.0, -2.0]).unwrap(), DMatrix::identity(2, 2));
        let t = torque_cometric(&[2.0, 3.0]).unwrap();
        let n = t.value(&[0.0, 0.0]).unwrap();
        assert_eq!(n, DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 3.0]));
        assert_eq!(
            t.jet(&[0.0, 0.0], Order::Second)
                .unwrap()
                .first
                .unwrap()
                .max_abs(),
            0.0
        );
        let f = DVector::from_column_slice(&[1.0, 2.0]);
        assert_eq!((f.transpose() * &n * &f)[(0, 0)], 14.0);
        assert_eq!(
            torque_cometric(&[1.0, 0.0]).unwrap_err(),
            Error::NonPositiveWeight {
                index: 1,
                value: 0.0
            }
        );
    }

    #[test]
    fn pullback_examples() {
        let id = DMatrix::identity(2, 2);
        assert_eq!(pullback_cometric(&id, &id).unwrap(), id);
        let jt = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 1.0]);
        assert_eq!(
            pullback_cometric(&id, &jt).unwrap(),
            DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 1.0])
        );
        let n = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 3.0]);
        let j = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]);
        assert_eq!(
            pullback_cometric(&n, &j).unwrap(),
            DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 12.0])
        );
        let singular = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert_eq!(
            pullback_cometric(&id, &singular),
            Err(Error::SingularJacobian)
        );
    }

    #[test]
    fn indicatrix_examples() {
        let pts = indicatrix_samples(&DMatrix::identity(2, 2), 4).unwrap();
        let expect = [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]];
        for (p, e) in pts.iter().zip(expect) {
            assert_eq!(p.as_slice(), &e);
        }
        let pts =
            indicatrix_samples(&DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 1.0]), 4).unwrap();
        let expect = [[0.5, 0.0], [0.0, 1.0], [-0.5, 0.0], [0.0, -1.0]];
        for (p, e) in pts.iter().zip(expect) {
            assert_eq!(p.as_slice(), &e);
        }
        let pts =
            indicatrix_samples(&DMatrix::from_row_slice(2, 2, &[0.25, 0.0, 0.0, 1.0]), 2).unwrap();
        assert_eq!(pts[0].as_slice(), &[2.0, 0.0]);
        assert!(
            indicatrix_samples(&DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]), 4).is_err()
        );
    }

    #[test]
    fn rejects_asymmetric_and_indefinite_values() {
        let f = TensorField::from_fn(2, "skew", |_| {
            Ok(DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]))
        });
        assert!(matches!(
            f.value(&[0.0, 0.0]),
            Err(Error::NotSymmetric { .. })
        ));
        let f = TensorField::from_fn(2, "indef", |_| {
            Ok(DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]))
        });
        assert!(matches!(
            f.value(&[0.0, 0.0]),
            Err(Error::NotPositiveDefinite { .. })
        ));
        assert!(f.allow_indefinite().value(&[0.0, 0.0]).is_ok());
    }

    #[test]
    fn local_geometry_bundle() {
        let m = sphere_metric();
        let g = LocalGeometry::evaluate(&m, &m.inverse(), &[0.0, FRAC_PI_2 / 3.0]).unwrap();
        assert!(g.compatibility.max_abs() < 1e-12);
        assert_relative_eq!(g.induced, g.metric, epsilon = 1e-14);
        assert_relative_eq!(
            &g.hstar * &g.induced,
            DMatrix::identity(2, 2),
            epsilon = 1e-12
        );
    }
}
