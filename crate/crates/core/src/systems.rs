//! Built-in example systems and user-defined systems from expressions.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::expr::{parse_expression, Bindings, Expression};
use crate::geometry::{torque_cometric, FieldJet, FieldSource, LocalGeometry, Order, TensorField};
use crate::tensor::{Tensor3, Tensor4};

/// Names accepted by [`builtin`].
pub const BUILTIN_NAMES: [&str; 6] = [
    "flat_quadratic",
    "sphere_dual",
    "sphere_torque",
    "torus_torque",
    "twolink_serial",
    "twolink_parallel",
];

const POLE_MARGIN: f64 = 1e-3;

/// Open constraint `lower < coefficients · q < upper`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearBound {
    pub coefficients: Vec<f64>,
    pub lower: f64,
    pub upper: f64,
}

impl LinearBound {
    fn coordinate(d: usize, index: usize, lower: f64, upper: f64) -> Self {
        let mut coefficients = vec![0.0; d];
        coefficients[index] = 1.0;
        Self {
            coefficients,
            lower,
            upper,
        }
    }

    pub fn contains(&self, q: &[f64]) -> bool {
        let s: f64 = self.coefficients.iter().zip(q).map(|(c, x)| c * x).sum();
        s > self.lower && s < self.upper
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chart {
    pub coordinates: Vec<String>,
    /// Periodicity is informational; problems are posed on the universal cover.
    pub periodic: Vec<bool>,
    pub bounds: Vec<LinearBound>,
    /// Box used for random sampling and probe grids, inside the domain.
    pub sample_box: Vec<(f64, f64)>,
}

impl Chart {
    pub fn dim(&self) -> usize {
        self.coordinates.len()
    }

    pub fn contains(&self, q: &[f64]) -> bool {
        q.len() == self.dim()
            && q.iter().all(|x| x.is_finite())
            && self.bounds.iter().all(|b| b.contains(q))
    }
}

#[derive(Debug, Clone)]
pub struct SystemDefinition {
    pub name: String,
    pub metric: TensorField,
    pub cometric: TensorField,
    pub params: BTreeMap<String, f64>,
    pub chart: Chart,
}

impl SystemDefinition {
    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    pub fn check_point(&self, q: &[f64]) -> Result<()> {
        if q.len() != self.dim() {
            return Err(Error::Dimension(format!(
                "`{}` has {} coordinates, got a point with {}",
                self.name,
                self.dim(),
                q.len()
            )));
        }
        if !self.chart.contains(q) {
            return Err(Error::OutOfDomain {
                system: self.name.clone(),
                point: q.to_vec(),
            });
        }
        Ok(())
    }

    /// All tensor data at `q`, after a domain check.
    pub fn geometry(&self, q: &[f64]) -> Result<LocalGeometry> {
        self.check_point(q)?;
        LocalGeometry::evaluate(&self.metric, &self.cometric, q)
    }

    /// The dual cometric `h* = (M Ñ M)⁻¹` as a field.
    pub fn induced_dual(&self) -> TensorField {
        TensorField::induced_dual(&self.metric, &self.cometric)
    }

    pub fn with_cometric(&self, cometric: TensorField, suffix: &str) -> Self {
        Self {
            name: format!("{}{suffix}", self.name),
            cometric,
            ..self.clone()
        }
    }

    /// The same system with `Ñ = M⁻¹`.
    pub fn with_dual_cometric(&self) -> Self {
        self.with_cometric(self.metric.inverse(), "+dual")
    }

    /// Cometric blended from `M⁻¹` (s = 0) to the system's own (s = 1).
    pub fn blended_cometric(&self, s: f64) -> Self {
        if s == 1.0 {
            return self.clone();
        }
        let blended = TensorField::blend(&self.metric.inverse(), &self.cometric, s);
        self.with_cometric(blended, &format!("@{s}"))
    }
}

fn take_params(
    name: &str,
    given: &BTreeMap<String, f64>,
    defaults: &[(&str, f64)],
) -> Result<BTreeMap<String, f64>> {
    let mut out: BTreeMap<String, f64> =
        defaults.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    for (k, v) in given {
        if !out.contains_key(k) {
            let known: Vec<&str> = defaults.iter().map(|(k, _)| *k).collect();
            return Err(Error::InvalidParameter(format!(
                "`{name}` has no parameter `{k}` (known: {})",
                known.join(", ")
            )));
        }
        if !v.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "`{k}` must be finite, got {v}"
            )));
        }
        out.insert(k.clone(), *v);
    }
    Ok(out)
}

fn require_positive(params: &BTreeMap<String, f64>, keys: &[&str]) -> Result<()> {
    for k in keys {
        if params[*k] <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "`{k}` must be positive, got {}",
                params[*k]
            )));
        }
    }
    Ok(())
}

fn diag2(a: f64, b: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[a, 0.0, 0.0, b])
}

fn sym2(a: f64, b: f64, c: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[a, b, b, c])
}

/// A 2×2 field whose only varying entry is `[0][0]`, depending on
/// coordinate `axis` through `(f, f', f'')`.
fn single_entry_field<F>(label: &str, axis: usize, constant_11: f64, f: F) -> TensorField
where
    F: Fn(f64) -> (f64, f64, f64) + Send + Sync + Clone + 'static,
{
    let (f0, f1, f2) = (f.clone(), f.clone(), f);
    TensorField::analytic(
        2,
        label,
        move |q| Ok(diag2(f0(q[axis]).0, constant_11)),
        move |q| {
            let mut t = Tensor3::zeros(2);
            t[[axis, 0, 0]] = f1(q[axis]).1;
            Ok(t)
        },
        move |q| {
            let mut t = Tensor4::zeros(2);
            t[[axis, axis, 0, 0]] = f2(q[axis]).2;
            Ok(t)
        },
    )
}

fn sphere_metric() -> TensorField {
    single_entry_field("sphere metric", 1, 1.0, |phi: f64| {
        let c = phi.cos();
        (c * c, -(2.0 * phi).sin(), -2.0 * (2.0 * phi).cos())
    })
}

fn sphere_chart() -> Chart {
    Chart {
        coordinates: vec!["lambda".into(), "phi".into()],
        periodic: vec![true, false],
        bounds: vec![LinearBound::coordinate(
            2,
            1,
            -FRAC_PI_2 + POLE_MARGIN,
            FRAC_PI_2 - POLE_MARGIN,
        )],
        sample_box: vec![(-PI, PI), (-1.2, 1.2)],
    }
}

/// One of the catalogued example systems.
///
/// | name | parameters (defaults) |
/// |---|---|
/// | `flat_quadratic` | `c` (10) |
/// | `sphere_dual` | none |
/// | `sphere_torque` | `k1`, `k2` (1) |
/// | `torus_torque` | `l` (2), `k1`, `k2` (1) |
/// | `twolink_serial`, `twolink_parallel` | `L1`, `L2`, `m`, `k1`, `k2` (1) |
pub fn builtin(name: &str, params: &BTreeMap<String, f64>) -> Result<SystemDefinition> {
    match name {
        "flat_quadratic" => {
            let p = take_params(name, params, &[("c", 10.0)])?;
            let c = p["c"];
            if c < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "`c` must be nonnegative, got {c}"
                )));
            }
            let cometric = single_entry_field("quadratic cometric", 1, 1.0, move |y: f64| {
                (1.0 + c * y * y, 2.0 * c * y, 2.0 * c)
            });
            Ok(SystemDefinition {
                name: name.into(),
                metric: TensorField::identity(2, "flat metric"),
                cometric,
                params: p,
                chart: Chart {
                    coordinates: vec!["x".into(), "y".into()],
                    periodic: vec![false, false],
                    bounds: vec![],
                    sample_box: vec![(-2.0, 2.0), (-1.5, 1.5)],
                },
            })
        }
        "sphere_dual" => {
            let p = take_params(name, params, &[])?;
            let metric = sphere_metric();
            Ok(SystemDefinition {
                name: name.into(),
                cometric: metric.inverse(),
                metric,
                params: p,
                chart: sphere_chart(),
            })
        }
        "sphere_torque" => {
            let p = take_params(name, params, &[("k1", 1.0), ("k2", 1.0)])?;
            Ok(SystemDefinition {
                name: name.into(),
                metric: sphere_metric(),
                cometric: torque_cometric(&[p["k1"], p["k2"]]).map_err(weight_error)?,
                params: p,
                chart: sphere_chart(),
            })
        }
        "torus_torque" => {
            let p = take_params(name, params, &[("l", 2.0), ("k1", 1.0), ("k2", 1.0)])?;
            let l = p["l"];
            if l <= 1.0 {
                return Err(Error::InvalidParameter(format!(
                    "torus requires `l` > 1, got {l}"
                )));
            }
            let metric = single_entry_field("torus metric", 1, 1.0, move |phi: f64| {
                let (s, c) = phi.sin_cos();
                let r = l + c;
                (r * r, -2.0 * r * s, 2.0 * s * s - 2.0 * r * c)
            });
            Ok(SystemDefinition {
                name: name.into(),
                metric,
                cometric: torque_cometric(&[p["k1"], p["k2"]]).map_err(weight_error)?,
                params: p,
                chart: Chart {
                    coordinates: vec!["theta".into(), "phi".into()],
                    periodic: vec![true, true],
                    bounds: vec![],
                    sample_box: vec![(-PI, PI), (-PI, PI)],
                },
            })
        }
        "twolink_serial" | "twolink_parallel" => {
            let p = take_params(
                name,
                params,
                &[
                    ("L1", 1.0),
                    ("L2", 1.0),
                    ("m", 1.0),
                    ("k1", 1.0),
                    ("k2", 1.0),
                ],
            )?;
            require_positive(&p, &["L1", "L2", "m"])?;
            let serial = name == "twolink_serial";
            let metric = if serial {
                serial_arm_metric(p["L1"], p["L2"], p["m"])
            } else {
                parallel_arm_metric(p["L1"], p["L2"], p["m"])
            };
            // elbow angle kept strictly inside (-π, 0), away from the
            // straight-arm singularities
            let elbow = if serial {
                vec![0.0, 1.0]
            } else {
                vec![-1.0, 1.0]
            };
            let chart = Chart {
                coordinates: if serial {
                    vec!["alpha1".into(), "alpha2".into()]
                } else {
                    vec!["beta1".into(), "beta2".into()]
                },
                periodic: vec![true, true],
                bounds: vec![LinearBound {
                    coefficients: elbow,
                    lower: -PI + POLE_MARGIN,
                    upper: -POLE_MARGIN,
                }],
                sample_box: if serial {
                    vec![(0.5, 2.5), (-2.4, -0.6)]
                } else {
                    vec![(1.2, 2.0), (-0.6, 0.4)]
                },
            };
            Ok(SystemDefinition {
                name: name.into(),
                metric,
                cometric: torque_cometric(&[p["k1"], p["k2"]]).map_err(weight_error)?,
                params: p,
                chart,
            })
        }
        other => Err(Error::UnknownSystem(format!(
            "{other} (available: {})",
            BUILTIN_NAMES.join(", ")
        ))),
    }
}

fn weight_error(e: Error) -> Error {
    match e {
        Error::NonPositiveWeight { index, value } => {
            Error::InvalidParameter(format!("`k{}` must be positive, got {value}", index + 1))
        }
        other => other,
    }
}

/// Joint-angle chart of a planar arm with a point mass at the distal end.
fn serial_arm_metric(l1: f64, l2: f64, m: f64) -> TensorField {
    let value = move |q: &[f64]| {
        let c = q[1].cos();
        Ok(sym2(
            m * (l1 * l1 + l2 * l2 + 2.0 * l1 * l2 * c),
            m * (l2 * l2 + l1 * l2 * c),
            m * l2 * l2,
        ))
    };
    let first = move |q: &[f64]| {
        let s = q[1].sin();
        let mut t = Tensor3::zeros(2);
        t[[1, 0, 0]] = -2.0 * m * l1 * l2 * s;
        t[[1, 0, 1]] = -m * l1 * l2 * s;
        t[[1, 1, 0]] = -m * l1 * l2 * s;
        Ok(t)
    };
    let second = move |q: &[f64]| {
        let c = q[1].cos();
        let mut t = Tensor4::zeros(2);
        t[[1, 1, 0, 0]] = -2.0 * m * l1 * l2 * c;
        t[[1, 1, 0, 1]] = -m * l1 * l2 * c;
        t[[1, 1, 1, 0]] = -m * l1 * l2 * c;
        Ok(t)
    };
    TensorField::analytic(2, "serial arm metric", value, first, second)
}

/// Absolute-link-angle chart of the same arm.
fn parallel_arm_metric(l1: f64, l2: f64, m: f64) -> TensorField {
    let k = m * l1 * l2;
    let value = move |q: &[f64]| Ok(sym2(m * l1 * l1, k * (q[0] - q[1]).cos(), m * l2 * l2));
    let first = move |q: &[f64]| {
        let s = (q[0] - q[1]).sin();
        let mut t = Tensor3::zeros(2);
        for (axis, sign) in [(0, -1.0), (1, 1.0)] {
            t[[axis, 0, 1]] = sign * k * s;
            t[[axis, 1, 0]] = sign * k * s;
        }
        Ok(t)
    };
    let second = move |q: &[f64]| {
        let c = (q[0] - q[1]).cos();
        let mut t = Tensor4::zeros(2);
        for (a, b, sign) in [(0, 0, -1.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, -1.0)] {
            t[[a, b, 0, 1]] = sign * k * c;
            t[[a, b, 1, 0]] = sign * k * c;
        }
        Ok(t)
    };
    TensorField::analytic(2, "parallel arm metric", value, first, second)
}

/// Serial-arm jacobian of the distal point, `∂(x, y)/∂(α1, α2)`.
pub fn serial_arm_jacobian(l1: f64, l2: f64, alpha: &[f64]) -> DMatrix<f64> {
    let (s1, c1) = alpha[0].sin_cos();
    let (s12, c12) = (alpha[0] + alpha[1]).sin_cos();
    DMatrix::from_row_slice(
        2,
        2,
        &[-l1 * s1 - l2 * s12, -l2 * s12, l1 * c1 + l2 * c12, l2 * c12],
    )
}

struct ExpressionField {
    dim: usize,
    entries: Vec<Expression>,
    coordinates: Vec<String>,
    params: BTreeMap<String, f64>,
}

impl FieldSource for ExpressionField {
    fn dim(&self) -> usize {
        self.dim
    }

    fn jet(&self, q: &[f64], order: Order) -> Result<FieldJet> {
        let d = self.dim;
        let bindings = Bindings::variables(&self.coordinates, q).with_params(&self.params);
        let mut value = DMatrix::zeros(d, d);
        if order == Order::Value {
            for (n, e) in self.entries.iter().enumerate() {
                value[(n / d, n % d)] = e.eval(&bindings)?;
            }
            return Ok(FieldJet::value_only(value));
        }
        let mut first = Tensor3::zeros(d);
        let mut second = Tensor4::zeros(d);
        for (n, e) in self.entries.iter().enumerate() {
            let (i, j) = (n / d, n % d);
            let p = e.eval_with_partials(&bindings)?;
            value[(i, j)] = p.value;
            for k in 0..d {
                first[[k, i, j]] = p.gradient[k];
                for l in 0..d {
                    second[[k, l, i, j]] = p.hessian[(k, l)];
                }
            }
        }
        Ok(FieldJet {
            value,
            first: Some(first),
            second: (order == Order::Second).then_some(second),
        })
    }
}

/// Expands lower-triangular or full rows of entry strings into a full
/// `d × d` list of parsed expressions.
fn expand_entries(
    d: usize,
    rows: &[Vec<String>],
    what: &str,
) -> Result<Vec<Vec<Option<Expression>>>> {
    if rows.len() != d {
        return Err(Error::Dimension(format!(
            "{what} has {} rows, expected {d}",
            rows.len()
        )));
    }
    let mut grid: Vec<Vec<Option<Expression>>> = vec![vec![None; d]; d];
    for (i, row) in rows.iter().enumerate() {
        if row.len() != d && row.len() != i + 1 {
            return Err(Error::Dimension(format!(
                "{what} row {i} has {} entries, expected {d} (full) or {} (lower triangle)",
                row.len(),
                i + 1
            )));
        }
        for (j, text) in row.iter().enumerate() {
            grid[i][j] = Some(parse_expression(text)?);
        }
    }
    Ok(grid)
}

/// A system whose metric and cometric entries are expressions in the named
/// coordinates and parameters.
///
/// Each row may list all `d` entries or only the lower triangle. When both
/// `(i,j)` and `(j,i)` are given they must agree on the probe grid.
/// Both fields must be positive definite at every probe point.
pub fn system_from_expressions(
    name: &str,
    coordinates: &[String],
    metric: &[Vec<String>],
    cometric: &[Vec<String>],
    params: &BTreeMap<String, f64>,
    sample_box: Option<Vec<(f64, f64)>>,
) -> Result<SystemDefinition> {
    let d = coordinates.len();
    if d == 0 {
        return Err(Error::Dimension(
            "a system needs at least one coordinate".into(),
        ));
    }
    for c in coordinates {
        if params.contains_key(c) {
            return Err(Error::InvalidParameter(format!(
                "`{c}` is both a coordinate and a parameter"
            )));
        }
    }
    let sample_box = sample_box.unwrap_or_else(|| vec![(-1.0, 1.0); d]);
    if sample_box.len() != d || sample_box.iter().any(|(a, b)| !(a <= b)) {
        return Err(Error::Dimension(format!(
            "sample box must have {d} increasing intervals"
        )));
    }
    let probes = probe_grid(&sample_box);
    let build = |rows: &[Vec<String>], what: &str| -> Result<TensorField> {
        let grid = expand_entries(d, rows, what)?;
        let bindings_at = |q: &[f64]| Bindings::variables(coordinates, q).with_params(params);
        let mut entries = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                let e = match (&grid[i][j], &grid[j][i]) {
                    (Some(a), Some(b)) if i < j => {
                        if a.source() != b.source() {
                            for q in &probes {
                                let (x, y) = (a.eval(&bindings_at(q))?, b.eval(&bindings_at(q))?);
                                if (x - y).abs() > 1e-12 * (1.0 + x.abs().max(y.abs())) {
                                    return Err(Error::AsymmetricSpecification { row: i, col: j });
                                }
                            }
                        }
                        a.clone()
                    }
                    (Some(a), _) => a.clone(),
                    (None, Some(b)) => b.clone(),
                    (None, None) => unreachable!("lower triangle is always present"),
                };
                entries.push(e);
            }
        }
        let field = TensorField::from_source(
            Arc::new(ExpressionField {
                dim: d,
                entries,
                coordinates: coordinates.to_vec(),
                params: params.clone(),
            }),
            true,
            format!("{what} of `{name}`"),
        );
        for q in &probes {
            field.value(q)?;
        }
        Ok(field)
    };
    let metric = build(metric, "metric")?;
    let cometric = build(cometric, "cometric")?;
    Ok(SystemDefinition {
        name: name.into(),
        metric,
        cometric,
        params: params.clone(),
        chart: Chart {
            coordinates: coordinates.to_vec(),
            periodic: vec![false; d],
            bounds: vec![],
            sample_box,
        },
    })
}

/// Tensor grid over a box: 5 points per axis up to d = 3, 3 per axis above.
fn probe_grid(bx: &[(f64, f64)]) -> Vec<Vec<f64>> {
    let per_axis = if bx.len() <= 3 { 5 } else { 3 };
    let mut out = vec![vec![]];
    for (lo, hi) in bx {
        let mut next = Vec::new();
        for p in &out {
            for s in 0..per_axis {
                let mut p = p.clone();
                p.push(lo + (hi - lo) * s as f64 / (per_axis - 1) as f64);
                next.push(p);
            }
        }
        out = next;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{induced_metric_matrix, pullback_cometric, pullback_metric, spd_inverse};
    use approx::assert_relative_eq;

    fn none() -> BTreeMap<String, f64> {
        BTreeMap::new()
    }

    fn rows(r: &[&[&str]]) -> Vec<Vec<String>> {
        r.iter()
            .map(|row| row.iter().map(|s| s.to_string()).collect())
            .collect()
    }

    #[test]
    fn sphere_torque_at_equator_is_identity() {
        let s = builtin("sphere_torque", &none()).unwrap();
        let g = s.geometry(&[0.3, 0.0]).unwrap();
        assert_eq!(g.metric, DMatrix::identity(2, 2));
        assert_eq!(g.induced, DMatrix::identity(2, 2));
    }

    #[test]
    fn serial_arm_at_illustrated_configuration() {
        let p: BTreeMap<String, f64> = [("L1", 1.5), ("L2", 0.8), ("m", 2.0)]
            .iter()
            .map(|(k, v)| (k.to_string(), *v))
            .collect();
        let s = builtin("twolink_serial", &p).unwrap();
        let (l, ell, m) = (1.5, 0.8, 2.0);
        let q = [FRAC_PI_2, -FRAC_PI_2];
        let mm = s.metric.value(&q).unwrap();
        let expect = sym2(l * l + ell * ell, ell * ell, ell * ell) * m;
        assert!((&mm - &expect).amax() <= 1e-12);
        let inv = spd_inverse(&mm).unwrap();
        let expect_inv = sym2(1.0, -1.0, (l * l + ell * ell) / (ell * ell)) / (m * l * l);
        assert!((&inv - &expect_inv).amax() <= 1e-12);
    }

    #[test]
    fn torus_at_outer_equator() {
        let s = builtin("torus_torque", &none()).unwrap();
        let g = s.geometry(&[0.0, 0.0]).unwrap();
        assert_eq!(g.metric, diag2(9.0, 1.0));
        assert_eq!(g.induced, diag2(81.0, 1.0));
    }

    #[test]
    fn parameter_validation() {
        let bad = |name: &str, k: &str, v: f64| {
            let p = [(k.to_string(), v)].into_iter().collect();
            builtin(name, &p).unwrap_err()
        };
        assert!(matches!(
            bad("torus_torque", "l", 1.0),
            Error::InvalidParameter(_)
        ));
        assert!(matches!(
            bad("twolink_serial", "m", 0.0),
            Error::InvalidParameter(_)
        ));
        assert!(matches!(
            bad("sphere_torque", "k2", -1.0),
            Error::InvalidParameter(_)
        ));
        assert!(matches!(
            bad("sphere_dual", "k1", 1.0),
            Error::InvalidParameter(_)
        ));
        assert!(matches!(
            builtin("klein_bottle", &none()),
            Err(Error::UnknownSystem(_))
        ));
    }

    #[test]
    fn domain_checks() {
        let s = builtin("sphere_dual", &none()).unwrap();
        assert!(matches!(
            s.geometry(&[0.0, 1.6]),
            Err(Error::OutOfDomain { .. })
        ));
        assert!(matches!(s.geometry(&[0.0]), Err(Error::Dimension(_))));
        let arm = builtin("twolink_parallel", &none()).unwrap();
        assert!(arm.geometry(&[1.5, 0.0]).is_ok());
        assert!(arm.geometry(&[0.0, 1.5]).is_err());
    }

    #[test]
    fn serial_and_parallel_arms_are_one_metric_in_two_charts() {
        let serial = builtin("twolink_serial", &none()).unwrap();
        let parallel = builtin("twolink_parallel", &none()).unwrap();
        let jt = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 1.0]);
        let alpha = [1.1, -0.9];
        let beta = [alpha[0], alpha[0] + alpha[1]];
        let m_serial = serial.metric.value(&alpha).unwrap();
        let m_par = parallel.metric.value(&beta).unwrap();
        assert!((pullback_metric(&m_par, &jt).unwrap() - &m_serial).amax() < 1e-10);
        // induced metrics of the two actuation schemes do not correspond
        let n_serial = induced_metric_matrix(&m_serial, &DMatrix::identity(2, 2));
        let n_par = induced_metric_matrix(&m_par, &DMatrix::identity(2, 2));
        assert!((pullback_metric(&n_par, &jt).unwrap() - &n_serial).amax() > 1e-3);
        // parallel actuation cost seen from joint angles: F_β = J_t⁻ᵀ F_α
        let jinv_t = jt.clone().try_inverse().unwrap().transpose();
        let c = pullback_cometric(&DMatrix::identity(2, 2), &jinv_t).unwrap();
        assert!((c - sym2(1.0, -1.0, 2.0)).amax() < 1e-15);
    }

    #[test]
    fn expression_system_matches_builtin() {
        let coords = vec!["x".to_string(), "y".to_string()];
        let s = system_from_expressions(
            "expr",
            &coords,
            &rows(&[&["1", "0"], &["0", "1"]]),
            &rows(&[&["1+10*y^2", "0"], &["0", "1"]]),
            &none(),
            None,
        )
        .unwrap();
        let b = builtin("flat_quadratic", &none()).unwrap();
        for q in [[0.3, -0.8], [1.0, 1.0], [-1.7, 0.2]] {
            let (a, c) = (s.geometry(&q).unwrap(), b.geometry(&q).unwrap());
            assert!((a.hstar - c.hstar).amax() < 1e-12);
            assert!(a.compatibility.max_abs_diff(&c.compatibility) < 1e-12);
            assert!(a.christoffel.max_abs_diff(&c.christoffel) < 1e-12);
            assert!(a.curvature.max_abs_diff(&c.curvature) < 1e-12);
        }
    }

    #[test]
    fn expression_sphere_with_dual_cometric() {
        let coords = vec!["lambda".to_string(), "phi".to_string()];
        let s = system_from_expressions(
            "sphere",
            &coords,
            &rows(&[&["cos(phi)^2"], &["0", "1"]]),
            &rows(&[&["1/cos(phi)^2"], &["0", "1"]]),
            &none(),
            None,
        )
        .unwrap();
        let g = s.geometry(&[0.2, 0.7]).unwrap();
        assert!(g.compatibility.max_abs() < 1e-12);
        assert_relative_eq!(
            g.curvature[[1, 0, 1, 0]],
            -(0.7f64).cos().powi(2),
            epsilon = 1e-12
        );
    }

    #[test]
    fn one_dimensional_expression_system() {
        let s = system_from_expressions(
            "line",
            &["q".into()],
            &rows(&[&["1"]]),
            &rows(&[&["1"]]),
            &none(),
            None,
        )
        .unwrap();
        assert_eq!(s.dim(), 1);
        assert_eq!(s.geometry(&[0.4]).unwrap().hstar, DMatrix::identity(1, 1));
    }

    #[test]
    fn expression_system_errors() {
        let coords = vec!["x".to_string(), "y".to_string()];
        let asym = system_from_expressions(
            "a",
            &coords,
            &rows(&[&["1", "x"], &["0", "1"]]),
            &rows(&[&["1"], &["0", "1"]]),
            &none(),
            None,
        );
        assert_eq!(
            asym.unwrap_err(),
            Error::AsymmetricSpecification { row: 0, col: 1 }
        );
        let indefinite = system_from_expressions(
            "b",
            &coords,
            &rows(&[&["x"], &["0", "1"]]),
            &rows(&[&["1"], &["0", "1"]]),
            &none(),
            None,
        );
        match indefinite.unwrap_err() {
            Error::NotPositiveDefinite { point, .. } => assert_eq!(point, vec![-1.0, -1.0]),
            e => panic!("{e:?}"),
        }
        let unknown = system_from_expressions(
            "c",
            &coords,
            &rows(&[&["1+k"], &["0", "1"]]),
            &rows(&[&["1"], &["0", "1"]]),
            &none(),
            None,
        );
        assert!(matches!(
            unknown.unwrap_err(),
            Error::UnknownIdentifier { .. }
        ));
        let shape = system_from_expressions(
            "d",
            &coords,
            &rows(&[&["1"]]),
            &rows(&[&["1"]]),
            &none(),
            None,
        );
        assert!(matches!(shape.unwrap_err(), Error::Dimension(_)));
        // equal text in both triangles is accepted without probing
        assert!(system_from_expressions(
            "e",
            &coords,
            &rows(&[&["2", "0.5*x/(1+x^2)"], &["0.5*x/(1+x^2)", "2"]]),
            &rows(&[&["1"], &["0", "1"]]),
            &none(),
            None,
        )
        .is_ok());
    }
}
