//! Fixed boundary-value problems used for cross-solver comparisons.

use std::collections::BTreeMap;

use crate::error::Result;
use crate::solvers::BoundaryProblem;
use crate::systems::{builtin, system_from_expressions, SystemDefinition};

/// The one-dimensional system with unit metric and cometric.
pub fn flat_line() -> SystemDefinition {
    let one = vec![vec!["1".to_string()]];
    system_from_expressions(
        "flat_line",
        &["q".into()],
        &one,
        &one,
        &BTreeMap::new(),
        None,
    )
    .expect("constant expressions are valid")
}

/// Rest-to-rest move from 0 to 1 on [`flat_line`]; its solution is
/// `3t² − 2t³`.
pub fn hermite_problem() -> BoundaryProblem {
    BoundaryProblem::new(flat_line(), &[0.0], &[0.0], &[1.0], &[0.0])
}

fn sys(name: &str) -> Result<SystemDefinition> {
    builtin(name, &BTreeMap::new())
}

/// One problem per built-in system, named after it.
pub fn benchmark_problems() -> Result<Vec<(String, BoundaryProblem)>> {
    let specs: [(&str, [f64; 2], [f64; 2], [f64; 2], [f64; 2]); 6] = [
        (
            "flat_quadratic",
            [0.0, 1.0],
            [0.0, 0.0],
            [2.0, 1.0],
            [0.0, 0.0],
        ),
        (
            "sphere_dual",
            [0.0, 0.2],
            [0.5, 0.3],
            [1.0, 0.5],
            [0.4, -0.2],
        ),
        (
            "sphere_torque",
            [-0.8, 0.3],
            [1.2, 0.6],
            [0.8, 0.3],
            [1.2, -0.6],
        ),
        (
            "torus_torque",
            [0.0, 0.0],
            [0.3, 0.0],
            [0.5, 0.8],
            [0.0, 0.3],
        ),
        (
            "twolink_serial",
            [1.0, -1.5],
            [0.0, 0.0],
            [2.0, -1.0],
            [0.0, 0.0],
        ),
        (
            "twolink_parallel",
            [1.4, -0.2],
            [0.0, 0.0],
            [1.8, 0.2],
            [0.0, 0.0],
        ),
    ];
    specs
        .iter()
        .map(|(name, q0, v0, qf, vf)| {
            Ok((
                name.to_string(),
                BoundaryProblem::new(sys(name)?, q0, v0, qf, vf),
            ))
        })
        .collect()
}
