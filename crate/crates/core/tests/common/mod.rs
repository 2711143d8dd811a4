#![allow(dead_code)]

use std::collections::BTreeMap;

use biased_spline::hamiltonian::ExtendedState;
use biased_spline::systems::{builtin, SystemDefinition, BUILTIN_NAMES};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn builtins() -> Vec<SystemDefinition> {
    BUILTIN_NAMES
        .iter()
        .map(|n| builtin(n, &BTreeMap::new()).unwrap())
        .collect()
}

pub fn system(name: &str) -> SystemDefinition {
    builtin(name, &BTreeMap::new()).unwrap()
}

/// Uniform point of the sample box that lies in the chart domain.
pub fn random_point(system: &SystemDefinition, rng: &mut ChaCha8Rng) -> Vec<f64> {
    loop {
        let q: Vec<f64> = system
            .chart
            .sample_box
            .iter()
            .map(|&(lo, hi)| rng.random_range(lo..hi))
            .collect();
        if system.chart.contains(&q) {
            return q;
        }
    }
}

pub fn uniform(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> Vec<f64> {
    (0..d)
        .map(|_| scale * rng.random_range(-1.0..1.0))
        .collect()
}

pub fn random_state(
    system: &SystemDefinition,
    rng: &mut ChaCha8Rng,
    costate_scale: f64,
) -> ExtendedState {
    let d = system.dim();
    let q = random_point(system, rng);
    let v = uniform(rng, d, 1.0);
    let a = uniform(rng, d, costate_scale);
    let p = uniform(rng, d, costate_scale);
    ExtendedState::new(&q, &v, &a, &p)
}
