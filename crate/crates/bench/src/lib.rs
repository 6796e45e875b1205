//! Shared fixtures for the criterion benches.

use num_complex::Complex64;
use riesz_core::{rng, CoefficientMatrix, GroupSpec, SimConfig, SpectralFunction};

/// Z/3 × T¹ at K = 2: the smallest mixed group, the hot Monte Carlo case.
pub fn mixed_spec() -> GroupSpec {
    GroupSpec::new(vec![3], 1, 2).unwrap()
}

/// T² at K = 8: the power-method workhorse.
pub fn torus_spec() -> GroupSpec {
    GroupSpec::new(vec![], 2, 8).unwrap()
}

pub fn random_function(spec: &GroupSpec, seed: u64) -> SpectralFunction {
    let mut rng = rng::test_rng(seed);
    SpectralFunction::random_mean_zero(spec.clone(), &mut rng)
}

pub fn random_alpha(spec: &GroupSpec, seed: u64) -> CoefficientMatrix {
    let mut rng = rng::test_rng(seed);
    CoefficientMatrix::random(spec.discrete_dims(), spec.torus_dim, &mut rng)
}

pub fn sim_config(horizon_t: f64, dt: f64) -> SimConfig {
    SimConfig { lambda: 2.0, horizon_t, dt, n_paths: 1, master_seed: 9 }
}

pub fn unit() -> Complex64 {
    Complex64::ONE
}
