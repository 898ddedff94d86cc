//! Fixtures shared by the criterion benches.

use sobotest_core::{sample_observation, CoefficientArray, MassPlacement, ObservationConfig, TestConfig};

/// `n = 4096, s = 2, t = 1, R = 1, η = 0.2`, cutoff `J = 4`.
pub fn reference_config() -> TestConfig {
    TestConfig::new(4096, 2.0, 1.0, 1.0, 0.2).expect("valid reference config")
}

/// Signal with `‖P_j f‖ = 1/j` spread over every coefficient of `2..=j_max`.
pub fn decaying_signal(j_max: u32) -> CoefficientArray {
    let norms: Vec<f64> = (2..=j_max).map(|j| 1.0 / f64::from(j)).collect();
    CoefficientArray::from_level_norms(&norms, MassPlacement::Uniform).expect("valid norms")
}

pub fn noisy_observation(j_max: u32, n: u64) -> CoefficientArray {
    sample_observation(&decaying_signal(j_max), &ObservationConfig { n, seed: 0, stream_id: 0 })
}
