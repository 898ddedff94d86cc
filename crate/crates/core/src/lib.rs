//! Minimax test for Sobolev regularity in the Gaussian wavelet sequence
//! model.
//!
//! A signal is a block of wavelet coefficients `a_{j,k}`, `j = 2..=j_max`,
//! `k < 2^j`, observed as `â_{j,k} = a_{j,k} + n^{-1/2} ξ_{j,k}`. The test
//! decides whether the signal lies in the Sobolev ball `B_s(R)` or is far,
//! in `L2`, from it, while only assuming regularity `t < s`.
//!
//! ```
//! use sobotest_core::{sample_observation, CoefficientArray, ObservationConfig, RegularityTest, TestConfig};
//!
//! let cfg = TestConfig::new(4096, 2.0, 1.0, 1.0, 0.2).unwrap();
//! let truth = CoefficientArray::zeros(cfg.cutoff().unwrap()).unwrap();
//! let obs = sample_observation(&truth, &ObservationConfig::new(cfg.n, 7, 0).unwrap());
//! let report = RegularityTest::new(&cfg).unwrap().report(&obs).unwrap();
//! println!("{}", report.verdict.as_str());
//! ```

pub mod error;
pub mod geometry;
pub mod harness;
pub mod lower_bound;
pub mod parallel;
pub mod regularity;
pub mod rng;
pub mod sequence;

pub use error::{Error, Result};
pub use geometry::{
    ball_contains, distance_from_level_masses, distance_to_ball, make_geometric_profile, make_two_level_profile, project_onto_ball, transition_index,
    transition_levels, truncation_distances, BallKind, BallSpec, ProjectionResult, DEFAULT_TOL,
};
pub use harness::{
    estimate_rejection_rate, rate_curve, run_experiment, verify_concentration, verify_lemma_jpart2, verify_m_events,
    verify_transition, wilson_interval, CsvMeta, ErrorEstimate, ExperimentResult, ExperimentSpec, HypothesisTag,
    RateCurve, RateCurveSpec, Scenario, TruthGenerator,
};
pub use lower_bound::{
    chi2_divergence_closed_form, chi2_divergence_mc, compute_constants, sample_from_prior, total_error_lower_bound,
    verify_lower_bound, LowerBoundConfig, LowerBoundReport,
};
pub use regularity::{
    build_schedule, check_guarantee_conditions, compute_j, concentration_terms, estimate_m, run_test, test_statistic,
    LevelSchedule, LevelStatistics, RegularityTest, TestConfig, TestReport, Verdict,
};
pub use sequence::{sample_observation, CoefficientArray, MassPlacement, ObservationConfig, MAX_LEVEL, MIN_LEVEL};
