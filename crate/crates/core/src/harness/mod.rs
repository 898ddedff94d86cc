//! Replicated Monte-Carlo experiments around the regularity test.
//!
//! Replicate `i` of an experiment observes its truth with noise stream
//! `(seed, i)`, so any scheduler may run replicates in any order and the
//! aggregated counts do not depend on the thread count.

mod lemmas;
mod output;
mod rate;

pub use lemmas::{
    check_jpart2_profile, random_lemma_config, sample_admissible_profile, verify_concentration, verify_lemma_jpart2,
    verify_m_events, verify_transition, ConcentrationRow, ConcentrationTable, JPart2Check, JPart2Report, LemmaTrialFailure,
    MEventRow, TransitionReport,
};
pub use output::{config_hash, CsvMeta};
pub use rate::{fit_log_log_slope, rate_curve, target_slope, RateCurve, RateCurveSpec, RatePoint};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{distance_to_ball, make_geometric_profile, make_two_level_profile, BallSpec, DEFAULT_TOL};
use crate::rng::{keyed_rng, PRIOR_LANE};
use crate::parallel;
use crate::regularity::{RegularityTest, TestConfig, Verdict};
use crate::sequence::{level_len, sample_observation, tail_bound, CoefficientArray, MassPlacement, ObservationConfig, MIN_LEVEL};

/// Levels stored above the test cutoff `J` when a scenario builds its truth.
pub const EXTRA_LEVELS: u32 = 3;
/// Normal quantile of the two-sided 95% Wilson interval.
pub const Z95: f64 = 1.959_963_984_540_054;

/// How the true signal of a scenario is generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TruthGenerator {
    Zero,
    /// One coefficient on `level` with `‖f‖_{B_r} = R`.
    BoundaryNull { level: u32, r: f64 },
    /// `‖P_j f‖ = R / 2^{js}` on every stored level.
    GeometricProfile { radius: f64, s: f64 },
    /// Mass `aR/4^s` on level 2 and `R/2^{Js}` on level `level`.
    TwoLevel { a: f64, radius: f64, s: f64, level: u32 },
    /// Fresh Rademacher draw `±v` on `level` for every replicate.
    PriorDraw { v: f64, level: u32 },
    Custom { truth: CoefficientArray },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HypothesisTag {
    H0,
    H1,
    #[serde(rename = "neither")]
    Neither,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub generator: TruthGenerator,
    pub tag: HypothesisTag,
    #[serde(default)]
    pub placement: MassPlacement,
}

impl Scenario {
    pub fn new(name: impl Into<String>, generator: TruthGenerator, tag: HypothesisTag) -> Self {
        Self { name: name.into(), generator, tag, placement: MassPlacement::First }
    }

    pub fn zero() -> Self {
        Self::new("zero", TruthGenerator::Zero, HypothesisTag::H0)
    }

    /// Null signal with all mass on one coefficient of `level` and
    /// `‖f‖_{B_s} = R`.
    pub fn boundary_null(level: u32, s: f64) -> Self {
        Self::new(format!("boundary_null_j{level}"), TruthGenerator::BoundaryNull { level, r: s }, HypothesisTag::H0)
    }

    pub fn two_level(a: f64, radius: f64, s: f64, level: u32) -> Self {
        Self::new(format!("two_level_a{a}"), TruthGenerator::TwoLevel { a, radius, s, level }, HypothesisTag::H1)
    }

    pub fn geometric(radius: f64, s: f64) -> Self {
        Self::new("geometric", TruthGenerator::GeometricProfile { radius, s }, HypothesisTag::H1)
    }

    pub fn with_placement(mut self, placement: MassPlacement) -> Self {
        self.placement = placement;
        self
    }

    /// Stored levels of the truth: the generator's own extent, at least
    /// `J + EXTRA_LEVELS`.
    fn j_max(&self, cfg: &TestConfig) -> Result<u32> {
        let base = cfg.cutoff()? + EXTRA_LEVELS;
        Ok(match &self.generator {
            TruthGenerator::Custom { truth } => truth.j_max().max(base),
            TruthGenerator::BoundaryNull { level, .. }
            | TruthGenerator::TwoLevel { level, .. }
            | TruthGenerator::PriorDraw { level, .. } => (*level).max(base),
            _ => base,
        })
    }

    /// Truth of replicate `stream` (only prior draws depend on it).
    pub fn truth(&self, cfg: &TestConfig, seed: u64, stream: u64) -> Result<CoefficientArray> {
        let j_max = self.j_max(cfg)?;
        let truth = match &self.generator {
            TruthGenerator::Zero => CoefficientArray::zeros(j_max)?,
            TruthGenerator::BoundaryNull { level, r } => {
                if *level < MIN_LEVEL {
                    return Err(Error::InvalidConfig(format!("boundary_null level {level} < 2")));
                }
                let mut norms = vec![0.0; (j_max - MIN_LEVEL + 1) as usize];
                norms[(level - MIN_LEVEL) as usize] = cfg.radius * (-f64::from(*level) * r).exp2();
                CoefficientArray::from_level_norms(&norms, self.placement)?
            }
            TruthGenerator::GeometricProfile { radius, s } => make_geometric_profile(*radius, *s, j_max, self.placement)?,
            TruthGenerator::TwoLevel { a, radius, s, level } => {
                make_two_level_profile(*a, *radius, *s, *level, self.placement)?.padded(j_max)?
            }
            TruthGenerator::PriorDraw { v, level } => {
                let mut rng = keyed_rng(seed, stream, PRIOR_LANE);
                let levels = (MIN_LEVEL..=j_max)
                    .map(|j| {
                        if j == *level {
                            (0..level_len(j)).map(|_| if rng.random::<bool>() { *v } else { -*v }).collect()
                        } else {
                            vec![0.0; level_len(j)]
                        }
                    })
                    .collect();
                CoefficientArray::new(levels)?
            }
            TruthGenerator::Custom { truth } => truth.padded(j_max)?,
        };
        Ok(truth)
    }

    /// Checks that the truth agrees with the hypothesis tag under `cfg`.
    pub fn validate(&self, cfg: &TestConfig) -> Result<()> {
        cfg.validate()?;
        if let TruthGenerator::PriorDraw { v, level } = &self.generator {
            if !(v.is_finite() && *v > 0.0) || *level < MIN_LEVEL {
                return Err(Error::InvalidConfig(format!("prior_draw needs v > 0 and level >= 2, got ({v}, {level})")));
            }
        }
        let truth = self.truth(cfg, 0, 0)?;
        let ball = BallSpec::ell2(cfg.s, cfg.radius)?;
        match self.tag {
            HypothesisTag::H0 => {
                let norm_sq = truth.sobolev_norm_sq(cfg.s);
                if norm_sq > cfg.radius * cfg.radius * (1.0 + 1e-12) {
                    return Err(Error::InvalidConfig(format!(
                        "scenario '{}' is tagged H0 but ||f||_B_s^2 = {norm_sq:e} > R^2",
                        self.name
                    )));
                }
            }
            HypothesisTag::H1 => {
                if distance_to_ball(&truth, &ball, DEFAULT_TOL)? <= 0.0 {
                    return Err(Error::InvalidConfig(format!("scenario '{}' is tagged H1 but lies in B_s(R)", self.name)));
                }
            }
            HypothesisTag::Neither => {}
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub scenario: Scenario,
    pub config: TestConfig,
    pub replicates: u64,
    pub seed: u64,
    /// Worker threads; `None` uses the global pool. Never affects results.
    #[serde(skip)]
    pub threads: Option<usize>,
}

impl ExperimentSpec {
    pub fn new(scenario: Scenario, config: TestConfig, replicates: u64, seed: u64) -> Self {
        Self { scenario, config, replicates, seed, threads: None }
    }

    pub fn with_threads(mut self, threads: Option<usize>) -> Self {
        self.threads = threads;
        self
    }
}

/// Empirical rejection rate with its 95% Wilson interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorEstimate {
    pub rejection_rate: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
    pub replicates: u64,
    pub rejections: u64,
}

impl ErrorEstimate {
    pub fn from_counts(rejections: u64, replicates: u64) -> Result<Self> {
        let (wilson_low, wilson_high) = wilson_interval(rejections, replicates, Z95)?;
        Ok(Self {
            rejection_rate: rejections as f64 / replicates as f64,
            wilson_low,
            wilson_high,
            replicates,
            rejections,
        })
    }

    /// Half-width of the interval divided by `z`.
    pub fn wilson_sd(&self) -> f64 {
        (self.wilson_high - self.wilson_low) / (2.0 * Z95)
    }
}

/// Wilson score interval for `successes` out of `trials` at normal quantile `z`.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> Result<(f64, f64)> {
    if trials == 0 || successes > trials {
        return Err(Error::InvalidConfig(format!("invalid binomial counts {successes}/{trials}")));
    }
    if !(z.is_finite() && z > 0.0) {
        return Err(Error::InvalidConfig(format!("z = {z} must be positive")));
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    let low = if successes == 0 { 0.0 } else { (center - half).max(0.0) };
    let high = if successes == trials { 1.0 } else { (center + half).min(1.0) };
    Ok((low.min(p), high.max(p)))
}

/// Exceedance count of one cutoff level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelExceedance {
    pub level: u32,
    pub count: u64,
    pub estimate: ErrorEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub spec: ExperimentSpec,
    #[serde(rename = "J")]
    pub cutoff: u32,
    /// Bound on the `L2` mass above the stored levels for signals in
    /// `B_t(R)`, reported for truths stored up to `J + EXTRA_LEVELS`.
    pub tail_bound: f64,
    pub estimate: ErrorEstimate,
    pub levels: Vec<LevelExceedance>,
}

impl ExperimentResult {
    /// For null scenarios, whether the Wilson lower bound of the rejection
    /// rate stays within the type-I budget `η/2`; `None` otherwise.
    pub fn within_type_one_budget(&self) -> Option<bool> {
        (self.spec.scenario.tag == HypothesisTag::H0).then(|| self.estimate.wilson_low <= self.spec.config.eta / 2.0)
    }
}

/// Runs the test on `replicates` independent observations of the scenario.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    if spec.replicates == 0 {
        return Err(Error::InvalidConfig("replicates must be at least 1".into()));
    }
    spec.scenario.validate(&spec.config)?;
    let test = RegularityTest::new(&spec.config)?;
    let cutoff = test.schedule().cutoff;
    let fixed_truth = match spec.scenario.generator {
        TruthGenerator::PriorDraw { .. } => None,
        _ => Some(spec.scenario.truth(&spec.config, spec.seed, 0)?.truncated(cutoff)?),
    };

    let outcomes: Vec<Result<(bool, u64)>> = parallel::install(spec.threads, || {
        parallel::map_indexed(spec.replicates, |i| {
            let truth = match &fixed_truth {
                Some(t) => t.clone(),
                None => spec.scenario.truth(&spec.config, spec.seed, i)?.truncated(cutoff)?,
            };
            // Levels above J never enter the test; the keyed noise makes this
            // identical to observing the full array and truncating.
            let obs = sample_observation(&truth, &ObservationConfig { n: spec.config.n, seed: spec.seed, stream_id: i });
            let stats = test.statistics(&obs)?;
            let mask = stats.iter().enumerate().filter(|(_, s)| s.exceeded).fold(0u64, |m, (idx, _)| m | 1 << idx);
            Ok((mask != 0, mask))
        })
    });

    let mut rejections = 0u64;
    let mut per_level = vec![0u64; (cutoff - MIN_LEVEL + 1) as usize];
    for outcome in outcomes {
        let (reject, mask) = outcome?;
        rejections += u64::from(reject);
        for (idx, count) in per_level.iter_mut().enumerate() {
            *count += mask >> idx & 1;
        }
    }
    let levels = per_level
        .iter()
        .enumerate()
        .map(|(idx, &count)| {
            Ok(LevelExceedance {
                level: MIN_LEVEL + idx as u32,
                count,
                estimate: ErrorEstimate::from_counts(count, spec.replicates)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentResult {
        spec: spec.clone(),
        cutoff,
        tail_bound: tail_bound(spec.config.t, spec.config.radius, cutoff + EXTRA_LEVELS),
        estimate: ErrorEstimate::from_counts(rejections, spec.replicates)?,
        levels,
    })
}

pub fn estimate_rejection_rate(spec: &ExperimentSpec) -> Result<ErrorEstimate> {
    run_experiment(spec).map(|r| r.estimate)
}

/// Verdict of a single test run, for callers that simulate one observation.
pub fn simulate_once(scenario: &Scenario, cfg: &TestConfig, seed: u64, stream: u64) -> Result<Verdict> {
    let test = RegularityTest::new(cfg)?;
    let truth = scenario.truth(cfg, seed, stream)?;
    let obs = sample_observation(&truth, &ObservationConfig { n: cfg.n, seed, stream_id: stream });
    Ok(test.decide(&obs)?.verdict)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn wilson_examples() {
        let (lo, _) = wilson_interval(0, 40, Z95).unwrap();
        assert_eq!(lo, 0.0);
        let (_, hi) = wilson_interval(40, 40, Z95).unwrap();
        assert_eq!(hi, 1.0);
        let (lo, hi) = wilson_interval(50, 100, 1.96).unwrap();
        assert_relative_eq!(0.5 - lo, hi - 0.5, max_relative = 1e-12);
        // textbook value: 50/100 at z = 1.96 gives [0.4038, 0.5962]
        assert!((lo - 0.4038).abs() < 1e-4 && (hi - 0.5962).abs() < 1e-4);
        let (lo, hi) = wilson_interval(1, 1, Z95).unwrap();
        assert!(lo > 0.0 && lo < 1.0 && hi == 1.0);
        assert!(wilson_interval(2, 1, Z95).is_err());
        assert!(wilson_interval(0, 0, Z95).is_err());
    }

    fn cfg() -> TestConfig {
        TestConfig::new(4096, 2.0, 1.0, 1.0, 0.2).unwrap()
    }

    #[test]
    fn scenario_truths() {
        let c = cfg();
        let zero = Scenario::zero().truth(&c, 0, 0).unwrap();
        assert_eq!(zero.j_max(), 4 + EXTRA_LEVELS);
        let b = Scenario::boundary_null(2, c.s).truth(&c, 0, 0).unwrap();
        assert_relative_eq!(b.sobolev_norm_sq(c.s), 1.0, max_relative = 1e-14);
        assert!(Scenario::boundary_null(2, c.s).validate(&c).is_ok());
        assert!(Scenario::boundary_null(2, 1.0).validate(&c).is_err());
        assert!(Scenario::two_level(2.0, 1.0, 2.0, 4).validate(&c).is_ok());
        assert!(Scenario::new("bad", TruthGenerator::Zero, HypothesisTag::H1).validate(&c).is_err());
    }

    #[test]
    fn prior_scenario_draws_vary() {
        let c = cfg();
        let s = Scenario::new("prior", TruthGenerator::PriorDraw { v: 0.1, level: 4 }, HypothesisTag::Neither);
        let a = s.truth(&c, 5, 0).unwrap();
        let b = s.truth(&c, 5, 1).unwrap();
        assert_ne!(a, b);
        assert!(a.level(4).unwrap().iter().all(|x| x.abs() == 0.1));
        assert_eq!(a.level_norm_sq(3).unwrap(), 0.0);
    }

    #[test]
    fn single_replicate_experiment() {
        let spec = ExperimentSpec::new(Scenario::zero(), cfg(), 1, 3);
        let e = estimate_rejection_rate(&spec).unwrap();
        assert!(e.rejection_rate == 0.0 || e.rejection_rate == 1.0);
        assert!(e.wilson_high > e.wilson_low);
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let spec = ExperimentSpec::new(Scenario::two_level(11.0, 1.0, 2.0, 4), cfg(), 400, 11);
        let one = run_experiment(&spec.clone().with_threads(Some(1))).unwrap();
        let many = run_experiment(&spec.with_threads(Some(8))).unwrap();
        assert!(one.estimate.rejections > 0 && one.estimate.rejections < 400);
        assert_eq!((one.estimate, &one.levels), (many.estimate, &many.levels));
    }
}
