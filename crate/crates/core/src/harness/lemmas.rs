//! Randomized and Monte-Carlo checks of the lemmas behind the test.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{wilson_interval, Scenario, TruthGenerator, Z95};
use crate::error::{Error, Result};
use crate::geometry::{distance_from_level_masses, transition_index, transition_levels, truncation_distances, BallSpec, DEFAULT_TOL};
use crate::parallel;
use crate::regularity::{build_schedule, concentration_terms, estimate_m, LevelSchedule, TestConfig, LEMMA_A};
use crate::rng::{keyed_rng, PROFILE_LANE};
use crate::sequence::{sample_observation, sobolev_weight, CoefficientArray, MassPlacement, ObservationConfig, MIN_LEVEL};

/// Relative slack on the accumulated-norm inequality, absorbing projection tolerance.
const JPART2_REL_TOL: f64 = 1e-9;
/// Largest cutoff drawn by the random configuration sampler.
const MAX_RANDOM_CUTOFF: u32 = 16;

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    (rng.random_range(lo.ln()..hi.ln())).exp()
}

/// Draws a configuration with `0 < t < s`, cutoff in `2..=16` and a
/// schedule free of overflow.
pub fn random_lemma_config(rng: &mut ChaCha8Rng) -> TestConfig {
    loop {
        let s = rng.random_range(0.25..3.0);
        let t = s * rng.random_range(0.05..0.95);
        let eta = rng.random_range(0.02..0.9);
        let radius = log_uniform(rng, 0.1, 10.0);
        let n = rng.random_range(6.0..48.0f64).exp2().round() as u64;
        let Ok(cfg) = TestConfig::new(n, s, t, radius, eta) else { continue };
        match cfg.cutoff() {
            Ok(j) if j <= MAX_RANDOM_CUTOFF && build_schedule(&cfg).is_ok() => return cfg,
            _ => continue,
        }
    }
}

/// Samples level norms `2^{js}‖P_j f‖` log-uniform in `[10^{-4}R, 10R]`,
/// zeroes random levels, with probability ½ rescales to straddle the ball
/// boundary, then scales up until `dist(P_2^J f) > ρ_J`.
pub fn sample_admissible_profile(cfg: &TestConfig, rho_cutoff: f64, rng: &mut ChaCha8Rng) -> Result<CoefficientArray> {
    let cutoff = cfg.cutoff()?;
    let (s, radius) = (cfg.s, cfg.radius);
    let count = (cutoff - MIN_LEVEL + 1) as usize;
    let mut weighted: Vec<f64> = (0..count).map(|_| log_uniform(rng, 1e-4 * radius, 10.0 * radius)).collect();
    if count > 1 {
        for w in weighted.iter_mut() {
            if rng.random_bool(0.3) {
                *w = 0.0;
            }
        }
        if weighted.iter().all(|&w| w == 0.0) {
            let k = rng.random_range(0..count);
            weighted[k] = log_uniform(rng, 1e-4 * radius, 10.0 * radius);
        }
    }
    if rng.random_bool(0.5) {
        let target = radius * rng.random_range(0.5..2.0);
        let norm = weighted.iter().map(|w| w * w).sum::<f64>().sqrt();
        weighted.iter_mut().for_each(|w| *w *= target / norm);
    }
    let norms: Vec<f64> = weighted
        .iter()
        .enumerate()
        .map(|(i, w)| w / (f64::from(MIN_LEVEL + i as u32) * s).exp2())
        .collect();
    let masses: Vec<f64> = norms.iter().map(|x| x * x).collect();

    let ball = BallSpec::ell2(s, radius)?;
    let dist_at = |lambda: f64| -> Result<f64> {
        let scaled: Vec<f64> = masses.iter().map(|m| lambda * lambda * m).collect();
        distance_from_level_masses(&scaled, &ball, DEFAULT_TOL)
    };
    if dist_at(1.0)? > rho_cutoff {
        return CoefficientArray::from_level_norms(&norms, MassPlacement::First);
    }
    // dist(λf) is increasing in λ once positive, so bisect λ onto a random
    // target in (1.01, 3)·ρ_J.
    let target = rho_cutoff * rng.random_range(1.01..3.0);
    let (mut lo, mut hi) = (1.0, 2.0);
    while dist_at(hi)? < target {
        lo = hi;
        hi *= 2.0;
        if hi > 1e150 {
            return Err(Error::InvalidConfig("could not scale profile beyond rho_J".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if dist_at(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * hi {
            break;
        }
    }
    let scaled: Vec<f64> = norms.iter().map(|x| hi * x).collect();
    CoefficientArray::from_level_norms(&scaled, MassPlacement::First)
}

/// Both sides of the accumulated-norm inequality at one transition level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JPart2Check {
    pub j_star: u32,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Checks `‖P_2^{j*} f‖²_{B_s} ≥ R² + ρM/(2A²) + 4^{j*s}ρ²/(2A²)` at every
/// level where the truncated distance crosses the schedule.
pub fn check_jpart2_profile(truth: &CoefficientArray, schedule: &LevelSchedule) -> Result<Vec<JPart2Check>> {
    let cfg = &schedule.config;
    let ball = BallSpec::ell2(cfg.s, cfg.radius)?;
    let cutoff = schedule.cutoff.min(truth.j_max());
    let dists = truncation_distances(truth, &ball, cutoff, DEFAULT_TOL)?;
    let rho = schedule.rho();
    let masses = truth.level_norms_sq();
    let a2 = 2.0 * LEMMA_A * LEMMA_A;
    transition_levels(&dists, &rho)
        .into_iter()
        .map(|j_star| {
            let head = (MIN_LEVEL..=j_star).map(|j| (sobolev_weight(j, cfg.s), masses[(j - MIN_LEVEL) as usize]));
            let lhs: f64 = head.clone().map(|(w, m)| w * m).sum();
            let m = head.map(|(w, m)| w * m.sqrt()).fold(0.0, f64::max);
            let r = rho[(j_star - MIN_LEVEL) as usize];
            let rhs = cfg.radius * cfg.radius + r * m / a2 + sobolev_weight(j_star, cfg.s) * r * r / a2;
            Ok(JPart2Check { j_star, lhs, rhs, holds: lhs >= rhs * (1.0 - JPART2_REL_TOL) })
        })
        .collect()
}

/// A failed trial, dumped in a form that can be replayed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaTrialFailure {
    pub trial: u64,
    pub config: TestConfig,
    pub truth: CoefficientArray,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JPart2Report {
    pub trials: u64,
    pub seed: u64,
    pub checked_indices: u64,
    /// Number of checked indices per transition level, level 2 first.
    pub level_histogram: Vec<u64>,
    /// Smallest observed `lhs/rhs`.
    pub min_ratio: f64,
    pub violations: Vec<LemmaTrialFailure>,
    pub passed: bool,
}

fn trial_config(fixed: Option<&TestConfig>, rng: &mut ChaCha8Rng) -> Result<(TestConfig, LevelSchedule)> {
    let cfg = match fixed {
        Some(c) => *c,
        None => random_lemma_config(rng),
    };
    let schedule = build_schedule(&cfg)?;
    Ok((cfg, schedule))
}

/// Accumulated-norm inequality over `trials` random admissible profiles. Trial `i` draws from
/// stream `(seed, i)`; a fixed `config` disables configuration sampling.
pub fn verify_lemma_jpart2(trials: u64, seed: u64, config: Option<&TestConfig>, threads: Option<usize>) -> Result<JPart2Report> {
    if trials == 0 {
        return Err(Error::InvalidConfig("trials must be at least 1".into()));
    }
    let outcomes = parallel::install(threads, || {
        parallel::map_indexed(trials, |i| -> Result<(TestConfig, CoefficientArray, Vec<JPart2Check>)> {
            let mut rng = keyed_rng(seed, i, PROFILE_LANE);
            let (cfg, schedule) = trial_config(config, &mut rng)?;
            let rho_cutoff = schedule.levels.last().expect("nonempty schedule").rho;
            let truth = sample_admissible_profile(&cfg, rho_cutoff, &mut rng)?;
            let checks = check_jpart2_profile(&truth, &schedule)?;
            Ok((cfg, truth, checks))
        })
    });
    let mut report = JPart2Report {
        trials,
        seed,
        checked_indices: 0,
        level_histogram: vec![0; (MAX_RANDOM_CUTOFF - MIN_LEVEL + 1) as usize],
        min_ratio: f64::INFINITY,
        violations: Vec::new(),
        passed: true,
    };
    for (i, outcome) in outcomes.into_iter().enumerate() {
        let (cfg, truth, checks) = outcome?;
        for c in &checks {
            report.checked_indices += 1;
            let slot = (c.j_star - MIN_LEVEL) as usize;
            if slot >= report.level_histogram.len() {
                report.level_histogram.resize(slot + 1, 0);
            }
            report.level_histogram[slot] += 1;
            report.min_ratio = report.min_ratio.min(c.lhs / c.rhs);
            if !c.holds {
                report.violations.push(LemmaTrialFailure {
                    trial: i as u64,
                    config: cfg,
                    truth: truth.clone(),
                    detail: format!("j* = {}: lhs {:e} < rhs {:e}", c.j_star, c.lhs, c.rhs),
                });
            }
        }
    }
    while report.level_histogram.last() == Some(&0) {
        report.level_histogram.pop();
    }
    report.passed = report.violations.is_empty();
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionReport {
    pub trials: u64,
    pub seed: u64,
    /// Count of returned indices per level, level 2 first.
    pub index_histogram: Vec<u64>,
    pub failures: Vec<LemmaTrialFailure>,
    pub passed: bool,
}

/// Transition property over `trials` random profiles with `dist(P_2^J f) > ρ_J`: the
/// transition index must exist and satisfy its defining property.
pub fn verify_transition(trials: u64, seed: u64, config: Option<&TestConfig>, threads: Option<usize>) -> Result<TransitionReport> {
    if trials == 0 {
        return Err(Error::InvalidConfig("trials must be at least 1".into()));
    }
    let outcomes = parallel::install(threads, || {
        parallel::map_indexed(trials, |i| -> Result<(TestConfig, CoefficientArray, std::result::Result<u32, String>)> {
            let mut rng = keyed_rng(seed, i, PROFILE_LANE);
            let (cfg, schedule) = trial_config(config, &mut rng)?;
            let rho = schedule.rho();
            let truth = sample_admissible_profile(&cfg, rho[rho.len() - 1], &mut rng)?;
            let ball = BallSpec::ell2(cfg.s, cfg.radius)?;
            let verdict = match transition_index(&truth, &ball, &rho, DEFAULT_TOL) {
                Ok(j) => {
                    let dists = truncation_distances(&truth, &ball, j, DEFAULT_TOL)?;
                    let idx = (j - MIN_LEVEL) as usize;
                    let prev_ok = idx == 0 || dists[idx - 1] <= rho[idx - 1];
                    if prev_ok && dists[idx] > rho[idx] {
                        Ok(j)
                    } else {
                        Err(format!("index {j} does not satisfy the crossing property"))
                    }
                }
                Err(e) => Err(e.to_string()),
            };
            Ok((cfg, truth, verdict))
        })
    });
    let mut report = TransitionReport { trials, seed, index_histogram: Vec::new(), failures: Vec::new(), passed: true };
    for (i, outcome) in outcomes.into_iter().enumerate() {
        let (cfg, truth, verdict) = outcome?;
        match verdict {
            Ok(j) => {
                let slot = (j - MIN_LEVEL) as usize;
                if slot >= report.index_histogram.len() {
                    report.index_histogram.resize(slot + 1, 0);
                }
                report.index_histogram[slot] += 1;
            }
            Err(detail) => report.failures.push(LemmaTrialFailure { trial: i as u64, config: cfg, truth, detail }),
        }
    }
    report.passed = report.failures.is_empty();
    Ok(report)
}

/// Chebyshev event frequency for one `(j*, δ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationRow {
    pub scenario: String,
    pub n: u64,
    pub j_star: u32,
    pub delta: f64,
    /// `√((B + V)/δ)`.
    pub radius: f64,
    pub violations: u64,
    pub replicates: u64,
    pub frequency: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
    /// Whether the Wilson upper bound stays at or below `δ`.
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationTable {
    pub rows: Vec<ConcentrationRow>,
    pub passed: bool,
}

impl ConcentrationTable {
    pub const CSV_HEADER: &'static str = "scenario,n,level,delta,radius,violations,replicates,frequency,wilson_low,wilson_high,passed";

    pub fn csv_rows(&self) -> Vec<String> {
        self.rows
            .iter()
            .map(|r| {
                format!(
                    "{},{},{},{},{:e},{},{},{},{},{},{}",
                    r.scenario, r.n, r.j_star, r.delta, r.radius, r.violations, r.replicates, r.frequency, r.wilson_low,
                    r.wilson_high, r.passed
                )
            })
            .collect()
    }
}

fn fixed_truth(scenario: &Scenario, cfg: &TestConfig) -> Result<CoefficientArray> {
    if matches!(scenario.generator, TruthGenerator::PriorDraw { .. }) {
        return Err(Error::InvalidConfig("lemma checks need a fixed truth, not a prior draw".into()));
    }
    scenario.truth(cfg, 0, 0)?.truncated(cfg.cutoff()?)
}

/// Frequency of `|‖P_2^{j*}f̂‖²_{B_s} − A − ‖P_2^{j*}f‖²_{B_s}| ≥ √((B+V)/δ)`
/// for every `j* ∈ 2..J` and every `δ`.
pub fn verify_concentration(
    scenario: &Scenario,
    deltas: &[f64],
    reps: u64,
    seed: u64,
    config: &TestConfig,
    threads: Option<usize>,
) -> Result<ConcentrationTable> {
    if reps == 0 {
        return Err(Error::InvalidConfig("reps must be at least 1".into()));
    }
    if let Some(d) = deltas.iter().find(|d| !(**d > 0.0 && **d < 1.0)) {
        return Err(Error::InvalidConfig(format!("delta = {d} must lie in (0, 1)")));
    }
    let cutoff = config.cutoff()?;
    let truth = fixed_truth(scenario, config)?;
    let s = config.s;
    let levels: Vec<u32> = (MIN_LEVEL..=cutoff).collect();
    let mut centers = Vec::with_capacity(levels.len());
    let mut spreads = Vec::with_capacity(levels.len());
    for &j in &levels {
        let terms = concentration_terms(&truth, config, j)?;
        centers.push(terms.a + truth.truncated(j)?.sobolev_norm_sq(s));
        spreads.push(terms.b + terms.v);
    }

    let deviations: Vec<Vec<f64>> = parallel::install(threads, || {
        parallel::map_indexed(reps, |i| {
            let obs = sample_observation(&truth, &ObservationConfig { n: config.n, seed, stream_id: i });
            let mut energy = 0.0;
            levels
                .iter()
                .enumerate()
                .map(|(k, &j)| {
                    energy += sobolev_weight(j, s) * obs.level_norm_sq(j).expect("level within truth");
                    (energy - centers[k]).abs()
                })
                .collect()
        })
    });

    let mut rows = Vec::new();
    for (k, &j_star) in levels.iter().enumerate() {
        for &delta in deltas {
            let radius = (spreads[k] / delta).sqrt();
            let violations = deviations.iter().filter(|d| d[k] >= radius).count() as u64;
            let (wilson_low, wilson_high) = wilson_interval(violations, reps, Z95)?;
            rows.push(ConcentrationRow {
                scenario: scenario.name.clone(),
                n: config.n,
                j_star,
                delta,
                radius,
                violations,
                replicates: reps,
                frequency: violations as f64 / reps as f64,
                wilson_low,
                wilson_high,
                passed: wilson_high <= delta,
            });
        }
    }
    let passed = rows.iter().all(|r| r.passed);
    Ok(ConcentrationTable { rows, passed })
}

/// Empirical frequencies of the two `M̂` events at one level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MEventRow {
    pub j_star: u32,
    /// Frequency of `M ≤ M̂ + D`.
    pub xi0: f64,
    /// Frequency of `M ≥ M̂ − D`.
    pub xi1: f64,
    /// `1 − β_{j*}`.
    pub xi0_bound: f64,
    /// `1 − Σ_{j ≤ j*} β_j`.
    pub xi1_bound: f64,
    /// Wilson upper bounds, to compare against the bounds.
    pub xi0_wilson_high: f64,
    pub xi1_wilson_high: f64,
}

/// Frequencies of the events `|M_{j*} − M̂_{j*}| ≤ D_{j*}` (one side each)
/// with `D` taken at `δ = β_{j*}`.
pub fn verify_m_events(
    scenario: &Scenario,
    reps: u64,
    seed: u64,
    config: &TestConfig,
    threads: Option<usize>,
) -> Result<Vec<MEventRow>> {
    if reps == 0 {
        return Err(Error::InvalidConfig("reps must be at least 1".into()));
    }
    let schedule = build_schedule(config)?;
    let cutoff = schedule.cutoff;
    let truth = fixed_truth(scenario, config)?;
    let s = config.s;
    let m_true: Vec<f64> = (MIN_LEVEL..=cutoff)
        .scan(0.0f64, |m, j| {
            *m = m.max(sobolev_weight(j, s) * truth.level_norm_sq(j).expect("level within truth").sqrt());
            Some(*m)
        })
        .collect();

    let hits: Vec<Vec<(bool, bool)>> = parallel::install(threads, || {
        parallel::map_indexed(reps, |i| {
            let obs = sample_observation(&truth, &ObservationConfig { n: config.n, seed, stream_id: i });
            (MIN_LEVEL..=cutoff)
                .map(|j| {
                    let (_, m_hat) = estimate_m(&obs, j, &schedule).expect("level within observation");
                    let k = (j - MIN_LEVEL) as usize;
                    let d = schedule.levels[k].d;
                    (m_true[k] <= m_hat + d, m_true[k] >= m_hat - d)
                })
                .collect()
        })
    });

    let mut beta_sum = 0.0;
    (MIN_LEVEL..=cutoff)
        .map(|j| {
            let k = (j - MIN_LEVEL) as usize;
            beta_sum += schedule.levels[k].beta;
            let c0 = hits.iter().filter(|h| h[k].0).count() as u64;
            let c1 = hits.iter().filter(|h| h[k].1).count() as u64;
            Ok(MEventRow {
                j_star: j,
                xi0: c0 as f64 / reps as f64,
                xi1: c1 as f64 / reps as f64,
                xi0_bound: 1.0 - schedule.levels[k].beta,
                xi1_bound: 1.0 - beta_sum,
                xi0_wilson_high: wilson_interval(c0, reps, Z95)?.1,
                xi1_wilson_high: wilson_interval(c1, reps, Z95)?.1,
            })
        })
        .collect()
}
