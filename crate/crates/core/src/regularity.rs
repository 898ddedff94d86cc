//! The multi-level regularity test.
//!
//! For every cutoff `j* ∈ {2, …, J}` the test compares the bias-corrected
//! accumulated Sobolev energy
//!
//! ```text
//! T_{j*} = ‖P_2^{j*} f̂‖²_{B_s} − A_{j*} − (2/√α_{j*}) √(j*−1)/√n · M̂_{j*}
//! ```
//!
//! with a threshold `τ_{j*}` and rejects `f ∈ B_s(R)` as soon as any level
//! exceeds its threshold. `M̂_{j*} = √(max_{j ≤ j*} |Y_j|)` estimates the
//! largest weighted level mass and `Y_j = 16^{js}(‖P_j f̂‖² − 2^j/n)`.
//!
//! The level budgets `α_j`, `β_j` sum to at most `η/4` each, which splits the
//! total error `η` evenly between the two hypotheses.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sequence::{sobolev_weight, CoefficientArray, MIN_LEVEL};

/// Numerator of the separation schedule `ρ_j`.
pub const RHO_SCALE: f64 = 1346.0;
/// Constant `A` of the accumulated-norm lower bound under the alternative.
pub const LEMMA_A: f64 = 11.0;
/// Largest admissible `4^{Js} 2^{J/2}`.
pub const OVERFLOW_LIMIT: f64 = 1e300;

/// Parameters of the testing problem `‖f‖_{B_s} ≤ R` against an alternative
/// in `B_t(R)` separated from the null ball.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestConfig {
    pub n: u64,
    /// Null regularity.
    pub s: f64,
    /// Alternative regularity, `0 < t < s`.
    pub t: f64,
    #[serde(rename = "R")]
    pub radius: f64,
    /// Target sum of type-I and type-II errors.
    pub eta: f64,
}

impl TestConfig {
    pub fn new(n: u64, s: f64, t: f64, radius: f64, eta: f64) -> Result<Self> {
        let cfg = Self { n, s, t, radius, eta };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t.is_finite() && self.t > 0.0) {
            return Err(Error::InvalidConfig(format!("t = {} must be positive", self.t)));
        }
        if !(self.s.is_finite() && self.s > self.t) {
            return Err(Error::InvalidConfig(format!("s = {} must exceed t = {}", self.s, self.t)));
        }
        if !(self.radius.is_finite() && self.radius > 0.0) {
            return Err(Error::InvalidConfig(format!("R = {} must be positive", self.radius)));
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(Error::InvalidConfig(format!("eta = {} must lie in (0, 1)", self.eta)));
        }
        compute_j(self.n, self.t).map(|_| ())
    }

    /// Cutoff level `J`.
    pub fn cutoff(&self) -> Result<u32> {
        compute_j(self.n, self.t)
    }
}

/// `J = ⌊ log₂(n) / (2t + 1/2) ⌋`, the highest level the test inspects.
pub fn compute_j(n: u64, t: f64) -> Result<u32> {
    if n == 0 {
        return Err(Error::InvalidConfig("n must be at least 1".into()));
    }
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::InvalidConfig(format!("t = {t} must be positive")));
    }
    let j = ((n as f64).log2() / (2.0 * t + 0.5)).floor();
    if j < f64::from(MIN_LEVEL) {
        return Err(Error::InvalidConfig(format!(
            "n = {n} is too small for t = {t}: cutoff J = {j} < 2"
        )));
    }
    Ok(j as u32)
}

/// Checks `½ n^{1/(2t+1/2)} ≤ 2^J ≤ n^{1/(2t+1/2)}` up to rounding.
pub fn cutoff_bounds_hold(n: u64, t: f64, cutoff: u32) -> bool {
    let upper = (n as f64).powf(1.0 / (2.0 * t + 0.5));
    let two_j = f64::from(cutoff).exp2();
    let slack = 1e-12 * upper;
    0.5 * upper <= two_j + slack && two_j <= upper + slack
}

/// Per-level constants of the test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelParams {
    pub j: u32,
    pub alpha: f64,
    pub beta: f64,
    pub rho: f64,
    /// Bias correction `A_j = (1/n) Σ_{i=2}^{j} (2·4^s)^i`.
    pub bias: f64,
    pub c_beta: f64,
    pub d: f64,
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSchedule {
    pub config: TestConfig,
    #[serde(rename = "J")]
    pub cutoff: u32,
    pub levels: Vec<LevelParams>,
}

impl LevelSchedule {
    pub fn level(&self, j: u32) -> Result<&LevelParams> {
        if j < MIN_LEVEL || j > self.cutoff {
            return Err(Error::LevelOutOfRange { level: j, j_max: self.cutoff });
        }
        Ok(&self.levels[(j - MIN_LEVEL) as usize])
    }

    /// `ρ_2, …, ρ_J`.
    pub fn rho(&self) -> Vec<f64> {
        self.levels.iter().map(|l| l.rho).collect()
    }

    /// Coefficient `(2/√α_j) √(j−1)/√n` multiplying `M̂` in `T_j`.
    fn m_penalty(&self, j: u32) -> f64 {
        let p = &self.levels[(j - MIN_LEVEL) as usize];
        2.0 / p.alpha.sqrt() * (f64::from(j - 1)).sqrt() / (self.config.n as f64).sqrt()
    }
}

pub fn build_schedule(cfg: &TestConfig) -> Result<LevelSchedule> {
    cfg.validate()?;
    let cutoff = cfg.cutoff()?;
    let TestConfig { n, s, eta, radius, .. } = *cfg;
    let nf = n as f64;

    let top = sobolev_weight(cutoff, s) * (0.5 * f64::from(cutoff)).exp2();
    if !(top.is_finite() && top <= OVERFLOW_LIMIT) {
        return Err(Error::Overflow(format!(
            "4^(J s) 2^(J/2) = {top:e} exceeds {OVERFLOW_LIMIT:e} (J = {cutoff}, s = {s})"
        )));
    }
    // Y_J and B_J scale with the square of the quantity above.
    let top_sq = sobolev_weight(cutoff, 2.0 * s) * f64::from(cutoff).exp2() / nf;
    if !(top_sq.is_finite() && top_sq <= OVERFLOW_LIMIT) {
        return Err(Error::Overflow(format!(
            "16^(J s) 2^J / n = {top_sq:e} exceeds {OVERFLOW_LIMIT:e} (J = {cutoff}, s = {s})"
        )));
    }

    let alpha0 = eta * (1.0 - (-0.2f64).exp2()) / 4.0;
    let beta0 = eta * (1.0 - (-0.5f64).exp2()) / 2.0;
    let rho0 = RHO_SCALE / eta.sqrt() / nf.sqrt();

    let mut bias = 0.0;
    let levels = (MIN_LEVEL..=cutoff)
        .map(|j| {
            let jf = f64::from(j);
            let alpha = alpha0 * ((jf - f64::from(cutoff)) / 5.0).exp2();
            let beta = beta0 * (-jf / 2.0).exp2();
            let rho = rho0 * ((3.0 * jf + 2.0 * f64::from(cutoff)) / 20.0).exp2();
            bias += (jf * (1.0 + 2.0 * s)).exp2() / nf;
            let c_beta = (2.0 / beta).sqrt();
            let w = sobolev_weight(j, s);
            let d = w / nf.sqrt() * (std::f64::consts::SQRT_2 * c_beta + (jf / 4.0).exp2() * c_beta.sqrt());
            let tau = radius * radius
                + 2.0 / alpha.sqrt() * ((jf - 1.0).sqrt() / nf.sqrt() * d + w * (jf / 2.0).exp2() / nf);
            LevelParams { j, alpha, beta, rho, bias, c_beta, d, tau }
        })
        .collect();
    Ok(LevelSchedule { config: *cfg, cutoff, levels })
}

/// Mean offset and variance pieces of `‖P_2^{j*} f̂‖²_{B_s}`:
/// its mean is `A + ‖P_2^{j*} f‖²_{B_s}` and its variance `B + V`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationTerms {
    pub a: f64,
    pub b: f64,
    pub v: f64,
}

pub fn concentration_terms(truth: &CoefficientArray, cfg: &TestConfig, j_star: u32) -> Result<ConcentrationTerms> {
    if j_star < MIN_LEVEL || j_star > truth.j_max() {
        return Err(Error::LevelOutOfRange { level: j_star, j_max: truth.j_max() });
    }
    let nf = cfg.n as f64;
    let s = cfg.s;
    let mut terms = ConcentrationTerms { a: 0.0, b: 0.0, v: 0.0 };
    for j in MIN_LEVEL..=j_star {
        let jf = f64::from(j);
        terms.a += (jf * (1.0 + 2.0 * s)).exp2() / nf;
        terms.b += 2.0 * (jf * (1.0 + 4.0 * s)).exp2() / (nf * nf);
        terms.v += 4.0 / nf * sobolev_weight(j, 2.0 * s) * truth.level_norm_sq(j)?;
    }
    Ok(terms)
}

/// `Y_j = 16^{js}(‖P_j f̂‖² − 2^j/n)` for `j = 2..=j*` and
/// `M̂ = √(max_j |Y_j|)`.
pub fn estimate_m(obs: &CoefficientArray, j_star: u32, schedule: &LevelSchedule) -> Result<(Vec<f64>, f64)> {
    if j_star < MIN_LEVEL || j_star > obs.j_max() {
        return Err(Error::LevelOutOfRange { level: j_star, j_max: obs.j_max() });
    }
    let nf = schedule.config.n as f64;
    let s = schedule.config.s;
    let mut y = Vec::with_capacity((j_star - 1) as usize);
    let mut m_hat: f64 = 0.0;
    for j in MIN_LEVEL..=j_star {
        let diff = obs.level_norm_sq(j)? - f64::from(j).exp2() / nf;
        y.push(sobolev_weight(j, 2.0 * s) * diff);
        // √|Y_j| without forming 16^{js}.
        m_hat = m_hat.max(sobolev_weight(j, s) * diff.abs().sqrt());
    }
    Ok((y, m_hat))
}

/// Statistic and threshold of one cutoff level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelStatistics {
    pub j_star: u32,
    #[serde(rename = "Y")]
    pub y: Vec<f64>,
    pub m_hat: f64,
    #[serde(rename = "T")]
    pub statistic: f64,
    pub tau: f64,
    pub exceeded: bool,
}

pub fn test_statistic(obs: &CoefficientArray, j_star: u32, schedule: &LevelSchedule) -> Result<LevelStatistics> {
    schedule.level(j_star)?;
    if j_star > obs.j_max() {
        return Err(Error::LevelOutOfRange { level: j_star, j_max: obs.j_max() });
    }
    let masses = obs.truncated(j_star)?.level_norms_sq();
    Ok(level_statistics(&masses, schedule).pop().expect("at least one level"))
}

/// Statistics for every cutoff `2..=2+masses.len()-1` from the observed
/// squared level masses.
fn level_statistics(masses: &[f64], schedule: &LevelSchedule) -> Vec<LevelStatistics> {
    let nf = schedule.config.n as f64;
    let s = schedule.config.s;
    let mut energy = 0.0;
    let mut m_sq_root: f64 = 0.0;
    let mut y = Vec::with_capacity(masses.len());
    masses
        .iter()
        .enumerate()
        .map(|(idx, &mass)| {
            let j = MIN_LEVEL + idx as u32;
            let params = &schedule.levels[idx];
            energy += sobolev_weight(j, s) * mass;
            let diff = mass - f64::from(j).exp2() / nf;
            y.push(sobolev_weight(j, 2.0 * s) * diff);
            m_sq_root = m_sq_root.max(sobolev_weight(j, s) * diff.abs().sqrt());
            let statistic = energy - params.bias - schedule.m_penalty(j) * m_sq_root;
            LevelStatistics {
                j_star: j,
                y: y.clone(),
                m_hat: m_sq_root,
                statistic,
                tau: params.tau,
                exceeded: statistic > params.tau,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// φ = 1
    Reject,
    /// φ = 0
    Accept,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Reject => "reject",
            Verdict::Accept => "accept",
        }
    }
}

/// The three sufficient conditions for the power guarantee at a level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GuaranteeCondition {
    /// `ρ/(2A²) ≥ (4/√α) √(j−1)/√n`
    #[serde(rename = "i")]
    MPenalty,
    /// `4^{js} ρ²/(4A²) ≥ (4/√α) √(j−1)/√n · D`
    #[serde(rename = "ii")]
    EstimationSlack,
    /// `4^{js} ρ²/(4A²) ≥ (4/√α) 4^{js} 2^{j/2}/n`
    #[serde(rename = "iii")]
    NoiseFloor,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GuaranteeDiagnostic {
    pub level: u32,
    pub condition: GuaranteeCondition,
    pub holds: bool,
    /// `ln(lhs / rhs)`; nonnegative iff the condition holds.
    pub log_margin: f64,
}

/// Evaluates the power-guarantee conditions at every level. Reports only.
pub fn check_guarantee_conditions(cfg: &TestConfig) -> Result<Vec<GuaranteeDiagnostic>> {
    let schedule = build_schedule(cfg)?;
    Ok(guarantee_diagnostics(&schedule))
}

fn guarantee_diagnostics(schedule: &LevelSchedule) -> Vec<GuaranteeDiagnostic> {
    let nf = schedule.config.n as f64;
    let s = schedule.config.s;
    let a2 = LEMMA_A * LEMMA_A;
    let mut out = Vec::with_capacity(3 * schedule.levels.len());
    for p in &schedule.levels {
        let jf = f64::from(p.j);
        let penalty = 4.0 / p.alpha.sqrt() * (jf - 1.0).sqrt() / nf.sqrt();
        let w = sobolev_weight(p.j, s);
        let pairs = [
            (GuaranteeCondition::MPenalty, p.rho / (2.0 * a2), penalty),
            (GuaranteeCondition::EstimationSlack, w * p.rho * p.rho / (4.0 * a2), penalty * p.d),
            // 4^{js} cancels on both sides.
            (GuaranteeCondition::NoiseFloor, p.rho * p.rho / (4.0 * a2), 4.0 / p.alpha.sqrt() * (jf / 2.0).exp2() / nf),
        ];
        for (condition, lhs, rhs) in pairs {
            let log_margin = lhs.ln() - rhs.ln();
            out.push(GuaranteeDiagnostic { level: p.j, condition, holds: log_margin >= 0.0, log_margin });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub config: TestConfig,
    #[serde(rename = "J")]
    pub cutoff: u32,
    pub levels: Vec<LevelStatistics>,
    pub verdict: Verdict,
    pub first_exceeding_level: Option<u32>,
    pub guarantee_diagnostics: Vec<GuaranteeDiagnostic>,
}

impl TestReport {
    pub const CSV_HEADER: &'static str = "n,s,t,R,eta,J,verdict,first_exceeding_level";

    /// Flat CSV row matching [`Self::CSV_HEADER`]; an empty last field means
    /// no level exceeded its threshold.
    pub fn csv_row(&self) -> String {
        let c = &self.config;
        format!(
            "{},{},{},{},{},{},{},{}",
            c.n,
            c.s,
            c.t,
            c.radius,
            c.eta,
            self.cutoff,
            self.verdict.as_str(),
            self.first_exceeding_level.map(|j| j.to_string()).unwrap_or_default()
        )
    }
}

/// Outcome of the test without per-level detail.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Decision {
    pub verdict: Verdict,
    pub first_exceeding_level: Option<u32>,
}

/// A configured test with its schedule and diagnostics precomputed, for
/// evaluating many observations.
#[derive(Debug, Clone)]
pub struct RegularityTest {
    schedule: LevelSchedule,
    diagnostics: Vec<GuaranteeDiagnostic>,
}

impl RegularityTest {
    pub fn new(cfg: &TestConfig) -> Result<Self> {
        let schedule = build_schedule(cfg)?;
        let diagnostics = guarantee_diagnostics(&schedule);
        Ok(Self { schedule, diagnostics })
    }

    pub fn schedule(&self) -> &LevelSchedule {
        &self.schedule
    }

    pub fn diagnostics(&self) -> &[GuaranteeDiagnostic] {
        &self.diagnostics
    }

    fn masses(&self, obs: &CoefficientArray) -> Result<Vec<f64>> {
        let cutoff = self.schedule.cutoff;
        if obs.j_max() < cutoff {
            return Err(Error::Precondition(format!(
                "observation stops at level {} but the test needs levels up to J = {cutoff}",
                obs.j_max()
            )));
        }
        (MIN_LEVEL..=cutoff).map(|j| obs.level_norm_sq(j)).collect()
    }

    /// Statistics of every level `2..=J`; levels above `J` are ignored.
    pub fn statistics(&self, obs: &CoefficientArray) -> Result<Vec<LevelStatistics>> {
        Ok(level_statistics(&self.masses(obs)?, &self.schedule))
    }

    pub fn decide(&self, obs: &CoefficientArray) -> Result<Decision> {
        Ok(decision(&self.statistics(obs)?))
    }

    pub fn report(&self, obs: &CoefficientArray) -> Result<TestReport> {
        let levels = self.statistics(obs)?;
        let Decision { verdict, first_exceeding_level } = decision(&levels);
        Ok(TestReport {
            config: self.schedule.config,
            cutoff: self.schedule.cutoff,
            levels,
            verdict,
            first_exceeding_level,
            guarantee_diagnostics: self.diagnostics.clone(),
        })
    }
}

fn decision(levels: &[LevelStatistics]) -> Decision {
    let first_exceeding_level = levels.iter().find(|l| l.exceeded).map(|l| l.j_star);
    Decision {
        verdict: if first_exceeding_level.is_some() { Verdict::Reject } else { Verdict::Accept },
        first_exceeding_level,
    }
}

/// Runs the test on an observation that covers at least levels `2..=J`.
pub fn run_test(obs: &CoefficientArray, cfg: &TestConfig) -> Result<TestReport> {
    RegularityTest::new(cfg)?.report(obs)
}

/// Moment approximation of `T_{j*}` for a known truth: mean
/// `‖P_2^{j*} f‖²_{B_s} − (2/√α)√(j*−1)/√n · M_{j*}` (plugging the true
/// `M_{j*} = max_j 4^{js}‖P_j f‖`) and standard deviation `√(B + V)`.
pub fn statistic_moments(truth: &CoefficientArray, schedule: &LevelSchedule, j_star: u32) -> Result<(f64, f64)> {
    schedule.level(j_star)?;
    let terms = concentration_terms(truth, &schedule.config, j_star)?;
    let s = schedule.config.s;
    let truncated = truth.truncated(j_star)?;
    let energy = truncated.sobolev_norm_sq(s);
    let m = truncated
        .iter_levels()
        .map(|(j, c)| sobolev_weight(j, s) * c.iter().map(|x| x * x).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    Ok((energy - schedule.m_penalty(j_star) * m, (terms.b + terms.v).sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cfg() -> TestConfig {
        TestConfig::new(4096, 2.0, 1.0, 1.0, 0.2).unwrap()
    }

    #[test]
    fn cutoff_examples() {
        assert_eq!(compute_j(1024, 0.75).unwrap(), 5);
        assert_eq!(compute_j(4096, 1.0).unwrap(), 4);
        // smallest admissible n for t = 0.75 is 2^4
        let first = (1..100u64).find(|&n| compute_j(n, 0.75).is_ok()).unwrap();
        assert_eq!(first, 16);
        assert_eq!(compute_j(16, 0.75).unwrap(), 2);
        assert!(compute_j(15, 0.75).is_err());
        assert!(compute_j(0, 1.0).is_err());
        assert!(compute_j(100, 0.0).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(TestConfig::new(4096, 1.0, 1.0, 1.0, 0.2).is_err());
        assert!(TestConfig::new(4096, 2.0, 1.0, 0.0, 0.2).is_err());
        assert!(TestConfig::new(4096, 2.0, 1.0, 1.0, 1.0).is_err());
        assert!(TestConfig::new(4, 2.0, 1.0, 1.0, 0.2).is_err());
    }

    #[test]
    fn schedule_values() {
        let sched = build_schedule(&cfg()).unwrap();
        assert_eq!(sched.cutoff, 4);
        let top = sched.level(4).unwrap();
        assert_relative_eq!(top.rho, RHO_SCALE / 0.2f64.sqrt() * 1.0f64.exp2() / 64.0, max_relative = 1e-14);
        assert_relative_eq!(top.alpha, 0.2 * (1.0 - 0.5f64.powf(0.2)) / 4.0, max_relative = 1e-14);
        let l2 = sched.level(2).unwrap();
        assert_relative_eq!(l2.bias, 2f64.powi(10) / 4096.0, max_relative = 1e-14);
        assert!(sched.level(5).is_err());
    }

    #[test]
    fn bias_single_term_at_s_zero() {
        // s = 0 is outside the test's domain, so build A_2 via the
        // concentration terms: (2·4^0)^2 / 1 = 4.
        let c = TestConfig { n: 1, s: 0.0, t: 1.0, radius: 1.0, eta: 0.5 };
        let terms = concentration_terms(&CoefficientArray::zeros(2).unwrap(), &c, 2).unwrap();
        assert_eq!(terms.a, 4.0);
    }

    #[test]
    fn overflow_guard() {
        let huge = TestConfig { n: 1 << 62, s: 60.0, t: 0.1, radius: 1.0, eta: 0.2 };
        assert!(matches!(build_schedule(&huge), Err(Error::Overflow(_))));
    }

    #[test]
    fn zero_observation_statistics() {
        let sched = build_schedule(&cfg()).unwrap();
        let obs = CoefficientArray::zeros(4).unwrap();
        let (y, m_hat) = estimate_m(&obs, 3, &sched).unwrap();
        let expected: Vec<f64> = (2..=3).map(|j: u32| -(16f64).powf(2.0 * f64::from(j)) * f64::from(j).exp2() / 4096.0).collect();
        for (a, b) in y.iter().zip(&expected) {
            assert_relative_eq!(*a, *b, max_relative = 1e-13);
        }
        assert_relative_eq!(m_hat, expected[1].abs().sqrt(), max_relative = 1e-13);
        for j in 2..=4 {
            let st = test_statistic(&obs, j, &sched).unwrap();
            assert!(st.statistic < 0.0 && !st.exceeded);
        }
        let report = run_test(&obs, &cfg()).unwrap();
        assert_eq!(report.verdict, Verdict::Accept);
        assert_eq!(report.first_exceeding_level, None);
        assert_eq!(report.levels.len(), 3);
    }

    #[test]
    fn test_statistic_matches_batch() {
        let test = RegularityTest::new(&cfg()).unwrap();
        let obs = CoefficientArray::from_level_norms(&[3.0, 0.1, 0.01, 0.5], crate::sequence::MassPlacement::Uniform).unwrap();
        let all = test.statistics(&obs).unwrap();
        for st in &all {
            assert_eq!(&test_statistic(&obs, st.j_star, test.schedule()).unwrap(), st);
        }
        assert!(all[0].exceeded);
        let report = test.report(&obs).unwrap();
        assert_eq!(report.verdict, Verdict::Reject);
        assert_eq!(report.first_exceeding_level, Some(2));
        assert_eq!(report.csv_row(), "4096,2,1,1,0.2,4,reject,2");
    }

    #[test]
    fn short_observation_is_rejected() {
        assert!(matches!(run_test(&CoefficientArray::zeros(3).unwrap(), &cfg()), Err(Error::Precondition(_))));
    }

    #[test]
    fn diagnostics_shape_and_cancellation() {
        let d = check_guarantee_conditions(&cfg()).unwrap();
        assert_eq!(d.len(), 3 * 3);
        let mut other = cfg();
        other.s = 3.5;
        let e = check_guarantee_conditions(&other).unwrap();
        for (x, y) in d.iter().zip(&e) {
            if x.condition == GuaranteeCondition::NoiseFloor {
                assert_eq!(x.log_margin, y.log_margin);
            }
            assert_eq!(x.holds, x.log_margin >= 0.0);
        }
    }
}
