//! Lower bound on the separation rate via two priors.
//!
//! `ν₀` is the point mass at `f = 0`. `ν_ρ` is uniform over the `2^{2^J}`
//! signals whose level-`J` coefficients are `±v` and which vanish elsewhere.
//! If the χ²-divergence `∫ (dP_ρ/dP₀)² dP₀` stays below `1 + 4(1−η)²`, no
//! test has total error at most `η`.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{distance_to_ball, BallSpec, DEFAULT_TOL};
use crate::parallel;
use crate::regularity::{compute_j, TestConfig};
use crate::rng::{keyed_rng, CHI2_LANE, PRIOR_LANE};
use crate::sequence::{level_len, sobolev_weight, CoefficientArray, MIN_LEVEL};

/// Same parameters as the upper-bound problem.
pub type LowerBoundConfig = TestConfig;

/// `a_η`, `C_η = (R/2) a_η` and `N_η` for one choice of root of the
/// divergence budget `ln(1 + 4(1−η)²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateConstants {
    pub a_eta: f64,
    pub c_eta: f64,
    /// Smallest admissible `n` (may exceed the `u64` range, hence `f64`).
    pub n_eta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundConstants {
    /// Constants from the square root of the budget.
    pub sqrt_root: RateConstants,
    /// Constants from the fourth root of the budget.
    pub fourth_root: RateConstants,
    /// The convention with the smaller `a_η`, used for all checks.
    pub chosen: RateConstants,
}

/// `ln(1 + 4(1−η)²)`.
pub fn divergence_budget(eta: f64) -> f64 {
    (4.0 * (1.0 - eta) * (1.0 - eta)).ln_1p()
}

pub fn compute_constants(cfg: &LowerBoundConfig) -> Result<LowerBoundConstants> {
    cfg.validate()?;
    let budget = divergence_budget(cfg.eta);
    let denom = cfg.t.exp2() * 16.0 * cfg.radius;
    let make = |root: f64| {
        let a_eta = (root / denom).min(1.0);
        let c_eta = 0.5 * cfg.radius * a_eta;
        let base = cfg.radius * (cfg.s - cfg.t).exp2() / c_eta;
        let n_eta = base.powf((2.0 * cfg.t + 0.5) / (cfg.s - cfg.t)).ceil();
        RateConstants { a_eta, c_eta, n_eta }
    };
    let sqrt_root = make(budget.sqrt());
    let fourth_root = make(budget.sqrt().sqrt());
    let chosen = if sqrt_root.a_eta <= fourth_root.a_eta { sqrt_root } else { fourth_root };
    Ok(LowerBoundConstants { sqrt_root, fourth_root, chosen })
}

/// `v = a_η R 2^{−J(t+1/2)}`, so every prior draw has `‖f‖_{B_t} = a_η R`.
pub fn prior_amplitude(cfg: &LowerBoundConfig, a_eta: f64) -> Result<f64> {
    if !(a_eta > 0.0 && a_eta <= 1.0) {
        return Err(Error::InvalidConfig(format!("a_eta = {a_eta} must lie in (0, 1]")));
    }
    let cutoff = compute_j(cfg.n, cfg.t)?;
    Ok(a_eta * cfg.radius * (-f64::from(cutoff) * (cfg.t + 0.5)).exp2())
}

/// `ln cosh x`, accurate for small and large `|x|`.
pub fn log_cosh(x: f64) -> f64 {
    let x = x.abs();
    if x < 1.0 {
        let h = (0.5 * x).sinh();
        (2.0 * h * h).ln_1p()
    } else {
        x + (-2.0 * x).exp().ln_1p() - std::f64::consts::LN_2
    }
}

/// Closed-form χ²-divergence `cosh(n v²)^{2^J}` and its upper bound
/// `exp(2^J n² v⁴ / 2)`, both kept in log space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Chi2Divergence {
    /// `+∞` when the value overflows; `log_value` stays finite.
    pub value: f64,
    pub log_value: f64,
    pub bound: f64,
    pub log_bound: f64,
    pub overflow: bool,
    pub within_bound: bool,
}

pub fn chi2_divergence_closed_form(n: u64, v: f64, cutoff: u32) -> Result<Chi2Divergence> {
    if n == 0 {
        return Err(Error::InvalidConfig("n must be at least 1".into()));
    }
    if !(v.is_finite() && v >= 0.0) {
        return Err(Error::InvalidConfig(format!("amplitude v = {v} must be finite and nonnegative")));
    }
    if cutoff < MIN_LEVEL {
        return Err(Error::InvalidConfig(format!("J = {cutoff} must be at least 2")));
    }
    let nf = n as f64;
    let x = nf * v * v;
    let dim = f64::from(cutoff).exp2();
    let log_value = dim * log_cosh(x);
    let log_bound = dim * x * x / 2.0;
    let value = log_value.exp();
    Ok(Chi2Divergence {
        value,
        log_value,
        bound: log_bound.exp(),
        log_bound,
        overflow: value.is_infinite(),
        within_bound: log_value <= log_bound * (1.0 + 4.0 * f64::EPSILON),
    })
}

/// Monte-Carlo estimate of `E_{x∼P₀}[(dP_ρ/dP₀)(x)²]` with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Chi2McEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub reps: u64,
}

/// Likelihood ratio of the Rademacher mixture against pure noise at `x`.
///
/// Up to 8 coefficients the mixture is summed over every sign pattern;
/// beyond that the product form `∏_k e^{−nv²/2} cosh(n v x_k)` is used.
pub fn mixture_likelihood_ratio(x: &[f64], n: u64, v: f64) -> f64 {
    let nf = n as f64;
    let half = 0.5 * nf * v * v;
    if x.len() <= 8 {
        let patterns = 1usize << x.len();
        let total: f64 = (0..patterns)
            .map(|mask| {
                let exponent: f64 = x
                    .iter()
                    .enumerate()
                    .map(|(k, &xk)| {
                        let sign = if mask >> k & 1 == 1 { 1.0 } else { -1.0 };
                        nf * v * sign * xk - half
                    })
                    .sum();
                exponent.exp()
            })
            .sum();
        total / patterns as f64
    } else {
        x.iter().map(|&xk| (-half).exp() * (nf * v * xk).cosh()).product()
    }
}

pub fn chi2_divergence_mc(n: u64, v: f64, cutoff: u32, reps: u64, seed: u64, threads: Option<usize>) -> Result<Chi2McEstimate> {
    if !(MIN_LEVEL..=4).contains(&cutoff) {
        return Err(Error::InvalidConfig(format!("Monte-Carlo oracle needs 2 <= J <= 4, got {cutoff}")));
    }
    if reps < 10_000 {
        return Err(Error::InvalidConfig(format!("Monte-Carlo oracle needs at least 1e4 replicates, got {reps}")));
    }
    if n == 0 || !(v.is_finite() && v >= 0.0) {
        return Err(Error::InvalidConfig(format!("invalid (n, v) = ({n}, {v})")));
    }
    let dim = level_len(cutoff);
    let sd = 1.0 / (n as f64).sqrt();
    let squares = parallel::install(threads, || {
        parallel::map_indexed(reps, |i| {
            let mut rng = keyed_rng(seed, i, CHI2_LANE);
            let x: Vec<f64> = (0..dim).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect();
            let ratio = mixture_likelihood_ratio(&x, n, v);
            ratio * ratio
        })
    });
    let count = reps as f64;
    let mean = squares.iter().sum::<f64>() / count;
    let var = squares.iter().map(|q| (q - mean) * (q - mean)).sum::<f64>() / (count - 1.0);
    Ok(Chi2McEstimate { estimate: mean, stderr: (var / count).sqrt(), reps })
}

/// `1 − ½ √(χ² − 1)`, clamped at 0: a lower bound on the total error of any
/// test when the χ²-divergence (in the `∫(dP₁/dP₀)² dP₀` convention) is
/// `chi2_div`.
pub fn total_error_lower_bound(chi2_div: f64) -> Result<f64> {
    if chi2_div.is_nan() || chi2_div < 1.0 {
        return Err(Error::InvalidConfig(format!("chi-square divergence {chi2_div} must be at least 1")));
    }
    Ok((1.0 - 0.5 * (chi2_div - 1.0).sqrt()).max(0.0))
}

/// One draw from `ν_ρ`: independent uniform signs `±v` on level `J`.
pub fn sample_from_prior(cfg: &LowerBoundConfig, v: f64, seed: u64, stream: u64) -> Result<CoefficientArray> {
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::InvalidConfig(format!("amplitude v = {v} must be positive")));
    }
    let cutoff = compute_j(cfg.n, cfg.t)?;
    let mut rng = keyed_rng(seed, stream, PRIOR_LANE);
    let levels = (MIN_LEVEL..=cutoff)
        .map(|j| {
            if j == cutoff {
                (0..level_len(j)).map(|_| if rng.random::<bool>() { v } else { -v }).collect()
            } else {
                vec![0.0; level_len(j)]
            }
        })
        .collect();
    CoefficientArray::new(levels)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundReport {
    pub config: LowerBoundConfig,
    #[serde(rename = "J")]
    pub cutoff: u32,
    pub v: f64,
    pub a_eta: f64,
    #[serde(rename = "C_eta")]
    pub c_eta: f64,
    #[serde(rename = "N_eta")]
    pub n_eta: f64,
    pub constants: LowerBoundConstants,
    pub chi2_div: f64,
    pub chi2_log: f64,
    pub chi2_budget: f64,
    pub total_error_lb: f64,
    /// `n ≥ N_η`.
    pub feasible: bool,
    /// `‖f‖_{B_t}` of every prior draw.
    pub prior_sobolev_norm: f64,
    pub prior_in_ball: bool,
    /// `max(0, 2^{J/2} v − R 2^{−Js})`.
    pub distance: f64,
    /// The same distance from the general ellipsoid projection.
    pub projected_distance: f64,
    /// `a_η (R/2) 2^{−Jt}`.
    pub required_distance: f64,
    pub distance_ok: bool,
    pub chi2_ok: bool,
    pub passed: bool,
}

/// Assembles the constants and checks that the priors certify the bound.
///
/// Fully deterministic: the prior draw inspected uses a fixed stream, and all
/// draws share the same norms and distance anyway.
pub fn verify_lower_bound(cfg: &LowerBoundConfig) -> Result<LowerBoundReport> {
    let constants = compute_constants(cfg)?;
    let RateConstants { a_eta, c_eta, n_eta } = constants.chosen;
    let cutoff = compute_j(cfg.n, cfg.t)?;
    let v = prior_amplitude(cfg, a_eta)?;
    let radius = cfg.radius;
    let jf = f64::from(cutoff);

    let draw = sample_from_prior(cfg, v, 0, 0)?;
    let prior_norm_sq = draw.sobolev_norm_sq(cfg.t);
    let prior_in_ball = prior_norm_sq <= radius * radius * (1.0 + 1e-12);

    let l2 = (0.5 * jf).exp2() * v;
    let distance = (l2 - radius / sobolev_weight(cutoff, cfg.s).sqrt()).max(0.0);
    let projected_distance = distance_to_ball(&draw, &BallSpec::ell2(cfg.s, radius)?, DEFAULT_TOL)?;
    let required_distance = a_eta * radius / 2.0 * (-jf * cfg.t).exp2();
    let distance_ok = distance >= required_distance;

    let chi2 = chi2_divergence_closed_form(cfg.n, v, cutoff)?;
    let chi2_budget = 1.0 + 4.0 * (1.0 - cfg.eta) * (1.0 - cfg.eta);
    let chi2_ok = chi2.value < chi2_budget;
    let total_error_lb = total_error_lower_bound(chi2.value)?;

    Ok(LowerBoundReport {
        config: *cfg,
        cutoff,
        v,
        a_eta,
        c_eta,
        n_eta,
        constants,
        chi2_div: chi2.value,
        chi2_log: chi2.log_value,
        chi2_budget,
        total_error_lb,
        feasible: cfg.n as f64 >= n_eta,
        prior_sobolev_norm: prior_norm_sq.sqrt(),
        prior_in_ball,
        distance,
        projected_distance,
        required_distance,
        distance_ok,
        chi2_ok,
        passed: prior_in_ball && distance_ok && chi2_ok,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cfg(n: u64) -> TestConfig {
        TestConfig::new(n, 2.0, 1.0, 1.0, 0.5).unwrap()
    }

    #[test]
    fn constants_example() {
        // eta = 0.5: budget ln 2 < 1, so the square root is the smaller one.
        let k = compute_constants(&cfg(10_000)).unwrap();
        let budget = 2f64.ln();
        assert_relative_eq!(k.sqrt_root.a_eta, budget.sqrt() / 32.0, max_relative = 1e-15);
        assert_relative_eq!(k.fourth_root.a_eta, budget.powf(0.25) / 32.0, max_relative = 1e-15);
        assert_eq!(k.chosen, k.sqrt_root);
        assert_relative_eq!(k.chosen.c_eta, 0.5 * k.chosen.a_eta);
        // R 2^{s-t} / C = 2^{1+s-t} / a
        let lhs = 1.0 * 2.0 / k.chosen.c_eta;
        assert_relative_eq!(lhs, 4.0 / k.chosen.a_eta, max_relative = 1e-15);
        assert_eq!(k.chosen.n_eta, (4.0 / k.chosen.a_eta).powf(2.5).ceil());
    }

    #[test]
    fn small_eta_prefers_fourth_root() {
        let k = compute_constants(&TestConfig::new(10_000, 2.0, 1.0, 1.0, 0.05).unwrap()).unwrap();
        assert!(divergence_budget(0.05) > 1.0);
        assert_eq!(k.chosen, k.fourth_root);
    }

    #[test]
    fn c_eta_vanishes_as_eta_to_one() {
        let c = |eta| compute_constants(&TestConfig::new(10_000, 2.0, 1.0, 1.0, eta).unwrap()).unwrap().chosen.c_eta;
        assert!(c(0.999999) < 1e-6 && c(0.999999) < c(0.99));
    }

    #[test]
    fn log_cosh_accuracy() {
        for &x in &[1e-12f64, 1e-6, 1e-4] {
            let series = x * x / 2.0 - x.powi(4) / 12.0;
            assert_relative_eq!(log_cosh(x), series, max_relative = 1e-12);
        }
        for &x in &[0.3, 0.999, 1.0, 2.5, 40.0] {
            assert_relative_eq!(log_cosh(x), f64::cosh(x).ln(), max_relative = 1e-13);
        }
        assert_eq!(log_cosh(0.0), 0.0);
        assert_relative_eq!(log_cosh(800.0), 800.0 - 2f64.ln(), max_relative = 1e-15);
        assert_relative_eq!(log_cosh(1e-8), 0.5e-16, max_relative = 1e-8);
    }

    #[test]
    fn chi2_closed_form_basics() {
        let d = chi2_divergence_closed_form(100, 0.0, 3).unwrap();
        assert_eq!(d.value, 1.0);
        let d = chi2_divergence_closed_form(1_000_000, 1.0, 20).unwrap();
        assert!(d.overflow && d.log_value.is_finite() && d.within_bound);
    }

    #[test]
    fn total_error_examples() {
        assert_eq!(total_error_lower_bound(1.0).unwrap(), 1.0);
        let eta: f64 = 0.3;
        assert_relative_eq!(total_error_lower_bound(1.0 + 4.0 * (1.0 - eta).powi(2)).unwrap(), eta, max_relative = 1e-14);
        assert_eq!(total_error_lower_bound(5.0).unwrap(), 0.0);
        assert!(total_error_lower_bound(0.5).is_err());
    }

    #[test]
    fn prior_draws() {
        let c = cfg(1 << 20);
        let a = compute_constants(&c).unwrap().chosen.a_eta;
        let v = prior_amplitude(&c, a).unwrap();
        let j = compute_j(c.n, c.t).unwrap();
        let ball = BallSpec::ell2(c.t, c.radius).unwrap();
        for stream in 0..20 {
            let draw = sample_from_prior(&c, v, 3, stream).unwrap();
            assert_relative_eq!(draw.l2_norm_sq().sqrt(), (0.5 * f64::from(j)).exp2() * v, max_relative = 1e-14);
            assert!(crate::geometry::ball_contains(&draw, &ball));
            assert!(draw.level(j).unwrap().iter().all(|x| x.abs() == v));
        }
        // a = 1 puts the draw on the B_t(R) boundary
        let v1 = prior_amplitude(&c, 1.0).unwrap();
        let d = sample_from_prior(&c, v1, 3, 0).unwrap();
        assert_relative_eq!(d.sobolev_norm_sq(c.t), c.radius * c.radius, max_relative = 1e-14);
        assert!(prior_amplitude(&c, 0.0).is_err());
    }

    #[test]
    fn prior_sign_balance() {
        let c = cfg(4096);
        let v = 0.5;
        let m: f64 = (0..10_000).map(|i| sample_from_prior(&c, v, 1, i).unwrap().level(4).unwrap()[0]).sum::<f64>() / 1e4;
        assert!(m.abs() <= 4.0 * v / 100.0, "{m}");
    }

    #[test]
    fn mixture_ratio_forms_agree() {
        let x = [0.3, -0.1, 0.05, 0.2, -0.4, 0.0, 0.12, -0.2];
        let enumerated = mixture_likelihood_ratio(&x, 10, 0.3);
        let product: f64 = x.iter().map(|&xk| (-0.5 * 10.0 * 0.09f64).exp() * (10.0 * 0.3 * xk).cosh()).product();
        assert_relative_eq!(enumerated, product, max_relative = 1e-13);
        assert_eq!(mixture_likelihood_ratio(&x, 10, 0.0), 1.0);
    }

    #[test]
    fn mc_zero_amplitude_is_exactly_one() {
        let e = chi2_divergence_mc(50, 0.0, 2, 10_000, 1, Some(2)).unwrap();
        assert_eq!(e.estimate, 1.0);
        assert_eq!(e.stderr, 0.0);
        assert!(chi2_divergence_mc(50, 0.1, 5, 10_000, 1, None).is_err());
        assert!(chi2_divergence_mc(50, 0.1, 2, 100, 1, None).is_err());
    }

    #[test]
    fn distance_formula_matches_projection() {
        let r = verify_lower_bound(&cfg(1 << 19)).unwrap();
        assert!((r.distance - r.projected_distance).abs() <= 1e-9 * r.distance.max(1e-300));
    }
}
