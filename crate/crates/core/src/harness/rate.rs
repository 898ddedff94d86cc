//! Empirical minimal detectable amplitude as a function of `n`.
//!
//! The alternative family puts all its mass on level `J(n)`, spread evenly
//! over the coefficients, with `‖f‖_{L2} = c·n^{−t/(2t+1/2)}`. For each `n`
//! the multiplier `c` is bisected on a log scale until the rejection rate
//! crosses `1 − budget`. Every evaluation at one `n` reuses the same noise
//! streams, so the rate is monotone in `c` up to the test's own behaviour.

use serde::{Deserialize, Serialize};

use super::{run_experiment, ExperimentSpec, HypothesisTag, Scenario, TruthGenerator};
use crate::error::{Error, Result};
use crate::geometry::{distance_to_ball, BallSpec, DEFAULT_TOL};
use crate::regularity::TestConfig;
use crate::sequence::{CoefficientArray, MassPlacement, MIN_LEVEL};

const MAX_BRACKET_STEPS: u32 = 40;
/// Relative half-step of the finite difference used for the local slope.
const SLOPE_STEP: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateCurveSpec {
    pub n_grid: Vec<u64>,
    /// `n` is overwritten for each grid point.
    pub template: TestConfig,
    pub error_budget: f64,
    pub reps: u64,
    pub seed: u64,
    /// Bisection stops once `c_hi / c_lo ≤ 1 + rel_tol`.
    pub rel_tol: f64,
    #[serde(skip)]
    pub threads: Option<usize>,
}

impl RateCurveSpec {
    pub fn new(n_grid: Vec<u64>, template: TestConfig, error_budget: f64, reps: u64, seed: u64) -> Self {
        Self { n_grid, template, error_budget, reps, seed, rel_tol: 1e-3, threads: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub n: u64,
    #[serde(rename = "J")]
    pub cutoff: u32,
    pub bracketed: bool,
    /// Minimal multiplier `c*`.
    pub multiplier: f64,
    /// `c*·n^{−t/(2t+1/2)}`, the L2 norm of the minimal detectable signal.
    pub amplitude: f64,
    /// Distance of that signal to `B_s(R)`.
    pub distance: f64,
    /// Standard error of `amplitude` from the binomial noise of the rate.
    pub uncertainty: f64,
    pub rate_at_min: f64,
    pub evaluations: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateCurve {
    pub spec: RateCurveSpec,
    pub points: Vec<RatePoint>,
    /// Least-squares slope of `log amplitude` against `log n` over bracketed
    /// points; `None` with fewer than two.
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    pub target_slope: f64,
}

impl RateCurve {
    pub const CSV_HEADER: &'static str = "n,J,bracketed,multiplier,amplitude,distance,uncertainty,rate_at_min,evaluations";

    pub fn csv_rows(&self) -> Vec<String> {
        self.points
            .iter()
            .map(|p| {
                format!(
                    "{},{},{},{},{},{},{},{},{}",
                    p.n, p.cutoff, p.bracketed, p.multiplier, p.amplitude, p.distance, p.uncertainty, p.rate_at_min,
                    p.evaluations
                )
            })
            .collect()
    }
}

/// `−t/(2t + 1/2)`.
pub fn target_slope(t: f64) -> f64 {
    -t / (2.0 * t + 0.5)
}

/// Least-squares fit `y ≈ intercept + slope·x`; returns `(slope, intercept)`.
pub fn fit_log_log_slope(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let m = x.len() as f64;
    let mx = x.iter().sum::<f64>() / m;
    let my = y.iter().sum::<f64>() / m;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

struct PointRunner<'a> {
    spec: &'a RateCurveSpec,
    config: TestConfig,
    cutoff: u32,
    scale: f64,
    seed: u64,
    evaluations: u32,
}

impl PointRunner<'_> {
    fn truth(&self, c: f64) -> Result<CoefficientArray> {
        let mut norms = vec![0.0; (self.cutoff - MIN_LEVEL + 1) as usize];
        norms[(self.cutoff - MIN_LEVEL) as usize] = c * self.scale;
        CoefficientArray::from_level_norms(&norms, MassPlacement::Uniform)
    }

    fn rate(&mut self, c: f64) -> Result<f64> {
        self.evaluations += 1;
        let scenario = Scenario::new("rate_curve", TruthGenerator::Custom { truth: self.truth(c)? }, HypothesisTag::Neither);
        let spec = ExperimentSpec::new(scenario, self.config, self.spec.reps, self.seed).with_threads(self.spec.threads);
        Ok(run_experiment(&spec)?.estimate.rejection_rate)
    }
}

fn run_point(spec: &RateCurveSpec, index: usize, n: u64) -> Result<RatePoint> {
    let config = TestConfig { n, ..spec.template };
    config.validate()?;
    let cutoff = config.cutoff()?;
    let mut runner = PointRunner {
        spec,
        config,
        cutoff,
        scale: (n as f64).powf(target_slope(config.t)),
        seed: spec.seed.wrapping_add(index as u64),
        evaluations: 0,
    };
    let target = 1.0 - spec.error_budget;

    // Bracket [lo, hi] with rate(lo) < target ≤ rate(hi).
    let (mut lo, mut hi) = (1.0, 1.0);
    let mut bracketed = false;
    if runner.rate(1.0)? >= target {
        for _ in 0..MAX_BRACKET_STEPS {
            lo /= 2.0;
            if runner.rate(lo)? < target {
                bracketed = true;
                break;
            }
            hi = lo;
        }
    } else {
        for _ in 0..MAX_BRACKET_STEPS {
            hi *= 2.0;
            if runner.rate(hi)? >= target {
                bracketed = true;
                break;
            }
            lo = hi;
        }
    }
    if !bracketed {
        return Ok(RatePoint {
            n,
            cutoff,
            bracketed: false,
            multiplier: f64::NAN,
            amplitude: f64::NAN,
            distance: f64::NAN,
            uncertainty: f64::NAN,
            rate_at_min: f64::NAN,
            evaluations: runner.evaluations,
        });
    }
    while hi / lo > 1.0 + spec.rel_tol {
        let mid = (lo * hi).sqrt();
        if runner.rate(mid)? >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let c_star = (lo * hi).sqrt();
    let amplitude = c_star * runner.scale;
    let rate_at_min = runner.rate(c_star)?;

    // Delta method: sd(c*) ≈ sd(rate) / (d rate / d c).
    let up = runner.rate(c_star * (1.0 + SLOPE_STEP))?;
    let down = runner.rate(c_star * (1.0 - SLOPE_STEP))?;
    let derivative = (up - down) / (2.0 * SLOPE_STEP * c_star);
    let rate_sd = (target * (1.0 - target) / spec.reps as f64).sqrt();
    let uncertainty = if derivative > 0.0 { rate_sd / derivative * runner.scale } else { f64::INFINITY };

    let ball = BallSpec::ell2(config.s, config.radius)?;
    let distance = distance_to_ball(&runner.truth(c_star)?, &ball, DEFAULT_TOL)?;
    Ok(RatePoint {
        n,
        cutoff,
        bracketed: true,
        multiplier: c_star,
        amplitude,
        distance,
        uncertainty,
        rate_at_min,
        evaluations: runner.evaluations,
    })
}

/// Minimal detectable amplitude at every `n` of the grid and the log-log
/// slope fitted through the bracketed points.
pub fn rate_curve(spec: &RateCurveSpec) -> Result<RateCurve> {
    if spec.n_grid.len() < 4 {
        return Err(Error::InvalidConfig(format!("rate curve needs at least 4 grid points, got {}", spec.n_grid.len())));
    }
    if spec.n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidConfig("n_grid must be strictly increasing".into()));
    }
    if !(spec.error_budget > 0.0 && spec.error_budget < 1.0) {
        return Err(Error::InvalidConfig(format!("error budget {} must lie in (0, 1)", spec.error_budget)));
    }
    if spec.reps == 0 || spec.rel_tol.is_nan() || spec.rel_tol <= 0.0 {
        return Err(Error::InvalidConfig("reps must be positive and rel_tol > 0".into()));
    }
    let points = spec
        .n_grid
        .iter()
        .enumerate()
        .map(|(k, &n)| run_point(spec, k, n))
        .collect::<Result<Vec<_>>>()?;
    let (x, y): (Vec<f64>, Vec<f64>) = points
        .iter()
        .filter(|p| p.bracketed)
        .map(|p| ((p.n as f64).ln(), p.amplitude.ln()))
        .unzip();
    let fit = fit_log_log_slope(&x, &y);
    Ok(RateCurve {
        spec: spec.clone(),
        points,
        slope: fit.map(|f| f.0),
        intercept: fit.map(|f| f.1),
        target_slope: target_slope(spec.template.t),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn target_slopes() {
        assert_relative_eq!(target_slope(1.0), -0.4);
        assert_relative_eq!(target_slope(0.5), -1.0 / 3.0);
    }

    #[test]
    fn exact_line_fit() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v| 0.5 - 0.4 * v).collect();
        let (slope, intercept) = fit_log_log_slope(&x, &y).unwrap();
        assert_relative_eq!(slope, -0.4, epsilon = 1e-12);
        assert_relative_eq!(intercept, 0.5, epsilon = 1e-12);
        assert!(fit_log_log_slope(&x[..1], &y[..1]).is_none());
    }

    #[test]
    fn grid_validation() {
        let cfg = TestConfig::new(4096, 2.0, 1.0, 1.0, 0.2).unwrap();
        assert!(rate_curve(&RateCurveSpec::new(vec![1 << 12, 1 << 14, 1 << 16], cfg, 0.1, 10, 0)).is_err());
        assert!(rate_curve(&RateCurveSpec::new(vec![1 << 14, 1 << 12, 1 << 16, 1 << 18], cfg, 0.1, 10, 0)).is_err());
    }
}
