//! Wavelet sequence model.
//!
//! A signal is represented by its wavelet coefficients `a[j][k]` on
//! resolution levels `j = 2..=j_max`, with `2^j` coefficients on level `j`.
//! Observations in the Gaussian white-noise model are the same array with
//! independent `N(0, 1/n)` noise added to every coefficient.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::keyed_rng;

/// Coarsest resolution level of the basis.
pub const MIN_LEVEL: u32 = 2;
/// Finest level an array may store (2^30 coefficients on the last level).
pub const MAX_LEVEL: u32 = 30;

/// Sobolev weight `4^{j r}`, evaluated as an exact power of two.
#[inline]
pub fn sobolev_weight(j: u32, r: f64) -> f64 {
    (2.0 * f64::from(j) * r).exp2()
}

/// Number of coefficients on level `j`.
#[inline]
pub fn level_len(j: u32) -> usize {
    1usize << j
}

/// Wavelet coefficients on the contiguous levels `2..=j_max`.
///
/// Immutable after construction; all entries are finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CoefficientFile", into = "CoefficientFile")]
pub struct CoefficientArray {
    levels: Vec<Vec<f64>>,
}

impl CoefficientArray {
    /// Builds an array from per-level vectors, the first one being level 2.
    pub fn new(levels: Vec<Vec<f64>>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidCoefficients("at least level 2 is required".into()));
        }
        let j_max = MIN_LEVEL as usize + levels.len() - 1;
        if j_max > MAX_LEVEL as usize {
            return Err(Error::InvalidCoefficients(format!(
                "j_max = {j_max} exceeds the supported maximum {MAX_LEVEL}"
            )));
        }
        for (idx, coeffs) in levels.iter().enumerate() {
            let j = MIN_LEVEL + idx as u32;
            if coeffs.len() != level_len(j) {
                return Err(Error::InvalidCoefficients(format!(
                    "level {j} has {} coefficients, expected {}",
                    coeffs.len(),
                    level_len(j)
                )));
            }
            if let Some(k) = coeffs.iter().position(|x| !x.is_finite()) {
                return Err(Error::InvalidCoefficients(format!(
                    "non-finite coefficient at level {j}, index {}",
                    k + 1
                )));
            }
        }
        Ok(Self { levels })
    }

    pub fn zeros(j_max: u32) -> Result<Self> {
        check_j_max(j_max)?;
        Ok(Self {
            levels: (MIN_LEVEL..=j_max).map(|j| vec![0.0; level_len(j)]).collect(),
        })
    }

    /// Array whose level `j` has L2 norm `norms[j - 2]`.
    ///
    /// With [`MassPlacement::First`] the whole level mass sits on the first
    /// coefficient; with [`MassPlacement::Uniform`] it is spread evenly.
    pub fn from_level_norms(norms: &[f64], placement: MassPlacement) -> Result<Self> {
        if norms.is_empty() {
            return Err(Error::InvalidCoefficients("at least level 2 is required".into()));
        }
        if let Some(x) = norms.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
            return Err(Error::InvalidCoefficients(format!("level norm {x} is not a finite nonnegative value")));
        }
        let j_max = MIN_LEVEL + norms.len() as u32 - 1;
        check_j_max(j_max)?;
        let levels = norms
            .iter()
            .enumerate()
            .map(|(idx, &norm)| {
                let j = MIN_LEVEL + idx as u32;
                let len = level_len(j);
                match placement {
                    MassPlacement::First => {
                        let mut v = vec![0.0; len];
                        v[0] = norm;
                        v
                    }
                    MassPlacement::Uniform => vec![norm / (len as f64).sqrt(); len],
                }
            })
            .collect();
        Ok(Self { levels })
    }

    pub fn j_max(&self) -> u32 {
        MIN_LEVEL + self.levels.len() as u32 - 1
    }

    /// Coefficients of level `j`.
    pub fn level(&self, j: u32) -> Result<&[f64]> {
        self.check_level(j)?;
        Ok(&self.levels[(j - MIN_LEVEL) as usize])
    }

    /// Iterates `(j, coeffs)` over all stored levels.
    pub fn iter_levels(&self) -> impl Iterator<Item = (u32, &[f64])> + '_ {
        self.levels
            .iter()
            .enumerate()
            .map(|(idx, c)| (MIN_LEVEL + idx as u32, c.as_slice()))
    }

    /// `‖P_j c‖²`, the squared L2 mass of level `j`.
    pub fn level_norm_sq(&self, j: u32) -> Result<f64> {
        Ok(sum_sq(self.level(j)?))
    }

    /// Squared L2 masses of all stored levels, level 2 first.
    pub fn level_norms_sq(&self) -> Vec<f64> {
        self.levels.iter().map(|c| sum_sq(c)).collect()
    }

    pub fn l2_norm_sq(&self) -> f64 {
        self.level_norms_sq().iter().sum()
    }

    /// `Σ_j 4^{jr} ‖P_j c‖²` over the stored levels.
    pub fn sobolev_norm_sq(&self, r: f64) -> f64 {
        self.iter_levels().map(|(j, c)| sobolev_weight(j, r) * sum_sq(c)).sum()
    }

    /// `max_j 4^{jr} ‖P_j c‖²` over the stored levels.
    pub fn sup_sobolev_norm_sq(&self, r: f64) -> f64 {
        self.iter_levels()
            .map(|(j, c)| sobolev_weight(j, r) * sum_sq(c))
            .fold(0.0, f64::max)
    }

    /// Copy restricted to levels `2..=j_max` (`P_2^{j_max} c`).
    pub fn truncated(&self, j_max: u32) -> Result<Self> {
        self.check_level(j_max)?;
        Ok(Self {
            levels: self.levels[..=(j_max - MIN_LEVEL) as usize].to_vec(),
        })
    }

    /// Copy padded with zero levels up to `j_max` (no-op if already longer).
    pub fn padded(&self, j_max: u32) -> Result<Self> {
        check_j_max(j_max)?;
        let mut levels = self.levels.clone();
        for j in self.j_max() + 1..=j_max {
            levels.push(vec![0.0; level_len(j)]);
        }
        Ok(Self { levels })
    }

    /// Coefficient-wise `f(j, a)` map. The caller is responsible for keeping
    /// outputs finite.
    pub(crate) fn map_levels(&self, mut f: impl FnMut(u32, f64) -> f64) -> Self {
        Self {
            levels: self
                .iter_levels()
                .map(|(j, c)| c.iter().map(|&a| f(j, a)).collect())
                .collect(),
        }
    }

    /// Multiplies every coefficient by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !factor.is_finite() {
            return Err(Error::InvalidCoefficients(format!("scale factor {factor} is not finite")));
        }
        Ok(self.map_levels(|_, a| a * factor))
    }

    /// L2 distance to another array; missing levels count as zero.
    pub fn l2_distance(&self, other: &Self) -> f64 {
        let j_max = self.j_max().max(other.j_max());
        let mut acc = 0.0;
        for j in MIN_LEVEL..=j_max {
            let a = self.level(j).ok();
            let b = other.level(j).ok();
            for k in 0..level_len(j) {
                let x = a.map_or(0.0, |v| v[k]) - b.map_or(0.0, |v| v[k]);
                acc += x * x;
            }
        }
        acc.sqrt()
    }

    fn check_level(&self, j: u32) -> Result<()> {
        if j < MIN_LEVEL || j > self.j_max() {
            return Err(Error::LevelOutOfRange { level: j, j_max: self.j_max() });
        }
        Ok(())
    }
}

fn check_j_max(j_max: u32) -> Result<()> {
    if !(MIN_LEVEL..=MAX_LEVEL).contains(&j_max) {
        return Err(Error::InvalidCoefficients(format!(
            "j_max = {j_max} outside {MIN_LEVEL}..={MAX_LEVEL}"
        )));
    }
    Ok(())
}

fn sum_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// How a prescribed level mass is distributed over the level's coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MassPlacement {
    /// All mass on coefficient `k = 1`.
    #[default]
    First,
    /// Equal magnitude on every coefficient of the level.
    Uniform,
}

#[derive(Serialize, Deserialize)]
struct CoefficientFile {
    j_max: u32,
    levels: Vec<LevelEntry>,
}

#[derive(Serialize, Deserialize)]
struct LevelEntry {
    j: u32,
    coeffs: Vec<f64>,
}

impl TryFrom<CoefficientFile> for CoefficientArray {
    type Error = Error;

    fn try_from(file: CoefficientFile) -> Result<Self> {
        for (idx, entry) in file.levels.iter().enumerate() {
            let expected = MIN_LEVEL + idx as u32;
            if entry.j != expected {
                return Err(Error::InvalidCoefficients(format!(
                    "levels must be contiguous from {MIN_LEVEL}: found j = {} at position {idx}, expected {expected}",
                    entry.j
                )));
            }
        }
        let array = Self::new(file.levels.into_iter().map(|e| e.coeffs).collect())?;
        if array.j_max() != file.j_max {
            return Err(Error::InvalidCoefficients(format!(
                "declared j_max = {} but levels run to {}",
                file.j_max,
                array.j_max()
            )));
        }
        Ok(array)
    }
}

impl From<CoefficientArray> for CoefficientFile {
    fn from(array: CoefficientArray) -> Self {
        let j_max = array.j_max();
        Self {
            j_max,
            levels: array
                .levels
                .into_iter()
                .enumerate()
                .map(|(idx, coeffs)| LevelEntry { j: MIN_LEVEL + idx as u32, coeffs })
                .collect(),
        }
    }
}

/// Noise level and random stream of one observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservationConfig {
    /// Sample size; the noise standard deviation is `1/√n`.
    pub n: u64,
    pub seed: u64,
    /// Replicate index. Distinct ids give independent observations.
    pub stream_id: u64,
}

impl ObservationConfig {
    pub fn new(n: u64, seed: u64, stream_id: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidConfig("n must be at least 1".into()));
        }
        Ok(Self { n, seed, stream_id })
    }
}

/// Draws `â_{j,k} = a_{j,k} + ξ_{j,k}/√n` with `ξ` i.i.d. standard normal.
///
/// The noise on `(j, k)` is a function of `(seed, stream_id, j, k)` only.
pub fn sample_observation(truth: &CoefficientArray, obs: &ObservationConfig) -> CoefficientArray {
    let sd = 1.0 / (obs.n as f64).sqrt();
    let levels = truth
        .iter_levels()
        .map(|(j, coeffs)| {
            let mut rng = keyed_rng(obs.seed, obs.stream_id, u64::from(j));
            coeffs
                .iter()
                .map(|&a| {
                    let z: f64 = rng.sample(StandardNormal);
                    a + sd * z
                })
                .collect()
        })
        .collect();
    CoefficientArray { levels }
}

/// Bound on `Σ_{j > j_max} ‖P_j f‖` for `f ∈ B_t(R)`:
/// `2^{-t j_max} 2^{-t} R / (1 - 2^{-t})`.
pub fn tail_bound(t: f64, radius: f64, j_max: u32) -> f64 {
    let q = (-t).exp2();
    (-t * f64::from(j_max)).exp2() * q * radius / (1.0 - q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn level2(c: [f64; 4]) -> CoefficientArray {
        CoefficientArray::new(vec![c.to_vec()]).unwrap()
    }

    #[test]
    fn level_norm_examples() {
        assert_eq!(CoefficientArray::zeros(4).unwrap().level_norm_sq(3).unwrap(), 0.0);
        assert_eq!(level2([1.0, 0.0, 0.0, 0.0]).level_norm_sq(2).unwrap(), 1.0);
        let c = 0.3;
        assert_relative_eq!(level2([c; 4]).level_norm_sq(2).unwrap(), 4.0 * c * c);
    }

    #[test]
    fn level_out_of_range() {
        let z = CoefficientArray::zeros(3).unwrap();
        assert_eq!(z.level_norm_sq(4), Err(Error::LevelOutOfRange { level: 4, j_max: 3 }));
        assert!(z.level_norm_sq(1).is_err());
    }

    #[test]
    fn sobolev_single_coefficient() {
        let s = 1.3;
        let c = level2([1.0, 0.0, 0.0, 0.0]);
        assert_relative_eq!(c.sobolev_norm_sq(s), 4f64.powf(2.0 * s), max_relative = 1e-14);
    }

    #[test]
    fn sobolev_of_geometric_profile_matches_series() {
        let (radius, s, t, j) = (1.7, 1.5, 0.6, 12u32);
        let norms: Vec<f64> = (2..=j).map(|j| radius / (f64::from(j) * s).exp2()).collect();
        let c = CoefficientArray::from_level_norms(&norms, MassPlacement::First).unwrap();
        let expected: f64 = radius * radius * (2..=j).map(|j| 4f64.powf(f64::from(j) * (t - s))).sum::<f64>();
        assert_relative_eq!(c.sobolev_norm_sq(t), expected, max_relative = 1e-13);
        assert_relative_eq!(c.sup_sobolev_norm_sq(s), radius * radius, max_relative = 1e-13);
    }

    #[test]
    fn sup_norm_single_level() {
        let mut levels = vec![vec![0.0; 4], vec![0.0; 8], vec![0.0; 16]];
        levels[1][3] = 0.5;
        levels[1][5] = -0.25;
        let c = CoefficientArray::new(levels).unwrap();
        let r = 0.7;
        assert_relative_eq!(c.sup_sobolev_norm_sq(r), sobolev_weight(3, r) * c.level_norm_sq(3).unwrap());
        assert_eq!(CoefficientArray::zeros(5).unwrap().sup_sobolev_norm_sq(r), 0.0);
    }

    #[test]
    fn rejects_malformed_arrays() {
        assert!(CoefficientArray::new(vec![]).is_err());
        assert!(CoefficientArray::new(vec![vec![0.0; 3]]).is_err());
        assert!(CoefficientArray::new(vec![vec![0.0, f64::NAN, 0.0, 0.0]]).is_err());
        assert!(CoefficientArray::zeros(1).is_err());
    }

    #[test]
    fn json_format() {
        let c = CoefficientArray::new(vec![vec![1.0, 2.0, 3.0, 4.0], vec![0.5; 8]]).unwrap();
        let text = serde_json::to_string(&c).unwrap();
        assert!(text.starts_with(r#"{"j_max":3,"levels":[{"j":2,"coeffs":[1.0,2.0,3.0,4.0]}"#));
        let back: CoefficientArray = serde_json::from_str(&text).unwrap();
        assert_eq!(back, c);

        let gap = r#"{"j_max":3,"levels":[{"j":3,"coeffs":[0,0,0,0,0,0,0,0]}]}"#;
        assert!(serde_json::from_str::<CoefficientArray>(gap).is_err());
        let wrong_max = r#"{"j_max":4,"levels":[{"j":2,"coeffs":[0,0,0,0]}]}"#;
        assert!(serde_json::from_str::<CoefficientArray>(wrong_max).is_err());
        let wrong_len = r#"{"j_max":2,"levels":[{"j":2,"coeffs":[0,0,0]}]}"#;
        assert!(serde_json::from_str::<CoefficientArray>(wrong_len).is_err());
    }

    #[test]
    fn observation_is_deterministic_and_keyed() {
        let truth = CoefficientArray::zeros(6).unwrap();
        let a = sample_observation(&truth, &ObservationConfig::new(100, 1, 0).unwrap());
        let b = sample_observation(&truth, &ObservationConfig::new(100, 1, 0).unwrap());
        let c = sample_observation(&truth, &ObservationConfig::new(100, 1, 1).unwrap());
        assert_eq!(a, b);
        assert_ne!(a, c);
        // Truncating the truth leaves the retained levels' noise unchanged.
        let short = sample_observation(&truth.truncated(4).unwrap(), &ObservationConfig::new(100, 1, 0).unwrap());
        assert_eq!(short, a.truncated(4).unwrap());
    }

    #[test]
    fn huge_n_is_nearly_noiseless() {
        let truth = CoefficientArray::from_level_norms(&[1.0, 0.5, 0.25], MassPlacement::Uniform).unwrap();
        let obs = sample_observation(&truth, &ObservationConfig::new(1_000_000_000_000, 9, 0).unwrap());
        // sd 1e-6; 56 coefficients stay within 6 sd.
        assert!(obs.l2_distance(&truth) < 6e-6 * 56f64.sqrt());
    }

    #[test]
    fn noise_moments() {
        // Oracle: CLT bound on the mean and chi-square concentration on the
        // variance of 1e5 replicates of a_{2,1}.
        let n = 50u64;
        let reps = 100_000u64;
        let truth = CoefficientArray::zeros(2).unwrap();
        let draws: Vec<f64> = (0..reps)
            .map(|i| sample_observation(&truth, &ObservationConfig::new(n, 11, i).unwrap()).level(2).unwrap()[0])
            .collect();
        let mean = draws.iter().sum::<f64>() / reps as f64;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
        assert!(mean.abs() <= 4.0 / ((n * reps) as f64).sqrt(), "mean {mean}");
        assert!((var * n as f64 - 1.0).abs() <= 0.05, "variance {var}");
    }

    #[test]
    fn tail_bound_value() {
        // t = 1: 2^{-J} * (1/2) R / (1/2) = R 2^{-J}
        assert_relative_eq!(tail_bound(1.0, 3.0, 5), 3.0 / 32.0, max_relative = 1e-15);
    }
}
