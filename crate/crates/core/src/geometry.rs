//! Sobolev ellipsoids: membership, Euclidean projection and the extremal
//! signal constructions used to compare the ℓ₂ and sup balls.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sequence::{sobolev_weight, CoefficientArray, MassPlacement, MIN_LEVEL};

/// Default relative tolerance on the projection constraint.
pub const DEFAULT_TOL: f64 = 1e-10;
/// Iteration cap of the multiplier bisection.
pub const MAX_BISECTION_ITERS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BallKind {
    /// `Σ_j 4^{jr} ‖P_j f‖² ≤ R²`
    Ell2,
    /// `sup_j 4^{jr} ‖P_j f‖² ≤ R²`
    Sup,
}

/// A Sobolev ball `B_r(R)` or `B_{r,∞}(R)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BallSpec {
    pub r: f64,
    pub radius: f64,
    pub kind: BallKind,
}

impl BallSpec {
    pub fn new(r: f64, radius: f64, kind: BallKind) -> Result<Self> {
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::InvalidConfig(format!("regularity r = {r} must be positive")));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::InvalidConfig(format!("radius R = {radius} must be positive")));
        }
        Ok(Self { r, radius, kind })
    }

    pub fn ell2(r: f64, radius: f64) -> Result<Self> {
        Self::new(r, radius, BallKind::Ell2)
    }

    pub fn sup(r: f64, radius: f64) -> Result<Self> {
        Self::new(r, radius, BallKind::Sup)
    }

    /// Squared ball norm of `c` (ℓ₂ or sup variant).
    pub fn norm_sq(&self, c: &CoefficientArray) -> f64 {
        match self.kind {
            BallKind::Ell2 => c.sobolev_norm_sq(self.r),
            BallKind::Sup => c.sup_sobolev_norm_sq(self.r),
        }
    }
}

pub fn ball_contains(c: &CoefficientArray, ball: &BallSpec) -> bool {
    ball.norm_sq(c) <= ball.radius * ball.radius
}

/// Euclidean projection of a coefficient array onto an ℓ₂ Sobolev ball.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectionResult {
    /// `inf_{b ∈ ball} ‖c − b‖_{L2}`
    pub distance: f64,
    /// Lagrange multiplier λ of the active constraint (0 when inside).
    pub multiplier: f64,
    /// `|Σ 4^{jr} b² − R²| / R²` at the returned point.
    pub kkt_residual: f64,
    #[serde(skip)]
    pub projected: CoefficientArray,
}

/// Projects `c` onto `{b : Σ_j 4^{jr} ‖P_j b‖² ≤ R²}`.
///
/// The minimiser is `b_{j,k} = a_{j,k} / (1 + λ 4^{jr})`, where λ = 0 if `c`
/// already lies in the ball and otherwise is the root of the decreasing map
/// `λ ↦ Σ_j 4^{jr} ‖P_j c‖² / (1 + λ 4^{jr})² − R²`, located by bisection
/// until the constraint residual is at most `tol · R²`.
pub fn project_onto_ball(c: &CoefficientArray, ball: &BallSpec, tol: f64) -> Result<ProjectionResult> {
    let masses = c.level_norms_sq();
    let solution = solve_projection(&masses, ball, tol)?;
    let projected = if solution.multiplier == 0.0 {
        c.clone()
    } else {
        let lambda = solution.multiplier;
        c.map_levels(|j, a| a / (1.0 + lambda * sobolev_weight(j, ball.r)))
    };
    Ok(ProjectionResult {
        distance: solution.distance,
        multiplier: solution.multiplier,
        kkt_residual: solution.kkt_residual,
        projected,
    })
}

/// Distance to the ball of any array with squared level masses
/// `masses[i] = ‖P_{i+2} c‖²`. The projection only sees these masses.
pub fn distance_from_level_masses(masses: &[f64], ball: &BallSpec, tol: f64) -> Result<f64> {
    solve_projection(masses, ball, tol).map(|p| p.distance)
}

struct Solution {
    distance: f64,
    multiplier: f64,
    kkt_residual: f64,
}

fn solve_projection(masses: &[f64], ball: &BallSpec, tol: f64) -> Result<Solution> {
    if ball.kind != BallKind::Ell2 {
        return Err(Error::InvalidConfig("projection is only defined for the ell2 ball".into()));
    }
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::InvalidConfig(format!("tolerance {tol} must be positive")));
    }
    let j_max = MIN_LEVEL + masses.len() as u32 - 1;
    let weights: Vec<f64> = (MIN_LEVEL..=j_max).map(|j| sobolev_weight(j, ball.r)).collect();
    if weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::Overflow(format!(
            "Sobolev weight 4^(j r) overflows for r = {} at j_max = {j_max}",
            ball.r
        )));
    }
    let r2 = ball.radius * ball.radius;
    let total: f64 = weights.iter().zip(masses).map(|(w, m)| w * m).sum();

    if total <= r2 {
        return Ok(Solution { distance: 0.0, multiplier: 0.0, kkt_residual: 0.0 });
    }

    let constraint = |lambda: f64| -> f64 {
        weights
            .iter()
            .zip(masses)
            .map(|(w, m)| {
                let d = 1.0 + lambda * w;
                w * m / (d * d)
            })
            .sum::<f64>()
            - r2
    };

    // Any root satisfies (√S/R − 1)/w_max ≤ λ ≤ (√S/R − 1)/w_min, both of
    // which lie inside [0, S/R²].
    let excess = (total / r2).sqrt() - 1.0;
    let w_min = weights.iter().copied().fold(f64::INFINITY, f64::min);
    let w_max = weights.iter().copied().fold(0.0, f64::max);
    let mut lo = (excess / w_max).max(0.0);
    let mut hi = (excess / w_min).min(total / r2);
    if constraint(lo) < 0.0 {
        lo = 0.0;
    }
    if constraint(hi) > 0.0 {
        hi = total / r2;
    }

    let mut best = (hi, constraint(hi));
    for _ in 0..MAX_BISECTION_ITERS {
        let mid = if lo > 0.0 && hi / lo > 4.0 { (lo * hi).sqrt() } else { 0.5 * (lo + hi) };
        let g = constraint(mid);
        if g.abs() < best.1.abs() {
            best = (mid, g);
        }
        if g.abs() <= tol * r2 {
            break;
        }
        if g > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    let (lambda, g) = best;
    let residual = g.abs() / r2;
    if residual > tol {
        return Err(Error::NonConvergence { iterations: MAX_BISECTION_ITERS, residual });
    }

    let distance_sq: f64 = weights
        .iter()
        .zip(masses)
        .map(|(w, m)| {
            let shrink = lambda * w / (1.0 + lambda * w);
            m * shrink * shrink
        })
        .sum();
    Ok(Solution { distance: distance_sq.sqrt(), multiplier: lambda, kkt_residual: residual })
}

pub fn distance_to_ball(c: &CoefficientArray, ball: &BallSpec, tol: f64) -> Result<f64> {
    project_onto_ball(c, ball, tol).map(|p| p.distance)
}

/// Distances `dist(P_2^j c, ball)` for `j = 2..=j_max`, level 2 first.
pub fn truncation_distances(c: &CoefficientArray, ball: &BallSpec, j_max: u32, tol: f64) -> Result<Vec<f64>> {
    if j_max < MIN_LEVEL || j_max > c.j_max() {
        return Err(Error::LevelOutOfRange { level: j_max, j_max: c.j_max() });
    }
    let masses = c.level_norms_sq();
    (1..=(j_max - MIN_LEVEL + 1) as usize)
        .map(|len| distance_from_level_masses(&masses[..len], ball, tol))
        .collect()
}

/// Profile with `‖P_j f‖ = R / 2^{js}` on every level `2..=j_max`.
///
/// It sits on the boundary of `B_{s,∞}(R)` but has ℓ₂-Sobolev norm
/// `R √(j_max − 1)` at regularity `s`.
pub fn make_geometric_profile(radius: f64, s: f64, j_max: u32, placement: MassPlacement) -> Result<CoefficientArray> {
    if j_max < 3 {
        return Err(Error::InvalidConfig(format!("geometric profile needs j_max >= 3, got {j_max}")));
    }
    check_positive("radius", radius)?;
    check_positive("s", s)?;
    let norms: Vec<f64> = (MIN_LEVEL..=j_max).map(|j| radius / (f64::from(j) * s).exp2()).collect();
    CoefficientArray::from_level_norms(&norms, placement)
}

/// Profile with `‖P_2 f‖² = a² R² / 4^{2s}`, `‖P_J f‖² = R² / 4^{Js}` and no
/// mass elsewhere.
pub fn make_two_level_profile(a: f64, radius: f64, s: f64, level: u32, placement: MassPlacement) -> Result<CoefficientArray> {
    if !(a.is_finite() && a > 1.0) {
        return Err(Error::InvalidConfig(format!("two-level amplitude a = {a} must exceed 1")));
    }
    if level < 3 {
        return Err(Error::InvalidConfig(format!("two-level profile needs J >= 3, got {level}")));
    }
    check_positive("radius", radius)?;
    check_positive("s", s)?;
    let mut norms = vec![0.0; (level - MIN_LEVEL + 1) as usize];
    norms[0] = a * radius / (2.0 * s).exp2();
    norms[(level - MIN_LEVEL) as usize] = radius / (f64::from(level) * s).exp2();
    CoefficientArray::from_level_norms(&norms, placement)
}

fn check_positive(name: &str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!("{name} = {x} must be positive")))
    }
}

/// Smallest level `j*` with `dist(P_2^{j*-1} c) ≤ ρ_{j*-1}` and
/// `dist(P_2^{j*} c) > ρ_{j*}`.
///
/// `rho[i]` is `ρ_{i+2}`, so the cutoff is `J = rho.len() + 1`; `ρ_1 = 0` and
/// `dist(P_2^1 c) = 0`. Requires `dist(P_2^J c) > ρ_J`.
pub fn transition_index(c: &CoefficientArray, ball: &BallSpec, rho: &[f64], tol: f64) -> Result<u32> {
    if rho.is_empty() {
        return Err(Error::InvalidConfig("rho schedule must cover at least level 2".into()));
    }
    let cutoff = MIN_LEVEL + rho.len() as u32 - 1;
    if c.j_max() < cutoff {
        return Err(Error::Precondition(format!(
            "signal stops at level {} but the schedule runs to {cutoff}",
            c.j_max()
        )));
    }
    let dists = truncation_distances(c, ball, cutoff, tol)?;
    if dists[dists.len() - 1] <= rho[rho.len() - 1] {
        return Err(Error::Precondition(format!(
            "dist(P_2^{cutoff} f) = {:e} does not exceed rho_{cutoff} = {:e}",
            dists[dists.len() - 1],
            rho[rho.len() - 1]
        )));
    }
    first_transition(&dists, rho).ok_or_else(|| Error::Precondition("no transition index found".into()))
}

/// All levels at which the truncated distance crosses the schedule, given
/// precomputed distances `dists[i] = dist(P_2^{i+2} c)`.
pub fn transition_levels(dists: &[f64], rho: &[f64]) -> Vec<u32> {
    (0..dists.len().min(rho.len()))
        .filter(|&i| {
            let (prev_d, prev_rho) = if i == 0 { (0.0, 0.0) } else { (dists[i - 1], rho[i - 1]) };
            prev_d <= prev_rho && dists[i] > rho[i]
        })
        .map(|i| MIN_LEVEL + i as u32)
        .collect()
}

fn first_transition(dists: &[f64], rho: &[f64]) -> Option<u32> {
    transition_levels(dists, rho).first().copied()
}
