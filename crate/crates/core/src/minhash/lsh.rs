use serde::{Deserialize, Serialize};

use super::MinHashError;

const INTEGRATION_POINTS: usize = 1000;
/// Objectives closer than this are treated as equal, so rounding noise in
/// the quadrature cannot break analytic ties.
const TIE_EPSILON: f64 = 1e-12;

/// Split of a signature into `bands` bands of `rows` rows each.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandingPlan {
    pub bands: usize,
    pub rows: usize,
    pub threshold: f64,
}

impl BandingPlan {
    pub fn new(bands: usize, rows: usize, threshold: f64, num_perm: usize) -> Result<Self, MinHashError> {
        if bands == 0 || rows == 0 || bands * rows > num_perm {
            return Err(MinHashError::InvalidPlan { bands, rows, num_perm });
        }
        Ok(BandingPlan { bands, rows, threshold })
    }

    /// Probability that two sets with Jaccard `s` share at least one band.
    pub fn candidate_probability(&self, s: f64) -> f64 {
        collision_probability(s, self.bands, self.rows)
    }
}

pub fn collision_probability(s: f64, bands: usize, rows: usize) -> f64 {
    1.0 - (1.0 - s.powi(rows as i32)).powi(bands as i32)
}

fn midpoint(a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    let h = (b - a) / INTEGRATION_POINTS as f64;
    (0..INTEGRATION_POINTS).map(|i| f(a + (i as f64 + 0.5) * h)).sum::<f64>() * h
}

/// Weighted false-positive plus false-negative mass of a plan at threshold `t`.
pub fn banding_objective(bands: usize, rows: usize, t: f64, fp_weight: f64, fn_weight: f64) -> f64 {
    let fp = midpoint(0.0, t, |s| collision_probability(s, bands, rows));
    let fnr = midpoint(t, 1.0, |s| 1.0 - collision_probability(s, bands, rows));
    fp_weight * fp + fn_weight * fnr
}

/// Exhaustive search over all `bands * rows <= num_perm` with equal
/// false-positive/false-negative weights.
pub fn optimal_bands(num_perm: usize, threshold: f64) -> BandingPlan {
    optimal_bands_weighted(num_perm, threshold, 0.5, 0.5)
}

/// Ties (within [`TIE_EPSILON`]) keep the first plan in (bands, rows)
/// ascending order.
pub fn optimal_bands_weighted(num_perm: usize, threshold: f64, fp_weight: f64, fn_weight: f64) -> BandingPlan {
    assert!(num_perm >= 1, "num_perm must be positive");
    let mut best = (1, 1, f64::INFINITY);
    for bands in 1..=num_perm {
        for rows in 1..=num_perm / bands {
            let err = banding_objective(bands, rows, threshold, fp_weight, fn_weight);
            if err < best.2 - TIE_EPSILON {
                best = (bands, rows, err);
            }
        }
    }
    BandingPlan { bands: best.0, rows: best.1, threshold }
}
