use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CurveError {
    #[error("no scores")]
    NoScores,
    #[error("thresholds must be strictly ascending")]
    Unsorted,
    #[error("a curve needs at least two points, got {0}")]
    TooShort(usize),
    #[error("thresholds and percentages differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
}

/// Percentage of documents scoring above each threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreCurve {
    pub thresholds: Vec<f64>,
    pub percentages: Vec<f64>,
}

/// `points` evenly spaced thresholds from 0 to 1 inclusive.
pub fn default_grid(points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![0.0],
        n => (0..n).map(|i| i as f64 / (n - 1) as f64).collect(),
    }
}

/// `p(t) = 100 * |{score > t}| / N` at each threshold.
pub fn exceedance_curve(scores: &[f64], thresholds: &[f64]) -> Result<ScoreCurve, CurveError> {
    if scores.is_empty() {
        return Err(CurveError::NoScores);
    }
    if thresholds.windows(2).any(|w| w[0] >= w[1]) {
        return Err(CurveError::Unsorted);
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let percentages: Vec<f64> = thresholds
        .iter()
        .map(|&t| {
            let at_or_below = sorted.partition_point(|&s| s <= t);
            100.0 * (sorted.len() - at_or_below) as f64 / n
        })
        .collect();
    assert!(percentages.windows(2).all(|w| w[0] >= w[1]), "exceedance curve must be non-increasing");
    Ok(ScoreCurve { thresholds: thresholds.to_vec(), percentages })
}

/// Trapezoidal area under the curve, in percentage-threshold units.
pub fn auc(curve: &ScoreCurve) -> Result<f64, CurveError> {
    let (t, p) = (&curve.thresholds, &curve.percentages);
    if t.len() != p.len() {
        return Err(CurveError::LengthMismatch(t.len(), p.len()));
    }
    if t.len() < 2 {
        return Err(CurveError::TooShort(t.len()));
    }
    Ok((0..t.len() - 1).map(|i| (p[i] + p[i + 1]) / 2.0 * (t[i + 1] - t[i])).sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strict_exceedance() {
        let c = exceedance_curve(&[0.5, 0.5], &[0.4, 0.6]).unwrap();
        assert_eq!(c.percentages, vec![100.0, 0.0]);
        let c = exceedance_curve(&[0.5, 0.5], &[0.5]).unwrap();
        assert_eq!(c.percentages, vec![0.0]);
        let c = exceedance_curve(&[0.0; 7], &default_grid(11)).unwrap();
        assert!(c.percentages.iter().all(|&p| p == 0.0));
        assert_eq!(exceedance_curve(&[], &[0.1]), Err(CurveError::NoScores));
    }

    #[test]
    fn auc_examples() {
        let c = ScoreCurve { thresholds: vec![0.0, 0.5, 1.0], percentages: vec![100.0, 50.0, 0.0] };
        assert_eq!(auc(&c).unwrap(), 50.0);
        let c = ScoreCurve { thresholds: default_grid(101), percentages: vec![0.0; 101] };
        assert_eq!(auc(&c).unwrap(), 0.0);
        let c = ScoreCurve { thresholds: vec![0.0], percentages: vec![1.0] };
        assert_eq!(auc(&c), Err(CurveError::TooShort(1)));
    }

    #[test]
    fn grid_endpoints() {
        let g = default_grid(101);
        assert_eq!((g[0], g[50], g[100]), (0.0, 0.5, 1.0));
    }
}
