//! Test-set evaluation, log-log rate fitting and bound verification.

use alloc::vec::Vec;

use crate::data::{Dataset, LabelKind};
use crate::error::{check_dim, invalid, Error, Result};
use crate::linalg;
use crate::loss::{hinge, multiclass_margin};
use crate::model::{block_scores, top_two, Label};
use crate::theory::TheoremBound;

/// Aggregate test metrics. The losses here carry no ½ factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub test_error: f64,
    /// Mean `(1 − margin)₊`.
    pub mean_hinge: f64,
    /// Mean `(1 − margin)₊²`.
    pub mean_sq_hinge: f64,
}

/// Evaluates a parameter (flat `k·d` for multiclass) on `test`.
///
/// Binary predictions are `sign(θᵀx)` with a zero score counted as an
/// error; multiclass predictions are the argmax class, lowest index on ties.
pub fn evaluate(theta: &[f64], test: &Dataset) -> Result<Evaluation> {
    if test.is_empty() {
        return Err(invalid("test set is empty"));
    }
    let blocks = test.labels.classes().unwrap_or(1);
    check_dim(test.dim * blocks, theta.len())?;
    let (mut errors, mut h_sum, mut h2_sum) = (0usize, 0.0, 0.0);
    for s in &test.samples {
        let (wrong, margin) = match (test.labels, s.label) {
            (LabelKind::Binary, Some(Label::Binary(y))) => {
                let m = y.value() * linalg::dot(theta, &s.features);
                (m <= 0.0, m)
            }
            (LabelKind::Multiclass(k), Some(Label::Class(y))) if y < k => {
                let predicted = top_two(&block_scores(theta, test.dim, &s.features))?.first;
                (predicted != y, multiclass_margin(theta, test.dim, &s.features, y).1)
            }
            _ => return Err(invalid("test sample has a missing or mismatched label")),
        };
        errors += usize::from(wrong);
        let h = hinge(margin);
        h_sum += h;
        h2_sum += h * h;
    }
    let n = test.len() as f64;
    Ok(Evaluation { test_error: errors as f64 / n, mean_hinge: h_sum / n, mean_sq_hinge: h2_sum / n })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    /// Least-squares slope of `ln(value)` against `ln(t)`.
    pub slope: f64,
    pub intercept: f64,
    /// Points that entered the fit.
    pub used: usize,
    /// Position of the first exactly-zero value, if any.
    pub first_zero: Option<usize>,
}

/// Minimum number of positive points [`fit_rate`] accepts.
pub const MIN_RATE_POINTS: usize = 5;

/// Fits `value ≈ C·t^slope` by least squares in log-log space. Zero values
/// cannot enter the fit; they are dropped and the first one is reported.
pub fn fit_rate(points: &[(u64, f64)]) -> Result<RateFit> {
    let first_zero = points.iter().position(|&(_, v)| v == 0.0);
    let logs: Vec<(f64, f64)> = points
        .iter()
        .filter(|&&(t, v)| t > 0 && v > 0.0 && v.is_finite())
        .map(|&(t, v)| (libm::log(t as f64), libm::log(v)))
        .collect();
    if logs.len() < MIN_RATE_POINTS {
        return Err(Error::InsufficientData { needed: MIN_RATE_POINTS, got: logs.len() });
    }
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &(x, y) in &logs {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    if !(sxx > 0.0) {
        return Err(invalid("rate fit needs at least two distinct t values"));
    }
    let slope = sxy / sxx;
    Ok(RateFit { slope, intercept: my - slope * mx, used: logs.len(), first_zero })
}

/// Fits only the last `ceil(len/2)` points.
pub fn fit_rate_second_half(points: &[(u64, f64)]) -> Result<RateFit> {
    fit_rate(&points[points.len() / 2..])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundCheck {
    pub n: u64,
    pub bound: f64,
    pub observed: f64,
    pub ok: bool,
}

/// Compares each `(n, observed mean hinge)` against the closed-form bound.
pub fn verify_theorem_bound(points: &[(u64, f64)], bound: &TheoremBound) -> Vec<BoundCheck> {
    points
        .iter()
        .map(|&(n, observed)| {
            let b = bound.at(n.max(1));
            BoundCheck { n, bound: b, observed, ok: observed <= b }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Sample, Sign};
    use alloc::vec;

    fn binary_set(points: &[(f64, Sign)]) -> Dataset {
        Dataset::new(
            1,
            LabelKind::Binary,
            points.iter().map(|&(x, y)| Sample::new(vec![x], Some(Label::Binary(y)))).collect(),
        )
        .unwrap()
    }

    #[test]
    fn zero_model_is_always_wrong() {
        let d = binary_set(&[(1.0, Sign::Pos), (-2.0, Sign::Neg), (0.5, Sign::Neg)]);
        let e = evaluate(&[0.0], &d).unwrap();
        assert_eq!(e.test_error, 1.0);
        assert_eq!(e.mean_hinge, 1.0);
        assert_eq!(e.mean_sq_hinge, 1.0);
    }

    #[test]
    fn hand_computed_binary_metrics() {
        // margins: 2, 1, -0.5  -> hinge 0, 0, 1.5
        let d = binary_set(&[(2.0, Sign::Pos), (-1.0, Sign::Neg), (0.5, Sign::Neg)]);
        let e = evaluate(&[1.0], &d).unwrap();
        assert!((e.test_error - 1.0 / 3.0).abs() < 1e-15);
        assert!((e.mean_hinge - 0.5).abs() < 1e-15);
        assert!((e.mean_sq_hinge - 0.75).abs() < 1e-15);
    }

    #[test]
    fn empty_and_mismatched() {
        let d = Dataset { dim: 1, labels: LabelKind::Binary, samples: vec![] };
        assert!(evaluate(&[0.0], &d).is_err());
        let d = binary_set(&[(1.0, Sign::Pos)]);
        assert!(evaluate(&[0.0, 1.0], &d).is_err());
    }

    #[test]
    fn exact_power_laws() {
        let pts: Vec<(u64, f64)> = (1..=20).map(|i| (i * 100, 3.0 / (i * 100) as f64)).collect();
        assert!((fit_rate(&pts).unwrap().slope + 1.0).abs() < 1e-9);
        let flat: Vec<(u64, f64)> = (1..=20).map(|i| (i * 100, 0.7)).collect();
        assert!(fit_rate(&flat).unwrap().slope.abs() < 1e-9);
    }

    #[test]
    fn zeros_are_dropped_and_reported() {
        let mut pts: Vec<(u64, f64)> = (1..=8).map(|i| (i, 1.0 / i as f64)).collect();
        pts[5].1 = 0.0;
        pts[7].1 = 0.0;
        let fit = fit_rate(&pts).unwrap();
        assert_eq!(fit.first_zero, Some(5));
        assert_eq!(fit.used, 6);
        let few: Vec<(u64, f64)> = (1..=4).map(|i| (i, 1.0)).collect();
        assert!(matches!(fit_rate(&few), Err(Error::InsufficientData { got: 4, .. })));
    }
}
