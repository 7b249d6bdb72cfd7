//! Frame-level ROC curve, AUC, and equal error rate.
//!
//! The sweep convention: a frame is predicted abnormal when its score is
//! strictly greater than the threshold, thresholds swept from +∞ down. The
//! curve carries one point per distinct score plus the origin; AUC is the
//! trapezoid area, which makes it exactly the Mann-Whitney statistic
//! `P(s⁺ > s⁻) + ½·P(s⁺ = s⁻)`.

use alloc::vec::Vec;

#[derive(Clone, Debug, PartialEq)]
pub enum MetricError {
    Empty,
    LengthMismatch { scores: usize, labels: usize },
    SingleClass,
    NonFiniteScore,
}

impl core::fmt::Display for MetricError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            MetricError::Empty => write!(f, "no samples"),
            MetricError::LengthMismatch { scores, labels } => {
                write!(f, "{scores} scores vs {labels} labels")
            }
            MetricError::SingleClass => {
                write!(f, "labels contain only one class; metrics undefined")
            }
            MetricError::NonFiniteScore => write!(f, "scores must be finite"),
        }
    }
}

impl core::error::Error for MetricError {}

/// One operating point of the ROC curve.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
}

fn check(scores: &[f64], labels: &[bool]) -> Result<(usize, usize), MetricError> {
    if scores.is_empty() {
        return Err(MetricError::Empty);
    }
    if scores.len() != labels.len() {
        return Err(MetricError::LengthMismatch { scores: scores.len(), labels: labels.len() });
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(MetricError::NonFiniteScore);
    }
    let positives = labels.iter().filter(|&&l| l).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(MetricError::SingleClass);
    }
    Ok((positives, negatives))
}

/// ROC points from (score, abnormal-label) pairs: `(0,0)` for the +∞
/// threshold, then one point per distinct score in descending order. Both
/// coordinates are non-decreasing and the curve ends at `(1,1)`.
pub fn roc_curve(scores: &[f64], labels: &[bool]) -> Result<Vec<RocPoint>, MetricError> {
    let (positives, negatives) = check(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap());

    let mut points = Vec::with_capacity(scores.len() + 1);
    points.push(RocPoint { fpr: 0.0, tpr: 0.0 });
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut i = 0;
    while i < order.len() {
        let score = scores[order[i]];
        // Consume the whole tie group before emitting a point.
        while i < order.len() && scores[order[i]] == score {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            fpr: fp as f64 / negatives as f64,
            tpr: tp as f64 / positives as f64,
        });
    }
    Ok(points)
}

/// Trapezoidal area under the ROC curve.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64, MetricError> {
    let curve = roc_curve(scores, labels)?;
    let mut area = 0.0;
    for pair in curve.windows(2) {
        let dx = pair[1].fpr - pair[0].fpr;
        area += dx * 0.5 * (pair[0].tpr + pair[1].tpr);
    }
    Ok(area)
}

/// Equal error rate: the common value of FPR and FNR where the ROC polyline
/// crosses the FPR = 1−TPR diagonal, linearly interpolated between the
/// adjacent points straddling it.
pub fn eer(scores: &[f64], labels: &[bool]) -> Result<f64, MetricError> {
    let curve = roc_curve(scores, labels)?;
    // f = FPR − FNR runs from −1 at (0,0) to +1 at (1,1) and never decreases.
    for pair in curve.windows(2) {
        let f0 = pair[0].fpr + pair[0].tpr - 1.0;
        let f1 = pair[1].fpr + pair[1].tpr - 1.0;
        if f0 <= 0.0 && f1 >= 0.0 {
            if f1 == f0 {
                return Ok(pair[0].fpr);
            }
            let alpha = -f0 / (f1 - f0);
            return Ok(pair[0].fpr + alpha * (pair[1].fpr - pair[0].fpr));
        }
    }
    unreachable!("ROC runs from (0,0) to (1,1), so the diagonal is always crossed")
}
