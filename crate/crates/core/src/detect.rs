//! Reconstruction-error scoring, threshold calibration, and per-feature
//! explanation of decisions.

use alloc::string::String;
use alloc::vec::Vec;

use crate::context::ContextFeatures;
use crate::dae::{DaeError, DaeModel};
use crate::feature::{assemble, FeatureError, FeatureSchema};
use crate::scene::FrameFeatures;
use crate::stats;

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Decision {
    Normal,
    Abnormal,
}

#[derive(Clone, Debug, PartialEq)]
pub enum DetectError {
    Feature(FeatureError),
    Dae(DaeError),
    EmptyScores,
}

impl core::fmt::Display for DetectError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            DetectError::Feature(e) => write!(f, "{e}"),
            DetectError::Dae(e) => write!(f, "{e}"),
            DetectError::EmptyScores => write!(f, "cannot calibrate a threshold on zero scores"),
        }
    }
}

impl core::error::Error for DetectError {}

impl From<FeatureError> for DetectError {
    fn from(e: FeatureError) -> Self {
        DetectError::Feature(e)
    }
}

impl From<DaeError> for DetectError {
    fn from(e: DaeError) -> Self {
        DetectError::Dae(e)
    }
}

/// One frame's anomaly score: the mean squared reconstruction error in
/// normalized-feature space, the per-feature squared errors behind it, and
/// the thresholded decision once a threshold is applied.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameScore {
    pub frame: usize,
    pub error: f64,
    pub per_feature: Vec<f64>,
    pub decision: Option<Decision>,
}

impl FrameScore {
    /// Marks the frame abnormal when its error strictly exceeds `threshold`
    /// (ties score as normal).
    pub fn apply_threshold(&mut self, threshold: f64) {
        self.decision = Some(if self.error > threshold {
            Decision::Abnormal
        } else {
            Decision::Normal
        });
    }
}

/// Assembles, normalizes, and reconstructs one frame; test-time inputs are
/// never corrupted. The score lives in normalized-feature space so thresholds
/// transfer across sequences.
pub fn score_frame(
    model: &DaeModel,
    features: &FrameFeatures,
    context: &ContextFeatures,
) -> Result<FrameScore, DetectError> {
    let raw = assemble(context, &features.categories, model.schema())?;
    let normalized = model.normalizer().normalize(&raw)?;
    let output = model.forward_eval(&normalized)?;
    let per_feature: Vec<f64> = normalized
        .iter()
        .zip(output.iter())
        .map(|(&x, &y)| (x - y) * (x - y))
        .collect();
    let error = per_feature.iter().sum::<f64>() / per_feature.len() as f64;
    Ok(FrameScore { frame: features.frame, error, per_feature, decision: None })
}

/// Decision threshold as a percentile (default 99) of training scores.
pub fn calibrate_threshold(train_scores: &[f64], percentile: f64) -> Result<f64, DetectError> {
    if train_scores.is_empty() {
        return Err(DetectError::EmptyScores);
    }
    Ok(stats::percentile(train_scores, percentile))
}

/// Top-`k` features by squared reconstruction error, named through the
/// schema. Ties break by schema position; `k` clamps to the dimension.
pub fn explain(score: &FrameScore, schema: &FeatureSchema, top_k: usize) -> Vec<(String, f64)> {
    assert_eq!(
        score.per_feature.len(),
        schema.total_dim(),
        "score does not match schema dimension"
    );
    let mut order: Vec<usize> = (0..score.per_feature.len()).collect();
    // Stable sort keeps schema position as the tie-break.
    order.sort_by(|&a, &b| {
        score.per_feature[b]
            .partial_cmp(&score.per_feature[a])
            .expect("non-finite reconstruction error")
    });
    order
        .into_iter()
        .take(top_k)
        .map(|i| (String::from(schema.dim_name(i)), score.per_feature[i]))
        .collect()
}
