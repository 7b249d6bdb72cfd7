//! Pipeline glue: dataset-level training, scoring, and evaluation.
//!
//! Training mines context from the training sequences, calibrates the
//! overspeed threshold, fits the normalizer, trains one model per noise
//! factor in the grid, selects the best (validation AUC when a labeled
//! validation set is supplied, held-out reconstruction loss otherwise), and
//! calibrates the decision threshold on training scores.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{Dataset, IngestError, SequenceData};
use crate::mix_seed;
use crate::report::{EvalReport, ReportConfig};
use vad_core::context::{
    calibrate_speed_threshold, mine_sequence, ContextError, ContextFeatures, ContextParams,
    SequenceSpeedIndex,
};
use vad_core::dae::{mse, DaeError, DaeModel, TrainConfig};
use vad_core::detect::{calibrate_threshold, score_frame, DetectError, FrameScore};
use vad_core::eval::{auc, eer, roc_curve, MetricError};
use vad_core::feature::{
    assemble, standard_schema, BlockSource, FeatureError, FeatureSchema, FeatureVector, Normalizer,
};
use vad_core::scene::Track;

/// The noise-factor grid searched by default.
pub const NOISE_GRID: [f64; 9] = [0.01, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4];

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Context(#[from] ContextError),
    #[error(transparent)]
    Dae(#[from] DaeError),
    #[error(transparent)]
    Detect(#[from] DetectError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("sequence `{sequence}` frame {frame} has no ground-truth label")]
    MissingLabels { sequence: String, frame: usize },
    #[error("{0}")]
    Config(String),
}

/// A trained model plus everything needed to score new data.
#[derive(Clone, Debug, PartialEq)]
pub struct Detector {
    pub model: DaeModel,
    pub context_params: ContextParams,
    pub decision_threshold: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SequenceScores {
    pub sequence: String,
    pub scores: Vec<FrameScore>,
}

/// Context-mining calibration settings used at training time.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContextCalibration {
    pub window: usize,
    pub speed_percentile: f64,
    pub radius_scale: f64,
}

impl Default for ContextCalibration {
    fn default() -> Self {
        Self { window: 10, speed_percentile: 99.5, radius_scale: 1.0 }
    }
}

#[derive(Clone, Debug)]
pub struct TrainOptions {
    /// Schema blocks, in order. The no-context ablation passes `[Categories]`.
    pub sources: Vec<BlockSource>,
    pub hidden_dims: Vec<usize>,
    /// Base optimizer settings; the noise factor is taken from the grid.
    pub train: TrainConfig,
    pub noise_grid: Vec<f64>,
    pub calibration: ContextCalibration,
    /// Percentile of training reconstruction errors used as the decision
    /// threshold.
    pub threshold_percentile: f64,
    /// Fraction of training vectors held out for noise-factor selection when
    /// no validation set is given and the grid has more than one entry.
    pub holdout_fraction: f64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            sources: vec![
                BlockSource::Categories,
                BlockSource::Spatial,
                BlockSource::Temporal,
                BlockSource::Group,
            ],
            hidden_dims: vad_core::dae::DEFAULT_HIDDEN_DIMS.to_vec(),
            train: TrainConfig::default(),
            noise_grid: NOISE_GRID.to_vec(),
            calibration: ContextCalibration::default(),
            threshold_percentile: 99.0,
            holdout_fraction: 0.1,
        }
    }
}

/// One grid entry's training record.
#[derive(Clone, Debug)]
pub struct NoiseRun {
    pub noise_factor: f64,
    pub loss_history: Vec<f64>,
    pub epochs_run: usize,
    /// Validation AUC or held-out reconstruction loss, absent for a
    /// single-entry grid.
    pub selection_metric: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub detector: Detector,
    pub runs: Vec<NoiseRun>,
    pub selected_noise: f64,
    /// How the winner was chosen: `single`, `validation-auc`, or
    /// `holdout-reconstruction`.
    pub selection_rule: String,
}

/// Builds the standard schema for a dataset, verifying that every sequence
/// agrees on the region-class table when spatial context is requested.
pub fn dataset_schema(
    dataset: &Dataset,
    sources: &[BlockSource],
) -> Result<FeatureSchema, PipelineError> {
    let needs_regions = sources.contains(&BlockSource::Spatial);
    let region_names: Vec<String> = if needs_regions {
        let first = dataset
            .sequences
            .first()
            .ok_or_else(|| PipelineError::Config("dataset has no sequences".into()))?;
        let names = first.segmentation[0].class_names().to_vec();
        for seq in &dataset.sequences {
            for map in &seq.segmentation {
                if map.class_names() != names.as_slice() {
                    return Err(PipelineError::Config(format!(
                        "sequence `{}` disagrees on region classes",
                        seq.name
                    )));
                }
            }
        }
        names
    } else {
        Vec::new()
    };
    Ok(standard_schema(
        &dataset.manifest.category_classes,
        &region_names,
        &dataset.manifest.object_classes,
        sources,
    ))
}

fn sequence_tracks(sequence: &SequenceData) -> Vec<Vec<Track>> {
    sequence.frames.iter().map(|f| f.tracks.clone()).collect()
}

/// Mines context for every sequence; zeroed contexts when the schema carries
/// no context blocks.
fn mined_contexts(
    dataset: &Dataset,
    schema: &FeatureSchema,
    params: &ContextParams,
) -> Vec<Vec<ContextFeatures>> {
    dataset
        .sequences
        .iter()
        .map(|seq| {
            if schema.has_context() {
                mine_sequence(&seq.frames, &seq.segmentation, dataset.object_class_count(), params)
            } else {
                seq.frames.iter().map(|_| ContextFeatures::empty(0, 0)).collect()
            }
        })
        .collect()
}

/// Overspeed threshold from all trailing-window mean speeds in the dataset.
pub fn calibrate_speed_threshold_for(
    dataset: &Dataset,
    window: usize,
    percentile: f64,
) -> Result<f64, PipelineError> {
    let mut means = Vec::new();
    for seq in &dataset.sequences {
        let index = SequenceSpeedIndex::build(&vad_core::context::resolve_velocities(
            &sequence_tracks(seq),
        ), window);
        means.extend_from_slice(index.window_means());
    }
    Ok(calibrate_speed_threshold(&means, percentile)?)
}

impl Detector {
    pub fn method_name(&self) -> &'static str {
        if self.model.schema().has_context() {
            "dae+context"
        } else {
            "dae (no context)"
        }
    }

    /// Scores every frame of every sequence; per-frame context is mined with
    /// the detector's stored parameters, and the stored decision threshold is
    /// applied when present.
    pub fn score_dataset(&self, dataset: &Dataset) -> Result<Vec<SequenceScores>, PipelineError> {
        let contexts = mined_contexts(dataset, self.model.schema(), &self.context_params);
        let mut out = Vec::with_capacity(dataset.sequences.len());
        for (seq, seq_contexts) in dataset.sequences.iter().zip(contexts.iter()) {
            let mut scores = Vec::with_capacity(seq.frames.len());
            for (frame, context) in seq.frames.iter().zip(seq_contexts.iter()) {
                let mut score = score_frame(&self.model, frame, context)?;
                if let Some(threshold) = self.decision_threshold {
                    score.apply_threshold(threshold);
                }
                scores.push(score);
            }
            out.push(SequenceScores { sequence: seq.name.clone(), scores });
        }
        Ok(out)
    }

    /// Frame-level evaluation against ground truth: ROC, AUC, and EER over
    /// all sequences, with the run configuration echoed into the report.
    pub fn evaluate(&self, dataset: &Dataset) -> Result<EvalReport, PipelineError> {
        for seq in &dataset.sequences {
            for frame in &seq.frames {
                if frame.label.is_none() {
                    return Err(PipelineError::MissingLabels {
                        sequence: seq.name.clone(),
                        frame: frame.frame,
                    });
                }
            }
        }
        let scored = self.score_dataset(dataset)?;
        let mut errors = Vec::new();
        let mut labels = Vec::new();
        for (seq, scores) in dataset.sequences.iter().zip(scored.iter()) {
            for (frame, score) in seq.frames.iter().zip(scores.scores.iter()) {
                errors.push(score.error);
                labels.push(frame.label == Some(vad_core::scene::FrameLabel::Abnormal));
            }
        }
        let curve = roc_curve(&errors, &labels)?;
        let auc_value = auc(&errors, &labels)?;
        let eer_value = eer(&errors, &labels)?;
        let positives = labels.iter().filter(|&&l| l).count();
        Ok(EvalReport {
            method: self.method_name().to_string(),
            auc: auc_value,
            eer: eer_value,
            positives,
            negatives: labels.len() - positives,
            config: ReportConfig {
                noise_factor: self.model.meta().map(|m| m.noise_factor).unwrap_or(0.0),
                context_enabled: self.model.schema().has_context(),
                window: self.context_params.window,
                speed_threshold: self.context_params.speed_threshold,
                radius_scale: self.context_params.radius_scale,
                decision_threshold: self.decision_threshold,
            },
            roc: curve.iter().map(|p| (p.fpr, p.tpr)).collect(),
        })
    }
}

/// Clean (uncorrupted) reconstruction errors of normalized vectors.
fn reconstruction_errors(model: &DaeModel, vectors: &[FeatureVector]) -> Result<Vec<f64>, DaeError> {
    vectors
        .iter()
        .map(|v| {
            let y = model.forward_eval(v)?;
            Ok(mse(v, &y))
        })
        .collect()
}

/// Trains a detector on a normal-only dataset. See the module docs for the
/// full sequence of steps.
pub fn train_detector(
    dataset: &Dataset,
    validation: Option<&Dataset>,
    options: &TrainOptions,
) -> Result<TrainOutcome, PipelineError> {
    if options.noise_grid.is_empty() {
        return Err(PipelineError::Config("noise grid is empty".into()));
    }
    let schema = dataset_schema(dataset, &options.sources)?;

    let context_params = if schema.has_context() {
        ContextParams {
            window: options.calibration.window,
            speed_threshold: calibrate_speed_threshold_for(
                dataset,
                options.calibration.window,
                options.calibration.speed_percentile,
            )?,
            radius_scale: options.calibration.radius_scale,
        }
    } else {
        ContextParams::default()
    };

    let contexts = mined_contexts(dataset, &schema, &context_params);
    let mut raw: Vec<FeatureVector> = Vec::with_capacity(dataset.frame_total());
    for (seq, seq_contexts) in dataset.sequences.iter().zip(contexts.iter()) {
        for (frame, context) in seq.frames.iter().zip(seq_contexts.iter()) {
            raw.push(assemble(context, &frame.categories, &schema)?);
        }
    }
    let normalizer = Normalizer::fit(&raw)?;
    let vectors: Vec<FeatureVector> =
        raw.iter().map(|v| normalizer.normalize(v)).collect::<Result<_, _>>()?;

    // Held-out split for noise selection (seeded, shared across the grid).
    let use_holdout = validation.is_none() && options.noise_grid.len() > 1;
    let (fit_vectors, holdout_vectors): (Vec<FeatureVector>, Vec<FeatureVector>) = if use_holdout {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut order: Vec<usize> = (0..vectors.len()).collect();
        let mut rng =
            rand_chacha::ChaCha8Rng::seed_from_u64(mix_seed(options.train.seed, 0x5E11));
        order.shuffle(&mut rng);
        let holdout_len =
            ((vectors.len() as f64 * options.holdout_fraction) as usize).clamp(1, vectors.len() - 1);
        let (holdout_idx, fit_idx) = order.split_at(holdout_len);
        (
            fit_idx.iter().map(|&i| vectors[i].clone()).collect(),
            holdout_idx.iter().map(|&i| vectors[i].clone()).collect(),
        )
    } else {
        (vectors.clone(), Vec::new())
    };

    let mut runs: Vec<NoiseRun> = Vec::with_capacity(options.noise_grid.len());
    let mut candidates: Vec<DaeModel> = Vec::with_capacity(options.noise_grid.len());
    for (idx, &noise) in options.noise_grid.iter().enumerate() {
        let mut model = DaeModel::init_with_dims(
            schema.clone(),
            normalizer.clone(),
            &options.hidden_dims,
            mix_seed(options.train.seed, 1000 + idx as u64),
        )?;
        let config = TrainConfig {
            noise_factor: noise,
            seed: mix_seed(options.train.seed, 2000 + idx as u64),
            ..options.train.clone()
        };
        let report = model.train(&fit_vectors, &config)?;
        runs.push(NoiseRun {
            noise_factor: noise,
            loss_history: report.loss_history,
            epochs_run: report.epochs_run,
            selection_metric: None,
        });
        candidates.push(model);
    }

    let (selected_idx, selection_rule) = if options.noise_grid.len() == 1 {
        (0, "single".to_string())
    } else if let Some(val) = validation {
        let mut best = 0;
        let mut best_auc = f64::NEG_INFINITY;
        for (idx, model) in candidates.iter().enumerate() {
            let probe = Detector {
                model: model.clone(),
                context_params: context_params.clone(),
                decision_threshold: None,
            };
            let auc_value = probe.evaluate(val)?.auc;
            runs[idx].selection_metric = Some(auc_value);
            if auc_value > best_auc {
                best_auc = auc_value;
                best = idx;
            }
        }
        (best, "validation-auc".to_string())
    } else {
        let mut best = 0;
        let mut best_loss = f64::INFINITY;
        for (idx, model) in candidates.iter().enumerate() {
            let errors = reconstruction_errors(model, &holdout_vectors)?;
            let mean = errors.iter().sum::<f64>() / errors.len() as f64;
            runs[idx].selection_metric = Some(mean);
            if mean < best_loss {
                best_loss = mean;
                best = idx;
            }
        }
        (best, "holdout-reconstruction".to_string())
    };

    let mut model = candidates.swap_remove(selected_idx);
    // Record the root seed: it is what reproduces this artifact end to end.
    if let Some(meta) = model.meta().cloned() {
        model.set_meta(Some(vad_core::dae::TrainMeta { seed: options.train.seed, ..meta }));
    }
    let train_scores = reconstruction_errors(&model, &vectors)?;
    let decision_threshold = calibrate_threshold(&train_scores, options.threshold_percentile)?;
    let selected_noise = options.noise_grid[selected_idx];
    Ok(TrainOutcome {
        detector: Detector {
            model,
            context_params,
            decision_threshold: Some(decision_threshold),
        },
        runs,
        selected_noise,
        selection_rule,
    })
}
