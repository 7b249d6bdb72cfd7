//! Versioned on-disk model format.
//!
//! JSON with a magic string and format version; every floating-point
//! parameter is stored as a decimal string produced by Rust's shortest
//! round-trip formatter, so save → load reproduces each IEEE-754 double bit
//! for bit. The file carries everything scoring needs: schema, normalizer,
//! layer and batch-norm parameters, context-mining parameters, the calibrated
//! decision threshold, and training metadata.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detector::Detector;
use crate::write_atomic;
use vad_core::context::ContextParams;
use vad_core::dae::{BnParams, DaeModel, LayerParams, TrainMeta};
use vad_core::feature::{BlockSource, FeatureBlock, FeatureSchema, Normalizer};
use vad_core::linalg::Matrix;

pub const MODEL_MAGIC: &str = "vad-dae-model";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelFileError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("bad magic string `{found}`, expected `{expected}`")]
    BadMagic { found: String, expected: &'static str },
    #[error("unsupported model format version {found}, this build reads {supported}")]
    UnsupportedVersion { found: u32, supported: u32 },
    #[error("field `{field}`: cannot parse `{value}` as a float")]
    BadNumber { field: &'static str, value: String },
    #[error("model file is inconsistent: {0}")]
    Invalid(String),
}

fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

fn parse_f64(field: &'static str, s: &str) -> Result<f64, ModelFileError> {
    s.parse::<f64>().map_err(|_| ModelFileError::BadNumber { field, value: s.to_string() })
}

fn fmt_vec(vs: &[f64]) -> Vec<String> {
    vs.iter().map(|&v| fmt_f64(v)).collect()
}

fn parse_vec(field: &'static str, vs: &[String]) -> Result<Vec<f64>, ModelFileError> {
    vs.iter().map(|s| parse_f64(field, s)).collect()
}

#[derive(Serialize, Deserialize)]
struct BlockDto {
    name: String,
    source: String,
    dim_names: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct NormalizerDto {
    mins: Vec<String>,
    maxs: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct LayerDto {
    rows: usize,
    cols: usize,
    weight: Vec<String>,
    bias: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct BnDto {
    gamma: Vec<String>,
    beta: Vec<String>,
    running_mean: Vec<String>,
    running_std: Vec<String>,
    epsilon: String,
    momentum: String,
}

#[derive(Serialize, Deserialize)]
struct ContextDto {
    window: usize,
    speed_threshold: String,
    radius_scale: String,
}

#[derive(Serialize, Deserialize)]
struct MetaDto {
    seed: u64,
    noise_factor: String,
    epochs_run: usize,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    magic: String,
    version: u32,
    schema: Vec<BlockDto>,
    normalizer: NormalizerDto,
    layers: Vec<LayerDto>,
    bn: Vec<BnDto>,
    context: ContextDto,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    decision_threshold: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    meta: Option<MetaDto>,
}

fn source_tag(source: BlockSource) -> &'static str {
    match source {
        BlockSource::Categories => "categories",
        BlockSource::Spatial => "spatial",
        BlockSource::Temporal => "temporal",
        BlockSource::Group => "group",
    }
}

fn parse_source(tag: &str) -> Result<BlockSource, ModelFileError> {
    match tag {
        "categories" => Ok(BlockSource::Categories),
        "spatial" => Ok(BlockSource::Spatial),
        "temporal" => Ok(BlockSource::Temporal),
        "group" => Ok(BlockSource::Group),
        other => Err(ModelFileError::Invalid(format!("unknown block source `{other}`"))),
    }
}

fn to_file(detector: &Detector) -> ModelFile {
    let model = &detector.model;
    ModelFile {
        magic: MODEL_MAGIC.to_string(),
        version: MODEL_VERSION,
        schema: model
            .schema()
            .blocks()
            .iter()
            .map(|b| BlockDto {
                name: b.name().to_string(),
                source: source_tag(b.source()).to_string(),
                dim_names: b.dim_names().to_vec(),
            })
            .collect(),
        normalizer: NormalizerDto {
            mins: fmt_vec(model.normalizer().mins()),
            maxs: fmt_vec(model.normalizer().maxs()),
        },
        layers: model
            .layers()
            .iter()
            .map(|l| LayerDto {
                rows: l.weight.rows(),
                cols: l.weight.cols(),
                weight: fmt_vec(l.weight.data()),
                bias: fmt_vec(&l.bias),
            })
            .collect(),
        bn: model
            .bn()
            .iter()
            .map(|b| BnDto {
                gamma: fmt_vec(&b.gamma),
                beta: fmt_vec(&b.beta),
                running_mean: fmt_vec(&b.running_mean),
                running_std: fmt_vec(&b.running_std),
                epsilon: fmt_f64(b.epsilon),
                momentum: fmt_f64(b.momentum),
            })
            .collect(),
        context: ContextDto {
            window: detector.context_params.window,
            speed_threshold: fmt_f64(detector.context_params.speed_threshold),
            radius_scale: fmt_f64(detector.context_params.radius_scale),
        },
        decision_threshold: detector.decision_threshold.map(fmt_f64),
        meta: model.meta().map(|m| MetaDto {
            seed: m.seed,
            noise_factor: fmt_f64(m.noise_factor),
            epochs_run: m.epochs_run,
        }),
    }
}

fn from_file(file: ModelFile) -> Result<Detector, ModelFileError> {
    if file.magic != MODEL_MAGIC {
        return Err(ModelFileError::BadMagic { found: file.magic, expected: MODEL_MAGIC });
    }
    if file.version != MODEL_VERSION {
        return Err(ModelFileError::UnsupportedVersion {
            found: file.version,
            supported: MODEL_VERSION,
        });
    }
    let blocks = file
        .schema
        .into_iter()
        .map(|b| Ok(FeatureBlock::new(b.name, parse_source(&b.source)?, b.dim_names)))
        .collect::<Result<Vec<_>, ModelFileError>>()?;
    let schema =
        FeatureSchema::new(blocks).map_err(|e| ModelFileError::Invalid(e.to_string()))?;
    let normalizer = Normalizer::from_bounds(
        parse_vec("normalizer.mins", &file.normalizer.mins)?,
        parse_vec("normalizer.maxs", &file.normalizer.maxs)?,
    )
    .map_err(|e| ModelFileError::Invalid(e.to_string()))?;

    let mut layers = Vec::with_capacity(file.layers.len());
    for layer in &file.layers {
        let weight = parse_vec("layer.weight", &layer.weight)?;
        if weight.len() != layer.rows * layer.cols {
            return Err(ModelFileError::Invalid(format!(
                "layer weight holds {} values for a {}×{} matrix",
                weight.len(),
                layer.rows,
                layer.cols
            )));
        }
        layers.push(LayerParams {
            weight: Matrix::from_vec(layer.rows, layer.cols, weight),
            bias: parse_vec("layer.bias", &layer.bias)?,
        });
    }
    let mut bn = Vec::with_capacity(file.bn.len());
    for block in &file.bn {
        bn.push(BnParams {
            gamma: parse_vec("bn.gamma", &block.gamma)?,
            beta: parse_vec("bn.beta", &block.beta)?,
            running_mean: parse_vec("bn.running_mean", &block.running_mean)?,
            running_std: parse_vec("bn.running_std", &block.running_std)?,
            epsilon: parse_f64("bn.epsilon", &block.epsilon)?,
            momentum: parse_f64("bn.momentum", &block.momentum)?,
        });
    }
    let meta = file
        .meta
        .map(|m| {
            Ok::<TrainMeta, ModelFileError>(TrainMeta {
                seed: m.seed,
                noise_factor: parse_f64("meta.noise_factor", &m.noise_factor)?,
                epochs_run: m.epochs_run,
            })
        })
        .transpose()?;
    let model = DaeModel::from_parts(schema, normalizer, layers, bn, meta)
        .map_err(|e| ModelFileError::Invalid(e.to_string()))?;
    let context_params = ContextParams {
        window: file.context.window,
        speed_threshold: parse_f64("context.speed_threshold", &file.context.speed_threshold)?,
        radius_scale: parse_f64("context.radius_scale", &file.context.radius_scale)?,
    };
    let decision_threshold = file
        .decision_threshold
        .map(|s| parse_f64("decision_threshold", &s))
        .transpose()?;
    Ok(Detector { model, context_params, decision_threshold })
}

/// Serializes and writes a detector atomically.
pub fn save(detector: &Detector, path: &Path) -> Result<(), ModelFileError> {
    let file = to_file(detector);
    let json = serde_json::to_string_pretty(&file)
        .map_err(|e| ModelFileError::Json { path: path.to_path_buf(), source: e })?;
    write_atomic(path, json.as_bytes())
        .map_err(|e| ModelFileError::Io { path: path.to_path_buf(), source: e })
}

/// Reads, validates, and reconstructs a detector.
pub fn load(path: &Path) -> Result<Detector, ModelFileError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ModelFileError::Io { path: path.to_path_buf(), source: e })?;
    let file: ModelFile = serde_json::from_str(&text)
        .map_err(|e| ModelFileError::Json { path: path.to_path_buf(), source: e })?;
    from_file(file)
}
