//! Feature schema, vector assembly, and min-max normalization.
//!
//! The model input is a flat concatenation of named blocks (detection
//! categories plus mined context). The schema is explicit configuration: it
//! fixes block order, per-dimension names, and the total input dimension.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::context::ContextFeatures;
use crate::scene::CategoryVector;

pub type FeatureVector = Vec<f64>;

/// Where a block's values come from.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum BlockSource {
    Categories,
    Spatial,
    Temporal,
    Group,
}

#[derive(Clone, Debug, PartialEq)]
pub enum FeatureError {
    BlockLengthMismatch { block: String, expected: usize, got: usize },
    DuplicateBlockName(String),
    EmptyTrainingSet,
    MixedDimensions { expected: usize, got: usize },
    DimensionMismatch { expected: usize, got: usize },
    InvalidBounds { index: usize, min: f64, max: f64 },
}

impl core::fmt::Display for FeatureError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            FeatureError::BlockLengthMismatch { block, expected, got } => write!(
                f,
                "block `{block}` declares {expected} dims but its source provided {got}"
            ),
            FeatureError::DuplicateBlockName(name) => {
                write!(f, "duplicate feature block name `{name}`")
            }
            FeatureError::EmptyTrainingSet => write!(f, "cannot fit normalizer on zero vectors"),
            FeatureError::MixedDimensions { expected, got } => {
                write!(f, "training vectors mix dimensions {expected} and {got}")
            }
            FeatureError::DimensionMismatch { expected, got } => {
                write!(f, "vector has dimension {got}, expected {expected}")
            }
            FeatureError::InvalidBounds { index, min, max } => {
                write!(f, "dimension {index} has invalid bounds [{min}, {max}]")
            }
        }
    }
}

impl core::error::Error for FeatureError {}

/// One named block of consecutive feature dimensions.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureBlock {
    name: String,
    source: BlockSource,
    dim_names: Vec<String>,
}

impl FeatureBlock {
    pub fn new(name: impl Into<String>, source: BlockSource, dim_names: Vec<String>) -> Self {
        Self { name: name.into(), source, dim_names }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn source(&self) -> BlockSource {
        self.source
    }

    pub fn len(&self) -> usize {
        self.dim_names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dim_names.is_empty()
    }

    pub fn dim_names(&self) -> &[String] {
        &self.dim_names
    }
}

/// Ordered list of feature blocks; the concatenation contract for model input.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureSchema {
    blocks: Vec<FeatureBlock>,
}

impl FeatureSchema {
    pub fn new(blocks: Vec<FeatureBlock>) -> Result<Self, FeatureError> {
        for (i, block) in blocks.iter().enumerate() {
            if blocks[..i].iter().any(|b| b.name == block.name) {
                return Err(FeatureError::DuplicateBlockName(block.name.clone()));
            }
        }
        Ok(Self { blocks })
    }

    pub fn blocks(&self) -> &[FeatureBlock] {
        &self.blocks
    }

    pub fn total_dim(&self) -> usize {
        self.blocks.iter().map(FeatureBlock::len).sum()
    }

    /// True when any block draws from mined context rather than raw categories.
    pub fn has_context(&self) -> bool {
        self.blocks.iter().any(|b| b.source != BlockSource::Categories)
    }

    /// Dimension range occupied by a named block, if present.
    pub fn block_range(&self, name: &str) -> Option<core::ops::Range<usize>> {
        let mut offset = 0;
        for block in &self.blocks {
            if block.name == name {
                return Some(offset..offset + block.len());
            }
            offset += block.len();
        }
        None
    }

    /// Block slice of an assembled vector, for schema-aware consumers.
    pub fn slice<'a>(&self, vector: &'a [f64], name: &str) -> Option<&'a [f64]> {
        self.block_range(name).map(|r| &vector[r])
    }

    /// Name of one flat dimension, e.g. `spatial:grass×person`.
    pub fn dim_name(&self, index: usize) -> &str {
        let mut offset = 0;
        for block in &self.blocks {
            if index < offset + block.len() {
                return &block.dim_names[index - offset];
            }
            offset += block.len();
        }
        panic!("dimension index {index} outside schema of dim {offset}");
    }
}

/// Builds the standard block set from a dataset's class tables, in a fixed
/// order: categories, spatial, temporal, group. `sources` selects which blocks
/// to include (the no-context ablation passes `[Categories]`).
pub fn standard_schema(
    category_names: &[String],
    region_names: &[String],
    object_names: &[String],
    sources: &[BlockSource],
) -> FeatureSchema {
    let mut blocks = Vec::new();
    for &source in sources {
        let block = match source {
            BlockSource::Categories => FeatureBlock::new(
                "categories",
                source,
                category_names.iter().map(|n| format!("cat:{n}")).collect(),
            ),
            BlockSource::Spatial => {
                let mut names = Vec::new();
                for region in region_names {
                    for object in object_names {
                        names.push(format!("spatial:{region}×{object}"));
                    }
                }
                for (a, obj_a) in object_names.iter().enumerate() {
                    for obj_b in &object_names[a..] {
                        names.push(format!("spatial:adj:{obj_a}×{obj_b}"));
                    }
                }
                FeatureBlock::new("spatial", source, names)
            }
            BlockSource::Temporal => FeatureBlock::new(
                "temporal",
                source,
                alloc::vec![
                    String::from("temporal:flagged_count"),
                    String::from("temporal:max_windowed_speed"),
                ],
            ),
            BlockSource::Group => FeatureBlock::new(
                "group",
                source,
                [
                    "count", "x_min", "x_max", "x_median", "y_min", "y_max", "y_median",
                    "speed_min", "speed_max", "speed_median", "position_residual",
                    "velocity_residual", "presence",
                ]
                .iter()
                .map(|n| format!("group:{n}"))
                .collect(),
            ),
        };
        blocks.push(block);
    }
    FeatureSchema::new(blocks).expect("standard block names are unique")
}

/// Concatenates the schema's blocks into one flat vector, in schema order.
pub fn assemble(
    context: &ContextFeatures,
    categories: &CategoryVector,
    schema: &FeatureSchema,
) -> Result<FeatureVector, FeatureError> {
    let mut out = Vec::with_capacity(schema.total_dim());
    for block in schema.blocks() {
        let values: Vec<f64> = match block.source() {
            BlockSource::Categories => categories.counts().to_vec(),
            source => context.block_values(source),
        };
        if values.len() != block.len() {
            return Err(FeatureError::BlockLengthMismatch {
                block: String::from(block.name()),
                expected: block.len(),
                got: values.len(),
            });
        }
        out.extend_from_slice(&values);
    }
    Ok(out)
}

/// Per-dimension min-max scaling learned from training data.
///
/// Non-constant dimensions map through `(v - min) / (max - min)` clamped to
/// [0, 1]. A dimension constant in training maps its training value to 0 and
/// any other value to 1: a never-varying feature that suddenly deviates is
/// maximal evidence, and collapsing it would blind the detector to exactly the
/// anomalies such features encode.
#[derive(Clone, Debug, PartialEq)]
pub struct Normalizer {
    mins: Vec<f64>,
    maxs: Vec<f64>,
}

impl Normalizer {
    /// Per-dimension min/max over a nonempty uniform-dimension training list.
    pub fn fit(train: &[FeatureVector]) -> Result<Self, FeatureError> {
        let first = train.first().ok_or(FeatureError::EmptyTrainingSet)?;
        let dim = first.len();
        let mut mins = first.clone();
        let mut maxs = first.clone();
        for v in &train[1..] {
            if v.len() != dim {
                return Err(FeatureError::MixedDimensions { expected: dim, got: v.len() });
            }
            for i in 0..dim {
                if v[i] < mins[i] {
                    mins[i] = v[i];
                }
                if v[i] > maxs[i] {
                    maxs[i] = v[i];
                }
            }
        }
        Ok(Self { mins, maxs })
    }

    /// Pass-through normalizer for pre-scaled inputs in [0, 1].
    pub fn identity(dim: usize) -> Self {
        Self { mins: alloc::vec![0.0; dim], maxs: alloc::vec![1.0; dim] }
    }

    pub fn from_bounds(mins: Vec<f64>, maxs: Vec<f64>) -> Result<Self, FeatureError> {
        if mins.len() != maxs.len() {
            return Err(FeatureError::DimensionMismatch {
                expected: mins.len(),
                got: maxs.len(),
            });
        }
        for (index, (&min, &max)) in mins.iter().zip(maxs.iter()).enumerate() {
            if !(min.is_finite() && max.is_finite()) || max < min {
                return Err(FeatureError::InvalidBounds { index, min, max });
            }
        }
        Ok(Self { mins, maxs })
    }

    pub fn dim(&self) -> usize {
        self.mins.len()
    }

    pub fn mins(&self) -> &[f64] {
        &self.mins
    }

    pub fn maxs(&self) -> &[f64] {
        &self.maxs
    }

    /// True when the dimension never varied in training.
    pub fn is_constant(&self, i: usize) -> bool {
        self.maxs[i] == self.mins[i]
    }

    pub fn normalize(&self, v: &[f64]) -> Result<FeatureVector, FeatureError> {
        if v.len() != self.dim() {
            return Err(FeatureError::DimensionMismatch { expected: self.dim(), got: v.len() });
        }
        let mut out = Vec::with_capacity(v.len());
        for ((&value, &min), &max) in v.iter().zip(self.mins.iter()).zip(self.maxs.iter()) {
            let span = max - min;
            let scaled = if span == 0.0 {
                if value == min {
                    0.0
                } else {
                    1.0
                }
            } else {
                ((value - min) / span).clamp(0.0, 1.0)
            };
            out.push(scaled);
        }
        Ok(out)
    }
}
