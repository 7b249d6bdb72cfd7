//! Per-frame inputs ingested from upstream vision models: segmentation label
//! grids, object tracks, and detection category vectors.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::math;

/// Frame-level ground truth.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum FrameLabel {
    Normal,
    Abnormal,
}

/// Result of looking a pixel point up in a segmentation map. Out-of-bounds is
/// a value, not an error.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum RegionLookup {
    Region(usize),
    OutOfBounds,
}

#[derive(Clone, Debug, PartialEq)]
pub enum SceneError {
    GridSizeMismatch { expected: usize, got: usize },
    LabelOutOfRange { value: usize, class_count: usize },
    EmptyClassTable,
    DuplicateClassName(String),
    InvalidBoundingBox(String),
    SizeMismatch { stored: (f64, f64), derived: (f64, f64) },
    NegativeCount { index: usize, value: f64 },
    NonFinite(&'static str),
}

impl core::fmt::Display for SceneError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            SceneError::GridSizeMismatch { expected, got } => {
                write!(f, "segmentation grid has {got} cells, expected {expected}")
            }
            SceneError::LabelOutOfRange { value, class_count } => {
                write!(f, "cell value {value} outside [0, {class_count})")
            }
            SceneError::EmptyClassTable => write!(f, "class table is empty"),
            SceneError::DuplicateClassName(name) => write!(f, "duplicate class name `{name}`"),
            SceneError::InvalidBoundingBox(msg) => write!(f, "invalid bounding box: {msg}"),
            SceneError::SizeMismatch { stored, derived } => write!(
                f,
                "track size {stored:?} disagrees with box extents {derived:?}"
            ),
            SceneError::NegativeCount { index, value } => {
                write!(f, "category count {value} at index {index} is negative")
            }
            SceneError::NonFinite(what) => write!(f, "non-finite {what}"),
        }
    }
}

impl core::error::Error for SceneError {}

/// A label grid with `class_count` background region classes: cell values are
/// indices into `class_names`. The grid is valid from frame `valid_from` until
/// replaced by a later map in the same sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct SegmentationMap {
    height: usize,
    width: usize,
    class_names: Vec<String>,
    labels: Vec<u16>,
    valid_from: usize,
}

impl SegmentationMap {
    pub fn new(
        height: usize,
        width: usize,
        class_names: Vec<String>,
        labels: Vec<u16>,
        valid_from: usize,
    ) -> Result<Self, SceneError> {
        if class_names.is_empty() {
            return Err(SceneError::EmptyClassTable);
        }
        for (i, name) in class_names.iter().enumerate() {
            if class_names[..i].contains(name) {
                return Err(SceneError::DuplicateClassName(name.clone()));
            }
        }
        if labels.len() != height * width {
            return Err(SceneError::GridSizeMismatch {
                expected: height * width,
                got: labels.len(),
            });
        }
        let class_count = class_names.len();
        for &cell in &labels {
            if cell as usize >= class_count {
                return Err(SceneError::LabelOutOfRange {
                    value: cell as usize,
                    class_count,
                });
            }
        }
        Ok(Self { height, width, class_names, labels, valid_from })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn class_count(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn valid_from(&self) -> usize {
        self.valid_from
    }

    /// Label at a grid cell (column, row). Caller guarantees bounds.
    pub fn label_at(&self, col: usize, row: usize) -> usize {
        self.labels[row * self.width + col] as usize
    }

    /// Region class containing a pixel point, half-open grid convention:
    /// `x ∈ [0, width)`, `y ∈ [0, height)`; anything else (including the
    /// right/bottom edge exactly) is out of bounds.
    pub fn region_of_point(&self, x: f64, y: f64) -> RegionLookup {
        if !x.is_finite() || !y.is_finite() || x < 0.0 || y < 0.0 {
            return RegionLookup::OutOfBounds;
        }
        let col = math::floor(x) as usize;
        let row = math::floor(y) as usize;
        if col >= self.width || row >= self.height {
            return RegionLookup::OutOfBounds;
        }
        RegionLookup::Region(self.label_at(col, row))
    }
}

/// Axis-aligned pixel box `(x_min, y_min, x_max, y_max)`.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct BoundingBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl BoundingBox {
    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn center(&self) -> (f64, f64) {
        (0.5 * (self.x_min + self.x_max), 0.5 * (self.y_min + self.y_max))
    }

    /// Bottom-center of the box: a pedestrian's ground-contact point.
    pub fn foot_point(&self) -> (f64, f64) {
        (0.5 * (self.x_min + self.x_max), self.y_max)
    }

    pub fn diagonal(&self) -> f64 {
        math::hypot(self.width(), self.height())
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        let coords = [self.x_min, self.y_min, self.x_max, self.y_max];
        if coords.iter().any(|v| !v.is_finite()) {
            return Err(SceneError::NonFinite("bounding box coordinate"));
        }
        if self.x_min > self.x_max || self.y_min > self.y_max {
            return Err(SceneError::InvalidBoundingBox(format!(
                "extents negative: ({}, {}, {}, {})",
                self.x_min, self.y_min, self.x_max, self.y_max
            )));
        }
        Ok(())
    }
}

/// One tracked object observation in one frame.
#[derive(Clone, Debug, PartialEq)]
pub struct Track {
    /// Track identity, stable across the object's lifetime.
    pub id: i64,
    pub bbox: BoundingBox,
    /// (width, height) as reported by the producer; derived from `bbox` when
    /// absent. Must agree with the box extents within 1e-6 when supplied.
    pub size: Option<(f64, f64)>,
    /// Pixels/frame. Filled by [`crate::context::resolve_velocities`] when the
    /// producer does not supply it.
    pub velocity: Option<(f64, f64)>,
    /// Index into the dataset's object-class table.
    pub class: usize,
}

impl Track {
    pub fn new(id: i64, bbox: BoundingBox, class: usize) -> Self {
        Self { id, bbox, size: None, velocity: None, class }
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        self.bbox.validate()?;
        if let Some((w, h)) = self.size {
            if w < 0.0 || h < 0.0 {
                return Err(SceneError::InvalidBoundingBox(format!(
                    "negative size ({w}, {h})"
                )));
            }
            let derived = (self.bbox.width(), self.bbox.height());
            if math::abs(w - derived.0) > 1e-6 || math::abs(h - derived.1) > 1e-6 {
                return Err(SceneError::SizeMismatch { stored: (w, h), derived });
            }
        }
        if let Some((vx, vy)) = self.velocity {
            if !vx.is_finite() || !vy.is_finite() {
                return Err(SceneError::NonFinite("track velocity"));
            }
        }
        Ok(())
    }

    pub fn foot_point(&self) -> (f64, f64) {
        self.bbox.foot_point()
    }

    /// Speed magnitude from the (resolved) velocity; `None` when unresolved.
    pub fn speed(&self) -> Option<f64> {
        self.velocity.map(|(vx, vy)| math::hypot(vx, vy))
    }
}

/// Per-class detection counts (or confidences) for one frame.
#[derive(Clone, Debug, PartialEq)]
pub struct CategoryVector {
    counts: Vec<f64>,
}

impl CategoryVector {
    pub fn new(counts: Vec<f64>) -> Result<Self, SceneError> {
        for (index, &value) in counts.iter().enumerate() {
            if !value.is_finite() {
                return Err(SceneError::NonFinite("category count"));
            }
            if value < 0.0 {
                return Err(SceneError::NegativeCount { index, value });
            }
        }
        Ok(Self { counts })
    }

    pub fn zeros(k: usize) -> Self {
        Self { counts: alloc::vec![0.0; k] }
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }
}

/// Everything observed at one frame index.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameFeatures {
    pub frame: usize,
    pub tracks: Vec<Track>,
    pub categories: CategoryVector,
    /// Index of the active segmentation map in the sequence's timeline.
    pub seg_ref: usize,
    pub label: Option<FrameLabel>,
}
