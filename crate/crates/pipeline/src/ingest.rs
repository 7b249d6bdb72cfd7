//! On-disk feature-stream formats and dataset loading.
//!
//! These formats are the contract with upstream feature producers:
//!
//! - Track stream: JSONL, one record per (frame, track):
//!   `{"t":int,"id":int,"box":[f,f,f,f],"v":[f,f],"class":int}` (`v` optional).
//! - Category stream: JSONL, one record per frame: `{"t":int,"counts":[f×K]}`.
//! - SEGMAP: text; line 1 `M N C`; line 2 `C` whitespace-free class names;
//!   then `M` lines of `N` integers; optional repeated blocks prefixed
//!   `@frame F` carrying updated grids.
//! - Labels: one `0`/`1` per line, line number = frame index.
//! - Manifest: JSON naming the class tables and per-sequence files.
//!
//! Absent per-frame records mean "no detections", not an error. Parsing is
//! order-insensitive for records carrying frame indices; output is always
//! frame-sorted, with frame indices contiguous from 0 per sequence.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use vad_core::scene::{
    BoundingBox, CategoryVector, FrameFeatures, FrameLabel, SegmentationMap, Track,
};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("{path}: {message}")]
    Invalid { path: PathBuf, message: String },
    #[error("sequence `{sequence}`: {source}")]
    Sequence {
        sequence: String,
        #[source]
        source: Box<IngestError>,
    },
}

impl IngestError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        IngestError::Io { path: path.to_path_buf(), source }
    }

    fn parse(path: &Path, line: usize, message: impl Into<String>) -> Self {
        IngestError::Parse { path: path.to_path_buf(), line, message: message.into() }
    }

    fn invalid(path: &Path, message: impl Into<String>) -> Self {
        IngestError::Invalid { path: path.to_path_buf(), message: message.into() }
    }

    fn in_sequence(self, sequence: &str) -> Self {
        IngestError::Sequence { sequence: sequence.to_string(), source: Box::new(self) }
    }
}

/// One sequence's files, paths relative to the manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceEntry {
    pub name: String,
    pub tracks_file: String,
    pub categories_file: String,
    pub segmentation_file: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels_file: Option<String>,
    pub frame_count: usize,
    /// (width, height) in pixels.
    pub frame_size: (u32, u32),
    pub fps: f64,
}

/// What the per-frame category vector holds. Purely descriptive: both kinds
/// flow through the same pipeline, but the flag keeps datasets honest about
/// what their producer emitted.
#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CategorySemantics {
    #[default]
    Counts,
    Confidences,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub name: String,
    /// J tracked-object class names.
    pub object_classes: Vec<String>,
    /// K detection category names.
    pub category_classes: Vec<String>,
    #[serde(default)]
    pub category_semantics: CategorySemantics,
    pub sequences: Vec<SequenceEntry>,
}

/// One loaded sequence: frame-contiguous features plus its segmentation
/// timeline (maps sorted by `valid_from`, first at frame 0).
#[derive(Clone, Debug, PartialEq)]
pub struct SequenceData {
    pub name: String,
    pub frames: Vec<FrameFeatures>,
    pub segmentation: Vec<SegmentationMap>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub sequences: Vec<SequenceData>,
}

impl Dataset {
    pub fn object_class_count(&self) -> usize {
        self.manifest.object_classes.len()
    }

    pub fn category_count(&self) -> usize {
        self.manifest.category_classes.len()
    }

    pub fn frame_total(&self) -> usize {
        self.sequences.iter().map(|s| s.frames.len()).sum()
    }

    /// True when every frame carries a ground-truth label.
    pub fn labels_complete(&self) -> bool {
        self.sequences.iter().all(|s| s.frames.iter().all(|f| f.label.is_some()))
    }
}

#[derive(Serialize, Deserialize)]
struct TrackRecord {
    t: usize,
    id: i64,
    #[serde(rename = "box")]
    bbox: [f64; 4],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    v: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    s: Option<[f64; 2]>,
    class: usize,
}

#[derive(Serialize, Deserialize)]
struct CategoryRecord {
    t: usize,
    counts: Vec<f64>,
}

/// Canonical track-stream line for one observation; what the generator
/// writes and `parse_track_stream` reads back losslessly.
pub fn track_record_line(t: usize, track: &Track) -> String {
    let record = TrackRecord {
        t,
        id: track.id,
        bbox: [track.bbox.x_min, track.bbox.y_min, track.bbox.x_max, track.bbox.y_max],
        v: track.velocity.map(|(vx, vy)| [vx, vy]),
        s: track.size.map(|(w, h)| [w, h]),
        class: track.class,
    };
    serde_json::to_string(&record).expect("track record serializes")
}

/// Canonical category-stream line for one frame.
pub fn category_record_line(t: usize, counts: &[f64]) -> String {
    serde_json::to_string(&CategoryRecord { t, counts: counts.to_vec() })
        .expect("category record serializes")
}

fn open_lines(path: &Path) -> Result<impl Iterator<Item = std::io::Result<String>>, IngestError> {
    let file = File::open(path).map_err(|e| IngestError::io(path, e))?;
    Ok(BufReader::new(file).lines())
}

/// Parses a track JSONL stream into one track list per frame
/// (`0..frame_count`); frames without records get empty lists. Tracks within
/// a frame are sorted by id, so record order in the file does not matter.
pub fn parse_track_stream(path: &Path, frame_count: usize) -> Result<Vec<Vec<Track>>, IngestError> {
    let mut frames: Vec<Vec<Track>> = vec![Vec::new(); frame_count];
    for (idx, line) in open_lines(path)?.enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| IngestError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: TrackRecord = serde_json::from_str(&line)
            .map_err(|e| IngestError::parse(path, line_no, e.to_string()))?;
        if record.t >= frame_count {
            return Err(IngestError::parse(
                path,
                line_no,
                format!("frame index {} outside 0..{frame_count}", record.t),
            ));
        }
        let track = Track {
            id: record.id,
            bbox: BoundingBox {
                x_min: record.bbox[0],
                y_min: record.bbox[1],
                x_max: record.bbox[2],
                y_max: record.bbox[3],
            },
            size: record.s.map(|[w, h]| (w, h)),
            velocity: record.v.map(|[vx, vy]| (vx, vy)),
            class: record.class,
        };
        track.validate().map_err(|e| IngestError::parse(path, line_no, e.to_string()))?;
        if frames[record.t].iter().any(|t| t.id == track.id) {
            return Err(IngestError::parse(
                path,
                line_no,
                format!("duplicate track id {} at frame {}", track.id, record.t),
            ));
        }
        frames[record.t].push(track);
    }
    for frame in &mut frames {
        frame.sort_by_key(|t| t.id);
    }
    Ok(frames)
}

/// Parses a category JSONL stream into one length-`k` vector per frame;
/// missing frames mean no detections and yield zero vectors.
pub fn parse_category_stream(
    path: &Path,
    frame_count: usize,
    k: usize,
) -> Result<Vec<CategoryVector>, IngestError> {
    let mut frames: Vec<Option<CategoryVector>> = vec![None; frame_count];
    for (idx, line) in open_lines(path)?.enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| IngestError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: CategoryRecord = serde_json::from_str(&line)
            .map_err(|e| IngestError::parse(path, line_no, e.to_string()))?;
        if record.t >= frame_count {
            return Err(IngestError::parse(
                path,
                line_no,
                format!("frame index {} outside 0..{frame_count}", record.t),
            ));
        }
        if record.counts.len() != k {
            return Err(IngestError::parse(
                path,
                line_no,
                format!("counts length {} != category table size {k}", record.counts.len()),
            ));
        }
        if frames[record.t].is_some() {
            return Err(IngestError::parse(
                path,
                line_no,
                format!("duplicate category record for frame {}", record.t),
            ));
        }
        let vector = CategoryVector::new(record.counts)
            .map_err(|e| IngestError::parse(path, line_no, e.to_string()))?;
        frames[record.t] = Some(vector);
    }
    Ok(frames.into_iter().map(|f| f.unwrap_or_else(|| CategoryVector::zeros(k))).collect())
}

/// Parses a SEGMAP file into its timeline of maps: the initial grid valid
/// from frame 0, then one map per `@frame F` update block, `F` strictly
/// increasing.
pub fn parse_segmentation_map(path: &Path) -> Result<Vec<SegmentationMap>, IngestError> {
    let mut lines = Vec::new();
    for line in open_lines(path)? {
        lines.push(line.map_err(|e| IngestError::io(path, e))?);
    }
    let mut cursor = 0usize;
    let header = lines
        .first()
        .ok_or_else(|| IngestError::invalid(path, "empty segmentation file"))?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 3 {
        return Err(IngestError::parse(path, 1, "header must be `M N C`"));
    }
    let parse_dim = |s: &str, what: &str| {
        s.parse::<usize>()
            .map_err(|_| IngestError::parse(path, 1, format!("bad {what} `{s}`")))
    };
    let height = parse_dim(parts[0], "M")?;
    let width = parse_dim(parts[1], "N")?;
    let class_count = parse_dim(parts[2], "C")?;
    let names_line = lines
        .get(1)
        .ok_or_else(|| IngestError::parse(path, 2, "missing class-name line"))?;
    let class_names: Vec<String> = names_line.split_whitespace().map(String::from).collect();
    if class_names.len() != class_count {
        return Err(IngestError::parse(
            path,
            2,
            format!("{} class names, header says {class_count}", class_names.len()),
        ));
    }
    cursor += 2;

    let read_grid = |cursor: &mut usize| -> Result<Vec<u16>, IngestError> {
        let mut cells = Vec::with_capacity(height * width);
        for row in 0..height {
            let line_no = *cursor + 1;
            let line = lines
                .get(*cursor)
                .ok_or_else(|| IngestError::parse(path, line_no, "grid truncated"))?;
            let mut count = 0usize;
            for token in line.split_whitespace() {
                let value: usize = token.parse().map_err(|_| {
                    IngestError::parse(path, line_no, format!("bad cell `{token}`"))
                })?;
                if value >= class_count {
                    return Err(IngestError::parse(
                        path,
                        line_no,
                        format!("cell value {value} outside [0, {class_count})"),
                    ));
                }
                cells.push(value as u16);
                count += 1;
            }
            if count != width {
                return Err(IngestError::parse(
                    path,
                    line_no,
                    format!("row {row} has {count} cells, expected {width}"),
                ));
            }
            *cursor += 1;
        }
        Ok(cells)
    };

    let first = read_grid(&mut cursor)?;
    let mut maps = vec![SegmentationMap::new(height, width, class_names.clone(), first, 0)
        .map_err(|e| IngestError::invalid(path, e.to_string()))?];

    while cursor < lines.len() {
        let line_no = cursor + 1;
        let line = lines[cursor].trim();
        if line.is_empty() {
            cursor += 1;
            continue;
        }
        let frame_str = line.strip_prefix("@frame ").ok_or_else(|| {
            IngestError::parse(path, line_no, "expected `@frame F` update block")
        })?;
        let valid_from: usize = frame_str
            .trim()
            .parse()
            .map_err(|_| IngestError::parse(path, line_no, format!("bad frame `{frame_str}`")))?;
        if valid_from <= maps.last().unwrap().valid_from() {
            return Err(IngestError::parse(
                path,
                line_no,
                "update frames must be strictly increasing",
            ));
        }
        cursor += 1;
        let cells = read_grid(&mut cursor)?;
        maps.push(
            SegmentationMap::new(height, width, class_names.clone(), cells, valid_from)
                .map_err(|e| IngestError::invalid(path, e.to_string()))?,
        );
    }
    Ok(maps)
}

/// Parses a label file: exactly `frame_count` lines of `0` or `1`. The line
/// number is the frame index, so blank lines are rejected rather than
/// skipped; skipping one would silently shift every later label.
pub fn parse_labels(path: &Path, frame_count: usize) -> Result<Vec<FrameLabel>, IngestError> {
    let mut labels = Vec::with_capacity(frame_count);
    for (idx, line) in open_lines(path)?.enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| IngestError::io(path, e))?;
        match line.trim() {
            "0" => labels.push(FrameLabel::Normal),
            "1" => labels.push(FrameLabel::Abnormal),
            other => {
                return Err(IngestError::parse(path, line_no, format!("bad label `{other}`")))
            }
        }
    }
    if labels.len() != frame_count {
        return Err(IngestError::invalid(
            path,
            format!("{} labels for {frame_count} frames", labels.len()),
        ));
    }
    Ok(labels)
}

pub fn load_manifest(path: &Path) -> Result<DatasetManifest, IngestError> {
    let text = std::fs::read_to_string(path).map_err(|e| IngestError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| IngestError::parse(path, e.line(), e.to_string()))
}

/// Loads the manifest and every referenced file, validating all dataset
/// invariants: frame counts positive, track classes inside the object table,
/// category lengths matching, each frame's segmentation resolvable.
pub fn load_dataset(manifest_path: &Path) -> Result<Dataset, IngestError> {
    let manifest = load_manifest(manifest_path)?;
    let root = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let j = manifest.object_classes.len();
    let k = manifest.category_classes.len();

    let mut sequences = Vec::with_capacity(manifest.sequences.len());
    for entry in &manifest.sequences {
        let sequence = load_sequence(root, entry, j, k)
            .map_err(|e| e.in_sequence(&entry.name))?;
        sequences.push(sequence);
    }
    Ok(Dataset { manifest, sequences })
}

fn load_sequence(
    root: &Path,
    entry: &SequenceEntry,
    object_classes: usize,
    category_count: usize,
) -> Result<SequenceData, IngestError> {
    if entry.frame_count == 0 {
        return Err(IngestError::invalid(
            &root.join(&entry.tracks_file),
            "frame count must be positive",
        ));
    }
    let tracks_path = root.join(&entry.tracks_file);
    let categories_path = root.join(&entry.categories_file);
    let seg_path = root.join(&entry.segmentation_file);

    let tracks = parse_track_stream(&tracks_path, entry.frame_count)?;
    let categories = parse_category_stream(&categories_path, entry.frame_count, category_count)?;
    let segmentation = parse_segmentation_map(&seg_path)?;
    if segmentation[0].valid_from() != 0 {
        return Err(IngestError::invalid(&seg_path, "first map must be valid from frame 0"));
    }
    let labels = match &entry.labels_file {
        Some(file) => Some(parse_labels(&root.join(file), entry.frame_count)?),
        None => None,
    };

    for (t, frame_tracks) in tracks.iter().enumerate() {
        for track in frame_tracks {
            if track.class >= object_classes {
                return Err(IngestError::invalid(
                    &tracks_path,
                    format!(
                        "frame {t}: track class {} outside object table of size {object_classes}",
                        track.class
                    ),
                ));
            }
        }
    }

    let mut frames = Vec::with_capacity(entry.frame_count);
    let mut seg_ref = 0usize;
    for (t, (frame_tracks, frame_categories)) in
        tracks.into_iter().zip(categories).enumerate()
    {
        while seg_ref + 1 < segmentation.len() && segmentation[seg_ref + 1].valid_from() <= t {
            seg_ref += 1;
        }
        frames.push(FrameFeatures {
            frame: t,
            tracks: frame_tracks,
            categories: frame_categories,
            seg_ref,
            label: labels.as_ref().map(|l| l[t]),
        });
    }
    Ok(SequenceData { name: entry.name.clone(), frames, segmentation })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;
    use tempfile::TempDir;

    fn write(dir: &TempDir, name: &str, content: &str) -> PathBuf {
        let path = dir.path().join(name);
        let mut f = File::create(&path).unwrap();
        f.write_all(content.as_bytes()).unwrap();
        path
    }

    #[test]
    fn track_stream_field_mapping() {
        let dir = TempDir::new().unwrap();
        let path = write(
            &dir,
            "tracks.jsonl",
            r#"{"t":0,"id":3,"box":[10,20,30,60],"v":[1.0,0.0],"class":0}"#,
        );
        let frames = parse_track_stream(&path, 1).unwrap();
        assert_eq!(frames.len(), 1);
        let track = &frames[0][0];
        assert_eq!(track.id, 3);
        assert_eq!((track.bbox.width(), track.bbox.height()), (20.0, 40.0));
        assert_eq!(track.velocity, Some((1.0, 0.0)));
    }

    #[test]
    fn track_stream_empty_file_and_gaps() {
        let dir = TempDir::new().unwrap();
        let empty = write(&dir, "empty.jsonl", "");
        assert_eq!(parse_track_stream(&empty, 0).unwrap().len(), 0);

        let gappy = write(
            &dir,
            "gappy.jsonl",
            concat!(
                r#"{"t":2,"id":1,"box":[0,0,1,1],"class":0}"#,
                "\n",
                r#"{"t":0,"id":1,"box":[0,0,1,1],"class":0}"#,
                "\n",
            ),
        );
        let frames = parse_track_stream(&gappy, 3).unwrap();
        assert_eq!(frames[0].len(), 1);
        assert!(frames[1].is_empty());
        assert_eq!(frames[2].len(), 1);
    }

    #[test]
    fn track_stream_reports_line_numbers() {
        let dir = TempDir::new().unwrap();
        let path = write(
            &dir,
            "bad.jsonl",
            concat!(
                r#"{"t":0,"id":1,"box":[0,0,1,1],"class":0}"#,
                "\n",
                "not json\n",
            ),
        );
        match parse_track_stream(&path, 1) {
            Err(IngestError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }

        let negative = write(
            &dir,
            "negative.jsonl",
            r#"{"t":0,"id":1,"box":[5,0,1,1],"class":0}"#,
        );
        assert!(matches!(
            parse_track_stream(&negative, 1),
            Err(IngestError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn category_stream_zero_fill_and_validation() {
        let dir = TempDir::new().unwrap();
        let path = write(&dir, "cats.jsonl", r#"{"t":0,"counts":[2,0,1]}"#);
        let frames = parse_category_stream(&path, 2, 3).unwrap();
        assert_eq!(frames[0].counts(), &[2.0, 0.0, 1.0]);
        assert_eq!(frames[1].counts(), &[0.0, 0.0, 0.0]);

        let bad_len = write(&dir, "short.jsonl", r#"{"t":0,"counts":[2,0]}"#);
        assert!(parse_category_stream(&bad_len, 1, 3).is_err());

        let negative = write(&dir, "neg.jsonl", r#"{"t":0,"counts":[-1,0,0]}"#);
        assert!(parse_category_stream(&negative, 1, 3).is_err());
    }

    #[test]
    fn segmap_hand_built() {
        let dir = TempDir::new().unwrap();
        let path = write(&dir, "seg.txt", "2 2 2\nwalkway grass\n0 0\n1 1\n");
        let maps = parse_segmentation_map(&path).unwrap();
        assert_eq!(maps.len(), 1);
        let map = &maps[0];
        assert_eq!(map.class_names(), &["walkway".to_string(), "grass".to_string()]);
        assert_eq!(map.label_at(1, 0), 0);
        assert_eq!(map.label_at(0, 1), 1);
    }

    #[test]
    fn segmap_single_class_and_bad_cell() {
        let dir = TempDir::new().unwrap();
        let ok = write(&dir, "one.txt", "1 2 1\nall\n0 0\n");
        assert_eq!(parse_segmentation_map(&ok).unwrap()[0].class_count(), 1);

        let bad = write(&dir, "bad.txt", "1 2 2\na b\n0 5\n");
        assert!(matches!(
            parse_segmentation_map(&bad),
            Err(IngestError::Parse { line: 3, .. })
        ));

        let short_row = write(&dir, "short.txt", "1 3 1\na\n0 0\n");
        assert!(parse_segmentation_map(&short_row).is_err());
    }

    #[test]
    fn segmap_update_blocks() {
        let dir = TempDir::new().unwrap();
        let path = write(
            &dir,
            "seg.txt",
            "1 2 2\na b\n0 0\n@frame 5\n1 1\n",
        );
        let maps = parse_segmentation_map(&path).unwrap();
        assert_eq!(maps.len(), 2);
        assert_eq!(maps[0].valid_from(), 0);
        assert_eq!(maps[1].valid_from(), 5);
        assert_eq!(maps[1].label_at(0, 0), 1);

        let regress = write(&dir, "regress.txt", "1 1 1\na\n0\n@frame 0\n0\n");
        assert!(parse_segmentation_map(&regress).is_err());
    }

    #[test]
    fn labels_parse_and_length_check() {
        let dir = TempDir::new().unwrap();
        let path = write(&dir, "labels.txt", "0\n1\n0\n");
        let labels = parse_labels(&path, 3).unwrap();
        assert_eq!(labels, vec![FrameLabel::Normal, FrameLabel::Abnormal, FrameLabel::Normal]);
        assert!(parse_labels(&path, 4).is_err());

        let junk = write(&dir, "junk.txt", "0\n2\n");
        assert!(matches!(parse_labels(&junk, 2), Err(IngestError::Parse { line: 2, .. })));

        // A blank line would shift every later label's frame index.
        let gap = write(&dir, "gap.txt", "0\n\n1\n");
        assert!(matches!(parse_labels(&gap, 3), Err(IngestError::Parse { line: 2, .. })));
    }

    #[test]
    fn segmentation_updates_reassign_seg_refs() {
        let dir = TempDir::new().unwrap();
        write(
            &dir,
            "seg.txt",
            "1 2 2\nwalkway grass\n0 0\n@frame 2\n1 1\n",
        );
        write(
            &dir,
            "tracks.jsonl",
            concat!(
                r#"{"t":0,"id":1,"box":[0,0,1,1],"class":0}"#,
                "\n",
                r#"{"t":3,"id":1,"box":[0,0,1,1],"class":0}"#,
                "\n",
            ),
        );
        write(&dir, "cats.jsonl", "");
        let manifest = serde_json::json!({
            "name": "updates",
            "object_classes": ["person"],
            "category_classes": ["person"],
            "sequences": [{
                "name": "s0",
                "tracks_file": "tracks.jsonl",
                "categories_file": "cats.jsonl",
                "segmentation_file": "seg.txt",
                "frame_count": 4,
                "frame_size": [2, 1],
                "fps": 30.0,
            }],
        });
        let path = write(&dir, "manifest.json", &manifest.to_string());
        let dataset = load_dataset(&path).unwrap();
        let frames = &dataset.sequences[0].frames;
        assert_eq!(frames[0].seg_ref, 0);
        assert_eq!(frames[1].seg_ref, 0);
        assert_eq!(frames[2].seg_ref, 1);
        assert_eq!(frames[3].seg_ref, 1);
        // The same foot point resolves to a different region after the update.
        let maps = &dataset.sequences[0].segmentation;
        use vad_core::scene::RegionLookup;
        assert_eq!(maps[0].region_of_point(0.5, 0.5), RegionLookup::Region(0));
        assert_eq!(maps[1].region_of_point(0.5, 0.5), RegionLookup::Region(1));
    }

    #[test]
    fn load_dataset_missing_file_names_it() {
        let dir = TempDir::new().unwrap();
        let manifest = serde_json::json!({
            "name": "broken",
            "object_classes": ["person"],
            "category_classes": ["person"],
            "sequences": [{
                "name": "s0",
                "tracks_file": "missing.jsonl",
                "categories_file": "missing2.jsonl",
                "segmentation_file": "missing.txt",
                "frame_count": 1,
                "frame_size": [10, 10],
                "fps": 30.0,
            }],
        });
        let path = write(&dir, "manifest.json", &manifest.to_string());
        let err = load_dataset(&path).unwrap_err();
        let text = format!("{err:#}");
        assert!(text.contains("s0"), "error should carry sequence context: {text}");
        let mut source: &dyn std::error::Error = &err;
        while let Some(inner) = source.source() {
            source = inner;
        }
        assert!(format!("{err}").contains("s0"));
        assert!(matches!(err, IngestError::Sequence { .. }));
    }

    #[test]
    fn track_parse_is_line_order_insensitive() {
        let dir = TempDir::new().unwrap();
        let a = r#"{"t":0,"id":2,"box":[0,0,1,1],"class":0}"#;
        let b = r#"{"t":0,"id":1,"box":[2,2,3,3],"class":0}"#;
        let c = r#"{"t":1,"id":1,"box":[4,4,5,5],"class":0}"#;
        let p1 = write(&dir, "fwd.jsonl", &format!("{a}\n{b}\n{c}\n"));
        let p2 = write(&dir, "rev.jsonl", &format!("{c}\n{b}\n{a}\n"));
        assert_eq!(
            parse_track_stream(&p1, 2).unwrap(),
            parse_track_stream(&p2, 2).unwrap()
        );
    }
}
