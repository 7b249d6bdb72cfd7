//! Deterministic synthetic pedestrian-scene generator.
//!
//! Agents walk a horizontal walkway band with small vertical jitter and
//! reflect at the frame edges. Three anomaly kinds mirror the surveillance
//! taxonomy: an overspeed walker (≥3× the mean speed), a walker inside the
//! prohibited grass region, and an unexpected entity that appears only in the
//! category stream under an index never seen in training. Overspeed and
//! prohibited-region windows *substitute* one normal agent rather than adding
//! a track, so person counts stay constant and the anomaly is visible only
//! through mined context. Output is written in the ingest formats and is
//! bitwise deterministic for a given config.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{
    category_record_line, track_record_line, CategorySemantics, DatasetManifest, SequenceEntry,
};
use crate::{mix_seed, write_atomic};
use vad_core::scene::{BoundingBox, Track};

const BOX_WIDTH: f64 = 10.0;
const BOX_HEIGHT: f64 = 24.0;
/// Overspeed anomaly walks at this multiple of the configured mean speed.
const OVERSPEED_FACTOR: f64 = 3.5;
/// Track ids for anomaly walkers start here; normal agents use 0..agent_count.
const ANOMALY_ID_BASE: i64 = 1000;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("degenerate region layout: {0}")]
    InvalidLayout(String),
    #[error("invalid anomaly schedule: {0}")]
    InvalidSchedule(String),
    #[error("invalid scene config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Horizontal bands from the top of the frame: wall, grass margin, walkway;
/// rows left over at the bottom are grass again.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionLayout {
    pub wall_rows: usize,
    pub grass_rows: usize,
    pub walkway_rows: usize,
}

pub const REGION_WALKWAY: usize = 0;
pub const REGION_GRASS: usize = 1;
pub const REGION_WALL: usize = 2;

pub const REGION_NAMES: [&str; 3] = ["walkway", "grass", "wall"];
pub const OBJECT_CLASSES: [&str; 2] = ["person", "bicycle"];

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnomalyKind {
    UnexpectedEntity,
    Overspeed,
    ProhibitedRegion,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnomalyWindow {
    pub kind: AnomalyKind,
    pub start: usize,
    pub duration: usize,
}

impl AnomalyWindow {
    pub fn end(&self) -> usize {
        self.start + self.duration
    }

    pub fn contains(&self, frame: usize) -> bool {
        (self.start..self.end()).contains(&frame)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub name: String,
    /// (width, height) in pixels.
    pub frame_size: (u32, u32),
    pub layout: RegionLayout,
    /// Frames per sequence.
    pub frame_count: usize,
    pub sequence_count: usize,
    pub agent_count: usize,
    /// Normal walking speeds in pixels/frame: agents take evenly spaced
    /// speeds spanning `mean ± 1.5·std`, the same multiset in every sequence.
    pub speed_mean: f64,
    pub speed_std: f64,
    /// Size K of the category table; the last index is the unseen entity.
    pub category_count: usize,
    pub fps: f64,
    /// Anomaly schedule, applied to every sequence of this config.
    pub anomalies: Vec<AnomalyWindow>,
    pub seed: u64,
}

impl SceneConfig {
    fn validate(&self) -> Result<(), SynthError> {
        let (w, h) = (self.frame_size.0 as usize, self.frame_size.1 as usize);
        if self.layout.walkway_rows == 0 {
            return Err(SynthError::InvalidLayout("walkway band has zero rows".into()));
        }
        if self.layout.walkway_rows < 5 || self.layout.grass_rows == 0 {
            return Err(SynthError::InvalidLayout(
                "walkway needs >= 5 rows and a grass margin".into(),
            ));
        }
        let used = self.layout.wall_rows + self.layout.grass_rows + self.layout.walkway_rows;
        if used > h {
            return Err(SynthError::InvalidLayout(format!(
                "bands use {used} rows but the frame has {h}"
            )));
        }
        if w < (BOX_WIDTH as usize) * 4 {
            return Err(SynthError::InvalidLayout(format!("frame width {w} too narrow")));
        }
        if self.frame_count == 0 || self.sequence_count == 0 || self.agent_count == 0 {
            return Err(SynthError::InvalidConfig(
                "frame, sequence, and agent counts must be positive".into(),
            ));
        }
        if self.speed_mean <= 0.0 || self.speed_std < 0.0 {
            return Err(SynthError::InvalidConfig("speeds must be positive".into()));
        }
        if self.category_count < 2 {
            return Err(SynthError::InvalidConfig(
                "category table needs at least person + one unseen entity".into(),
            ));
        }
        let mut sorted = self.anomalies.clone();
        sorted.sort_by_key(|wdw| wdw.start);
        for wdw in &sorted {
            if wdw.duration == 0 || wdw.end() > self.frame_count {
                return Err(SynthError::InvalidSchedule(format!(
                    "window [{}, {}) outside 0..{}",
                    wdw.start,
                    wdw.end(),
                    self.frame_count
                )));
            }
        }
        for pair in sorted.windows(2) {
            if pair[1].start < pair[0].end() {
                return Err(SynthError::InvalidSchedule("windows overlap".into()));
            }
        }
        Ok(())
    }

    /// K category names: `person` first, filler classes, and the unseen
    /// entity (`skateboard`) last.
    pub fn category_names(&self) -> Vec<String> {
        let k = self.category_count;
        (0..k)
            .map(|i| {
                if i == 0 {
                    "person".to_string()
                } else if i == k - 1 {
                    "skateboard".to_string()
                } else {
                    format!("class{i:02}")
                }
            })
            .collect()
    }

    fn walkway_band(&self) -> (f64, f64) {
        let top = (self.layout.wall_rows + self.layout.grass_rows) as f64;
        (top, top + self.layout.walkway_rows as f64)
    }
}

/// Desk-scale acceptance configuration: 360×240 frames at 30 fps, 6 agents,
/// 500 frames per sequence, 4 training sequences, and a 50-frame anomaly
/// schedule (10%) spanning all three kinds. Split with [`split`].
pub fn desk_preset(seed: u64) -> SceneConfig {
    SceneConfig {
        name: "desk".to_string(),
        frame_size: (360, 240),
        layout: RegionLayout { wall_rows: 40, grass_rows: 50, walkway_rows: 100 },
        frame_count: 500,
        sequence_count: 4,
        agent_count: 6,
        speed_mean: 2.0,
        speed_std: 0.4,
        category_count: 60,
        fps: 30.0,
        anomalies: vec![
            AnomalyWindow { kind: AnomalyKind::Overspeed, start: 60, duration: 16 },
            AnomalyWindow { kind: AnomalyKind::ProhibitedRegion, start: 150, duration: 17 },
            AnomalyWindow { kind: AnomalyKind::UnexpectedEntity, start: 240, duration: 17 },
        ],
        seed,
    }
}

/// Small configuration for quick smoke runs.
pub fn mini_preset(seed: u64) -> SceneConfig {
    SceneConfig {
        name: "mini".to_string(),
        frame_size: (180, 120),
        layout: RegionLayout { wall_rows: 20, grass_rows: 25, walkway_rows: 50 },
        frame_count: 200,
        sequence_count: 2,
        agent_count: 4,
        speed_mean: 2.0,
        speed_std: 0.4,
        category_count: 12,
        fps: 30.0,
        anomalies: vec![
            AnomalyWindow { kind: AnomalyKind::Overspeed, start: 40, duration: 8 },
            AnomalyWindow { kind: AnomalyKind::ProhibitedRegion, start: 90, duration: 9 },
            AnomalyWindow { kind: AnomalyKind::UnexpectedEntity, start: 140, duration: 9 },
        ],
        seed,
    }
}

pub fn preset(name: &str, seed: u64) -> Option<SceneConfig> {
    match name {
        "desk" => Some(desk_preset(seed)),
        "mini" => Some(mini_preset(seed)),
        _ => None,
    }
}

/// Derives the train/test pair: training keeps every sequence but drops the
/// anomaly schedule (training video contains only normal pedestrians); the
/// test config keeps the schedule verbatim on a single sequence. Seeds are
/// disjoint mixes of the parent seed.
pub fn split(config: &SceneConfig) -> (SceneConfig, SceneConfig) {
    let mut train = config.clone();
    train.name = format!("{}-train", config.name);
    train.anomalies.clear();
    train.seed = mix_seed(config.seed, 1);
    let mut test = config.clone();
    test.name = format!("{}-test", config.name);
    test.sequence_count = 1;
    test.seed = mix_seed(config.seed, 2);
    (train, test)
}

struct Walker {
    x: f64,
    y: f64,
    vx: f64,
    vy: f64,
    y_lo: f64,
    y_hi: f64,
}

impl Walker {
    fn new(x: f64, y: f64, vx: f64, vy: f64, y_lo: f64, y_hi: f64) -> Self {
        Self { x, y, vx, vy, y_lo, y_hi }
    }

    /// One frame of linear motion with reflection at the band edges.
    fn advance(&mut self, x_lo: f64, x_hi: f64) {
        let nx = self.x + self.vx;
        if nx > x_hi {
            self.x = (2.0 * x_hi - nx).max(x_lo);
            self.vx = -self.vx;
        } else if nx < x_lo {
            self.x = (2.0 * x_lo - nx).min(x_hi);
            self.vx = -self.vx;
        } else {
            self.x = nx;
        }
        let ny = self.y + self.vy;
        if ny > self.y_hi {
            self.y = (2.0 * self.y_hi - ny).max(self.y_lo);
            self.vy = -self.vy;
        } else if ny < self.y_lo {
            self.y = (2.0 * self.y_lo - ny).min(self.y_hi);
            self.vy = -self.vy;
        } else {
            self.y = ny;
        }
    }

    /// Emitted tracks carry the walker's nominal velocity (the heading after
    /// any reflection). Its magnitude is constant over the walker's lifetime,
    /// so windowed speed averages are exact: a normal agent's never exceeds
    /// the calibrated threshold and the overspeed walker's always does.
    fn track(&self, id: i64) -> Track {
        let bbox = BoundingBox {
            x_min: self.x - BOX_WIDTH / 2.0,
            y_min: self.y - BOX_HEIGHT,
            x_max: self.x + BOX_WIDTH / 2.0,
            y_max: self.y,
        };
        let mut track = Track::new(id, bbox, 0);
        track.velocity = Some((self.vx, self.vy));
        track
    }
}

/// Evenly spaced per-agent speed offsets spanning ±1.5σ. The multiset of
/// agent speeds is identical in every sequence, which pins the calibrated
/// overspeed threshold exactly at the fastest normal speed: a normal test
/// agent can never exceed it, while the overspeed walker always does.
fn agent_speed(config: &SceneConfig, index: usize) -> f64 {
    let offset = if config.agent_count == 1 {
        0.0
    } else {
        -1.5 + 3.0 * index as f64 / (config.agent_count - 1) as f64
    };
    (config.speed_mean + config.speed_std * offset).max(0.2)
}

/// Fixed small walking angle per agent (±5° across the roster) so velocity
/// vectors are not collinear and the crowd's line-fit residuals stay alive.
fn agent_angle(config: &SceneConfig, index: usize) -> f64 {
    let deg = if config.agent_count == 1 {
        0.0
    } else {
        -5.0 + 10.0 * index as f64 / (config.agent_count - 1) as f64
    };
    deg.to_radians()
}

struct SequenceFiles {
    tracks: String,
    categories: String,
    labels: String,
}

fn simulate_sequence(config: &SceneConfig, seq_index: usize) -> SequenceFiles {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(config.seed, 100 + seq_index as u64));
    let width = config.frame_size.0 as f64;
    let (walk_top, walk_bottom) = config.walkway_band();
    let x_lo = BOX_WIDTH / 2.0 + 1.0;
    let x_hi = width - BOX_WIDTH / 2.0 - 1.0;
    let y_lo = walk_top + 2.0;
    let y_hi = walk_bottom - 2.0;

    let mut agents: Vec<Walker> = (0..config.agent_count)
        .map(|i| {
            let x = rng.random_range(x_lo..x_hi);
            let y = rng.random_range(y_lo..y_hi);
            let dir = if rng.random_range(0..2) == 0 { 1.0 } else { -1.0 };
            let speed = agent_speed(config, i);
            let angle = agent_angle(config, i);
            Walker::new(x, y, dir * speed * angle.cos(), speed * angle.sin(), y_lo, y_hi)
        })
        .collect();

    // Anomaly walkers are drawn up front so the RNG stream does not depend on
    // the schedule layout.
    let grass_band = (
        config.layout.wall_rows as f64 + 1.0,
        (config.layout.wall_rows + config.layout.grass_rows) as f64 - 1.0,
    );
    let grass_y = 0.5 * (grass_band.0 + grass_band.1);
    let mut anomaly_walkers: Vec<Option<Walker>> = config
        .anomalies
        .iter()
        .map(|window| {
            let x = rng.random_range(x_lo..x_hi);
            let dir = if rng.random_range(0..2) == 0 { 1.0 } else { -1.0 };
            match window.kind {
                AnomalyKind::Overspeed => {
                    let speed = OVERSPEED_FACTOR * config.speed_mean;
                    let y = 0.5 * (y_lo + y_hi);
                    Some(Walker::new(x, y, dir * speed, 0.0, y_lo, y_hi))
                }
                AnomalyKind::ProhibitedRegion => {
                    let speed = config.speed_mean;
                    Some(Walker::new(x, grass_y, dir * speed, 0.0, grass_band.0, grass_band.1))
                }
                AnomalyKind::UnexpectedEntity => None,
            }
        })
        .collect();

    let mut tracks_out = String::new();
    let mut categories_out = String::new();
    let mut labels_out = String::new();

    for t in 0..config.frame_count {
        // Advance every walker every frame so hidden agents stay in motion.
        for agent in &mut agents {
            agent.advance(x_lo, x_hi);
        }
        for walker in anomaly_walkers.iter_mut().flatten() {
            walker.advance(x_lo, x_hi);
        }

        let mut replaced: Vec<usize> = Vec::new();
        let mut active_entity = false;
        let mut frame_tracks: Vec<(i64, Track)> = Vec::new();
        for (w_idx, window) in config.anomalies.iter().enumerate() {
            if !window.contains(t) {
                continue;
            }
            match window.kind {
                AnomalyKind::UnexpectedEntity => active_entity = true,
                AnomalyKind::Overspeed | AnomalyKind::ProhibitedRegion => {
                    replaced.push(w_idx % config.agent_count);
                    let walker = anomaly_walkers[w_idx].as_ref().unwrap();
                    let id = ANOMALY_ID_BASE + w_idx as i64;
                    frame_tracks.push((id, walker.track(id)));
                }
            }
        }
        for (i, agent) in agents.iter().enumerate() {
            if !replaced.contains(&i) {
                let id = i as i64;
                frame_tracks.push((id, agent.track(id)));
            }
        }
        frame_tracks.sort_by_key(|(id, _)| *id);
        for (_, track) in &frame_tracks {
            tracks_out.push_str(&track_record_line(t, track));
            tracks_out.push('\n');
        }

        let mut counts = vec![0.0; config.category_count];
        counts[0] = frame_tracks.len() as f64;
        if active_entity {
            counts[config.category_count - 1] = 1.0;
        }
        categories_out.push_str(&category_record_line(t, &counts));
        categories_out.push('\n');

        let abnormal = config.anomalies.iter().any(|w| w.contains(t));
        labels_out.push_str(if abnormal { "1\n" } else { "0\n" });
    }

    SequenceFiles { tracks: tracks_out, categories: categories_out, labels: labels_out }
}

fn segmap_text(config: &SceneConfig) -> String {
    let (w, h) = (config.frame_size.0 as usize, config.frame_size.1 as usize);
    let mut out = format!("{h} {w} 3\n{}\n", REGION_NAMES.join(" "));
    let wall_end = config.layout.wall_rows;
    let grass_end = wall_end + config.layout.grass_rows;
    let walkway_end = grass_end + config.layout.walkway_rows;
    let mut row_text = String::new();
    for row in 0..h {
        let class = if row < wall_end {
            REGION_WALL
        } else if row < grass_end || row >= walkway_end {
            REGION_GRASS
        } else {
            REGION_WALKWAY
        };
        row_text.clear();
        for col in 0..w {
            if col > 0 {
                row_text.push(' ');
            }
            row_text.push_str(&class.to_string());
        }
        out.push_str(&row_text);
        out.push('\n');
    }
    out
}

/// Writes a full dataset directory (manifest plus per-sequence track,
/// category, segmentation, and label files) and returns the manifest path.
pub fn generate(config: &SceneConfig, out_dir: &Path) -> Result<PathBuf, SynthError> {
    config.validate()?;
    let segmap = segmap_text(config);
    let mut entries = Vec::with_capacity(config.sequence_count);
    for seq in 0..config.sequence_count {
        let seq_name = format!("seq_{seq:03}");
        let files = simulate_sequence(config, seq);
        let seq_dir = out_dir.join(&seq_name);
        write_atomic(&seq_dir.join("tracks.jsonl"), files.tracks.as_bytes())?;
        write_atomic(&seq_dir.join("categories.jsonl"), files.categories.as_bytes())?;
        write_atomic(&seq_dir.join("segmap.txt"), segmap.as_bytes())?;
        write_atomic(&seq_dir.join("labels.txt"), files.labels.as_bytes())?;
        entries.push(SequenceEntry {
            name: seq_name.clone(),
            tracks_file: format!("{seq_name}/tracks.jsonl"),
            categories_file: format!("{seq_name}/categories.jsonl"),
            segmentation_file: format!("{seq_name}/segmap.txt"),
            labels_file: Some(format!("{seq_name}/labels.txt")),
            frame_count: config.frame_count,
            frame_size: config.frame_size,
            fps: config.fps,
        });
    }
    let manifest = DatasetManifest {
        name: config.name.clone(),
        object_classes: OBJECT_CLASSES.iter().map(|s| s.to_string()).collect(),
        category_classes: config.category_names(),
        category_semantics: CategorySemantics::Counts,
        sequences: entries,
    };
    let manifest_path = out_dir.join("manifest.json");
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write_atomic(&manifest_path, json.as_bytes())?;
    Ok(manifest_path)
}
