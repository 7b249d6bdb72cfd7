//! Spatial, temporal, and group context mined from ingested high-level
//! features.
//!
//! Spatial context relates tracked objects to background region classes
//! (which object types stand where, and which object types co-occur within an
//! adjacency radius). Temporal context smooths per-track speed into a
//! windowed maximum and flags overspeed against a calibrated threshold. Group
//! context summarizes the crowd: order statistics of positions and speeds
//! plus line-fit residuals measuring how far the crowd deviates from a common
//! axis of position or motion.

use alloc::collections::{BTreeMap, VecDeque};
use alloc::vec::Vec;

use crate::feature::BlockSource;
use crate::math;
use crate::scene::{FrameFeatures, RegionLookup, SegmentationMap, Track};
use crate::stats;

/// Parameters carried by a trained model and reused at test time.
#[derive(Clone, Debug, PartialEq)]
pub struct ContextParams {
    /// Trailing-average window in frames for speed smoothing.
    pub window: usize,
    /// Overspeed threshold in pixels/frame; `INFINITY` until calibrated.
    pub speed_threshold: f64,
    /// Adjacency radius as a multiple of a pair's mean box diagonal.
    pub radius_scale: f64,
}

impl Default for ContextParams {
    fn default() -> Self {
        Self { window: 10, speed_threshold: f64::INFINITY, radius_scale: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ContextError {
    /// Speed calibration saw no track observations at all.
    NoSpeedWindows,
}

impl core::fmt::Display for ContextError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            ContextError::NoSpeedWindows => {
                write!(f, "no track observations available for speed calibration")
            }
        }
    }
}

impl core::error::Error for ContextError {}

/// Region-inclusion counts `O[c][j]` (objects of class `j` whose foot point
/// lies in region class `c`) plus a symmetric co-occurrence count of object
/// classes within the adjacency radius. Tracks whose foot point falls outside
/// the grid land in `out_of_bounds`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpatialContext {
    region_classes: usize,
    object_classes: usize,
    region_counts: Vec<u32>,
    adjacency: Vec<u32>,
    out_of_bounds: u32,
}

impl SpatialContext {
    pub fn zeros(region_classes: usize, object_classes: usize) -> Self {
        Self {
            region_classes,
            object_classes,
            region_counts: alloc::vec![0; region_classes * object_classes],
            adjacency: alloc::vec![0; object_classes * object_classes],
            out_of_bounds: 0,
        }
    }

    pub fn region_classes(&self) -> usize {
        self.region_classes
    }

    pub fn object_classes(&self) -> usize {
        self.object_classes
    }

    /// Count of class-`object` tracks standing in region class `region`.
    pub fn region_count(&self, region: usize, object: usize) -> u32 {
        self.region_counts[region * self.object_classes + object]
    }

    /// Unordered-pair count between object classes `a` and `b`.
    pub fn adjacency(&self, a: usize, b: usize) -> u32 {
        self.adjacency[a * self.object_classes + b]
    }

    pub fn out_of_bounds(&self) -> u32 {
        self.out_of_bounds
    }

    /// Sum of all in-bounds region counts.
    pub fn total_mass(&self) -> u32 {
        self.region_counts.iter().sum()
    }

    /// Row-major `O` followed by the upper triangle (incl. diagonal) of the
    /// adjacency matrix.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.region_counts.iter().map(|&c| c as f64).collect();
        for a in 0..self.object_classes {
            for b in a..self.object_classes {
                out.push(self.adjacency(a, b) as f64);
            }
        }
        out
    }
}

/// Frame-level overspeed summary: how many present tracks have ever exceeded
/// the speed threshold on a windowed average, and the largest windowed speed
/// any present track has reached.
#[derive(Clone, Debug, PartialEq)]
pub struct OverspeedSign {
    pub flagged_count: usize,
    pub max_windowed_speed: f64,
}

impl OverspeedSign {
    pub fn none() -> Self {
        Self { flagged_count: 0, max_windowed_speed: 0.0 }
    }

    pub fn flatten(&self) -> Vec<f64> {
        alloc::vec![self.flagged_count as f64, self.max_windowed_speed]
    }
}

/// Min/max/median of one per-track statistic.
#[derive(Copy, Clone, Debug, Default, PartialEq)]
pub struct Stats3 {
    pub min: f64,
    pub max: f64,
    pub median: f64,
}

impl Stats3 {
    fn over(values: &[f64]) -> Self {
        let mut min = f64::INFINITY;
        let mut max = f64::NEG_INFINITY;
        for &v in values {
            if v < min {
                min = v;
            }
            if v > max {
                max = v;
            }
        }
        Self { min, max, median: stats::median(values) }
    }
}

/// Frame-level crowd statistics over foot points and speeds.
#[derive(Clone, Debug, PartialEq)]
pub struct GroupContext {
    pub present: bool,
    pub count: usize,
    pub x: Stats3,
    pub y: Stats3,
    pub speed: Stats3,
    /// Total-least-squares residual of foot points to their best-fit line.
    pub position_residual: f64,
    /// Same residual over velocity vectors; zero when all motion is collinear.
    pub velocity_residual: f64,
}

impl GroupContext {
    pub fn empty() -> Self {
        Self {
            present: false,
            count: 0,
            x: Stats3::default(),
            y: Stats3::default(),
            speed: Stats3::default(),
            position_residual: 0.0,
            velocity_residual: 0.0,
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        alloc::vec![
            self.count as f64,
            self.x.min,
            self.x.max,
            self.x.median,
            self.y.min,
            self.y.max,
            self.y.median,
            self.speed.min,
            self.speed.max,
            self.speed.median,
            self.position_residual,
            self.velocity_residual,
            if self.present { 1.0 } else { 0.0 },
        ]
    }
}

/// All mined context for one frame.
#[derive(Clone, Debug, PartialEq)]
pub struct ContextFeatures {
    pub spatial: SpatialContext,
    pub temporal: OverspeedSign,
    pub group: GroupContext,
}

impl ContextFeatures {
    /// Zeroed context with the given matrix shape, for frames without mining
    /// (e.g. a categories-only schema).
    pub fn empty(region_classes: usize, object_classes: usize) -> Self {
        Self {
            spatial: SpatialContext::zeros(region_classes, object_classes),
            temporal: OverspeedSign::none(),
            group: GroupContext::empty(),
        }
    }

    /// Flat values for one schema block. Deterministic order, fixed per source.
    pub fn block_values(&self, source: BlockSource) -> Vec<f64> {
        match source {
            BlockSource::Categories => Vec::new(),
            BlockSource::Spatial => self.spatial.flatten(),
            BlockSource::Temporal => self.temporal.flatten(),
            BlockSource::Group => self.group.flatten(),
        }
    }
}

/// Counts each track into `O[region][class]` by its foot point and counts
/// unordered track pairs whose centers lie within
/// `radius_scale × mean(pair box diagonals)`.
///
/// Track classes must be `< object_class_count`.
pub fn spatial_context(
    seg: &SegmentationMap,
    tracks: &[Track],
    object_class_count: usize,
    radius_scale: f64,
) -> SpatialContext {
    let mut ctx = SpatialContext::zeros(seg.class_count(), object_class_count);
    for track in tracks {
        assert!(track.class < object_class_count, "track class outside object table");
        let (x, y) = track.foot_point();
        match seg.region_of_point(x, y) {
            RegionLookup::Region(region) => {
                ctx.region_counts[region * object_class_count + track.class] += 1;
            }
            RegionLookup::OutOfBounds => ctx.out_of_bounds += 1,
        }
    }
    for (i, a) in tracks.iter().enumerate() {
        for b in &tracks[i + 1..] {
            let (ax, ay) = a.bbox.center();
            let (bx, by) = b.bbox.center();
            let dist = math::hypot(ax - bx, ay - by);
            let radius = radius_scale * 0.5 * (a.bbox.diagonal() + b.bbox.diagonal());
            if dist <= radius {
                ctx.adjacency[a.class * object_class_count + b.class] += 1;
                if a.class != b.class {
                    ctx.adjacency[b.class * object_class_count + a.class] += 1;
                }
            }
        }
    }
    ctx
}

/// Largest trailing-window mean of a speed series, windows truncated at the
/// start of the series.
fn max_trailing_mean(speeds: &[f64], window: usize) -> f64 {
    assert!(window >= 1, "window must be at least one frame");
    let mut best = f64::NEG_INFINITY;
    for k in 0..speeds.len() {
        let lo = (k + 1).saturating_sub(window);
        let mut sum = 0.0;
        for &s in &speeds[lo..=k] {
            sum += s;
        }
        best = best.max(sum / (k + 1 - lo) as f64);
    }
    best
}

/// Overspeed sign for one frame from the speed histories of the tracks
/// present at that frame. Each history runs from the track's first
/// observation through the current frame; a track is flagged when the maximum
/// trailing `window`-mean over its lifetime exceeds `threshold`.
pub fn temporal_context(histories: &[Vec<f64>], window: usize, threshold: f64) -> OverspeedSign {
    assert!(threshold >= 0.0, "speed threshold must be non-negative");
    let mut flagged = 0;
    let mut max_speed = 0.0f64;
    for history in histories {
        if history.is_empty() {
            continue;
        }
        let peak = max_trailing_mean(history, window);
        if peak > threshold {
            flagged += 1;
        }
        max_speed = max_speed.max(peak);
    }
    OverspeedSign { flagged_count: flagged, max_windowed_speed: max_speed }
}

/// Per-sequence index of windowed track speeds, built in one forward pass.
/// Produces the same values as [`temporal_context`] over full histories, plus
/// the pool of trailing-window means used for threshold calibration.
pub struct SequenceSpeedIndex {
    /// Per frame: max-so-far windowed mean of each track present, frame order.
    per_frame: Vec<Vec<f64>>,
    window_means: Vec<f64>,
}

struct TrackWindow {
    recent: VecDeque<f64>,
    peak: f64,
}

impl SequenceSpeedIndex {
    /// `frames` must carry resolved velocities (see [`resolve_velocities`]).
    pub fn build(frames: &[Vec<Track>], window: usize) -> Self {
        assert!(window >= 1, "window must be at least one frame");
        let mut states: BTreeMap<i64, TrackWindow> = BTreeMap::new();
        let mut per_frame = Vec::with_capacity(frames.len());
        let mut window_means = Vec::new();
        for tracks in frames {
            let mut frame_peaks = Vec::with_capacity(tracks.len());
            for track in tracks {
                let speed = track.speed().unwrap_or(0.0);
                let state = states
                    .entry(track.id)
                    .or_insert_with(|| TrackWindow { recent: VecDeque::new(), peak: f64::NEG_INFINITY });
                state.recent.push_back(speed);
                if state.recent.len() > window {
                    state.recent.pop_front();
                }
                // Summed front-to-back so the value matches a direct
                // recomputation of the truncated window bit for bit.
                let mut sum = 0.0;
                for &s in &state.recent {
                    sum += s;
                }
                let mean = sum / state.recent.len() as f64;
                window_means.push(mean);
                state.peak = state.peak.max(mean);
                frame_peaks.push(state.peak);
            }
            per_frame.push(frame_peaks);
        }
        Self { per_frame, window_means }
    }

    pub fn frame_count(&self) -> usize {
        self.per_frame.len()
    }

    /// Overspeed sign at a frame given a calibrated threshold.
    pub fn overspeed_at(&self, frame: usize, threshold: f64) -> OverspeedSign {
        assert!(threshold >= 0.0, "speed threshold must be non-negative");
        let peaks = &self.per_frame[frame];
        let mut flagged = 0;
        let mut max_speed = 0.0f64;
        for &peak in peaks {
            if peak > threshold {
                flagged += 1;
            }
            max_speed = max_speed.max(peak);
        }
        OverspeedSign { flagged_count: flagged, max_windowed_speed: max_speed }
    }

    /// Every trailing-window mean observed while building the index.
    pub fn window_means(&self) -> &[f64] {
        &self.window_means
    }
}

/// Overspeed threshold as a percentile (default 99.5) of all trailing-window
/// mean speeds observed in training.
pub fn calibrate_speed_threshold(window_means: &[f64], percentile: f64) -> Result<f64, ContextError> {
    if window_means.is_empty() {
        return Err(ContextError::NoSpeedWindows);
    }
    Ok(stats::percentile(window_means, percentile))
}

/// Crowd statistics over a frame's tracks: order statistics of foot points and
/// speed magnitudes, and line-fit residuals of positions and velocities.
/// Velocities should be resolved beforehand; unresolved tracks count as still.
pub fn group_context(tracks: &[Track]) -> GroupContext {
    if tracks.is_empty() {
        return GroupContext::empty();
    }
    let feet: Vec<(f64, f64)> = tracks.iter().map(Track::foot_point).collect();
    let velocities: Vec<(f64, f64)> =
        tracks.iter().map(|t| t.velocity.unwrap_or((0.0, 0.0))).collect();
    let xs: Vec<f64> = feet.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = feet.iter().map(|p| p.1).collect();
    let speeds: Vec<f64> = velocities.iter().map(|&(vx, vy)| math::hypot(vx, vy)).collect();
    GroupContext {
        present: true,
        count: tracks.len(),
        x: Stats3::over(&xs),
        y: Stats3::over(&ys),
        speed: Stats3::over(&speeds),
        position_residual: line_fit_residual(&feet),
        velocity_residual: line_fit_residual(&velocities),
    }
}

/// Minimal sum of squared perpendicular distances from the points to any
/// line: the smaller eigenvalue of the centered 2×2 scatter matrix (total
/// least squares via the principal axis). Zero or one point gives 0.
pub fn line_fit_residual(points: &[(f64, f64)]) -> f64 {
    if points.len() <= 1 {
        return 0.0;
    }
    let n = points.len() as f64;
    let (mut cx, mut cy) = (0.0, 0.0);
    for &(x, y) in points {
        cx += x;
        cy += y;
    }
    cx /= n;
    cy /= n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for &(x, y) in points {
        let dx = x - cx;
        let dy = y - cy;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    let trace = sxx + syy;
    let gap = math::sqrt((sxx - syy) * (sxx - syy) + 4.0 * sxy * sxy);
    (0.5 * (trace - gap)).max(0.0)
}

/// Fills in missing velocities by finite differences of consecutive foot
/// points (divided by the frame gap). A track's first observation without a
/// supplied velocity resolves to rest. Supplied velocities pass through.
pub fn resolve_velocities(frames: &[Vec<Track>]) -> Vec<Vec<Track>> {
    let mut last_seen: BTreeMap<i64, (usize, (f64, f64))> = BTreeMap::new();
    let mut out = Vec::with_capacity(frames.len());
    for (t, tracks) in frames.iter().enumerate() {
        let mut resolved_frame = Vec::with_capacity(tracks.len());
        for track in tracks {
            let mut resolved = track.clone();
            let foot = track.foot_point();
            if resolved.velocity.is_none() {
                resolved.velocity = Some(match last_seen.get(&track.id) {
                    Some(&(prev_t, (px, py))) => {
                        let gap = (t - prev_t) as f64;
                        ((foot.0 - px) / gap, (foot.1 - py) / gap)
                    }
                    None => (0.0, 0.0),
                });
            }
            last_seen.insert(track.id, (t, foot));
            resolved_frame.push(resolved);
        }
        out.push(resolved_frame);
    }
    out
}

/// Mines all context for one sequence. `frames[t].seg_ref` indexes
/// `seg_timeline`; temporal context consumes per-track history built in a
/// single forward pass, so this is per-sequence by construction.
pub fn mine_sequence(
    frames: &[FrameFeatures],
    seg_timeline: &[SegmentationMap],
    object_class_count: usize,
    params: &ContextParams,
) -> Vec<ContextFeatures> {
    let track_lists: Vec<Vec<Track>> = frames.iter().map(|f| f.tracks.clone()).collect();
    let resolved = resolve_velocities(&track_lists);
    let index = SequenceSpeedIndex::build(&resolved, params.window);
    frames
        .iter()
        .enumerate()
        .map(|(t, frame)| {
            let seg = &seg_timeline[frame.seg_ref];
            ContextFeatures {
                spatial: spatial_context(seg, &resolved[t], object_class_count, params.radius_scale),
                temporal: index.overspeed_at(t, params.speed_threshold),
                group: group_context(&resolved[t]),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::BoundingBox;
    use alloc::string::ToString;
    use alloc::vec;
    use proptest::prelude::*;

    fn person_at(id: i64, foot_x: f64, foot_y: f64) -> Track {
        let bbox = BoundingBox {
            x_min: foot_x - 5.0,
            y_min: foot_y - 20.0,
            x_max: foot_x + 5.0,
            y_max: foot_y,
        };
        Track::new(id, bbox, 0)
    }

    fn walkway_grass_map() -> SegmentationMap {
        // 4 rows × 4 cols: top two rows walkway (0), bottom two grass (1).
        SegmentationMap::new(
            4,
            4,
            vec!["walkway".to_string(), "grass".to_string()],
            vec![0, 0, 0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 1, 1, 1],
            0,
        )
        .unwrap()
    }

    #[test]
    fn spatial_one_person_on_grass() {
        let map = walkway_grass_map();
        let tracks = vec![person_at(1, 2.0, 3.5)];
        let ctx = spatial_context(&map, &tracks, 2, 1.0);
        assert_eq!(ctx.region_count(1, 0), 1);
        assert_eq!(ctx.region_count(0, 0), 0);
        assert_eq!(ctx.region_count(0, 1), 0);
        assert_eq!(ctx.region_count(1, 1), 0);
        assert_eq!(ctx.out_of_bounds(), 0);
    }

    #[test]
    fn spatial_zero_tracks_all_zero() {
        let map = walkway_grass_map();
        let ctx = spatial_context(&map, &[], 2, 1.0);
        assert_eq!(ctx.total_mass(), 0);
        assert!(ctx.flatten().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn spatial_adjacency_counts_unordered_pairs_once() {
        let map = walkway_grass_map();
        // Two persons close together, one far away.
        let tracks = vec![person_at(1, 1.0, 1.0), person_at(2, 1.5, 1.0), person_at(3, 300.0, 1.0)];
        let ctx = spatial_context(&map, &tracks, 2, 1.0);
        assert_eq!(ctx.adjacency(0, 0), 1);
        assert_eq!(ctx.adjacency(0, 1), 0);
    }

    #[test]
    fn spatial_matches_bruteforce_lookup() {
        // Pseudo-random tracks on a pseudo-random map, re-checked cell by cell.
        let mut state = 0xABCDEFu64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..20 {
            let (h, w) = (5, 7);
            let cells: Vec<u16> = (0..h * w).map(|_| (next() * 3.0) as u16).collect();
            let map = SegmentationMap::new(
                h,
                w,
                vec!["a".into(), "b".into(), "c".into()],
                cells,
                0,
            )
            .unwrap();
            let tracks: Vec<Track> = (0..5)
                .map(|i| {
                    let mut t = person_at(i, next() * 10.0 - 1.0, next() * 7.0 - 1.0);
                    t.class = (next() * 2.0) as usize;
                    t
                })
                .collect();
            let ctx = spatial_context(&map, &tracks, 2, 1.0);

            // Oracle: find each foot point's cell by scanning cell bounds.
            let mut expected = SpatialContext::zeros(3, 2);
            for t in &tracks {
                let (x, y) = t.foot_point();
                let mut hit = None;
                for row in 0..h {
                    for col in 0..w {
                        let (rf, cf) = (row as f64, col as f64);
                        if x >= cf && x < cf + 1.0 && y >= rf && y < rf + 1.0 {
                            hit = Some(map.label_at(col, row));
                        }
                    }
                }
                match hit {
                    Some(region) => expected.region_counts[region * 2 + t.class] += 1,
                    None => expected.out_of_bounds += 1,
                }
            }
            for region in 0..3 {
                for class in 0..2 {
                    assert_eq!(ctx.region_count(region, class), expected.region_count(region, class));
                }
            }
            assert_eq!(ctx.out_of_bounds(), expected.out_of_bounds());
            // Adjacency oracle: direct pair scan.
            let mut expected_pairs = alloc::vec![0u32; 4];
            for a in 0..tracks.len() {
                for b in (a + 1)..tracks.len() {
                    let (ax, ay) = tracks[a].bbox.center();
                    let (bx, by) = tracks[b].bbox.center();
                    let d = ((ax - bx) * (ax - bx) + (ay - by) * (ay - by)).sqrt();
                    let r = 0.5 * (tracks[a].bbox.diagonal() + tracks[b].bbox.diagonal());
                    if d <= r {
                        let (ca, cb) = (tracks[a].class, tracks[b].class);
                        expected_pairs[ca * 2 + cb] += 1;
                        if ca != cb {
                            expected_pairs[cb * 2 + ca] += 1;
                        }
                    }
                }
            }
            for a in 0..2 {
                for b in 0..2 {
                    assert_eq!(ctx.adjacency(a, b), expected_pairs[a * 2 + b]);
                }
            }
        }
    }

    #[test]
    fn temporal_constant_speed_examples() {
        let slow = vec![vec![1.0; 20]];
        let sign = temporal_context(&slow, 10, 2.0);
        assert_eq!(sign.flagged_count, 0);
        assert!((sign.max_windowed_speed - 1.0).abs() < 1e-12);

        let fast = vec![vec![3.0; 20]];
        let sign = temporal_context(&fast, 10, 2.0);
        assert_eq!(sign.flagged_count, 1);
    }

    #[test]
    fn temporal_matches_bruteforce_windows() {
        // Alternating speeds, checked against direct recomputation of every
        // truncated trailing window.
        let series: Vec<f64> = (0..9).map(|i| if i % 2 == 0 { 0.0 } else { 4.0 }).collect();
        let window = 2;
        let mut oracle_best = f64::NEG_INFINITY;
        for k in 0..series.len() {
            let lo = (k + 1).saturating_sub(window);
            let mean: f64 = series[lo..=k].iter().sum::<f64>() / (k + 1 - lo) as f64;
            oracle_best = oracle_best.max(mean);
        }
        let sign = temporal_context(&[series], window, 10.0);
        assert_eq!(sign.max_windowed_speed, oracle_best);
        assert_eq!(sign.max_windowed_speed, 2.0);
    }

    #[test]
    fn speed_index_agrees_with_direct_histories() {
        // Streaming index vs. per-frame full-history recomputation.
        let mut frames: Vec<Vec<Track>> = Vec::new();
        let speeds_a = [0.5, 3.0, 1.0, 0.0, 2.5, 2.5];
        let speeds_b = [1.0, 1.0, 4.0];
        for t in 0..6 {
            let mut frame = Vec::new();
            let mut a = person_at(1, t as f64, 1.0);
            a.velocity = Some((speeds_a[t], 0.0));
            frame.push(a);
            if (2..5).contains(&t) {
                let mut b = person_at(2, t as f64, 2.0);
                b.velocity = Some((0.0, speeds_b[t - 2]));
                frame.push(b);
            }
            frames.push(frame);
        }
        let index = SequenceSpeedIndex::build(&frames, 2);
        for t in 0..6 {
            let mut histories = Vec::new();
            histories.push(speeds_a[..=t].to_vec());
            if (2..5).contains(&t) {
                histories.push(speeds_b[..=(t - 2)].to_vec());
            }
            let direct = temporal_context(&histories, 2, 1.9);
            let streamed = index.overspeed_at(t, 1.9);
            assert_eq!(streamed, direct, "frame {t}");
        }
    }

    #[test]
    fn calibrate_constant_and_empty() {
        let means = vec![1.0; 50];
        assert_eq!(calibrate_speed_threshold(&means, 99.5).unwrap(), 1.0);
        assert_eq!(calibrate_speed_threshold(&means, 10.0).unwrap(), 1.0);
        assert_eq!(calibrate_speed_threshold(&[], 99.5), Err(ContextError::NoSpeedWindows));
    }

    #[test]
    fn calibrate_median_matches_sort_oracle() {
        // With window 1 the trailing means are the speeds themselves.
        let means: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        let theta = calibrate_speed_threshold(&means, 50.0).unwrap();
        // Sort-based oracle: rank 0.5*(n-1) = 49.5 → midpoint of 50 and 51.
        assert_eq!(theta, 50.5);
    }

    #[test]
    fn group_median_and_equal_velocities() {
        let mut tracks = vec![
            person_at(1, 1.0, 5.0),
            person_at(2, 3.0, 5.0),
            person_at(3, 2.0, 5.0),
        ];
        for t in &mut tracks {
            t.velocity = Some((2.0, 0.0));
        }
        let g = group_context(&tracks);
        assert!(g.present);
        assert_eq!(g.count, 3);
        assert_eq!(g.x.median, 2.0);
        // All velocities identical: the motion falls on a line exactly.
        assert!(g.velocity_residual.abs() < 1e-12);
        assert_eq!(g.speed.min, 2.0);
        assert_eq!(g.speed.max, 2.0);
    }

    #[test]
    fn group_velocity_residual_unit_square() {
        let corners = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)];
        let mut tracks = Vec::new();
        for (i, &(vx, vy)) in corners.iter().enumerate() {
            let mut t = person_at(i as i64, i as f64, 5.0);
            t.velocity = Some((vx, vy));
            tracks.push(t);
        }
        let g = group_context(&tracks);
        assert!((g.velocity_residual - 1.0).abs() < 1e-12);
    }

    #[test]
    fn group_empty_frame_is_zeroed() {
        let g = group_context(&[]);
        assert!(!g.present);
        assert!(g.flatten().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn line_fit_zero_cases() {
        assert_eq!(line_fit_residual(&[]), 0.0);
        assert_eq!(line_fit_residual(&[(3.0, 4.0)]), 0.0);
        assert!(line_fit_residual(&[(0.0, 0.0), (1.0, 2.0), (2.0, 4.0)]) < 1e-12);
        // Two points always span an exact line.
        assert!(line_fit_residual(&[(0.0, 1.0), (5.0, -2.0)]) < 1e-12);
    }

    /// Brute-force minimizer over line angle with the per-angle optimal
    /// offset, refined by golden-section search around the best grid cell.
    fn sweep_residual_oracle(points: &[(f64, f64)]) -> f64 {
        let eval = |theta: f64| {
            // Perpendicular direction to a line at angle theta; the optimal
            // offset along it is the mean projection.
            let (nx, ny) = (-theta.sin(), theta.cos());
            let mean_proj: f64 =
                points.iter().map(|&(x, y)| x * nx + y * ny).sum::<f64>() / points.len() as f64;
            points
                .iter()
                .map(|&(x, y)| {
                    let d = x * nx + y * ny - mean_proj;
                    d * d
                })
                .sum::<f64>()
        };
        let steps = 20_000;
        let mut best_theta = 0.0;
        let mut best = f64::INFINITY;
        for i in 0..steps {
            let theta = core::f64::consts::PI * i as f64 / steps as f64;
            let r = eval(theta);
            if r < best {
                best = r;
                best_theta = theta;
            }
        }
        // Golden-section refinement around the best grid angle.
        let (mut lo, mut hi) = (
            best_theta - core::f64::consts::PI / steps as f64,
            best_theta + core::f64::consts::PI / steps as f64,
        );
        let phi = 0.618_033_988_749_894_9;
        for _ in 0..200 {
            let m1 = hi - phi * (hi - lo);
            let m2 = lo + phi * (hi - lo);
            if eval(m1) < eval(m2) {
                hi = m2;
            } else {
                lo = m1;
            }
        }
        best.min(eval(0.5 * (lo + hi)))
    }

    #[test]
    fn line_fit_matches_angular_sweep() {
        let mut state = 0x1234_5678u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64 * 10.0
        };
        for _ in 0..5 {
            let points: Vec<(f64, f64)> = (0..20).map(|_| (next(), next())).collect();
            let fast = line_fit_residual(&points);
            let slow = sweep_residual_oracle(&points);
            assert!((fast - slow).abs() < 1e-6, "fast {fast} vs sweep {slow}");
        }
    }

    #[test]
    fn mine_sequence_follows_segmentation_updates() {
        use crate::scene::{CategoryVector, FrameFeatures};
        // Two maps: before the update the cell is walkway, after it is grass.
        let before = SegmentationMap::new(
            2,
            2,
            vec!["walkway".to_string(), "grass".to_string()],
            vec![0, 0, 0, 0],
            0,
        )
        .unwrap();
        let after = SegmentationMap::new(
            2,
            2,
            vec!["walkway".to_string(), "grass".to_string()],
            vec![1, 1, 1, 1],
            2,
        )
        .unwrap();
        let frames: Vec<FrameFeatures> = (0..4)
            .map(|t| FrameFeatures {
                frame: t,
                tracks: vec![person_at(1, 1.0, 1.0)],
                categories: CategoryVector::zeros(1),
                seg_ref: usize::from(t >= 2),
                label: None,
            })
            .collect();
        let params = ContextParams::default();
        let mined = mine_sequence(&frames, &[before, after], 1, &params);
        assert_eq!(mined[0].spatial.region_count(0, 0), 1);
        assert_eq!(mined[1].spatial.region_count(1, 0), 0);
        assert_eq!(mined[2].spatial.region_count(1, 0), 1);
        assert_eq!(mined[3].spatial.region_count(0, 0), 0);
    }

    #[test]
    fn resolve_velocities_finite_difference() {
        let mut frames = vec![
            vec![person_at(1, 0.0, 5.0)],
            vec![],
            vec![person_at(1, 6.0, 5.0)],
        ];
        // Supplied velocity passes through untouched.
        frames[0][0].velocity = None;
        let resolved = resolve_velocities(&frames);
        assert_eq!(resolved[0][0].velocity, Some((0.0, 0.0)));
        // Gap of two frames: displacement 6 → 3 px/frame.
        assert_eq!(resolved[2][0].velocity, Some((3.0, 0.0)));

        let mut with_v = vec![vec![person_at(2, 0.0, 5.0)], vec![person_at(2, 10.0, 5.0)]];
        with_v[1][0].velocity = Some((-1.0, 0.5));
        let resolved = resolve_velocities(&with_v);
        assert_eq!(resolved[1][0].velocity, Some((-1.0, 0.5)));
    }

    proptest! {
        #[test]
        fn spatial_mass_conservation(
            feet in proptest::collection::vec((-2.0f64..8.0, -2.0f64..8.0), 0..12)
        ) {
            let map = walkway_grass_map();
            let tracks: Vec<Track> = feet
                .iter()
                .enumerate()
                .map(|(i, &(x, y))| person_at(i as i64, x, y))
                .collect();
            let ctx = spatial_context(&map, &tracks, 2, 1.0);
            prop_assert_eq!(
                ctx.total_mass() + ctx.out_of_bounds(),
                tracks.len() as u32
            );
        }

        #[test]
        fn temporal_flags_monotone_in_threshold(
            speeds in proptest::collection::vec(0.0f64..10.0, 1..30),
            theta_lo in 0.0f64..5.0,
            delta in 0.0f64..5.0,
            window in 1usize..6,
        ) {
            let histories = vec![speeds];
            let low = temporal_context(&histories, window, theta_lo);
            let high = temporal_context(&histories, window, theta_lo + delta);
            prop_assert!(high.flagged_count <= low.flagged_count);
        }

        #[test]
        fn group_stats_permutation_invariant(
            feet in proptest::collection::vec((0.0f64..100.0, 0.0f64..100.0), 2..10),
            rotate_by in 1usize..9,
        ) {
            let mut tracks: Vec<Track> = feet
                .iter()
                .enumerate()
                .map(|(i, &(x, y))| {
                    let mut t = person_at(i as i64, x, y);
                    t.velocity = Some((x * 0.1, y * 0.1));
                    t
                })
                .collect();
            let base = group_context(&tracks);
            let k = rotate_by % tracks.len();
            tracks.rotate_left(k);
            let rotated = group_context(&tracks);
            prop_assert_eq!(base.count, rotated.count);
            prop_assert_eq!(base.x, rotated.x);
            prop_assert_eq!(base.y, rotated.y);
            prop_assert_eq!(base.speed, rotated.speed);
            prop_assert!((base.position_residual - rotated.position_residual).abs() < 1e-9);
            prop_assert!((base.velocity_residual - rotated.velocity_residual).abs() < 1e-9);
        }

        #[test]
        fn line_fit_rigid_motion_invariant(
            points in proptest::collection::vec((0.0f64..10.0, 0.0f64..10.0), 2..20),
            angle in 0.0f64..core::f64::consts::TAU,
            tx in -50.0f64..50.0,
            ty in -50.0f64..50.0,
        ) {
            let base = line_fit_residual(&points);
            let (c, s) = (angle.cos(), angle.sin());
            let moved: Vec<(f64, f64)> = points
                .iter()
                .map(|&(x, y)| (c * x - s * y + tx, s * x + c * y + ty))
                .collect();
            prop_assert!((line_fit_residual(&moved) - base).abs() < 1e-9);
        }

        #[test]
        fn line_fit_scales_quadratically(
            points in proptest::collection::vec((0.0f64..10.0, 0.0f64..10.0), 2..15),
            k in 0.1f64..3.0,
        ) {
            let base = line_fit_residual(&points);
            let scaled: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (k * x, k * y)).collect();
            prop_assert!((line_fit_residual(&scaled) - k * k * base).abs() < 1e-7 * (1.0 + base));
        }
    }
}
