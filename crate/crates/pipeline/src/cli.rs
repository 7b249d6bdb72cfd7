//! `vad` command-line interface: gen, train, score, eval, explain, context.
//!
//! Log verbosity follows the `RUST_LOG` environment variable. Every artifact
//! is written atomically; a nonzero exit code means some output failed
//! validation or was not written.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::config::RunConfig;
use crate::detector::{train_detector, Detector, SequenceScores};
use crate::ingest::{load_dataset, Dataset};
use crate::model_file;
use crate::synthgen;
use crate::write_atomic;
use vad_core::context::ContextParams;
use vad_core::detect::{explain, Decision};

const DEFAULT_SEED: u64 = 7;

#[derive(Parser)]
#[command(
    name = "vad",
    version,
    about = "Frame-level video anomaly detection over pre-extracted features"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset (presets are split into train/ and test/).
    Gen {
        /// Built-in scene preset: `desk` or `mini`.
        #[arg(long, conflicts_with = "config")]
        preset: Option<String>,
        /// TOML scene configuration file.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Root seed override.
        #[arg(long)]
        seed: Option<u64>,
        /// Also split a --config scene into train/ and test/ datasets.
        #[arg(long)]
        split: bool,
    },
    /// Train over the noise-factor grid and write the selected model.
    Train {
        /// Dataset manifest of normal-only training data.
        #[arg(long)]
        manifest: PathBuf,
        /// Optional labeled dataset for noise-factor selection by AUC.
        #[arg(long)]
        val_manifest: Option<PathBuf>,
        /// TOML run configuration.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory for model.json and loss_history.csv.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Comma-separated noise factors overriding the configured grid.
        #[arg(long, value_delimiter = ',')]
        noise_grid: Option<Vec<f64>>,
        /// Train the categories-only ablation (no mined context).
        #[arg(long)]
        no_context: bool,
        /// Override the maximum number of epochs.
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Score a dataset frame by frame to JSONL.
    Score {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Features reported per frame in the `top` field.
        #[arg(long, default_value_t = 3)]
        top_k: usize,
    },
    /// Evaluate against ground-truth labels: report JSON plus a text table.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        /// Report JSON path.
        #[arg(long, default_value = "report.json")]
        out: PathBuf,
        /// Optional CSV of ROC points.
        #[arg(long)]
        roc_csv: Option<PathBuf>,
        /// Assert that the model is the no-context ablation.
        #[arg(long)]
        no_context: bool,
    },
    /// Rank the features behind one frame's score.
    Explain {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        /// Global frame index (dataset order, sequences concatenated).
        #[arg(long)]
        frame: usize,
        #[arg(long, default_value_t = 10)]
        top_k: usize,
    },
    /// Dump mined contextual features as JSONL for inspection.
    Context {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        window: usize,
        /// Overspeed threshold; calibrated from this dataset when omitted.
        #[arg(long)]
        speed_threshold: Option<f64>,
        /// Calibration percentile used when no threshold is given.
        #[arg(long, default_value_t = 99.5)]
        speed_percentile: f64,
        #[arg(long, default_value_t = 1.0)]
        radius_scale: f64,
    },
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Gen { preset, config, out, seed, split } => {
            cmd_gen(preset, config, out, seed, split)
        }
        Command::Train {
            manifest,
            val_manifest,
            config,
            out,
            seed,
            noise_grid,
            no_context,
            epochs,
        } => cmd_train(manifest, val_manifest, config, out, seed, noise_grid, no_context, epochs),
        Command::Score { model, manifest, out, top_k } => cmd_score(model, manifest, out, top_k),
        Command::Eval { model, manifest, out, roc_csv, no_context } => {
            cmd_eval(model, manifest, out, roc_csv, no_context)
        }
        Command::Explain { model, manifest, frame, top_k } => {
            cmd_explain(model, manifest, frame, top_k)
        }
        Command::Context { manifest, out, window, speed_threshold, speed_percentile, radius_scale } => {
            cmd_context(manifest, out, window, speed_threshold, speed_percentile, radius_scale)
        }
    }
}

fn load_dataset_arg(path: &Path) -> anyhow::Result<Dataset> {
    load_dataset(path).with_context(|| format!("loading dataset {}", path.display()))
}

fn cmd_gen(
    preset: Option<String>,
    config: Option<PathBuf>,
    out: PathBuf,
    seed: Option<u64>,
    split: bool,
) -> anyhow::Result<()> {
    let mut scene = match (&preset, &config) {
        (Some(name), None) => synthgen::preset(name, seed.unwrap_or(DEFAULT_SEED))
            .ok_or_else(|| anyhow::anyhow!("unknown preset `{name}` (expected desk or mini)"))?,
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading scene config {}", path.display()))?;
            toml::from_str(&text)
                .with_context(|| format!("parsing scene config {}", path.display()))?
        }
        _ => bail!("pass exactly one of --preset or --config"),
    };
    if let Some(seed) = seed {
        scene.seed = seed;
    }

    if preset.is_some() || split {
        let (train, test) = synthgen::split(&scene);
        let train_manifest = synthgen::generate(&train, &out.join("train"))?;
        let test_manifest = synthgen::generate(&test, &out.join("test"))?;
        log::info!(
            "generated {} train frames and {} test frames",
            train.sequence_count * train.frame_count,
            test.sequence_count * test.frame_count
        );
        println!("{}", train_manifest.display());
        println!("{}", test_manifest.display());
    } else {
        let manifest = synthgen::generate(&scene, &out)?;
        println!("{}", manifest.display());
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_train(
    manifest: PathBuf,
    val_manifest: Option<PathBuf>,
    config: Option<PathBuf>,
    out: PathBuf,
    seed: Option<u64>,
    noise_grid: Option<Vec<f64>>,
    no_context: bool,
    epochs: Option<usize>,
) -> anyhow::Result<()> {
    let run_config = match &config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let seed = seed.or(run_config.seed).unwrap_or(DEFAULT_SEED);
    let mut options = run_config.train_options(seed, no_context);
    if let Some(grid) = noise_grid {
        options.noise_grid = grid;
    }
    if let Some(epochs) = epochs {
        options.train.max_epochs = epochs;
    }

    let dataset = load_dataset_arg(&manifest)?;
    let validation = val_manifest.as_deref().map(load_dataset_arg).transpose()?;
    log::info!(
        "training on {} frames across {} sequences (grid of {})",
        dataset.frame_total(),
        dataset.sequences.len(),
        options.noise_grid.len()
    );

    let outcome = train_detector(&dataset, validation.as_ref(), &options)?;

    let model_path = out.join("model.json");
    model_file::save(&outcome.detector, &model_path)?;
    let mut csv = String::from("noise_factor,epoch,loss\n");
    for run in &outcome.runs {
        for (epoch, loss) in run.loss_history.iter().enumerate() {
            csv.push_str(&format!("{},{epoch},{loss}\n", run.noise_factor));
        }
    }
    write_atomic(&out.join("loss_history.csv"), csv.as_bytes())?;

    for run in &outcome.runs {
        log::info!(
            "noise {:>5}: {} epochs, final loss {:.3e}{}",
            run.noise_factor,
            run.epochs_run,
            run.loss_history.last().copied().unwrap_or(f64::NAN),
            match run.selection_metric {
                Some(metric) => format!(", selection metric {metric:.6}"),
                None => String::new(),
            }
        );
    }
    println!(
        "selected noise factor {} by {} -> {}",
        outcome.selected_noise,
        outcome.selection_rule,
        model_path.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct ScoreLine {
    t: usize,
    err: f64,
    decision: u8,
    top: Vec<(String, f64)>,
}

fn score_jsonl(
    detector: &Detector,
    scored: &[SequenceScores],
    top_k: usize,
) -> anyhow::Result<String> {
    let schema = detector.model.schema();
    let mut out = String::new();
    let mut global_t = 0usize;
    for sequence in scored {
        for score in &sequence.scores {
            let decision = match score.decision {
                Some(Decision::Abnormal) => 1,
                Some(Decision::Normal) => 0,
                None => bail!("model carries no decision threshold; retrain to calibrate one"),
            };
            let line = ScoreLine {
                t: global_t,
                err: score.error,
                decision,
                top: explain(score, schema, top_k),
            };
            out.push_str(&serde_json::to_string(&line)?);
            out.push('\n');
            global_t += 1;
        }
    }
    Ok(out)
}

fn cmd_score(model: PathBuf, manifest: PathBuf, out: PathBuf, top_k: usize) -> anyhow::Result<()> {
    let detector = model_file::load(&model)?;
    let dataset = load_dataset_arg(&manifest)?;
    let scored = detector.score_dataset(&dataset)?;
    let jsonl = score_jsonl(&detector, &scored, top_k)?;
    write_atomic(&out, jsonl.as_bytes())?;
    let frames: usize = scored.iter().map(|s| s.scores.len()).sum();
    log::info!("scored {frames} frames");
    println!("{}", out.display());
    Ok(())
}

fn cmd_eval(
    model: PathBuf,
    manifest: PathBuf,
    out: PathBuf,
    roc_csv: Option<PathBuf>,
    no_context: bool,
) -> anyhow::Result<()> {
    let detector = model_file::load(&model)?;
    if no_context && detector.model.schema().has_context() {
        bail!(
            "--no-context requires a model trained without context blocks; \
             train one with `vad train --no-context`"
        );
    }
    let dataset = load_dataset_arg(&manifest)?;
    let report = detector.evaluate(&dataset)?;
    write_atomic(&out, serde_json::to_string_pretty(&report)?.as_bytes())?;
    if let Some(csv_path) = &roc_csv {
        write_atomic(csv_path, report.roc_csv().as_bytes())?;
    }
    print!("{}", report.table());
    log::info!("report -> {}", out.display());
    Ok(())
}

fn cmd_explain(
    model: PathBuf,
    manifest: PathBuf,
    frame: usize,
    top_k: usize,
) -> anyhow::Result<()> {
    let detector = model_file::load(&model)?;
    let dataset = load_dataset_arg(&manifest)?;
    let scored = detector.score_dataset(&dataset)?;
    let mut global_t = 0usize;
    for sequence in &scored {
        for score in &sequence.scores {
            if global_t == frame {
                println!(
                    "frame {frame} (sequence {}, local {}): error {:.6e}{}",
                    sequence.sequence,
                    score.frame,
                    score.error,
                    match score.decision {
                        Some(Decision::Abnormal) => ", abnormal",
                        Some(Decision::Normal) => ", normal",
                        None => "",
                    }
                );
                for (rank, (name, err)) in
                    explain(score, detector.model.schema(), top_k).iter().enumerate()
                {
                    println!("{:>3}. {name}  {err:.6e}", rank + 1);
                }
                return Ok(());
            }
            global_t += 1;
        }
    }
    bail!("frame {frame} outside dataset of {global_t} frames");
}

#[derive(Serialize)]
struct ContextLine {
    seq: String,
    t: usize,
    region_counts: Vec<Vec<u32>>,
    adjacency: Vec<Vec<u32>>,
    out_of_bounds: u32,
    flagged_count: usize,
    max_windowed_speed: f64,
    group: GroupLine,
}

#[derive(Serialize)]
struct GroupLine {
    present: bool,
    count: usize,
    x: (f64, f64, f64),
    y: (f64, f64, f64),
    speed: (f64, f64, f64),
    position_residual: f64,
    velocity_residual: f64,
}

fn cmd_context(
    manifest: PathBuf,
    out: PathBuf,
    window: usize,
    speed_threshold: Option<f64>,
    speed_percentile: f64,
    radius_scale: f64,
) -> anyhow::Result<()> {
    let dataset = load_dataset_arg(&manifest)?;
    let threshold = match speed_threshold {
        Some(t) => t,
        None => {
            crate::detector::calibrate_speed_threshold_for(&dataset, window, speed_percentile)?
        }
    };
    let params = ContextParams { window, speed_threshold: threshold, radius_scale };
    log::info!("overspeed threshold {threshold:.4} px/frame");

    let mut jsonl = String::new();
    for seq in &dataset.sequences {
        let mined = vad_core::context::mine_sequence(
            &seq.frames,
            &seq.segmentation,
            dataset.object_class_count(),
            &params,
        );
        for (t, ctx) in mined.iter().enumerate() {
            let regions = ctx.spatial.region_classes();
            let objects = ctx.spatial.object_classes();
            let line = ContextLine {
                seq: seq.name.clone(),
                t,
                region_counts: (0..regions)
                    .map(|c| (0..objects).map(|j| ctx.spatial.region_count(c, j)).collect())
                    .collect(),
                adjacency: (0..objects)
                    .map(|a| (0..objects).map(|b| ctx.spatial.adjacency(a, b)).collect())
                    .collect(),
                out_of_bounds: ctx.spatial.out_of_bounds(),
                flagged_count: ctx.temporal.flagged_count,
                max_windowed_speed: ctx.temporal.max_windowed_speed,
                group: GroupLine {
                    present: ctx.group.present,
                    count: ctx.group.count,
                    x: (ctx.group.x.min, ctx.group.x.max, ctx.group.x.median),
                    y: (ctx.group.y.min, ctx.group.y.max, ctx.group.y.median),
                    speed: (
                        ctx.group.speed.min,
                        ctx.group.speed.max,
                        ctx.group.speed.median,
                    ),
                    position_residual: ctx.group.position_residual,
                    velocity_residual: ctx.group.velocity_residual,
                },
            };
            jsonl.push_str(&serde_json::to_string(&line)?);
            jsonl.push('\n');
        }
    }
    write_atomic(&out, jsonl.as_bytes())?;
    println!("{}", out.display());
    Ok(())
}
