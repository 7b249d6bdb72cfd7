//! IO half of the anomaly detection engine: feature-stream parsers, dataset
//! loading, the synthetic scene generator, model persistence, and the
//! pipeline glue that turns a dataset plus a trained model into scores and
//! reports. The pure math lives in `vad-core`.

pub mod cli;
pub mod config;
pub mod detector;
pub mod ingest;
pub mod model_file;
pub mod report;
pub mod synthgen;

use std::io::Write;
use std::path::Path;

/// splitmix64-style seed derivation so every consumer of the root seed gets
/// an independent, reproducible stream.
pub(crate) fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Writes a file atomically: temp file in the same directory, then rename, so
/// interrupted runs never leave truncated artifacts.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile_in(dir)?;
    tmp.1.write_all(bytes)?;
    tmp.1.sync_all()?;
    drop(tmp.1);
    std::fs::rename(&tmp.0, path)
}

fn tempfile_in(dir: &Path) -> std::io::Result<(std::path::PathBuf, std::fs::File)> {
    use std::time::{SystemTime, UNIX_EPOCH};
    let nanos = SystemTime::now().duration_since(UNIX_EPOCH).unwrap_or_default().as_nanos();
    let pid = std::process::id();
    for attempt in 0..100 {
        let candidate = dir.join(format!(".tmp-{pid}-{nanos}-{attempt}"));
        match std::fs::OpenOptions::new().write(true).create_new(true).open(&candidate) {
            Ok(file) => return Ok((candidate, file)),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(e),
        }
    }
    Err(std::io::Error::other("could not create temp file"))
}
