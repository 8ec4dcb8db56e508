//! Shared file helpers for frame directories.

use std::path::Path;

use anyhow::{bail, Context, Result};
use shapegen4d_core::geom::{obj, TriMesh};

/// Reads `frame_0001.obj ..` from a directory in frame order.
pub fn read_frames_dir(dir: &Path) -> Result<Vec<TriMesh>> {
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n.starts_with("frame_") && n.ends_with(".obj"))
        .collect();
    names.sort();
    if names.is_empty() {
        bail!("no frame_*.obj files in {}", dir.display());
    }
    names
        .iter()
        .map(|n| obj::read_obj(&dir.join(n)).map_err(anyhow::Error::from))
        .collect()
}
