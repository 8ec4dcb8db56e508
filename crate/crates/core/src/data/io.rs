//! On-disk sequence format: per-frame OBJ files plus a JSON manifest.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::asset::{AnimatedAsset, Warp};
use crate::data::camera::CameraPose6;
use crate::geom::obj;
use crate::geom::Vec3;
use crate::{Error, Result};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Manifest {
    pub format_version: u32,
    pub id: String,
    pub warp: Warp,
    pub frame_count: usize,
    pub seed: u64,
    /// Conditioning camera, when the asset ships with rendered views.
    pub camera: Option<CameraPose6>,
    pub normalization: NormalizationInfo,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct NormalizationInfo {
    pub scale: f64,
    pub center: [f64; 3],
    pub root_offsets: Vec<[f64; 3]>,
}

fn frame_name(t: usize) -> String {
    format!("frame_{t:04}.obj")
}

/// Writes `frame_0001.obj .. frame_TTTT.obj` plus `manifest.json`.
pub fn write_sequence(asset: &AnimatedAsset, dir: &Path, camera: Option<CameraPose6>) -> Result<Manifest> {
    fs::create_dir_all(dir)?;
    for t in 1..=asset.frame_count {
        obj::write_obj(&dir.join(frame_name(t)), asset.frame(t))?;
    }
    let manifest = Manifest {
        format_version: MANIFEST_VERSION,
        id: asset.id.clone(),
        warp: asset.warp.clone(),
        frame_count: asset.frame_count,
        seed: asset.seed,
        camera,
        normalization: NormalizationInfo {
            scale: asset.norm_scale,
            center: [asset.norm_center.x, asset.norm_center.y, asset.norm_center.z],
            root_offsets: asset
                .root_offsets
                .iter()
                .map(|d| [d.x, d.y, d.z])
                .collect(),
        },
    };
    let json = serde_json::to_string_pretty(&manifest)?;
    fs::write(dir.join("manifest.json"), json)?;
    Ok(manifest)
}

/// Reads a sequence written by [`write_sequence`]. Watertight frames are
/// rebuilt with the same rule used at generation time.
pub fn read_sequence(dir: &Path) -> Result<AnimatedAsset> {
    let manifest_path = dir.join("manifest.json");
    if !manifest_path.exists() {
        return Err(Error::NoManifest(dir.display().to_string()));
    }
    let manifest: Manifest = serde_json::from_str(&fs::read_to_string(&manifest_path)?)?;
    let mut frames = Vec::with_capacity(manifest.frame_count);
    for t in 1..=manifest.frame_count {
        let path = dir.join(frame_name(t));
        if !path.exists() {
            let found = (1..=manifest.frame_count)
                .filter(|&u| dir.join(frame_name(u)).exists())
                .count();
            return Err(Error::FrameCountMismatch {
                expected: manifest.frame_count,
                found,
            });
        }
        frames.push(obj::read_obj(&path)?);
    }
    let watertight_frames = frames
        .iter()
        .map(|f| {
            if f.is_watertight() {
                Ok(f.clone())
            } else {
                crate::geom::watertight_flood_fill(f, super::asset::DATASET_FLOOD_FILL_RES)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let n = &manifest.normalization;
    Ok(AnimatedAsset {
        id: manifest.id,
        warp: manifest.warp,
        frame_count: manifest.frame_count,
        seed: manifest.seed,
        base_mesh: frames[0].clone(),
        frames,
        watertight_frames,
        root_offsets: n.root_offsets.iter().map(|d| Vec3::new(d[0], d[1], d[2])).collect(),
        norm_scale: n.scale,
        norm_center: Vec3::new(n.center[0], n.center[1], n.center[2]),
    })
}
