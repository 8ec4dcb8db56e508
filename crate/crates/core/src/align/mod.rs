//! Temporally-aligned query sampling and latent-consistency measurement.
//!
//! Aligned query sequences sample once on the first frame and carry the
//! samples through the animation, so the k-th latent tracks the same surface
//! point in every frame. Independent sampling (the ablation baseline)
//! re-samples every frame.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::data::asset::{apply_warp, AnimatedAsset};
use crate::geom::sample::{sample_surface_attached, SurfaceAttachment};
use crate::geom::trigrid::TriGrid;
use crate::geom::{farthest_point_sample, KdTree, PointCloud, Vec3};
use crate::{Error, Result};

/// T frames of K query points each. Aligned sequences carry the shared
/// barycentric attachment to the frame-1 base mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct QuerySequence {
    /// positions[t][k], frame t is 0-based here.
    pub positions: Vec<Vec<Vec3>>,
    /// Attachments to the base mesh; `None` for independent sampling.
    pub attachments: Option<Vec<SurfaceAttachment>>,
    /// True when positions were propagated by nearest-surface projection
    /// rather than an exact warp (split_spheres).
    pub projected: bool,
}

impl QuerySequence {
    pub fn frames(&self) -> usize {
        self.positions.len()
    }

    pub fn queries_per_frame(&self) -> usize {
        self.positions.first().map(|f| f.len()).unwrap_or(0)
    }
}

/// Number of dense surface samples per query point for FPS.
const DENSE_FACTOR: usize = 8;

/// Samples `k` aligned queries: FPS over a dense sample of the frame-1 base
/// mesh (the original, possibly non-watertight mesh the animation is defined
/// on), then warps them through the animation.
pub fn aligned_queries(asset: &AnimatedAsset, k: usize, seed: u64) -> Result<QuerySequence> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    let dense_n = (k * DENSE_FACTOR).max(1024);
    let (dense, dense_att) = sample_surface_attached(&asset.base_mesh, dense_n, seed)?;
    let picked = farthest_point_sample(&dense, k, seed)?;
    let attachments: Vec<SurfaceAttachment> = picked.iter().map(|&i| dense_att[i]).collect();
    let mut positions = Vec::with_capacity(asset.frame_count);
    if asset.warp.is_analytic() {
        for t in 1..=asset.frame_count {
            positions.push(apply_warp(asset, t, &attachments)?);
        }
    } else {
        // Chained nearest-surface projection, one frame at a time.
        let mut current: Vec<Vec3> = picked.iter().map(|&i| dense.positions[i]).collect();
        positions.push(current.clone());
        for t in 2..=asset.frame_count {
            let grid = TriGrid::build(asset.frame(t));
            current = current.iter().map(|&p| grid.closest_point(p).1).collect();
            positions.push(current.clone());
        }
    }
    Ok(QuerySequence {
        positions,
        attachments: Some(attachments),
        projected: !asset.warp.is_analytic(),
    })
}

/// Per-frame FPS with per-frame seed streams; no cross-frame correspondence.
pub fn independent_queries(asset: &AnimatedAsset, k: usize, seed: u64) -> Result<QuerySequence> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    let dense_n = (k * DENSE_FACTOR).max(1024);
    let mut positions = Vec::with_capacity(asset.frame_count);
    for t in 1..=asset.frame_count {
        let frame_seed = seed
            .wrapping_mul(0x9e37_79b9_7f4a_7c15)
            .wrapping_add(t as u64);
        let (dense, _) = sample_surface_attached(asset.frame(t), dense_n, frame_seed)?;
        let picked = farthest_point_sample(&dense, k, frame_seed)?;
        positions.push(picked.iter().map(|&i| dense.positions[i]).collect());
    }
    Ok(QuerySequence {
        positions,
        attachments: None,
        projected: false,
    })
}

/// Keeps vertex v of `original` iff its distance to the `watertight` surface
/// is at most `threshold`. Distances are exact closest-point-on-triangle.
pub fn inner_vertex_filter(
    original: &crate::geom::TriMesh,
    watertight: &crate::geom::TriMesh,
    threshold: f64,
) -> Result<Vec<bool>> {
    if original.vertices.is_empty() || watertight.is_empty() {
        return Err(Error::EmptyMesh);
    }
    let grid = TriGrid::build(watertight);
    let mask = crate::par::map_indexed(original.vertices.len(), |i| {
        let (d, _, _) = grid.closest_point(original.vertices[i]);
        d <= threshold
    });
    Ok(mask)
}

/// Average normalized L2 difference between latents at the closest 3D
/// positions across neighboring frames. Latents are `T x K x D` as nested
/// vectors; `queries` supplies the 3D position of each latent's query.
/// Normalization Z is the mean latent norm over the whole sequence.
pub fn latent_jitter(latents: &[Vec<Vec<f64>>], queries: &QuerySequence) -> Result<f64> {
    let t_frames = latents.len();
    if t_frames < 2 {
        return Err(Error::invalid("latent jitter needs at least 2 frames"));
    }
    if queries.frames() != t_frames {
        return Err(Error::ShapeMismatch(format!(
            "{} latent frames vs {} query frames",
            t_frames,
            queries.frames()
        )));
    }
    let k = queries.queries_per_frame();
    for (t, frame) in latents.iter().enumerate() {
        if frame.len() != k {
            return Err(Error::ShapeMismatch(format!(
                "frame {t}: {} latents vs {k} queries",
                frame.len()
            )));
        }
    }
    // Z: mean latent norm over all frames and indices.
    let mut z = 0.0;
    for frame in latents {
        for v in frame {
            z += norm(v);
        }
    }
    z /= (t_frames * k) as f64;
    if z == 0.0 {
        return Ok(0.0);
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for t in 0..t_frames - 1 {
        let tree = KdTree::build(&queries.positions[t + 1]);
        for i in 0..k {
            let (j, _) = tree.nearest(&queries.positions[t][i]);
            let mut d2 = 0.0;
            for (a, b) in latents[t][i].iter().zip(&latents[t + 1][j]) {
                d2 += (a - b) * (a - b);
            }
            total += d2.sqrt() / z;
            count += 1;
        }
    }
    Ok(total / count as f64)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Serializes a query sequence as a TNSR blob (`T x K x 3`) plus an
/// attachment sidecar of `(u32 face, 3 x f32 weights)` records.
pub fn write_queries(dir: &Path, name: &str, seq: &QuerySequence) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let t = seq.frames();
    let k = seq.queries_per_frame();
    let mut flat = Vec::with_capacity(t * k * 3);
    for frame in &seq.positions {
        for p in frame {
            flat.extend_from_slice(&[p.x, p.y, p.z]);
        }
    }
    crate::blob::write_blob(&dir.join(format!("{name}.tnsr")), &[t, k, 3], &flat)?;
    if let Some(att) = &seq.attachments {
        let mut w = BufWriter::new(File::create(dir.join(format!("{name}.attach")))?);
        for a in att {
            w.write_all(&a.face.to_le_bytes())?;
            for x in a.weights {
                w.write_all(&(x as f32).to_le_bytes())?;
            }
        }
    }
    Ok(())
}

pub fn read_queries(dir: &Path, name: &str) -> Result<QuerySequence> {
    let (dims, flat) = crate::blob::read_blob(&dir.join(format!("{name}.tnsr")))?;
    if dims.len() != 3 || dims[2] != 3 {
        return Err(Error::ShapeMismatch(format!("query blob dims {dims:?}")));
    }
    let (t, k) = (dims[0], dims[1]);
    let mut positions = Vec::with_capacity(t);
    for ft in 0..t {
        let mut frame = Vec::with_capacity(k);
        for i in 0..k {
            let o = (ft * k + i) * 3;
            frame.push(Vec3::new(flat[o], flat[o + 1], flat[o + 2]));
        }
        positions.push(frame);
    }
    let attach_path = dir.join(format!("{name}.attach"));
    let attachments = if attach_path.exists() {
        let mut r = BufReader::new(File::open(&attach_path)?);
        let mut buf = Vec::new();
        r.read_to_end(&mut buf)?;
        let mut att = Vec::with_capacity(k);
        for rec in buf.chunks_exact(16) {
            let face = u32::from_le_bytes(rec[0..4].try_into().unwrap());
            let w = |o: usize| f32::from_le_bytes(rec[o..o + 4].try_into().unwrap()) as f64;
            att.push(SurfaceAttachment {
                face,
                weights: [w(4), w(8), w(12)],
            });
        }
        Some(att)
    } else {
        None
    };
    Ok(QuerySequence {
        positions,
        attachments,
        projected: false,
    })
}

/// Distance from each query position to the given mesh surface; used to
/// assert queries stay on their frame's surface.
pub fn surface_residuals(positions: &[Vec3], mesh: &crate::geom::TriMesh) -> Vec<f64> {
    let grid = TriGrid::build(mesh);
    positions.iter().map(|&p| grid.closest_point(p).0).collect()
}

/// Builds a [`PointCloud`] view of one frame's queries.
pub fn frame_cloud(seq: &QuerySequence, t: usize) -> PointCloud {
    PointCloud::new(seq.positions[t].clone())
}
