//! Sequence normalization: root-motion removal plus one shared similarity.

use crate::geom::{TriMesh, Vec3};
use crate::{Error, Result};

use super::asset::AnimatedAsset;

/// Removes per-frame root translation (the centroid trajectory) and applies
/// one shared similarity so the union of all frames' bounding boxes is
/// centered in the unit box with its longest side equal to 1. Rotations and
/// per-frame scale changes survive; the operation is idempotent.
pub fn normalize_sequence(asset: &AnimatedAsset) -> Result<AnimatedAsset> {
    if asset.frames.is_empty() {
        return Err(Error::EmptyMesh);
    }
    // Root translation per frame, relative to frame 1.
    let c1 = asset.frame(1).centroid();
    let deltas: Vec<Vec3> = asset.frames.iter().map(|f| f.centroid() - c1).collect();
    // Union bbox after de-rooting.
    let mut lo = Vec3::repeat(f64::INFINITY);
    let mut hi = Vec3::repeat(f64::NEG_INFINITY);
    for (f, d) in asset.frames.iter().zip(&deltas) {
        let (flo, fhi) = f.bbox();
        lo = lo.inf(&(flo - d));
        hi = hi.sup(&(fhi - d));
    }
    let extent = (hi - lo).max();
    if !(extent > 0.0) {
        return Err(Error::Degenerate);
    }
    let center = (lo + hi) * 0.5;
    let scale = 1.0 / extent;

    let move_mesh = |m: &TriMesh, d: Vec3| -> TriMesh {
        let mut out = m.clone();
        out.map_vertices(|p| (p - d - center) * scale);
        out
    };
    let frames: Vec<TriMesh> = asset
        .frames
        .iter()
        .zip(&deltas)
        .map(|(f, &d)| move_mesh(f, d))
        .collect();
    let watertight_frames: Vec<TriMesh> = asset
        .watertight_frames
        .iter()
        .zip(&deltas)
        .map(|(f, &d)| move_mesh(f, d))
        .collect();
    let base_mesh = move_mesh(&asset.base_mesh, deltas[0]);

    // Compose with any normalization already present. The stored fields
    // describe the map from raw warp space: p -> scale*(p - root - center).
    let norm_scale = asset.norm_scale * scale;
    let norm_center = asset.norm_center + center / asset.norm_scale;
    let root_offsets: Vec<Vec3> = asset
        .root_offsets
        .iter()
        .zip(&deltas)
        .map(|(&old, &new)| old + new / asset.norm_scale)
        .collect();

    Ok(AnimatedAsset {
        id: asset.id.clone(),
        warp: asset.warp.clone(),
        frame_count: asset.frame_count,
        seed: asset.seed,
        base_mesh,
        frames,
        watertight_frames,
        root_offsets,
        norm_scale,
        norm_center,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::asset::{gen_asset, Warp, WarpFamily};

    #[test]
    fn drifting_asset_centroids_collapse() {
        let warp = Warp::PulseSphere {
            r_start: 0.3,
            r_end: 0.3,
            drift: [0.7, 0.0, 0.0],
        };
        let asset = gen_asset(warp, 8, 0).unwrap();
        // Drift moves the centroid before normalization.
        assert!((asset.frame(8).centroid() - asset.frame(1).centroid()).norm() > 0.5);
        let norm = normalize_sequence(&asset).unwrap();
        let c1 = norm.frame(1).centroid();
        for t in 2..=8 {
            assert!(
                (norm.frame(t).centroid() - c1).norm() < 1e-6,
                "centroid moved at frame {t}"
            );
        }
    }

    #[test]
    fn idempotent() {
        let asset = gen_asset(Warp::default_for(WarpFamily::BendCylinder), 6, 0).unwrap();
        let once = normalize_sequence(&asset).unwrap();
        let twice = normalize_sequence(&once).unwrap();
        for (a, b) in once.frames.iter().zip(&twice.frames) {
            for (va, vb) in a.vertices.iter().zip(&b.vertices) {
                assert!((va - vb).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn shared_scale_preserves_growth() {
        let asset = gen_asset(
            Warp::PulseSphere {
                r_start: 0.25,
                r_end: 0.45,
                drift: [0.0; 3],
            },
            8,
            0,
        )
        .unwrap();
        let norm = normalize_sequence(&asset).unwrap();
        let extent = |m: &TriMesh| {
            let (lo, hi) = m.bbox();
            (hi - lo).max()
        };
        assert!(extent(norm.frame(8)) > extent(norm.frame(1)) * 1.5);
        // Union fits the unit box.
        let (lo, hi) = norm.union_bbox();
        assert!(lo.min() >= -0.5 - 1e-9 && hi.max() <= 0.5 + 1e-9);
        assert!(((hi - lo).max() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn frames_stay_in_unit_box() {
        for family in [WarpFamily::WaveFlag, WarpFamily::TwistBox, WarpFamily::SplitSpheres] {
            let asset = gen_asset(Warp::default_for(family), 5, 0).unwrap();
            let norm = normalize_sequence(&asset).unwrap();
            for f in &norm.frames {
                let (lo, hi) = f.bbox();
                assert!(lo.min() >= -0.5 - 1e-9 && hi.max() <= 0.5 + 1e-9, "{family}");
            }
        }
    }

    #[test]
    fn warp_point_tracks_normalized_frames() {
        let asset = gen_asset(Warp::default_for(WarpFamily::TwistBox), 6, 3).unwrap();
        let norm = normalize_sequence(&asset).unwrap();
        for t in [2usize, 6] {
            for (v, b) in norm.frame(t).vertices.iter().zip(&norm.base_mesh.vertices) {
                let w = norm.warp_point(*b, t);
                assert!((v - w).norm() < 1e-9, "frame {t}: {v} vs {w}");
            }
        }
    }
}
