//! Animated assets: a base mesh plus a deterministic per-frame warp family.

use serde::{Deserialize, Serialize};

use crate::geom::mesh::{box_mesh, cylinder, icosphere, plane_grid};
use crate::geom::sample::SurfaceAttachment;
use crate::geom::trigrid::TriGrid;
use crate::geom::{marching_cubes, TriMesh, Vec3, VoxelGrid};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WarpFamily {
    BendCylinder,
    PulseSphere,
    WaveFlag,
    TwistBox,
    SplitSpheres,
}

impl std::str::FromStr for WarpFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bend_cylinder" => Ok(WarpFamily::BendCylinder),
            "pulse_sphere" => Ok(WarpFamily::PulseSphere),
            "wave_flag" => Ok(WarpFamily::WaveFlag),
            "twist_box" => Ok(WarpFamily::TwistBox),
            "split_spheres" => Ok(WarpFamily::SplitSpheres),
            other => Err(Error::invalid(format!("unknown warp family '{other}'"))),
        }
    }
}

impl std::fmt::Display for WarpFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            WarpFamily::BendCylinder => "bend_cylinder",
            WarpFamily::PulseSphere => "pulse_sphere",
            WarpFamily::WaveFlag => "wave_flag",
            WarpFamily::TwistBox => "twist_box",
            WarpFamily::SplitSpheres => "split_spheres",
        };
        f.write_str(s)
    }
}

/// Deterministic warp `w_t` with `w_1 = identity`. Every family evaluates an
/// amplitude-ramped closed form of the normalized time
/// `tau = (t - 1) / (T - 1)`, plus an optional root drift used to exercise
/// root-motion removal.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Warp {
    /// Barr bend about the z axis; the cylinder spine (the y axis) maps to a
    /// circular arc with curvature `max_bend * tau / (2 * half_height)`.
    BendCylinder {
        radius: f64,
        half_height: f64,
        max_bend: f64,
        drift: [f64; 3],
    },
    /// Radial scale about the center: radius `r_start -> r_end`.
    PulseSphere {
        r_start: f64,
        r_end: f64,
        drift: [f64; 3],
    },
    /// Traveling sine on a planar sheet:
    /// `z(x, tau) = amp * tau * sin(k * x - omega * tau)`.
    WaveFlag {
        half_w: f64,
        half_h: f64,
        amp: f64,
        k: f64,
        omega: f64,
        drift: [f64; 3],
    },
    /// Piecewise-rigid twist about the y axis: segment `s` rotates by
    /// `max_twist * tau * s / (segments - 1)`.
    TwistBox {
        half_x: f64,
        half_y: f64,
        half_z: f64,
        segments: u32,
        max_twist: f64,
        drift: [f64; 3],
    },
    /// Two spheres separating from full overlap to disjoint blobs; frames
    /// are analytic per-frame meshes (topology changes, no shared warp).
    SplitSpheres {
        radius: f64,
        start_offset: f64,
        end_offset: f64,
        mesh_resolution: usize,
    },
}

impl Warp {
    pub fn family(&self) -> WarpFamily {
        match self {
            Warp::BendCylinder { .. } => WarpFamily::BendCylinder,
            Warp::PulseSphere { .. } => WarpFamily::PulseSphere,
            Warp::WaveFlag { .. } => WarpFamily::WaveFlag,
            Warp::TwistBox { .. } => WarpFamily::TwistBox,
            Warp::SplitSpheres { .. } => WarpFamily::SplitSpheres,
        }
    }

    /// Families other than split_spheres define a bijective warp on the base
    /// surface.
    pub fn is_analytic(&self) -> bool {
        !matches!(self, Warp::SplitSpheres { .. })
    }

    pub fn default_for(family: WarpFamily) -> Warp {
        match family {
            WarpFamily::BendCylinder => Warp::BendCylinder {
                radius: 0.12,
                half_height: 0.38,
                max_bend: 1.0,
                drift: [0.0; 3],
            },
            WarpFamily::PulseSphere => Warp::PulseSphere {
                r_start: 0.3,
                r_end: 0.42,
                drift: [0.0; 3],
            },
            WarpFamily::WaveFlag => Warp::WaveFlag {
                half_w: 0.42,
                half_h: 0.28,
                amp: 0.1,
                k: 12.0,
                omega: 4.0,
                drift: [0.0; 3],
            },
            WarpFamily::TwistBox => Warp::TwistBox {
                half_x: 0.16,
                half_y: 0.4,
                half_z: 0.16,
                segments: 6,
                max_twist: 1.2,
                drift: [0.0; 3],
            },
            WarpFamily::SplitSpheres => Warp::SplitSpheres {
                radius: 0.18,
                start_offset: 0.05,
                end_offset: 0.28,
                mesh_resolution: 48,
            },
        }
    }

    /// Randomized parameters for dataset generation; shapes stay roughly
    /// within the unit box before normalization.
    pub fn sampled(family: WarpFamily, rng: &mut crate::rng::Rng) -> Warp {
        use rand::Rng as _;
        match family {
            WarpFamily::BendCylinder => Warp::BendCylinder {
                radius: rng.gen_range(0.08..0.16),
                half_height: rng.gen_range(0.3..0.42),
                max_bend: rng.gen_range(0.5..1.4),
                drift: [0.0; 3],
            },
            WarpFamily::PulseSphere => {
                let r0: f64 = rng.gen_range(0.22..0.34);
                let r1 = (r0 * rng.gen_range(1.15..1.5)).min(0.46);
                Warp::PulseSphere {
                    r_start: r0,
                    r_end: r1,
                    drift: [0.0; 3],
                }
            }
            WarpFamily::WaveFlag => Warp::WaveFlag {
                half_w: rng.gen_range(0.3..0.45),
                half_h: rng.gen_range(0.2..0.32),
                amp: rng.gen_range(0.05..0.12),
                k: rng.gen_range(8.0..16.0),
                omega: rng.gen_range(2.0..6.0),
                drift: [0.0; 3],
            },
            WarpFamily::TwistBox => Warp::TwistBox {
                half_x: rng.gen_range(0.1..0.2),
                half_y: rng.gen_range(0.3..0.42),
                half_z: rng.gen_range(0.1..0.2),
                segments: rng.gen_range(4..8),
                max_twist: rng.gen_range(0.6..1.6),
                drift: [0.0; 3],
            },
            WarpFamily::SplitSpheres => {
                let r = rng.gen_range(0.14..0.2);
                Warp::SplitSpheres {
                    radius: r,
                    start_offset: r * 0.3,
                    end_offset: r + rng.gen_range(0.05..0.12),
                    mesh_resolution: 48,
                }
            }
        }
    }

    fn base_mesh(&self) -> TriMesh {
        match *self {
            Warp::BendCylinder {
                radius,
                half_height,
                ..
            } => cylinder(Vec3::zeros(), radius, half_height, 32, 16),
            Warp::PulseSphere { r_start, .. } => icosphere(Vec3::zeros(), r_start, 3),
            Warp::WaveFlag { half_w, half_h, .. } => {
                plane_grid(Vec3::zeros(), half_w, half_h, 28, 18)
            }
            Warp::TwistBox {
                half_x,
                half_y,
                half_z,
                segments,
                ..
            } => segmented_box(half_x, half_y, half_z, segments),
            Warp::SplitSpheres {
                radius,
                start_offset,
                mesh_resolution,
                ..
            } => split_spheres_mesh(radius, start_offset, mesh_resolution),
        }
    }

    /// Closed-form warp at normalized time `tau` in [0, 1]; only valid for
    /// analytic families.
    pub fn eval(&self, p: Vec3, tau: f64) -> Vec3 {
        let drifted = |q: Vec3, drift: [f64; 3]| {
            q + Vec3::new(drift[0], drift[1], drift[2]) * tau
        };
        match *self {
            Warp::BendCylinder {
                half_height,
                max_bend,
                drift,
                ..
            } => {
                let curvature = max_bend * tau / (2.0 * half_height);
                let q = if curvature.abs() < 1e-9 {
                    p
                } else {
                    let r = 1.0 / curvature;
                    let theta = curvature * p.y;
                    Vec3::new(
                        r - (r - p.x) * theta.cos(),
                        (r - p.x) * theta.sin(),
                        p.z,
                    )
                };
                drifted(q, drift)
            }
            Warp::PulseSphere {
                r_start,
                r_end,
                drift,
            } => {
                let scale = (r_start + (r_end - r_start) * tau) / r_start;
                drifted(p * scale, drift)
            }
            Warp::WaveFlag {
                amp, k, omega, drift, ..
            } => {
                let z = amp * tau * (k * p.x - omega * tau).sin();
                drifted(Vec3::new(p.x, p.y, p.z + z), drift)
            }
            Warp::TwistBox {
                half_y,
                segments,
                max_twist,
                drift,
                ..
            } => {
                let s = segment_of(p.y, half_y, segments);
                let angle = if segments > 1 {
                    max_twist * tau * s as f64 / (segments - 1) as f64
                } else {
                    0.0
                };
                let (sin, cos) = angle.sin_cos();
                let q = Vec3::new(
                    cos * p.x + sin * p.z,
                    p.y,
                    -sin * p.x + cos * p.z,
                );
                drifted(q, drift)
            }
            Warp::SplitSpheres { .. } => {
                unreachable!("split_spheres has no analytic warp")
            }
        }
    }
}

fn segment_of(y: f64, half_y: f64, segments: u32) -> u32 {
    let t = ((y + half_y) / (2.0 * half_y)).clamp(0.0, 1.0);
    ((t * segments as f64) as u32).min(segments - 1)
}

/// Stack of `segments` disjoint closed boxes along y with small gaps, so
/// every face sits strictly inside one rigid segment and the piecewise-rigid
/// twist keeps the warped mesh and the analytic warp in exact agreement.
fn segmented_box(half_x: f64, half_y: f64, half_z: f64, segments: u32) -> TriMesh {
    let band = 2.0 * half_y / segments as f64;
    let gap = (band * 0.15).min(0.02);
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for s in 0..segments {
        let y_lo = -half_y + band * s as f64 + gap * 0.5;
        let y_hi = -half_y + band * (s + 1) as f64 - gap * 0.5;
        let center = Vec3::new(0.0, (y_lo + y_hi) * 0.5, 0.0);
        let half = Vec3::new(half_x, (y_hi - y_lo) * 0.5, half_z);
        let seg = box_mesh(center, half);
        let off = vertices.len() as u32;
        vertices.extend_from_slice(&seg.vertices);
        faces.extend(seg.faces.iter().map(|f| [f[0] + off, f[1] + off, f[2] + off]));
    }
    TriMesh::new(vertices, faces).expect("segmented box is valid")
}

/// Union-of-two-spheres mesh extracted from the analytic SDF.
fn split_spheres_mesh(radius: f64, offset: f64, resolution: usize) -> TriMesh {
    let mut grid = VoxelGrid::unit_box(resolution);
    let band = 4.0 * grid.cell;
    let c1 = Vec3::new(-offset, 0.0, 0.0);
    let c2 = Vec3::new(offset, 0.0, 0.0);
    for z in 0..resolution {
        for y in 0..resolution {
            for x in 0..resolution {
                let p = grid.center(x, y, z);
                let sd = ((p - c1).norm() - radius).min((p - c2).norm() - radius);
                let i = grid.index(x, y, z);
                grid.values[i] = sd.clamp(-band, band);
            }
        }
    }
    marching_cubes(&grid, 0.0).expect("split spheres mesh")
}

/// Base mesh, per-frame meshes, evaluable warp, and watertight conversions.
#[derive(Debug, Clone, PartialEq)]
pub struct AnimatedAsset {
    pub id: String,
    pub warp: Warp,
    pub frame_count: usize,
    pub seed: u64,
    /// Frame-1 mesh in asset coordinates (the mesh the animation is defined
    /// on; open sheet for the flag family).
    pub base_mesh: TriMesh,
    /// Animated frames, 1-based frame t at index t-1.
    pub frames: Vec<TriMesh>,
    pub watertight_frames: Vec<TriMesh>,
    /// Per-frame root translation removed by normalization (zero before).
    pub root_offsets: Vec<Vec3>,
    /// Shared similarity applied by normalization: p -> scale * (p - center).
    pub norm_scale: f64,
    pub norm_center: Vec3,
}

impl AnimatedAsset {
    pub fn tau(&self, t: usize) -> f64 {
        assert_frame_in_range(t, self.frame_count);
        (t - 1) as f64 / (self.frame_count - 1) as f64
    }

    /// Full point map from normalized base-surface coordinates to frame `t`:
    /// undo the shared similarity, evaluate the raw warp, remove the root
    /// offset, and re-apply the shared similarity.
    pub fn warp_point(&self, p_base: Vec3, t: usize) -> Vec3 {
        let tau = self.tau(t);
        let raw = p_base / self.norm_scale + self.norm_center;
        let warped = self.warp.eval(raw, tau);
        (warped - self.root_offsets[t - 1] - self.norm_center) * self.norm_scale
    }

    pub fn frame(&self, t: usize) -> &TriMesh {
        &self.frames[t - 1]
    }

    pub fn watertight_frame(&self, t: usize) -> &TriMesh {
        &self.watertight_frames[t - 1]
    }

    /// Union bounding box over all frames.
    pub fn union_bbox(&self) -> (Vec3, Vec3) {
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for f in &self.frames {
            let (flo, fhi) = f.bbox();
            lo = lo.inf(&flo);
            hi = hi.sup(&fhi);
        }
        (lo, hi)
    }
}

fn assert_frame_in_range(t: usize, frame_count: usize) {
    assert!(t >= 1 && t <= frame_count, "frame index {t} out of range");
}

/// Builds a deterministic animated asset. For analytic families the frames
/// are the warped base mesh; split_spheres builds analytic per-frame meshes
/// instead (its topology changes across frames).
pub fn gen_asset(warp: Warp, frame_count: usize, seed: u64) -> Result<AnimatedAsset> {
    if frame_count < 2 {
        return Err(Error::invalid("frame count must be at least 2"));
    }
    let base_mesh = warp.base_mesh();
    let mut frames = Vec::with_capacity(frame_count);
    match &warp {
        Warp::SplitSpheres {
            radius,
            start_offset,
            end_offset,
            mesh_resolution,
        } => {
            for t in 1..=frame_count {
                let tau = (t - 1) as f64 / (frame_count - 1) as f64;
                let offset = start_offset + (end_offset - start_offset) * tau;
                frames.push(split_spheres_mesh(*radius, offset, *mesh_resolution));
            }
        }
        analytic => {
            for t in 1..=frame_count {
                let tau = (t - 1) as f64 / (frame_count - 1) as f64;
                let mut m = base_mesh.clone();
                m.map_vertices(|p| analytic.eval(p, tau));
                frames.push(m);
            }
        }
    }
    let watertight_frames = frames
        .iter()
        .map(|f| watertight_version(f))
        .collect::<Result<Vec<_>>>()?;
    Ok(AnimatedAsset {
        id: format!("{}-{seed}", warp.family()),
        warp,
        frame_count,
        seed,
        base_mesh,
        frames,
        watertight_frames,
        root_offsets: vec![Vec3::zeros(); frame_count],
        norm_scale: 1.0,
        norm_center: Vec3::zeros(),
    })
}

/// Watertight conversion resolution used when a frame mesh is open.
pub const DATASET_FLOOD_FILL_RES: usize = 96;

fn watertight_version(mesh: &TriMesh) -> Result<TriMesh> {
    if mesh.is_watertight() {
        return Ok(mesh.clone());
    }
    // Open sheets must fit the unit box before flood filling; dataset
    // families are constructed to.
    crate::geom::watertight_flood_fill(mesh, DATASET_FLOOD_FILL_RES)
}

/// Evaluates the warp at frame `t` (1-based) for points attached to the base
/// surface. Analytic families evaluate the closed form; split_spheres
/// propagates by chained nearest-surface projection.
pub fn apply_warp(
    asset: &AnimatedAsset,
    t: usize,
    attachments: &[SurfaceAttachment],
) -> Result<Vec<Vec3>> {
    if t < 1 || t > asset.frame_count {
        return Err(Error::invalid(format!(
            "frame index {t} out of range 1..={}",
            asset.frame_count
        )));
    }
    for a in attachments {
        if a.face as usize >= asset.base_mesh.faces.len() {
            return Err(Error::invalid("attachment references missing base face"));
        }
    }
    let base_points: Vec<Vec3> = attachments
        .iter()
        .map(|a| asset.base_mesh.bary_point(a.face as usize, a.weights))
        .collect();
    if asset.warp.is_analytic() {
        Ok(base_points
            .iter()
            .map(|&p| asset.warp_point(p, t))
            .collect())
    } else {
        // Chained nearest-surface projection through the per-frame meshes.
        let mut current = base_points;
        for s in 2..=t {
            let grid = TriGrid::build(asset.frame(s));
            current = current
                .iter()
                .map(|&p| grid.closest_point(p).1)
                .collect();
        }
        Ok(current)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::sample::sample_surface_attached;

    #[test]
    fn pulse_sphere_volume_ratio() {
        let warp = Warp::PulseSphere {
            r_start: 0.3,
            r_end: 0.45,
            drift: [0.0; 3],
        };
        let asset = gen_asset(warp, 16, 0).unwrap();
        let vol = |m: &TriMesh| -> f64 {
            (0..m.faces.len())
                .map(|f| {
                    let [a, b, c] = m.triangle(f);
                    a.dot(&b.cross(&c)) / 6.0
                })
                .sum()
        };
        let ratio = vol(asset.frame(16)) / vol(asset.frame(1));
        let expect = (0.45f64 / 0.3).powi(3);
        assert!((ratio - expect).abs() / expect < 0.05, "ratio {ratio} vs {expect}");
    }

    #[test]
    fn zero_amplitude_frames_identical() {
        for family in [
            WarpFamily::BendCylinder,
            WarpFamily::PulseSphere,
            WarpFamily::WaveFlag,
            WarpFamily::TwistBox,
            WarpFamily::SplitSpheres,
        ] {
            let warp = match Warp::default_for(family) {
                Warp::BendCylinder { radius, half_height, drift, .. } => Warp::BendCylinder {
                    radius,
                    half_height,
                    max_bend: 0.0,
                    drift,
                },
                Warp::PulseSphere { r_start, drift, .. } => Warp::PulseSphere {
                    r_start,
                    r_end: r_start,
                    drift,
                },
                Warp::WaveFlag { half_w, half_h, k, omega, drift, .. } => Warp::WaveFlag {
                    half_w,
                    half_h,
                    amp: 0.0,
                    k,
                    omega,
                    drift,
                },
                Warp::TwistBox { half_x, half_y, half_z, segments, drift, .. } => Warp::TwistBox {
                    half_x,
                    half_y,
                    half_z,
                    segments,
                    max_twist: 0.0,
                    drift,
                },
                Warp::SplitSpheres { radius, start_offset, mesh_resolution, .. } => {
                    Warp::SplitSpheres {
                        radius,
                        start_offset,
                        end_offset: start_offset,
                        mesh_resolution,
                    }
                }
            };
            let asset = gen_asset(warp, 2, 1).unwrap();
            assert_eq!(asset.frame(1).faces, asset.frame(2).faces);
            for (a, b) in asset
                .frame(1)
                .vertices
                .iter()
                .zip(&asset.frame(2).vertices)
            {
                assert!((a - b).norm() <= 1e-9, "{family}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn wave_flag_matches_closed_form() {
        let warp = Warp::WaveFlag {
            half_w: 0.4,
            half_h: 0.25,
            amp: 0.08,
            k: 10.0,
            omega: 3.0,
            drift: [0.0; 3],
        };
        let asset = gen_asset(warp, 16, 0).unwrap();
        for t in 1..=16usize {
            let tau = (t - 1) as f64 / 15.0;
            for (v, b) in asset.frame(t).vertices.iter().zip(&asset.base_mesh.vertices) {
                let expect = 0.08 * tau * (10.0 * b.x - 3.0 * tau).sin();
                assert_eq!(v.z, b.z + expect);
                assert_eq!(v.x, b.x);
                assert_eq!(v.y, b.y);
            }
        }
    }

    #[test]
    fn warp_identity_at_frame_1() {
        for family in [
            WarpFamily::BendCylinder,
            WarpFamily::PulseSphere,
            WarpFamily::WaveFlag,
            WarpFamily::TwistBox,
        ] {
            let asset = gen_asset(Warp::default_for(family), 8, 0).unwrap();
            for (a, b) in asset.frame(1).vertices.iter().zip(&asset.base_mesh.vertices) {
                assert_eq!(a, b, "{family}");
            }
        }
    }

    #[test]
    fn apply_warp_identity_at_t1() {
        let asset = gen_asset(Warp::default_for(WarpFamily::BendCylinder), 8, 0).unwrap();
        let (cloud, att) = sample_surface_attached(&asset.base_mesh, 64, 5).unwrap();
        let out = apply_warp(&asset, 1, &att).unwrap();
        for (p, q) in cloud.positions.iter().zip(&out) {
            assert!((p - q).norm() < 1e-12);
        }
    }

    #[test]
    fn twist_box_segments_are_rigid() {
        let warp = Warp::TwistBox {
            half_x: 0.15,
            half_y: 0.4,
            half_z: 0.15,
            segments: 5,
            max_twist: 1.2,
            drift: [0.0; 3],
        };
        let asset = gen_asset(warp.clone(), 8, 0).unwrap();
        // Group base vertices by segment; within a segment all pairwise
        // distances must be preserved by every frame.
        let segment = |p: &Vec3| segment_of(p.y, 0.4, 5);
        let verts = &asset.base_mesh.vertices;
        for t in [3usize, 8] {
            let frame = asset.frame(t);
            for i in 0..verts.len() {
                for j in (i + 1)..verts.len().min(i + 40) {
                    if segment(&verts[i]) != segment(&verts[j]) {
                        continue;
                    }
                    let d0 = (verts[i] - verts[j]).norm();
                    let d1 = (frame.vertices[i] - frame.vertices[j]).norm();
                    assert!((d0 - d1).abs() < 1e-6, "segment distance changed");
                }
            }
        }
    }

    #[test]
    fn wave_point_warp_closed_form() {
        let warp = Warp::WaveFlag {
            half_w: 0.4,
            half_h: 0.25,
            amp: 0.08,
            k: 10.0,
            omega: 3.0,
            drift: [0.0; 3],
        };
        let asset = gen_asset(warp, 8, 0).unwrap();
        let att = SurfaceAttachment {
            face: 0,
            weights: [0.2, 0.3, 0.5],
        };
        let base = asset.base_mesh.bary_point(0, att.weights);
        for t in 1..=8usize {
            let tau = (t - 1) as f64 / 7.0;
            let out = apply_warp(&asset, t, &[att]).unwrap()[0];
            let expect = 0.08 * tau * (10.0 * base.x - 3.0 * tau).sin();
            assert!((out.z - (base.z + expect)).abs() < 1e-12);
        }
    }

    #[test]
    fn split_spheres_changes_topology() {
        let asset = gen_asset(Warp::default_for(WarpFamily::SplitSpheres), 8, 0).unwrap();
        assert_eq!(asset.frame(1).connected_components(), 1);
        assert_eq!(asset.frame(8).connected_components(), 2);
        for t in 1..=8 {
            assert!(asset.watertight_frame(t).is_watertight());
        }
    }

    #[test]
    fn out_of_range_frame_errors() {
        let asset = gen_asset(Warp::default_for(WarpFamily::PulseSphere), 4, 0).unwrap();
        let att = SurfaceAttachment {
            face: 0,
            weights: [1.0, 0.0, 0.0],
        };
        assert!(apply_warp(&asset, 0, &[att]).is_err());
        assert!(apply_warp(&asset, 5, &[att]).is_err());
        let bad = SurfaceAttachment {
            face: 1_000_000,
            weights: [1.0, 0.0, 0.0],
        };
        assert!(apply_warp(&asset, 1, &[bad]).is_err());
    }

    #[test]
    fn analytic_warp_matches_frames_exactly() {
        for family in [
            WarpFamily::BendCylinder,
            WarpFamily::PulseSphere,
            WarpFamily::WaveFlag,
            WarpFamily::TwistBox,
        ] {
            let asset = gen_asset(Warp::default_for(family), 6, 0).unwrap();
            for t in 1..=6usize {
                for (v, b) in asset
                    .frame(t)
                    .vertices
                    .iter()
                    .zip(&asset.base_mesh.vertices)
                {
                    let w = asset.warp_point(*b, t);
                    assert_eq!(*v, w, "{family} frame {t}");
                }
            }
        }
    }
}
