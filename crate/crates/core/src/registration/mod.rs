//! Post-generation alignment: global pose registration, camera-pose search
//! (grid + PSO + mask refinement), rigid + ARAP topology-consistent
//! conversion, and UV texture propagation.

pub mod align;
pub mod arap;
pub mod camera;
pub mod similarity;
pub mod topo;

pub use crate::data::camera::CameraPose6;
pub use align::{
    default_scale_grid, grid_search_pose, icp, icp_from, register_sequence, AZIMUTH_STEPS,
    REG_TRUNCATION,
};
pub use arap::{arap_register, ArapParams, ArapResult};
pub use camera::{candidate_cameras, mask_refine, pso_camera, CameraSearchSpace, PsoConfig};
pub use similarity::{umeyama, Similarity3, SimilarityRecord};
pub use topo::{
    propagate_uv, rigid_register_pair, topology_consistent_sequence, ConsistentSequence,
    TexturedSequence,
};
