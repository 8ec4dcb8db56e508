//! Mesh and point-cloud primitives: sampling, distances, voxelization,
//! isosurface extraction, and the mesh/grid file formats.

pub mod cloud;
pub mod fps;
pub mod grid_io;
pub mod kdtree;
pub mod marching;
mod mc_tables;
pub mod mesh;
pub mod metrics;
pub mod obj;
pub mod sample;
pub mod trigrid;
pub mod voxel;

pub use cloud::PointCloud;
pub use fps::farthest_point_sample;
pub use kdtree::KdTree;
pub use marching::marching_cubes;
pub use mesh::TriMesh;
pub use metrics::{chamfer, fscore};
pub use sample::{salient_edge_sample, sample_surface};
pub use trigrid::TriGrid;
pub use voxel::{grid_iou, voxelize_occupancy, watertight_flood_fill, VoxelGrid};

pub type Vec3 = nalgebra::Vector3<f64>;
