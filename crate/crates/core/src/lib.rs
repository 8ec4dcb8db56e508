//! Core library for video-conditioned 4D mesh generation.
//!
//! The pipeline encodes animated meshes into temporally-aligned latent sets,
//! trains a rectified-flow transformer with inserted spatiotemporal attention
//! over those latents, and post-processes sampled mesh sequences with
//! registration, topology-consistent conversion, and UV propagation.
//!
//! Modules map onto pipeline stages:
//!
//! - [`geom`]: meshes, point clouds, sampling, metrics, voxel grids, marching cubes
//! - [`data`]: procedural animated assets, normalization, silhouette rendering, file formats
//! - [`align`]: temporally-aligned query sampling and latent-consistency metrics
//! - [`nn`]: minimal f64 tensor autodiff used by the learned components
//! - [`vae`]: point-cloud-to-latent-set shape VAE with a TSDF decoder
//! - [`dit`]: rectified-flow diffusion transformer with spatiotemporal layers
//! - [`registration`]: pose search, ICP, ARAP, topology-consistent conversion
//! - [`eval`]: end-to-end geometric evaluation and ablation reporting

pub mod align;
pub mod blob;
pub mod data;
pub mod dit;
pub mod error;
pub mod eval;
pub mod geom;
pub mod nn;
pub mod par;
pub mod registration;
pub mod rng;
pub mod sparse;
pub mod vae;

pub use error::{Error, Result};
