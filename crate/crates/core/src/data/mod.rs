//! Procedural synthetic 4D dataset: animated assets with analytically known
//! warps, sequence normalization, silhouette rendering for conditioning, and
//! the on-disk sequence format.

pub mod asset;
pub mod camera;
pub mod io;
pub mod normalize;
pub mod silhouette;

pub use asset::{apply_warp, gen_asset, AnimatedAsset, Warp, WarpFamily};
pub use camera::CameraPose6;
pub use io::{read_sequence, write_sequence, Manifest};
pub use normalize::normalize_sequence;
pub use silhouette::{render_silhouette, SilhouetteImage};
