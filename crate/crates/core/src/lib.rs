//! Geometry and texture generation core for portrait-driven head avatars:
//! landmark-guided mesh fitting through an optimizable UV-space position
//! image, multi-resolution texture recovery via differentiable rasterization,
//! Poisson-based texture correction/completion, and embedding-based asset
//! matching. All learned components are file inputs; everything here is
//! deterministic numerical code.

pub mod assetmatch;
pub mod error;
pub mod fixture;
pub mod geomfit;
pub mod image;
pub mod math;
pub mod mesh;
pub mod optim;
pub mod pipeline;
pub mod raster;
pub mod texcomplete;
pub mod texfit;
pub mod triplane;

pub use error::{Error, Result};
pub use image::{Image, Mask};
pub use mesh::{CameraPose, HeadMesh, Intrinsics, LandmarkSet};
pub use triplane::TriplaneMap;
