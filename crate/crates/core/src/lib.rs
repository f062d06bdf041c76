//! Floor-aware Gaussian-splat scene toolkit.
//!
//! The crate covers the full desk-scale pipeline: scene and camera types,
//! a CPU splat rasterizer with equirectangular panorama assembly, a
//! spherical-harmonics background model with hand-derived gradients,
//! trajectory clustering into overlapping submaps, hybrid floor masking,
//! photometric losses, breadth-first topological map growth over rendered
//! views, occupancy-grid validation, and R2R-style navigation metrics.

pub mod background;
pub mod cluster;
pub mod config;
pub mod error;
pub mod image;
pub mod io;
pub mod losses;
pub mod mask;
pub mod math;
pub mod mlp;
pub mod nav;
pub mod occupancy;
pub mod providers;
pub mod render;
pub mod rng;
pub mod scene;
pub mod sh;
pub mod synth;
pub mod topomap;

pub use config::PipelineConfig;
pub use error::{Error, Result};
pub use image::{BinaryMask, Image, PixelCoord};
pub use math::{Mat2, Mat3, Vec2, Vec3};
pub use occupancy::{Cell, OccupancyGrid, ValidityReport};
pub use render::{Panorama, RenderOutput};
pub use scene::{CameraPose, Gaussian, Intrinsics, SceneBundle, SubmapModel, TrajectoryFrame};
pub use topomap::{TopoGraph, ViewpointNode};
