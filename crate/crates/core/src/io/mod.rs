//! File formats: PNG / PFM rasters, PGM+YAML occupancy, the binary scene
//! container, and run manifests. Byte-level layout notes live in
//! `docs/formats.md`.

mod manifest;
mod pfm;
mod pgm;
mod pngio;
mod scene_file;

pub use manifest::{fnv1a64, hash_file, Manifest, ManifestInput};
pub use pfm::{decode_pfm, encode_pfm, read_pfm, write_pfm};
pub use pgm::{write_occupancy_pgm_yaml, write_pgm};
pub use pngio::{
    decode_mask_png, encode_image_png, encode_mask_png, read_image_png, write_image_png,
    write_mask_png,
};
pub use scene_file::{load_scene, load_scene_with_options, save_scene, SceneFilePayload};
