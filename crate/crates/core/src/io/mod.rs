//! On-disk formats: netpbm images, dataset manifests and checkpoints.

pub mod checkpoint;
pub mod manifest;
pub mod pnm;

pub use checkpoint::{Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use manifest::{load_dataset, Manifest, ManifestEntry};
pub use pnm::{load_api, load_frames, read_pnm, save_api, save_frames, save_gray, write_pnm, Pnm};
