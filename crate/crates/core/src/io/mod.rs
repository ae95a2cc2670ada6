//! Configuration, run manifests and on-disk formats.

pub mod config;
pub mod files;

pub use config::{load_config, parse_config, Mode, RunManifest};
pub use files::{read_checkpoint, read_snapshot, write_checkpoint, write_snapshot, Checkpoint};
