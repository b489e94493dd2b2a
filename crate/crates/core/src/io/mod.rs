//! Dataset files, model checkpoints and run manifests.

pub mod checkpoint;
pub mod dataset;
pub mod manifest;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_VERSION};
pub use dataset::{load_dataset, write_dataset, ColumnOrder, IdMap, LoadOptions, LoadedDataset};
pub use manifest::{append_manifest, dataset_hash, json_hash, read_manifests, RunManifest};
