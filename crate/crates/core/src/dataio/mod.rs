//! File formats, manifests, and synthetic suite generation.

mod bank;
mod binary;
mod manifest;
pub mod synthetic;

pub use bank::{load_bank, save_bank, BANK_INDEX};
pub use binary::{
    decode_block, decode_dataset, decode_matrix, encode_dataset, encode_matrix, load_dataset, load_matrix,
    save_dataset, save_matrix, Block, Dtype, DATASET_MAGIC, MATRIX_MAGIC,
};
pub use manifest::{load_manifest, save_manifest, Manifest, ModeKind, Seeds, MANIFEST_FORMAT};
pub use synthetic::{generate_synthetic, SuiteConfig, SyntheticGenConfig, SyntheticSuite};
