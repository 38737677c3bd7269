//! On-disk formats: IDX image/label ingestion, the LMDS masked-dataset
//! container, the LMCP completion container, and LMRB model checkpoints.
//!
//! All container formats are little-endian with a 4-byte ASCII magic and a
//! u32 version field; IDX keeps its conventional big-endian layout.

pub mod checkpoint;
pub mod container;
pub mod idx;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use container::{
    read_completions, read_masked_dataset, write_completions, write_masked_dataset, CompletionSet,
};
pub use idx::{binarize_images, load_idx_images, load_idx_labels};
