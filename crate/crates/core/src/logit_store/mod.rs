//! Compact on-disk store of top-K teacher probabilities and augmentation seeds.
//!
//! A store holds `E x N` fixed-size records laid out epoch-major behind a
//! 24-byte header. Each record costs `4K + 4` bytes: K binary16 probabilities,
//! K u16 class indices and the u32 seed that regenerates the teacher's input.
//! Classes outside the top K are read back as probability 0.

mod estimate;
mod file;
mod header;
mod record;
mod topk;

pub use estimate::{estimate_storage, StorageMode};
pub use file::{bitmap_path, StoreReader, StoreWriter};
pub(crate) use file::side_path;
pub use header::{record_size, StoreHeader, FORMAT_VERSION, HEADER_SIZE, MAGIC, MAX_CLASSES};
pub use record::{quantize_f16, LogitRecord, TopK};
pub use topk::{compress_topk, densify, densify_parts, DenseLogits};
