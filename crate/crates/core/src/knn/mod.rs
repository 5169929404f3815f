//! Exact top-k cosine retrieval and its on-disk store.

mod index;
mod store;

pub use index::{Hit, KnnIndex, Parallelism, ResultList, INDEX_NORM_TOLERANCE};
pub use store::{decode_index, encode_index, load_index, save_index, MAGIC, VERSION};
