//! Dataset manifests, image decoding, title derivation and caching.

mod cache;
mod manifest;
mod title;

pub use cache::{
    composite_key, decode_image, image_content_hash, load_image, sha256_hex, ContentStore,
};
pub use manifest::{
    load_manifest, load_query_manifest, write_manifest, ManifestRecord, TitleOptions,
};
pub use title::{
    derive_title, truncate_at_whitespace, Summarizer, SummaryRequest, SummaryResponse,
    DEFAULT_CHAR_BUDGET,
};
