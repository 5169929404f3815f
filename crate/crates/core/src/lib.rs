//! Multimodal product retrieval with listing titles rendered onto images
//! before embedding.

pub mod encoders;
pub mod error;
pub mod fusion;
pub mod harness;
pub mod ingest;
pub mod knn;
pub mod rng;
pub mod typograph;

pub use encoders::{EncoderHandle, Embedding, Modality};
pub use error::{Error, Result};
pub use fusion::{cosine, fuse, FusionStrategy};
pub use harness::{ExperimentConfig, InferenceMode, Listing, MetricsReport, Query};
pub use knn::{KnnIndex, ResultList};
pub use typograph::{render_text, Location, RenderSpec, Rgb, Typeface};
