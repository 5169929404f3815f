//! Image and text encoders producing unit-norm embeddings.

mod embedding;
mod reference;
mod remote;

use std::sync::Arc;

use image::RgbImage;
use serde::{Deserialize, Serialize};

pub use embedding::{Embedding, Modality, UNIT_NORM_TOLERANCE};
pub use reference::{ReferenceImageEncoder, ReferenceTextEncoder, DEFAULT_DIM, DEFAULT_GRID};
pub use remote::{
    encode_png, EmbedInput, EmbedRequest, EmbedResponse, EmbeddedItem, RemoteConfig,
    RemoteEncoder, RemoteItem, WireModality,
};

#[cfg(test)]
pub(crate) use remote::stub;
use crate::error::{Error, Result};

pub trait ImageEncoder: Send + Sync {
    fn model_id(&self) -> &str;
    /// Output dimension; 0 when not yet known (remote encoders before their first call).
    fn dim(&self) -> usize;
    fn embed_images(&self, images: &[&RgbImage]) -> Result<Vec<Embedding>>;

    fn embed_image(&self, image: &RgbImage) -> Result<Embedding> {
        let mut out = self.embed_images(&[image])?;
        out.pop()
            .ok_or_else(|| Error::Protocol("encoder returned no embedding".into()))
    }
}

pub trait TextEncoder: Send + Sync {
    fn model_id(&self) -> &str;
    fn dim(&self) -> usize;
    fn embed_texts(&self, texts: &[&str]) -> Result<Vec<Embedding>>;

    fn embed_text(&self, text: &str) -> Result<Embedding> {
        let mut out = self.embed_texts(&[text])?;
        out.pop()
            .ok_or_else(|| Error::Protocol("encoder returned no embedding".into()))
    }
}

/// Declarative encoder description, as it appears in experiment configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EncoderHandle {
    ReferenceImage {
        model_id: String,
        #[serde(default = "default_dim")]
        dim: usize,
        #[serde(default = "default_grid")]
        grid: usize,
        seed: u64,
    },
    ReferenceText {
        model_id: String,
        #[serde(default = "default_dim")]
        dim: usize,
        seed: u64,
    },
    Remote(RemoteConfig),
}

fn default_dim() -> usize {
    DEFAULT_DIM
}

fn default_grid() -> usize {
    DEFAULT_GRID
}

impl EncoderHandle {
    pub fn reference_image(seed: u64) -> Self {
        EncoderHandle::ReferenceImage {
            model_id: "ref-image-v1".into(),
            dim: DEFAULT_DIM,
            grid: DEFAULT_GRID,
            seed,
        }
    }

    pub fn reference_text(seed: u64) -> Self {
        EncoderHandle::ReferenceText {
            model_id: "ref-text-v1".into(),
            dim: DEFAULT_DIM,
            seed,
        }
    }

    pub fn model_id(&self) -> &str {
        match self {
            EncoderHandle::ReferenceImage { model_id, .. }
            | EncoderHandle::ReferenceText { model_id, .. } => model_id,
            EncoderHandle::Remote(cfg) => &cfg.model_id,
        }
    }

    pub fn build_image_encoder(&self) -> Result<Arc<dyn ImageEncoder>> {
        match self {
            EncoderHandle::ReferenceImage {
                model_id,
                dim,
                grid,
                seed,
            } => Ok(Arc::new(ReferenceImageEncoder::new(
                model_id.clone(),
                *dim,
                *grid,
                *seed,
            )?)),
            EncoderHandle::Remote(cfg) => Ok(Arc::new(RemoteEncoder::new(cfg.clone())?)),
            EncoderHandle::ReferenceText { .. } => Err(Error::config(
                "a reference_text encoder cannot embed images",
            )),
        }
    }

    pub fn build_text_encoder(&self) -> Result<Arc<dyn TextEncoder>> {
        match self {
            EncoderHandle::ReferenceText {
                model_id,
                dim,
                seed,
            } => Ok(Arc::new(ReferenceTextEncoder::new(
                model_id.clone(),
                *dim,
                *seed,
            )?)),
            EncoderHandle::Remote(cfg) => Ok(Arc::new(RemoteEncoder::new(cfg.clone())?)),
            EncoderHandle::ReferenceImage { .. } => Err(Error::config(
                "a reference_image encoder cannot embed text",
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn handle_serde_roundtrip() {
        let h = EncoderHandle::reference_image(7);
        let json = serde_json::to_string(&h).unwrap();
        assert!(json.contains("\"kind\":\"reference_image\""));
        assert_eq!(serde_json::from_str::<EncoderHandle>(&json).unwrap(), h);

        let remote: EncoderHandle = serde_json::from_str(
            r#"{"kind":"remote","model_id":"clip-l14","endpoint":"http://localhost:1"}"#,
        )
        .unwrap();
        match remote {
            EncoderHandle::Remote(cfg) => {
                assert_eq!(cfg.max_batch, 32);
                assert_eq!(cfg.retries, 3);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn wrong_modality_rejected() {
        assert!(EncoderHandle::reference_text(1).build_image_encoder().is_err());
        assert!(EncoderHandle::reference_image(1).build_text_encoder().is_err());
    }
}
