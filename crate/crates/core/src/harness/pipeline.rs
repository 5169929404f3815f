//! Turning listings into embeddings under an inference mode, with caching.

use std::borrow::Cow;
use std::collections::{HashMap, HashSet};
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use image::RgbImage;
use rayon::prelude::*;

use crate::encoders::{EncoderHandle, Embedding, ImageEncoder, Modality, TextEncoder};
use crate::error::{Error, Result};
use crate::fusion::fuse;
use crate::harness::config::InferenceMode;
use crate::harness::listing::{ImageRef, Listing};
use crate::ingest::{composite_key, decode_image, image_content_hash, sha256_hex, ContentStore};
use crate::typograph::{render_text, RenderSpec, Typeface};

/// Items per encoder call.
const ENCODE_BATCH: usize = 32;

pub struct Encoders {
    pub image: Arc<dyn ImageEncoder>,
    pub text: Arc<dyn TextEncoder>,
}

impl Encoders {
    pub fn from_handles(image: &EncoderHandle, text: &EncoderHandle) -> Result<Self> {
        Ok(Self {
            image: image.build_image_encoder()?,
            text: text.build_text_encoder()?,
        })
    }
}

/// Embedding cache keyed by (content hash, render key, model id), held in
/// memory and optionally mirrored to a [`ContentStore`].
#[derive(Default)]
pub struct EmbeddingCache {
    memory: Mutex<HashMap<String, Arc<Vec<f32>>>>,
    disk: Option<ContentStore>,
    inserted: AtomicUsize,
}

impl EmbeddingCache {
    pub fn with_disk(store: ContentStore) -> Self {
        Self {
            memory: Mutex::default(),
            disk: Some(store),
            inserted: AtomicUsize::new(0),
        }
    }

    pub fn get(&self, key: &str) -> Result<Option<Arc<Vec<f32>>>> {
        if let Some(v) = self.memory.lock().unwrap_or_else(|e| e.into_inner()).get(key) {
            return Ok(Some(v.clone()));
        }
        let Some(disk) = &self.disk else {
            return Ok(None);
        };
        let Some(bytes) = disk.get(key)? else {
            return Ok(None);
        };
        if bytes.len() % 4 != 0 || bytes.is_empty() {
            log::warn!("ignoring corrupt cache entry {key}");
            return Ok(None);
        }
        let v: Arc<Vec<f32>> = Arc::new(
            bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        );
        self.memory
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .insert(key.to_string(), v.clone());
        Ok(Some(v))
    }

    pub fn insert(&self, key: &str, vector: Vec<f32>) -> Result<()> {
        if let Some(disk) = &self.disk {
            let bytes: Vec<u8> = vector.iter().flat_map(|v| v.to_le_bytes()).collect();
            disk.put(key, &bytes)?;
        }
        self.memory
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .insert(key.to_string(), Arc::new(vector));
        self.inserted.fetch_add(1, Ordering::Relaxed);
        Ok(())
    }

    /// Embeddings computed (not served from cache) since creation.
    pub fn computed(&self) -> usize {
        self.inserted.load(Ordering::Relaxed)
    }

    pub fn len(&self) -> usize {
        self.memory.lock().unwrap_or_else(|e| e.into_inner()).len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Shared state for embedding and evaluation runs: the embedding cache,
/// loaded fonts and memoized file hashes.
#[derive(Default)]
pub struct Harness {
    cache: EmbeddingCache,
    faces: Mutex<HashMap<String, Typeface>>,
    file_hashes: Mutex<HashMap<PathBuf, String>>,
}

impl Harness {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_cache(cache: EmbeddingCache) -> Self {
        Self {
            cache,
            ..Self::default()
        }
    }

    pub fn cache(&self) -> &EmbeddingCache {
        &self.cache
    }

    pub fn typeface(&self, asset: &str) -> Result<Typeface> {
        let mut faces = self.faces.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(f) = faces.get(asset) {
            return Ok(f.clone());
        }
        let face = Typeface::load(asset)?;
        faces.insert(asset.to_string(), face.clone());
        Ok(face)
    }

    fn content_hash(&self, image: &ImageRef) -> Result<String> {
        match image {
            ImageRef::Memory(img) => Ok(image_content_hash(img)),
            ImageRef::Path(path) => {
                if let Some(h) = self
                    .file_hashes
                    .lock()
                    .unwrap_or_else(|e| e.into_inner())
                    .get(path)
                {
                    return Ok(h.clone());
                }
                let h = sha256_hex(&std::fs::read(path)?);
                self.file_hashes
                    .lock()
                    .unwrap_or_else(|e| e.into_inner())
                    .insert(path.clone(), h.clone());
                Ok(h)
            }
        }
    }

    fn load<'a>(&self, image: &'a ImageRef) -> Result<Cow<'a, RgbImage>> {
        match image {
            ImageRef::Memory(img) => Ok(Cow::Borrowed(img.as_ref())),
            ImageRef::Path(path) => Ok(Cow::Owned(decode_image(&std::fs::read(path)?, path)?)),
        }
    }

    fn image_key(
        &self,
        listing: &Listing,
        render: Option<&RenderSpec>,
        model_id: &str,
    ) -> Result<String> {
        let content = self.content_hash(&listing.image)?;
        Ok(match render {
            None => composite_key(&["image", model_id, &content, "raw"]),
            Some(spec) => {
                let spec_json = serde_json::to_string(spec)?;
                composite_key(&["image", model_id, &content, &spec_json, &listing.title])
            }
        })
    }

    /// The image fed to the image encoder: the source image, or a rendered
    /// copy of it. The source is never modified.
    fn encoder_input<'a>(
        &self,
        listing: &'a Listing,
        render: Option<&RenderSpec>,
    ) -> Result<Cow<'a, RgbImage>> {
        let source = self.load(&listing.image)?;
        match render {
            None => Ok(source),
            Some(spec) => {
                let face = self.typeface(&spec.font_asset)?;
                Ok(Cow::Owned(render_text(&source, &listing.title, spec, &face)?.image))
            }
        }
    }

    fn image_embeddings(
        &self,
        listings: &[&Listing],
        render: Option<&RenderSpec>,
        encoder: &dyn ImageEncoder,
    ) -> Result<Vec<Embedding>> {
        let model_id = encoder.model_id().to_string();
        let keys: Vec<String> = listings
            .par_iter()
            .map(|l| {
                self.image_key(l, render, &model_id)
                    .map_err(|e| e.for_listing(l.id))
            })
            .collect::<Result<_>>()?;
        let mut queued = HashSet::new();
        let mut missing: Vec<(&str, &Listing)> = Vec::new();
        for (key, listing) in keys.iter().zip(listings) {
            if self.cache.get(key)?.is_none() && queued.insert(key.as_str()) {
                missing.push((key, listing));
            }
        }
        missing
            .par_chunks(ENCODE_BATCH)
            .map(|chunk| -> Result<()> {
                let inputs: Vec<Cow<'_, RgbImage>> = chunk
                    .iter()
                    .map(|(_, l)| self.encoder_input(l, render).map_err(|e| e.for_listing(l.id)))
                    .collect::<Result<_>>()?;
                let refs: Vec<&RgbImage> = inputs.iter().map(|c| c.as_ref()).collect();
                let out = encoder
                    .embed_images(&refs)
                    .map_err(|e| e.for_listing(chunk[0].1.id))?;
                for ((key, _), emb) in chunk.iter().zip(out) {
                    self.cache.insert(key, emb.vector)?;
                }
                Ok(())
            })
            .collect::<Result<()>>()?;
        keys.iter()
            .map(|k| {
                let v = self.cache.get(k)?.expect("populated above");
                Ok(Embedding::new(v.as_ref().clone(), Modality::Image, model_id.clone()))
            })
            .collect()
    }

    fn text_embeddings(
        &self,
        listings: &[&Listing],
        encoder: &dyn TextEncoder,
    ) -> Result<Vec<Embedding>> {
        let model_id = encoder.model_id().to_string();
        let keys: Vec<String> = listings
            .iter()
            .map(|l| composite_key(&["text", &model_id, &l.title]))
            .collect();
        let mut queued = HashSet::new();
        let mut missing: Vec<(&str, &Listing)> = Vec::new();
        for (key, listing) in keys.iter().zip(listings) {
            if self.cache.get(key)?.is_none() && queued.insert(key.as_str()) {
                missing.push((key, listing));
            }
        }
        missing
            .par_chunks(ENCODE_BATCH)
            .map(|chunk| -> Result<()> {
                let texts: Vec<&str> = chunk.iter().map(|(_, l)| l.title.as_str()).collect();
                let out = encoder
                    .embed_texts(&texts)
                    .map_err(|e| e.for_listing(chunk[0].1.id))?;
                for ((key, _), emb) in chunk.iter().zip(out) {
                    self.cache.insert(key, emb.vector)?;
                }
                Ok(())
            })
            .collect::<Result<()>>()?;
        keys.iter()
            .map(|k| {
                let v = self.cache.get(k)?.expect("populated above");
                Ok(Embedding::new(v.as_ref().clone(), Modality::Text, model_id.clone()))
            })
            .collect()
    }

    /// Embeds listings under `mode`; output order follows input order.
    pub fn embed_listings(
        &self,
        listings: &[&Listing],
        mode: InferenceMode,
        render_spec: Option<&RenderSpec>,
        encoders: &Encoders,
    ) -> Result<Vec<Embedding>> {
        let render = if mode.rendered() {
            let spec = render_spec.ok_or_else(|| {
                Error::config(format!("mode {mode} requires a render spec"))
            })?;
            spec.validate()?;
            Some(spec)
        } else {
            None
        };
        let images = self.image_embeddings(listings, render, encoders.image.as_ref())?;
        let Some(strategy) = mode.fusion() else {
            return Ok(images);
        };
        let texts = self.text_embeddings(listings, encoders.text.as_ref())?;
        listings
            .par_iter()
            .zip(images.par_iter().zip(texts.par_iter()))
            .map(|(l, (img, txt))| fuse(img, txt, strategy).map_err(|e| e.for_listing(l.id)))
            .collect()
    }

    pub fn embed_listing(
        &self,
        listing: &Listing,
        mode: InferenceMode,
        render_spec: Option<&RenderSpec>,
        encoders: &Encoders,
    ) -> Result<Embedding> {
        let mut out = self.embed_listings(&[listing], mode, render_spec, encoders)?;
        Ok(out.pop().expect("one listing in, one embedding out"))
    }
}

/// Embeds one listing with a throwaway [`Harness`].
pub fn embed_listing(
    listing: &Listing,
    mode: InferenceMode,
    render_spec: Option<&RenderSpec>,
    encoders: &Encoders,
) -> Result<Embedding> {
    Harness::new().embed_listing(listing, mode, render_spec, encoders)
}
