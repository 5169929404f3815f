use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;

use image::RgbImage;
use serde::{Deserialize, Serialize};

/// Where a listing's image comes from.
#[derive(Debug, Clone)]
pub enum ImageRef {
    Path(PathBuf),
    Memory(Arc<RgbImage>),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RawText {
    pub description: Option<String>,
    pub attributes: Option<BTreeMap<String, String>>,
}

/// A product or a query: an image plus its (possibly summarized) title.
#[derive(Debug, Clone)]
pub struct Listing {
    pub id: u64,
    pub image: ImageRef,
    pub title: String,
    pub raw_text: Option<RawText>,
}

impl Listing {
    pub fn in_memory(id: u64, image: RgbImage, title: impl Into<String>) -> Self {
        Self {
            id,
            image: ImageRef::Memory(Arc::new(image)),
            title: title.into(),
            raw_text: None,
        }
    }
}

/// A query listing with its single ground-truth product.
#[derive(Debug, Clone)]
pub struct Query {
    pub listing: Listing,
    pub truth_id: u64,
}
