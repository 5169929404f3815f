//! Deterministic stand-in encoders for hermetic runs.
//!
//! The image encoder pools luminance onto a coarse grid and projects it with a
//! seeded random matrix, so any text drawn onto an image moves its embedding,
//! and the same title drawn onto two images pulls them together. The text
//! encoder is a hashed bag of character trigrams.

use image::RgbImage;

use crate::encoders::embedding::{Embedding, Modality};
use crate::encoders::{ImageEncoder, TextEncoder};
use crate::error::{Error, Result};
use crate::rng::{seeded_hash, SplitMix64};

pub const DEFAULT_GRID: usize = 16;
pub const DEFAULT_DIM: usize = 256;

#[derive(Debug, Clone)]
pub struct ReferenceImageEncoder {
    model_id: String,
    dim: usize,
    grid: usize,
    /// Row-major `(grid² + 1) x dim`; the last row multiplies the bias channel.
    projection: Vec<f64>,
}

impl ReferenceImageEncoder {
    pub fn new(model_id: impl Into<String>, dim: usize, grid: usize, seed: u64) -> Result<Self> {
        if dim == 0 || grid == 0 {
            return Err(Error::config(format!(
                "reference image encoder needs dim >= 1 and grid >= 1, got dim {dim}, grid {grid}"
            )));
        }
        let rows = grid * grid + 1;
        let mut rng = SplitMix64::new(seed);
        let projection = (0..rows * dim).map(|_| rng.next_signed_unit()).collect();
        Ok(Self {
            model_id: model_id.into(),
            dim,
            grid,
            projection,
        })
    }

    /// Mean luminance in [0, 1] per grid cell, row-major, followed by a 1.0 bias.
    pub fn pooled_features(&self, image: &RgbImage) -> Result<Vec<f64>> {
        let (w, h) = image.dimensions();
        if w == 0 || h == 0 {
            return Err(Error::invalid(format!("image is {w}x{h}")));
        }
        let g = self.grid;
        let mut features = Vec::with_capacity(g * g + 1);
        for gy in 0..g {
            let (y0, y1) = cell_span(gy, g, h as usize);
            for gx in 0..g {
                let (x0, x1) = cell_span(gx, g, w as usize);
                let mut sum = 0.0f64;
                for y in y0..y1 {
                    for x in x0..x1 {
                        let p = image.get_pixel(x as u32, y as u32).0;
                        let luma =
                            299 * u32::from(p[0]) + 587 * u32::from(p[1]) + 114 * u32::from(p[2]);
                        sum += f64::from(luma) / 255_000.0;
                    }
                }
                features.push(sum / ((y1 - y0) * (x1 - x0)) as f64);
            }
        }
        features.push(1.0);
        Ok(features)
    }

    pub fn embed(&self, image: &RgbImage) -> Result<Embedding> {
        let features = self.pooled_features(image)?;
        let mut out = vec![0.0f64; self.dim];
        for (row, &f) in self.projection.chunks_exact(self.dim).zip(&features) {
            for (acc, &m) in out.iter_mut().zip(row) {
                *acc += f * m;
            }
        }
        Embedding::normalized(&out, Modality::Image, self.model_id.clone())
    }
}

/// Pixel range `[start, end)` covered by grid cell `i` of `g` along an axis of
/// length `len`. Never empty; cells repeat pixels when `len < g`.
fn cell_span(i: usize, g: usize, len: usize) -> (usize, usize) {
    let start = (i * len / g).min(len - 1);
    let end = ((i + 1) * len / g).max(start + 1);
    (start, end)
}

impl ImageEncoder for ReferenceImageEncoder {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_images(&self, images: &[&RgbImage]) -> Result<Vec<Embedding>> {
        images.iter().map(|img| self.embed(img)).collect()
    }
}

#[derive(Debug, Clone)]
pub struct ReferenceTextEncoder {
    model_id: String,
    dim: usize,
    seed: u64,
}

impl ReferenceTextEncoder {
    pub fn new(model_id: impl Into<String>, dim: usize, seed: u64) -> Result<Self> {
        if dim < 2 {
            return Err(Error::config(format!(
                "reference text encoder needs dim >= 2 (one bucket is reserved), got {dim}"
            )));
        }
        Ok(Self {
            model_id: model_id.into(),
            dim,
            seed,
        })
    }

    /// Raw trigram bucket counts before normalization. Trigrams hash into the
    /// first `dim - 1` buckets; the last bucket is reserved for empty text.
    pub fn bucket_counts(&self, text: &str) -> Vec<f64> {
        let mut counts = vec![0.0f64; self.dim];
        let lower = text.to_lowercase();
        if lower.is_empty() {
            counts[self.dim - 1] = 1.0;
            return counts;
        }
        let padded: Vec<char> = std::iter::once('^')
            .chain(lower.chars())
            .chain(std::iter::once('$'))
            .collect();
        let buckets = (self.dim - 1) as u64;
        let mut buf = [0u8; 12];
        for tri in padded.windows(3) {
            let mut len = 0;
            for c in tri {
                len += c.encode_utf8(&mut buf[len..]).len();
            }
            counts[(seeded_hash(self.seed, &buf[..len]) % buckets) as usize] += 1.0;
        }
        counts
    }

    pub fn bucket_of(&self, trigram: &str) -> usize {
        (seeded_hash(self.seed, trigram.as_bytes()) % (self.dim - 1) as u64) as usize
    }

    pub fn embed(&self, text: &str) -> Result<Embedding> {
        Embedding::normalized(&self.bucket_counts(text), Modality::Text, self.model_id.clone())
    }
}

impl TextEncoder for ReferenceTextEncoder {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_texts(&self, texts: &[&str]) -> Result<Vec<Embedding>> {
        texts.iter().map(|t| self.embed(t)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoders::UNIT_NORM_TOLERANCE;
    use crate::fusion::cosine;
    use image::Rgb;

    fn image_encoder() -> ReferenceImageEncoder {
        ReferenceImageEncoder::new("ref-image", DEFAULT_DIM, DEFAULT_GRID, 42).unwrap()
    }

    fn text_encoder() -> ReferenceTextEncoder {
        ReferenceTextEncoder::new("ref-text", DEFAULT_DIM, 42).unwrap()
    }

    #[test]
    fn image_embedding_is_deterministic() {
        let img = RgbImage::from_fn(50, 30, |x, y| Rgb([(x * 5) as u8, (y * 7) as u8, 3]));
        let a = image_encoder().embed(&img).unwrap();
        let b = image_encoder().embed(&img).unwrap();
        assert_eq!(a, b);
        assert!(a.is_unit(UNIT_NORM_TOLERANCE));
        assert_eq!(a.dim(), DEFAULT_DIM);
    }

    #[test]
    fn black_image_is_bias_row() {
        let enc = image_encoder();
        let img = RgbImage::new(224, 224);
        let e = enc.embed(&img).unwrap();
        let bias_row = &enc.projection[DEFAULT_GRID * DEFAULT_GRID * DEFAULT_DIM..];
        let expected = Embedding::normalized(bias_row, Modality::Image, "ref-image").unwrap();
        assert_eq!(e.vector, expected.vector);
        assert!(e.is_unit(UNIT_NORM_TOLERANCE));
    }

    #[test]
    fn one_pixel_change_barely_moves_embedding() {
        let enc = image_encoder();
        let a = RgbImage::from_pixel(224, 224, Rgb([128, 128, 128]));
        let mut b = a.clone();
        b.put_pixel(100, 100, Rgb([255, 255, 255]));

        // Bound from the pooled features: the raw projected vectors differ by
        // P^T d where d has one non-zero entry, so
        // cos >= 1 - |P^T d|^2 / (2 |P^T f_a| |P^T f_b|) up to the triangle slack.
        let fa = enc.pooled_features(&a).unwrap();
        let fb = enc.pooled_features(&b).unwrap();
        let changed: Vec<usize> = (0..fa.len()).filter(|&i| fa[i] != fb[i]).collect();
        assert_eq!(changed.len(), 1);
        let delta = fb[changed[0]] - fa[changed[0]];
        let project = |f: &[f64]| -> Vec<f64> {
            let mut out = vec![0.0; DEFAULT_DIM];
            for (row, &v) in enc.projection.chunks_exact(DEFAULT_DIM).zip(f) {
                for (o, m) in out.iter_mut().zip(row) {
                    *o += v * m;
                }
            }
            out
        };
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let pa = norm(&project(&fa));
        let row = &enc.projection[changed[0] * DEFAULT_DIM..(changed[0] + 1) * DEFAULT_DIM];
        let shift = delta.abs() * norm(row);
        let bound = 1.0 - 0.5 * (shift / (pa - shift)).powi(2);
        assert!(bound >= 0.999, "bound {bound}");

        let cos = cosine(&enc.embed(&a).unwrap(), &enc.embed(&b).unwrap()).unwrap();
        assert!(cos >= bound - 1e-6, "cos {cos} < bound {bound}");
        assert!(cos >= 0.999);
        assert!(cos < 1.0);
    }

    #[test]
    fn tiny_images_supported_empty_rejected() {
        let enc = image_encoder();
        let one = RgbImage::from_pixel(1, 1, Rgb([10, 20, 30]));
        assert!(enc.embed(&one).unwrap().is_unit(UNIT_NORM_TOLERANCE));
        assert!(enc.embed(&RgbImage::new(0, 5)).is_err());
    }

    #[test]
    fn cell_spans_partition_large_axes() {
        let mut covered = vec![0; 224];
        for i in 0..16 {
            let (a, b) = cell_span(i, 16, 224);
            assert_eq!(b - a, 14);
            covered[a..b].iter_mut().for_each(|c| *c += 1);
        }
        assert!(covered.iter().all(|&c| c == 1));
        assert_eq!(cell_span(15, 16, 3), (2, 3));
    }

    #[test]
    fn trigram_counts_for_aaaa() {
        let enc = text_encoder();
        let counts = enc.bucket_counts("aaaa");
        assert_eq!(counts.iter().sum::<f64>(), 4.0);
        assert!(counts[enc.bucket_of("aaa")] >= 2.0);
        let e = enc.embed("aaaa").unwrap();
        assert!(e.is_unit(UNIT_NORM_TOLERANCE));
    }

    #[test]
    fn case_insensitive_and_deterministic() {
        let enc = text_encoder();
        assert_eq!(enc.embed("Nike Dunk").unwrap(), enc.embed("nike dunk").unwrap());
    }

    #[test]
    fn empty_text_uses_reserved_bucket() {
        let enc = text_encoder();
        let e = enc.embed("").unwrap();
        assert_eq!(e.vector[DEFAULT_DIM - 1], 1.0);
        assert_eq!(e.vector.iter().filter(|&&v| v != 0.0).count(), 1);
        for tri in ["^ab", "abc", "bc$", "^x$"] {
            assert!(enc.bucket_of(tri) < DEFAULT_DIM - 1);
        }
    }

    #[test]
    fn shared_trigrams_raise_similarity() {
        // Oracle: cosine of exact trigram multisets, no hashing involved.
        fn trigram_cosine(a: &str, b: &str) -> f64 {
            use std::collections::HashMap;
            let grams = |s: &str| {
                let p: Vec<char> = format!("^{}$", s.to_lowercase()).chars().collect();
                let mut m: HashMap<String, f64> = HashMap::new();
                for w in p.windows(3) {
                    *m.entry(w.iter().collect()).or_default() += 1.0;
                }
                m
            };
            let (ga, gb) = (grams(a), grams(b));
            let dot: f64 = ga.iter().map(|(k, v)| v * gb.get(k).unwrap_or(&0.0)).sum();
            let n = |m: &HashMap<String, f64>| m.values().map(|v| v * v).sum::<f64>().sqrt();
            dot / (n(&ga) * n(&gb))
        }
        let near_oracle = trigram_cosine("nike dunk", "nike dunk low");
        let far_oracle = trigram_cosine("nike dunk", "gucci bag");
        assert!(near_oracle > far_oracle);

        let enc = text_encoder();
        let base = enc.embed("nike dunk").unwrap();
        let near = cosine(&base, &enc.embed("nike dunk low").unwrap()).unwrap();
        let far = cosine(&base, &enc.embed("gucci bag").unwrap()).unwrap();
        assert!(near > far, "near {near} far {far}");
        assert!((near - near_oracle).abs() < 0.1, "near {near} oracle {near_oracle}");
    }

    #[test]
    fn construction_validates_dims() {
        assert!(ReferenceImageEncoder::new("m", 0, 16, 1).is_err());
        assert!(ReferenceImageEncoder::new("m", 8, 0, 1).is_err());
        assert!(ReferenceTextEncoder::new("m", 1, 1).is_err());
    }
}
