//! Seeded fixtures shared by the benchmarks.

use glyphsearch_core::knn::KnnIndex;
use glyphsearch_core::rng::{mix64, SplitMix64};
use glyphsearch_core::{Embedding, Modality};
use image::{Rgb, RgbImage};

pub const TITLE: &str = "Nike Dunk Low Retro White Black Panda Mens Size 10";

/// Deterministic noise, so the encoders cannot shortcut flat regions.
pub fn noise_image(width: u32, height: u32, seed: u64) -> RgbImage {
    RgbImage::from_fn(width, height, |x, y| {
        let v = mix64(seed ^ (u64::from(x) << 32 | u64::from(y)));
        Rgb([v as u8, (v >> 8) as u8, (v >> 16) as u8])
    })
}

pub fn unit_vectors(n: usize, dim: usize, seed: u64) -> Vec<Embedding> {
    let mut rng = SplitMix64::new(seed);
    (0..n)
        .map(|_| {
            let raw: Vec<f64> = (0..dim).map(|_| rng.next_signed_unit()).collect();
            Embedding::normalized(&raw, Modality::Image, "bench").expect("non-zero")
        })
        .collect()
}

pub fn random_index(n: usize, dim: usize, seed: u64) -> KnnIndex {
    let entries = (0..n as u64).zip(unit_vectors(n, dim, seed)).collect();
    KnnIndex::build(entries).expect("valid entries")
}
