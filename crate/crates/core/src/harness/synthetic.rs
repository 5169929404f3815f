//! Seeded shape-image corpus where raw pixels cannot tell same-class
//! products apart but titles can.

use std::fs;
use std::path::Path;

use image::{Rgb, RgbImage};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::listing::{ImageRef, Listing, Query};
use crate::ingest::{write_manifest, ManifestRecord};

pub const QUERY_ID_BASE: u64 = 1_000_001;

const BRANDS: [&str; 12] = [
    "Nike", "Adidas", "Puma", "Reebok", "Asics", "Vans", "Converse", "Saucony", "Hoka", "Brooks",
    "Gucci", "Prada",
];
const MODELS: [&str; 14] = [
    "Dunk", "Samba", "Suede", "Classic", "Gel", "Sk8", "Chuck", "Jazz", "Clifton", "Ghost",
    "Ace", "Cloud", "Forum", "Cortez",
];
const VARIANTS: [&str; 14] = [
    "Low", "High", "Mid", "Retro", "OG", "Pro", "Lite", "Plus", "Max", "Zero", "Prime", "Elite",
    "Tech", "Slip",
];

/// The shape classes, in class-index order.
pub const SHAPES: [&str; 10] = [
    "disc", "square", "triangle", "diamond", "hbar", "vbar", "ring", "cross", "ellipse", "frame",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticCorpusSpec {
    pub n_queries: usize,
    pub n_products: usize,
    pub width: u32,
    pub height: u32,
    /// Number of shape classes drawn from [`SHAPES`].
    pub n_classes: usize,
    /// Fill colors, picked at random per image regardless of class. The
    /// defaults share one luma, so they differ only in hue.
    pub palette: Vec<[u8; 3]>,
    /// Shape radius as a fraction of half the shorter side, drawn per image.
    pub scale_range: [f64; 2],
    /// Maximum center offset as a fraction of half the shorter side.
    pub position_jitter: f64,
    pub brands: Vec<String>,
    pub models: Vec<String>,
    pub variants: Vec<String>,
    pub seed: u64,
}

impl Default for SyntheticCorpusSpec {
    fn default() -> Self {
        Self {
            n_queries: 200,
            n_products: 2000,
            width: 128,
            height: 128,
            n_classes: 10,
            palette: vec![
                [248, 211, 229],
                [210, 229, 235],
                [239, 221, 200],
                [213, 225, 249],
                [232, 216, 244],
                [208, 233, 220],
            ],
            scale_range: [0.6, 0.66],
            position_jitter: 0.02,
            brands: BRANDS.iter().map(|s| s.to_string()).collect(),
            models: MODELS.iter().map(|s| s.to_string()).collect(),
            variants: VARIANTS.iter().map(|s| s.to_string()).collect(),
            seed: 7,
        }
    }
}

impl SyntheticCorpusSpec {
    pub fn sized(n_queries: usize, n_products: usize, seed: u64) -> Self {
        Self {
            n_queries,
            n_products,
            seed,
            ..Self::default()
        }
    }

    pub fn title_capacity(&self) -> usize {
        self.brands.len() * self.models.len() * self.variants.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_queries == 0 {
            return Err(Error::config("n_queries must be >= 1"));
        }
        if self.n_products < self.n_queries {
            return Err(Error::config(format!(
                "n_products ({}) must be >= n_queries ({})",
                self.n_products, self.n_queries
            )));
        }
        if self.width < 16 || self.height < 16 {
            return Err(Error::config("synthetic images must be at least 16x16"));
        }
        if self.n_classes == 0 || self.n_classes > SHAPES.len() {
            return Err(Error::config(format!(
                "n_classes must be in 1..={}",
                SHAPES.len()
            )));
        }
        let [lo, hi] = self.scale_range;
        if !(lo > 0.0 && lo <= hi && hi <= 1.0) {
            return Err(Error::config("scale_range must satisfy 0 < lo <= hi <= 1"));
        }
        if !(0.0..0.5).contains(&self.position_jitter) {
            return Err(Error::config("position_jitter must be in [0, 0.5)"));
        }
        if self.palette.is_empty() {
            return Err(Error::config("palette is empty"));
        }
        if self.title_capacity() < self.n_products {
            return Err(Error::config(format!(
                "title vocabulary yields {} distinct titles, {} products requested",
                self.title_capacity(),
                self.n_products
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub queries: Vec<Query>,
    pub products: Vec<Listing>,
    /// Shape class per product, aligned with `products`.
    pub product_classes: Vec<usize>,
    /// Shape class per query, aligned with `queries`.
    pub query_classes: Vec<usize>,
}

fn inside(class: usize, u: f64, v: f64) -> bool {
    let r2 = u * u + v * v;
    match class {
        0 => r2 <= 1.0,
        1 => u.abs() <= 0.85 && v.abs() <= 0.85,
        2 => v <= 0.8 && u.abs() <= (v + 0.9) / 1.7 * 0.95,
        3 => u.abs() + v.abs() <= 1.0,
        4 => u.abs() <= 1.0 && v.abs() <= 0.35,
        5 => u.abs() <= 0.35 && v.abs() <= 1.0,
        6 => (0.45..=1.0).contains(&r2),
        7 => (u.abs() <= 0.3 && v.abs() <= 1.0) || (v.abs() <= 0.3 && u.abs() <= 1.0),
        8 => u * u + (v / 0.5).powi(2) <= 1.0,
        _ => {
            let m = u.abs().max(v.abs());
            (0.65..=0.95).contains(&m)
        }
    }
}

fn draw_shape(spec: &SyntheticCorpusSpec, class: usize, rng: &mut ChaCha8Rng) -> RgbImage {
    let (w, h) = (spec.width, spec.height);
    let bg = 246 + rng.gen_range(0..=4u8);
    let fill = spec.palette[rng.gen_range(0..spec.palette.len())];
    let half = w.min(h) as f64 / 2.0;
    let [lo, hi] = spec.scale_range;
    let radius = half * rng.gen_range(lo..=hi);
    let j = spec.position_jitter;
    let cx = w as f64 / 2.0 + half * rng.gen_range(-j..=j);
    let cy = h as f64 / 2.0 + half * rng.gen_range(-j..=j);
    RgbImage::from_fn(w, h, |x, y| {
        let u = (x as f64 + 0.5 - cx) / radius;
        let v = (y as f64 + 0.5 - cy) / radius;
        if inside(class, u, v) {
            Rgb(fill)
        } else {
            Rgb([bg, bg, bg])
        }
    })
}

/// Generates queries and products. Each query shares its title with exactly
/// one product, its truth; the two images are independent draws of the same
/// shape class. Every other product has a distinct title.
pub fn generate_synthetic_corpus(spec: &SyntheticCorpusSpec) -> Result<SyntheticCorpus> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut titles: Vec<String> = Vec::with_capacity(spec.title_capacity());
    for b in &spec.brands {
        for m in &spec.models {
            for v in &spec.variants {
                titles.push(format!("{b} {m} {v}"));
            }
        }
    }
    titles.shuffle(&mut rng);
    titles.truncate(spec.n_products);

    let mut ids: Vec<u64> = (1..=spec.n_products as u64).collect();
    ids.shuffle(&mut rng);

    let mut products = Vec::with_capacity(spec.n_products);
    let mut product_classes = Vec::with_capacity(spec.n_products);
    for (i, (id, title)) in ids.iter().zip(&titles).enumerate() {
        let class = i % spec.n_classes;
        let img = draw_shape(spec, class, &mut rng);
        products.push(Listing::in_memory(*id, img, title.clone()));
        product_classes.push(class);
    }

    let mut truth_rows: Vec<usize> = (0..spec.n_products).collect();
    truth_rows.shuffle(&mut rng);
    truth_rows.truncate(spec.n_queries);

    let mut queries = Vec::with_capacity(spec.n_queries);
    let mut query_classes = Vec::with_capacity(spec.n_queries);
    for (q, &row) in truth_rows.iter().enumerate() {
        let class = product_classes[row];
        let img = draw_shape(spec, class, &mut rng);
        let truth = &products[row];
        queries.push(Query {
            listing: Listing::in_memory(QUERY_ID_BASE + q as u64, img, truth.title.clone()),
            truth_id: truth.id,
        });
        query_classes.push(class);
    }

    Ok(SyntheticCorpus {
        queries,
        products,
        product_classes,
        query_classes,
    })
}

impl SyntheticCorpus {
    /// Writes `images/*.png`, `products.jsonl` and `queries.jsonl` under `dir`.
    pub fn write_to_dir(&self, dir: &Path) -> Result<()> {
        let images = dir.join("images");
        fs::create_dir_all(&images)?;
        let save = |prefix: &str, listing: &Listing| -> Result<ManifestRecord> {
            let ImageRef::Memory(img) = &listing.image else {
                return Err(Error::invalid("synthetic listings are in memory"));
            };
            let rel = format!("images/{prefix}{}.png", listing.id);
            img.save(dir.join(&rel)).map_err(|source| Error::Decode {
                path: dir.join(&rel),
                source,
            })?;
            Ok(ManifestRecord {
                id: listing.id,
                image: rel,
                title: Some(listing.title.clone()),
                description: None,
                attributes: None,
                truth_id: None,
            })
        };
        let products = self
            .products
            .iter()
            .map(|p| save("p", p))
            .collect::<Result<Vec<_>>>()?;
        let queries = self
            .queries
            .iter()
            .map(|q| {
                let mut r = save("q", &q.listing)?;
                r.truth_id = Some(q.truth_id);
                Ok(r)
            })
            .collect::<Result<Vec<_>>>()?;
        write_manifest(dir.join("products.jsonl"), &products)?;
        write_manifest(dir.join("queries.jsonl"), &queries)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{load_manifest, load_query_manifest, TitleOptions};
    use std::collections::HashSet;

    #[test]
    fn minimal_pair_shares_title() {
        let c = generate_synthetic_corpus(&SyntheticCorpusSpec::sized(1, 1, 3)).unwrap();
        assert_eq!(c.queries[0].listing.title, c.products[0].title);
        assert_eq!(c.queries[0].truth_id, c.products[0].id);
    }

    #[test]
    fn titles_unique_and_truths_match() {
        let c = generate_synthetic_corpus(&SyntheticCorpusSpec::sized(50, 400, 1)).unwrap();
        let titles: HashSet<_> = c.products.iter().map(|p| &p.title).collect();
        assert_eq!(titles.len(), 400);
        for q in &c.queries {
            let matches: Vec<_> = c.products.iter().filter(|p| p.title == q.listing.title).collect();
            assert_eq!(matches.len(), 1);
            assert_eq!(matches[0].id, q.truth_id);
        }
        let ids: HashSet<_> = c.products.iter().map(|p| p.id).collect();
        assert_eq!(ids.len(), 400);
    }

    #[test]
    fn same_class_distractors() {
        let c = generate_synthetic_corpus(&SyntheticCorpusSpec::sized(200, 2000, 7)).unwrap();
        for (q, &class) in c.queries.iter().zip(&c.query_classes) {
            let distractors = c
                .products
                .iter()
                .zip(&c.product_classes)
                .filter(|(p, &pc)| pc == class && p.id != q.truth_id)
                .count();
            assert!(distractors >= 100, "query {} has {distractors}", q.listing.id);
        }
    }

    #[test]
    fn vocabulary_too_small() {
        let spec = SyntheticCorpusSpec {
            brands: vec!["A".into()],
            models: vec!["B".into()],
            variants: vec!["C".into(), "D".into()],
            ..SyntheticCorpusSpec::sized(2, 3, 0)
        };
        assert!(generate_synthetic_corpus(&spec).unwrap_err().is_config());
        assert!(generate_synthetic_corpus(&SyntheticCorpusSpec::sized(3, 2, 0)).is_err());
    }

    #[test]
    fn deterministic_on_disk() {
        let spec = SyntheticCorpusSpec::sized(5, 20, 11);
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        generate_synthetic_corpus(&spec).unwrap().write_to_dir(a.path()).unwrap();
        generate_synthetic_corpus(&spec).unwrap().write_to_dir(b.path()).unwrap();
        for name in ["products.jsonl", "queries.jsonl", "images/p1.png", "images/q1000001.png"] {
            assert_eq!(
                fs::read(a.path().join(name)).unwrap(),
                fs::read(b.path().join(name)).unwrap(),
                "{name}"
            );
        }
        let products = load_manifest(a.path().join("products.jsonl"), &TitleOptions::default()).unwrap();
        let queries = load_query_manifest(a.path().join("queries.jsonl"), &TitleOptions::default()).unwrap();
        assert_eq!((products.len(), queries.len()), (20, 5));
    }
}
