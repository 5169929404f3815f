use std::collections::HashSet;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::harness::config::ExperimentConfig;
use crate::harness::listing::{Listing, Query};
use crate::harness::metrics::{acc_at_k, AccuracyAtK, MetricsReport, QueryRank, WallClock};
use crate::harness::pipeline::{Encoders, Harness};
use crate::knn::KnnIndex;

fn ms_since(t: Instant) -> u64 {
    t.elapsed().as_millis() as u64
}

/// Every truth id must name a product; checked before any embedding work.
pub fn check_truth_ids(queries: &[Query], products: &[Listing]) -> Result<()> {
    if queries.is_empty() {
        return Err(Error::config("query set is empty"));
    }
    if products.is_empty() {
        return Err(Error::config("product set is empty"));
    }
    let ids: HashSet<u64> = products.iter().map(|p| p.id).collect();
    if let Some(q) = queries.iter().find(|q| !ids.contains(&q.truth_id)) {
        return Err(Error::config(format!(
            "query {} has truth id {} which is not in the product set",
            q.listing.id, q.truth_id
        )));
    }
    Ok(())
}

impl Harness {
    pub fn run_experiment(
        &self,
        config: &ExperimentConfig,
        queries: &[Query],
        products: &[Listing],
    ) -> Result<MetricsReport> {
        config.validate()?;
        check_truth_ids(queries, products)?;
        let encoders = Encoders::from_handles(&config.image_encoder, &config.text_encoder)?;
        self.run_with_encoders(config, &encoders, queries, products)
    }

    /// As [`Harness::run_experiment`], with encoders already built.
    pub fn run_with_encoders(
        &self,
        config: &ExperimentConfig,
        encoders: &Encoders,
        queries: &[Query],
        products: &[Listing],
    ) -> Result<MetricsReport> {
        config.validate()?;
        check_truth_ids(queries, products)?;
        let start = Instant::now();
        let spec = config.render_spec.as_ref();

        let t = Instant::now();
        let product_refs: Vec<&Listing> = products.iter().collect();
        let product_embs = self.embed_listings(&product_refs, config.mode, spec, encoders)?;
        let index = KnnIndex::build(products.iter().map(|p| p.id).zip(product_embs).collect())?;
        let embed_products_ms = ms_since(t);

        let t = Instant::now();
        let query_refs: Vec<&Listing> = queries.iter().map(|q| &q.listing).collect();
        let query_embs = self.embed_listings(&query_refs, config.mode, spec, encoders)?;
        let embed_queries_ms = ms_since(t);

        let t = Instant::now();
        let lists = index.batch_search(&query_embs, config.max_k())?;
        let ranks = queries
            .iter()
            .zip(&query_embs)
            .map(|(q, emb)| {
                let rank = index
                    .full_rank(emb, q.truth_id)?
                    .expect("truth ids checked against the index");
                Ok(QueryRank {
                    query_id: q.listing.id,
                    truth_id: q.truth_id,
                    rank,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let search_ms = ms_since(t);

        let per_query: Vec<_> = lists.into_iter().zip(queries.iter().map(|q| q.truth_id)).collect();
        let mut k_values = config.k_values.clone();
        k_values.sort_unstable();
        k_values.dedup();
        let accuracy = k_values
            .into_iter()
            .map(|k| Ok(AccuracyAtK { k, accuracy: acc_at_k(&per_query, k)? }))
            .collect::<Result<Vec<_>>>()?;

        Ok(MetricsReport {
            fingerprint: config.fingerprint(),
            config: config.clone(),
            n_queries: queries.len(),
            n_products: products.len(),
            accuracy,
            ranks,
            wall: WallClock {
                embed_products_ms,
                embed_queries_ms,
                search_ms,
                total_ms: ms_since(start),
            },
        })
    }
}

/// Runs one experiment with a fresh in-memory cache.
pub fn run_experiment(
    config: &ExperimentConfig,
    queries: &[Query],
    products: &[Listing],
) -> Result<MetricsReport> {
    Harness::new().run_experiment(config, queries, products)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::InferenceMode;
    use image::{Rgb, RgbImage};

    fn tile(shade: u8) -> RgbImage {
        RgbImage::from_fn(64, 64, |x, y| {
            if (x / 8 + y / 8) % 2 == 0 {
                Rgb([shade, 255 - shade, 128])
            } else {
                Rgb([250, 250, 250])
            }
        })
    }

    fn corpus() -> (Vec<Query>, Vec<Listing>) {
        let titles = ["nike dunk low", "adidas samba", "gucci marmont", "birkin 30"];
        let products: Vec<Listing> = titles
            .iter()
            .enumerate()
            .map(|(i, t)| Listing::in_memory(i as u64 + 1, tile(40 * i as u8), *t))
            .collect();
        let queries = titles
            .iter()
            .enumerate()
            .map(|(i, t)| Query {
                listing: Listing::in_memory(100 + i as u64, tile(40 * i as u8 + 3), *t),
                truth_id: i as u64 + 1,
            })
            .collect();
        (queries, products)
    }

    #[test]
    fn missing_truth_id_is_config_error() {
        let (mut queries, products) = corpus();
        queries[2].truth_id = 999;
        let cfg = ExperimentConfig::reference(InferenceMode::RenderedSum, 1);
        let h = Harness::new();
        let err = h.run_experiment(&cfg, &queries, &products).unwrap_err();
        assert!(err.is_config(), "{err}");
        assert!(err.to_string().contains("999"));
        assert!(h.cache().is_empty(), "no embedding work before the check");
    }

    #[test]
    fn report_is_consistent_and_deterministic() {
        let (queries, products) = corpus();
        let mut cfg = ExperimentConfig::reference(InferenceMode::RenderedConcat, 9);
        cfg.k_values = vec![3, 1, 2];
        let a = run_experiment(&cfg, &queries, &products).unwrap();
        let b = run_experiment(&cfg, &queries, &products).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert!(a.is_monotone());
        assert_eq!(a.accuracy.iter().map(|x| x.k).collect::<Vec<_>>(), [1, 2, 3]);
        for acc in &a.accuracy {
            assert_eq!(acc.accuracy, a.accuracy_from_ranks(acc.k));
        }
        assert_eq!(a.n_queries, 4);
        assert_eq!(a.n_products, 4);
    }
}
