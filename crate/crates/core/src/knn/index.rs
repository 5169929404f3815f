use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encoders::Embedding;
use crate::error::{Error, Result};
use crate::fusion::dot;

/// Stored vectors must be unit-norm within this tolerance.
pub const INDEX_NORM_TOLERANCE: f64 = 1e-4;

/// Candidates per rayon task when scanning in parallel.
const PARALLEL_CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub product_id: u64,
    pub score: f64,
}

impl Hit {
    /// Ranking order: higher score first, then lower id.
    fn rank_cmp(&self, other: &Self) -> Ordering {
        other
            .score
            .total_cmp(&self.score)
            .then(self.product_id.cmp(&other.product_id))
    }
}

/// Max-heap adapter: the worst retained hit sits on top.
struct Ranked(Hit);

impl PartialEq for Ranked {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Ranked {}
impl PartialOrd for Ranked {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Ranked {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.rank_cmp(&other.0)
    }
}

/// Top hits for one query: scores non-increasing, ties by ascending id.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ResultList {
    pub hits: Vec<Hit>,
}

impl ResultList {
    pub fn ids(&self) -> Vec<u64> {
        self.hits.iter().map(|h| h.product_id).collect()
    }

    /// 1-based position of `id`, if retrieved.
    pub fn rank_of(&self, id: u64) -> Option<usize> {
        self.hits.iter().position(|h| h.product_id == id).map(|p| p + 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Parallelism {
    Sequential,
    #[default]
    Parallel,
}

/// Immutable candidate pool for exact top-k search by dot product.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnIndex {
    ids: Vec<u64>,
    /// Row-major `count x dim`.
    vectors: Vec<f32>,
    dim: usize,
    model_id: String,
}

impl KnnIndex {
    pub fn build(entries: Vec<(u64, Embedding)>) -> Result<Self> {
        let Some((first_id, first)) = entries.first() else {
            return Err(Error::invalid("cannot build an index from zero entries"));
        };
        let dim = first.dim();
        if dim == 0 {
            return Err(Error::Build {
                id: *first_id,
                reason: "embedding has no dimensions".into(),
            });
        }
        let model_id = first.model_id.clone();
        let mut ids = Vec::with_capacity(entries.len());
        let mut vectors = Vec::with_capacity(entries.len() * dim);
        let mut seen = HashSet::with_capacity(entries.len());
        for (id, emb) in entries {
            if !seen.insert(id) {
                return Err(Error::Build {
                    id,
                    reason: "duplicate id".into(),
                });
            }
            if emb.dim() != dim {
                return Err(Error::Build {
                    id,
                    reason: format!("dim {} differs from index dim {dim}", emb.dim()),
                });
            }
            if !emb.is_unit(INDEX_NORM_TOLERANCE) {
                return Err(Error::Build {
                    id,
                    reason: format!("vector norm {} is not unit", emb.norm()),
                });
            }
            ids.push(id);
            vectors.extend_from_slice(&emb.vector);
        }
        Ok(Self {
            ids,
            vectors,
            dim,
            model_id,
        })
    }

    /// Assembles an index from raw parts, applying the same checks as [`build`](Self::build).
    pub(crate) fn from_parts(
        ids: Vec<u64>,
        vectors: Vec<f32>,
        dim: usize,
        model_id: String,
    ) -> Result<Self> {
        debug_assert_eq!(ids.len() * dim, vectors.len());
        let mut seen = HashSet::with_capacity(ids.len());
        for (i, &id) in ids.iter().enumerate() {
            if !seen.insert(id) {
                return Err(Error::Build {
                    id,
                    reason: "duplicate id".into(),
                });
            }
            let row = &vectors[i * dim..(i + 1) * dim];
            let norm = dot(row, row).sqrt();
            if (norm - 1.0).abs() > INDEX_NORM_TOLERANCE {
                return Err(Error::Build {
                    id,
                    reason: format!("vector norm {norm} is not unit"),
                });
            }
        }
        Ok(Self {
            ids,
            vectors,
            dim,
            model_id,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    pub fn ids(&self) -> &[u64] {
        &self.ids
    }

    pub fn vector(&self, row: usize) -> &[f32] {
        &self.vectors[row * self.dim..(row + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, &[f32])> + '_ {
        self.ids.iter().copied().zip(self.vectors.chunks_exact(self.dim))
    }

    fn check_query(&self, query: &Embedding, k: usize) -> Result<()> {
        if query.dim() != self.dim {
            return Err(Error::invalid(format!(
                "query dim {} does not match index dim {}",
                query.dim(),
                self.dim
            )));
        }
        if k == 0 {
            return Err(Error::invalid("k must be >= 1"));
        }
        if query.vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("query has non-finite components"));
        }
        Ok(())
    }

    pub fn search(&self, query: &Embedding, k: usize) -> Result<ResultList> {
        self.search_with(query, k, Parallelism::default())
    }

    pub fn search_with(&self, query: &Embedding, k: usize, mode: Parallelism) -> Result<ResultList> {
        self.check_query(query, k)?;
        let q = &query.vector;
        let mut hits = match mode {
            Parallelism::Sequential => self.top_k_range(q, k, 0, self.len()),
            Parallelism::Parallel => {
                let chunks = self.len().div_ceil(PARALLEL_CHUNK);
                (0..chunks)
                    .into_par_iter()
                    .map(|c| {
                        let start = c * PARALLEL_CHUNK;
                        self.top_k_range(q, k, start, (start + PARALLEL_CHUNK).min(self.len()))
                    })
                    .reduce(Vec::new, |mut a, b| {
                        a.extend(b);
                        a.sort_by(Hit::rank_cmp);
                        a.truncate(k);
                        a
                    })
            }
        };
        hits.sort_by(Hit::rank_cmp);
        hits.truncate(k);
        Ok(ResultList { hits })
    }

    /// Searches every query; output order follows input order.
    pub fn batch_search(&self, queries: &[Embedding], k: usize) -> Result<Vec<ResultList>> {
        queries
            .par_iter()
            .map(|q| self.search_with(q, k, Parallelism::Sequential))
            .collect()
    }

    /// Exact 1-based rank `id` would get in a full ranking, using the same
    /// score and tie-break as [`search`](Self::search).
    pub fn full_rank(&self, query: &Embedding, id: u64) -> Result<Option<usize>> {
        self.check_query(query, 1)?;
        let Some(row) = self.ids.iter().position(|&x| x == id) else {
            return Ok(None);
        };
        let target = Hit {
            product_id: id,
            score: dot(&query.vector, self.vector(row)),
        };
        let ahead = self
            .iter()
            .filter(|(pid, v)| {
                let hit = Hit {
                    product_id: *pid,
                    score: dot(&query.vector, v),
                };
                hit.rank_cmp(&target) == Ordering::Less
            })
            .count();
        Ok(Some(ahead + 1))
    }

    fn top_k_range(&self, q: &[f32], k: usize, start: usize, end: usize) -> Vec<Hit> {
        let mut heap: BinaryHeap<Ranked> = BinaryHeap::with_capacity(k + 1);
        for row in start..end {
            let hit = Hit {
                product_id: self.ids[row],
                score: dot(q, self.vector(row)),
            };
            if heap.len() < k {
                heap.push(Ranked(hit));
            } else if let Some(worst) = heap.peek() {
                if hit.rank_cmp(&worst.0) == Ordering::Less {
                    heap.pop();
                    heap.push(Ranked(hit));
                }
            }
        }
        heap.into_iter().map(|r| r.0).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoders::Modality;
    use crate::rng::SplitMix64;

    fn emb(v: &[f32]) -> Embedding {
        Embedding::new(v.to_vec(), Modality::Image, "m")
    }

    fn random_unit(rng: &mut SplitMix64, dim: usize) -> Embedding {
        let raw: Vec<f64> = (0..dim).map(|_| rng.next_signed_unit()).collect();
        Embedding::normalized(&raw, Modality::Image, "m").unwrap()
    }

    fn small() -> KnnIndex {
        KnnIndex::build(vec![
            (1, emb(&[1.0, 0.0])),
            (2, emb(&[0.0, 1.0])),
            (3, emb(&[0.6, 0.8])),
        ])
        .unwrap()
    }

    #[test]
    fn build_records_shape() {
        let idx = small();
        assert_eq!(idx.len(), 3);
        assert_eq!(idx.dim(), 2);
        assert_eq!(idx.model_id(), "m");
    }

    #[test]
    fn build_errors_name_the_id() {
        let dup = KnnIndex::build(vec![(7, emb(&[1.0, 0.0])), (7, emb(&[0.0, 1.0]))]);
        match dup {
            Err(Error::Build { id: 7, .. }) => {}
            other => panic!("{other:?}"),
        }
        let err = KnnIndex::build(vec![(1, emb(&[1.0, 0.0])), (9, emb(&[1.0]))]).unwrap_err();
        assert!(err.to_string().contains('9'));
        let err = KnnIndex::build(vec![(4, emb(&[2.0, 0.0]))]).unwrap_err();
        assert!(matches!(err, Error::Build { id: 4, .. }));
        assert!(KnnIndex::build(vec![]).is_err());
    }

    #[test]
    fn hand_computed_top_two() {
        let r = small().search(&emb(&[1.0, 0.0]), 2).unwrap();
        assert_eq!(r.ids(), vec![1, 3]);
        assert!((r.hits[0].score - 1.0).abs() < 1e-9);
        assert!((r.hits[1].score - 0.6).abs() < 1e-6);
    }

    #[test]
    fn k_larger_than_pool() {
        let r = small().search(&emb(&[0.0, 1.0]), 10).unwrap();
        assert_eq!(r.ids(), vec![2, 3, 1]);
    }

    #[test]
    fn ties_break_by_id() {
        let idx = KnnIndex::build(vec![
            (20, emb(&[0.0, 1.0])),
            (10, emb(&[0.0, 1.0])),
            (5, emb(&[1.0, 0.0])),
        ])
        .unwrap();
        let r = idx.search(&emb(&[0.0, 1.0]), 2).unwrap();
        assert_eq!(r.ids(), vec![10, 20]);
        assert_eq!(r.hits[0].score.to_bits(), r.hits[1].score.to_bits());
    }

    #[test]
    fn self_retrieval() {
        let mut rng = SplitMix64::new(3);
        let entries: Vec<(u64, Embedding)> =
            (0..500).map(|i| (i, random_unit(&mut rng, 32))).collect();
        let q = entries[7].1.clone();
        let idx = KnnIndex::build(entries).unwrap();
        let r = idx.search(&q, 5).unwrap();
        assert_eq!(r.hits[0].product_id, 7);
        assert!((r.hits[0].score - 1.0).abs() < 1e-6);
        assert_eq!(idx.full_rank(&q, 7).unwrap(), Some(1));
    }

    #[test]
    fn query_errors() {
        let idx = small();
        assert!(idx.search(&emb(&[1.0, 0.0, 0.0]), 1).is_err());
        assert!(idx.search(&emb(&[1.0, 0.0]), 0).is_err());
        assert!(idx.search(&emb(&[f32::NAN, 0.0]), 1).is_err());
    }

    #[test]
    fn parallel_matches_sequential_and_full_rank() {
        let mut rng = SplitMix64::new(11);
        let entries: Vec<(u64, Embedding)> = (0..10_000)
            .map(|_| (rng.next_u64() % 1_000_000_000, random_unit(&mut rng, 16)))
            .collect::<std::collections::HashMap<_, _>>()
            .into_iter()
            .collect();
        let idx = KnnIndex::build(entries).unwrap();
        for _ in 0..10 {
            let q = random_unit(&mut rng, 16);
            let seq = idx.search_with(&q, 25, Parallelism::Sequential).unwrap();
            let par = idx.search_with(&q, 25, Parallelism::Parallel).unwrap();
            assert_eq!(seq, par);
            for (pos, hit) in seq.hits.iter().enumerate() {
                assert_eq!(idx.full_rank(&q, hit.product_id).unwrap(), Some(pos + 1));
            }
        }
    }
}
