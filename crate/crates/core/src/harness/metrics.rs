use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::config::ExperimentConfig;
use crate::knn::ResultList;

/// Fraction of queries whose truth id appears among the first `k` hits.
pub fn acc_at_k(per_query: &[(ResultList, u64)], k: usize) -> Result<f64> {
    if per_query.is_empty() {
        return Err(Error::invalid("Acc@k over an empty query set"));
    }
    if k == 0 {
        return Err(Error::invalid("k must be >= 1"));
    }
    let hits = per_query
        .iter()
        .filter(|(list, truth)| list.hits.iter().take(k).any(|h| h.product_id == *truth))
        .count();
    Ok(hits as f64 / per_query.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyAtK {
    pub k: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryRank {
    pub query_id: u64,
    pub truth_id: u64,
    /// 1-based rank of the truth product in the full candidate ranking.
    pub rank: usize,
}

/// Timings are kept out of the serialized report so that reports of
/// identical runs compare byte-for-byte.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WallClock {
    pub embed_products_ms: u64,
    pub embed_queries_ms: u64,
    pub search_ms: u64,
    pub total_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub fingerprint: String,
    pub config: ExperimentConfig,
    pub n_queries: usize,
    pub n_products: usize,
    pub accuracy: Vec<AccuracyAtK>,
    pub ranks: Vec<QueryRank>,
    #[serde(skip)]
    pub wall: WallClock,
}

impl MetricsReport {
    pub fn accuracy_at(&self, k: usize) -> Option<f64> {
        self.accuracy.iter().find(|a| a.k == k).map(|a| a.accuracy)
    }

    /// Acc@k recomputed from the stored full ranks.
    pub fn accuracy_from_ranks(&self, k: usize) -> f64 {
        if self.ranks.is_empty() {
            return 0.0;
        }
        let hits = self.ranks.iter().filter(|r| r.rank <= k).count();
        hits as f64 / self.ranks.len() as f64
    }

    /// Acc@k non-decreasing in k.
    pub fn is_monotone(&self) -> bool {
        let mut sorted = self.accuracy.clone();
        sorted.sort_by_key(|a| a.k);
        sorted.windows(2).all(|w| w[0].accuracy <= w[1].accuracy)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::knn::Hit;

    /// A result list that places `truth` at `rank` among filler ids.
    fn list_with_truth_at(truth: u64, rank: usize, len: usize) -> ResultList {
        let hits = (1..=len)
            .map(|pos| Hit {
                product_id: if pos == rank { truth } else { 1000 + pos as u64 },
                score: 1.0 - pos as f64 * 0.01,
            })
            .collect();
        ResultList { hits }
    }

    #[test]
    fn hand_counted_ranks() {
        let per_query: Vec<(ResultList, u64)> = [1usize, 2, 5, 1]
            .iter()
            .enumerate()
            .map(|(q, &r)| (list_with_truth_at(q as u64, r, 10), q as u64))
            .collect();
        assert_eq!(acc_at_k(&per_query, 1).unwrap(), 0.5);
        assert_eq!(acc_at_k(&per_query, 3).unwrap(), 0.75);
        assert_eq!(acc_at_k(&per_query, 5).unwrap(), 1.0);
    }

    #[test]
    fn all_first() {
        let per_query: Vec<_> = (0..7).map(|q| (list_with_truth_at(q, 1, 3), q)).collect();
        for k in 1..5 {
            assert_eq!(acc_at_k(&per_query, k).unwrap(), 1.0);
        }
    }

    #[test]
    fn truth_beyond_list_is_miss() {
        let per_query = vec![(list_with_truth_at(9, 99, 3), 9)];
        assert_eq!(acc_at_k(&per_query, 3).unwrap(), 0.0);
    }

    #[test]
    fn errors() {
        assert!(acc_at_k(&[], 1).is_err());
        let per_query = vec![(list_with_truth_at(1, 1, 3), 1)];
        assert!(acc_at_k(&per_query, 0).is_err());
    }
}
