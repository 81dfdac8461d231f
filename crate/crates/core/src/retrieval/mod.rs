//! Sparse and dense similarity retrieval over units or chunks.

mod bm25;
mod dense;
mod tokenize;

use serde::{Deserialize, Serialize};

pub use bm25::{bm25_score, bm25_topk, bm25_topk_batch, Bm25Index, Bm25Params};
pub use dense::{cosine, cosine_rank, read_embeddings, write_embeddings, EmbeddingRecord, Embeddings};
pub use tokenize::{tokenize, tokenize_with_offsets, Token};

use crate::graph::CodeGraph;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedHit {
    pub doc_id: String,
    pub score: f64,
    /// 1-based.
    pub rank: usize,
}

/// Sorts by descending score then ascending id and keeps the first `k`.
pub(crate) fn rank_scores<'a>(scores: impl IntoIterator<Item = (&'a str, f64)>, k: usize) -> Vec<RankedHit> {
    let mut all: Vec<(&str, f64)> = scores.into_iter().collect();
    all.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    all.truncate(k);
    all.into_iter()
        .enumerate()
        .map(|(i, (id, score))| RankedHit {
            doc_id: id.to_string(),
            score,
            rank: i + 1,
        })
        .collect()
}

/// BM25 index over every unit's signature, docstring and body, keyed by
/// unit id.
pub fn unit_index(graph: &CodeGraph) -> crate::Result<Bm25Index> {
    let docs: Vec<(String, String)> = graph
        .units()
        .iter()
        .map(|u| (u.id.clone(), u.document_text()))
        .collect();
    Bm25Index::build(&docs)
}
