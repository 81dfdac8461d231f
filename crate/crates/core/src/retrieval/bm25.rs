use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{rank_scores, tokenize, RankedHit};
use crate::error::{Error, Result};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bm25Params {
    pub k1: f64,
    pub b: f64,
}

impl Default for Bm25Params {
    fn default() -> Self {
        Bm25Params { k1: 1.5, b: 0.75 }
    }
}

impl Bm25Params {
    pub fn new(k1: f64, b: f64) -> Result<Self> {
        let p = Bm25Params { k1, b };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k1 > 0.0 && self.k1.is_finite()) {
            return Err(Error::InvalidParameter(format!("k1 must be positive, got {}", self.k1)));
        }
        if !(0.0..=1.0).contains(&self.b) {
            return Err(Error::InvalidParameter(format!("b must be in [0, 1], got {}", self.b)));
        }
        Ok(())
    }
}

/// Inverted index over pre-tokenized documents.
#[derive(Debug, Clone)]
pub struct Bm25Index {
    doc_ids: Vec<String>,
    doc_lengths: Vec<usize>,
    avgdl: f64,
    /// term -> (doc index, term frequency), doc indexes ascending
    postings: HashMap<String, Vec<(u32, u32)>>,
    positions: HashMap<String, usize>,
}

impl Bm25Index {
    /// Tokenizes and indexes `(doc_id, text)` pairs.
    pub fn build<S: AsRef<str> + Sync>(docs: &[(String, S)]) -> Result<Self> {
        let tokens = par::map(docs, |(_, text)| tokenize(text.as_ref()));
        let ids = docs.iter().map(|(id, _)| id.clone()).collect();
        Self::from_tokens(ids, tokens)
    }

    pub fn from_tokens(doc_ids: Vec<String>, tokens: Vec<Vec<String>>) -> Result<Self> {
        assert_eq!(doc_ids.len(), tokens.len());
        let mut positions = HashMap::with_capacity(doc_ids.len());
        for (i, id) in doc_ids.iter().enumerate() {
            if positions.insert(id.clone(), i).is_some() {
                return Err(Error::InvalidParameter(format!("duplicate document id {id}")));
            }
        }
        let mut postings: HashMap<String, Vec<(u32, u32)>> = HashMap::new();
        let mut doc_lengths = Vec::with_capacity(tokens.len());
        for (doc, toks) in tokens.into_iter().enumerate() {
            doc_lengths.push(toks.len());
            let mut tf: HashMap<String, u32> = HashMap::new();
            for t in toks {
                *tf.entry(t).or_default() += 1;
            }
            for (term, f) in tf {
                postings.entry(term).or_default().push((doc as u32, f));
            }
        }
        let total: usize = doc_lengths.iter().sum();
        let avgdl = if doc_lengths.is_empty() {
            0.0
        } else {
            total as f64 / doc_lengths.len() as f64
        };
        Ok(Bm25Index {
            doc_ids,
            doc_lengths,
            avgdl,
            postings,
            positions,
        })
    }

    pub fn doc_count(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn doc_lengths(&self) -> &[usize] {
        &self.doc_lengths
    }

    pub fn avgdl(&self) -> f64 {
        self.avgdl
    }

    pub fn doc_frequency(&self, term: &str) -> usize {
        self.postings.get(term).map_or(0, Vec::len)
    }

    pub fn term_frequency(&self, term: &str, doc_id: &str) -> Option<u32> {
        let pos = *self.positions.get(doc_id)? as u32;
        let list = self.postings.get(term)?;
        list.binary_search_by_key(&pos, |(d, _)| *d).ok().map(|i| list[i].1)
    }

    pub fn idf(&self, term: &str) -> f64 {
        let n = self.doc_count() as f64;
        let df = self.doc_frequency(term) as f64;
        ((n - df + 0.5) / (df + 0.5) + 1.0).ln()
    }

    fn term_weight(&self, params: &Bm25Params, idf: f64, tf: u32, doc: usize) -> f64 {
        let tf = tf as f64;
        let len_ratio = if self.avgdl > 0.0 {
            self.doc_lengths[doc] as f64 / self.avgdl
        } else {
            0.0
        };
        idf * tf * (params.k1 + 1.0) / (tf + params.k1 * (1.0 - params.b + params.b * len_ratio))
    }

    /// Score of one document; every query token counts, repeats included.
    pub fn score(&self, params: &Bm25Params, query: &[String], doc_id: &str) -> Result<f64> {
        let doc = *self
            .positions
            .get(doc_id)
            .ok_or_else(|| Error::UnknownDocument(doc_id.to_string()))?;
        let mut total = 0.0;
        for term in query {
            if let Some(tf) = self.term_frequency(term, doc_id) {
                total += self.term_weight(params, self.idf(term), tf, doc);
            }
        }
        Ok(total)
    }

    /// Scores of every document, indexed like `doc_ids`.
    pub fn score_all(&self, params: &Bm25Params, query: &[String]) -> Vec<f64> {
        let mut scores = vec![0.0; self.doc_count()];
        for term in query {
            let Some(list) = self.postings.get(term) else {
                continue;
            };
            let idf = self.idf(term);
            for &(doc, tf) in list {
                scores[doc as usize] += self.term_weight(params, idf, tf, doc as usize);
            }
        }
        scores
    }

    /// Top `k` documents with a positive score, skipping ids for which
    /// `exclude` holds. Ties go to the smaller id.
    pub fn topk_filtered(
        &self,
        params: &Bm25Params,
        query_text: &str,
        k: usize,
        exclude: impl Fn(&str) -> bool,
    ) -> Result<Vec<RankedHit>> {
        if k == 0 {
            return Err(Error::InvalidParameter("k must be at least 1".into()));
        }
        let query = tokenize(query_text);
        let scores = self.score_all(params, &query);
        let candidates = scores
            .into_iter()
            .enumerate()
            .filter(|(i, s)| *s > 0.0 && !exclude(&self.doc_ids[*i]))
            .map(|(i, s)| (self.doc_ids[i].as_str(), s));
        Ok(rank_scores(candidates, k))
    }

    pub fn topk(&self, params: &Bm25Params, query_text: &str, k: usize) -> Result<Vec<RankedHit>> {
        self.topk_filtered(params, query_text, k, |_| false)
    }
}

pub fn bm25_score(index: &Bm25Index, params: &Bm25Params, query: &[String], doc_id: &str) -> Result<f64> {
    index.score(params, query, doc_id)
}

pub fn bm25_topk(index: &Bm25Index, params: &Bm25Params, query_text: &str, k: usize) -> Result<Vec<RankedHit>> {
    index.topk(params, query_text, k)
}

/// Runs many queries against one index, in parallel when enabled.
pub fn bm25_topk_batch(
    index: &Bm25Index,
    params: &Bm25Params,
    queries: &[String],
    k: usize,
) -> Result<Vec<Vec<RankedHit>>> {
    par::try_map(queries, |q| index.topk(params, q, k))
}
