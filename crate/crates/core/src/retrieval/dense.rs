use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{rank_scores, RankedHit};
use crate::error::{Error, Result};

/// One line of an embeddings file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRecord {
    pub doc_id: String,
    pub vector: Vec<f64>,
}

pub type Embeddings = BTreeMap<String, Vec<f64>>;

pub fn read_embeddings(path: &Path) -> Result<Embeddings> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = BTreeMap::new();
    for line in std::io::BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: EmbeddingRecord = serde_json::from_str(&line)?;
        out.insert(rec.doc_id, rec.vector);
    }
    Ok(out)
}

pub fn write_embeddings(path: &Path, embeddings: &Embeddings) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| Error::io(path, e))?);
    for (doc_id, vector) in embeddings {
        let rec = EmbeddingRecord {
            doc_id: doc_id.clone(),
            vector: vector.clone(),
        };
        serde_json::to_writer(&mut f, &rec)?;
        f.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    f.flush().map_err(|e| Error::io(path, e))
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    dot / (norm(a) * norm(b))
}

/// Ranks every vector by cosine similarity to the query.
pub fn cosine_rank(vectors: &Embeddings, query: &[f64], k: usize) -> Result<Vec<RankedHit>> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    if norm(query) == 0.0 {
        return Err(Error::ZeroVector("query".into()));
    }
    let mut scored = Vec::with_capacity(vectors.len());
    for (id, v) in vectors {
        if v.len() != query.len() {
            return Err(Error::DimensionMismatch {
                doc_id: id.clone(),
                expected: query.len(),
                actual: v.len(),
            });
        }
        if norm(v) == 0.0 {
            return Err(Error::ZeroVector(id.clone()));
        }
        scored.push((id.as_str(), cosine(query, v)));
    }
    Ok(rank_scores(scored, k))
}
