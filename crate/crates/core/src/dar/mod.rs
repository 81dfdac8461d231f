//! Dependency-aware retrieval: score every candidate in an anchor's scope
//! with a pairwise scorer, keep those above a probability threshold, and
//! pick the threshold by the balanced recall penalty.

mod scorer;

use serde::{Deserialize, Serialize};

pub use scorer::{
    ConstantScorer, CountingScorer, HeuristicScorer, OracleScorer, ScoreRequest, Scorer, SubprocessScorer,
    DEFAULT_TIMEOUT_MS, TIMEOUT_ENV,
};

use crate::error::{Error, Result};
use crate::graph::CodeGraph;
use crate::oracle::{candidate_scope, CandidateScope, Query, ScopeOptions};

pub const DEFAULT_THRESHOLD: f64 = 0.25;
pub const DEFAULT_BATCH_SIZE: usize = 64;
pub const DEFAULT_GRID: &str = "0.15:0.5:0.05";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredCandidate {
    pub unit_id: String,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DarConfig {
    pub threshold: f64,
    pub scope: ScopeOptions,
    pub batch_size: usize,
}

impl Default for DarConfig {
    fn default() -> Self {
        DarConfig {
            threshold: DEFAULT_THRESHOLD,
            scope: ScopeOptions::default(),
            batch_size: DEFAULT_BATCH_SIZE,
        }
    }
}

impl DarConfig {
    pub fn validate(&self) -> Result<()> {
        check_threshold(self.threshold)?;
        if self.batch_size == 0 {
            return Err(Error::InvalidParameter("batch size must be at least 1".into()));
        }
        Ok(())
    }
}

fn check_threshold(t: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidParameter(format!("threshold must be in [0, 1], got {t}")));
    }
    Ok(())
}

/// Probability for every scope candidate, in scope order.
pub fn score_candidates(
    graph: &CodeGraph,
    query: &Query,
    scope: &CandidateScope,
    scorer: &dyn Scorer,
    batch_size: usize,
) -> Result<Vec<ScoredCandidate>> {
    if scope.anchor_id != query.anchor_id {
        return Err(Error::Precondition(format!(
            "scope belongs to {} but the query is for {}",
            scope.anchor_id, query.anchor_id
        )));
    }
    let anchor_file = graph
        .lookup(&query.anchor_id)
        .ok_or_else(|| Error::UnknownUnit(query.anchor_id.clone()))?
        .file_path();
    let mut out = Vec::with_capacity(scope.len());
    for ids in scope.candidate_ids.chunks(batch_size.max(1)) {
        let batch_err = |message: String| Error::Scorer {
            first: ids[0].clone(),
            last: ids[ids.len() - 1].clone(),
            size: ids.len(),
            message,
        };
        let mut requests = Vec::with_capacity(ids.len());
        for id in ids {
            let unit = graph.lookup(id).ok_or_else(|| Error::UnknownUnit(id.clone()))?;
            requests.push(ScoreRequest {
                anchor_id: &query.anchor_id,
                query_text: &query.text,
                candidate: unit,
                same_file: unit.file_path() == anchor_file,
            });
        }
        let probs = scorer.score(&requests).map_err(batch_err)?;
        if probs.len() != ids.len() {
            return Err(batch_err(format!("expected {} probabilities, got {}", ids.len(), probs.len())));
        }
        for (id, p) in ids.iter().zip(probs) {
            if !(0.0..=1.0).contains(&p) {
                return Err(batch_err(format!("probability {p} for {id} is outside [0, 1]")));
            }
            out.push(ScoredCandidate {
                unit_id: id.clone(),
                probability: p,
            });
        }
    }
    Ok(out)
}

/// Ids whose probability is strictly above `threshold`, in input order.
pub fn filter_by_threshold(candidates: &[ScoredCandidate], threshold: f64) -> Vec<String> {
    candidates
        .iter()
        .filter(|c| c.probability > threshold)
        .map(|c| c.unit_id.clone())
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct DarOutput {
    pub scored: Vec<ScoredCandidate>,
    pub retained: Vec<String>,
}

pub fn dar_retrieve(graph: &CodeGraph, query: &Query, config: &DarConfig, scorer: &dyn Scorer) -> Result<DarOutput> {
    config.validate()?;
    let scope = candidate_scope(graph, &query.anchor_id, &config.scope)?;
    let scored = score_candidates(graph, query, &scope, scorer, config.batch_size)?;
    let retained = filter_by_threshold(&scored, config.threshold);
    Ok(DarOutput { scored, retained })
}

/// Penalty weight from the class counts: the reciprocal of how many
/// samples there are per positive, rounded down.
pub fn compute_alpha(n_pos: usize, n_neg: usize) -> Result<f64> {
    if n_pos == 0 {
        return Err(Error::InvalidParameter("alpha needs at least one positive".into()));
    }
    Ok(1.0 / ((n_pos + n_neg) / n_pos) as f64)
}

pub fn brp(recall_1: f64, recall_0: f64, alpha: f64) -> f64 {
    let gap = recall_1 - recall_0;
    recall_1 - alpha * gap * gap
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrpPoint {
    pub threshold: f64,
    pub recall_1: f64,
    pub recall_0: f64,
    pub alpha: f64,
    pub brp: f64,
}

/// A scored validation pair as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPair {
    #[serde(default)]
    pub anchor_id: String,
    #[serde(default)]
    pub candidate_id: String,
    pub probability: f64,
    pub label: u8,
}

/// Evaluates every grid threshold at pair level and returns the one with
/// the highest BRP, preferring the smaller threshold on ties.
pub fn tune_threshold(pairs: &[(f64, bool)], grid: &[f64]) -> Result<(f64, Vec<BrpPoint>)> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("threshold grid is empty".into()));
    }
    for &t in grid {
        check_threshold(t)?;
    }
    let n_pos = pairs.iter().filter(|(_, l)| *l).count();
    let n_neg = pairs.len() - n_pos;
    if n_pos == 0 {
        return Err(Error::SingleClass("no true dependencies"));
    }
    if n_neg == 0 {
        return Err(Error::SingleClass("no false dependencies"));
    }
    let alpha = compute_alpha(n_pos, n_neg)?;
    let mut sorted = grid.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    let points: Vec<BrpPoint> = sorted
        .iter()
        .map(|&t| {
            let tp = pairs.iter().filter(|(p, l)| *l && *p > t).count();
            let tn = pairs.iter().filter(|(p, l)| !*l && *p <= t).count();
            let recall_1 = tp as f64 / n_pos as f64;
            let recall_0 = tn as f64 / n_neg as f64;
            BrpPoint {
                threshold: t,
                recall_1,
                recall_0,
                alpha,
                brp: brp(recall_1, recall_0, alpha),
            }
        })
        .collect();
    let mut best = &points[0];
    for p in &points[1..] {
        if p.brp > best.brp {
            best = p;
        }
    }
    Ok((best.threshold, points))
}

/// `lo:hi:step` (inclusive) or a comma-separated list.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let bad = || Error::InvalidParameter(format!("bad threshold grid {spec:?}"));
    let parts: Vec<&str> = spec.split(':').collect();
    let grid = if parts.len() == 3 {
        let v: Vec<f64> = parts
            .iter()
            .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        let (lo, hi, step) = (v[0], v[1], v[2]);
        if step.is_nan() || step <= 0.0 || hi < lo {
            return Err(bad());
        }
        let n = ((hi - lo) / step + 1e-9).floor() as usize;
        (0..=n).map(|i| ((lo + i as f64 * step) * 1e9).round() / 1e9).collect()
    } else if parts.len() == 1 {
        spec.split(',')
            .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<Vec<_>>>()?
    } else {
        return Err(bad());
    };
    if grid.is_empty() {
        return Err(bad());
    }
    for &t in &grid {
        check_threshold(t)?;
    }
    Ok(grid)
}
