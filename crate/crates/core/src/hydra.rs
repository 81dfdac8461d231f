//! Hybrid context assembly: DAR dependencies plus BM25 usage examples,
//! rendered ahead of the task into one prompt.

use std::collections::HashSet;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dar::{dar_retrieve, DarConfig, Scorer};
use crate::error::{Error, Result};
use crate::graph::{CodeGraph, CodeUnit};
use crate::oracle::Query;
use crate::retrieval::{Bm25Index, Bm25Params, RankedHit};

pub const DEFAULT_K_SIM: usize = 5;
pub const DEFAULT_BUDGET: usize = 16_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievedContext {
    pub anchor_id: String,
    pub dependency_units: Vec<String>,
    pub exemplar_hits: Vec<RankedHit>,
    pub rendered_prompt: String,
    pub retrieval_latency_ms: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct HydraConfig {
    pub dar: DarConfig,
    pub bm25: Bm25Params,
    pub k_sim: usize,
    pub budget: usize,
    /// Record wall-clock latency. Off for byte-reproducible output.
    pub measure_latency: bool,
}

impl Default for HydraConfig {
    fn default() -> Self {
        HydraConfig {
            dar: DarConfig::default(),
            bm25: Bm25Params::default(),
            k_sim: DEFAULT_K_SIM,
            budget: DEFAULT_BUDGET,
            measure_latency: true,
        }
    }
}

/// The anchor, or a unit whose text contains the anchor (its class).
/// Showing either would hand the generator the answer.
pub fn leaks_anchor(unit: &CodeUnit, anchor: &CodeUnit) -> bool {
    unit.id == anchor.id || (unit.file_path() == anchor.file_path() && unit.span.contains(&anchor.span))
}

pub fn hydra_retrieve(
    graph: &CodeGraph,
    index: &Bm25Index,
    query: &Query,
    config: &HydraConfig,
    scorer: &dyn Scorer,
) -> Result<RetrievedContext> {
    let anchor = graph
        .lookup(&query.anchor_id)
        .ok_or_else(|| Error::UnknownUnit(query.anchor_id.clone()))?;
    let started = Instant::now();
    let dar = dar_retrieve(graph, query, &config.dar, scorer)?;
    let raw_hits = index.topk_filtered(&config.bm25, &query.text, config.k_sim, |id| {
        graph.lookup(id).is_some_and(|u| leaks_anchor(u, anchor))
    })?;
    let elapsed = started.elapsed();

    let dependency_units: Vec<String> = dar.retained.into_iter().filter(|id| *id != anchor.id).collect();
    let deps: HashSet<&str> = dependency_units.iter().map(String::as_str).collect();
    let exemplar_hits: Vec<RankedHit> = raw_hits
        .into_iter()
        .filter(|h| !deps.contains(h.doc_id.as_str()))
        .enumerate()
        .map(|(i, h)| RankedHit { rank: i + 1, ..h })
        .collect();

    let mut ctx = RetrievedContext {
        anchor_id: query.anchor_id.clone(),
        dependency_units,
        exemplar_hits,
        rendered_prompt: String::new(),
        retrieval_latency_ms: config.measure_latency.then_some(elapsed.as_secs_f64() * 1000.0),
    };
    ctx.rendered_prompt = render_prompt(&ctx, graph, &query.text, config.budget)?;
    Ok(ctx)
}

fn render_item(unit: &CodeUnit) -> String {
    format!("# file: {}\n{}\n", unit.file_path(), unit.body_text)
}

fn assemble(deps: &[String], similar: &[String], task: &str) -> String {
    if deps.is_empty() && similar.is_empty() {
        return task.to_string();
    }
    let mut out = String::new();
    if !deps.is_empty() {
        out.push_str("# Dependencies\n\n");
        for d in deps {
            out.push_str(d);
            out.push('\n');
        }
    }
    if !similar.is_empty() {
        out.push_str("# Similar code\n\n");
        for s in similar {
            out.push_str(s);
            out.push('\n');
        }
    }
    out.push_str("# Task\n\n");
    out.push_str(task);
    out
}

fn char_len(s: &str) -> usize {
    s.chars().count()
}

/// Renders dependencies, then similar code, then the task. Units are never
/// cut: over budget, exemplars go first (lowest rank first), then
/// dependencies from the end. A method whose class is also shown is left
/// out since the class body already contains it, and so is any unit whose
/// text contains the anchor itself.
pub fn render_prompt(context: &RetrievedContext, graph: &CodeGraph, task: &str, budget: usize) -> Result<String> {
    let needed = char_len(task);
    if budget == 0 || budget < needed {
        return Err(Error::BudgetTooSmall { budget, needed });
    }
    let anchor = graph.lookup(&context.anchor_id);
    let visible = |u: &&CodeUnit| !anchor.is_some_and(|a| leaks_anchor(u, a));
    let dep_units: Vec<&CodeUnit> = context
        .dependency_units
        .iter()
        .filter_map(|id| graph.lookup(id))
        .filter(visible)
        .collect();
    let sim_units: Vec<&CodeUnit> = context
        .exemplar_hits
        .iter()
        .filter_map(|h| graph.lookup(&h.doc_id))
        .filter(visible)
        .collect();
    let shown: HashSet<&str> = dep_units.iter().chain(&sim_units).map(|u| u.id.as_str()).collect();
    let covered = |u: &CodeUnit| -> bool {
        let mut parent = u.parent_class.as_deref();
        while let Some(p) = parent {
            if shown.contains(p) {
                return true;
            }
            parent = graph.lookup(p).and_then(|c| c.parent_class.as_deref());
        }
        false
    };
    let mut deps: Vec<String> = dep_units.iter().filter(|u| !covered(u)).map(|u| render_item(u)).collect();
    let mut similar: Vec<String> = sim_units.iter().filter(|u| !covered(u)).map(|u| render_item(u)).collect();

    loop {
        let prompt = assemble(&deps, &similar, task);
        if char_len(&prompt) <= budget {
            return Ok(prompt);
        }
        if similar.pop().is_none() && deps.pop().is_none() {
            return Ok(task.to_string());
        }
    }
}
