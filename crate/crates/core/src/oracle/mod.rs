//! Ground-truth dependencies and training-triplet mining.
//!
//! A function's candidate scope is every unit in its own file and in the
//! files that file imports directly. Its true dependencies are the scope
//! candidates its body references, found by static usage analysis. Each
//! function with a non-empty scope yields one `(query, positives, negatives)`
//! triplet.

mod analysis;
mod dataset;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

pub use analysis::{analyze_source, Analysis};
pub use dataset::{expand_pairs, split_and_balance, split_sizes, SplitCounts, DatasetSplit, DatasetStats, Pair};

use crate::error::{Error, Result};
use crate::graph::{CodeGraph, CodeUnit, UnitKind};
use crate::par;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub anchor_id: String,
    pub text: String,
}

impl Query {
    /// Signature followed by the docstring, when there is one.
    pub fn for_unit(unit: &CodeUnit) -> Query {
        let text = match &unit.docstring {
            Some(doc) => format!("{}\n{}", unit.signature, doc),
            None => unit.signature.clone(),
        };
        Query {
            anchor_id: unit.id.clone(),
            text,
        }
    }
}

/// Which units enter a candidate scope.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScopeOptions {
    pub kinds: BTreeSet<UnitKind>,
    /// Methods of in-scope classes are candidates in their own right.
    pub include_methods: bool,
}

impl Default for ScopeOptions {
    fn default() -> Self {
        ScopeOptions {
            kinds: UnitKind::ALL.into_iter().collect(),
            include_methods: true,
        }
    }
}

impl ScopeOptions {
    pub fn with_kinds(kinds: impl IntoIterator<Item = UnitKind>) -> Self {
        ScopeOptions {
            kinds: kinds.into_iter().collect(),
            ..Default::default()
        }
    }

    fn admits(&self, unit: &CodeUnit) -> bool {
        self.kinds.contains(&unit.kind) && (self.include_methods || !unit.is_method())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateScope {
    pub anchor_id: String,
    pub candidate_ids: Vec<String>,
    /// Anchor file first, then its imported files in path order.
    pub files: Vec<String>,
}

impl CandidateScope {
    pub fn is_empty(&self) -> bool {
        self.candidate_ids.is_empty()
    }

    pub fn len(&self) -> usize {
        self.candidate_ids.len()
    }
}

fn function_anchor<'g>(graph: &'g CodeGraph, anchor_id: &str) -> Result<&'g CodeUnit> {
    let unit = graph
        .lookup(anchor_id)
        .ok_or_else(|| Error::UnknownUnit(anchor_id.to_string()))?;
    if unit.kind != UnitKind::Function {
        return Err(Error::NotAFunction {
            id: anchor_id.to_string(),
            actual: unit.kind.to_string(),
        });
    }
    Ok(unit)
}

/// Units of the requested kinds from the anchor's file and its one-hop
/// imported files, minus the anchor.
pub fn candidate_scope(graph: &CodeGraph, anchor_id: &str, options: &ScopeOptions) -> Result<CandidateScope> {
    let anchor = function_anchor(graph, anchor_id)?;
    let file = anchor.file_path();
    let mut files = vec![file.to_string()];
    files.extend(graph.imported_files(file)?.into_iter().filter(|f| f != file));
    let candidate_ids = files
        .iter()
        .flat_map(|f| graph.units_in_file(f))
        .filter(|u| u.id != anchor.id && options.admits(u))
        .map(|u| u.id.clone())
        .collect();
    Ok(CandidateScope {
        anchor_id: anchor.id.clone(),
        candidate_ids,
        files,
    })
}

/// Scope candidates the anchor's body references.
pub fn analyze_dependencies(graph: &CodeGraph, anchor_id: &str, scope: &CandidateScope) -> Result<BTreeSet<String>> {
    if scope.anchor_id != anchor_id {
        return Err(Error::Precondition(format!(
            "scope belongs to {} but the anchor is {anchor_id}",
            scope.anchor_id
        )));
    }
    let anchor = function_anchor(graph, anchor_id)?;
    Ok(analyze_source(graph, anchor.file_path(), &anchor.body_text, &scope.candidate_ids).dependencies)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Triplet {
    pub query: Query,
    pub positives: Vec<String>,
    pub negatives: Vec<String>,
}

impl Triplet {
    pub fn anchor_id(&self) -> &str {
        &self.query.anchor_id
    }
}

/// Triplet for one anchor, or `None` when its scope is empty.
pub fn triplet_for(graph: &CodeGraph, anchor_id: &str, options: &ScopeOptions) -> Result<Option<Triplet>> {
    let scope = candidate_scope(graph, anchor_id, options)?;
    if scope.is_empty() {
        return Ok(None);
    }
    let deps = analyze_dependencies(graph, anchor_id, &scope)?;
    let (positives, negatives): (Vec<String>, Vec<String>) =
        scope.candidate_ids.into_iter().partition(|id| deps.contains(id));
    let anchor = function_anchor(graph, anchor_id)?;
    Ok(Some(Triplet {
        query: Query::for_unit(anchor),
        positives,
        negatives,
    }))
}

/// One triplet per Function unit with a non-empty scope, in graph order.
pub fn build_triplets(graph: &CodeGraph, options: &ScopeOptions) -> Vec<Triplet> {
    let anchors: Vec<&str> = graph.function_units().map(|u| u.id.as_str()).collect();
    par::map(&anchors, |id| triplet_for(graph, id, options))
        .into_iter()
        .filter_map(|r| r.ok().flatten())
        .collect()
}

/// Ground truth keyed by anchor, as carried by a triplets file.
pub fn gold_from_triplets(triplets: &[Triplet]) -> std::collections::BTreeMap<String, BTreeSet<String>> {
    triplets
        .iter()
        .map(|t| (t.query.anchor_id.clone(), t.positives.iter().cloned().collect()))
        .collect()
}
