//! Retrieval precision/recall, Pass@k, dependency invocation rate and
//! latency statistics.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{CodeGraph, UnitKind};
use crate::oracle::{analyze_source, candidate_scope, ScopeOptions};

/// Kind encoded in a unit id (`path::name::Kind`).
pub fn kind_of(id: &str) -> Option<UnitKind> {
    id.rsplit("::").next().and_then(UnitKind::parse)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub retrieved: usize,
    pub gold: usize,
    pub hit: usize,
}

impl Counts {
    pub fn of(retrieved: &BTreeSet<String>, gold: &BTreeSet<String>) -> Counts {
        Counts {
            retrieved: retrieved.len(),
            gold: gold.len(),
            hit: retrieved.intersection(gold).count(),
        }
    }

    fn add(&mut self, other: Counts) {
        self.retrieved += other.retrieved;
        self.gold += other.gold;
        self.hit += other.hit;
    }

    pub fn precision(&self) -> f64 {
        if self.retrieved == 0 {
            0.0
        } else {
            self.hit as f64 / self.retrieved as f64
        }
    }

    /// `None` when there is nothing to recall.
    pub fn recall(&self) -> Option<f64> {
        (self.gold > 0).then(|| self.hit as f64 / self.gold as f64)
    }
}

pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalEval {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Per-kind recalls; absent when the gold set has no unit of that kind.
    pub frecall: Option<f64>,
    pub crecall: Option<f64>,
    pub vrecall: Option<f64>,
}

/// Micro-averaged counts, overall and per kind.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetrievalCounts {
    pub overall: Counts,
    pub function: Counts,
    pub class: Counts,
    pub variable: Counts,
}

impl RetrievalCounts {
    pub fn of(retrieved: &BTreeSet<String>, gold: &BTreeSet<String>) -> Self {
        let restrict = |s: &BTreeSet<String>, k| s.iter().filter(|id| kind_of(id) == Some(k)).cloned().collect();
        let per = |k| Counts::of(&restrict(retrieved, k), &restrict(gold, k));
        RetrievalCounts {
            overall: Counts::of(retrieved, gold),
            function: per(UnitKind::Function),
            class: per(UnitKind::Class),
            variable: per(UnitKind::Variable),
        }
    }

    pub fn add(&mut self, other: &RetrievalCounts) {
        self.overall.add(other.overall);
        self.function.add(other.function);
        self.class.add(other.class);
        self.variable.add(other.variable);
    }

    pub fn eval(&self) -> RetrievalEval {
        let precision = self.overall.precision();
        let recall = self.overall.recall().unwrap_or(0.0);
        RetrievalEval {
            precision,
            recall,
            f1: f1(precision, recall),
            frecall: self.function.recall(),
            crecall: self.class.recall(),
            vrecall: self.variable.recall(),
        }
    }
}

pub fn retrieval_eval(retrieved: &BTreeSet<String>, gold: &BTreeSet<String>) -> Result<RetrievalEval> {
    if gold.is_empty() {
        return Err(Error::Precondition("retrieval evaluation needs a non-empty gold set".into()));
    }
    Ok(RetrievalCounts::of(retrieved, gold).eval())
}

/// Unbiased estimate of the chance that at least one of `k` samples drawn
/// without replacement from `n` (of which `c` pass) passes.
pub fn pass_at_k(n: usize, c: usize, k: usize) -> Result<f64> {
    if k == 0 || k > n {
        return Err(Error::InvalidParameter(format!("pass@k needs 1 <= k <= n, got k={k}, n={n}")));
    }
    if c > n {
        return Err(Error::InvalidParameter(format!("c={c} exceeds n={n}")));
    }
    if n - c < k {
        return Ok(1.0);
    }
    let miss: f64 = (n - c + 1..=n).map(|i| 1.0 - k as f64 / i as f64).product();
    Ok(1.0 - miss)
}

pub fn dir(invoked: &BTreeSet<String>, gold: &BTreeSet<String>) -> Result<f64> {
    if gold.is_empty() {
        return Err(Error::Precondition("invocation rate needs a non-empty gold set".into()));
    }
    Ok(invoked.intersection(gold).count() as f64 / gold.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirOutcome {
    pub value: f64,
    pub invoked: BTreeSet<String>,
    /// The generated code did not parse; `value` is 0.
    pub parse_error: bool,
}

/// Invocation rate of a generated function body, analysed as if it sat in
/// the anchor's file with the anchor's candidate scope.
pub fn dir_for_solution(
    graph: &CodeGraph,
    anchor_id: &str,
    generated: &str,
    gold: &BTreeSet<String>,
) -> Result<DirOutcome> {
    let scope = candidate_scope(graph, anchor_id, &ScopeOptions::default())?;
    let file = graph.lookup(anchor_id).map(|u| u.file_path()).unwrap_or_default();
    let analysis = analyze_source(graph, file, generated, &scope.candidate_ids);
    if analysis.had_errors {
        return Ok(DirOutcome {
            value: 0.0,
            invoked: analysis.dependencies,
            parse_error: true,
        });
    }
    Ok(DirOutcome {
        value: dir(&analysis.dependencies, gold)?,
        invoked: analysis.dependencies,
        parse_error: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencySummary {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub median: f64,
}

pub fn latency_summary(samples: &[f64]) -> Result<LatencySummary> {
    if samples.is_empty() {
        return Err(Error::Precondition("latency summary of no samples".into()));
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    let median = if n % 2 == 1 {
        s[n / 2]
    } else {
        (s[n / 2 - 1] + s[n / 2]) / 2.0
    };
    Ok(LatencySummary {
        min: s[0],
        max: s[n - 1],
        mean: s.iter().sum::<f64>() / n as f64,
        median,
    })
}

/// One generated sample, as written by an external test runner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub anchor_id: String,
    pub sample_index: usize,
    pub body_text: String,
    pub passed: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DirAggregate {
    #[default]
    Mean,
    BestOfN,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskReport {
    pub anchor_id: String,
    pub retrieval: Option<RetrievalEval>,
    pub pass_at_k: BTreeMap<String, f64>,
    pub dir: Option<f64>,
    pub unparseable_samples: usize,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub tasks_evaluated: usize,
    pub retrieval: Option<RetrievalEval>,
    pub retrieval_counts: RetrievalCounts,
    pub pass_at_k: BTreeMap<String, f64>,
    pub dir: Option<f64>,
    pub dir_aggregate: DirAggregate,
    pub latency: Option<LatencySummary>,
    pub tasks: Vec<TaskReport>,
}

/// What the harness needs about one task.
pub struct TaskInput<'a> {
    pub anchor_id: &'a str,
    pub retrieved: Option<&'a BTreeSet<String>>,
    pub gold: Option<&'a BTreeSet<String>>,
    pub solutions: &'a [Solution],
    pub latency_ms: Option<f64>,
}

fn evaluate_task(
    graph: &CodeGraph,
    task: &TaskInput<'_>,
    ks: &[usize],
    aggregate: DirAggregate,
) -> Result<(TaskReport, RetrievalCounts)> {
    let mut counts = RetrievalCounts::default();
    let retrieval = match (task.retrieved, task.gold) {
        (Some(r), Some(g)) if !g.is_empty() => {
            counts = RetrievalCounts::of(r, g);
            Some(counts.eval())
        }
        _ => None,
    };
    let n = task.solutions.len();
    let c = task.solutions.iter().filter(|s| s.passed).count();
    let mut pass = BTreeMap::new();
    for &k in ks {
        if k <= n {
            pass.insert(k.to_string(), pass_at_k(n, c, k)?);
        }
    }
    let mut unparseable = 0;
    let dir_value = match task.gold {
        Some(g) if !g.is_empty() && n > 0 => {
            let mut values = Vec::with_capacity(n);
            for s in task.solutions {
                let d = dir_for_solution(graph, task.anchor_id, &s.body_text, g)?;
                unparseable += d.parse_error as usize;
                values.push(d.value);
            }
            Some(match aggregate {
                DirAggregate::Mean => values.iter().sum::<f64>() / n as f64,
                DirAggregate::BestOfN => values.iter().copied().fold(0.0, f64::max),
            })
        }
        _ => None,
    };
    Ok((
        TaskReport {
            anchor_id: task.anchor_id.to_string(),
            retrieval,
            pass_at_k: pass,
            dir: dir_value,
            unparseable_samples: unparseable,
            samples: n,
        },
        counts,
    ))
}

/// Per-task metrics and their aggregates. Retrieval is micro-averaged,
/// Pass@k and DIR are means over the tasks that define them.
pub fn evaluate(graph: &CodeGraph, tasks: &[TaskInput<'_>], ks: &[usize], aggregate: DirAggregate) -> Result<EvalReport> {
    let per = crate::par::map(tasks, |t| evaluate_task(graph, t, ks, aggregate));
    let mut reports = Vec::with_capacity(tasks.len());
    let mut counts = RetrievalCounts::default();
    for r in per {
        let (report, c) = r?;
        counts.add(&c);
        reports.push(report);
    }
    let mean = |vals: Vec<f64>| (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64);
    let mut pass = BTreeMap::new();
    for &k in ks {
        let key = k.to_string();
        if let Some(m) = mean(reports.iter().filter_map(|r| r.pass_at_k.get(&key).copied()).collect()) {
            pass.insert(key, m);
        }
    }
    let latencies: Vec<f64> = tasks.iter().filter_map(|t| t.latency_ms).collect();
    Ok(EvalReport {
        tasks_evaluated: reports.len(),
        retrieval: reports.iter().any(|r| r.retrieval.is_some()).then(|| counts.eval()),
        retrieval_counts: counts,
        pass_at_k: pass,
        dir: mean(reports.iter().filter_map(|r| r.dir).collect()),
        dir_aggregate: aggregate,
        latency: latency_summary(&latencies).ok(),
        tasks: reports,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(v: &[&str]) -> BTreeSet<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn retrieval_hand_values() {
        let g = set(&["a::a::Function", "a::b::Function", "a::c::Class"]);
        let e = retrieval_eval(&g, &g).unwrap();
        assert_eq!((e.precision, e.recall, e.f1), (1.0, 1.0, 1.0));
        let r = set(&["a::a::Function", "a::b::Function", "a::x::Variable"]);
        let e = retrieval_eval(&r, &g).unwrap();
        assert!((e.precision - 2.0 / 3.0).abs() < 1e-12);
        assert!((e.recall - 2.0 / 3.0).abs() < 1e-12);
        assert!((e.f1 - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(e.frecall, Some(1.0));
        assert_eq!(e.crecall, Some(0.0));
        assert_eq!(e.vrecall, None);
        let e = retrieval_eval(&BTreeSet::new(), &g).unwrap();
        assert_eq!((e.precision, e.recall, e.f1), (0.0, 0.0, 0.0));
        assert!(retrieval_eval(&g, &BTreeSet::new()).is_err());
    }

    #[test]
    fn pass_at_k_values() {
        for k in 1..=5 {
            assert_eq!(pass_at_k(5, 0, k).unwrap(), 0.0);
            assert_eq!(pass_at_k(5, 5, k).unwrap(), 1.0);
        }
        assert!((pass_at_k(5, 2, 1).unwrap() - 0.4).abs() < 1e-12);
        assert!(pass_at_k(3, 1, 4).is_err());
        assert!(pass_at_k(3, 4, 1).is_err());
    }

    #[test]
    fn dir_values() {
        let gold = set(&["a", "b", "c"]);
        assert!((dir(&set(&["a", "b"]), &gold).unwrap() - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(dir(&BTreeSet::new(), &gold).unwrap(), 0.0);
        assert_eq!(dir(&set(&["a", "b", "c", "z"]), &gold).unwrap(), 1.0);
        assert!(dir(&gold, &BTreeSet::new()).is_err());
    }

    #[test]
    fn latency_values() {
        let s = latency_summary(&[10.0]).unwrap();
        assert_eq!((s.min, s.max, s.mean, s.median), (10.0, 10.0, 10.0, 10.0));
        let s = latency_summary(&[100.0, 2.0, 1.0, 3.0]).unwrap();
        assert_eq!((s.min, s.max, s.mean, s.median), (1.0, 100.0, 26.5, 2.5));
        assert!(latency_summary(&[]).is_err());
    }

    #[test]
    fn kind_from_id() {
        assert_eq!(kind_of("a.py::A.m::Function"), Some(UnitKind::Function));
        assert_eq!(kind_of("a.py::X::Variable"), Some(UnitKind::Variable));
        assert_eq!(kind_of("weird"), None);
    }
}
