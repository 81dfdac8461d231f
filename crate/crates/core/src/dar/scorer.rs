//! Pairwise scorers: anything that maps a (query, candidate) pair to the
//! probability that the candidate is a true dependency.

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::graph::{CodeGraph, CodeUnit};
use crate::oracle::{analyze_dependencies, candidate_scope, ScopeOptions};
use crate::retrieval::tokenize;

pub const TIMEOUT_ENV: &str = "REPOGRAPH_SCORER_TIMEOUT_MS";
pub const DEFAULT_TIMEOUT_MS: u64 = 30_000;

pub struct ScoreRequest<'a> {
    pub anchor_id: &'a str,
    pub query_text: &'a str,
    pub candidate: &'a CodeUnit,
    /// The candidate lives in the anchor's own file.
    pub same_file: bool,
}

pub trait Scorer: Send + Sync {
    /// One probability per request, in request order.
    fn score(&self, batch: &[ScoreRequest<'_>]) -> Result<Vec<f64>, String>;
}

impl<S: Scorer + ?Sized> Scorer for Arc<S> {
    fn score(&self, batch: &[ScoreRequest<'_>]) -> Result<Vec<f64>, String> {
        (**self).score(batch)
    }
}

impl<S: Scorer + ?Sized> Scorer for Box<S> {
    fn score(&self, batch: &[ScoreRequest<'_>]) -> Result<Vec<f64>, String> {
        (**self).score(batch)
    }
}

pub struct ConstantScorer(pub f64);

impl Scorer for ConstantScorer {
    fn score(&self, batch: &[ScoreRequest<'_>]) -> Result<Vec<f64>, String> {
        Ok(vec![self.0; batch.len()])
    }
}

/// Probability 1 for candidates the static analysis finds in the anchor's
/// body, 0 otherwise.
pub struct OracleScorer<'g> {
    graph: &'g CodeGraph,
    cache: Mutex<HashMap<String, Arc<HashSet<String>>>>,
}

impl<'g> OracleScorer<'g> {
    pub fn new(graph: &'g CodeGraph) -> Self {
        OracleScorer {
            graph,
            cache: Mutex::new(HashMap::new()),
        }
    }

    fn deps(&self, anchor: &str) -> Result<Arc<HashSet<String>>, String> {
        if let Some(d) = self.cache.lock().unwrap().get(anchor) {
            return Ok(d.clone());
        }
        let scope = candidate_scope(self.graph, anchor, &ScopeOptions::default()).map_err(|e| e.to_string())?;
        let deps: HashSet<String> = analyze_dependencies(self.graph, anchor, &scope)
            .map_err(|e| e.to_string())?
            .into_iter()
            .collect();
        let deps = Arc::new(deps);
        self.cache.lock().unwrap().insert(anchor.to_string(), deps.clone());
        Ok(deps)
    }
}

impl Scorer for OracleScorer<'_> {
    fn score(&self, batch: &[ScoreRequest<'_>]) -> Result<Vec<f64>, String> {
        batch
            .iter()
            .map(|r| {
                let deps = self.deps(r.anchor_id)?;
                Ok(if deps.contains(&r.candidate.id) { 1.0 } else { 0.0 })
            })
            .collect()
    }
}

const STOPWORDS: &[&str] = &[
    "a", "an", "and", "as", "async", "class", "def", "for", "from", "if", "in", "is", "it", "none", "of", "on", "or",
    "return", "returns", "self", "the", "to", "true", "false", "when", "with", "cls", "str", "int", "bool",
];

fn content_tokens(text: &str) -> HashSet<String> {
    tokenize(text)
        .into_iter()
        .filter(|t| t.len() > 1 && !STOPWORDS.contains(&t.as_str()))
        .collect()
}

fn coverage(part: &HashSet<String>, whole: &HashSet<String>) -> f64 {
    if part.is_empty() {
        return 0.0;
    }
    part.intersection(whole).count() as f64 / part.len() as f64
}

/// Logistic model over lexical overlap features. Needs no training data and
/// keeps the pipeline runnable without an external model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeuristicScorer {
    pub bias: f64,
    pub name_weight: f64,
    pub signature_weight: f64,
    pub docstring_weight: f64,
    pub same_file_weight: f64,
}

impl Default for HeuristicScorer {
    fn default() -> Self {
        HeuristicScorer {
            bias: -3.0,
            name_weight: 5.0,
            signature_weight: 1.5,
            docstring_weight: 2.0,
            same_file_weight: 0.75,
        }
    }
}

impl HeuristicScorer {
    pub fn probability(&self, query_text: &str, candidate: &CodeUnit, same_file: bool) -> f64 {
        let query = content_tokens(query_text);
        let name: HashSet<String> = tokenize(candidate.name()).into_iter().filter(|t| t.len() > 1).collect();
        let signature = content_tokens(&candidate.signature);
        let doc = candidate.docstring.as_deref().map(content_tokens).unwrap_or_default();
        let z = self.bias
            + self.name_weight * coverage(&name, &query)
            + self.signature_weight * coverage(&signature, &query)
            + self.docstring_weight * coverage(&doc, &query)
            + if same_file { self.same_file_weight } else { 0.0 };
        1.0 / (1.0 + (-z).exp())
    }
}

impl Scorer for HeuristicScorer {
    fn score(&self, batch: &[ScoreRequest<'_>]) -> Result<Vec<f64>, String> {
        Ok(batch
            .iter()
            .map(|r| self.probability(r.query_text, r.candidate, r.same_file))
            .collect())
    }
}

/// Counts scored pairs and batches passing through the inner scorer.
pub struct CountingScorer<S> {
    inner: S,
    pairs: AtomicUsize,
    batches: AtomicUsize,
}

impl<S: Scorer> CountingScorer<S> {
    pub fn new(inner: S) -> Self {
        CountingScorer {
            inner,
            pairs: AtomicUsize::new(0),
            batches: AtomicUsize::new(0),
        }
    }

    pub fn pairs(&self) -> usize {
        self.pairs.load(Ordering::SeqCst)
    }

    pub fn batches(&self) -> usize {
        self.batches.load(Ordering::SeqCst)
    }

    pub fn reset(&self) {
        self.pairs.store(0, Ordering::SeqCst);
        self.batches.store(0, Ordering::SeqCst);
    }
}

impl<S: Scorer> Scorer for CountingScorer<S> {
    fn score(&self, batch: &[ScoreRequest<'_>]) -> Result<Vec<f64>, String> {
        self.pairs.fetch_add(batch.len(), Ordering::SeqCst);
        self.batches.fetch_add(1, Ordering::SeqCst);
        self.inner.score(batch)
    }
}

#[derive(Serialize)]
struct WireRequest<'a> {
    id: String,
    query_text: &'a str,
    candidate_text: String,
}

#[derive(Deserialize)]
struct WireResponse {
    id: String,
    probability: f64,
}

struct Worker {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
}

impl Worker {
    fn spawn(command: &str) -> Result<Worker, String> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| format!("cannot start scorer `{command}`: {e}"))?;
        let stdin = child.stdin.take().ok_or("scorer stdin unavailable")?;
        let stdout = child.stdout.take().ok_or("scorer stdout unavailable")?;
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(Worker {
            child,
            stdin,
            lines: rx,
        })
    }

    fn exchange(&mut self, batch: &[ScoreRequest<'_>], first_id: usize, timeout: Duration) -> Result<Vec<f64>, String> {
        let mut payload = Vec::new();
        for (i, r) in batch.iter().enumerate() {
            let req = WireRequest {
                id: (first_id + i).to_string(),
                query_text: r.query_text,
                candidate_text: r.candidate.document_text(),
            };
            serde_json::to_writer(&mut payload, &req).map_err(|e| e.to_string())?;
            payload.push(b'\n');
        }
        self.stdin
            .write_all(&payload)
            .and_then(|_| self.stdin.flush())
            .map_err(|e| format!("writing to scorer: {e}"))?;

        let deadline = Instant::now() + timeout;
        let mut out = vec![f64::NAN; batch.len()];
        let mut remaining = batch.len();
        while remaining > 0 {
            let left = deadline.saturating_duration_since(Instant::now());
            let line = match self.lines.recv_timeout(left) {
                Ok(Ok(line)) => line,
                Ok(Err(e)) => return Err(format!("reading from scorer: {e}")),
                Err(RecvTimeoutError::Timeout) => {
                    return Err(format!("timed out after {} ms", timeout.as_millis()))
                }
                Err(RecvTimeoutError::Disconnected) => return Err("scorer exited before answering".into()),
            };
            if line.trim().is_empty() {
                continue;
            }
            let resp: WireResponse =
                serde_json::from_str(&line).map_err(|e| format!("bad scorer response {line:?}: {e}"))?;
            let slot = resp
                .id
                .parse::<usize>()
                .ok()
                .and_then(|n| n.checked_sub(first_id))
                .filter(|i| *i < batch.len())
                .ok_or_else(|| format!("scorer answered unknown id {:?}", resp.id))?;
            if !out[slot].is_nan() {
                return Err(format!("scorer answered id {} twice", resp.id));
            }
            out[slot] = resp.probability;
            remaining -= 1;
        }
        Ok(out)
    }
}

impl Drop for Worker {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// External scorer process speaking line-delimited JSON. Requests are
/// `{id, query_text, candidate_text}`, answers `{id, probability}` in any
/// order. Each instance serves one batch at a time; a small pool lets
/// distinct queries score concurrently.
pub struct SubprocessScorer {
    command: String,
    timeout: Duration,
    pool: Vec<Mutex<Option<Worker>>>,
    next: AtomicUsize,
    ids: AtomicUsize,
}

impl SubprocessScorer {
    pub fn new(command: impl Into<String>, instances: usize, timeout: Duration) -> Self {
        SubprocessScorer {
            command: command.into(),
            timeout,
            pool: (0..instances.max(1)).map(|_| Mutex::new(None)).collect(),
            next: AtomicUsize::new(0),
            ids: AtomicUsize::new(0),
        }
    }

    /// Timeout from the environment, or the default.
    pub fn timeout_from_env() -> Duration {
        let ms = std::env::var(TIMEOUT_ENV)
            .ok()
            .and_then(|v| v.trim().parse().ok())
            .unwrap_or(DEFAULT_TIMEOUT_MS);
        Duration::from_millis(ms)
    }
}

impl Scorer for SubprocessScorer {
    fn score(&self, batch: &[ScoreRequest<'_>]) -> Result<Vec<f64>, String> {
        if batch.is_empty() {
            return Ok(Vec::new());
        }
        let mut slot = self
            .pool
            .iter()
            .find_map(|m| m.try_lock().ok())
            .unwrap_or_else(|| {
                let i = self.next.fetch_add(1, Ordering::Relaxed) % self.pool.len();
                self.pool[i].lock().unwrap_or_else(|p| p.into_inner())
            });
        if slot.is_none() {
            *slot = Some(Worker::spawn(&self.command)?);
        }
        let first_id = self.ids.fetch_add(batch.len(), Ordering::Relaxed);
        let result = slot.as_mut().map(|w| w.exchange(batch, first_id, self.timeout));
        match result {
            Some(Ok(v)) => Ok(v),
            Some(Err(e)) => {
                // The process state is unknown after a failure; start fresh next time.
                *slot = None;
                Err(e)
            }
            None => Err("scorer unavailable".into()),
        }
    }
}
