//! Command-line front end. Machine-readable results go to stdout or the
//! `--out` file; logs and diagnostics go to stderr.

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::chunker::{ChunkIndex, DEFAULT_CHUNK_SIZE, DEFAULT_OVERLAP};
use crate::dar::{
    dar_retrieve, parse_grid, tune_threshold, ConstantScorer, DarConfig, HeuristicScorer, OracleScorer,
    ScoredCandidate, ScoredPair, Scorer, SubprocessScorer, DEFAULT_BATCH_SIZE, DEFAULT_GRID, DEFAULT_THRESHOLD,
};
use crate::eval::{evaluate, latency_summary, DirAggregate, Solution, TaskInput};
use crate::extractor::{build_graph, ExtractOptions};
use crate::graph::{CodeGraph, UnitKind};
use crate::hydra::{hydra_retrieve, leaks_anchor, HydraConfig, RetrievedContext, DEFAULT_BUDGET, DEFAULT_K_SIM};
use crate::oracle::{
    analyze_dependencies, build_triplets, candidate_scope, expand_pairs, gold_from_triplets, split_and_balance,
    Query, ScopeOptions, Triplet,
};
use crate::retrieval::{cosine_rank, read_embeddings, unit_index, Bm25Index, Bm25Params, RankedHit};
use crate::{jsonl, par};

#[derive(Parser, Debug)]
#[command(name = "repograph", version, about = "Structure-aware code retrieval toolkit")]
pub struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// More logging on stderr (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Index a repository into units or chunks.
    Index(IndexArgs),
    /// Mine training triplets and split them.
    BuildDataset(BuildDatasetArgs),
    /// Pick the threshold with the best balanced recall penalty.
    TuneThreshold(TuneArgs),
    /// Retrieve context for tasks.
    Retrieve(RetrieveArgs),
    /// Compute retrieval, Pass@k, invocation-rate and latency metrics.
    Evaluate(EvaluateArgs),
    /// Time retrieval over a task set.
    Bench(BenchArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum IndexMode {
    Units,
    Chunks,
}

#[derive(Args, Debug)]
struct IndexArgs {
    repo_root: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Extra ignore glob, matched against repo-relative paths.
    #[arg(long)]
    ignore: Vec<String>,
    #[arg(long)]
    no_default_ignores: bool,
    #[arg(long, value_enum, default_value_t = IndexMode::Units)]
    mode: IndexMode,
    #[arg(long, default_value_t = DEFAULT_CHUNK_SIZE)]
    chunk_size: usize,
    #[arg(long, default_value_t = DEFAULT_OVERLAP)]
    overlap: f64,
}

#[derive(Args, Debug, Clone)]
struct ScopeArgs {
    /// Candidate kinds, comma separated (function,class,variable).
    #[arg(long, value_delimiter = ',')]
    kinds: Vec<String>,
    /// Leave methods out of candidate scopes.
    #[arg(long)]
    no_methods: bool,
}

impl ScopeArgs {
    fn options(&self) -> anyhow::Result<ScopeOptions> {
        let mut opts = ScopeOptions::default();
        if !self.kinds.is_empty() {
            let kinds = self
                .kinds
                .iter()
                .map(|k| UnitKind::parse(k).ok_or_else(|| anyhow!("unknown unit kind {k:?}")))
                .collect::<anyhow::Result<BTreeSet<_>>>()?;
            opts.kinds = kinds;
        }
        opts.include_methods = !self.no_methods;
        Ok(opts)
    }
}

#[derive(Args, Debug)]
struct BuildDatasetArgs {
    index: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Directory for train/validation/test files and stats.
    #[arg(long)]
    split_out: Option<PathBuf>,
    #[command(flatten)]
    scope: ScopeArgs,
}

#[derive(Args, Debug)]
struct TuneArgs {
    /// Scored pairs, JSON lines with `probability` and `label`.
    #[arg(long)]
    scored: PathBuf,
    #[arg(long, default_value = DEFAULT_GRID)]
    grid: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
struct ScorerArgs {
    /// Built-in scorer: heuristic, oracle or constant:<p>.
    #[arg(long, default_value = "heuristic")]
    scorer: String,
    /// External scorer command speaking JSON lines; overrides --scorer.
    #[arg(long)]
    scorer_cmd: Option<String>,
    #[arg(long, default_value_t = DEFAULT_BATCH_SIZE)]
    batch_size: usize,
}

impl ScorerArgs {
    fn build<'g>(&self, graph: &'g CodeGraph) -> anyhow::Result<Box<dyn Scorer + 'g>> {
        if let Some(cmd) = &self.scorer_cmd {
            let timeout = SubprocessScorer::timeout_from_env();
            return Ok(Box::new(SubprocessScorer::new(cmd.clone(), par::num_threads(), timeout)));
        }
        match self.scorer.as_str() {
            "heuristic" => Ok(Box::new(HeuristicScorer::default())),
            "oracle" => Ok(Box::new(OracleScorer::new(graph))),
            other => match other.strip_prefix("constant:") {
                Some(p) => {
                    let p: f64 = p.parse().with_context(|| format!("bad constant probability {p:?}"))?;
                    if !(0.0..=1.0).contains(&p) {
                        bail!("constant probability must be in [0, 1]");
                    }
                    Ok(Box::new(ConstantScorer(p)))
                }
                None => bail!("unknown scorer {other:?} (expected heuristic, oracle or constant:<p>)"),
            },
        }
    }
}

#[derive(Args, Debug, Clone)]
struct Bm25Args {
    #[arg(long, default_value_t = 1.5)]
    k1: f64,
    #[arg(long, default_value_t = 0.75)]
    b: f64,
}

impl Bm25Args {
    fn params(&self) -> anyhow::Result<Bm25Params> {
        Ok(Bm25Params::new(self.k1, self.b)?)
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum RetrieveMode {
    Bm25,
    Dense,
    Dar,
    Hydra,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum QuerySource {
    /// Signature and docstring.
    Task,
    /// Task text plus the other units of the anchor's file.
    Context,
}

#[derive(Args, Debug)]
struct RetrieveArgs {
    #[arg(long, value_enum)]
    mode: RetrieveMode,
    #[arg(long)]
    index: PathBuf,
    /// Tasks as JSON lines with `anchor_id` (and optional `text`); triplet files work too.
    #[arg(long)]
    tasks: Option<PathBuf>,
    /// A single free-text query (bm25 and dense modes).
    #[arg(long, conflicts_with = "tasks")]
    query_file: Option<PathBuf>,
    /// Unit index used to keep chunks that overlap the anchor out of results.
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_K_SIM)]
    k: usize,
    #[command(flatten)]
    bm25: Bm25Args,
    #[arg(long, value_enum, default_value_t = QuerySource::Task)]
    bm25_query: QuerySource,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: f64,
    #[command(flatten)]
    scorer: ScorerArgs,
    #[command(flatten)]
    scope: ScopeArgs,
    /// Prompt budget in characters.
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    budget: usize,
    /// Write null latencies so output is byte-reproducible.
    #[arg(long)]
    no_latency: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    /// dar mode: also write every scored pair with its gold label.
    #[arg(long)]
    pairs_out: Option<PathBuf>,
    /// Gold dependencies (triplets file) for --pairs-out; the static oracle otherwise.
    #[arg(long)]
    gold: Option<PathBuf>,
    /// Document embeddings, JSON lines {doc_id, vector}.
    #[arg(long)]
    embeddings: Option<PathBuf>,
    /// Query embeddings keyed by anchor id (or "query" for --query-file).
    #[arg(long)]
    query_embeddings: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum DirChoice {
    Mean,
    BestOfN,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long)]
    index: PathBuf,
    /// Retrieval output (hydra, dar or bm25 records).
    #[arg(long)]
    contexts: Option<PathBuf>,
    /// Restrict evaluation to these tasks.
    #[arg(long)]
    tasks: Option<PathBuf>,
    /// Gold dependencies as a triplets file; the static oracle otherwise.
    #[arg(long)]
    gold_deps: Option<PathBuf>,
    /// Generated samples: {anchor_id, sample_index, body_text, passed}.
    #[arg(long)]
    solutions: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', default_value = "1,5")]
    k: Vec<usize>,
    #[arg(long, value_enum, default_value_t = DirChoice::Mean)]
    dir: DirChoice,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum BenchMode {
    Hydra,
    Bm25,
    Dar,
    Chunks,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long)]
    index: PathBuf,
    #[arg(long)]
    tasks: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: BenchMode,
    /// Chunk index for chunks mode.
    #[arg(long)]
    chunks: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    repeat: usize,
    #[arg(long, default_value_t = DEFAULT_K_SIM)]
    k: usize,
    #[command(flatten)]
    bm25: Bm25Args,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    threshold: f64,
    #[command(flatten)]
    scorer: ScorerArgs,
    #[command(flatten)]
    scope: ScopeArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

enum LoadedIndex {
    Units(CodeGraph),
    Chunks(ChunkIndex),
}

fn load_index(path: &Path) -> anyhow::Result<LoadedIndex> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading index {}", path.display()))?;
    let value: Value = serde_json::from_str(&text).with_context(|| format!("parsing index {}", path.display()))?;
    if value.get("chunks").is_some() {
        Ok(LoadedIndex::Chunks(serde_json::from_value(value)?))
    } else {
        let graph: CodeGraph =
            serde_json::from_value(value).with_context(|| format!("loading index {}", path.display()))?;
        Ok(LoadedIndex::Units(graph))
    }
}

fn load_graph(path: &Path) -> anyhow::Result<CodeGraph> {
    match load_index(path)? {
        LoadedIndex::Units(g) => Ok(g),
        LoadedIndex::Chunks(_) => bail!("{} is a chunk index; this command needs a unit index", path.display()),
    }
}

fn emit(out: Option<&Path>, bytes: &[u8]) -> anyhow::Result<()> {
    match out {
        Some(p) => std::fs::write(p, bytes).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn emit_json<T: Serialize>(out: Option<&Path>, value: &T) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    emit(out, text.as_bytes())
}

fn emit_jsonl<T: Serialize>(out: Option<&Path>, items: &[T]) -> anyhow::Result<()> {
    let mut buf = Vec::new();
    jsonl::to_writer(&mut buf, items)?;
    emit(out, &buf)
}

fn check_inputs(paths: &[Option<&Path>]) -> anyhow::Result<()> {
    for p in paths.iter().flatten() {
        if !p.exists() {
            bail!("input file {} does not exist", p.display());
        }
    }
    Ok(())
}

#[derive(Debug, Clone)]
struct Task {
    anchor_id: Option<String>,
    text: String,
}

fn load_tasks(path: &Path, graph: Option<&CodeGraph>) -> anyhow::Result<Vec<Task>> {
    let rows: Vec<Value> = jsonl::read(path)?;
    let mut tasks = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        let field = |name: &str| {
            row.get(name)
                .or_else(|| row.get("query").and_then(|q| q.get(name)))
                .and_then(Value::as_str)
                .map(str::to_string)
        };
        let anchor_id = field("anchor_id");
        let text = match (field("text"), &anchor_id, graph) {
            (Some(t), _, _) => t,
            (None, Some(id), Some(g)) => {
                Query::for_unit(g.lookup(id).ok_or_else(|| anyhow!("task {}: unknown anchor {id}", i + 1))?).text
            }
            _ => bail!("{}: task {} has no text and no resolvable anchor", path.display(), i + 1),
        };
        tasks.push(Task { anchor_id, text });
    }
    Ok(tasks)
}

fn default_tasks(graph: &CodeGraph) -> Vec<Task> {
    graph
        .function_units()
        .map(|u| {
            let q = Query::for_unit(u);
            Task {
                anchor_id: Some(q.anchor_id),
                text: q.text,
            }
        })
        .collect()
}

fn resolve_tasks(tasks: Option<&Path>, query_file: Option<&Path>, graph: Option<&CodeGraph>) -> anyhow::Result<Vec<Task>> {
    if let Some(q) = query_file {
        let text = std::fs::read_to_string(q).with_context(|| format!("reading {}", q.display()))?;
        return Ok(vec![Task { anchor_id: None, text }]);
    }
    match (tasks, graph) {
        (Some(p), g) => load_tasks(p, g),
        (None, Some(g)) => Ok(default_tasks(g)),
        (None, None) => bail!("a chunk index needs --tasks or --query-file"),
    }
}

fn query_of(task: &Task) -> anyhow::Result<Query> {
    let anchor_id = task
        .anchor_id
        .clone()
        .ok_or_else(|| anyhow!("this mode needs tasks with an anchor_id"))?;
    Ok(Query {
        anchor_id,
        text: task.text.clone(),
    })
}

/// Task text plus the other units of the anchor's file.
fn context_query(graph: &CodeGraph, task: &Task) -> String {
    let Some(anchor) = task.anchor_id.as_deref().and_then(|id| graph.lookup(id)) else {
        return task.text.clone();
    };
    let mut text = task.text.clone();
    for u in graph.units_in_file(anchor.file_path()) {
        if u.is_top_level() && !leaks_anchor(u, anchor) {
            text.push('\n');
            text.push_str(&u.body_text);
        }
    }
    text
}

fn latency(start: Instant, measure: bool) -> Option<f64> {
    measure.then(|| start.elapsed().as_secs_f64() * 1000.0)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct HitsRecord {
    anchor_id: Option<String>,
    hits: Vec<RankedHit>,
    retrieval_latency_ms: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct DarRecord {
    anchor_id: String,
    scored: Vec<ScoredCandidate>,
    retained: Vec<String>,
    retrieval_latency_ms: Option<f64>,
}

/// Any retrieval record `evaluate` understands.
#[derive(Debug, Clone, Deserialize)]
struct ContextRecord {
    anchor_id: Option<String>,
    #[serde(default)]
    dependency_units: Option<Vec<String>>,
    #[serde(default)]
    retained: Option<Vec<String>>,
    #[serde(default)]
    hits: Option<Vec<RankedHit>>,
    #[serde(default)]
    retrieval_latency_ms: Option<f64>,
}

impl ContextRecord {
    fn retrieved(&self) -> BTreeSet<String> {
        if let Some(d) = &self.dependency_units {
            return d.iter().cloned().collect();
        }
        if let Some(r) = &self.retained {
            return r.iter().cloned().collect();
        }
        self.hits.iter().flatten().map(|h| h.doc_id.clone()).collect()
    }
}

fn oracle_gold(graph: &CodeGraph, anchor: &str) -> anyhow::Result<BTreeSet<String>> {
    let scope = candidate_scope(graph, anchor, &ScopeOptions::default())?;
    Ok(analyze_dependencies(graph, anchor, &scope)?)
}

fn load_gold(path: Option<&Path>) -> anyhow::Result<Option<BTreeMap<String, BTreeSet<String>>>> {
    match path {
        Some(p) => {
            let triplets: Vec<Triplet> = jsonl::read(p)?;
            Ok(Some(gold_from_triplets(&triplets)))
        }
        None => Ok(None),
    }
}

fn cmd_index(a: &IndexArgs) -> anyhow::Result<()> {
    let opts = ExtractOptions {
        ignore: a.ignore.clone(),
        default_ignores: !a.no_default_ignores,
    };
    match a.mode {
        IndexMode::Units => {
            let out = build_graph(&a.repo_root, &opts)?;
            for d in &out.diagnostics {
                log::warn!("{d}");
            }
            log::info!(
                "indexed {} files, {} units, {} import edges",
                out.graph.files().len(),
                out.graph.units().len(),
                out.graph.import_edges().len()
            );
            let mut text = out.graph.to_json()?;
            text.push('\n');
            emit(a.out.as_deref(), text.as_bytes())
        }
        IndexMode::Chunks => {
            let index = ChunkIndex::build(&a.repo_root, &opts, a.chunk_size, a.overlap)?;
            log::info!("indexed {} files into {} chunks", index.files.len(), index.chunks.len());
            emit_json(a.out.as_deref(), &index)
        }
    }
}

fn cmd_build_dataset(a: &BuildDatasetArgs, seed: u64) -> anyhow::Result<()> {
    check_inputs(&[Some(&a.index)])?;
    let graph = load_graph(&a.index)?;
    let triplets = build_triplets(&graph, &a.scope.options()?);
    jsonl::write(&a.out, &triplets)?;
    let split = split_and_balance(&triplets, seed);
    let stats = split.stats();
    if let Some(dir) = &a.split_out {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        jsonl::write(&dir.join("train.jsonl"), &split.train)?;
        jsonl::write(&dir.join("validation.jsonl"), &split.validation)?;
        jsonl::write(&dir.join("test.jsonl"), &split.test)?;
        jsonl::write(&dir.join("train_pairs.jsonl"), &split.train_pairs)?;
        jsonl::write(&dir.join("validation_pairs.jsonl"), &expand_pairs(&split.validation))?;
        let mut text = serde_json::to_string_pretty(&stats)?;
        text.push('\n');
        std::fs::write(dir.join("stats.json"), text)?;
    }
    emit_json(None, &stats)
}

#[derive(Serialize)]
struct TuneOutput {
    threshold: f64,
    alpha: f64,
    points: Vec<crate::dar::BrpPoint>,
}

fn cmd_tune(a: &TuneArgs) -> anyhow::Result<()> {
    check_inputs(&[Some(&a.scored)])?;
    let grid = parse_grid(&a.grid)?;
    let rows: Vec<ScoredPair> = jsonl::read(&a.scored)?;
    let pairs: Vec<(f64, bool)> = rows.iter().map(|r| (r.probability, r.label == 1)).collect();
    let (threshold, points) = tune_threshold(&pairs, &grid)?;
    let alpha = points.first().map_or(0.0, |p| p.alpha);
    emit_json(a.out.as_deref(), &TuneOutput { threshold, alpha, points })
}

fn hydra_config(a: &RetrieveArgs) -> anyhow::Result<HydraConfig> {
    let cfg = HydraConfig {
        dar: DarConfig {
            threshold: a.threshold,
            scope: a.scope.options()?,
            batch_size: a.scorer.batch_size,
        },
        bm25: a.bm25.params()?,
        k_sim: a.k,
        budget: a.budget,
        measure_latency: !a.no_latency,
    };
    cfg.dar.validate()?;
    Ok(cfg)
}

fn cmd_retrieve(a: &RetrieveArgs) -> anyhow::Result<()> {
    check_inputs(&[
        Some(&a.index),
        a.tasks.as_deref(),
        a.query_file.as_deref(),
        a.graph.as_deref(),
        a.gold.as_deref(),
        a.embeddings.as_deref(),
        a.query_embeddings.as_deref(),
    ])?;
    if a.k == 0 {
        bail!("--k must be at least 1");
    }
    let index = load_index(&a.index)?;
    let measure = !a.no_latency;
    match (a.mode, index) {
        (RetrieveMode::Bm25, LoadedIndex::Units(graph)) => {
            let tasks = resolve_tasks(a.tasks.as_deref(), a.query_file.as_deref(), Some(&graph))?;
            let bm25 = unit_index(&graph)?;
            let params = a.bm25.params()?;
            let records = par::try_map(&tasks, |t| -> anyhow::Result<HitsRecord> {
                let text = match a.bm25_query {
                    QuerySource::Task => t.text.clone(),
                    QuerySource::Context => context_query(&graph, t),
                };
                let anchor = t.anchor_id.as_deref().and_then(|id| graph.lookup(id));
                let start = Instant::now();
                let hits = bm25.topk_filtered(&params, &text, a.k, |id| {
                    anchor.is_some_and(|an| graph.lookup(id).is_some_and(|u| leaks_anchor(u, an)))
                })?;
                Ok(HitsRecord {
                    anchor_id: t.anchor_id.clone(),
                    hits,
                    retrieval_latency_ms: latency(start, measure),
                })
            })?;
            emit_jsonl(a.out.as_deref(), &records)
        }
        (RetrieveMode::Bm25, LoadedIndex::Chunks(chunks)) => {
            let graph = a.graph.as_deref().map(load_graph).transpose()?;
            let tasks = resolve_tasks(a.tasks.as_deref(), a.query_file.as_deref(), graph.as_ref())?;
            let bm25 = chunks.bm25()?;
            let by_id: BTreeMap<String, &crate::chunker::Chunk> = chunks.chunks.iter().map(|c| (c.id(), c)).collect();
            let params = a.bm25.params()?;
            let records = par::try_map(&tasks, |t| -> anyhow::Result<HitsRecord> {
                let span = graph
                    .as_ref()
                    .zip(t.anchor_id.as_deref())
                    .and_then(|(g, id)| g.lookup(id))
                    .map(|u| u.span.clone());
                let start = Instant::now();
                let hits = bm25.topk_filtered(&params, &t.text, a.k, |id| match (&span, by_id.get(id)) {
                    (Some(s), Some(c)) => {
                        c.file_path == s.file_path && c.byte_start < s.end_byte && s.start_byte < c.byte_end
                    }
                    _ => false,
                })?;
                Ok(HitsRecord {
                    anchor_id: t.anchor_id.clone(),
                    hits,
                    retrieval_latency_ms: latency(start, measure),
                })
            })?;
            emit_jsonl(a.out.as_deref(), &records)
        }
        (RetrieveMode::Dense, index) => {
            let (Some(emb), Some(qemb)) = (&a.embeddings, &a.query_embeddings) else {
                bail!("dense mode needs --embeddings and --query-embeddings");
            };
            let graph = match index {
                LoadedIndex::Units(g) => Some(g),
                LoadedIndex::Chunks(_) => None,
            };
            let tasks = resolve_tasks(a.tasks.as_deref(), a.query_file.as_deref(), graph.as_ref())?;
            let docs = read_embeddings(emb)?;
            let queries = read_embeddings(qemb)?;
            let mut records = Vec::with_capacity(tasks.len());
            for t in &tasks {
                let key = t.anchor_id.as_deref().unwrap_or("query");
                let qv = queries
                    .get(key)
                    .ok_or_else(|| anyhow!("no query embedding for {key}"))?;
                let anchor = graph.as_ref().zip(t.anchor_id.as_deref()).and_then(|(g, id)| g.lookup(id));
                let start = Instant::now();
                let hits = match (anchor, graph.as_ref()) {
                    (Some(an), Some(g)) => {
                        let kept = docs
                            .iter()
                            .filter(|(id, _)| !g.lookup(id).is_some_and(|u| leaks_anchor(u, an)))
                            .map(|(id, v)| (id.clone(), v.clone()))
                            .collect();
                        cosine_rank(&kept, qv, a.k)?
                    }
                    _ => cosine_rank(&docs, qv, a.k)?,
                };
                records.push(HitsRecord {
                    anchor_id: t.anchor_id.clone(),
                    hits,
                    retrieval_latency_ms: latency(start, measure),
                });
            }
            emit_jsonl(a.out.as_deref(), &records)
        }
        (RetrieveMode::Dar, LoadedIndex::Units(graph)) => {
            let tasks = resolve_tasks(a.tasks.as_deref(), None, Some(&graph))?;
            let cfg = hydra_config(a)?.dar;
            let scorer = a.scorer.build(&graph)?;
            let records = par::try_map(&tasks, |t| -> anyhow::Result<DarRecord> {
                let q = query_of(t)?;
                let start = Instant::now();
                let out = dar_retrieve(&graph, &q, &cfg, scorer.as_ref())?;
                Ok(DarRecord {
                    anchor_id: q.anchor_id,
                    scored: out.scored,
                    retained: out.retained,
                    retrieval_latency_ms: latency(start, measure),
                })
            })?;
            if let Some(path) = &a.pairs_out {
                let gold = load_gold(a.gold.as_deref())?;
                let mut pairs = Vec::new();
                for r in &records {
                    let deps = match &gold {
                        Some(g) => g.get(&r.anchor_id).cloned().unwrap_or_default(),
                        None => oracle_gold(&graph, &r.anchor_id)?,
                    };
                    for s in &r.scored {
                        pairs.push(ScoredPair {
                            anchor_id: r.anchor_id.clone(),
                            candidate_id: s.unit_id.clone(),
                            probability: s.probability,
                            label: deps.contains(&s.unit_id) as u8,
                        });
                    }
                }
                jsonl::write(path, &pairs)?;
            }
            emit_jsonl(a.out.as_deref(), &records)
        }
        (RetrieveMode::Hydra, LoadedIndex::Units(graph)) => {
            let tasks = resolve_tasks(a.tasks.as_deref(), None, Some(&graph))?;
            let cfg = hydra_config(a)?;
            let scorer = a.scorer.build(&graph)?;
            let bm25 = unit_index(&graph)?;
            let records = par::try_map(&tasks, |t| -> anyhow::Result<RetrievedContext> {
                Ok(hydra_retrieve(&graph, &bm25, &query_of(t)?, &cfg, scorer.as_ref())?)
            })?;
            emit_jsonl(a.out.as_deref(), &records)
        }
        (mode, LoadedIndex::Chunks(_)) => bail!("{mode:?} mode needs a unit index, not a chunk index"),
    }
}

fn cmd_evaluate(a: &EvaluateArgs) -> anyhow::Result<()> {
    check_inputs(&[
        Some(&a.index),
        a.contexts.as_deref(),
        a.tasks.as_deref(),
        a.gold_deps.as_deref(),
        a.solutions.as_deref(),
    ])?;
    if a.k.contains(&0) {
        bail!("--k values must be at least 1");
    }
    let graph = load_graph(&a.index)?;
    let contexts: Vec<ContextRecord> = match &a.contexts {
        Some(p) => jsonl::read(p)?,
        None => Vec::new(),
    };
    let solutions: Vec<Solution> = match &a.solutions {
        Some(p) => jsonl::read(p)?,
        None => Vec::new(),
    };
    let gold_file = load_gold(a.gold_deps.as_deref())?;

    let mut anchors: Vec<String> = Vec::new();
    let mut seen = BTreeSet::new();
    let mut push = |id: &str| {
        if seen.insert(id.to_string()) {
            anchors.push(id.to_string());
        }
    };
    match &a.tasks {
        Some(p) => {
            for t in load_tasks(p, Some(&graph))? {
                if let Some(id) = t.anchor_id {
                    push(&id);
                }
            }
        }
        None => {
            contexts.iter().filter_map(|c| c.anchor_id.as_deref()).for_each(&mut push);
            solutions.iter().for_each(|s| push(&s.anchor_id));
        }
    }
    if anchors.is_empty() {
        bail!("nothing to evaluate: give --contexts, --solutions or --tasks");
    }

    let by_anchor: BTreeMap<&str, &ContextRecord> = contexts
        .iter()
        .filter_map(|c| c.anchor_id.as_deref().map(|id| (id, c)))
        .collect();
    let mut samples: BTreeMap<&str, Vec<Solution>> = BTreeMap::new();
    for s in &solutions {
        samples.entry(s.anchor_id.as_str()).or_default().push(s.clone());
    }
    for v in samples.values_mut() {
        v.sort_by_key(|s| s.sample_index);
    }
    let mut gold = BTreeMap::new();
    let mut retrieved = BTreeMap::new();
    for id in &anchors {
        let g = match &gold_file {
            Some(m) => m.get(id).cloned(),
            None => Some(oracle_gold(&graph, id)?),
        };
        gold.insert(id.clone(), g);
        retrieved.insert(id.clone(), by_anchor.get(id.as_str()).map(|c| c.retrieved()));
    }
    let empty = Vec::new();
    let inputs: Vec<TaskInput<'_>> = anchors
        .iter()
        .map(|id| TaskInput {
            anchor_id: id,
            retrieved: retrieved[id].as_ref(),
            gold: gold[id].as_ref(),
            solutions: samples.get(id.as_str()).unwrap_or(&empty),
            latency_ms: by_anchor.get(id.as_str()).and_then(|c| c.retrieval_latency_ms),
        })
        .collect();
    let aggregate = match a.dir {
        DirChoice::Mean => DirAggregate::Mean,
        DirChoice::BestOfN => DirAggregate::BestOfN,
    };
    let report = evaluate(&graph, &inputs, &a.k, aggregate)?;
    emit_json(a.out.as_deref(), &report)
}

#[derive(Serialize)]
struct BenchOutput {
    mode: String,
    queries: usize,
    repeat: usize,
    latency: crate::eval::LatencySummary,
}

fn cmd_bench(a: &BenchArgs) -> anyhow::Result<()> {
    check_inputs(&[Some(&a.index), a.tasks.as_deref(), a.chunks.as_deref()])?;
    if a.k == 0 || a.repeat == 0 {
        bail!("--k and --repeat must be at least 1");
    }
    let graph = load_graph(&a.index)?;
    let tasks = resolve_tasks(a.tasks.as_deref(), None, Some(&graph))?;
    let params = a.bm25.params()?;
    let dar = DarConfig {
        threshold: a.threshold,
        scope: a.scope.options()?,
        batch_size: a.scorer.batch_size,
    };
    dar.validate()?;
    let scorer = a.scorer.build(&graph)?;
    let hydra = HydraConfig {
        dar: dar.clone(),
        bm25: params,
        k_sim: a.k,
        budget: DEFAULT_BUDGET,
        measure_latency: true,
    };
    let unit_bm25 = unit_index(&graph)?;
    let chunk_bm25: Option<Bm25Index> = match (a.mode, &a.chunks) {
        (BenchMode::Chunks, Some(p)) => Some(ChunkIndex::load(p)?.bm25()?),
        (BenchMode::Chunks, None) => bail!("chunks mode needs --chunks <chunk index>"),
        _ => None,
    };
    let mut samples = Vec::with_capacity(tasks.len() * a.repeat);
    for _ in 0..a.repeat {
        for t in &tasks {
            let start = Instant::now();
            match a.mode {
                BenchMode::Bm25 => {
                    unit_bm25.topk(&params, &t.text, a.k)?;
                }
                BenchMode::Chunks => {
                    chunk_bm25.as_ref().expect("checked above").topk(&params, &t.text, a.k)?;
                }
                BenchMode::Dar => {
                    dar_retrieve(&graph, &query_of(t)?, &dar, scorer.as_ref())?;
                }
                BenchMode::Hydra => {
                    let ctx = hydra_retrieve(&graph, &unit_bm25, &query_of(t)?, &hydra, scorer.as_ref())?;
                    samples.push(ctx.retrieval_latency_ms.unwrap_or(0.0));
                    continue;
                }
            }
            samples.push(start.elapsed().as_secs_f64() * 1000.0);
        }
    }
    let latency = latency_summary(&samples).context("no tasks to time")?;
    emit_json(
        a.out.as_deref(),
        &BenchOutput {
            mode: format!("{:?}", a.mode).to_lowercase(),
            queries: tasks.len(),
            repeat: a.repeat,
            latency,
        },
    )
}

fn dispatch(cli: &Cli) -> anyhow::Result<()> {
    match &cli.command {
        Command::Index(a) => cmd_index(a),
        Command::BuildDataset(a) => cmd_build_dataset(a, cli.seed),
        Command::TuneThreshold(a) => cmd_tune(a),
        Command::Retrieve(a) => cmd_retrieve(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Bench(a) => cmd_bench(a),
    }
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new()
        .filter_level(level)
        .parse_env("RUST_LOG")
        .target(env_logger::Target::Stderr)
        .try_init();
}

/// Exit codes: 0 success, 1 usage error, 2 runtime failure.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    init_logging(cli.verbose);
    match par::with_jobs(cli.jobs, || dispatch(&cli)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            2
        }
    }
}
