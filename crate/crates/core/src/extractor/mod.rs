//! Python source indexing: walks a repository, parses each file with a
//! full-grammar parser and emits code units plus resolved import edges.

mod imports;
mod python;

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use globset::{Glob, GlobSet, GlobSetBuilder};
use serde::Serialize;
use walkdir::WalkDir;

pub use imports::{extract_imports, extract_imports_with_diagnostics, RepoFiles};
pub use python::{extract_units, parse_python, ParsedFile};
pub(crate) use python::{definition_of, named_children, target_names};

use crate::error::{Error, Result};
use crate::graph::{CodeGraph, CodeUnit};
use crate::par;

pub const PYTHON_EXTENSION: &str = "py";

pub const DEFAULT_IGNORES: &[&str] = &[
    "**/.git/**",
    "**/.hg/**",
    "**/__pycache__/**",
    "**/.venv/**",
    "**/venv/**",
    "**/.tox/**",
    "**/.nox/**",
    "**/.mypy_cache/**",
    "**/.pytest_cache/**",
    "**/site-packages/**",
    "**/node_modules/**",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosticKind {
    Read,
    Parse,
    UnresolvedImport,
    DuplicateId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub file: String,
    pub line: Option<usize>,
    pub kind: DiagnosticKind,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "{}:{}: {}", self.file, line, self.message),
            None => write!(f, "{}: {}", self.file, self.message),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExtractOptions {
    /// Extra glob patterns matched against repo-relative paths.
    pub ignore: Vec<String>,
    pub default_ignores: bool,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        ExtractOptions {
            ignore: Vec::new(),
            default_ignores: true,
        }
    }
}

impl ExtractOptions {
    fn globset(&self) -> Result<GlobSet> {
        let mut builder = GlobSetBuilder::new();
        let defaults = DEFAULT_IGNORES.iter().filter(|_| self.default_ignores).map(|s| s.to_string());
        for pattern in defaults.chain(self.ignore.iter().cloned()) {
            let glob = Glob::new(&pattern)
                .map_err(|e| Error::InvalidParameter(format!("ignore glob {pattern:?}: {e}")))?;
            builder.add(glob);
        }
        builder
            .build()
            .map_err(|e| Error::InvalidParameter(format!("ignore globs: {e}")))
    }
}

pub struct BuildOutput {
    pub graph: CodeGraph,
    pub diagnostics: Vec<Diagnostic>,
}

/// Repo-relative paths (`/`-separated, sorted) of every Python file under
/// `root` that survives the ignore globs.
pub fn discover_files(root: &Path, options: &ExtractOptions) -> Result<Vec<String>> {
    let meta = std::fs::metadata(root).map_err(|e| Error::io(root, e))?;
    if !meta.is_dir() {
        return Err(Error::io(
            root,
            std::io::Error::new(std::io::ErrorKind::NotADirectory, "repository root is not a directory"),
        ));
    }
    std::fs::read_dir(root).map_err(|e| Error::io(root, e))?;
    let globs = options.globset()?;
    let rel = |p: &Path| -> String {
        p.strip_prefix(root)
            .unwrap_or(p)
            .components()
            .map(|c| c.as_os_str().to_string_lossy())
            .collect::<Vec<_>>()
            .join("/")
    };
    let mut files = Vec::new();
    let walker = WalkDir::new(root)
        .sort_by_file_name()
        .into_iter()
        .filter_entry(|entry| {
            if entry.depth() == 0 || !entry.file_type().is_dir() {
                return true;
            }
            !globs.is_match(format!("{}/_", rel(entry.path())))
        });
    for entry in walker {
        let entry = match entry {
            Ok(e) => e,
            Err(e) => {
                log::warn!("skipping unreadable entry: {e}");
                continue;
            }
        };
        if !entry.file_type().is_file() {
            continue;
        }
        if entry.path().extension().and_then(|e| e.to_str()) != Some(PYTHON_EXTENSION) {
            continue;
        }
        let path = rel(entry.path());
        if globs.is_match(&path) {
            continue;
        }
        files.push(path);
    }
    files.sort();
    Ok(files)
}

struct FileResult {
    units: Vec<CodeUnit>,
    edges: Vec<crate::graph::ImportEdge>,
    diagnostics: Vec<Diagnostic>,
}

fn index_file(root: &Path, path: &str, repo: &RepoFiles) -> FileResult {
    let full = root.join(path);
    let bytes = match std::fs::read(&full) {
        Ok(b) => b,
        Err(e) => {
            return FileResult {
                units: vec![],
                edges: vec![],
                diagnostics: vec![Diagnostic {
                    file: path.to_string(),
                    line: None,
                    kind: DiagnosticKind::Read,
                    message: format!("cannot read file: {e}"),
                }],
            }
        }
    };
    let source = match String::from_utf8(bytes) {
        Ok(s) => s,
        Err(_) => {
            return FileResult {
                units: vec![],
                edges: vec![],
                diagnostics: vec![Diagnostic {
                    file: path.to_string(),
                    line: None,
                    kind: DiagnosticKind::Read,
                    message: "file is not valid UTF-8".into(),
                }],
            }
        }
    };
    let parsed = ParsedFile::parse(path, source);
    let mut diagnostics: Vec<Diagnostic> = parsed
        .parse_errors
        .iter()
        .map(|(line, msg)| Diagnostic {
            file: path.to_string(),
            line: Some(*line),
            kind: DiagnosticKind::Parse,
            message: msg.clone(),
        })
        .collect();

    // Later definitions rebind the name, so the last one wins.
    let mut units = extract_units(&parsed);
    let mut last: HashMap<&str, usize> = HashMap::new();
    for (i, u) in units.iter().enumerate() {
        last.insert(u.id.as_str(), i);
    }
    let keep: Vec<bool> = units
        .iter()
        .enumerate()
        .map(|(i, u)| last[u.id.as_str()] == i)
        .collect();
    for (u, k) in units.iter().zip(&keep) {
        if !k {
            diagnostics.push(Diagnostic {
                file: path.to_string(),
                line: Some(u.span.start_line),
                kind: DiagnosticKind::DuplicateId,
                message: format!("duplicate unit {}; keeping the last definition", u.id),
            });
        }
    }
    let mut k = keep.into_iter();
    units.retain(|_| k.next().unwrap_or(false));

    let (edges, import_diags) = extract_imports_with_diagnostics(&parsed, repo);
    diagnostics.extend(import_diags);
    FileResult {
        units,
        edges,
        diagnostics,
    }
}

/// Indexes every Python file under `repo_root`. `repo_root` is recorded in
/// the graph exactly as given.
pub fn build_graph(repo_root: &Path, options: &ExtractOptions) -> Result<BuildOutput> {
    let files = discover_files(repo_root, options)?;
    let repo = RepoFiles::new(&files);
    let results = par::map(&files, |path| index_file(repo_root, path, &repo));

    let mut units = Vec::new();
    let mut edges = Vec::new();
    let mut diagnostics = Vec::new();
    for r in results {
        units.extend(r.units);
        edges.extend(r.edges);
        diagnostics.extend(r.diagnostics);
    }
    let mut seen = HashMap::new();
    for u in &units {
        if let Some(prev) = seen.insert(u.id.clone(), u.span.file_path.clone()) {
            return Err(Error::InvalidGraph(format!("unit id collision {} (also in {prev})", u.id)));
        }
    }
    let graph = CodeGraph::new(repo_root.to_string_lossy().into_owned(), files, units, edges)?;
    Ok(BuildOutput { graph, diagnostics })
}
