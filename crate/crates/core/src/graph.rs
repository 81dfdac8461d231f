//! Structural model of an indexed repository: code units (functions, classes,
//! module-level variables) plus file-level import edges.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Location of a unit inside its file. Lines are 1-based and inclusive,
/// bytes are a half-open range into the raw file contents.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SourceSpan {
    pub file_path: String,
    pub start_line: usize,
    pub end_line: usize,
    pub start_byte: usize,
    pub end_byte: usize,
}

impl SourceSpan {
    pub fn contains(&self, other: &SourceSpan) -> bool {
        self.file_path == other.file_path
            && self.start_byte <= other.start_byte
            && other.end_byte <= self.end_byte
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum UnitKind {
    Function,
    Class,
    Variable,
}

impl UnitKind {
    pub const ALL: [UnitKind; 3] = [UnitKind::Function, UnitKind::Class, UnitKind::Variable];

    pub fn as_str(self) -> &'static str {
        match self {
            UnitKind::Function => "Function",
            UnitKind::Class => "Class",
            UnitKind::Variable => "Variable",
        }
    }

    /// Parses `function`, `class`, `variable` (case-insensitive).
    pub fn parse(s: &str) -> Option<UnitKind> {
        match s.trim().to_ascii_lowercase().as_str() {
            "function" | "f" => Some(UnitKind::Function),
            "class" | "c" => Some(UnitKind::Class),
            "variable" | "v" => Some(UnitKind::Variable),
            _ => None,
        }
    }
}

impl fmt::Display for UnitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Builds the `path::qualified_name::Kind` identifier.
pub fn unit_id(file_path: &str, qualified_name: &str, kind: UnitKind) -> String {
    format!("{file_path}::{qualified_name}::{kind}")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodeUnit {
    pub id: String,
    pub kind: UnitKind,
    pub qualified_name: String,
    pub signature: String,
    pub docstring: Option<String>,
    pub body_text: String,
    pub span: SourceSpan,
    pub parent_class: Option<String>,
}

impl CodeUnit {
    pub fn file_path(&self) -> &str {
        &self.span.file_path
    }

    /// Last component of the qualified name.
    pub fn name(&self) -> &str {
        self.qualified_name
            .rsplit('.')
            .next()
            .unwrap_or(&self.qualified_name)
    }

    pub fn is_method(&self) -> bool {
        self.kind == UnitKind::Function && self.parent_class.is_some()
    }

    /// Module-level units are reachable by bare name from their file.
    pub fn is_top_level(&self) -> bool {
        !self.qualified_name.contains('.')
    }

    /// Text presented to retrievers and scorers for this unit.
    pub fn document_text(&self) -> String {
        let mut out = String::with_capacity(
            self.signature.len() + self.body_text.len() + 2 + self.docstring.as_ref().map_or(0, |d| d.len()),
        );
        out.push_str(&self.signature);
        out.push('\n');
        if let Some(doc) = &self.docstring {
            out.push_str(doc);
            out.push('\n');
        }
        out.push_str(&self.body_text);
        out
    }
}

/// One name bound by an import statement.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ImportedName {
    /// `from m import name [as alias]`
    Name {
        name: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        alias: Option<String>,
    },
    /// `import m [as alias]` or `from pkg import submodule [as alias]`; the
    /// binding is the dotted prefix under which the module is reachable.
    Module { binding: String },
    /// `from m import *`
    Star,
}

impl ImportedName {
    /// Name bound locally by a `Name` import.
    pub fn local_name(&self) -> Option<&str> {
        match self {
            ImportedName::Name { name, alias } => Some(alias.as_deref().unwrap_or(name)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImportEdge {
    pub from_file: String,
    pub to_file: String,
    pub imported_names: Vec<ImportedName>,
}

impl ImportEdge {
    pub fn is_star(&self) -> bool {
        self.imported_names.iter().any(|n| matches!(n, ImportedName::Star))
    }
}

#[derive(Deserialize)]
struct RawGraph {
    repo_root: String,
    files: Vec<String>,
    units: Vec<CodeUnit>,
    import_edges: Vec<ImportEdge>,
}

/// An indexed repository. Immutable once built; lookups are backed by
/// id and file maps rebuilt on construction.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "RawGraph")]
pub struct CodeGraph {
    repo_root: String,
    files: Vec<String>,
    units: Vec<CodeUnit>,
    import_edges: Vec<ImportEdge>,
    #[serde(skip)]
    file_set: HashSet<String>,
    #[serde(skip)]
    by_id: HashMap<String, usize>,
    #[serde(skip)]
    by_file: HashMap<String, Vec<usize>>,
    #[serde(skip)]
    edges_by_file: HashMap<String, Vec<usize>>,
}

impl PartialEq for CodeGraph {
    fn eq(&self, other: &Self) -> bool {
        self.repo_root == other.repo_root
            && self.files == other.files
            && self.units == other.units
            && self.import_edges == other.import_edges
    }
}

impl TryFrom<RawGraph> for CodeGraph {
    type Error = Error;

    fn try_from(raw: RawGraph) -> Result<Self> {
        CodeGraph::new(raw.repo_root, raw.files, raw.units, raw.import_edges)
    }
}

impl CodeGraph {
    /// Validates and indexes the parts of a graph.
    pub fn new(
        repo_root: impl Into<String>,
        files: Vec<String>,
        units: Vec<CodeUnit>,
        import_edges: Vec<ImportEdge>,
    ) -> Result<Self> {
        let file_set: BTreeSet<&str> = files.iter().map(String::as_str).collect();
        if file_set.len() != files.len() {
            return Err(Error::InvalidGraph("duplicate file path".into()));
        }

        let mut by_id = HashMap::with_capacity(units.len());
        let mut by_file: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, unit) in units.iter().enumerate() {
            if !file_set.contains(unit.file_path()) {
                return Err(Error::InvalidGraph(format!(
                    "unit {} lives in unindexed file {}",
                    unit.id,
                    unit.file_path()
                )));
            }
            if unit.span.start_line > unit.span.end_line || unit.span.start_byte >= unit.span.end_byte {
                return Err(Error::InvalidGraph(format!("unit {} has an empty or inverted span", unit.id)));
            }
            if by_id.insert(unit.id.clone(), i).is_some() {
                return Err(Error::InvalidGraph(format!("duplicate unit id {}", unit.id)));
            }
            by_file.entry(unit.file_path().to_string()).or_default().push(i);
        }
        for unit in &units {
            if let Some(parent) = &unit.parent_class {
                match by_id.get(parent).map(|&i| &units[i]) {
                    Some(p) if p.kind == UnitKind::Class => {}
                    Some(_) => {
                        return Err(Error::InvalidGraph(format!(
                            "parent of {} is not a class: {parent}",
                            unit.id
                        )))
                    }
                    None => {
                        return Err(Error::InvalidGraph(format!(
                            "parent of {} does not exist: {parent}",
                            unit.id
                        )))
                    }
                }
            }
        }

        let mut edges_by_file: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, edge) in import_edges.iter().enumerate() {
            if edge.from_file == edge.to_file {
                return Err(Error::InvalidGraph(format!("self import edge on {}", edge.from_file)));
            }
            for end in [&edge.from_file, &edge.to_file] {
                if !file_set.contains(end.as_str()) {
                    return Err(Error::InvalidGraph(format!("import edge endpoint {end} is not indexed")));
                }
            }
            edges_by_file.entry(edge.from_file.clone()).or_default().push(i);
        }

        let file_set = files.iter().cloned().collect();
        Ok(CodeGraph {
            repo_root: repo_root.into(),
            file_set,
            files,
            units,
            import_edges,
            by_id,
            by_file,
            edges_by_file,
        })
    }

    pub fn empty(repo_root: impl Into<String>) -> Self {
        CodeGraph::new(repo_root, Vec::new(), Vec::new(), Vec::new()).expect("empty graph is valid")
    }

    pub fn repo_root(&self) -> &str {
        &self.repo_root
    }

    pub fn files(&self) -> &[String] {
        &self.files
    }

    pub fn units(&self) -> &[CodeUnit] {
        &self.units
    }

    pub fn import_edges(&self) -> &[ImportEdge] {
        &self.import_edges
    }

    pub fn contains_file(&self, file: &str) -> bool {
        self.file_set.contains(file)
    }

    pub fn lookup(&self, id: &str) -> Option<&CodeUnit> {
        self.by_id.get(id).map(|&i| &self.units[i])
    }

    /// Units of one file in source order.
    pub fn units_in_file<'a>(&'a self, file: &str) -> impl Iterator<Item = &'a CodeUnit> + 'a {
        self.by_file
            .get(file)
            .map(|v| v.as_slice())
            .unwrap_or(&[])
            .iter()
            .map(move |&i| &self.units[i])
    }

    /// Outgoing import edges of a file.
    pub fn edges_from<'a>(&'a self, file: &str) -> impl Iterator<Item = &'a ImportEdge> + 'a {
        self.edges_by_file
            .get(file)
            .map(|v| v.as_slice())
            .unwrap_or(&[])
            .iter()
            .map(move |&i| &self.import_edges[i])
    }

    /// Files directly imported by `file` (one hop).
    pub fn imported_files(&self, file: &str) -> Result<BTreeSet<String>> {
        if !self.contains_file(file) {
            return Err(Error::UnindexedFile(file.to_string()));
        }
        Ok(self.edges_from(file).map(|e| e.to_file.clone()).collect())
    }

    /// Top-level unit with the given bare name in `file`.
    pub fn top_level_unit(&self, file: &str, name: &str) -> Option<&CodeUnit> {
        self.units_in_file(file)
            .find(|u| u.is_top_level() && u.qualified_name == name)
    }

    pub fn function_units(&self) -> impl Iterator<Item = &CodeUnit> {
        self.units.iter().filter(|u| u.kind == UnitKind::Function)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = self.to_json()?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
