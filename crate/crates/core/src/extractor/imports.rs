//! Resolution of `import` / `from ... import` statements against the set of
//! repository files.

use std::collections::{BTreeMap, HashSet};

use tree_sitter::Node;

use super::python::{named_children, ParsedFile};
use super::{Diagnostic, DiagnosticKind};
use crate::graph::{ImportEdge, ImportedName};

/// Indexed file paths plus every directory that contains one of them.
#[derive(Debug, Default, Clone)]
pub struct RepoFiles {
    files: HashSet<String>,
    dirs: HashSet<String>,
    top_level: HashSet<String>,
}

impl RepoFiles {
    pub fn new<I, S>(paths: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut out = RepoFiles::default();
        for p in paths {
            let p = p.as_ref();
            out.files.insert(p.to_string());
            let mut dir = parent_dir(p);
            while !dir.is_empty() {
                out.dirs.insert(dir.to_string());
                dir = parent_dir(dir);
            }
            let first = p.split('/').next().unwrap_or(p);
            out.top_level.insert(first.trim_end_matches(".py").to_string());
        }
        out
    }

    pub fn contains(&self, path: &str) -> bool {
        self.files.contains(path)
    }

    fn is_dir(&self, dir: &str) -> bool {
        dir.is_empty() || self.dirs.contains(dir)
    }

    /// `dir/parts.py` or `dir/parts/__init__.py`.
    fn module_file(&self, dir: &str, parts: &[&str]) -> Option<String> {
        let base = join(dir, &parts.join("/"));
        if parts.is_empty() {
            let init = join(dir, "__init__.py");
            return self.files.contains(&init).then_some(init);
        }
        let file = format!("{base}.py");
        if self.files.contains(&file) {
            return Some(file);
        }
        let init = join(&base, "__init__.py");
        self.files.contains(&init).then_some(init)
    }

    fn package_dir(&self, dir: &str, parts: &[&str]) -> Option<String> {
        let base = join(dir, &parts.join("/"));
        self.is_dir(&base).then_some(base)
    }
}

fn parent_dir(path: &str) -> &str {
    path.rfind('/').map(|i| &path[..i]).unwrap_or("")
}

fn join(dir: &str, rest: &str) -> String {
    match (dir.is_empty(), rest.is_empty()) {
        (true, _) => rest.to_string(),
        (false, true) => dir.to_string(),
        (false, false) => format!("{dir}/{rest}"),
    }
}

/// Roots tried for absolute imports: the repository root, then the
/// importing file's directory and its ancestors, then `src`.
fn search_roots(file: &str) -> Vec<String> {
    let mut roots = vec![String::new()];
    let mut dir = parent_dir(file);
    while !dir.is_empty() {
        roots.push(dir.to_string());
        dir = parent_dir(dir);
    }
    roots.push("src".to_string());
    roots.dedup();
    roots
}

struct RawImportFrom<'s> {
    line: usize,
    level: usize,
    module: Vec<&'s str>,
    names: Vec<(&'s str, Option<&'s str>)>,
    star: bool,
}

struct RawImport<'s> {
    line: usize,
    module: Vec<&'s str>,
    alias: Option<&'s str>,
}

fn dotted<'s>(file: &'s ParsedFile, node: Node<'_>) -> Vec<&'s str> {
    named_children(node)
        .into_iter()
        .filter(|n| n.kind() == "identifier")
        .map(|n| &file.source[n.byte_range()])
        .collect()
}

fn name_and_alias<'s>(file: &'s ParsedFile, node: Node<'_>) -> Option<(Vec<&'s str>, Option<&'s str>)> {
    match node.kind() {
        "dotted_name" => Some((dotted(file, node), None)),
        "aliased_import" => {
            let name = node.child_by_field_name("name")?;
            let alias = node.child_by_field_name("alias").map(|a| file.text(a));
            Some((dotted(file, name), alias))
        }
        _ => None,
    }
}

enum RawStatement<'s> {
    Import(RawImport<'s>),
    From(RawImportFrom<'s>),
}

fn collect_statements<'s>(file: &'s ParsedFile) -> Vec<RawStatement<'s>> {
    let mut out = Vec::new();
    let mut stack = vec![file.root()];
    while let Some(node) = stack.pop() {
        match node.kind() {
            "import_statement" if !node.has_error() => {
                let line = node.start_position().row + 1;
                let mut cursor = node.walk();
                for name in node.children_by_field_name("name", &mut cursor) {
                    if let Some((module, alias)) = name_and_alias(file, name) {
                        out.push(RawStatement::Import(RawImport { line, module, alias }));
                    }
                }
            }
            "import_from_statement" if !node.has_error() => {
                let Some(module_node) = node.child_by_field_name("module_name") else {
                    continue;
                };
                let (level, module) = if module_node.kind() == "relative_import" {
                    let mut level = 0;
                    let mut module = Vec::new();
                    for c in named_children(module_node) {
                        match c.kind() {
                            "import_prefix" => level = file.text(c).chars().filter(|&ch| ch == '.').count(),
                            "dotted_name" => module = dotted(file, c),
                            _ => {}
                        }
                    }
                    (level, module)
                } else {
                    (0, dotted(file, module_node))
                };
                let mut names = Vec::new();
                let mut cursor = node.walk();
                for name in node.children_by_field_name("name", &mut cursor) {
                    if let Some((parts, alias)) = name_and_alias(file, name) {
                        if let Some(first) = parts.first() {
                            names.push((*first, alias));
                        }
                    }
                }
                let star = named_children(node).iter().any(|c| c.kind() == "wildcard_import");
                out.push(RawStatement::From(RawImportFrom {
                    line: node.start_position().row + 1,
                    level,
                    module,
                    names,
                    star,
                }));
            }
            _ => {
                let mut cursor = node.walk();
                let kids: Vec<_> = node.named_children(&mut cursor).collect();
                stack.extend(kids.into_iter().rev());
            }
        }
    }
    out.sort_by_key(|s| match s {
        RawStatement::Import(i) => i.line,
        RawStatement::From(f) => f.line,
    });
    out
}

/// Accumulates edges keyed by target so repeated imports of one file merge.
struct EdgeSet<'a> {
    from: &'a str,
    targets: BTreeMap<String, Vec<ImportedName>>,
}

impl EdgeSet<'_> {
    fn add(&mut self, to: String, name: ImportedName) {
        if to == self.from {
            return;
        }
        let names = self.targets.entry(to).or_default();
        if !names.contains(&name) {
            names.push(name);
        }
    }
}

/// Resolves every import of `file` to intra-repository edges. Imports of
/// modules that do not exist in the repository produce no edge; imports that
/// look intra-repo but cannot be resolved are reported as diagnostics.
pub fn extract_imports_with_diagnostics(
    file: &ParsedFile,
    repo: &RepoFiles,
) -> (Vec<ImportEdge>, Vec<Diagnostic>) {
    let mut edges = EdgeSet {
        from: &file.path,
        targets: BTreeMap::new(),
    };
    let mut diags = Vec::new();
    let unresolved = |line: usize, what: String| Diagnostic {
        file: file.path.clone(),
        line: Some(line),
        kind: DiagnosticKind::UnresolvedImport,
        message: format!("cannot resolve intra-repository import `{what}`"),
    };

    for stmt in collect_statements(file) {
        match stmt {
            RawStatement::Import(imp) => {
                let target = search_roots(&file.path)
                    .iter()
                    .find_map(|root| repo.module_file(root, &imp.module));
                match target {
                    Some(to) => {
                        let binding = imp
                            .alias
                            .map(str::to_string)
                            .unwrap_or_else(|| imp.module.join("."));
                        edges.add(to, ImportedName::Module { binding });
                    }
                    None => {
                        if imp.module.len() > 1 && looks_internal(repo, &file.path, &imp.module) {
                            diags.push(unresolved(imp.line, imp.module.join(".")));
                        }
                    }
                }
            }
            RawStatement::From(from) => {
                let roots = if from.level > 0 {
                    let mut dir = parent_dir(&file.path);
                    let mut ok = true;
                    for _ in 1..from.level {
                        if dir.is_empty() {
                            ok = false;
                            break;
                        }
                        dir = parent_dir(dir);
                    }
                    if !ok {
                        diags.push(unresolved(from.line, format!("{}{}", ".".repeat(from.level), from.module.join("."))));
                        continue;
                    }
                    vec![dir.to_string()]
                } else {
                    search_roots(&file.path)
                };
                let resolved = roots.iter().find_map(|root| {
                    let module = repo.module_file(root, &from.module);
                    let package = repo.package_dir(root, &from.module).filter(|_| !from.module.is_empty() || from.level > 0);
                    (module.is_some() || package.is_some()).then_some((root.clone(), module, package))
                });
                let Some((root, module_file, package)) = resolved else {
                    if from.level > 0 || looks_internal(repo, &file.path, &from.module) {
                        diags.push(unresolved(
                            from.line,
                            format!("{}{}", ".".repeat(from.level), from.module.join(".")),
                        ));
                    }
                    continue;
                };
                if from.star {
                    match &module_file {
                        Some(to) => edges.add(to.clone(), ImportedName::Star),
                        None => diags.push(unresolved(from.line, format!("{}.*", from.module.join(".")))),
                    }
                }
                for (name, alias) in from.names {
                    let mut sub = from.module.clone();
                    sub.push(name);
                    let submodule = package.as_ref().and_then(|_| repo.module_file(&root, &sub));
                    if let Some(to) = submodule {
                        let binding = alias.unwrap_or(name).to_string();
                        edges.add(to, ImportedName::Module { binding });
                    } else if let Some(to) = &module_file {
                        edges.add(
                            to.clone(),
                            ImportedName::Name {
                                name: name.to_string(),
                                alias: alias.map(str::to_string),
                            },
                        );
                    } else {
                        diags.push(unresolved(from.line, format!("{}.{}", from.module.join("."), name)));
                    }
                }
            }
        }
    }

    let from = file.path.clone();
    let out = edges
        .targets
        .into_iter()
        .map(|(to, imported_names)| ImportEdge {
            from_file: from.clone(),
            to_file: to,
            imported_names,
        })
        .collect();
    (out, diags)
}

pub fn extract_imports(file: &ParsedFile, repo: &RepoFiles) -> Vec<ImportEdge> {
    extract_imports_with_diagnostics(file, repo).0
}

/// An absolute module whose first component names a top-level repository
/// entry is assumed to be intra-repo.
fn looks_internal(repo: &RepoFiles, _file: &str, module: &[&str]) -> bool {
    module.first().is_some_and(|m| repo.top_level.contains(*m))
}
