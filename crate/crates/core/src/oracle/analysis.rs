//! Static usage analysis of one function body against a candidate scope.

use std::collections::{BTreeSet, HashMap, HashSet};

use tree_sitter::Node;

use crate::extractor::{definition_of, named_children, parse_python, target_names};
use crate::graph::{CodeGraph, CodeUnit, ImportedName, UnitKind};

/// Outcome of analysing a function's source text.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Analysis {
    pub dependencies: BTreeSet<String>,
    /// The text did not parse cleanly; `dependencies` reflects whatever the
    /// recovered tree still contained.
    pub had_errors: bool,
}

/// Name bindings a file gets from its import edges.
struct FileBindings<'g> {
    /// local name -> (target file, imported name)
    names: HashMap<&'g str, (&'g str, &'g str)>,
    /// dotted module binding -> target file
    modules: Vec<(Vec<&'g str>, &'g str)>,
    stars: Vec<&'g str>,
}

impl<'g> FileBindings<'g> {
    fn new(graph: &'g CodeGraph, file: &str) -> Self {
        let mut names = HashMap::new();
        let mut modules = Vec::new();
        let mut stars = Vec::new();
        for edge in graph.edges_from(file) {
            for imported in &edge.imported_names {
                match imported {
                    ImportedName::Name { name, alias } => {
                        let local = alias.as_deref().unwrap_or(name);
                        names.entry(local).or_insert((edge.to_file.as_str(), name.as_str()));
                    }
                    ImportedName::Module { binding } => {
                        modules.push((binding.split('.').collect(), edge.to_file.as_str()))
                    }
                    ImportedName::Star => stars.push(edge.to_file.as_str()),
                }
            }
        }
        FileBindings { names, modules, stars }
    }
}

struct Resolver<'g, 's> {
    graph: &'g CodeGraph,
    file: &'s str,
    bindings: FileBindings<'g>,
    in_scope: HashSet<&'s str>,
    /// unqualified method name -> in-scope method ids
    methods: HashMap<&'g str, Vec<&'g str>>,
}

impl<'g, 's> Resolver<'g, 's> {
    /// Module-level unit a bare name refers to from this file: own
    /// definitions first, then explicit imports, then star imports (which
    /// never bind underscore names).
    fn bare_name(&self, name: &str) -> Option<&'g CodeUnit> {
        if let Some(u) = self.graph.top_level_unit(self.file, name) {
            return Some(u);
        }
        if let Some((to, original)) = self.bindings.names.get(name) {
            return self.graph.top_level_unit(to, original);
        }
        if name.starts_with('_') {
            return None;
        }
        self.bindings
            .stars
            .iter()
            .find_map(|to| self.graph.top_level_unit(to, name))
    }

    fn module_attr(&self, chain: &[&str]) -> Option<&'g CodeUnit> {
        let (attr, prefix) = chain.split_last()?;
        self.bindings
            .modules
            .iter()
            .find(|(binding, _)| binding.as_slice() == prefix)
            .and_then(|(_, to)| self.graph.top_level_unit(to, attr))
    }
}

struct Walker<'r, 'g, 's, 't> {
    resolver: &'r Resolver<'g, 's>,
    src: &'t str,
    shadowed: HashSet<String>,
    found: BTreeSet<String>,
}

impl<'r, 'g, 's, 't> Walker<'r, 'g, 's, 't> {
    fn text(&self, node: Node<'_>) -> &'t str {
        &self.src[node.byte_range()]
    }

    fn accept(&mut self, unit: &CodeUnit, called: bool) {
        if unit.kind == UnitKind::Function && !called {
            return;
        }
        if self.resolver.in_scope.contains(unit.id.as_str()) {
            self.found.insert(unit.id.clone());
        }
    }

    fn identifier(&mut self, node: Node<'_>, called: bool) {
        let name = self.text(node);
        if self.shadowed.contains(name) {
            return;
        }
        if let Some(unit) = self.resolver.bare_name(name) {
            self.accept(unit, called);
        }
    }

    fn chain(&self, node: Node<'_>) -> Option<Vec<&'t str>> {
        match node.kind() {
            "identifier" => Some(vec![self.text(node)]),
            "attribute" => {
                let mut head = self.chain(node.child_by_field_name("object")?)?;
                head.push(self.text(node.child_by_field_name("attribute")?));
                Some(head)
            }
            _ => None,
        }
    }

    fn attribute(&mut self, node: Node<'_>, called: bool) {
        if let Some(chain) = self.chain(node) {
            if !self.shadowed.contains(chain[0]) {
                if let Some(unit) = self.resolver.module_attr(&chain) {
                    self.accept(unit, called);
                }
            }
        }
        if called {
            if let Some(attr) = node.child_by_field_name("attribute") {
                let name = self.text(attr);
                if let Some(ids) = self.resolver.methods.get(name) {
                    self.found.extend(ids.iter().map(|s| s.to_string()));
                }
            }
        }
        if let Some(object) = node.child_by_field_name("object") {
            self.walk(object, false);
        }
    }

    fn walk(&mut self, node: Node<'_>, called: bool) {
        match node.kind() {
            "identifier" => self.identifier(node, called),
            "attribute" => self.attribute(node, called),
            "call" => {
                if let Some(f) = node.child_by_field_name("function") {
                    self.walk(f, true);
                }
                if let Some(args) = node.child_by_field_name("arguments") {
                    self.walk(args, false);
                }
            }
            "decorator" => {
                for child in named_children(node) {
                    self.walk(child, true);
                }
            }
            "keyword_argument" => {
                if let Some(v) = node.child_by_field_name("value") {
                    self.walk(v, false);
                }
            }
            "function_definition" | "class_definition" => {
                for child in named_children(node) {
                    if Some(child) != node.child_by_field_name("name") {
                        self.walk(child, false);
                    }
                }
            }
            "import_statement" | "import_from_statement" | "future_import_statement" | "global_statement"
            | "nonlocal_statement" | "comment" => {}
            _ => {
                for child in named_children(node) {
                    self.walk(child, false);
                }
            }
        }
    }
}

fn parameter_names(src: &str, params: Node<'_>, out: &mut Vec<String>) {
    for p in named_children(params) {
        match p.kind() {
            "identifier" => out.push(src[p.byte_range()].to_string()),
            "default_parameter" | "typed_default_parameter" => {
                if let Some(n) = p.child_by_field_name("name") {
                    target_names(src, n, out);
                }
            }
            "typed_parameter" | "list_splat_pattern" | "dictionary_splat_pattern" => {
                for c in named_children(p) {
                    match c.kind() {
                        "identifier" => {
                            out.push(src[c.byte_range()].to_string());
                            break;
                        }
                        "list_splat_pattern" | "dictionary_splat_pattern" => {
                            parameter_names(src, p, out);
                            break;
                        }
                        _ => {}
                    }
                }
            }
            _ => {}
        }
    }
}

/// Names bound anywhere inside the function (parameters, assignment and loop
/// targets, `as` targets, walrus targets, nested definitions) minus names
/// declared `global`/`nonlocal`.
fn local_bindings(src: &str, func: Node<'_>) -> HashSet<String> {
    let mut bound = Vec::new();
    let mut globals = HashSet::new();
    let mut stack = vec![(func, true)];
    while let Some((node, top)) = stack.pop() {
        match node.kind() {
            "parameters" | "lambda_parameters" => parameter_names(src, node, &mut bound),
            "assignment" | "augmented_assignment" | "for_statement" | "for_in_clause" => {
                if let Some(left) = node.child_by_field_name("left") {
                    target_names(src, left, &mut bound);
                }
            }
            "as_pattern" => {
                if let Some(alias) = node.child_by_field_name("alias") {
                    target_names(src, alias, &mut bound);
                }
            }
            "named_expression" => {
                if let Some(n) = node.child_by_field_name("name") {
                    target_names(src, n, &mut bound);
                }
            }
            "function_definition" | "class_definition" if !top => {
                if let Some(n) = node.child_by_field_name("name") {
                    bound.push(src[n.byte_range()].to_string());
                }
            }
            "global_statement" | "nonlocal_statement" => {
                for n in named_children(node) {
                    if n.kind() == "identifier" {
                        globals.insert(src[n.byte_range()].to_string());
                    }
                }
            }
            _ => {}
        }
        for child in named_children(node) {
            stack.push((child, false));
        }
    }
    bound.into_iter().filter(|n| !globals.contains(n)).collect()
}

/// Re-bases a unit's text so it parses standalone: a decorated method starts
/// at column 0 on its first decorator but its later lines keep the class
/// indentation.
pub(crate) fn dedent_for_parse(text: &str) -> String {
    let first = text.lines().next().unwrap_or("");
    if !first.trim_start().starts_with('@') {
        return text.to_string();
    }
    let indent = text
        .lines()
        .skip(1)
        .find(|l| {
            let t = l.trim_start();
            t.starts_with("def ") || t.starts_with("async ") || t.starts_with("class ")
        })
        .map(|l| l.len() - l.trim_start().len())
        .unwrap_or(0);
    if indent == 0 {
        return text.to_string();
    }
    let mut out = String::with_capacity(text.len());
    for (i, line) in text.split_inclusive('\n').enumerate() {
        if i == 0 {
            out.push_str(line);
            continue;
        }
        let ws = line.len() - line.trim_start_matches([' ', '\t']).len();
        out.push_str(&line[ws.min(indent)..]);
    }
    out
}

/// Analyses `text` (a function definition, possibly decorated) as if it
/// were written in `file`, returning every scope candidate it references.
pub fn analyze_source(graph: &CodeGraph, file: &str, text: &str, scope: &[String]) -> Analysis {
    let source = dedent_for_parse(text);
    let tree = parse_python(&source);
    let root = tree.root_node();

    let in_scope: HashSet<&str> = scope.iter().map(String::as_str).collect();
    let mut methods: HashMap<&str, Vec<&str>> = HashMap::new();
    for id in scope {
        if let Some(u) = graph.lookup(id) {
            if u.is_method() {
                methods.entry(u.name()).or_default().push(u.id.as_str());
            }
        }
    }
    let resolver = Resolver {
        graph,
        file,
        bindings: FileBindings::new(graph, file),
        in_scope,
        methods,
    };

    let outer = named_children(root)
        .into_iter()
        .find(|n| definition_of(*n).is_some_and(|d| d.kind() == "function_definition"));
    let (target, func) = match outer {
        Some(o) => (o, definition_of(o).unwrap_or(o)),
        None => (root, root),
    };
    let mut walker = Walker {
        resolver: &resolver,
        src: &source,
        shadowed: local_bindings(&source, func),
        found: BTreeSet::new(),
    };
    walker.walk(target, false);
    Analysis {
        dependencies: walker.found,
        had_errors: root.has_error(),
    }
}
