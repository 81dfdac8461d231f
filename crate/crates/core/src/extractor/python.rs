use tree_sitter::{Node, Parser, Tree};

use crate::graph::{unit_id, CodeUnit, SourceSpan, UnitKind};

/// A source file together with its syntax tree.
pub struct ParsedFile {
    pub path: String,
    pub source: String,
    pub tree: Tree,
    /// `(line, message)` for every error or missing node, 1-based lines.
    pub parse_errors: Vec<(usize, String)>,
}

impl ParsedFile {
    pub fn parse(path: impl Into<String>, source: impl Into<String>) -> ParsedFile {
        let path = path.into();
        let source = source.into();
        let tree = parse_python(&source);
        let parse_errors = collect_errors(tree.root_node());
        ParsedFile {
            path,
            source,
            tree,
            parse_errors,
        }
    }

    pub fn root(&self) -> Node<'_> {
        self.tree.root_node()
    }

    pub fn text(&self, node: Node<'_>) -> &str {
        &self.source[node.byte_range()]
    }
}

pub fn parse_python(source: &str) -> Tree {
    let mut parser = Parser::new();
    parser
        .set_language(&tree_sitter_python::LANGUAGE.into())
        .expect("python grammar matches the tree-sitter ABI");
    parser
        .parse(source, None)
        .expect("parser has a language and no cancellation")
}

fn collect_errors(root: Node<'_>) -> Vec<(usize, String)> {
    let mut out = Vec::new();
    if !root.has_error() {
        return out;
    }
    let mut stack = vec![root];
    while let Some(node) = stack.pop() {
        if node.is_error() {
            out.push((node.start_position().row + 1, "syntax error".to_string()));
            continue;
        }
        if node.is_missing() {
            out.push((
                node.start_position().row + 1,
                format!("missing `{}`", node.kind()),
            ));
            continue;
        }
        if node.has_error() {
            let mut cursor = node.walk();
            let children: Vec<_> = node.children(&mut cursor).collect();
            stack.extend(children.into_iter().rev());
        }
    }
    out.sort();
    out
}

pub(crate) fn children<'t>(node: Node<'t>) -> Vec<Node<'t>> {
    let mut cursor = node.walk();
    node.children(&mut cursor).collect()
}

pub(crate) fn named_children<'t>(node: Node<'t>) -> Vec<Node<'t>> {
    let mut cursor = node.walk();
    node.named_children(&mut cursor).collect()
}

/// Unwraps `decorated_definition` to the inner function/class node.
pub(crate) fn definition_of(node: Node<'_>) -> Option<Node<'_>> {
    match node.kind() {
        "function_definition" | "class_definition" => Some(node),
        "decorated_definition" => node.child_by_field_name("definition"),
        _ => None,
    }
}

/// Header text up to and including the `:` that opens the body.
fn header_text<'s>(source: &'s str, def: Node<'_>) -> &'s str {
    let colon = children(def)
        .into_iter()
        .find(|c| c.kind() == ":")
        .map(|c| c.end_byte());
    let end = colon
        .or_else(|| def.child_by_field_name("body").map(|b| b.start_byte()))
        .unwrap_or(def.end_byte());
    source[def.start_byte()..end].trim_end()
}

/// Leading string literal of a block, as written in the source.
fn docstring_of(source: &str, def: Node<'_>) -> Option<String> {
    let body = def.child_by_field_name("body")?;
    let first = named_children(body)
        .into_iter()
        .find(|n| n.kind() != "comment")?;
    if first.kind() != "expression_statement" {
        return None;
    }
    let inner = named_children(first);
    match inner.as_slice() {
        [lit] if matches!(lit.kind(), "string" | "concatenated_string") => {
            Some(source[lit.byte_range()].to_string())
        }
        _ => None,
    }
}

fn make_span(path: &str, node: Node<'_>) -> SourceSpan {
    SourceSpan {
        file_path: path.to_string(),
        start_line: node.start_position().row + 1,
        end_line: node.end_position().row + 1,
        start_byte: node.start_byte(),
        end_byte: node.end_byte(),
    }
}

struct UnitBuilder<'a> {
    file: &'a ParsedFile,
    units: Vec<CodeUnit>,
}

impl<'a> UnitBuilder<'a> {
    fn definition(&mut self, outer: Node<'_>, prefix: Option<(&str, &str)>) {
        let Some(def) = definition_of(outer) else {
            return;
        };
        let Some(name_node) = def.child_by_field_name("name") else {
            return;
        };
        let src = &self.file.source;
        let name = &src[name_node.byte_range()];
        let qualified = match prefix {
            Some((q, _)) => format!("{q}.{name}"),
            None => name.to_string(),
        };
        let kind = if def.kind() == "class_definition" {
            UnitKind::Class
        } else {
            UnitKind::Function
        };
        let id = unit_id(&self.file.path, &qualified, kind);
        self.units.push(CodeUnit {
            id: id.clone(),
            kind,
            qualified_name: qualified.clone(),
            signature: header_text(src, def).to_string(),
            docstring: docstring_of(src, def),
            body_text: src[outer.byte_range()].to_string(),
            span: make_span(&self.file.path, outer),
            parent_class: prefix.map(|(_, parent)| parent.to_string()),
        });
        if kind == UnitKind::Class {
            if let Some(body) = def.child_by_field_name("body") {
                for member in named_children(body) {
                    if member.has_error() {
                        continue;
                    }
                    if definition_of(member).is_some() {
                        self.definition(member, Some((&qualified, &id)));
                    }
                }
            }
        }
    }

    fn assignment(&mut self, stmt: Node<'_>) {
        let Some(assign) = named_children(stmt).into_iter().next() else {
            return;
        };
        if assign.kind() != "assignment" {
            return;
        }
        let mut names = Vec::new();
        let mut cur = Some(assign);
        while let Some(a) = cur {
            if let Some(left) = a.child_by_field_name("left") {
                target_names(&self.file.source, left, &mut names);
            }
            cur = a.child_by_field_name("right").filter(|r| r.kind() == "assignment");
        }
        let src = &self.file.source;
        let body = &src[stmt.byte_range()];
        let signature = body.lines().next().unwrap_or("").trim_end().to_string();
        for name in names {
            self.units.push(CodeUnit {
                id: unit_id(&self.file.path, &name, UnitKind::Variable),
                kind: UnitKind::Variable,
                qualified_name: name,
                signature: signature.clone(),
                docstring: None,
                body_text: body.to_string(),
                span: make_span(&self.file.path, stmt),
                parent_class: None,
            });
        }
    }
}

/// Plain-name targets of an assignment; attribute and subscript targets are
/// not bindings.
pub(crate) fn target_names(source: &str, node: Node<'_>, out: &mut Vec<String>) {
    match node.kind() {
        "identifier" => {
            let name = source[node.byte_range()].to_string();
            if !out.contains(&name) {
                out.push(name);
            }
        }
        "pattern_list" | "tuple_pattern" | "list_pattern" | "list_splat_pattern" | "parenthesized_expression"
        | "tuple" | "list" | "as_pattern_target" | "expression_list" => {
            for child in named_children(node) {
                target_names(source, child, out);
            }
        }
        _ => {}
    }
}

/// All module-level functions, classes (with nested classes), methods and
/// variables of the file. Top-level statements containing syntax errors are
/// skipped.
pub fn extract_units(file: &ParsedFile) -> Vec<CodeUnit> {
    let mut builder = UnitBuilder {
        file,
        units: Vec::new(),
    };
    for node in named_children(file.root()) {
        if node.has_error() || node.is_error() {
            continue;
        }
        match node.kind() {
            "function_definition" | "class_definition" | "decorated_definition" => {
                builder.definition(node, None)
            }
            "expression_statement" => builder.assignment(node),
            _ => {}
        }
    }
    builder.units
}
