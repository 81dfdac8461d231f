#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use repograph::extractor::{build_graph, ExtractOptions};
use repograph::graph::CodeGraph;
use serde::Deserialize;

pub const LABELED_FIXTURES: &[&str] = &["minirepo", "aliasrepo", "pkgrepo", "starrepo", "classrepo"];

pub fn fixture_root(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn fixture(name: &str) -> CodeGraph {
    build_graph(&fixture_root(name), &ExtractOptions::default()).unwrap().graph
}

#[derive(Debug, Deserialize)]
pub struct Labels {
    pub units: Vec<String>,
    pub deps: BTreeMap<String, BTreeSet<String>>,
}

pub fn labels(name: &str) -> Labels {
    let text = std::fs::read_to_string(fixture_root(name).join("labels.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

pub fn set(items: &[&str]) -> BTreeSet<String> {
    items.iter().map(|s| s.to_string()).collect()
}

pub fn write_file(root: &Path, rel: &str, text: &str) {
    let p = root.join(rel);
    std::fs::create_dir_all(p.parent().unwrap()).unwrap();
    std::fs::write(p, text).unwrap();
}

/// `n_files` modules; module i imports at most two others and defines a
/// variable, two functions and a class with one method.
pub fn synthetic_repo(root: &Path, n_files: usize) {
    for i in 0..n_files {
        let a = (i + 1) % n_files;
        let b = (i * 7 + 3) % n_files;
        let mut imports = Vec::new();
        let mut uses = Vec::new();
        if n_files > 1 && a != i {
            imports.push(format!("from mod_{a} import helper_{a}, LIMIT_{a}\n"));
            uses.push(format!("helper_{a}(x) + LIMIT_{a}"));
        }
        if n_files > 2 && b != i && b != a && i % 3 != 0 {
            imports.push(format!("import mod_{b}\n"));
            uses.push(format!("mod_{b}.helper_{b}(x)"));
        }
        let body = if uses.is_empty() { "x".to_string() } else { uses.join(" + ") };
        let text = format!(
            "{imports}\nLIMIT_{i} = {i}\n\n\ndef helper_{i}(x):\n    \"\"\"Scale x by the module limit.\"\"\"\n    return x * LIMIT_{i}\n\n\ndef combine_{i}(x):\n    \"\"\"Combine neighbouring helpers.\"\"\"\n    return {body}\n\n\nclass Box_{i}:\n    def get(self):\n        return helper_{i}(1)\n",
            imports = imports.concat()
        );
        write_file(root, &format!("mod_{i}.py"), &text);
    }
}

/// Straight-line BM25 over whitespace-tokenized documents: every document
/// is scored directly from its term counts.
pub fn reference_bm25(docs: &[(String, Vec<String>)], query: &[String], k1: f64, b: f64) -> Vec<(String, f64)> {
    let n = docs.len() as f64;
    let avgdl = if docs.is_empty() {
        0.0
    } else {
        docs.iter().map(|(_, t)| t.len()).sum::<usize>() as f64 / n
    };
    let df = |term: &str| docs.iter().filter(|(_, t)| t.iter().any(|x| x == term)).count() as f64;
    let idf: HashMap<&str, f64> = query
        .iter()
        .map(|t| (t.as_str(), ((n - df(t) + 0.5) / (df(t) + 0.5) + 1.0).ln()))
        .collect();
    let mut out = Vec::new();
    for (id, toks) in docs {
        let dl = toks.len() as f64;
        let mut score = 0.0;
        for t in query {
            let f = toks.iter().filter(|x| *x == t).count() as f64;
            if f == 0.0 {
                continue;
            }
            let norm = if avgdl > 0.0 { dl / avgdl } else { 0.0 };
            score += idf[t.as_str()] * (f * (k1 + 1.0)) / (f + k1 * (1.0 - b + b * norm));
        }
        if score > 0.0 {
            out.push((id.clone(), score));
        }
    }
    out.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    out
}
