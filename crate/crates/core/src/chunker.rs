//! Fixed-size overlapping token windows over whole files, the flat-text
//! alternative to unit indexing.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extractor::{discover_files, ExtractOptions};
use crate::graph::ImportEdge;
use crate::par;
use crate::retrieval::{tokenize_with_offsets, Bm25Index, Token};

pub const DEFAULT_CHUNK_SIZE: usize = 2048;
pub const DEFAULT_OVERLAP: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chunk {
    pub file_path: String,
    pub chunk_index: usize,
    pub token_start: usize,
    pub token_end: usize,
    pub byte_start: usize,
    pub byte_end: usize,
    pub text: String,
}

impl Chunk {
    pub fn id(&self) -> String {
        format!("{}#{}", self.file_path, self.chunk_index)
    }
}

pub fn stride(chunk_size: usize, overlap: f64) -> Result<usize> {
    if chunk_size < 2 {
        return Err(Error::InvalidParameter(format!("chunk size must be at least 2, got {chunk_size}")));
    }
    if !(0.0..1.0).contains(&overlap) {
        return Err(Error::InvalidParameter(format!("overlap must be in [0, 1), got {overlap}")));
    }
    // The epsilon keeps e.g. 40 * 0.5 from rounding up past 20.
    let raw = chunk_size as f64 * (1.0 - overlap);
    Ok(((raw - 1e-9).ceil() as usize).clamp(1, chunk_size))
}

/// Windows over a token stream: one starts at every multiple of the stride
/// below the token count, so the tail windows are partial.
pub fn window_bounds(n_tokens: usize, chunk_size: usize, overlap: f64) -> Result<Vec<(usize, usize)>> {
    let step = stride(chunk_size, overlap)?;
    Ok((0..n_tokens)
        .step_by(step)
        .map(|s| (s, (s + chunk_size).min(n_tokens)))
        .collect())
}

fn make_chunks(file_path: &str, text: &str, tokens: &[Token], bounds: &[(usize, usize)]) -> Vec<Chunk> {
    bounds
        .iter()
        .enumerate()
        .map(|(i, &(s, e))| {
            let window = &tokens[s..e];
            let byte_start = window.iter().map(|t| t.start).min().unwrap_or(0);
            let byte_end = window.iter().map(|t| t.end).max().unwrap_or(0);
            Chunk {
                file_path: file_path.to_string(),
                chunk_index: i,
                token_start: s,
                token_end: e,
                byte_start,
                byte_end,
                text: text[byte_start..byte_end].to_string(),
            }
        })
        .collect()
}

pub fn chunk_file(file_path: &str, text: &str, chunk_size: usize, overlap: f64) -> Result<Vec<Chunk>> {
    let tokens = tokenize_with_offsets(text);
    let bounds = window_bounds(tokens.len(), chunk_size, overlap)?;
    Ok(make_chunks(file_path, text, &tokens, &bounds))
}

/// Same envelope as a unit index, carrying chunks instead of units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChunkIndex {
    pub repo_root: String,
    pub files: Vec<String>,
    pub chunks: Vec<Chunk>,
    pub import_edges: Vec<ImportEdge>,
}

impl ChunkIndex {
    pub fn build(repo_root: &Path, options: &ExtractOptions, chunk_size: usize, overlap: f64) -> Result<Self> {
        stride(chunk_size, overlap)?;
        let files = discover_files(repo_root, options)?;
        let per_file = par::try_map(&files, |f| {
            let full = repo_root.join(f);
            let bytes = std::fs::read(&full).map_err(|e| Error::io(&full, e))?;
            match String::from_utf8(bytes) {
                Ok(text) => chunk_file(f, &text, chunk_size, overlap),
                Err(_) => {
                    log::warn!("{f}: file is not valid UTF-8, skipped");
                    Ok(Vec::new())
                }
            }
        })?;
        Ok(ChunkIndex {
            repo_root: repo_root.to_string_lossy().into_owned(),
            files,
            chunks: per_file.into_iter().flatten().collect(),
            import_edges: Vec::new(),
        })
    }

    pub fn bm25(&self) -> Result<Bm25Index> {
        let docs: Vec<(String, &str)> = self.chunks.iter().map(|c| (c.id(), c.text.as_str())).collect();
        Bm25Index::build(&docs)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}
