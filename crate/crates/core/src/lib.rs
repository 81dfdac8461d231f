pub mod chunker;
pub mod cli;
pub mod dar;
pub mod error;
pub mod eval;
pub mod extractor;
pub mod graph;
pub mod hydra;
pub mod jsonl;
pub mod oracle;
pub mod par;
pub mod retrieval;

pub use error::{Error, Result};
