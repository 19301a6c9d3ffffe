//! Lexical retrieval over a local document corpus.
//!
//! A deterministic BM25 index stands in for a hosted biomedical retrieval
//! service; the [`Retriever`] trait is the seam where a remote retriever can
//! be substituted. Retrieved passages are injected into analysis prompts via
//! [`augment_prompt`].

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use thiserror::Error;

const BM25_K1: f64 = 1.5;
const BM25_B: f64 = 0.75;

#[derive(Debug, Error)]
pub enum RetrievalError {
    #[error("duplicate doc_id `{0}` in corpus")]
    DuplicateDocId(String),
    #[error("cannot read corpus `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("corpus line {line} is malformed: {reason}")]
    MalformedLine { line: usize, reason: String },
    #[error("retrieval backend failed: {0}")]
    Backend(String),
}

/// One retrieved passage with its relevance score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Passage {
    pub doc_id: String,
    pub text: String,
    pub score: f64,
}

/// Pluggable retrieval seam; the local [`CorpusIndex`] implements it, and a
/// remote service can be dropped in behind the same interface.
#[async_trait]
pub trait Retriever: Send + Sync {
    async fn retrieve(&self, query_text: &str, k: usize) -> Result<Vec<Passage>, RetrievalError>;
}

/// Lowercase tokens split on non-alphanumeric characters, empties dropped.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

#[derive(Debug)]
struct DocEntry {
    text: String,
    term_counts: HashMap<String, u32>,
    token_count: u32,
}

/// Immutable inverted statistics over a document set; concurrent retrieval is
/// safe once built.
#[derive(Debug)]
pub struct CorpusIndex {
    docs: BTreeMap<String, DocEntry>,
    doc_frequencies: HashMap<String, u32>,
    avg_doc_len: f64,
}

impl CorpusIndex {
    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn document_frequency(&self, term: &str) -> u32 {
        self.doc_frequencies.get(term).copied().unwrap_or(0)
    }

    /// Top-k passages by BM25 (k1 = 1.5, b = 0.75), score descending, ties
    /// broken by ascending doc_id. Only documents sharing at least one term
    /// with the query are returned.
    pub fn retrieve(&self, query_text: &str, k: usize) -> Vec<Passage> {
        if k == 0 || self.docs.is_empty() {
            return Vec::new();
        }
        let terms: BTreeSet<String> = tokenize(query_text).into_iter().collect();
        let n_docs = self.docs.len() as f64;
        let mut scored: Vec<Passage> = Vec::new();
        for (doc_id, entry) in &self.docs {
            let mut score = 0.0;
            let mut matched = false;
            for term in &terms {
                let tf = entry.term_counts.get(term).copied().unwrap_or(0);
                if tf == 0 {
                    continue;
                }
                matched = true;
                let df = f64::from(self.document_frequency(term));
                let idf = ((n_docs - df + 0.5) / (df + 0.5) + 1.0).ln();
                let tf = f64::from(tf);
                let len_norm =
                    1.0 - BM25_B + BM25_B * f64::from(entry.token_count) / self.avg_doc_len;
                score += idf * tf * (BM25_K1 + 1.0) / (tf + BM25_K1 * len_norm);
            }
            if matched {
                scored.push(Passage {
                    doc_id: doc_id.clone(),
                    text: entry.text.clone(),
                    score,
                });
            }
        }
        scored.sort_by(|a, b| {
            b.score
                .total_cmp(&a.score)
                .then_with(|| a.doc_id.cmp(&b.doc_id))
        });
        scored.truncate(k);
        scored
    }
}

#[async_trait]
impl Retriever for CorpusIndex {
    async fn retrieve(&self, query_text: &str, k: usize) -> Result<Vec<Passage>, RetrievalError> {
        Ok(CorpusIndex::retrieve(self, query_text, k))
    }
}

/// Builds the index. Rebuilding from the same documents reproduces identical
/// statistics regardless of input order.
pub fn index_corpus<I, S1, S2>(docs: I) -> Result<CorpusIndex, RetrievalError>
where
    I: IntoIterator<Item = (S1, S2)>,
    S1: Into<String>,
    S2: Into<String>,
{
    let mut entries: BTreeMap<String, DocEntry> = BTreeMap::new();
    for (doc_id, text) in docs {
        let doc_id = doc_id.into();
        let text = text.into();
        let tokens = tokenize(&text);
        let mut term_counts: HashMap<String, u32> = HashMap::new();
        for token in &tokens {
            *term_counts.entry(token.clone()).or_insert(0) += 1;
        }
        let entry = DocEntry {
            text,
            token_count: tokens.len() as u32,
            term_counts,
        };
        if entries.insert(doc_id.clone(), entry).is_some() {
            return Err(RetrievalError::DuplicateDocId(doc_id));
        }
    }
    let mut doc_frequencies: HashMap<String, u32> = HashMap::new();
    for entry in entries.values() {
        for term in entry.term_counts.keys() {
            *doc_frequencies.entry(term.clone()).or_insert(0) += 1;
        }
    }
    let total_tokens: u64 = entries.values().map(|e| u64::from(e.token_count)).sum();
    let avg_doc_len = if entries.is_empty() {
        1.0
    } else {
        (total_tokens as f64 / entries.len() as f64).max(1.0)
    };
    Ok(CorpusIndex {
        docs: entries,
        doc_frequencies,
        avg_doc_len,
    })
}

/// Loads a JSONL corpus of `{"doc_id": ..., "text": ...}` records.
pub fn load_corpus_jsonl(path: impl AsRef<Path>) -> Result<Vec<(String, String)>, RetrievalError> {
    #[derive(Deserialize)]
    struct Record {
        doc_id: String,
        text: String,
    }
    let path = path.as_ref();
    let raw = std::fs::read_to_string(path).map_err(|source| RetrievalError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut docs = Vec::new();
    for (i, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: Record =
            serde_json::from_str(line).map_err(|e| RetrievalError::MalformedLine {
                line: i + 1,
                reason: e.to_string(),
            })?;
        docs.push((record.doc_id, record.text));
    }
    Ok(docs)
}

/// Prepends retrieved passages as a reference block; an empty passage list
/// returns the prompt unchanged, and the base prompt is always a suffix of
/// the result.
pub fn augment_prompt(base_prompt: &str, passages: &[Passage]) -> String {
    if passages.is_empty() {
        return base_prompt.to_string();
    }
    let mut out = String::from("Reference material:\n");
    for passage in passages {
        out.push_str(&format!("[{}] {}\n", passage.doc_id, passage.text));
    }
    out.push('\n');
    out.push_str(base_prompt);
    out
}
