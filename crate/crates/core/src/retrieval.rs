//! Few-shot example store with cosine top-k retrieval over NL queries.
//!
//! Embeddings are sparse and L2-normalized. The store keeps an inverted
//! index from feature to postings, so a query only touches the records that
//! share at least one feature with it. Scores for every record accumulate in
//! ascending feature order, which makes them bit-identical to a plain sparse
//! dot product.

use std::cmp::Ordering;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

/// One NL/DSL pair plus its optional enrichments.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExampleRecord {
    pub nl: String,
    pub dsl: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signatures: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<String>,
}

impl ExampleRecord {
    pub fn new(nl: impl Into<String>, dsl: impl Into<String>) -> Self {
        Self {
            nl: nl.into(),
            dsl: dsl.into(),
            signatures: None,
            steps: None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RetrievalError {
    #[error("example store needs at least one record")]
    EmptyStore,
    #[error("record {index} has an empty {field}")]
    EmptyField { index: usize, field: &'static str },
    #[error("corpus line {line}: {source}")]
    CorpusLine {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("embedder failed: {0}")]
    Embedder(String),
}

/// Sparse embedding vector: strictly ascending indices below `dimension`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Embedding {
    pub dimension: usize,
    pub entries: Vec<(u32, f64)>,
}

impl Embedding {
    pub fn from_dense(values: &[f64]) -> Self {
        Self {
            dimension: values.len(),
            entries: values
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(i, v)| (i as u32, *v))
                .collect(),
        }
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|(_, v)| v * v).sum::<f64>().sqrt()
    }

    /// Scales to unit length. The zero vector stays zero.
    pub fn normalized(mut self) -> Self {
        let norm = self.norm();
        if norm > 0.0 {
            for (_, v) in &mut self.entries {
                *v /= norm;
            }
        }
        self
    }

    /// Dot product by merging the two ascending entry lists.
    pub fn dot(&self, other: &Embedding) -> f64 {
        let (mut i, mut j, mut sum) = (0, 0, 0.0);
        while i < self.entries.len() && j < other.entries.len() {
            match self.entries[i].0.cmp(&other.entries[j].0) {
                Ordering::Less => i += 1,
                Ordering::Greater => j += 1,
                Ordering::Equal => {
                    sum += self.entries[i].1 * other.entries[j].1;
                    i += 1;
                    j += 1;
                }
            }
        }
        sum
    }
}

/// Text embedding capability. Implementations must be deterministic and
/// return unit-norm vectors (or the zero vector for featureless text).
pub trait Embedder: Send + Sync {
    fn dimension(&self) -> usize;
    fn embed(&self, text: &str) -> Result<Embedding, RetrievalError>;
}

/// Hashed character-trigram term-frequency vectors.
///
/// Text is lowercased, whitespace runs collapse to one space and the result
/// is padded with a space on each side before trigrams are taken. Each
/// trigram is hashed with FNV-1a into `dimension` buckets.
#[derive(Debug, Clone)]
pub struct TrigramEmbedder {
    dimension: usize,
}

impl TrigramEmbedder {
    pub const DEFAULT_DIMENSION: usize = 1 << 20;

    pub fn new(dimension: usize) -> Self {
        assert!(dimension > 0 && dimension <= u32::MAX as usize);
        Self { dimension }
    }
}

impl Default for TrigramEmbedder {
    fn default() -> Self {
        Self::new(Self::DEFAULT_DIMENSION)
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x0100_0000_01b3);
    }
    hash
}

impl Embedder for TrigramEmbedder {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Result<Embedding, RetrievalError> {
        let words: Vec<String> = text.split_whitespace().map(str::to_lowercase).collect();
        if words.is_empty() {
            return Ok(Embedding {
                dimension: self.dimension,
                entries: Vec::new(),
            });
        }
        let padded: Vec<char> = format!(" {} ", words.join(" ")).chars().collect();
        let mut buckets: Vec<u32> = padded
            .windows(3)
            .map(|w| {
                let gram: String = w.iter().collect();
                (fnv1a(gram.as_bytes()) % self.dimension as u64) as u32
            })
            .collect();
        buckets.sort_unstable();
        let mut entries: Vec<(u32, f64)> = Vec::new();
        for bucket in buckets {
            match entries.last_mut() {
                Some((last, count)) if *last == bucket => *count += 1.0,
                _ => entries.push((bucket, 1.0)),
            }
        }
        Ok(Embedding {
            dimension: self.dimension,
            entries,
        }
        .normalized())
    }
}

/// A retrieved record with its cosine similarity to the query.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredRecord<'a> {
    pub index: usize,
    pub score: f64,
    pub record: &'a ExampleRecord,
}

/// Immutable example store; safe to query from many threads.
pub struct ExampleStore {
    records: Vec<ExampleRecord>,
    embeddings: Vec<Embedding>,
    /// feature -> (record index, weight), record indices ascending
    postings: std::collections::HashMap<u32, Vec<(u32, f64)>>,
    embedder: Arc<dyn Embedder>,
}

impl std::fmt::Debug for ExampleStore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExampleStore")
            .field("records", &self.records.len())
            .field("features", &self.postings.len())
            .finish()
    }
}

impl ExampleStore {
    pub fn build(records: Vec<ExampleRecord>, embedder: Arc<dyn Embedder>) -> Result<Self, RetrievalError> {
        if records.is_empty() {
            return Err(RetrievalError::EmptyStore);
        }
        let mut embeddings = Vec::with_capacity(records.len());
        let mut postings: std::collections::HashMap<u32, Vec<(u32, f64)>> = std::collections::HashMap::new();
        for (index, record) in records.iter().enumerate() {
            if record.nl.trim().is_empty() {
                return Err(RetrievalError::EmptyField { index, field: "nl" });
            }
            if record.dsl.trim().is_empty() {
                return Err(RetrievalError::EmptyField { index, field: "dsl" });
            }
            let embedding = embedder.embed(&record.nl)?;
            for &(feature, weight) in &embedding.entries {
                postings.entry(feature).or_default().push((index as u32, weight));
            }
            embeddings.push(embedding);
        }
        Ok(Self {
            records,
            embeddings,
            postings,
            embedder,
        })
    }

    /// Builds with the default trigram embedder.
    pub fn with_default_embedder(records: Vec<ExampleRecord>) -> Result<Self, RetrievalError> {
        Self::build(records, Arc::new(TrigramEmbedder::default()))
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[ExampleRecord] {
        &self.records
    }

    pub fn embedding(&self, index: usize) -> &Embedding {
        &self.embeddings[index]
    }

    pub fn embedder(&self) -> &dyn Embedder {
        self.embedder.as_ref()
    }

    /// Cosine similarity of the query against every record, by index.
    pub fn scores(&self, query: &Embedding) -> Vec<f64> {
        let mut scores = vec![0.0; self.records.len()];
        for &(feature, q) in &query.entries {
            if let Some(list) = self.postings.get(&feature) {
                for &(index, w) in list {
                    scores[index as usize] += q * w;
                }
            }
        }
        scores
    }

    /// The `k` most similar records, descending by score with ties broken
    /// by ascending record index.
    pub fn top_k(&self, query_nl: &str, k: usize) -> Result<Vec<ScoredRecord<'_>>, RetrievalError> {
        self.top_k_filtered(query_nl, k, |_, _| true)
    }

    /// Like [`top_k`](Self::top_k) but only over records accepted by `keep`.
    pub fn top_k_filtered<F>(
        &self,
        query_nl: &str,
        k: usize,
        keep: F,
    ) -> Result<Vec<ScoredRecord<'_>>, RetrievalError>
    where
        F: Fn(usize, &ExampleRecord) -> bool,
    {
        let query = self.embedder.embed(query_nl)?;
        let scores = self.scores(&query);
        let mut candidates: Vec<(usize, f64)> = scores
            .into_iter()
            .enumerate()
            .filter(|&(i, _)| keep(i, &self.records[i]))
            .collect();
        let by_rank = |a: &(usize, f64), b: &(usize, f64)| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0));
        if k < candidates.len() {
            if k == 0 {
                candidates.clear();
            } else {
                candidates.select_nth_unstable_by(k - 1, by_rank);
                candidates.truncate(k);
            }
        }
        candidates.sort_by(by_rank);
        Ok(candidates
            .into_iter()
            .map(|(index, score)| ScoredRecord {
                index,
                score,
                record: &self.records[index],
            })
            .collect())
    }
}

/// Parses a JSONL corpus, one [`ExampleRecord`] per non-blank line.
pub fn load_corpus(jsonl: &str) -> Result<Vec<ExampleRecord>, RetrievalError> {
    jsonl
        .lines()
        .enumerate()
        .filter(|(_, line)| !line.trim().is_empty())
        .map(|(i, line)| {
            serde_json::from_str(line).map_err(|source| RetrievalError::CorpusLine { line: i + 1, source })
        })
        .collect()
}
