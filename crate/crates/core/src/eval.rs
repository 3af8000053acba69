//! Batch evaluation of a backend against a labeled test set.
//!
//! Each record goes through retrieval, prompt assembly, generation, the harm
//! gate and the compiler, and is scored against its compiled ground truth.
//! Rows aggregate the per-record details per test set, and are always
//! recomputable from them with [`aggregate`].

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backends::{Backend, GenerationRequest};
use crate::catalog::{signatures_of, Catalog};
use crate::dsl::{compile_source, Flow, ParseError};
use crate::harms::{HarmCategory, HarmGate};
use crate::metrics::{flow_similarity, LatencyPercentiles};
use crate::prompting::{build_prompt, PromptError, PromptSpec, TagPosition, DEFAULT_INSTRUCTION};
use crate::retrieval::{ExampleRecord, ExampleStore, RetrievalError};

/// Few-shot counts used at test time.
pub const ALLOWED_K: [usize; 3] = [0, 3, 5];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub nl: String,
    #[serde(default)]
    pub ground_truth_dsl: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signatures: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tenant_tag: Option<String>,
    pub testset_type: String,
}

impl EvalRecord {
    pub fn new(
        nl: impl Into<String>,
        ground_truth_dsl: impl Into<String>,
        testset_type: impl Into<String>,
    ) -> Self {
        Self {
            id: None,
            nl: nl.into(),
            ground_truth_dsl: ground_truth_dsl.into(),
            signatures: None,
            steps: None,
            tenant_tag: None,
            testset_type: testset_type.into(),
        }
    }

    /// Harms test sets carry no reference flow.
    pub fn is_harms(&self) -> bool {
        is_harms_testset(&self.testset_type)
    }
}

/// `harms`, anything mentioning "harm", or one of the harm category names.
pub fn is_harms_testset(testset_type: &str) -> bool {
    testset_type.to_lowercase().contains("harm") || testset_type.parse::<HarmCategory>().is_ok()
}

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("no records to evaluate")]
    EmptyRecords,
    #[error("few-shot k must be one of 0, 3, 5; got {0}")]
    InvalidK(usize),
    #[error("k = {0} needs an example store")]
    MissingStore(usize),
    #[error("workers must be positive")]
    NoWorkers,
    #[error("record {index}: empty NL query")]
    EmptyQuery { index: usize },
    #[error("record {index}: ground truth is required outside harms test sets")]
    MissingGroundTruth { index: usize },
    #[error("record {index}: ground truth does not compile: {source}")]
    GroundTruth {
        index: usize,
        #[source]
        source: ParseError,
    },
    #[error("test set line {line}: {message}")]
    Line { line: usize, message: String },
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error("reports cover different test sets: {left:?} vs {right:?}")]
    MismatchedTestsets { left: Vec<String>, right: Vec<String> },
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
}

/// Reads a JSONL test set.
pub fn load_eval_records(jsonl: &str) -> Result<Vec<EvalRecord>, EvalError> {
    jsonl
        .lines()
        .enumerate()
        .filter(|(_, line)| !line.trim().is_empty())
        .map(|(i, line)| {
            serde_json::from_str(line).map_err(|e| EvalError::Line {
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Compiles every ground truth up front. Harms records may leave it empty.
pub fn compile_ground_truths(
    records: &[EvalRecord],
    catalog: &Catalog,
) -> Result<Vec<Option<Flow>>, EvalError> {
    records
        .iter()
        .enumerate()
        .map(|(index, record)| {
            if record.nl.trim().is_empty() {
                return Err(EvalError::EmptyQuery { index });
            }
            if record.ground_truth_dsl.trim().is_empty() {
                return if record.is_harms() {
                    Ok(None)
                } else {
                    Err(EvalError::MissingGroundTruth { index })
                };
            }
            compile_source(&record.ground_truth_dsl, catalog)
                .map(Some)
                .map_err(|source| EvalError::GroundTruth { index, source })
        })
        .collect()
}

#[derive(Clone)]
pub struct EvalConfig {
    pub k: usize,
    pub backend: Arc<dyn Backend>,
    pub catalog: Arc<Catalog>,
    pub gate: HarmGate,
    /// Drop store records identical to the test record from its few-shots.
    pub exclude_ground_truth: bool,
    pub seed: u64,
    pub workers: usize,
    pub max_tokens: u32,
    pub instruction: String,
    pub tag_position: TagPosition,
    pub model_label: String,
    pub train_label: String,
}

impl EvalConfig {
    pub fn new(backend: Arc<dyn Backend>, catalog: Arc<Catalog>) -> Self {
        Self {
            k: 0,
            model_label: backend.name().to_owned(),
            backend,
            catalog,
            gate: HarmGate::default(),
            exclude_ground_truth: true,
            seed: 0,
            workers: 1,
            max_tokens: 1024,
            instruction: DEFAULT_INSTRUCTION.trim_end().to_owned(),
            tag_position: TagPosition::Prefix,
            train_label: String::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeKind {
    Parsed,
    NonParsed,
    HarmFlagged,
    BackendError,
}

impl OutcomeKind {
    pub fn is_parsed(self) -> bool {
        self == OutcomeKind::Parsed
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetailRow {
    pub index: usize,
    pub id: String,
    pub testset_type: String,
    pub outcome: OutcomeKind,
    /// Zero unless the completion parsed and a reference exists.
    pub similarity: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Hallucinated `connector_operation` identifiers.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub unknown_ids: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub completion_tokens: Option<u32>,
    pub few_shots: Vec<usize>,
    pub completion: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub testset_type: String,
    pub n_samples: usize,
    pub non_parsed: usize,
    pub mean_similarity: f64,
    pub non_parse_pct: f64,
    #[serde(default)]
    pub latency: Option<Latency>,
    #[serde(default)]
    pub mean_completion_tokens: Option<f64>,
}

/// Serializable twin of [`LatencyPercentiles`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Latency {
    pub p10: f64,
    pub p50: f64,
    pub p90: f64,
}

impl From<LatencyPercentiles> for Latency {
    fn from(p: LatencyPercentiles) -> Self {
        Self {
            p10: p.p10,
            p50: p.p50,
            p90: p.p90,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: String,
    pub train_label: String,
    pub k: usize,
    pub seed: u64,
    pub catalog_version: String,
    pub rows: Vec<ReportRow>,
    pub details: Vec<DetailRow>,
}

/// Per-test-set rows in order of first appearance.
pub fn aggregate(details: &[DetailRow]) -> Vec<ReportRow> {
    let mut order: Vec<&str> = Vec::new();
    let mut groups: HashMap<&str, Vec<&DetailRow>> = HashMap::new();
    for row in details {
        let group = groups.entry(row.testset_type.as_str()).or_default();
        if group.is_empty() {
            order.push(&row.testset_type);
        }
        group.push(row);
    }
    order
        .into_iter()
        .map(|name| {
            let rows = &groups[name];
            let n = rows.len();
            let non_parsed = rows.iter().filter(|r| !r.outcome.is_parsed()).count();
            // summing in sorted order keeps the mean independent of record order
            let mut similarities: Vec<f64> = rows.iter().map(|r| r.similarity).collect();
            similarities.sort_by(f64::total_cmp);
            let mean_similarity = similarities.iter().sum::<f64>() / n as f64;
            let latencies: Vec<f64> = rows.iter().filter_map(|r| r.latency_s).collect();
            let tokens: Vec<u64> = rows
                .iter()
                .filter_map(|r| r.completion_tokens.map(u64::from))
                .collect();
            ReportRow {
                testset_type: name.to_owned(),
                n_samples: n,
                non_parsed,
                mean_similarity,
                non_parse_pct: non_parsed as f64 * 100.0 / n as f64,
                latency: LatencyPercentiles::from_samples(&latencies)
                    .ok()
                    .map(Latency::from),
                mean_completion_tokens: (!tokens.is_empty())
                    .then(|| tokens.iter().sum::<u64>() as f64 / tokens.len() as f64),
            }
        })
        .collect()
}

fn evaluate_one(
    index: usize,
    record: &EvalRecord,
    ground_truth: Option<&Flow>,
    store: Option<&ExampleStore>,
    config: &EvalConfig,
) -> Result<DetailRow, EvalError> {
    let few: Vec<(usize, ExampleRecord)> = match store {
        Some(store) if config.k > 0 => store
            .top_k_filtered(&record.nl, config.k, |_, candidate| {
                !(config.exclude_ground_truth
                    && candidate.nl == record.nl
                    && candidate.dsl == record.ground_truth_dsl)
            })?
            .into_iter()
            .map(|hit| (hit.index, hit.record.clone()))
            .collect(),
        _ => Vec::new(),
    };
    let spec = PromptSpec {
        instruction: config.instruction.clone(),
        nl_query: record.nl.clone(),
        signatures: record.signatures.clone(),
        steps: record.steps.clone(),
        few_shots: few.iter().map(|(_, r)| r.clone()).collect(),
        tenant_tag: record.tenant_tag.clone(),
        tag_position: config.tag_position,
    };
    let prompt = build_prompt(&spec)?;
    let id = record.id.clone().unwrap_or_else(|| index.to_string());
    let mut row = DetailRow {
        index,
        id: id.clone(),
        testset_type: record.testset_type.clone(),
        outcome: OutcomeKind::BackendError,
        similarity: 0.0,
        error: None,
        unknown_ids: Vec::new(),
        latency_s: None,
        completion_tokens: None,
        few_shots: few.iter().map(|(i, _)| *i).collect(),
        completion: String::new(),
    };
    let result = GenerationRequest::new(id, prompt.text, config.max_tokens)
        .and_then(|request| config.backend.generate(&request));
    let result = match result {
        Ok(result) => result,
        Err(error) => {
            row.error = Some(format!("backend: {error}"));
            return Ok(row);
        }
    };
    row.latency_s = Some(result.latency_s);
    row.completion_tokens = Some(result.completion_tokens);
    if config.gate.is_flagged(&result.text) {
        row.outcome = OutcomeKind::HarmFlagged;
    } else {
        match compile_source(&result.text, &config.catalog) {
            Ok(flow) => {
                row.outcome = OutcomeKind::Parsed;
                row.unknown_ids = signatures_of(&flow, &config.catalog).unknown;
                if let Some(reference) = ground_truth {
                    row.similarity = flow_similarity(&flow, reference).value();
                }
            }
            Err(error) => {
                row.outcome = OutcomeKind::NonParsed;
                row.error = Some(error.to_string());
            }
        }
    }
    row.completion = result.text;
    Ok(row)
}

/// Evaluates every record. Backend failures become non-parsed detail rows
/// with an error marker and never abort the batch.
pub fn run_eval(
    records: &[EvalRecord],
    store: Option<&ExampleStore>,
    config: &EvalConfig,
) -> Result<EvalReport, EvalError> {
    if records.is_empty() {
        return Err(EvalError::EmptyRecords);
    }
    if !ALLOWED_K.contains(&config.k) {
        return Err(EvalError::InvalidK(config.k));
    }
    if config.k > 0 && store.is_none() {
        return Err(EvalError::MissingStore(config.k));
    }
    if config.workers == 0 {
        return Err(EvalError::NoWorkers);
    }
    let ground_truths = compile_ground_truths(records, &config.catalog)?;
    let run = |index: usize| {
        evaluate_one(
            index,
            &records[index],
            ground_truths[index].as_ref(),
            store,
            config,
        )
    };
    let details: Vec<DetailRow> = if config.workers == 1 {
        (0..records.len()).map(run).collect::<Result<_, _>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build()
            .expect("thread pool");
        pool.install(|| {
            (0..records.len())
                .into_par_iter()
                .map(run)
                .collect::<Result<_, _>>()
        })?
    };
    Ok(EvalReport {
        model: config.model_label.clone(),
        train_label: config.train_label.clone(),
        k: config.k,
        seed: config.seed,
        catalog_version: config.catalog.version().to_owned(),
        rows: aggregate(&details),
        details,
    })
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn row(&self, testset_type: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.testset_type == testset_type)
    }

    pub fn to_text_table(&self) -> String {
        let header = [
            "Testset type",
            "N",
            "Similarity",
            "Non-parsed %",
            "P10",
            "P50",
            "P90",
            "Tokens",
        ];
        let fmt_opt = |v: Option<f64>, places: usize| v.map_or("-".to_owned(), |v| format!("{v:.places$}"));
        let body: Vec<[String; 8]> = self
            .rows
            .iter()
            .map(|r| {
                [
                    r.testset_type.clone(),
                    r.n_samples.to_string(),
                    format!("{:.2}", r.mean_similarity),
                    format!("{:.1}", r.non_parse_pct),
                    fmt_opt(r.latency.map(|l| l.p10), 2),
                    fmt_opt(r.latency.map(|l| l.p50), 2),
                    fmt_opt(r.latency.map(|l| l.p90), 2),
                    fmt_opt(r.mean_completion_tokens, 1),
                ]
            })
            .collect();
        render_table(&header, &body)
    }

    /// One line per test set: model, train data, test set, test-RAG k,
    /// similarity, non-parse %.
    pub fn to_csv(&self) -> Result<String, EvalError> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record([
            "model",
            "train_data",
            "test_set",
            "test_rag_k",
            "similarity",
            "non_parse_pct",
        ])?;
        for row in &self.rows {
            writer.write_record([
                self.model.clone(),
                self.train_label.clone(),
                row.testset_type.clone(),
                self.k.to_string(),
                format!("{:.2}", row.mean_similarity),
                format!("{:.1}", row.non_parse_pct),
            ])?;
        }
        let bytes = writer
            .into_inner()
            .map_err(|e| csv::Error::from(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

pub(crate) fn render_table<const N: usize>(header: &[&str; N], body: &[[String; N]]) -> String {
    let mut widths = header.map(|h| h.chars().count());
    for row in body {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    let mut line = |cells: Vec<&str>| {
        let padded: Vec<String> = cells
            .iter()
            .zip(widths)
            .enumerate()
            .map(|(i, (c, w))| {
                if i == 0 {
                    format!("{c:<w$}")
                } else {
                    format!("{c:>w$}")
                }
            })
            .collect();
        let _ = writeln!(out, "{}", padded.join("  ").trim_end());
    };
    line(header.to_vec());
    line(
        widths
            .iter()
            .map(|w| "-".repeat(*w))
            .collect::<Vec<_>>()
            .iter()
            .map(String::as_str)
            .collect(),
    );
    for row in body {
        line(row.iter().map(String::as_str).collect());
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaRow {
    pub testset_type: String,
    pub similarity: f64,
    pub non_parse_pct: f64,
    pub latency: Option<Latency>,
}

/// Differences `b - a` per test set, in `a`'s row order.
pub fn compare_reports(a: &EvalReport, b: &EvalReport) -> Result<Vec<DeltaRow>, EvalError> {
    let names = |r: &EvalReport| {
        r.rows
            .iter()
            .map(|row| row.testset_type.clone())
            .collect::<Vec<_>>()
    };
    let (left, right) = (names(a), names(b));
    if left.iter().collect::<HashSet<_>>() != right.iter().collect::<HashSet<_>>() {
        return Err(EvalError::MismatchedTestsets { left, right });
    }
    Ok(a.rows
        .iter()
        .map(|ra| {
            let rb = b.row(&ra.testset_type).expect("testsets match");
            DeltaRow {
                testset_type: ra.testset_type.clone(),
                similarity: rb.mean_similarity - ra.mean_similarity,
                non_parse_pct: rb.non_parse_pct - ra.non_parse_pct,
                latency: ra.latency.zip(rb.latency).map(|(la, lb)| Latency {
                    p10: lb.p10 - la.p10,
                    p50: lb.p50 - la.p50,
                    p90: lb.p90 - la.p90,
                }),
            }
        })
        .collect())
}

pub fn render_delta_table(deltas: &[DeltaRow]) -> String {
    let header = [
        "Testset type",
        "dSimilarity",
        "dNon-parsed %",
        "dP10",
        "dP50",
        "dP90",
    ];
    let latency = |d: &DeltaRow, f: fn(&Latency) -> f64| {
        d.latency
            .as_ref()
            .map_or("-".to_owned(), |l| format!("{:+.2}", f(l)))
    };
    let body: Vec<[String; 6]> = deltas
        .iter()
        .map(|d| {
            [
                d.testset_type.clone(),
                format!("{:+.2}", d.similarity),
                format!("{:+.1}", d.non_parse_pct),
                latency(d, |l| l.p10),
                latency(d, |l| l.p50),
                latency(d, |l| l.p90),
            ]
        })
        .collect();
    render_table(&header, &body)
}
