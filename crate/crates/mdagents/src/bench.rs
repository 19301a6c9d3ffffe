//! Dataset ingestion, batched execution across settings, ablation sweeps, and
//! report emission.
//!
//! Batches fan out per-query tasks up to a parallelism bound; results are
//! assembled in dataset order, so reports are identical at any parallelism.
//! With a scripted backend and a fixed seed, reruns are byte-identical.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use futures::StreamExt;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::time::Instant;

use crate::core::{AnswerOption, Attachment, Query};
use crate::gateway::{ChatBackend, ChatParams, Gateway};
use crate::metrics::{
    compare_settings, consensus_trace, score, ComparisonTable, MetricsError, QueryRecord,
    RunReport,
};
use crate::orchestrator::RoutingConfig;
use crate::pipelines::{FewShotError, FewShotSet, Pipeline, Setting};
use crate::retrieval::{index_corpus, load_corpus_jsonl, RetrievalError, Retriever};
use crate::templates::{TemplateError, TemplateSet};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("cannot read dataset `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("dataset `{path}` produced no usable queries ({rejected} rejected lines)")]
    EmptyDataset { path: String, rejected: usize },
    #[error("dataset contains duplicate ids: {0:?}")]
    DuplicateId(Vec<String>),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error(transparent)]
    Retrieval(#[from] RetrievalError),
    #[error(transparent)]
    FewShot(#[from] FewShotError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("cannot write report `{path}`: {source}")]
    Write {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Batch run parameters. `temperature_list` and `agent_count_list` feed the
/// ablation sweeps; plain benchmark runs use the first temperature entry.
#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub dataset_path: PathBuf,
    pub sample_count: usize,
    pub settings: Vec<Setting>,
    pub seed: u64,
    pub temperature_list: Vec<f64>,
    pub agent_count_list: Vec<usize>,
    pub parallelism: usize,
    pub routing: RoutingConfig,
    pub rag: bool,
    pub corpus_path: Option<PathBuf>,
    pub retrieval_k: usize,
    pub templates_dir: Option<PathBuf>,
    pub fewshot_path: Option<PathBuf>,
    pub model_id: String,
    pub max_tokens: u32,
    pub per_query_timeout: Duration,
}

impl BenchConfig {
    pub fn new(dataset_path: impl Into<PathBuf>) -> Self {
        Self {
            dataset_path: dataset_path.into(),
            sample_count: 50,
            settings: Setting::all().to_vec(),
            seed: 42,
            temperature_list: vec![0.7],
            agent_count_list: Vec::new(),
            parallelism: 4,
            routing: RoutingConfig::default(),
            rag: false,
            corpus_path: None,
            retrieval_k: 3,
            templates_dir: None,
            fewshot_path: None,
            model_id: "gpt-4".into(),
            max_tokens: 1024,
            per_query_timeout: Duration::from_secs(300),
        }
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        if self.sample_count == 0 {
            return Err(BenchError::Config("sample_count must be >= 1".into()));
        }
        if self.settings.is_empty() {
            return Err(BenchError::Config("at least one setting is required".into()));
        }
        if self.parallelism == 0 {
            return Err(BenchError::Config("parallelism must be >= 1".into()));
        }
        for t in &self.temperature_list {
            if !(0.0..=2.0).contains(t) {
                return Err(BenchError::Config(format!("temperature {t} outside [0, 2]")));
            }
        }
        if self.rag && self.corpus_path.is_none() {
            return Err(BenchError::Config("--rag on requires --corpus <path>".into()));
        }
        self.routing.validate().map_err(BenchError::Config)
    }
}

/// One dataset line that failed ingestion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectRecord {
    pub line: usize,
    pub error: String,
    pub raw: String,
}

#[derive(Debug, Clone)]
pub struct DatasetLoad {
    pub queries: Vec<Query>,
    pub rejects: Vec<RejectRecord>,
}

#[derive(Deserialize)]
struct DatasetRecord {
    id: String,
    question: String,
    #[serde(default)]
    options: Option<BTreeMap<String, String>>,
    #[serde(default)]
    answer: Option<String>,
    #[serde(default)]
    attachments: Option<Vec<AttachmentRecord>>,
}

#[derive(Deserialize)]
struct AttachmentRecord {
    media_type: String,
    locator: String,
}

fn record_to_query(record: DatasetRecord) -> Result<Query, String> {
    let options = match record.options {
        Some(map) => map
            .into_iter()
            .map(|(label, body)| {
                let mut chars = label.chars();
                match (chars.next(), chars.next()) {
                    (Some(c), None) if c.is_ascii_uppercase() => {
                        Ok(AnswerOption { label: c, body })
                    }
                    _ => Err(format!("option label `{label}` is not a single uppercase letter")),
                }
            })
            .collect::<Result<Vec<_>, _>>()?,
        None => Vec::new(),
    };
    let gold = match record.answer {
        Some(answer) => {
            let mut chars = answer.chars();
            match (chars.next(), chars.next()) {
                (Some(c), None) if c.is_ascii_alphabetic() => Some(c.to_ascii_uppercase()),
                _ => return Err(format!("answer `{answer}` is not a single letter")),
            }
        }
        None => None,
    };
    let query = Query {
        id: record.id,
        text: record.question,
        options,
        attachments: record
            .attachments
            .unwrap_or_default()
            .into_iter()
            .map(|a| Attachment { media_type: a.media_type, locator: a.locator })
            .collect(),
        gold,
    };
    query.validate().map_err(|e| e.to_string())?;
    Ok(query)
}

/// Parses one dataset-format record (`{"id", "question", "options",
/// "answer", "attachments"}`) into a query.
pub fn parse_query_record(json: &str) -> Result<Query, String> {
    serde_json::from_str::<DatasetRecord>(json)
        .map_err(|e| e.to_string())
        .and_then(record_to_query)
}

/// Parses a JSONL dataset. Malformed lines go to the rejects list instead of
/// failing the load, unless nothing parses at all. Duplicate ids are fatal.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<DatasetLoad, BenchError> {
    let path = path.as_ref();
    let raw = std::fs::read_to_string(path).map_err(|source| BenchError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut queries = Vec::new();
    let mut rejects = Vec::new();
    for (i, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed: Result<Query, String> = serde_json::from_str::<DatasetRecord>(line)
            .map_err(|e| e.to_string())
            .and_then(record_to_query);
        match parsed {
            Ok(query) => queries.push(query),
            Err(error) => rejects.push(RejectRecord {
                line: i + 1,
                error,
                raw: line.to_string(),
            }),
        }
    }
    if queries.is_empty() {
        return Err(BenchError::EmptyDataset {
            path: path.display().to_string(),
            rejected: rejects.len(),
        });
    }
    let mut counts: BTreeMap<&str, u32> = BTreeMap::new();
    for query in &queries {
        *counts.entry(query.id.as_str()).or_insert(0) += 1;
    }
    let duplicates: Vec<String> = counts
        .into_iter()
        .filter(|(_, c)| *c > 1)
        .map(|(id, _)| id.to_string())
        .collect();
    if !duplicates.is_empty() {
        return Err(BenchError::DuplicateId(duplicates));
    }
    Ok(DatasetLoad { queries, rejects })
}

/// Deterministic pseudo-random subset of `n` queries, preserving dataset
/// order. The same (seed, input order) always selects the same subset; `n`
/// at or above the input size returns everything.
pub fn sample(queries: &[Query], n: usize, seed: u64) -> Vec<Query> {
    if n >= queries.len() {
        return queries.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut indices: Vec<usize> = (0..queries.len()).collect();
    for i in 0..n {
        let j = rng.random_range(i..indices.len());
        indices.swap(i, j);
    }
    let mut chosen = indices[..n].to_vec();
    chosen.sort_unstable();
    chosen.into_iter().map(|i| queries[i].clone()).collect()
}

/// Full output of one benchmark invocation.
#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub seed: u64,
    pub sample_count: usize,
    pub temperature: f64,
    pub reports: Vec<RunReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub comparison: Option<ComparisonTable>,
    pub rejects: Vec<RejectRecord>,
}

impl BenchReport {
    pub fn report_json(&self) -> String {
        let mut json = serde_json::to_string_pretty(self).expect("report serializes");
        json.push('\n');
        json
    }

    pub fn summary_csv(&self) -> String {
        crate::metrics::summary_csv(&self.reports)
    }

    /// Writes `report.json`, `summary.csv`, and `rejects.jsonl` under
    /// `out_dir`.
    pub fn write_files(&self, out_dir: impl AsRef<Path>) -> Result<(), BenchError> {
        let out_dir = out_dir.as_ref();
        let write = |name: &str, content: String| -> Result<(), BenchError> {
            let path = out_dir.join(name);
            std::fs::write(&path, content).map_err(|source| BenchError::Write {
                path: path.display().to_string(),
                source,
            })
        };
        std::fs::create_dir_all(out_dir).map_err(|source| BenchError::Write {
            path: out_dir.display().to_string(),
            source,
        })?;
        write("report.json", self.report_json())?;
        write("summary.csv", self.summary_csv())?;
        let mut rejects = String::new();
        for reject in &self.rejects {
            rejects.push_str(&serde_json::to_string(reject).expect("reject serializes"));
            rejects.push('\n');
        }
        write("rejects.jsonl", rejects)
    }
}

struct RunContext {
    gateway: Arc<Gateway>,
    templates: Arc<TemplateSet>,
    retriever: Option<Arc<dyn Retriever>>,
    fewshot: FewShotSet,
}

fn build_context(
    config: &BenchConfig,
    backend: Arc<dyn ChatBackend>,
) -> Result<RunContext, BenchError> {
    let templates = Arc::new(match &config.templates_dir {
        Some(dir) => TemplateSet::from_dir(dir)?,
        None => TemplateSet::embedded(),
    });
    let retriever: Option<Arc<dyn Retriever>> = if config.rag {
        let path = config
            .corpus_path
            .as_ref()
            .ok_or_else(|| BenchError::Config("--rag on requires --corpus <path>".into()))?;
        let docs = load_corpus_jsonl(path)?;
        Some(Arc::new(index_corpus(docs)?))
    } else {
        None
    };
    let fewshot = match &config.fewshot_path {
        Some(path) => FewShotSet::from_json_file(path)?,
        None => FewShotSet::embedded_default(),
    };
    Ok(RunContext {
        gateway: Arc::new(Gateway::new(backend)),
        templates,
        retriever,
        fewshot,
    })
}

fn build_pipeline(config: &BenchConfig, context: &RunContext, temperature: f64) -> Pipeline {
    let params = ChatParams {
        model_id: config.model_id.clone(),
        temperature,
        max_tokens: config.max_tokens,
    };
    let mut pipeline = Pipeline::new(context.gateway.clone(), context.templates.clone())
        .with_routing(config.routing.clone())
        .with_params(params)
        .with_fewshot(Some(context.fewshot.clone()));
    if let Some(retriever) = &context.retriever {
        pipeline = pipeline.with_retriever(retriever.clone(), config.retrieval_k);
    }
    pipeline
}

async fn run_queries(
    pipeline: Arc<Pipeline>,
    queries: &[Query],
    setting: Setting,
    parallelism: usize,
    timeout: Duration,
) -> Vec<QueryRecord> {
    futures::stream::iter(queries.iter().cloned())
        .map(|query| {
            let pipeline = pipeline.clone();
            async move {
                let started = Instant::now();
                let outcome =
                    tokio::time::timeout(timeout, pipeline.run_setting(&query, setting)).await;
                let wall_time = started.elapsed();
                match outcome {
                    Ok(Ok((decision, deliberation))) => QueryRecord {
                        query_id: query.id.clone(),
                        correct: query.gold.map(|g| score(&decision, g)),
                        usage: deliberation.usage.clone(),
                        consensus_trace: consensus_trace(&deliberation),
                        decision: Some(decision),
                        wall_time,
                        error: None,
                    },
                    Ok(Err(failure)) => {
                        let partial = failure.partial();
                        QueryRecord {
                            query_id: query.id.clone(),
                            decision: None,
                            correct: query.gold.map(|_| false),
                            usage: partial.usage.clone(),
                            consensus_trace: consensus_trace(partial),
                            wall_time,
                            error: Some(failure.to_string()),
                        }
                    }
                    Err(_) => QueryRecord {
                        query_id: query.id.clone(),
                        decision: None,
                        correct: query.gold.map(|_| false),
                        usage: Default::default(),
                        consensus_trace: Vec::new(),
                        wall_time,
                        error: Some(format!(
                            "query timed out after {}s",
                            timeout.as_secs()
                        )),
                    },
                }
            }
        })
        .buffered(parallelism.max(1))
        .collect()
        .await
}

/// Runs every configured setting over the sampled query set. Per-query
/// failures are recorded and the batch continues; only configuration and
/// dataset problems are fatal.
pub async fn run_benchmark(
    config: &BenchConfig,
    backend: Arc<dyn ChatBackend>,
) -> Result<BenchReport, BenchError> {
    config.validate()?;
    let DatasetLoad { queries, rejects } = load_dataset(&config.dataset_path)?;
    let sampled = sample(&queries, config.sample_count, config.seed);
    let context = build_context(config, backend)?;
    let temperature = config.temperature_list.first().copied().unwrap_or(0.7);
    let pipeline = Arc::new(build_pipeline(config, &context, temperature));

    let mut reports = Vec::new();
    for &setting in &config.settings {
        let records = run_queries(
            pipeline.clone(),
            &sampled,
            setting,
            config.parallelism,
            config.per_query_timeout,
        )
        .await;
        reports.push(RunReport::new(setting, records));
    }
    let comparison = if reports.len() >= 2 {
        Some(compare_settings(&reports)?)
    } else {
        None
    };
    Ok(BenchReport {
        seed: config.seed,
        sample_count: sampled.len(),
        temperature,
        reports,
        comparison,
        rejects,
    })
}

/// Swept parameter for [`ablate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AblationDimension {
    Agents,
    Temperature,
}

impl AblationDimension {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Agents => "agents",
            Self::Temperature => "temperature",
        }
    }
}

/// One swept value and its full benchmark output.
#[derive(Debug, Serialize)]
pub struct SweepRun {
    pub value: String,
    pub report: BenchReport,
}

#[derive(Debug, Serialize)]
pub struct SweepReport {
    pub dimension: AblationDimension,
    pub runs: Vec<SweepRun>,
}

impl SweepReport {
    /// Rows of (dimension value, setting, accuracy, total_calls, mean_calls).
    pub fn sweep_csv(&self) -> String {
        let mut out = format!(
            "{},setting,accuracy,total_calls,mean_calls\n",
            self.dimension.as_str()
        );
        for run in &self.runs {
            for report in &run.report.reports {
                let accuracy = report
                    .aggregate
                    .accuracy
                    .map(|a| format!("{a:.4}"))
                    .unwrap_or_default();
                out.push_str(&format!(
                    "{},{},{},{},{:.4}\n",
                    run.value,
                    report.setting,
                    accuracy,
                    report.aggregate.total_calls,
                    report.aggregate.mean_calls,
                ));
            }
        }
        out
    }

    /// Writes `sweep.csv` plus one report directory per swept value.
    pub fn write_files(&self, out_dir: impl AsRef<Path>) -> Result<(), BenchError> {
        let out_dir = out_dir.as_ref();
        std::fs::create_dir_all(out_dir).map_err(|source| BenchError::Write {
            path: out_dir.display().to_string(),
            source,
        })?;
        for run in &self.runs {
            let subdir = out_dir.join(format!("{}_{}", self.dimension.as_str(), run.value));
            run.report.write_files(&subdir)?;
        }
        let path = out_dir.join("sweep.csv");
        std::fs::write(&path, self.sweep_csv()).map_err(|source| BenchError::Write {
            path: path.display().to_string(),
            source,
        })
    }
}

/// Runs one full benchmark per swept value. Agent sweeps vary
/// `routing.max_agents`; temperature sweeps vary the request temperature.
pub async fn ablate(
    config: &BenchConfig,
    dimension: AblationDimension,
    backend: Arc<dyn ChatBackend>,
) -> Result<SweepReport, BenchError> {
    let mut runs = Vec::new();
    match dimension {
        AblationDimension::Agents => {
            if config.agent_count_list.is_empty() {
                return Err(BenchError::Config("agent sweep needs a non-empty value list".into()));
            }
            for &agents in &config.agent_count_list {
                let mut swept = config.clone();
                swept.routing.max_agents = agents;
                let report = run_benchmark(&swept, backend.clone()).await?;
                runs.push(SweepRun { value: agents.to_string(), report });
            }
        }
        AblationDimension::Temperature => {
            if config.temperature_list.is_empty() {
                return Err(BenchError::Config(
                    "temperature sweep needs a non-empty value list".into(),
                ));
            }
            for &temperature in &config.temperature_list {
                let mut swept = config.clone();
                swept.temperature_list = vec![temperature];
                let report = run_benchmark(&swept, backend.clone()).await?;
                runs.push(SweepRun { value: temperature.to_string(), report });
            }
        }
    }
    Ok(SweepReport { dimension, runs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{ScriptRule, ScriptedBackend};
    use std::io::Write;

    fn write_jsonl(lines: &[&str]) -> tempfile::NamedTempFile {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        for line in lines {
            writeln!(file, "{line}").unwrap();
        }
        file.flush().unwrap();
        file
    }

    fn mcq_line(id: &str, question: &str, answer: char) -> String {
        format!(
            r#"{{"id":"{id}","question":"{question}","options":{{"A":"opt a","B":"opt b","C":"opt c","D":"opt d"}},"answer":"{answer}"}}"#
        )
    }

    #[test]
    fn dataset_loads_well_formed_lines() {
        let file = write_jsonl(&[
            &mcq_line("q1", "first question", 'A'),
            &mcq_line("q2", "second question", 'B'),
            r#"{"id":"q3","question":"open ended, no options"}"#,
        ]);
        let load = load_dataset(file.path()).unwrap();
        assert_eq!(load.queries.len(), 3);
        assert!(load.rejects.is_empty());
        assert_eq!(load.queries[0].gold, Some('A'));
        assert!(load.queries[2].options.is_empty());
        assert_eq!(load.queries[2].gold, None);
    }

    #[test]
    fn dataset_missing_answer_is_unscored_not_rejected() {
        let file = write_jsonl(&[
            r#"{"id":"q1","question":"has options, no answer","options":{"A":"x","B":"y"}}"#,
        ]);
        let load = load_dataset(file.path()).unwrap();
        assert_eq!(load.queries[0].gold, None);
        assert_eq!(load.queries[0].options.len(), 2);
    }

    #[test]
    fn dataset_collects_rejects_without_failing() {
        let file = write_jsonl(&[
            &mcq_line("q1", "good", 'A'),
            "not json at all",
            r#"{"id":"q2","question":"bad labels","options":{"A":"x","C":"gap"}}"#,
            r#"{"id":"q3","question":"bad answer","options":{"A":"x","B":"y"},"answer":"Z"}"#,
        ]);
        let load = load_dataset(file.path()).unwrap();
        assert_eq!(load.queries.len(), 1);
        assert_eq!(load.rejects.len(), 3);
        assert_eq!(load.rejects[0].line, 2);
    }

    #[test]
    fn dataset_all_bad_lines_is_empty_dataset() {
        let file = write_jsonl(&["oops", "also not json"]);
        assert!(matches!(
            load_dataset(file.path()).unwrap_err(),
            BenchError::EmptyDataset { rejected: 2, .. }
        ));
    }

    #[test]
    fn dataset_duplicate_ids_are_fatal_and_listed() {
        let file = write_jsonl(&[
            &mcq_line("dup", "one", 'A'),
            &mcq_line("dup", "two", 'B'),
            &mcq_line("q2", "three", 'C'),
        ]);
        match load_dataset(file.path()).unwrap_err() {
            BenchError::DuplicateId(ids) => assert_eq!(ids, vec!["dup".to_string()]),
            other => panic!("expected duplicate id error, got {other}"),
        }
    }

    fn numbered_queries(n: usize) -> Vec<Query> {
        (0..n)
            .map(|i| Query::free_text(format!("q{i:03}"), format!("question number {i}")))
            .collect()
    }

    #[test]
    fn sample_is_deterministic_and_seed_sensitive() {
        let queries = numbered_queries(100);
        let a = sample(&queries, 50, 1);
        let b = sample(&queries, 50, 1);
        let c = sample(&queries, 50, 2);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.len(), 50);
        // dataset order is preserved within the subset
        let ids: Vec<&str> = a.iter().map(|q| q.id.as_str()).collect();
        let mut sorted = ids.clone();
        sorted.sort_unstable();
        assert_eq!(ids, sorted);
    }

    #[test]
    fn sample_at_or_above_population_returns_everything() {
        let queries = numbered_queries(10);
        assert_eq!(sample(&queries, 10, 7), queries);
        assert_eq!(sample(&queries, 99, 7), queries);
    }

    fn scripted_for(queries: &[Query]) -> Vec<ScriptRule> {
        let mut rules = Vec::new();
        for query in queries {
            rules.push(ScriptRule::reply("moderator", &query.text, "low"));
            rules.push(ScriptRule::reply(
                "solo",
                &query.text,
                format!("ANSWER: {}", query.gold.unwrap()),
            ));
        }
        rules.push(ScriptRule::catch_all("ANSWER: A"));
        rules
    }

    fn mcq_dataset_file(n: usize) -> tempfile::NamedTempFile {
        let lines: Vec<String> = (0..n)
            .map(|i| mcq_line(&format!("q{i:03}"), &format!("case number {i:03}"), 'B'))
            .collect();
        let refs: Vec<&str> = lines.iter().map(String::as_str).collect();
        write_jsonl(&refs)
    }

    #[tokio::test]
    async fn benchmark_runs_adaptive_all_low_and_scores_perfectly() {
        let file = mcq_dataset_file(10);
        let load = load_dataset(file.path()).unwrap();
        let backend =
            Arc::new(ScriptedBackend::from_rules(scripted_for(&load.queries)).unwrap());
        let mut config = BenchConfig::new(file.path());
        config.sample_count = 10;
        config.settings = vec![Setting::Adaptive];
        let report = run_benchmark(&config, backend).await.unwrap();
        assert_eq!(report.reports.len(), 1);
        let run = &report.reports[0];
        assert_eq!(run.aggregate.accuracy, Some(1.0));
        // all-low adaptive: 2 calls per query
        assert_eq!(run.aggregate.total_calls, 20);
    }

    #[tokio::test]
    async fn benchmark_isolates_per_query_faults() {
        let file = mcq_dataset_file(6);
        let load = load_dataset(file.path()).unwrap();
        let mut rules = vec![ScriptRule::fault(
            "moderator",
            "case number 002",
            crate::gateway::ScriptedFault::Auth,
        )];
        rules.extend(scripted_for(&load.queries));
        let backend = Arc::new(ScriptedBackend::from_rules(rules).unwrap());
        let mut config = BenchConfig::new(file.path());
        config.sample_count = 6;
        config.settings = vec![Setting::Adaptive];
        let report = run_benchmark(&config, backend).await.unwrap();
        let run = &report.reports[0];
        let failed: Vec<&QueryRecord> =
            run.per_query.iter().filter(|r| r.error.is_some()).collect();
        assert_eq!(failed.len(), 1);
        assert_eq!(failed[0].query_id, "q002");
        assert_eq!(failed[0].correct, Some(false));
        assert_eq!(run.aggregate.scored, 6);
        assert_eq!(run.aggregate.correct, 5);
    }

    #[tokio::test]
    async fn ablate_rejects_empty_value_lists() {
        let file = mcq_dataset_file(2);
        let backend = Arc::new(ScriptedBackend::from_rules(vec![]).unwrap());
        let mut config = BenchConfig::new(file.path());
        config.agent_count_list = Vec::new();
        assert!(matches!(
            ablate(&config, AblationDimension::Agents, backend).await.unwrap_err(),
            BenchError::Config(_)
        ));
    }

    #[test]
    fn config_validation_catches_bad_values() {
        let mut config = BenchConfig::new("x.jsonl");
        config.temperature_list = vec![3.5];
        assert!(matches!(config.validate().unwrap_err(), BenchError::Config(_)));
        let mut config = BenchConfig::new("x.jsonl");
        config.rag = true;
        assert!(config.validate().is_err());
        let mut config = BenchConfig::new("x.jsonl");
        config.sample_count = 0;
        assert!(config.validate().is_err());
    }
}
