//! Command-line surface: one-shot questions, benchmarks, and ablation sweeps.
//!
//! Exit codes: 0 success (including benchmarks with recorded per-query
//! failures), 1 configuration/usage errors, 2 backend failures while
//! answering a query.

mod resolve;

use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use mdagents::bench::{self, AblationDimension, BenchConfig};
use mdagents::core::Query;
use mdagents::gateway::{ChatBackend, ChatParams, Gateway, LiveBackend, ScriptedBackend};
use mdagents::pipelines::{Pipeline, Setting};
use mdagents::retrieval::{index_corpus, load_corpus_jsonl, Retriever};
use mdagents::templates::TemplateSet;

use resolve::{BackendChoice, FileConfig, Resolved};

#[derive(Parser, Debug)]
#[command(
    name = "mdagents",
    version,
    about = "Adaptive multi-agent decision pipeline: complexity-gated routing of queries \
             to solo, team, or tiered-team deliberation"
)]
struct Cli {
    #[command(flatten)]
    common: CommonOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default, Clone)]
pub struct CommonOpts {
    /// Backend: `live` (uses MDAGENTS_BASE_URL / MDAGENTS_API_KEY) or
    /// `scripted:<path>`
    #[arg(long, global = true)]
    pub backend: Option<String>,
    /// JSON config file with the same field names as the flags
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Prompt template directory overriding the built-in defaults
    #[arg(long, global = true)]
    pub templates: Option<PathBuf>,
    /// Output directory; nothing is written outside it
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// JSONL dataset path (bench/ablate)
    #[arg(long, global = true)]
    pub dataset: Option<PathBuf>,
    /// Number of queries sampled from the dataset
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    /// Setting(s): solo|group|adaptive, comma-separated for bench
    #[arg(long, global = true)]
    pub setting: Option<String>,
    #[arg(long = "max-rounds", global = true)]
    pub max_rounds: Option<u32>,
    #[arg(long = "max-agents", global = true)]
    pub max_agents: Option<usize>,
    #[arg(long, global = true)]
    pub temperature: Option<f64>,
    /// Retrieval augmentation: on|off
    #[arg(long, global = true)]
    pub rag: Option<String>,
    /// JSONL corpus of {"doc_id", "text"} records
    #[arg(long, global = true)]
    pub corpus: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub parallelism: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Answer a single query and write its transcript
    Ask {
        /// Question text (free-form; use --file for multiple-choice records)
        text: Option<String>,
        /// JSON file holding one dataset-format query record
        #[arg(long)]
        file: Option<PathBuf>,
    },
    /// Run the benchmark harness over a JSONL dataset
    Bench,
    /// Sweep one parameter, running a full benchmark per value
    Ablate {
        /// Swept dimension: agents | temperature
        dimension: String,
        /// Comma-separated values, e.g. `2,3,5` or `0.3,1.2`
        #[arg(long)]
        values: String,
    },
}

enum CliError {
    Config(String),
    Backend(String),
}

impl CliError {
    fn config(msg: impl Into<String>) -> Self {
        Self::Config(msg.into())
    }
}

fn build_backend(resolved: &Resolved) -> Result<Arc<dyn ChatBackend>, CliError> {
    match resolved
        .backend
        .as_ref()
        .ok_or_else(|| CliError::config("no backend configured; pass --backend live or --backend scripted:<path>"))?
    {
        BackendChoice::Live => LiveBackend::from_env()
            .map(|b| Arc::new(b) as Arc<dyn ChatBackend>)
            .map_err(|e| CliError::config(e.to_string())),
        BackendChoice::Scripted(path) => ScriptedBackend::load_script(path)
            .map(|b| Arc::new(b) as Arc<dyn ChatBackend>)
            .map_err(|e| CliError::config(e.to_string())),
    }
}

fn build_retriever(resolved: &Resolved) -> Result<Option<Arc<dyn Retriever>>, CliError> {
    if !resolved.rag {
        return Ok(None);
    }
    let path = resolved
        .corpus
        .as_ref()
        .ok_or_else(|| CliError::config("--rag on requires --corpus <path>"))?;
    let docs = load_corpus_jsonl(path).map_err(|e| CliError::config(e.to_string()))?;
    let index = index_corpus(docs).map_err(|e| CliError::config(e.to_string()))?;
    Ok(Some(Arc::new(index)))
}

fn build_templates(resolved: &Resolved) -> Result<TemplateSet, CliError> {
    match &resolved.templates {
        Some(dir) => TemplateSet::from_dir(dir).map_err(|e| CliError::config(e.to_string())),
        None => Ok(TemplateSet::embedded()),
    }
}

async fn cmd_ask(
    resolved: Resolved,
    text: Option<String>,
    file: Option<PathBuf>,
) -> Result<(), CliError> {
    let query = match (text, file) {
        (Some(text), None) => Query::free_text("cli-query", text),
        (None, Some(path)) => {
            let raw = std::fs::read_to_string(&path).map_err(|e| {
                CliError::config(format!("cannot read query file `{}`: {e}", path.display()))
            })?;
            bench::parse_query_record(&raw).map_err(CliError::Config)?
        }
        (Some(_), Some(_)) => {
            return Err(CliError::config("pass either question text or --file, not both"))
        }
        (None, None) => return Err(CliError::config("pass question text or --file <record.json>")),
    };

    let setting = match resolved.settings.as_deref() {
        None | Some([]) => Setting::Adaptive,
        Some([one]) => *one,
        Some(_) => return Err(CliError::config("ask takes a single --setting value")),
    };
    let backend = build_backend(&resolved)?;
    let templates = Arc::new(build_templates(&resolved)?);
    let gateway = Arc::new(Gateway::new(backend));
    let mut pipeline = Pipeline::new(gateway, templates)
        .with_routing(resolved.routing.clone())
        .with_params(ChatParams {
            temperature: resolved.temperature,
            ..ChatParams::default()
        });
    if let Some(retriever) = build_retriever(&resolved)? {
        pipeline = pipeline.with_retriever(retriever, 3);
    }

    let (decision, deliberation) = pipeline
        .run_setting(&query, setting)
        .await
        .map_err(|e| CliError::Backend(e.to_string()))?;

    std::fs::create_dir_all(&resolved.out).map_err(|e| {
        CliError::config(format!("cannot create out dir `{}`: {e}", resolved.out.display()))
    })?;
    let transcript_path = resolved.out.join("transcript.json");
    let transcript = serde_json::json!({
        "decision": decision,
        "deliberation": deliberation,
    });
    std::fs::write(
        &transcript_path,
        serde_json::to_string_pretty(&transcript).expect("transcript serializes") + "\n",
    )
    .map_err(|e| CliError::config(format!("cannot write transcript: {e}")))?;

    println!("complexity: {}", decision.complexity);
    println!("answer: {}", decision.answer);
    println!("calls: {}", decision.usage.total_calls);
    println!("transcript: {}", transcript_path.display());
    Ok(())
}

fn bench_config(resolved: &Resolved) -> Result<BenchConfig, CliError> {
    let dataset = resolved
        .dataset
        .clone()
        .ok_or_else(|| CliError::config("--dataset <path> is required"))?;
    let mut config = BenchConfig::new(dataset);
    config.sample_count = resolved.samples;
    if let Some(settings) = &resolved.settings {
        config.settings = settings.clone();
    }
    config.seed = resolved.seed;
    config.temperature_list = vec![resolved.temperature];
    config.parallelism = resolved.parallelism;
    config.routing = resolved.routing.clone();
    config.rag = resolved.rag;
    config.corpus_path = resolved.corpus.clone();
    config.templates_dir = resolved.templates.clone();
    Ok(config)
}

async fn cmd_bench(resolved: Resolved) -> Result<(), CliError> {
    let config = bench_config(&resolved)?;
    let backend = build_backend(&resolved)?;
    let report = bench::run_benchmark(&config, backend)
        .await
        .map_err(|e| CliError::config(e.to_string()))?;
    report
        .write_files(&resolved.out)
        .map_err(|e| CliError::config(e.to_string()))?;
    if let Some(comparison) = &report.comparison {
        print!("{}", comparison.render());
    }
    let failures: usize = report
        .reports
        .iter()
        .map(|r| r.per_query.iter().filter(|q| q.error.is_some()).count())
        .sum();
    if failures > 0 {
        eprintln!("warning: {failures} per-query failures recorded in report.json");
    }
    println!("report: {}", resolved.out.join("report.json").display());
    println!("summary: {}", resolved.out.join("summary.csv").display());
    Ok(())
}

async fn cmd_ablate(
    resolved: Resolved,
    dimension: String,
    values: String,
) -> Result<(), CliError> {
    let mut config = bench_config(&resolved)?;
    let dimension = match dimension.as_str() {
        "agents" => {
            config.agent_count_list = values
                .split(',')
                .filter(|s| !s.trim().is_empty())
                .map(|s| s.trim().parse::<usize>().map_err(|e| CliError::config(format!("bad agent count `{s}`: {e}"))))
                .collect::<Result<Vec<_>, _>>()?;
            if config.agent_count_list.is_empty() {
                return Err(CliError::config("--values must list at least one agent count"));
            }
            AblationDimension::Agents
        }
        "temperature" => {
            config.temperature_list = values
                .split(',')
                .filter(|s| !s.trim().is_empty())
                .map(|s| s.trim().parse::<f64>().map_err(|e| CliError::config(format!("bad temperature `{s}`: {e}"))))
                .collect::<Result<Vec<_>, _>>()?;
            if config.temperature_list.is_empty() {
                return Err(CliError::config("--values must list at least one temperature"));
            }
            AblationDimension::Temperature
        }
        other => {
            return Err(CliError::config(format!(
                "unknown ablation dimension `{other}` (expected agents|temperature)"
            )))
        }
    };
    let backend = build_backend(&resolved)?;
    let sweep = bench::ablate(&config, dimension, backend)
        .await
        .map_err(|e| CliError::config(e.to_string()))?;
    sweep
        .write_files(&resolved.out)
        .map_err(|e| CliError::config(e.to_string()))?;
    for run in &sweep.runs {
        println!(
            "{} {} -> {}",
            dimension.as_str(),
            run.value,
            resolved
                .out
                .join(format!("{}_{}", dimension.as_str(), run.value))
                .join("report.json")
                .display()
        );
    }
    println!("sweep: {}", resolved.out.join("sweep.csv").display());
    Ok(())
}

async fn run(cli: Cli) -> Result<(), CliError> {
    let file_config = match &cli.common.config {
        Some(path) => FileConfig::load(path).map_err(CliError::Config)?,
        None => FileConfig::default(),
    };
    let resolved = resolve::resolve(&cli.common, &file_config).map_err(CliError::Config)?;
    match cli.command {
        Command::Ask { text, file } => cmd_ask(resolved, text, file).await,
        Command::Bench => cmd_bench(resolved).await,
        Command::Ablate { dimension, values } => cmd_ablate(resolved, dimension, values).await,
    }
}

#[tokio::main]
async fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // clap's rendered message includes usage text
            let _ = err.print();
            return ExitCode::from(1);
        }
    };
    match run(cli).await {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Backend(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
