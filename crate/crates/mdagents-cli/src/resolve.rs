//! Configuration resolution: flags > environment > config file > defaults.
//!
//! The config file is a single JSON document whose keys are spelled exactly
//! like the flags (kebab-case). The environment contributes only the live
//! backend credentials (`MDAGENTS_BASE_URL`, `MDAGENTS_API_KEY`), which have
//! no flag or file equivalents and are read when the live backend is built.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use mdagents::orchestrator::RoutingConfig;
use mdagents::pipelines::Setting;

use crate::CommonOpts;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendChoice {
    Live,
    Scripted(PathBuf),
}

impl BackendChoice {
    fn parse(raw: &str) -> Result<Self, String> {
        if raw == "live" {
            return Ok(Self::Live);
        }
        if let Some(path) = raw.strip_prefix("scripted:") {
            if path.is_empty() {
                return Err("scripted backend needs a path: scripted:<path>".into());
            }
            return Ok(Self::Scripted(PathBuf::from(path)));
        }
        Err(format!("unknown backend `{raw}` (expected live or scripted:<path>)"))
    }
}

/// Config-file fields; same names as the flags.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct FileConfig {
    pub backend: Option<String>,
    pub dataset: Option<PathBuf>,
    pub samples: Option<usize>,
    pub setting: Option<String>,
    pub max_rounds: Option<u32>,
    pub max_agents: Option<usize>,
    pub temperature: Option<f64>,
    pub rag: Option<String>,
    pub corpus: Option<PathBuf>,
    pub seed: Option<u64>,
    pub parallelism: Option<usize>,
    pub out: Option<PathBuf>,
    pub templates: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let raw = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config `{}`: {e}", path.display()))?;
        serde_json::from_str(&raw)
            .map_err(|e| format!("cannot parse config `{}`: {e}", path.display()))
    }
}

/// Effective configuration after precedence resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub backend: Option<BackendChoice>,
    pub dataset: Option<PathBuf>,
    pub samples: usize,
    /// `None` when neither flag nor file named a setting; commands pick
    /// their own default (ask: adaptive, bench: all three).
    pub settings: Option<Vec<Setting>>,
    pub routing: RoutingConfig,
    pub temperature: f64,
    pub rag: bool,
    pub corpus: Option<PathBuf>,
    pub seed: u64,
    pub parallelism: usize,
    pub out: PathBuf,
    pub templates: Option<PathBuf>,
}

fn parse_rag(raw: &str) -> Result<bool, String> {
    match raw {
        "on" => Ok(true),
        "off" => Ok(false),
        other => Err(format!("--rag expects on|off, got `{other}`")),
    }
}

fn parse_settings(raw: &str) -> Result<Vec<Setting>, String> {
    raw.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse::<Setting>())
        .collect()
}

pub fn resolve(flags: &CommonOpts, file: &FileConfig) -> Result<Resolved, String> {
    let backend = flags
        .backend
        .as_deref()
        .or(file.backend.as_deref())
        .map(BackendChoice::parse)
        .transpose()?;
    let settings = flags
        .setting
        .as_deref()
        .or(file.setting.as_deref())
        .map(parse_settings)
        .transpose()?;
    let rag = flags
        .rag
        .as_deref()
        .or(file.rag.as_deref())
        .map(parse_rag)
        .transpose()?
        .unwrap_or(false);
    let routing = RoutingConfig {
        max_rounds: flags.max_rounds.or(file.max_rounds).unwrap_or(3),
        max_agents: flags.max_agents.or(file.max_agents).unwrap_or(3),
        ..RoutingConfig::default()
    };
    routing.validate()?;
    let temperature = flags.temperature.or(file.temperature).unwrap_or(0.7);
    if !(0.0..=2.0).contains(&temperature) {
        return Err(format!("temperature {temperature} outside [0.0, 2.0]"));
    }
    Ok(Resolved {
        backend,
        dataset: flags.dataset.clone().or_else(|| file.dataset.clone()),
        samples: flags.samples.or(file.samples).unwrap_or(50),
        settings,
        routing,
        temperature,
        rag,
        corpus: flags.corpus.clone().or_else(|| file.corpus.clone()),
        seed: flags.seed.or(file.seed).unwrap_or(42),
        parallelism: flags.parallelism.or(file.parallelism).unwrap_or(4),
        out: flags
            .out
            .clone()
            .or_else(|| file.out.clone())
            .unwrap_or_else(|| PathBuf::from("out")),
        templates: flags.templates.clone().or_else(|| file.templates.clone()),
    })
}
