//! Adaptive multi-agent decision pipeline.
//!
//! A query is first rated for complexity (low / moderate / high), then routed
//! to the matching collaboration structure: a single primary-care agent, a
//! multi-disciplinary team that deliberates over discussion rounds, or a
//! tiered arrangement of teams reviewing the case in sequence. A final
//! decision-maker agent synthesizes team output into one answer.
//!
//! Modules:
//! - [`core`]: shared domain types plus answer-label extraction.
//! - [`gateway`]: backend-neutral chat access with retries, rate limiting,
//!   usage accounting, and a deterministic scripted backend for offline runs.
//! - [`templates`]: prompt template loading and `{placeholder}` rendering.
//! - [`orchestrator`]: complexity check and team recruitment.
//! - [`pipelines`]: solo / team / tiered deliberation and final synthesis.
//! - [`retrieval`]: BM25 retrieval over a local corpus, injected into
//!   analysis prompts.
//! - [`metrics`]: consensus entropy, scoring, and setting comparisons.
//! - [`bench`]: dataset ingestion, batched runs, ablation sweeps, reports.

pub mod bench;
pub mod core;
pub mod gateway;
pub mod metrics;
pub mod orchestrator;
pub mod pipelines;
pub mod retrieval;
pub mod templates;
