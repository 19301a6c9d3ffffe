//! Complexity check and team recruitment.
//!
//! A moderator agent rates each query low / moderate / high; a recruiter
//! agent then builds the matching collaboration topology. Low-complexity
//! cases are assigned a fixed primary-care agent without spending a recruiter
//! call.

use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::core::{
    AgentSpec, ComplexityLevel, Event, IctPlan, Query, Recruitment, Stage, StageTrace, Team,
};
use crate::gateway::{ChatParams, ChatRequest, Gateway, GatewayError, Message};
use crate::templates::TemplateSet;

/// Knobs governing routing shape and retry behavior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RoutingConfig {
    /// Team size cap; rosters are truncated to this.
    pub max_agents: usize,
    /// Discussion-round cap for team deliberation.
    pub max_rounds: u32,
    /// Number of tiers a tiered-review plan asks for.
    pub ict_tier_count: usize,
    /// Reprompts allowed when the moderator output is unparseable.
    pub moderator_retries: u32,
    /// Complexity assumed when the moderator never produces a parseable level.
    pub fallback_complexity: ComplexityLevel,
}

impl Default for RoutingConfig {
    fn default() -> Self {
        Self {
            max_agents: 3,
            max_rounds: 3,
            ict_tier_count: 3,
            moderator_retries: 1,
            fallback_complexity: ComplexityLevel::Moderate,
        }
    }
}

impl RoutingConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.max_agents < 2 {
            return Err(format!("max_agents must be >= 2, got {}", self.max_agents));
        }
        if self.max_rounds < 1 {
            return Err("max_rounds must be >= 1".into());
        }
        if self.ict_tier_count < 2 {
            return Err(format!("ict_tier_count must be >= 2, got {}", self.ict_tier_count));
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("cannot parse roster: {0}")]
pub struct RosterParseError(pub String);

/// Gateway failure inside a routing stage, carrying the trace of calls that
/// succeeded before the failure so accounting stays exact.
#[derive(Debug, Error)]
#[error("{source}")]
pub struct StageError {
    #[source]
    pub source: GatewayError,
    pub partial: StageTrace,
}

/// Moderator verdict plus the raw text forwarded to synthesis as moderator
/// feedback.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexityAssessment {
    pub level: ComplexityLevel,
    pub moderator_note: String,
    pub fell_back: bool,
}

/// Records gateway calls into an event/usage trace for the owning
/// deliberation.
pub(crate) struct CallRecorder<'a> {
    gateway: &'a Gateway,
    trace: StageTrace,
}

impl<'a> CallRecorder<'a> {
    pub fn new(gateway: &'a Gateway) -> Self {
        Self { gateway, trace: StageTrace::default() }
    }

    pub async fn call(
        &mut self,
        stage: Stage,
        stage_tag: &str,
        speaker: &str,
        round: u32,
        messages: Vec<Message>,
        params: &ChatParams,
    ) -> Result<String, GatewayError> {
        let request = ChatRequest::new(stage_tag, messages, params);
        let prompt_digest = request.prompt_digest();
        let response = self.gateway.complete(&request).await?;
        self.trace.usage.record(stage_tag, &response);
        self.trace.events.push(Event {
            stage,
            speaker: speaker.to_string(),
            round,
            prompt_digest,
            response: response.content.clone(),
            annotation: None,
        });
        Ok(response.content)
    }

    pub fn annotate_last(&mut self, note: impl Into<String>) {
        if let Some(event) = self.trace.events.last_mut() {
            event.annotation = Some(note.into());
        }
    }

    pub fn into_trace(self) -> StageTrace {
        self.trace
    }
}

/// The question text plus opaque attachment references.
pub fn question_block(query: &Query) -> String {
    let mut block = query.text.clone();
    if !query.attachments.is_empty() {
        block.push_str("\nAttachments (referenced, not decoded):");
        for a in &query.attachments {
            block.push_str(&format!("\n- {}: {}", a.media_type, a.locator));
        }
    }
    block
}

/// Rendered option lines, or empty for free-text queries.
pub fn options_block(query: &Query) -> String {
    if query.options.is_empty() {
        return String::new();
    }
    let mut block = String::from("Options:\n");
    for opt in &query.options {
        block.push_str(&format!("{}. {}\n", opt.label, opt.body));
    }
    block
}

fn complexity_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)\b(low|moderate|high)\b").unwrap())
}

/// Case-insensitive scan for the keywords low / moderate / high; the LAST
/// occurrence wins, mirroring the answer-extraction rule.
pub fn parse_complexity(raw: &str) -> Option<ComplexityLevel> {
    complexity_re()
        .find_iter(raw)
        .last()
        .map(|m| match m.as_str().to_ascii_lowercase().as_str() {
            "low" => ComplexityLevel::Low,
            "moderate" => ComplexityLevel::Moderate,
            _ => ComplexityLevel::High,
        })
}

/// Issues the moderator call (plus bounded reprompts on unparseable output)
/// and returns the assessed level, falling back to
/// `config.fallback_complexity` when every attempt is unparseable.
pub async fn assess_complexity(
    query: &Query,
    gateway: &Gateway,
    templates: &TemplateSet,
    params: &ChatParams,
    config: &RoutingConfig,
) -> Result<(ComplexityAssessment, StageTrace), StageError> {
    let question = question_block(query);
    let prompt = templates.render(
        "moderator",
        &[("question", question.as_str()), ("options", &options_block(query))],
    );
    let mut recorder = CallRecorder::new(gateway);
    let mut note = String::new();
    let mut level = None;
    let attempts = 1 + config.moderator_retries;
    for attempt in 1..=attempts {
        let messages = if attempt == 1 {
            vec![Message::user(prompt.clone())]
        } else {
            vec![
                Message::user(prompt.clone()),
                Message::assistant(note.clone()),
                Message::user(format!(
                    "Reply with exactly one word - low, moderate, or high - for the case:\n{question}"
                )),
            ]
        };
        let raw = match recorder
            .call(Stage::Moderator, "moderator", "Moderator", attempt, messages, params)
            .await
        {
            Ok(raw) => raw,
            Err(source) => return Err(StageError { source, partial: recorder.into_trace() }),
        };
        note = raw.clone();
        if let Some(parsed) = parse_complexity(&raw) {
            level = Some(parsed);
            break;
        }
    }
    let fell_back = level.is_none();
    let level = level.unwrap_or(config.fallback_complexity);
    if fell_back {
        recorder.annotate_last(format!(
            "complexity unparseable after {attempts} attempts; fell back to {level}"
        ));
    }
    Ok((
        ComplexityAssessment { level, moderator_note: note, fell_back },
        recorder.into_trace(),
    ))
}

fn roster_line_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"^\s*\d+[.)]\s*(.+?) - (.*?)\s*(\[(?i:lead)\])?\s*$").unwrap()
    })
}

/// Parses roster lines of the form `<index>. <Role Title> - <blurb> [LEAD]?`,
/// truncating to `max_agents`. Fails when fewer than two valid lines exist.
pub fn parse_roster(raw: &str, max_agents: usize) -> Result<Vec<AgentSpec>, RosterParseError> {
    let mut specs = Vec::new();
    for line in raw.lines() {
        let Some(caps) = roster_line_re().captures(line) else {
            continue;
        };
        let role = caps[1].trim().to_string();
        if role.is_empty() {
            continue;
        }
        let mut spec = AgentSpec::new(role, caps[2].trim().to_string());
        spec.is_lead = caps.get(3).is_some();
        specs.push(spec);
    }
    if specs.len() < 2 {
        return Err(RosterParseError(format!(
            "found {} valid member lines, need at least 2",
            specs.len()
        )));
    }
    specs.truncate(max_agents);
    Ok(specs)
}

fn team_header_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)^\s*team\s*\d*\s*[:.]\s*(.+?)\s*$").unwrap())
}

/// Parses a tiered plan: `Team <n>: <name>` headers each followed by roster
/// lines. Teams with fewer than two valid members are discarded; at least two
/// teams must survive.
pub fn parse_ict_plan(raw: &str, config: &RoutingConfig) -> Result<IctPlan, RosterParseError> {
    let mut teams: Vec<(String, Vec<AgentSpec>)> = Vec::new();
    for line in raw.lines() {
        if let Some(caps) = team_header_re().captures(line) {
            teams.push((caps[1].to_string(), Vec::new()));
            continue;
        }
        if let Some((_, members)) = teams.last_mut() {
            if let Some(caps) = roster_line_re().captures(line) {
                let mut spec = AgentSpec::new(caps[1].trim().to_string(), caps[2].trim().to_string());
                spec.is_lead = caps.get(3).is_some();
                members.push(spec);
            }
        }
    }
    let mut tiers = Vec::new();
    for (name, mut members) in teams {
        members.truncate(config.max_agents);
        if members.len() < 2 {
            continue;
        }
        let team = Team::mdt(name, members, config.max_agents)
            .map_err(|e| RosterParseError(e.to_string()))?;
        tiers.push(team);
        if tiers.len() == config.ict_tier_count {
            break;
        }
    }
    if tiers.len() < 2 {
        return Err(RosterParseError(format!(
            "found {} valid teams, need at least 2",
            tiers.len()
        )));
    }
    IctPlan::new(tiers).map_err(|e| RosterParseError(e.to_string()))
}

/// The fixed low-complexity assignee.
pub fn pcp_agent() -> AgentSpec {
    AgentSpec::new(
        "Primary Care Physician",
        "general practice, triage, and first-line management",
    )
    .lead()
}

/// Roster used when the recruiter's output stays unparseable.
pub fn default_mdt_roster(max_agents: usize) -> Vec<AgentSpec> {
    let mut roster = vec![
        AgentSpec::new("General Internist", "broad differential diagnosis").lead(),
        AgentSpec::new("Specialist Consultant 1", "domain review"),
        AgentSpec::new("Specialist Consultant 2", "domain review"),
    ];
    roster.truncate(max_agents.max(2));
    roster
}

/// Fixed-size generalist-plus-specialists roster for the static group
/// setting.
pub fn default_group_roster(max_agents: usize) -> Vec<AgentSpec> {
    let mut roster = vec![AgentSpec::new("General Internist", "broad differential diagnosis").lead()];
    for i in 1..max_agents {
        roster.push(AgentSpec::new(
            format!("Specialist Consultant {i}"),
            "domain review",
        ));
    }
    roster
}

/// Three-stage plan used when the recruiter's tier layout stays unparseable.
pub fn default_ict_plan(max_agents: usize) -> IctPlan {
    let size = max_agents.min(3).max(2);
    let tier = |name: &str, members: Vec<AgentSpec>| {
        let mut members = members;
        members.truncate(size);
        Team::mdt(name, members, max_agents).expect("default tier is valid")
    };
    let tiers = vec![
        tier(
            "Initial Assessment Team",
            vec![
                AgentSpec::new("General Internist", "initial workup").lead(),
                AgentSpec::new("Emergency Physician", "acute stabilization"),
                AgentSpec::new("Family Physician", "history and context"),
            ],
        ),
        tier(
            "Specialist Analysis Team",
            vec![
                AgentSpec::new("Senior Specialist", "focused differential").lead(),
                AgentSpec::new("Clinical Pharmacologist", "drug interactions"),
                AgentSpec::new("Diagnostic Radiologist", "imaging review"),
            ],
        ),
        tier(
            "Final Review & Decision Team",
            vec![
                AgentSpec::new("Chief Medical Officer", "final arbitration").lead(),
                AgentSpec::new("Senior Attending", "care planning"),
                AgentSpec::new("Quality & Safety Reviewer", "risk check"),
            ],
        ),
    ];
    IctPlan::new(tiers).expect("default plan is valid")
}

const ROSTER_REPROMPT: &str =
    "Use exactly the numbered format requested, one member per line, with ` - ` \
     between role and expertise and [LEAD] after exactly one member.";

/// Builds the collaboration topology for the assessed complexity. Low spends
/// no recruiter call; moderate and high spend one (plus at most one reprompt
/// before falling back to a default roster or plan).
pub async fn recruit(
    query: &Query,
    level: ComplexityLevel,
    gateway: &Gateway,
    templates: &TemplateSet,
    params: &ChatParams,
    config: &RoutingConfig,
) -> Result<(Recruitment, StageTrace), StageError> {
    if level == ComplexityLevel::Low {
        return Ok((
            Recruitment::Solo { team: Team::solo(pcp_agent()) },
            StageTrace::default(),
        ));
    }

    let question = question_block(query);
    let options = options_block(query);
    let max_agents = config.max_agents.to_string();
    let tier_count = config.ict_tier_count.to_string();
    let template = if level == ComplexityLevel::Moderate { "recruiter_mdt" } else { "recruiter_ict" };
    let prompt = templates.render(
        template,
        &[
            ("question", question.as_str()),
            ("options", options.as_str()),
            ("max_agents", max_agents.as_str()),
            ("tier_count", tier_count.as_str()),
        ],
    );

    let mut recorder = CallRecorder::new(gateway);
    let mut last_raw = String::new();
    for attempt in 1..=2u32 {
        let messages = if attempt == 1 {
            vec![Message::user(prompt.clone())]
        } else {
            vec![
                Message::user(prompt.clone()),
                Message::assistant(last_raw.clone()),
                Message::user(format!("{ROSTER_REPROMPT}\nCase:\n{question}")),
            ]
        };
        let raw = match recorder
            .call(Stage::Recruiter, "recruiter", "Recruiter", attempt, messages, params)
            .await
        {
            Ok(raw) => raw,
            Err(source) => return Err(StageError { source, partial: recorder.into_trace() }),
        };
        last_raw = raw.clone();
        let parsed = match level {
            ComplexityLevel::Moderate => parse_roster(&raw, config.max_agents)
                .and_then(|specs| {
                    Team::mdt("Multi-Disciplinary Team", specs, config.max_agents)
                        .map_err(|e| RosterParseError(e.to_string()))
                })
                .map(|team| Recruitment::Mdt { team }),
            _ => parse_ict_plan(&raw, config).map(|plan| Recruitment::Ict { plan }),
        };
        if let Ok(recruitment) = parsed {
            return Ok((recruitment, recorder.into_trace()));
        }
    }

    let fallback = match level {
        ComplexityLevel::Moderate => Recruitment::Mdt {
            team: Team::mdt(
                "Multi-Disciplinary Team",
                default_mdt_roster(config.max_agents),
                config.max_agents,
            )
            .expect("default roster is valid"),
        },
        _ => Recruitment::Ict { plan: default_ict_plan(config.max_agents) },
    };
    recorder.annotate_last("roster unparseable after reprompt; default roster used");
    Ok((fallback, recorder.into_trace()))
}
