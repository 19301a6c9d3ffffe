//! Shared domain vocabulary: queries, teams, transcripts, decisions, and
//! answer-label extraction.

use std::fmt;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gateway::CallStats;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CoreError {
    #[error("query `{id}` is invalid: {reason}")]
    InvalidQuery { id: String, reason: String },
    #[error("invalid team `{name}`: {reason}")]
    InvalidTeam { name: String, reason: String },
    #[error("invalid tier plan: {0}")]
    InvalidPlan(String),
}

/// One answer choice, labeled with a single uppercase letter.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerOption {
    pub label: char,
    pub body: String,
}

/// Opaque media reference forwarded to backends, never decoded locally.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attachment {
    pub media_type: String,
    pub locator: String,
}

/// One decision task routed through the pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Query {
    pub id: String,
    pub text: String,
    #[serde(default)]
    pub options: Vec<AnswerOption>,
    #[serde(default)]
    pub attachments: Vec<Attachment>,
    /// Gold answer label, when the task is scored.
    #[serde(default)]
    pub gold: Option<char>,
}

impl Query {
    /// Free-text query with no answer choices.
    pub fn free_text(id: impl Into<String>, text: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
            options: Vec::new(),
            attachments: Vec::new(),
            gold: None,
        }
    }

    /// Multiple-choice query; option bodies are labeled A, B, C, ... in order.
    pub fn multiple_choice(
        id: impl Into<String>,
        text: impl Into<String>,
        bodies: &[&str],
        gold: Option<char>,
    ) -> Result<Self, CoreError> {
        let options = bodies
            .iter()
            .enumerate()
            .map(|(i, body)| AnswerOption {
                label: (b'A' + i as u8) as char,
                body: (*body).to_string(),
            })
            .collect();
        let query = Self {
            id: id.into(),
            text: text.into(),
            options,
            attachments: Vec::new(),
            gold,
        };
        query.validate()?;
        Ok(query)
    }

    /// Checks the structural invariants: non-empty id, labels contiguous from
    /// `A`, gold (if present) among the labels.
    pub fn validate(&self) -> Result<(), CoreError> {
        let fail = |reason: String| CoreError::InvalidQuery {
            id: self.id.clone(),
            reason,
        };
        if self.id.is_empty() {
            return Err(CoreError::InvalidQuery {
                id: String::new(),
                reason: "id must be non-empty".into(),
            });
        }
        for (i, opt) in self.options.iter().enumerate() {
            let expected = (b'A' + i as u8) as char;
            if opt.label != expected {
                return Err(fail(format!(
                    "option labels must be contiguous from A; position {i} has `{}`",
                    opt.label
                )));
            }
        }
        if let Some(gold) = self.gold {
            if !self.labels().contains(&gold) {
                return Err(fail(format!("gold answer `{gold}` is not an option label")));
            }
        }
        Ok(())
    }

    pub fn labels(&self) -> Vec<char> {
        self.options.iter().map(|o| o.label).collect()
    }

    pub fn is_multiple_choice(&self) -> bool {
        !self.options.is_empty()
    }
}

/// Complexity rating assigned by the moderator; drives routing.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum ComplexityLevel {
    Low,
    Moderate,
    High,
}

impl ComplexityLevel {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Low => "low",
            Self::Moderate => "moderate",
            Self::High => "high",
        }
    }
}

impl fmt::Display for ComplexityLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One recruited agent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub role_title: String,
    pub expertise_blurb: String,
    pub is_lead: bool,
    pub agent_index: usize,
}

impl AgentSpec {
    pub fn new(role_title: impl Into<String>, blurb: impl Into<String>) -> Self {
        Self {
            role_title: role_title.into(),
            expertise_blurb: blurb.into(),
            is_lead: false,
            agent_index: 0,
        }
    }

    pub fn lead(mut self) -> Self {
        self.is_lead = true;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TeamKind {
    Solo,
    Mdt,
}

/// A collaboration unit: either one solo member or a multi-disciplinary team
/// of 2..=max_agents members with exactly one lead.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Team {
    pub kind: TeamKind,
    pub members: Vec<AgentSpec>,
    pub team_name: String,
}

impl Team {
    pub fn solo(mut member: AgentSpec) -> Self {
        member.is_lead = true;
        member.agent_index = 0;
        Self {
            kind: TeamKind::Solo,
            members: vec![member],
            team_name: "Solo".into(),
        }
    }

    /// Builds a team from ordered members. Indices are reassigned by position;
    /// if no member is flagged lead the first becomes lead, and extra lead
    /// flags beyond the first are cleared.
    pub fn mdt(
        name: impl Into<String>,
        mut members: Vec<AgentSpec>,
        max_agents: usize,
    ) -> Result<Self, CoreError> {
        let name = name.into();
        if members.len() < 2 || members.len() > max_agents {
            return Err(CoreError::InvalidTeam {
                name,
                reason: format!(
                    "team needs 2..={} members, got {}",
                    max_agents,
                    members.len()
                ),
            });
        }
        let lead_pos = members.iter().position(|m| m.is_lead).unwrap_or(0);
        for (i, m) in members.iter_mut().enumerate() {
            m.agent_index = i;
            m.is_lead = i == lead_pos;
        }
        Ok(Self {
            kind: TeamKind::Mdt,
            members,
            team_name: name,
        })
    }

    pub fn lead(&self) -> &AgentSpec {
        self.members
            .iter()
            .find(|m| m.is_lead)
            .unwrap_or(&self.members[0])
    }
}

/// Ordered tiers of teams for high-complexity cases; the last tier produces
/// the report fed to synthesis.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IctPlan {
    pub tiers: Vec<Team>,
    pub final_tier_index: usize,
}

impl IctPlan {
    pub fn new(tiers: Vec<Team>) -> Result<Self, CoreError> {
        if tiers.len() < 2 {
            return Err(CoreError::InvalidPlan(format!(
                "tier plan needs at least 2 tiers, got {}",
                tiers.len()
            )));
        }
        if let Some(t) = tiers.iter().find(|t| t.kind != TeamKind::Mdt) {
            return Err(CoreError::InvalidPlan(format!(
                "tier `{}` is not a multi-member team",
                t.team_name
            )));
        }
        let final_tier_index = tiers.len() - 1;
        Ok(Self {
            tiers,
            final_tier_index,
        })
    }

    pub fn final_tier(&self) -> &Team {
        &self.tiers[self.final_tier_index]
    }
}

/// Collaboration topology chosen by recruitment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Recruitment {
    Solo { team: Team },
    Mdt { team: Team },
    Ict { plan: IctPlan },
}

/// One agent turn within a deliberation round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Opinion {
    pub agent_index: usize,
    /// 1-based discussion round (or tier number in a tiered run).
    pub round: u32,
    pub raw: String,
    /// Extracted answer label; `None` means the agent abstained.
    pub answer: Option<char>,
}

/// Pipeline stage that produced an event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Moderator,
    Recruiter,
    SoloAnalysis,
    MdtRound,
    IctTier,
    Synthesis,
}

impl Stage {
    /// Default accounting tag for requests issued at this stage.
    pub fn tag(self) -> &'static str {
        match self {
            Self::Moderator => "moderator",
            Self::Recruiter => "recruiter",
            Self::SoloAnalysis => "solo",
            Self::MdtRound => "mdt_round",
            Self::IctTier => "ict_tier",
            Self::Synthesis => "synthesis",
        }
    }
}

/// One chat call in the transcript. Every event corresponds to exactly one
/// successful backend call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub stage: Stage,
    pub speaker: String,
    pub round: u32,
    /// Stable hash of the prompt messages; identical inputs hash identically
    /// across reruns.
    pub prompt_digest: String,
    pub response: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub annotation: Option<String>,
}

/// Complete transcript of one pipeline run with per-stage accounting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deliberation {
    pub query_id: String,
    pub complexity: ComplexityLevel,
    pub events: Vec<Event>,
    pub opinions: Vec<Opinion>,
    pub usage: CallStats,
}

impl Deliberation {
    pub fn new(query_id: impl Into<String>, complexity: ComplexityLevel) -> Self {
        Self {
            query_id: query_id.into(),
            complexity,
            events: Vec::new(),
            opinions: Vec::new(),
            usage: CallStats::default(),
        }
    }

    /// Opinions voiced in the given round, in agent order.
    pub fn round_opinions(&self, round: u32) -> Vec<&Opinion> {
        self.opinions.iter().filter(|o| o.round == round).collect()
    }

    /// Highest round number present among opinions, if any.
    pub fn last_round(&self) -> Option<u32> {
        self.opinions.iter().map(|o| o.round).max()
    }
}

/// Events and usage produced by one pipeline stage, merged into the owning
/// deliberation by the caller.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StageTrace {
    pub events: Vec<Event>,
    pub usage: CallStats,
}

impl StageTrace {
    pub fn merge_into(self, deliberation: &mut Deliberation) {
        deliberation.events.extend(self.events);
        deliberation.usage.merge(&self.usage);
    }
}

/// Final answer: an option label, free text for unconstrained queries, or an
/// explicit unparseable marker (always scored incorrect).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Answer {
    Label(char),
    FreeText(String),
    Unparseable,
}

impl fmt::Display for Answer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Label(l) => write!(f, "{l}"),
            Self::FreeText(t) => f.write_str(t),
            Self::Unparseable => f.write_str("UNPARSEABLE"),
        }
    }
}

/// Final verdict for one query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub answer: Answer,
    pub rationale: String,
    pub complexity: ComplexityLevel,
    pub usage: CallStats,
}

fn answer_regexes() -> &'static [Regex; 3] {
    static RES: OnceLock<[Regex; 3]> = OnceLock::new();
    RES.get_or_init(|| {
        [
            // "ANSWER: X" (optionally parenthesized letter), case-insensitive.
            Regex::new(r"(?i)answer\s*:\s*\(?([a-z])\b\)?").unwrap(),
            // "(X)" anywhere.
            Regex::new(r"(?i)\(([a-z])\)").unwrap(),
            // A line consisting of a single standalone label token, with
            // optional trailing punctuation.
            Regex::new(r"(?im)^\s*([a-z])[.):]?\s*$").unwrap(),
        ]
    })
}

/// Extracts the answer label from a response. The LAST occurrence (by byte
/// position) of any pattern whose letter belongs to `labels` wins; deliberating
/// agents often revise, so the final stated answer is authoritative. Returns
/// `None` when no pattern matches.
pub fn extract_answer(raw: &str, labels: &[char]) -> Option<char> {
    let mut best: Option<(usize, usize, char)> = None;
    for (priority, re) in answer_regexes().iter().enumerate() {
        for caps in re.captures_iter(raw) {
            let m = caps.get(1).expect("single capture group");
            let letter = m
                .as_str()
                .chars()
                .next()
                .expect("non-empty capture")
                .to_ascii_uppercase();
            if !labels.contains(&letter) {
                continue;
            }
            let start = caps.get(0).expect("whole match").start();
            // Later text wins; on identical starts prefer the more explicit
            // pattern (lower index).
            let key = (start, 2usize.saturating_sub(priority));
            if best.is_none_or(|(s, p, _)| key > (s, p)) {
                best = Some((key.0, key.1, letter));
            }
        }
    }
    best.map(|(_, _, letter)| letter)
}

/// Normalizes a bare label token: trims surrounding whitespace/punctuation and
/// uppercases a single remaining letter. Anything else is `None`.
pub fn normalize_label(raw: &str) -> Option<char> {
    let trimmed =
        raw.trim_matches(|c: char| c.is_whitespace() || c.is_ascii_punctuation());
    let mut chars = trimmed.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) if c.is_ascii_alphabetic() => Some(c.to_ascii_uppercase()),
        _ => None,
    }
}
