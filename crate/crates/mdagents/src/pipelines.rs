//! Deliberation structures (solo analysis, team discussion rounds, tiered
//! review) plus final synthesis and the adaptive entry point.
//!
//! Call budgets are exact and asserted by tests: a low-complexity query costs
//! 1 moderator + 1 solo call; a team run costs 2 routing calls, one call per
//! member per executed round, and 1 synthesis call; a tiered run costs one
//! call per member plus one lead report per tier, bracketed the same way.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::core::{
    extract_answer, AgentSpec, Answer, AnswerOption, ComplexityLevel, Decision, Deliberation,
    IctPlan, Opinion, Query, Recruitment, Stage, Team,
};
use crate::gateway::{ChatParams, ChatRequest, Gateway, GatewayError, Message};
use crate::orchestrator::{
    assess_complexity, default_group_roster, options_block, question_block, recruit,
    RoutingConfig,
};
use crate::retrieval::{augment_prompt, Passage, RetrievalError, Retriever};
use crate::templates::TemplateSet;

/// Experimental configuration: one agent for everything, a static team for
/// everything, or complexity-gated routing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Setting {
    Solo,
    Group,
    Adaptive,
}

impl Setting {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Solo => "solo",
            Self::Group => "group",
            Self::Adaptive => "adaptive",
        }
    }

    pub fn all() -> [Setting; 3] {
        [Self::Solo, Self::Group, Self::Adaptive]
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Setting {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "solo" => Ok(Self::Solo),
            "group" => Ok(Self::Group),
            "adaptive" => Ok(Self::Adaptive),
            other => Err(format!("unknown setting `{other}` (expected solo|group|adaptive)")),
        }
    }
}

#[derive(Debug, Error)]
pub enum FewShotError {
    #[error("cannot read exemplar file `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse exemplar file `{path}`: {source}")]
    Parse {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("exemplar {index} is invalid: {reason}")]
    Invalid { index: usize, reason: String },
}

/// One worked example shown ahead of low-complexity questions.
#[derive(Debug, Clone, PartialEq)]
pub struct Exemplar {
    pub question: String,
    pub options: Vec<AnswerOption>,
    pub reasoning: String,
    pub answer: char,
}

#[derive(Deserialize)]
struct ExemplarRecord {
    question: String,
    #[serde(default)]
    options: BTreeMap<String, String>,
    reasoning: String,
    answer: String,
}

/// Ordered exemplar set applied on the low-complexity path.
#[derive(Debug, Clone, PartialEq)]
pub struct FewShotSet {
    pub exemplars: Vec<Exemplar>,
}

impl FewShotSet {
    pub fn new(exemplars: Vec<Exemplar>) -> Result<Self, FewShotError> {
        for (index, ex) in exemplars.iter().enumerate() {
            if !ex.options.iter().any(|o| o.label == ex.answer) {
                return Err(FewShotError::Invalid {
                    index,
                    reason: format!("answer `{}` is not among the option labels", ex.answer),
                });
            }
        }
        Ok(Self { exemplars })
    }

    /// The exemplars compiled into the crate.
    pub fn embedded_default() -> Self {
        Self::from_json(include_str!("../fixtures/fewshot.json"), "<embedded>")
            .expect("embedded exemplars are valid")
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self, FewShotError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| FewShotError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text, &path.display().to_string())
    }

    fn from_json(text: &str, origin: &str) -> Result<Self, FewShotError> {
        let records: Vec<ExemplarRecord> =
            serde_json::from_str(text).map_err(|source| FewShotError::Parse {
                path: origin.to_string(),
                source,
            })?;
        let exemplars = records
            .into_iter()
            .enumerate()
            .map(|(index, r)| {
                let options = r
                    .options
                    .iter()
                    .map(|(label, body)| {
                        let mut chars = label.chars();
                        match (chars.next(), chars.next()) {
                            (Some(c), None) if c.is_ascii_uppercase() => Ok(AnswerOption {
                                label: c,
                                body: body.clone(),
                            }),
                            _ => Err(FewShotError::Invalid {
                                index,
                                reason: format!("option label `{label}` is not a single letter"),
                            }),
                        }
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                let answer = r.answer.chars().next().ok_or_else(|| FewShotError::Invalid {
                    index,
                    reason: "answer is empty".into(),
                })?;
                Ok(Exemplar {
                    question: r.question,
                    options,
                    reasoning: r.reasoning,
                    answer: answer.to_ascii_uppercase(),
                })
            })
            .collect::<Result<Vec<_>, FewShotError>>()?;
        Self::new(exemplars)
    }

    fn render_block(&self) -> String {
        let mut block = String::new();
        for ex in &self.exemplars {
            block.push_str("Example:\nCase:\n");
            block.push_str(&ex.question);
            block.push('\n');
            for opt in &ex.options {
                block.push_str(&format!("{}. {}\n", opt.label, opt.body));
            }
            block.push_str(&format!("Reasoning: {}\nANSWER: {}\n\n", ex.reasoning, ex.answer));
        }
        block
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("query `{query_id}` failed during {stage_desc}: {source}")]
    Stage {
        query_id: String,
        stage_desc: &'static str,
        #[source]
        source: GatewayError,
        partial: Box<Deliberation>,
    },
    #[error("query `{query_id}` failed during retrieval: {source}")]
    Retrieval {
        query_id: String,
        #[source]
        source: RetrievalError,
        partial: Box<Deliberation>,
    },
}

impl PipelineError {
    pub fn query_id(&self) -> &str {
        match self {
            Self::Stage { query_id, .. } | Self::Retrieval { query_id, .. } => query_id,
        }
    }

    /// Transcript accumulated before the failure; its usage reflects only
    /// successful calls.
    pub fn partial(&self) -> &Deliberation {
        match self {
            Self::Stage { partial, .. } | Self::Retrieval { partial, .. } => partial,
        }
    }
}

/// Unanimity check for one round: every member produced the same extracted
/// answer and at least two members voted. Any abstention blocks consensus so
/// that a consensus stop always coincides with zero vote entropy.
pub fn unanimous_answer(opinions: &[&Opinion]) -> Option<char> {
    if opinions.len() < 2 {
        return None;
    }
    let first = opinions[0].answer?;
    opinions
        .iter()
        .all(|o| o.answer == Some(first))
        .then_some(first)
}

const SYNTHESIS_SPEAKER: &str = "Decision Maker";

fn persona(agent: &AgentSpec) -> String {
    if agent.expertise_blurb.is_empty() {
        format!("You are a {}.", agent.role_title)
    } else {
        format!(
            "You are a {}. Your expertise: {}.",
            agent.role_title, agent.expertise_blurb
        )
    }
}

fn answer_instruction(query: &Query) -> &'static str {
    if query.is_multiple_choice() {
        "End your reply with a line in exactly this format: ANSWER: <option letter>"
    } else {
        "Close with your complete recommendation in plain text."
    }
}

fn extraction_reprompt(query: &Query) -> String {
    format!(
        "State only the option letter of your final answer, in the format ANSWER: <letter>.\nCase:\n{}",
        question_block(query)
    )
}

/// Runs deliberations against one gateway/template/config bundle.
pub struct Pipeline {
    gateway: Arc<Gateway>,
    templates: Arc<TemplateSet>,
    routing: RoutingConfig,
    params: ChatParams,
    retriever: Option<Arc<dyn Retriever>>,
    retrieval_k: usize,
    fewshot: Option<FewShotSet>,
}

impl Pipeline {
    pub fn new(gateway: Arc<Gateway>, templates: Arc<TemplateSet>) -> Self {
        Self {
            gateway,
            templates,
            routing: RoutingConfig::default(),
            params: ChatParams::default(),
            retriever: None,
            retrieval_k: 3,
            fewshot: Some(FewShotSet::embedded_default()),
        }
    }

    pub fn with_routing(mut self, routing: RoutingConfig) -> Self {
        self.routing = routing;
        self
    }

    pub fn with_params(mut self, params: ChatParams) -> Self {
        self.params = params;
        self
    }

    pub fn with_retriever(mut self, retriever: Arc<dyn Retriever>, k: usize) -> Self {
        self.retriever = Some(retriever);
        self.retrieval_k = k.max(1);
        self
    }

    pub fn with_fewshot(mut self, fewshot: Option<FewShotSet>) -> Self {
        self.fewshot = fewshot;
        self
    }

    pub fn gateway(&self) -> &Gateway {
        &self.gateway
    }

    pub fn routing(&self) -> &RoutingConfig {
        &self.routing
    }

    async fn call_into(
        &self,
        deliberation: &mut Deliberation,
        stage: Stage,
        stage_tag: &str,
        speaker: &str,
        round: u32,
        messages: Vec<Message>,
    ) -> Result<String, GatewayError> {
        let request = ChatRequest::new(stage_tag, messages, &self.params);
        let prompt_digest = request.prompt_digest();
        let response = self.gateway.complete(&request).await?;
        deliberation.usage.record(stage_tag, &response);
        deliberation.events.push(crate::core::Event {
            stage,
            speaker: speaker.to_string(),
            round,
            prompt_digest,
            response: response.content.clone(),
            annotation: None,
        });
        Ok(response.content)
    }

    async fn fetch_context(&self, query: &Query) -> Result<Vec<Passage>, RetrievalError> {
        match &self.retriever {
            Some(retriever) => retriever.retrieve(&query.text, self.retrieval_k).await,
            None => Ok(Vec::new()),
        }
    }

    /// One chain-of-thought analysis call; the decision comes straight from
    /// that response (no synthesis call). An unextractable answer earns one
    /// reprompt, then the unparseable marker.
    pub async fn run_solo(
        &self,
        query: &Query,
        agent: &AgentSpec,
        fewshot: Option<&FewShotSet>,
        passages: &[Passage],
        complexity: ComplexityLevel,
    ) -> Result<(Decision, Deliberation), PipelineError> {
        let mut deliberation = Deliberation::new(&query.id, complexity);
        match self
            .solo_into(&mut deliberation, query, agent, fewshot, passages)
            .await
        {
            Ok(decision) => Ok((decision, deliberation)),
            Err(source) => Err(PipelineError::Stage {
                query_id: query.id.clone(),
                stage_desc: "solo analysis",
                source,
                partial: Box::new(deliberation),
            }),
        }
    }

    async fn solo_into(
        &self,
        deliberation: &mut Deliberation,
        query: &Query,
        agent: &AgentSpec,
        fewshot: Option<&FewShotSet>,
        passages: &[Passage],
    ) -> Result<Decision, GatewayError> {
        let exemplars = fewshot.map(FewShotSet::render_block).unwrap_or_default();
        let base = self.templates.render(
            "solo_cot",
            &[
                ("exemplars", exemplars.as_str()),
                ("question", &question_block(query)),
                ("options", &options_block(query)),
                ("answer_instruction", answer_instruction(query)),
            ],
        );
        let prompt = augment_prompt(&base, passages);
        let system = persona(agent);
        let raw = self
            .call_into(
                deliberation,
                Stage::SoloAnalysis,
                "solo",
                &agent.role_title,
                1,
                vec![Message::system(system.clone()), Message::user(prompt.clone())],
            )
            .await?;

        if !query.is_multiple_choice() {
            return Ok(Decision {
                answer: Answer::FreeText(raw.clone()),
                rationale: raw,
                complexity: deliberation.complexity,
                usage: deliberation.usage.clone(),
            });
        }

        let labels = query.labels();
        let mut final_raw = raw.clone();
        let mut extracted = extract_answer(&raw, &labels);
        if extracted.is_none() {
            let retry = self
                .call_into(
                    deliberation,
                    Stage::SoloAnalysis,
                    "solo",
                    &agent.role_title,
                    2,
                    vec![
                        Message::system(system),
                        Message::user(prompt),
                        Message::assistant(raw),
                        Message::user(extraction_reprompt(query)),
                    ],
                )
                .await?;
            extracted = extract_answer(&retry, &labels);
            final_raw = retry;
        }
        Ok(Decision {
            answer: extracted.map(Answer::Label).unwrap_or(Answer::Unparseable),
            rationale: final_raw,
            complexity: deliberation.complexity,
            usage: deliberation.usage.clone(),
        })
    }

    /// Discussion rounds: round 1 is independent analysis, later rounds show
    /// each member all previous-round opinions attributed by role. After each
    /// round consensus is checked programmatically; unanimity stops early.
    pub async fn run_mdt(
        &self,
        query: &Query,
        team: &Team,
        passages: &[Passage],
        complexity: ComplexityLevel,
    ) -> Result<Deliberation, PipelineError> {
        let mut deliberation = Deliberation::new(&query.id, complexity);
        match self.mdt_into(&mut deliberation, query, team, passages).await {
            Ok(()) => Ok(deliberation),
            Err(source) => Err(PipelineError::Stage {
                query_id: query.id.clone(),
                stage_desc: "team discussion",
                source,
                partial: Box::new(deliberation),
            }),
        }
    }

    async fn mdt_into(
        &self,
        deliberation: &mut Deliberation,
        query: &Query,
        team: &Team,
        passages: &[Passage],
    ) -> Result<(), GatewayError> {
        let labels = query.labels();
        let question = question_block(query);
        let options = options_block(query);
        let instruction = answer_instruction(query);
        for round in 1..=self.routing.max_rounds {
            let prior_block = if round > 1 {
                deliberation
                    .round_opinions(round - 1)
                    .iter()
                    .map(|o| {
                        format!("[{}] {}", team.members[o.agent_index].role_title, o.raw)
                    })
                    .collect::<Vec<_>>()
                    .join("\n\n")
            } else {
                String::new()
            };
            for (idx, member) in team.members.iter().enumerate() {
                let prompt = if round == 1 {
                    let base = self.templates.render(
                        "mdt_round1",
                        &[
                            ("question", question.as_str()),
                            ("options", options.as_str()),
                            ("answer_instruction", instruction),
                        ],
                    );
                    augment_prompt(&base, passages)
                } else {
                    self.templates.render(
                        "mdt_revise",
                        &[
                            ("round", round.to_string().as_str()),
                            ("prior_opinions", prior_block.as_str()),
                            ("question", question.as_str()),
                            ("options", options.as_str()),
                            ("answer_instruction", instruction),
                        ],
                    )
                };
                let raw = self
                    .call_into(
                        deliberation,
                        Stage::MdtRound,
                        "mdt_round",
                        &member.role_title,
                        round,
                        vec![Message::system(persona(member)), Message::user(prompt)],
                    )
                    .await?;
                let answer = if query.is_multiple_choice() {
                    extract_answer(&raw, &labels)
                } else {
                    None
                };
                deliberation.opinions.push(Opinion { agent_index: idx, round, raw, answer });
            }
            if unanimous_answer(&deliberation.round_opinions(round)).is_some() {
                break;
            }
        }
        Ok(())
    }

    /// Tiers run strictly in sequence. Each tier collects one opinion per
    /// member (its prompt embeds every earlier tier report verbatim), then
    /// the tier lead compiles the opinions into a report with one extra call.
    pub async fn run_ict(
        &self,
        query: &Query,
        plan: &IctPlan,
        passages: &[Passage],
    ) -> Result<Deliberation, PipelineError> {
        let mut deliberation = Deliberation::new(&query.id, ComplexityLevel::High);
        match self.ict_into(&mut deliberation, query, plan, passages).await {
            Ok(()) => Ok(deliberation),
            Err(source) => Err(PipelineError::Stage {
                query_id: query.id.clone(),
                stage_desc: "tiered review",
                source,
                partial: Box::new(deliberation),
            }),
        }
    }

    async fn ict_into(
        &self,
        deliberation: &mut Deliberation,
        query: &Query,
        plan: &IctPlan,
        passages: &[Passage],
    ) -> Result<(), GatewayError> {
        let labels = query.labels();
        let question = question_block(query);
        let options = options_block(query);
        let instruction = answer_instruction(query);
        let mut reports: Vec<(String, String)> = Vec::new();
        for (tier_idx, tier) in plan.tiers.iter().enumerate() {
            let tier_no = tier_idx as u32 + 1;
            let prior_reports = if reports.is_empty() {
                String::new()
            } else {
                let mut block = String::from("\nReports from earlier review stages:\n");
                for (name, report) in &reports {
                    block.push_str(&format!("[{name} report] {report}\n"));
                }
                block
            };
            for (idx, member) in tier.members.iter().enumerate() {
                let base = self.templates.render(
                    "ict_tier",
                    &[
                        ("team_name", tier.team_name.as_str()),
                        ("prior_reports", prior_reports.as_str()),
                        ("question", question.as_str()),
                        ("options", options.as_str()),
                        ("answer_instruction", instruction),
                    ],
                );
                let prompt = augment_prompt(&base, passages);
                let raw = self
                    .call_into(
                        deliberation,
                        Stage::IctTier,
                        "ict_tier",
                        &member.role_title,
                        tier_no,
                        vec![Message::system(persona(member)), Message::user(prompt)],
                    )
                    .await?;
                let answer = if query.is_multiple_choice() {
                    extract_answer(&raw, &labels)
                } else {
                    None
                };
                deliberation.opinions.push(Opinion {
                    agent_index: idx,
                    round: tier_no,
                    raw,
                    answer,
                });
            }
            let lead = tier.lead();
            let opinions_block = deliberation
                .round_opinions(tier_no)
                .iter()
                .map(|o| format!("[{}] {}", tier.members[o.agent_index].role_title, o.raw))
                .collect::<Vec<_>>()
                .join("\n\n");
            let report_prompt = self.templates.render(
                "tier_report",
                &[
                    ("team_name", tier.team_name.as_str()),
                    ("question", question.as_str()),
                    ("opinions", opinions_block.as_str()),
                ],
            );
            let report = self
                .call_into(
                    deliberation,
                    Stage::IctTier,
                    "tier_report",
                    &format!("{} ({} lead)", lead.role_title, tier.team_name),
                    tier_no,
                    vec![Message::system(persona(lead)), Message::user(report_prompt)],
                )
                .await?;
            reports.push((tier.team_name.clone(), report));
        }
        Ok(())
    }

    /// The decision-maker call: aggregates every opinion and tier report,
    /// attributed by role, together with the moderator's feedback. Exactly
    /// one call, plus one reprompt when no label can be extracted.
    pub async fn synthesize_final(
        &self,
        query: &Query,
        deliberation: &mut Deliberation,
        moderator_note: &str,
    ) -> Result<Decision, PipelineError> {
        match self.synthesis_into(deliberation, query, moderator_note).await {
            Ok(decision) => Ok(decision),
            Err(source) => Err(PipelineError::Stage {
                query_id: query.id.clone(),
                stage_desc: "final synthesis",
                source,
                partial: Box::new(deliberation.clone()),
            }),
        }
    }

    async fn synthesis_into(
        &self,
        deliberation: &mut Deliberation,
        query: &Query,
        moderator_note: &str,
    ) -> Result<Decision, GatewayError> {
        let history = deliberation
            .events
            .iter()
            .filter(|e| {
                matches!(e.stage, Stage::SoloAnalysis | Stage::MdtRound | Stage::IctTier)
            })
            .map(|e| format!("[{} | round {}] {}", e.speaker, e.round, e.response))
            .collect::<Vec<_>>()
            .join("\n\n");
        let note = if moderator_note.trim().is_empty() { "(none)" } else { moderator_note };
        let prompt = self.templates.render(
            "synthesis",
            &[
                ("question", &question_block(query)),
                ("options", &options_block(query)),
                ("moderator_note", note),
                ("history", history.as_str()),
                ("answer_instruction", answer_instruction(query)),
            ],
        );
        let raw = self
            .call_into(
                deliberation,
                Stage::Synthesis,
                "synthesis",
                SYNTHESIS_SPEAKER,
                1,
                vec![Message::user(prompt.clone())],
            )
            .await?;

        if !query.is_multiple_choice() {
            return Ok(Decision {
                answer: Answer::FreeText(raw.clone()),
                rationale: raw,
                complexity: deliberation.complexity,
                usage: deliberation.usage.clone(),
            });
        }
        let labels = query.labels();
        let mut final_raw = raw.clone();
        let mut extracted = extract_answer(&raw, &labels);
        if extracted.is_none() {
            let retry = self
                .call_into(
                    deliberation,
                    Stage::Synthesis,
                    "synthesis",
                    SYNTHESIS_SPEAKER,
                    2,
                    vec![
                        Message::user(prompt),
                        Message::assistant(raw),
                        Message::user(extraction_reprompt(query)),
                    ],
                )
                .await?;
            extracted = extract_answer(&retry, &labels);
            final_raw = retry;
        }
        Ok(Decision {
            answer: extracted.map(Answer::Label).unwrap_or(Answer::Unparseable),
            rationale: final_raw,
            complexity: deliberation.complexity,
            usage: deliberation.usage.clone(),
        })
    }

    /// The full adaptive pipeline: complexity check, recruitment, the
    /// structure-appropriate deliberation, and (for team runs) synthesis.
    /// Retrieval context, when configured, is fetched once per query and
    /// injected into analysis prompts only.
    pub async fn run_adaptive(
        &self,
        query: &Query,
    ) -> Result<(Decision, Deliberation), PipelineError> {
        let (assessment, trace) = match assess_complexity(
            query,
            &self.gateway,
            &self.templates,
            &self.params,
            &self.routing,
        )
        .await
        {
            Ok(ok) => ok,
            Err(err) => {
                let mut partial =
                    Deliberation::new(&query.id, self.routing.fallback_complexity);
                err.partial.merge_into(&mut partial);
                return Err(PipelineError::Stage {
                    query_id: query.id.clone(),
                    stage_desc: "complexity assessment",
                    source: err.source,
                    partial: Box::new(partial),
                });
            }
        };
        let mut deliberation = Deliberation::new(&query.id, assessment.level);
        trace.merge_into(&mut deliberation);

        let (recruitment, trace) = match recruit(
            query,
            assessment.level,
            &self.gateway,
            &self.templates,
            &self.params,
            &self.routing,
        )
        .await
        {
            Ok(ok) => ok,
            Err(err) => {
                err.partial.merge_into(&mut deliberation);
                return Err(PipelineError::Stage {
                    query_id: query.id.clone(),
                    stage_desc: "recruitment",
                    source: err.source,
                    partial: Box::new(deliberation),
                });
            }
        };
        trace.merge_into(&mut deliberation);

        let passages = match self.fetch_context(query).await {
            Ok(p) => p,
            Err(source) => {
                return Err(PipelineError::Retrieval {
                    query_id: query.id.clone(),
                    source,
                    partial: Box::new(deliberation),
                })
            }
        };

        let result = match &recruitment {
            Recruitment::Solo { team } => {
                let fewshot =
                    (assessment.level == ComplexityLevel::Low).then_some(()).and(self.fewshot.as_ref());
                self.solo_into(&mut deliberation, query, &team.members[0], fewshot, &passages)
                    .await
            }
            Recruitment::Mdt { team } => {
                match self.mdt_into(&mut deliberation, query, team, &passages).await {
                    Ok(()) => {
                        self.synthesis_into(&mut deliberation, query, &assessment.moderator_note)
                            .await
                    }
                    Err(e) => Err(e),
                }
            }
            Recruitment::Ict { plan } => {
                match self.ict_into(&mut deliberation, query, plan, &passages).await {
                    Ok(()) => {
                        self.synthesis_into(&mut deliberation, query, &assessment.moderator_note)
                            .await
                    }
                    Err(e) => Err(e),
                }
            }
        };
        match result {
            Ok(decision) => Ok((decision, deliberation)),
            Err(source) => Err(PipelineError::Stage {
                query_id: query.id.clone(),
                stage_desc: "deliberation",
                source,
                partial: Box::new(deliberation),
            }),
        }
    }

    /// Runs the query under a forced experimental setting. Solo skips the
    /// moderator and uses one generalist call; Group skips the moderator and
    /// forces a static team (one recruiter call against a fixed,
    /// query-independent prompt) through discussion and synthesis.
    pub async fn run_setting(
        &self,
        query: &Query,
        setting: Setting,
    ) -> Result<(Decision, Deliberation), PipelineError> {
        match setting {
            Setting::Adaptive => self.run_adaptive(query).await,
            Setting::Solo => {
                let agent = AgentSpec::new("General Practitioner", "broad clinical reasoning");
                let mut deliberation = Deliberation::new(&query.id, ComplexityLevel::Low);
                let passages = match self.fetch_context(query).await {
                    Ok(p) => p,
                    Err(source) => {
                        return Err(PipelineError::Retrieval {
                            query_id: query.id.clone(),
                            source,
                            partial: Box::new(deliberation),
                        })
                    }
                };
                match self
                    .solo_into(&mut deliberation, query, &agent, None, &passages)
                    .await
                {
                    Ok(decision) => Ok((decision, deliberation)),
                    Err(source) => Err(PipelineError::Stage {
                        query_id: query.id.clone(),
                        stage_desc: "solo analysis",
                        source,
                        partial: Box::new(deliberation),
                    }),
                }
            }
            Setting::Group => {
                let mut deliberation = Deliberation::new(&query.id, ComplexityLevel::Moderate);
                let result = self.group_into(&mut deliberation, query).await;
                match result {
                    Ok(decision) => Ok((decision, deliberation)),
                    Err(source) => Err(PipelineError::Stage {
                        query_id: query.id.clone(),
                        stage_desc: "group deliberation",
                        source,
                        partial: Box::new(deliberation),
                    }),
                }
            }
        }
    }

    async fn group_into(
        &self,
        deliberation: &mut Deliberation,
        query: &Query,
    ) -> Result<Decision, GatewayError> {
        // Fixed recruiter prompt: the static baseline recruits the same panel
        // for every query, so the prompt carries no query text.
        let max_agents = self.routing.max_agents.to_string();
        let prompt = self.templates.render(
            "recruiter_mdt",
            &[
                (
                    "question",
                    "No specific case. Assemble a standing general medical panel able to \
                     cover a broad range of clinical questions.",
                ),
                ("options", ""),
                ("max_agents", max_agents.as_str()),
            ],
        );
        let raw = self
            .call_into(
                deliberation,
                Stage::Recruiter,
                "recruiter",
                "Recruiter",
                1,
                vec![Message::user(prompt)],
            )
            .await?;
        let team = match crate::orchestrator::parse_roster(&raw, self.routing.max_agents)
            .ok()
            .and_then(|specs| {
                Team::mdt("Standing Medical Panel", specs, self.routing.max_agents).ok()
            }) {
            Some(team) => team,
            None => {
                if let Some(event) = deliberation.events.last_mut() {
                    event.annotation =
                        Some("roster unparseable; default panel used".to_string());
                }
                Team::mdt(
                    "Standing Medical Panel",
                    default_group_roster(self.routing.max_agents),
                    self.routing.max_agents,
                )
                .expect("default panel is valid")
            }
        };
        let passages = self.fetch_context(query).await.unwrap_or_default();
        self.mdt_into(deliberation, query, &team, &passages).await?;
        self.synthesis_into(deliberation, query, "").await
    }
}
