//! Consensus entropy, answer scoring, and run reports.
//!
//! Entropy is Shannon entropy in bits over the empirical distribution of a
//! round's extracted answers, with abstentions kept as their own category so
//! the voter count stays constant across rounds and traces remain comparable.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::core::{Answer, Decision, Deliberation, Opinion};
use crate::gateway::CallStats;
use crate::pipelines::Setting;

/// Category key recorded for opinions without an extractable answer.
pub const ABSTAIN_CATEGORY: &str = "∅";

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("reports cover mismatched query sets: {0}")]
    MismatchedQuerySets(String),
}

/// Vote distribution and entropy for one discussion round (or tier).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsensusPoint {
    pub round: u32,
    pub entropy_bits: f64,
    pub vote_counts: BTreeMap<String, u32>,
    pub n_voters: u32,
}

fn shannon_bits(counts: &BTreeMap<String, u32>, n: u32) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let n = f64::from(n);
    counts
        .values()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = f64::from(c) / n;
            -p * p.log2()
        })
        .sum()
}

/// Entropy of one round's opinions. Abstentions count as the `∅` category;
/// unanimity yields exactly zero.
pub fn consensus_entropy(opinions: &[&Opinion]) -> ConsensusPoint {
    let round = opinions.first().map(|o| o.round).unwrap_or(0);
    let mut vote_counts: BTreeMap<String, u32> = BTreeMap::new();
    for opinion in opinions {
        let key = opinion
            .answer
            .map(|c| c.to_string())
            .unwrap_or_else(|| ABSTAIN_CATEGORY.to_string());
        *vote_counts.entry(key).or_insert(0) += 1;
    }
    let n_voters = opinions.len() as u32;
    let entropy_bits = shannon_bits(&vote_counts, n_voters);
    ConsensusPoint { round, entropy_bits, vote_counts, n_voters }
}

/// Per-round (or per-tier) entropy trace of a deliberation, in round order.
/// Runs without recorded opinions (solo analysis) trace empty.
pub fn consensus_trace(deliberation: &Deliberation) -> Vec<ConsensusPoint> {
    let rounds: BTreeSet<u32> = deliberation.opinions.iter().map(|o| o.round).collect();
    rounds
        .into_iter()
        .map(|round| consensus_entropy(&deliberation.round_opinions(round)))
        .collect()
}

/// Exact label equality; free-text and unparseable answers score false.
pub fn score(decision: &Decision, gold: char) -> bool {
    matches!(decision.answer, Answer::Label(label) if label == gold)
}

/// Outcome of one query under one setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub query_id: String,
    /// Absent when the query failed outright (see `error`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decision: Option<Decision>,
    /// `None` for unscored (gold-less) queries.
    pub correct: Option<bool>,
    pub usage: CallStats,
    pub consensus_trace: Vec<ConsensusPoint>,
    /// Recorded in memory only; excluded from report files so reruns stay
    /// byte-identical.
    #[serde(skip, default)]
    pub wall_time: Duration,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Per-setting aggregate over all query records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub scored: usize,
    pub correct: usize,
    /// correct / scored; absent when nothing was scored.
    pub accuracy: Option<f64>,
    pub total_calls: u64,
    pub mean_calls: f64,
    pub total_prompt_tokens: u64,
    pub total_completion_tokens: u64,
    pub mean_prompt_tokens: f64,
    pub mean_completion_tokens: f64,
    /// Mean first-round entropy over queries that deliberated in rounds.
    pub mean_entropy_round1: Option<f64>,
    /// Mean final-round entropy over the same queries.
    pub mean_entropy_final: Option<f64>,
}

/// Everything produced by one setting over one sampled query set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub setting: Setting,
    pub per_query: Vec<QueryRecord>,
    pub aggregate: Aggregate,
}

impl RunReport {
    pub fn new(setting: Setting, per_query: Vec<QueryRecord>) -> Self {
        let aggregate = Aggregate::over(&per_query);
        Self { setting, per_query, aggregate }
    }
}

impl Aggregate {
    fn over(records: &[QueryRecord]) -> Self {
        let scored = records.iter().filter(|r| r.correct.is_some()).count();
        let correct = records.iter().filter(|r| r.correct == Some(true)).count();
        let accuracy = (scored > 0).then(|| correct as f64 / scored as f64);
        let total_calls: u64 = records.iter().map(|r| r.usage.total_calls).sum();
        let total_prompt_tokens: u64 = records.iter().map(|r| r.usage.prompt_tokens).sum();
        let total_completion_tokens: u64 =
            records.iter().map(|r| r.usage.completion_tokens).sum();
        let n = records.len().max(1) as f64;
        let first_entropies: Vec<f64> = records
            .iter()
            .filter_map(|r| r.consensus_trace.first().map(|p| p.entropy_bits))
            .collect();
        let final_entropies: Vec<f64> = records
            .iter()
            .filter_map(|r| r.consensus_trace.last().map(|p| p.entropy_bits))
            .collect();
        let mean = |v: &[f64]| (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64);
        Self {
            scored,
            correct,
            accuracy,
            total_calls,
            mean_calls: total_calls as f64 / n,
            total_prompt_tokens,
            total_completion_tokens,
            mean_prompt_tokens: total_prompt_tokens as f64 / n,
            mean_completion_tokens: total_completion_tokens as f64 / n,
            mean_entropy_round1: mean(&first_entropies),
            mean_entropy_final: mean(&final_entropies),
        }
    }
}

/// One row of the setting comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub setting: Setting,
    pub accuracy: Option<f64>,
    pub total_calls: u64,
    pub mean_calls: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_accuracy_vs_solo: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_mean_calls_vs_solo: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonTable {
    pub fn row(&self, setting: Setting) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.setting == setting)
    }

    /// Plain-text rendering for terminal output.
    pub fn render(&self) -> String {
        let mut out = String::from(
            "setting    accuracy   total_calls  mean_calls  d_acc_vs_solo  d_calls_vs_solo\n",
        );
        for row in &self.rows {
            let fmt_opt = |v: Option<f64>| match v {
                Some(x) => format!("{x:+.4}"),
                None => "-".to_string(),
            };
            let acc = match row.accuracy {
                Some(a) => format!("{a:.4}"),
                None => "-".to_string(),
            };
            out.push_str(&format!(
                "{:<10} {:<10} {:<12} {:<11.4} {:<14} {}\n",
                row.setting,
                acc,
                row.total_calls,
                row.mean_calls,
                fmt_opt(row.delta_accuracy_vs_solo),
                fmt_opt(row.delta_mean_calls_vs_solo),
            ));
        }
        out
    }
}

/// Builds the per-setting comparison; all reports must cover the same query
/// ids. Deltas are relative to the Solo row when present.
pub fn compare_settings(reports: &[RunReport]) -> Result<ComparisonTable, MetricsError> {
    if let Some(first) = reports.first() {
        let base_ids: BTreeSet<&str> =
            first.per_query.iter().map(|r| r.query_id.as_str()).collect();
        for report in &reports[1..] {
            let ids: BTreeSet<&str> =
                report.per_query.iter().map(|r| r.query_id.as_str()).collect();
            if ids != base_ids {
                let missing: Vec<&str> = base_ids.difference(&ids).copied().collect();
                let extra: Vec<&str> = ids.difference(&base_ids).copied().collect();
                return Err(MetricsError::MismatchedQuerySets(format!(
                    "`{}` vs `{}`: missing {missing:?}, extra {extra:?}",
                    first.setting, report.setting
                )));
            }
        }
    }
    let solo = reports.iter().find(|r| r.setting == Setting::Solo);
    let rows = reports
        .iter()
        .map(|report| {
            let delta_accuracy_vs_solo = solo.and_then(|s| {
                Some(report.aggregate.accuracy? - s.aggregate.accuracy?)
            });
            let delta_mean_calls_vs_solo =
                solo.map(|s| report.aggregate.mean_calls - s.aggregate.mean_calls);
            ComparisonRow {
                setting: report.setting,
                accuracy: report.aggregate.accuracy,
                total_calls: report.aggregate.total_calls,
                mean_calls: report.aggregate.mean_calls,
                delta_accuracy_vs_solo,
                delta_mean_calls_vs_solo,
            }
        })
        .collect();
    Ok(ComparisonTable { rows })
}

fn csv_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_default()
}

/// Fixed-schema summary: one row per setting. Number formatting is pinned so
/// identical runs produce identical bytes.
pub fn summary_csv(reports: &[RunReport]) -> String {
    let mut out = String::from(
        "setting,accuracy,total_calls,mean_calls,mean_entropy_round1,mean_entropy_final\n",
    );
    for report in reports {
        out.push_str(&format!(
            "{},{},{},{:.4},{},{}\n",
            report.setting,
            csv_opt(report.aggregate.accuracy),
            report.aggregate.total_calls,
            report.aggregate.mean_calls,
            csv_opt(report.aggregate.mean_entropy_round1),
            csv_opt(report.aggregate.mean_entropy_final),
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::ComplexityLevel;
    use proptest::prelude::*;

    fn opinions(answers: &[Option<char>]) -> Vec<Opinion> {
        answers
            .iter()
            .enumerate()
            .map(|(i, &answer)| Opinion {
                agent_index: i,
                round: 1,
                raw: String::new(),
                answer,
            })
            .collect()
    }

    fn entropy_of(answers: &[Option<char>]) -> f64 {
        let owned = opinions(answers);
        let refs: Vec<&Opinion> = owned.iter().collect();
        consensus_entropy(&refs).entropy_bits
    }

    #[test]
    fn unanimity_has_zero_entropy() {
        assert_eq!(entropy_of(&[Some('C'), Some('C'), Some('C')]), 0.0);
        assert_eq!(entropy_of(&[Some('A')]), 0.0);
    }

    #[test]
    fn two_to_one_split_is_0_9183_bits() {
        // -(2/3)log2(2/3) - (1/3)log2(1/3)
        let h = entropy_of(&[Some('A'), Some('A'), Some('B')]);
        assert!((h - 0.9183).abs() < 1e-4, "got {h}");
    }

    #[test]
    fn uniform_three_way_split_is_log2_of_3() {
        let h = entropy_of(&[Some('A'), Some('B'), Some('C')]);
        assert!((h - 1.5850).abs() < 1e-4, "got {h}");
        assert!((h - 3f64.log2()).abs() < 1e-12);
    }

    #[test]
    fn abstentions_form_their_own_category() {
        let point = {
            let owned = opinions(&[Some('A'), Some('A'), None]);
            let refs: Vec<&Opinion> = owned.iter().collect();
            consensus_entropy(&refs)
        };
        assert_eq!(point.n_voters, 3);
        assert_eq!(point.vote_counts.get("A"), Some(&2));
        assert_eq!(point.vote_counts.get(ABSTAIN_CATEGORY), Some(&1));
        assert!(point.entropy_bits > 0.0);
        assert_eq!(point.vote_counts.values().sum::<u32>(), point.n_voters);
    }

    #[test]
    fn score_is_exact_label_equality() {
        let decision = |answer: Answer| Decision {
            answer,
            rationale: String::new(),
            complexity: ComplexityLevel::Low,
            usage: CallStats::default(),
        };
        assert!(score(&decision(Answer::Label('C')), 'C'));
        assert!(!score(&decision(Answer::Label('A')), 'C'));
        assert!(!score(&decision(Answer::Unparseable), 'C'));
        assert!(!score(&decision(Answer::FreeText("C".into())), 'C'));
    }

    fn record(id: &str, calls: u64, correct: Option<bool>) -> QueryRecord {
        let mut usage = CallStats::default();
        usage.total_calls = calls;
        QueryRecord {
            query_id: id.into(),
            decision: None,
            correct,
            usage,
            consensus_trace: Vec::new(),
            wall_time: Duration::ZERO,
            error: None,
        }
    }

    #[test]
    fn aggregate_totals_are_sums_of_parts() {
        let report = RunReport::new(
            Setting::Adaptive,
            vec![
                record("a", 2, Some(true)),
                record("b", 6, Some(false)),
                record("c", 15, None),
            ],
        );
        assert_eq!(report.aggregate.total_calls, 23);
        assert_eq!(report.aggregate.scored, 2);
        assert_eq!(report.aggregate.correct, 1);
        assert_eq!(report.aggregate.accuracy, Some(0.5));
        assert!((report.aggregate.mean_calls - 23.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn identical_reports_compare_with_zero_deltas() {
        let records = vec![record("a", 2, Some(true)), record("b", 2, Some(true))];
        let reports = vec![
            RunReport::new(Setting::Solo, records.clone()),
            RunReport::new(Setting::Adaptive, records),
        ];
        let table = compare_settings(&reports).unwrap();
        let adaptive = table.row(Setting::Adaptive).unwrap();
        assert_eq!(adaptive.delta_accuracy_vs_solo, Some(0.0));
        assert_eq!(adaptive.delta_mean_calls_vs_solo, Some(0.0));
    }

    #[test]
    fn call_deltas_follow_the_count_formulas() {
        // all-low fixture: adaptive costs 2 calls/query, group 5
        let adaptive = vec![record("a", 2, Some(true)), record("b", 2, Some(true))];
        let group = vec![record("a", 5, Some(true)), record("b", 5, Some(true))];
        let solo = vec![record("a", 1, Some(true)), record("b", 1, Some(true))];
        let reports = vec![
            RunReport::new(Setting::Solo, solo),
            RunReport::new(Setting::Group, group),
            RunReport::new(Setting::Adaptive, adaptive),
        ];
        let table = compare_settings(&reports).unwrap();
        assert_eq!(
            table.row(Setting::Adaptive).unwrap().delta_mean_calls_vs_solo,
            Some(1.0)
        );
        assert_eq!(
            table.row(Setting::Group).unwrap().delta_mean_calls_vs_solo,
            Some(4.0)
        );
    }

    #[test]
    fn mismatched_query_sets_are_rejected() {
        let reports = vec![
            RunReport::new(Setting::Solo, vec![record("a", 1, None)]),
            RunReport::new(Setting::Adaptive, vec![record("b", 2, None)]),
        ];
        assert!(matches!(
            compare_settings(&reports).unwrap_err(),
            MetricsError::MismatchedQuerySets(_)
        ));
    }

    #[test]
    fn summary_csv_has_one_row_per_setting_and_pinned_formatting() {
        let reports = vec![
            RunReport::new(Setting::Solo, vec![record("a", 1, Some(true))]),
            RunReport::new(Setting::Group, vec![record("a", 5, Some(true))]),
        ];
        let csv = summary_csv(&reports);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(
            lines[0],
            "setting,accuracy,total_calls,mean_calls,mean_entropy_round1,mean_entropy_final"
        );
        assert_eq!(lines[1], "solo,1.0000,1,1.0000,,");
        assert_eq!(lines[2], "group,1.0000,5,5.0000,,");
    }

    proptest! {
        /// Entropy is invariant under voter reordering and label relabeling,
        /// and bounded by log2(n_voters).
        #[test]
        fn entropy_invariances(
            votes in proptest::collection::vec(proptest::option::of(0usize..4), 1..12),
            rotation in 0usize..4,
        ) {
            let labels = ['A', 'B', 'C', 'D'];
            let answers: Vec<Option<char>> =
                votes.iter().map(|v| v.map(|i| labels[i])).collect();
            let mut reversed = answers.clone();
            reversed.reverse();
            let relabeled: Vec<Option<char>> = votes
                .iter()
                .map(|v| v.map(|i| labels[(i + rotation) % 4]))
                .collect();

            let h = entropy_of(&answers);
            prop_assert!((h - entropy_of(&reversed)).abs() < 1e-12);
            prop_assert!((h - entropy_of(&relabeled)).abs() < 1e-12);
            prop_assert!(h >= 0.0);
            prop_assert!(h <= (answers.len() as f64).log2().max(0.0) + 1e-12);
        }
    }
}
