//! Pairwise redundancy: judge sampled paragraph pairs on a 0–4 scale
//! (4 = no redundancy) and average them into the report score.

use serde::{Deserialize, Serialize};

use crate::exec;
use crate::judge::{bindings, Judge, JudgeError, TemplateSet, VerdictPayload, VerdictSchema};
use crate::segment::{enumerate_pairs, ParagraphPair, ReportDocument};

/// One judged paragraph pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairScore {
    pub pair: ParagraphPair,
    /// 0–4, where 4 means no redundancy.
    pub score: u8,
    pub repetitions_found: Vec<String>,
    pub confidence: Option<f64>,
    pub explanation: String,
}

/// Report-level redundancy. `overall` is the arithmetic mean of the valid
/// pair scores; a report with no pairs to judge scores 4.0 with the
/// `vacuous` flag raised (no pairs cannot evidence redundancy, but the
/// condition stays visible).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RedundancyResult {
    pub report_id: String,
    pub pair_scores: Vec<PairScore>,
    pub overall: f64,
    /// Valid pair count contributing to the mean.
    pub pair_count: usize,
    /// Pairs submitted to the judge (the cap counts these).
    pub attempted_pairs: usize,
    /// Invalid verdicts excluded from the mean.
    pub invalid_count: usize,
    pub vacuous: bool,
}

impl RedundancyResult {
    /// Aggregate already-judged pairs into the report score.
    pub fn from_pair_scores(
        report_id: impl Into<String>,
        pair_scores: Vec<PairScore>,
        attempted_pairs: usize,
        invalid_count: usize,
    ) -> Self {
        let pair_count = pair_scores.len();
        let (overall, vacuous) = if pair_count == 0 {
            (4.0, true)
        } else {
            let sum: f64 = pair_scores.iter().map(|p| p.score as f64).sum();
            (sum / pair_count as f64, false)
        };
        Self {
            report_id: report_id.into(),
            pair_scores,
            overall,
            pair_count,
            attempted_pairs,
            invalid_count,
            vacuous,
        }
    }
}

/// Judge one paragraph pair with the redundancy template.
pub fn score_pair(
    pair: ParagraphPair,
    first_text: &str,
    second_text: &str,
    judge: &Judge,
    templates: &TemplateSet,
) -> Result<PairScore, JudgeError> {
    debug_assert!(!first_text.trim().is_empty() && !second_text.trim().is_empty());
    let verdict = judge.render_and_judge(
        &templates.redundancy,
        &bindings([("para1", first_text), ("para2", second_text)]),
        VerdictSchema::Redundancy,
    )?;
    let VerdictPayload::Redundancy(payload) = verdict.payload else {
        return Err(JudgeError::Backend(
            "schema mismatch in redundancy verdict".into(),
        ));
    };
    Ok(PairScore {
        pair,
        score: payload.score,
        repetitions_found: payload.repetitions_found,
        confidence: payload.confidence,
        explanation: payload.explanation,
    })
}

/// Enumerate pairs under the cap, judge each, and average. Invalid verdicts
/// shrink the denominator rather than imputing a score; transport and
/// backend failures abort the evaluation.
pub fn evaluate_redundancy(
    report: &ReportDocument,
    judge: &Judge,
    templates: &TemplateSet,
    cap: usize,
    seed: u64,
) -> Result<RedundancyResult, JudgeError> {
    let pairs = enumerate_pairs(&report.paragraphs, cap, seed, &report.id);
    let attempted = pairs.len();
    let outcomes = exec::map(&pairs, |pair| {
        let first = &report.paragraphs[pair.first_index].text;
        let second = &report.paragraphs[pair.second_index].text;
        score_pair(*pair, first, second, judge, templates)
    });

    let mut scores = Vec::with_capacity(attempted);
    let mut invalid = 0usize;
    for outcome in outcomes {
        match outcome {
            Ok(score) => scores.push(score),
            Err(err) if err.is_invalid_verdict() => invalid += 1,
            Err(err) => return Err(err),
        }
    }
    Ok(RedundancyResult::from_pair_scores(
        report.id.clone(),
        scores,
        attempted,
        invalid,
    ))
}
