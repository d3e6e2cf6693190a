//! Quality scoring: one judge call per report over the five-dimension
//! rubric (comprehensiveness, coherence, clarity, insightfulness, overall),
//! each on 0–4, plus cross-report aggregation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::QueryRecord;
use crate::judge::{
    bindings, Judge, JudgeError, QualityPayload, TemplateSet, VerdictPayload, VerdictSchema,
};
use crate::segment::ReportDocument;
use crate::util::truncate_tokens;

/// The five rubric scores for one report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QualityScores {
    pub comprehensiveness: u8,
    pub coherence: u8,
    pub clarity: u8,
    pub insightfulness: u8,
    pub overall: u8,
    pub reason: String,
}

impl From<QualityPayload> for QualityScores {
    fn from(payload: QualityPayload) -> Self {
        Self {
            comprehensiveness: payload.comprehensiveness,
            coherence: payload.coherence,
            clarity: payload.clarity,
            insightfulness: payload.insightfulness,
            overall: payload.overall,
            reason: payload.reason,
        }
    }
}

impl QualityScores {
    pub fn dimension_value(&self, dimension: crate::corpus::ScoreDimension) -> Option<f64> {
        use crate::corpus::ScoreDimension::*;
        match dimension {
            Comprehensiveness => Some(self.comprehensiveness as f64),
            Coherence => Some(self.coherence as f64),
            Clarity => Some(self.clarity as f64),
            Insightfulness => Some(self.insightfulness as f64),
            Overall => Some(self.overall as f64),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct QualityOptions {
    /// Whole-report prompt budget; oversized reports are truncated here and
    /// the truncation is flagged, never silent.
    pub token_budget: usize,
}

impl Default for QualityOptions {
    fn default() -> Self {
        Self {
            token_budget: 32_000,
        }
    }
}

/// Scores plus evaluation metadata for one report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QualityEvaluation {
    pub scores: QualityScores,
    pub truncated: bool,
    pub attempts: u32,
}

/// Judge one report against the quality rubric. The whole report goes into
/// a single call; `{question}` is the query text and `{paragraph}` the
/// (possibly truncated) report body.
pub fn evaluate_quality(
    query: &QueryRecord,
    report: &ReportDocument,
    judge: &Judge,
    templates: &TemplateSet,
    options: &QualityOptions,
) -> Result<QualityEvaluation, JudgeError> {
    let (body, truncated) = truncate_tokens(&report.raw, options.token_budget);
    let verdict = judge.render_and_judge(
        &templates.quality,
        &bindings([
            ("question", query.text.as_str()),
            ("paragraph", body.as_str()),
        ]),
        VerdictSchema::Quality,
    )?;
    let VerdictPayload::Quality(payload) = verdict.payload else {
        return Err(JudgeError::Backend(
            "schema mismatch in quality verdict".into(),
        ));
    };
    Ok(QualityEvaluation {
        scores: payload.into(),
        truncated,
        attempts: verdict.attempts,
    })
}

/// Per-dimension arithmetic means over a set of reports, full precision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityAggregate {
    pub comprehensiveness: f64,
    pub coherence: f64,
    pub clarity: f64,
    pub insightfulness: f64,
    pub overall: f64,
    pub count: usize,
}

#[derive(Debug, Error)]
pub enum AggregateError {
    #[error("empty input")]
    EmptyInput,
}

pub fn aggregate_quality(results: &[QualityScores]) -> Result<QualityAggregate, AggregateError> {
    if results.is_empty() {
        return Err(AggregateError::EmptyInput);
    }
    let n = results.len() as f64;
    let sum = |f: fn(&QualityScores) -> u8| results.iter().map(|r| f(r) as f64).sum::<f64>() / n;
    Ok(QualityAggregate {
        comprehensiveness: sum(|r| r.comprehensiveness),
        coherence: sum(|r| r.coherence),
        clarity: sum(|r| r.clarity),
        insightfulness: sum(|r| r.insightfulness),
        overall: sum(|r| r.overall),
        count: results.len(),
    })
}
