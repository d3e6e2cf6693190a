//! Verdict parsing and schema validation.
//!
//! Judge responses arrive as free text. The parser pulls out the first
//! well-formed JSON object (fenced, prose-wrapped, or bare), then validates
//! field presence, types, and ranges against the expected schema. The
//! result is either a fully typed payload or a [`ParseRejected`] — never a
//! partially populated verdict. Scores are validated, not clamped.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::fmt;
use thiserror::Error;

use crate::corpus::CategoryTag;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictSchema {
    Quality,
    Redundancy,
    Factuality,
    Category,
}

impl fmt::Display for VerdictSchema {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            VerdictSchema::Quality => "quality",
            VerdictSchema::Redundancy => "redundancy",
            VerdictSchema::Factuality => "factuality",
            VerdictSchema::Category => "category",
        };
        f.write_str(name)
    }
}

/// Quality rubric scores, exactly the five `*_Score` fields plus `Reason`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QualityPayload {
    pub reason: String,
    pub comprehensiveness: u8,
    pub coherence: u8,
    pub clarity: u8,
    pub insightfulness: u8,
    pub overall: u8,
}

/// Pairwise redundancy verdict. `confidence` is a 0–100 percentage and
/// parses from both `90` and `"90%"` forms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RedundancyPayload {
    pub score: u8,
    pub explanation: String,
    pub repetitions_found: Vec<String>,
    pub confidence: Option<f64>,
}

/// Claim–source support verdict: −1 no support, 0 partial, 1 full.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactualityPayload {
    pub is_factual: i8,
    pub sentence_support: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryPayload {
    pub category: CategoryTag,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum VerdictPayload {
    Quality(QualityPayload),
    Redundancy(RedundancyPayload),
    Factuality(FactualityPayload),
    Category(CategoryPayload),
}

/// One validated judge response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeVerdict {
    pub raw: String,
    pub schema: VerdictSchema,
    pub payload: VerdictPayload,
    /// Backend completions consumed to obtain this verdict (transport
    /// retries and the one parse retry both count).
    pub attempts: u32,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("verdict rejected: {reason}")]
pub struct ParseRejected {
    pub reason: String,
}

fn rejected(reason: impl Into<String>) -> ParseRejected {
    ParseRejected {
        reason: reason.into(),
    }
}

/// Extract and validate a verdict from raw judge output.
pub fn parse_verdict(raw: &str, schema: VerdictSchema) -> Result<JudgeVerdict, ParseRejected> {
    let object = first_json_object(raw).ok_or_else(|| rejected("no JSON object found"))?;
    let payload = match schema {
        VerdictSchema::Quality => VerdictPayload::Quality(parse_quality(&object)?),
        VerdictSchema::Redundancy => VerdictPayload::Redundancy(parse_redundancy(&object)?),
        VerdictSchema::Factuality => VerdictPayload::Factuality(parse_factuality(&object)?),
        VerdictSchema::Category => VerdictPayload::Category(parse_category(&object)?),
    };
    Ok(JudgeVerdict {
        raw: raw.to_string(),
        schema,
        payload,
        attempts: 1,
    })
}

/// First well-formed JSON object embedded in `text`, skipping code fences
/// and surrounding prose. Balances braces with string/escape awareness and
/// confirms candidates with a real parse.
fn first_json_object(text: &str) -> Option<Value> {
    let bytes = text.as_bytes();
    let mut start = 0usize;
    while let Some(offset) = text[start..].find('{') {
        let open = start + offset;
        if let Some(end) = balanced_object_end(bytes, open) {
            if let Ok(value) = serde_json::from_str::<Value>(&text[open..=end]) {
                if value.is_object() {
                    return Some(value);
                }
            }
        }
        start = open + 1;
    }
    None
}

fn balanced_object_end(bytes: &[u8], open: usize) -> Option<usize> {
    let mut depth = 0i32;
    let mut in_string = false;
    let mut escaped = false;
    for (i, &b) in bytes.iter().enumerate().skip(open) {
        if in_string {
            if escaped {
                escaped = false;
            } else if b == b'\\' {
                escaped = true;
            } else if b == b'"' {
                in_string = false;
            }
            continue;
        }
        match b {
            b'"' => in_string = true,
            b'{' => depth += 1,
            b'}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(i);
                }
            }
            _ => {}
        }
    }
    None
}

// ── Field coercion ─────────────────────────────────────────────────────

/// Integer field: accepts JSON integers, integral floats, and numeric
/// strings. Range-checked, never clamped.
fn int_field(object: &Value, field: &str, min: i64, max: i64) -> Result<i64, ParseRejected> {
    let value = object
        .get(field)
        .ok_or_else(|| rejected(format!("missing field {field:?}")))?;
    let number = coerce_int(value)
        .ok_or_else(|| rejected(format!("field {field:?} is not an integer: {value}")))?;
    if !(min..=max).contains(&number) {
        return Err(rejected(format!(
            "field {field:?} out of range: {number} (expected {min}..={max})"
        )));
    }
    Ok(number)
}

fn coerce_int(value: &Value) -> Option<i64> {
    match value {
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                Some(i)
            } else {
                n.as_f64().filter(|f| f.fract() == 0.0).map(|f| f as i64)
            }
        }
        Value::String(s) => s.trim().parse::<i64>().ok(),
        _ => None,
    }
}

fn string_field(object: &Value, field: &str) -> Result<String, ParseRejected> {
    let value = object
        .get(field)
        .ok_or_else(|| rejected(format!("missing field {field:?}")))?;
    match value {
        Value::String(s) => Ok(s.clone()),
        // Tolerate structured reasons by keeping their JSON text.
        other => Ok(other.to_string()),
    }
}

/// Percentage field: `90`, `90.0`, `"90"`, and `"90%"` all parse to 90.0.
fn confidence_field(object: &Value, field: &str) -> Result<Option<f64>, ParseRejected> {
    let Some(value) = object.get(field) else {
        return Ok(None);
    };
    let number = match value {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => s.trim().trim_end_matches('%').trim().parse::<f64>().ok(),
        _ => None,
    }
    .ok_or_else(|| rejected(format!("field {field:?} is not a percentage: {value}")))?;
    if !(0.0..=100.0).contains(&number) {
        return Err(rejected(format!(
            "field {field:?} out of range: {number} (expected 0..=100)"
        )));
    }
    Ok(Some(number))
}

// ── Per-schema validation ──────────────────────────────────────────────

fn parse_quality(object: &Value) -> Result<QualityPayload, ParseRejected> {
    Ok(QualityPayload {
        reason: string_field(object, "Reason")?,
        comprehensiveness: int_field(object, "Comprehensiveness_Score", 0, 4)? as u8,
        coherence: int_field(object, "Coherence_Score", 0, 4)? as u8,
        clarity: int_field(object, "Clarity_Score", 0, 4)? as u8,
        insightfulness: int_field(object, "Insightfulness_Score", 0, 4)? as u8,
        overall: int_field(object, "Overall_Score", 0, 4)? as u8,
    })
}

fn parse_redundancy(object: &Value) -> Result<RedundancyPayload, ParseRejected> {
    let score = int_field(object, "score", 0, 4)? as u8;
    let explanation = string_field(object, "explanation")?;
    let repetitions = object
        .get("repetitions_found")
        .ok_or_else(|| rejected("missing field \"repetitions_found\""))?;
    let repetitions_found = match repetitions {
        Value::Array(items) => items
            .iter()
            .map(|item| match item {
                Value::String(s) => s.clone(),
                other => other.to_string(),
            })
            .collect(),
        other => {
            return Err(rejected(format!(
                "field \"repetitions_found\" is not an array: {other}"
            )))
        }
    };
    Ok(RedundancyPayload {
        score,
        explanation,
        repetitions_found,
        confidence: confidence_field(object, "confidence")?,
    })
}

fn parse_factuality(object: &Value) -> Result<FactualityPayload, ParseRejected> {
    let is_factual = int_field(object, "is_factual", -1, 1)? as i8;
    let sentence_support = match object.get("sentence_support") {
        None => String::new(),
        Some(Value::String(s)) => s.clone(),
        Some(Value::Array(items)) => items
            .iter()
            .map(|item| match item {
                Value::String(s) => s.clone(),
                other => other.to_string(),
            })
            .collect::<Vec<_>>()
            .join("\n"),
        Some(other) => {
            return Err(rejected(format!(
                "field \"sentence_support\" is not a string: {other}"
            )))
        }
    };
    Ok(FactualityPayload {
        is_factual,
        sentence_support,
    })
}

fn parse_category(object: &Value) -> Result<CategoryPayload, ParseRejected> {
    let name = match object.get("category") {
        Some(Value::String(s)) => s.clone(),
        Some(other) => {
            return Err(rejected(format!(
                "field \"category\" is not a string: {other}"
            )))
        }
        None => return Err(rejected("missing field \"category\"")),
    };
    let category = CategoryTag::parse(&name)
        .ok_or_else(|| rejected(format!("{name:?} is not one of the twelve categories")))?;
    Ok(CategoryPayload { category })
}
