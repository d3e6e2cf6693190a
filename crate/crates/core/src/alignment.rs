//! LLM–human agreement: per-dimension mean absolute deviation between model
//! scores and averaged expert scores, exact-match ranking agreement, and an
//! append-only run journal that supports iterative prompt refinement.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use thiserror::Error;

use crate::corpus::ScoreDimension;

#[derive(Debug, Error)]
pub enum AlignmentError {
    #[error("empty input")]
    EmptyInput,
    #[error("length mismatch: {model} model scores vs {human} human means")]
    LengthMismatch { model: usize, human: usize },
    #[error("rankings over mismatched id sets in case {query_id:?}")]
    MismatchedIdSets { query_id: String },
    #[error("unknown baseline run {0:?}")]
    UnknownBaseline(String),
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("journal line {line}: {source}")]
    Journal {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

/// Mean absolute deviation between id-aligned score vectors.
pub fn compute_mad(model_scores: &[f64], human_means: &[f64]) -> Result<f64, AlignmentError> {
    if model_scores.len() != human_means.len() {
        return Err(AlignmentError::LengthMismatch {
            model: model_scores.len(),
            human: human_means.len(),
        });
    }
    if model_scores.is_empty() {
        return Err(AlignmentError::EmptyInput);
    }
    let sum: f64 = model_scores
        .iter()
        .zip(human_means)
        .map(|(m, h)| (m - h).abs())
        .sum();
    Ok(sum / model_scores.len() as f64)
}

/// Model vs. human scores for one dimension over a report set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentRecord {
    pub dimension: ScoreDimension,
    pub report_ids: Vec<String>,
    pub model_scores: Vec<f64>,
    pub human_means: Vec<f64>,
    pub mad: f64,
    pub n_reports: usize,
}

impl AlignmentRecord {
    /// Build from (report id, model score, human mean) triples.
    pub fn new(
        dimension: ScoreDimension,
        rows: Vec<(String, f64, f64)>,
    ) -> Result<Self, AlignmentError> {
        if rows.is_empty() {
            return Err(AlignmentError::EmptyInput);
        }
        let report_ids: Vec<String> = rows.iter().map(|(id, _, _)| id.clone()).collect();
        let model_scores: Vec<f64> = rows.iter().map(|(_, m, _)| *m).collect();
        let human_means: Vec<f64> = rows.iter().map(|(_, _, h)| *h).collect();
        let mad = compute_mad(&model_scores, &human_means)?;
        Ok(Self {
            dimension,
            n_reports: report_ids.len(),
            report_ids,
            model_scores,
            human_means,
            mad,
        })
    }
}

/// One query's human ordering of candidate reports next to the ordering
/// derived from model scores.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankingCase {
    pub query_id: String,
    pub human_ranking: Vec<String>,
    pub model_ranking: Vec<String>,
    /// Model scores tied somewhere; the order fell back to report id.
    pub tie_flagged: bool,
}

/// Order report ids best-first by overall quality, breaking ties by
/// redundancy score and then report id. A tie anywhere is flagged.
pub fn derive_model_ranking(entries: &[(String, f64, f64)]) -> (Vec<String>, bool) {
    let mut sorted: Vec<&(String, f64, f64)> = entries.iter().collect();
    sorted.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(b.2.partial_cmp(&a.2).unwrap_or(std::cmp::Ordering::Equal))
            .then(a.0.cmp(&b.0))
    });
    let tied = sorted
        .windows(2)
        .any(|w| w[0].1 == w[1].1 && w[0].2 == w[1].2);
    (
        sorted.into_iter().map(|(id, _, _)| id.clone()).collect(),
        tied,
    )
}

/// Fraction of cases whose model ranking equals the human ranking
/// element-wise. Every case must rank the same id set on both sides.
pub fn ranking_agreement(cases: &[RankingCase]) -> Result<f64, AlignmentError> {
    if cases.is_empty() {
        return Err(AlignmentError::EmptyInput);
    }
    for case in cases {
        let human: BTreeSet<&String> = case.human_ranking.iter().collect();
        let model: BTreeSet<&String> = case.model_ranking.iter().collect();
        if human != model
            || case.human_ranking.len() != case.model_ranking.len()
            || human.len() != case.human_ranking.len()
        {
            return Err(AlignmentError::MismatchedIdSets {
                query_id: case.query_id.clone(),
            });
        }
    }
    let matches = cases
        .iter()
        .filter(|case| case.human_ranking == case.model_ranking)
        .count();
    Ok(matches as f64 / cases.len() as f64)
}

/// One journaled alignment run: template versions in, metrics out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentRunRecord {
    pub run_id: String,
    pub model: String,
    pub template_versions: BTreeMap<String, String>,
    /// Dimension name → MAD (includes the five quality dimensions when the
    /// human data carries them, plus redundancy and factuality).
    pub mads: BTreeMap<String, f64>,
    /// Average of the five quality-dimension MADs (over those present).
    pub quality_mad: Option<f64>,
    pub ranking_agreement: Option<f64>,
    pub n_reports: usize,
}

/// Alignment metrics plus deltas against a named earlier run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentSummary {
    pub record: AlignmentRunRecord,
    /// Dimensions the human score file actually covered.
    pub dimensions_present: Vec<String>,
    pub tie_flagged_cases: usize,
    pub baseline_run_id: Option<String>,
    /// Dimension name → (this run − baseline); negative means improvement.
    pub mad_deltas: Option<BTreeMap<String, f64>>,
    pub agreement_delta: Option<f64>,
}

/// Assemble the per-run summary. `baseline` must name a run already in the
/// journal; with no baseline the summary carries no deltas.
pub fn alignment_report(
    run_id: &str,
    model: &str,
    template_versions: BTreeMap<String, String>,
    records: &[AlignmentRecord],
    cases: &[RankingCase],
    journal: &[AlignmentRunRecord],
    baseline: Option<&str>,
) -> Result<AlignmentSummary, AlignmentError> {
    let mut mads = BTreeMap::new();
    let mut n_reports = 0usize;
    for record in records {
        mads.insert(record.dimension.name().to_string(), record.mad);
        n_reports = n_reports.max(record.n_reports);
    }

    let quality_values: Vec<f64> = ScoreDimension::QUALITY
        .iter()
        .filter_map(|d| mads.get(d.name()).copied())
        .collect();
    let quality_mad = if quality_values.is_empty() {
        None
    } else {
        Some(quality_values.iter().sum::<f64>() / quality_values.len() as f64)
    };

    let agreement = if cases.is_empty() {
        None
    } else {
        Some(ranking_agreement(cases)?)
    };

    let record = AlignmentRunRecord {
        run_id: run_id.to_string(),
        model: model.to_string(),
        template_versions,
        mads,
        quality_mad,
        ranking_agreement: agreement,
        n_reports,
    };

    let (baseline_run_id, mad_deltas, agreement_delta) = match baseline {
        None => (None, None, None),
        Some(name) => {
            let base = journal
                .iter()
                .find(|r| r.run_id == name)
                .ok_or_else(|| AlignmentError::UnknownBaseline(name.to_string()))?;
            let deltas: BTreeMap<String, f64> = record
                .mads
                .iter()
                .filter_map(|(dim, mad)| base.mads.get(dim).map(|b| (dim.clone(), mad - b)))
                .collect();
            let agreement_delta = match (record.ranking_agreement, base.ranking_agreement) {
                (Some(now), Some(then)) => Some(now - then),
                _ => None,
            };
            (Some(name.to_string()), Some(deltas), agreement_delta)
        }
    };

    Ok(AlignmentSummary {
        dimensions_present: record.mads.keys().cloned().collect(),
        tie_flagged_cases: cases.iter().filter(|c| c.tie_flagged).count(),
        record,
        baseline_run_id,
        mad_deltas,
        agreement_delta,
    })
}

/// Load the JSONL alignment journal (empty if the file does not exist).
pub fn load_journal(path: impl AsRef<Path>) -> Result<Vec<AlignmentRunRecord>, AlignmentError> {
    let path = path.as_ref();
    if !path.exists() {
        return Ok(Vec::new());
    }
    let raw = std::fs::read_to_string(path).map_err(|source| AlignmentError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut records = Vec::new();
    for (idx, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(line).map_err(|source| AlignmentError::Journal {
            line: idx + 1,
            source,
        })?;
        records.push(record);
    }
    Ok(records)
}

/// Append one run record to the journal.
pub fn append_journal(
    path: impl AsRef<Path>,
    record: &AlignmentRunRecord,
) -> Result<(), AlignmentError> {
    use std::io::Write;
    let path = path.as_ref();
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|source| AlignmentError::Io {
                path: parent.display().to_string(),
                source,
            })?;
        }
    }
    let mut file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|source| AlignmentError::Io {
            path: path.display().to_string(),
            source,
        })?;
    let line = serde_json::to_string(record).expect("journal record serializes");
    writeln!(file, "{line}").map_err(|source| AlignmentError::Io {
        path: path.display().to_string(),
        source,
    })
}
