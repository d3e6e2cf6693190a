//! Full-corpus orchestration: evaluate a system's reports end to end with
//! incremental, resumable persistence; compute corpus statistics; compare
//! systems; classify queries into the twelve categories.

mod store;
mod tables;

pub use store::{completed_reports, load_manifest, load_record, load_records, write_manifest};
pub use tables::{comparison_jsonl, render_comparison, render_stats, stats_jsonl};

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use thiserror::Error;

use crate::corpus::{CategoryTag, QueryRecord};
use crate::exec;
use crate::factuality::{
    evaluate_factuality, FactualityError, FactualityOptions, FactualityResult,
};
use crate::judge::{bindings, Judge, JudgeError, TemplateSet, VerdictPayload, VerdictSchema};
use crate::quality::{evaluate_quality, QualityOptions, QualityScores};
use crate::redundancy::{evaluate_redundancy, RedundancyResult};
use crate::segment::{ReportDocument, SegmentError, SegmentOptions};
use crate::sources::{SourceError, SourceStore};
use crate::util::short_hash;

#[derive(Debug, Error)]
pub enum BenchmarkError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed JSON in {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("report {0:?} has no matching query")]
    ReportWithoutQuery(String),
    #[error(
        "run directory holds config hash {existing} but this configuration hashes to {requested}; \
         refusing to mix results"
    )]
    ConfigHashMismatch { existing: String, requested: String },
    #[error("empty run")]
    EmptyRun,
    #[error("need at least two runs to compare")]
    NotEnoughRuns,
    #[error("runs cover different query sets")]
    MismatchedQuerySets,
    #[error("report {report_id}: {source}")]
    Report {
        report_id: String,
        #[source]
        source: SegmentError,
    },
    #[error(transparent)]
    Judge(#[from] JudgeError),
    #[error(transparent)]
    Source(#[from] SourceError),
}

impl From<FactualityError> for BenchmarkError {
    fn from(err: FactualityError) -> Self {
        match err {
            FactualityError::Judge(e) => BenchmarkError::Judge(e),
            FactualityError::Source(e) => BenchmarkError::Source(e),
        }
    }
}

/// Everything that determines scoring for a run. Hashed into the manifest
/// so stale partial results never mix across configurations.
#[derive(Debug, Clone)]
pub struct EvalOptions {
    pub seed: u64,
    pub pair_cap: usize,
    pub segment: SegmentOptions,
    pub quality_token_budget: usize,
    pub source_token_budget: usize,
    pub claim_pair_budget: Option<usize>,
    /// Stop after this many newly evaluated reports (checkpointing and
    /// interruption tests); `None` runs to completion.
    pub stop_after: Option<usize>,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            pair_cap: 30,
            segment: SegmentOptions::default(),
            quality_token_budget: 32_000,
            source_token_budget: 16_000,
            claim_pair_budget: None,
            stop_after: None,
        }
    }
}

impl EvalOptions {
    /// Stable digest over every scoring-relevant knob plus template
    /// versions and the judge model.
    pub fn config_hash(&self, templates: &TemplateSet, model: &str) -> String {
        let mut key = format!(
            "seed={};cap={};min_tokens={};qbudget={};sbudget={};pairs={:?};model={}",
            self.seed,
            self.pair_cap,
            self.segment.min_tokens,
            self.quality_token_budget,
            self.source_token_budget,
            self.claim_pair_budget,
            model,
        );
        for (name, version) in templates.versions() {
            key.push_str(&format!(";{name}={version}"));
        }
        short_hash(&key)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub system: String,
    pub run_id: String,
    pub config_hash: String,
    pub seed: u64,
    pub pair_cap: usize,
    pub model: String,
    pub template_versions: BTreeMap<String, String>,
    pub query_set_hash: String,
    pub created_at: String,
}

/// Per-report evaluation record, the unit of incremental persistence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRecord {
    pub report_id: String,
    pub token_count: usize,
    pub paragraph_count: usize,
    /// Absent when the judge never produced a valid quality verdict; such
    /// reports are excluded from quality means and counted as coverage.
    pub quality: Option<QualityScores>,
    pub quality_truncated: bool,
    pub quality_error: Option<String>,
    pub redundancy: RedundancyResult,
    pub factuality: FactualityResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemRun {
    pub manifest: RunManifest,
    /// Sorted by report id.
    pub reports: Vec<ReportRecord>,
}

/// Digest of the query ids a run covers; compared before any cross-run
/// aggregation.
pub fn query_set_hash(queries: &[QueryRecord]) -> String {
    let mut ids: Vec<&str> = queries.iter().map(|q| q.id.as_str()).collect();
    ids.sort_unstable();
    short_hash(&ids.join("\n"))
}

/// Evaluate every report in `reports_dir` (files named `<query-id>.md`)
/// against `queries`, persisting into `run_dir` incrementally. A rerun
/// skips reports that already have records, so an interrupted run resumes
/// without re-judging; a config change refuses to reuse the directory.
#[allow(clippy::too_many_arguments)]
pub fn evaluate_system(
    system: &str,
    run_id: &str,
    run_dir: &Path,
    reports_dir: &Path,
    queries: &[QueryRecord],
    judge: &Judge,
    templates: &TemplateSet,
    sources: &SourceStore,
    options: &EvalOptions,
) -> Result<SystemRun, BenchmarkError> {
    let query_map: BTreeMap<&str, &QueryRecord> =
        queries.iter().map(|q| (q.id.as_str(), q)).collect();

    let mut report_files: Vec<(String, PathBuf)> = Vec::new();
    for entry in std::fs::read_dir(reports_dir).map_err(|e| BenchmarkError::Io {
        path: reports_dir.display().to_string(),
        source: e,
    })? {
        let entry = entry.map_err(|e| BenchmarkError::Io {
            path: reports_dir.display().to_string(),
            source: e,
        })?;
        let path = entry.path();
        if path.extension().map(|e| e == "md") != Some(true) {
            continue;
        }
        let id = path
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or_default()
            .to_string();
        if !query_map.contains_key(id.as_str()) {
            return Err(BenchmarkError::ReportWithoutQuery(id));
        }
        report_files.push((id, path));
    }
    report_files.sort();

    let model = judge.model_identifier();
    let config_hash = options.config_hash(templates, &model);
    let manifest = match store::load_manifest(run_dir)? {
        Some(existing) => {
            if existing.config_hash != config_hash {
                return Err(BenchmarkError::ConfigHashMismatch {
                    existing: existing.config_hash,
                    requested: config_hash,
                });
            }
            existing
        }
        None => {
            let manifest = RunManifest {
                system: system.to_string(),
                run_id: run_id.to_string(),
                config_hash,
                seed: options.seed,
                pair_cap: options.pair_cap,
                model,
                template_versions: templates.versions(),
                query_set_hash: query_set_hash(queries),
                created_at: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            };
            store::write_manifest(run_dir, &manifest)?;
            manifest
        }
    };

    let done: BTreeSet<String> = store::completed_reports(run_dir)?;
    let mut pending: Vec<(String, PathBuf)> = report_files
        .into_iter()
        .filter(|(id, _)| !done.contains(id))
        .collect();
    if let Some(limit) = options.stop_after {
        pending.truncate(limit);
    }

    let outcomes = exec::map(&pending, |(id, path)| {
        evaluate_one_report(id, path, &query_map, judge, templates, sources, options).and_then(
            |record| {
                store::write_record(run_dir, &record)?;
                Ok(record)
            },
        )
    });
    for outcome in outcomes {
        outcome?;
    }

    Ok(SystemRun {
        reports: store::load_records(run_dir)?,
        manifest,
    })
}

fn evaluate_one_report(
    id: &str,
    path: &Path,
    query_map: &BTreeMap<&str, &QueryRecord>,
    judge: &Judge,
    templates: &TemplateSet,
    sources: &SourceStore,
    options: &EvalOptions,
) -> Result<ReportRecord, BenchmarkError> {
    let raw = std::fs::read_to_string(path).map_err(|e| BenchmarkError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let report = ReportDocument::parse(id, &raw, &options.segment).map_err(|source| {
        BenchmarkError::Report {
            report_id: id.to_string(),
            source,
        }
    })?;
    let query = query_map[id];

    let quality_options = QualityOptions {
        token_budget: options.quality_token_budget,
    };
    let (quality, quality_truncated, quality_error) =
        match evaluate_quality(query, &report, judge, templates, &quality_options) {
            Ok(eval) => (Some(eval.scores), eval.truncated, None),
            Err(err) if err.is_invalid_verdict() => (None, false, Some(err.to_string())),
            Err(err) => return Err(err.into()),
        };

    let redundancy =
        evaluate_redundancy(&report, judge, templates, options.pair_cap, options.seed)?;

    let factuality_options = FactualityOptions {
        source_token_budget: options.source_token_budget,
        pair_budget: options.claim_pair_budget,
        seed: options.seed,
    };
    let factuality = evaluate_factuality(&report, judge, templates, sources, &factuality_options)?;

    Ok(ReportRecord {
        report_id: id.to_string(),
        token_count: report.token_count,
        paragraph_count: report.paragraphs.len(),
        quality,
        quality_truncated,
        quality_error,
        redundancy,
        factuality,
    })
}

/// Load a persisted run back from its directory.
pub fn load_run(run_dir: &Path) -> Result<SystemRun, BenchmarkError> {
    let manifest = store::load_manifest(run_dir)?.ok_or_else(|| BenchmarkError::Io {
        path: store::manifest_path(run_dir).display().to_string(),
        source: std::io::Error::new(std::io::ErrorKind::NotFound, "missing manifest"),
    })?;
    Ok(SystemRun {
        reports: store::load_records(run_dir)?,
        manifest,
    })
}

// ── Corpus statistics ──────────────────────────────────────────────────

/// Mean and sample (n−1) standard deviation for one statistic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
    pub single_sample: bool,
}

fn mean_std(values: &[f64]) -> MeanStd {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return MeanStd {
            mean,
            std: 0.0,
            single_sample: true,
        };
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    MeanStd {
        mean,
        std: (ss / (n as f64 - 1.0)).sqrt(),
        single_sample: false,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsSummary {
    pub n: usize,
    pub token_length: MeanStd,
    pub pair_count: MeanStd,
    pub claim_source_pairs: MeanStd,
}

/// Report-length, paragraph-pair, and claim–source-pair statistics over a
/// run (mean ± sample standard deviation).
pub fn corpus_stats(run: &SystemRun) -> Result<StatsSummary, BenchmarkError> {
    if run.reports.is_empty() {
        return Err(BenchmarkError::EmptyRun);
    }
    let tokens: Vec<f64> = run.reports.iter().map(|r| r.token_count as f64).collect();
    let pairs: Vec<f64> = run
        .reports
        .iter()
        .map(|r| r.redundancy.attempted_pairs as f64)
        .collect();
    let claim_pairs: Vec<f64> = run
        .reports
        .iter()
        .map(|r| r.factuality.total_pairs() as f64)
        .collect();
    Ok(StatsSummary {
        n: run.reports.len(),
        token_length: mean_std(&tokens),
        pair_count: mean_std(&pairs),
        claim_source_pairs: mean_std(&claim_pairs),
    })
}

// ── System comparison ──────────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub section: String,
    pub label: String,
    pub values: Vec<Option<f64>>,
    /// Column indices holding the row maximum (several when tied).
    pub best: Vec<usize>,
    pub second: Vec<usize>,
    pub tie: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub systems: Vec<String>,
    pub rows: Vec<ComparisonRow>,
    /// Per system: (reports with a quality verdict, total reports).
    pub quality_coverage: Vec<(usize, usize)>,
    /// Per system: reports whose redundancy was vacuous (no eligible pairs).
    pub vacuous_redundancy: Vec<usize>,
}

fn mark_best(values: &[Option<f64>]) -> (Vec<usize>, Vec<usize>, bool) {
    let mut present: Vec<(usize, f64)> = values
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.map(|v| (i, v)))
        .collect();
    if present.is_empty() {
        return (Vec::new(), Vec::new(), false);
    }
    present.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal));
    let top = present[0].1;
    let best: Vec<usize> = present
        .iter()
        .filter(|(_, v)| *v == top)
        .map(|(i, _)| *i)
        .collect();
    let second_value = present.iter().map(|(_, v)| *v).find(|v| *v < top);
    let second: Vec<usize> = match second_value {
        None => Vec::new(),
        Some(s) => present
            .iter()
            .filter(|(_, v)| *v == s)
            .map(|(i, _)| *i)
            .collect(),
    };
    let tie = best.len() > 1 || second.len() > 1;
    (best, second, tie)
}

/// Mean over an optional projection of the reports, `None` when no report
/// carries the value.
fn mean_over<F>(run: &SystemRun, f: F) -> Option<f64>
where
    F: Fn(&ReportRecord) -> Option<f64>,
{
    let values: Vec<f64> = run.reports.iter().filter_map(f).collect();
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

/// Cross-system comparison over identical query sets: five quality rows,
/// one redundancy row, two factuality rows; best and second-best marked per
/// row, higher always better.
pub fn compare_systems(runs: &[SystemRun]) -> Result<ComparisonTable, BenchmarkError> {
    if runs.len() < 2 {
        return Err(BenchmarkError::NotEnoughRuns);
    }
    let hash = &runs[0].manifest.query_set_hash;
    if runs.iter().any(|r| &r.manifest.query_set_hash != hash) {
        return Err(BenchmarkError::MismatchedQuerySets);
    }

    let systems: Vec<String> = runs.iter().map(|r| r.manifest.system.clone()).collect();
    let quality_dim = |dim: crate::corpus::ScoreDimension| {
        move |r: &ReportRecord| r.quality.as_ref().and_then(|q| q.dimension_value(dim))
    };

    use crate::corpus::ScoreDimension::*;
    type Projection = Box<dyn Fn(&ReportRecord) -> Option<f64>>;
    let specs: Vec<(&str, &str, Projection)> = vec![
        (
            "Quality",
            "Comprehensiveness",
            Box::new(quality_dim(Comprehensiveness)),
        ),
        ("Quality", "Coherence", Box::new(quality_dim(Coherence))),
        ("Quality", "Clarity", Box::new(quality_dim(Clarity))),
        (
            "Quality",
            "Insightfulness",
            Box::new(quality_dim(Insightfulness)),
        ),
        ("Quality", "Overall Quality", Box::new(quality_dim(Overall))),
        (
            "Redundancy",
            "Overall Redundancy",
            Box::new(|r: &ReportRecord| Some(r.redundancy.overall)),
        ),
        (
            "Factuality",
            "Average Support Score",
            Box::new(|r: &ReportRecord| r.factuality.f1),
        ),
        (
            "Factuality",
            "Strong Support Rate",
            Box::new(|r: &ReportRecord| r.factuality.f2),
        ),
    ];

    let mut rows = Vec::with_capacity(specs.len());
    for (section, label, projection) in specs {
        let values: Vec<Option<f64>> = runs.iter().map(|run| mean_over(run, &projection)).collect();
        let (best, second, tie) = mark_best(&values);
        rows.push(ComparisonRow {
            section: section.to_string(),
            label: label.to_string(),
            values,
            best,
            second,
            tie,
        });
    }

    let quality_coverage = runs
        .iter()
        .map(|run| {
            (
                run.reports.iter().filter(|r| r.quality.is_some()).count(),
                run.reports.len(),
            )
        })
        .collect();
    let vacuous_redundancy = runs
        .iter()
        .map(|run| run.reports.iter().filter(|r| r.redundancy.vacuous).count())
        .collect();

    Ok(ComparisonTable {
        systems,
        rows,
        quality_coverage,
        vacuous_redundancy,
    })
}

// ── Query classification ───────────────────────────────────────────────

/// Ask the judge to place a query in one of the twelve categories. An
/// answer outside the closed enumeration earns the standard single retry,
/// then errors.
pub fn classify_query(
    query: &QueryRecord,
    judge: &Judge,
    templates: &TemplateSet,
) -> Result<CategoryTag, JudgeError> {
    let verdict = judge.render_and_judge(
        &templates.category,
        &bindings([("input", query.text.as_str())]),
        VerdictSchema::Category,
    )?;
    match verdict.payload {
        VerdictPayload::Category(payload) => Ok(payload.category),
        _ => Err(JudgeError::Backend(
            "schema mismatch in category verdict".into(),
        )),
    }
}
