//! Benchmark inputs: query sets, category tags, and human expert scores.
//!
//! Query files are line-delimited `id<TAB>category<TAB>text` records behind
//! a `#reporteval-queries v1` schema header. Human score files are CSV with
//! header `report_id,dimension,expert1,...,expertN`.

use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::fmt;
use std::path::Path;
use thiserror::Error;

pub const QUERY_FILE_HEADER: &str = "#reporteval-queries v1";

/// The twelve fixed query categories. Closed enumeration: anything else is
/// rejected at load time rather than coerced to `Other`, so category
/// distributions stay honest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CategoryTag {
    ScienceTechnology,
    HealthMedicine,
    EconomyBusiness,
    PoliticsSociety,
    HistoryCulture,
    ArtMusicLiterature,
    EntertainmentFashion,
    SportsFitness,
    Education,
    EnvironmentNature,
    Lifestyle,
    Other,
}

impl CategoryTag {
    pub const ALL: [CategoryTag; 12] = [
        CategoryTag::ScienceTechnology,
        CategoryTag::HealthMedicine,
        CategoryTag::EconomyBusiness,
        CategoryTag::PoliticsSociety,
        CategoryTag::HistoryCulture,
        CategoryTag::ArtMusicLiterature,
        CategoryTag::EntertainmentFashion,
        CategoryTag::SportsFitness,
        CategoryTag::Education,
        CategoryTag::EnvironmentNature,
        CategoryTag::Lifestyle,
        CategoryTag::Other,
    ];

    /// Canonical display name.
    pub fn name(&self) -> &'static str {
        match self {
            CategoryTag::ScienceTechnology => "Science & Technology",
            CategoryTag::HealthMedicine => "Health & Medicine",
            CategoryTag::EconomyBusiness => "Economy & Business",
            CategoryTag::PoliticsSociety => "Politics & Society",
            CategoryTag::HistoryCulture => "History & Culture",
            CategoryTag::ArtMusicLiterature => "Art, Music & Literature",
            CategoryTag::EntertainmentFashion => "Entertainment & Fashion",
            CategoryTag::SportsFitness => "Sports & Fitness",
            CategoryTag::Education => "Education",
            CategoryTag::EnvironmentNature => "Environment & Nature",
            CategoryTag::Lifestyle => "Lifestyle",
            CategoryTag::Other => "Other",
        }
    }

    /// Parse a category name. Case-insensitive; tolerates the comma-free
    /// spelling "Art Music & Literature".
    pub fn parse(name: &str) -> Option<CategoryTag> {
        let normalized = name.trim().to_lowercase().replace(',', "");
        Self::ALL
            .into_iter()
            .find(|tag| tag.name().to_lowercase().replace(',', "") == normalized)
    }
}

impl fmt::Display for CategoryTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One benchmark query.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub id: String,
    pub text: String,
    pub category: CategoryTag,
}

/// A scored dimension with its declared range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreDimension {
    Comprehensiveness,
    Coherence,
    Clarity,
    Insightfulness,
    Overall,
    Redundancy,
    Factuality,
}

impl ScoreDimension {
    pub const ALL: [ScoreDimension; 7] = [
        ScoreDimension::Comprehensiveness,
        ScoreDimension::Coherence,
        ScoreDimension::Clarity,
        ScoreDimension::Insightfulness,
        ScoreDimension::Overall,
        ScoreDimension::Redundancy,
        ScoreDimension::Factuality,
    ];

    /// The five quality sub-dimensions, in rubric order.
    pub const QUALITY: [ScoreDimension; 5] = [
        ScoreDimension::Comprehensiveness,
        ScoreDimension::Coherence,
        ScoreDimension::Clarity,
        ScoreDimension::Insightfulness,
        ScoreDimension::Overall,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ScoreDimension::Comprehensiveness => "comprehensiveness",
            ScoreDimension::Coherence => "coherence",
            ScoreDimension::Clarity => "clarity",
            ScoreDimension::Insightfulness => "insightfulness",
            ScoreDimension::Overall => "overall",
            ScoreDimension::Redundancy => "redundancy",
            ScoreDimension::Factuality => "factuality",
        }
    }

    pub fn parse(name: &str) -> Option<ScoreDimension> {
        let normalized = name.trim().to_lowercase();
        Self::ALL.into_iter().find(|d| d.name() == normalized)
    }

    /// Inclusive score range for the dimension: quality and redundancy on
    /// 0–4, factuality support on −1..1.
    pub fn range(&self) -> (f64, f64) {
        match self {
            ScoreDimension::Factuality => (-1.0, 1.0),
            _ => (0.0, 4.0),
        }
    }

    pub fn is_quality(&self) -> bool {
        Self::QUALITY.contains(self)
    }
}

impl fmt::Display for ScoreDimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Per-report, per-dimension scores from one or more human experts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanScoreSet {
    pub report_id: String,
    pub dimension: ScoreDimension,
    pub expert_scores: Vec<f64>,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("missing or invalid header line (expected `{QUERY_FILE_HEADER}`)")]
    BadHeader,
    #[error("line {line}: malformed record (expected id<TAB>category<TAB>text)")]
    MalformedLine { line: usize },
    #[error("line {line}: duplicate query id {id:?}")]
    DuplicateId { line: usize, id: String },
    #[error("line {line}: unknown category {name:?}")]
    UnknownCategory { line: usize, name: String },
    #[error("line {line}: empty query text")]
    EmptyText { line: usize },
    #[error("no records")]
    NoRecords,
    #[error("human scores row {row}: unknown dimension {name:?}")]
    UnknownDimension { row: usize, name: String },
    #[error("human scores row {row}: missing expert column {column}")]
    MissingExpert { row: usize, column: usize },
    #[error(
        "human scores row {row}: score {score} out of range for {dimension} \
         (expected {min}..={max})"
    )]
    ScoreOutOfRange {
        row: usize,
        score: f64,
        dimension: ScoreDimension,
        min: f64,
        max: f64,
    },
    #[error("human scores row {row}: {message}")]
    BadScoreRow { row: usize, message: String },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("empty expert score list")]
    EmptyScores,
}

/// Load a query set. Order is preserved; ids must be unique; every category
/// must be one of the twelve. Blank lines and `#` comment lines after the
/// header are skipped.
pub fn load_queries(path: impl AsRef<Path>) -> Result<Vec<QueryRecord>, CorpusError> {
    let path = path.as_ref();
    let raw = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_queries(&raw)
}

/// Parse query records from already-loaded text. See [`load_queries`].
pub fn parse_queries(raw: &str) -> Result<Vec<QueryRecord>, CorpusError> {
    let mut lines = raw.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim() == QUERY_FILE_HEADER => {}
        _ => return Err(CorpusError::BadHeader),
    }

    let mut seen: HashSet<String> = HashSet::new();
    let mut records = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut fields = line.splitn(3, '\t');
        let (id, category, text) = match (fields.next(), fields.next(), fields.next()) {
            (Some(id), Some(category), Some(text)) => (id.trim(), category, text.trim()),
            _ => return Err(CorpusError::MalformedLine { line: line_no }),
        };
        if id.is_empty() {
            return Err(CorpusError::MalformedLine { line: line_no });
        }
        if text.is_empty() {
            return Err(CorpusError::EmptyText { line: line_no });
        }
        let category =
            CategoryTag::parse(category).ok_or_else(|| CorpusError::UnknownCategory {
                line: line_no,
                name: category.trim().to_string(),
            })?;
        if !seen.insert(id.to_string()) {
            return Err(CorpusError::DuplicateId {
                line: line_no,
                id: id.to_string(),
            });
        }
        records.push(QueryRecord {
            id: id.to_string(),
            text: text.to_string(),
            category,
        });
    }

    if records.is_empty() {
        return Err(CorpusError::NoRecords);
    }
    Ok(records)
}

/// Serialize query records back to the line-delimited format. Round-trips
/// with [`load_queries`].
pub fn format_queries(records: &[QueryRecord]) -> String {
    let mut out = String::from(QUERY_FILE_HEADER);
    out.push('\n');
    for record in records {
        out.push_str(&record.id);
        out.push('\t');
        out.push_str(record.category.name());
        out.push('\t');
        out.push_str(&record.text);
        out.push('\n');
    }
    out
}

pub fn save_queries(path: impl AsRef<Path>, records: &[QueryRecord]) -> Result<(), CorpusError> {
    let path = path.as_ref();
    std::fs::write(path, format_queries(records)).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Load human expert scores from a CSV table with header
/// `report_id,dimension,expert1,...,expertN`. Every score is range-checked
/// against its dimension. Experts may submit fractional values.
pub fn load_human_scores(path: impl AsRef<Path>) -> Result<Vec<HumanScoreSet>, CorpusError> {
    let path = path.as_ref();
    let raw = std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_human_scores(&raw)
}

pub fn parse_human_scores(raw: &str) -> Result<Vec<HumanScoreSet>, CorpusError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(raw.as_bytes());

    let headers = reader.headers()?.clone();
    let expert_count = headers.len().saturating_sub(2);
    if headers.len() < 2
        || headers.get(0).map(str::trim) != Some("report_id")
        || headers.get(1).map(str::trim) != Some("dimension")
        || expert_count == 0
    {
        return Err(CorpusError::BadScoreRow {
            row: 1,
            message: format!(
                "bad header {:?} (expected report_id,dimension,expert1,...)",
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }

    let mut sets = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let row = idx + 2; // 1-based, after the header
        let record = record?;
        let report_id = record
            .get(0)
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .ok_or_else(|| CorpusError::BadScoreRow {
                row,
                message: "missing report_id".to_string(),
            })?;
        let dim_name = record.get(1).map(str::trim).unwrap_or("");
        let dimension =
            ScoreDimension::parse(dim_name).ok_or_else(|| CorpusError::UnknownDimension {
                row,
                name: dim_name.to_string(),
            })?;

        let (min, max) = dimension.range();
        let mut expert_scores = Vec::with_capacity(expert_count);
        for column in 0..expert_count {
            let field =
                record
                    .get(column + 2)
                    .map(str::trim)
                    .ok_or(CorpusError::MissingExpert {
                        row,
                        column: column + 1,
                    })?;
            if field.is_empty() {
                return Err(CorpusError::MissingExpert {
                    row,
                    column: column + 1,
                });
            }
            let score: f64 = field.parse().map_err(|_| CorpusError::BadScoreRow {
                row,
                message: format!("expert{} value {field:?} is not a number", column + 1),
            })?;
            if !(min..=max).contains(&score) {
                return Err(CorpusError::ScoreOutOfRange {
                    row,
                    score,
                    dimension,
                    min,
                    max,
                });
            }
            expert_scores.push(score);
        }

        sets.push(HumanScoreSet {
            report_id: report_id.to_string(),
            dimension,
            expert_scores,
        });
    }

    Ok(sets)
}

/// Arithmetic mean of the expert scores, full precision.
pub fn average_expert_scores(set: &HumanScoreSet) -> Result<f64, CorpusError> {
    if set.expert_scores.is_empty() {
        return Err(CorpusError::EmptyScores);
    }
    let sum: f64 = set.expert_scores.iter().sum();
    Ok(sum / set.expert_scores.len() as f64)
}
