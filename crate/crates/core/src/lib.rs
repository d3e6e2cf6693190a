//! Evaluation engine for machine-generated research reports.
//!
//! Scores each report along three dimensions — quality (five-part rubric,
//! 0–4), redundancy (pairwise paragraph judgments averaged into a 0–4
//! report score), and factuality (claim–source support on a −1/0/1 scale,
//! aggregated into an average support score and a strong support rate) —
//! using a pluggable LLM judge backend. A deterministic mock backend makes
//! every aggregation path testable and reproducible without a network.
//!
//! On top of the per-report scores the crate provides benchmark-level
//! machinery: corpus statistics, cross-system comparison tables, query
//! category classification, and LLM–human alignment metrics (per-dimension
//! mean absolute deviation and exact-match ranking agreement).

pub mod alignment;
pub mod benchmark;
pub mod corpus;
pub mod exec;
pub mod factuality;
pub mod judge;
pub mod quality;
pub mod redundancy;
pub mod segment;
pub mod sources;
pub mod util;

pub use corpus::{CategoryTag, HumanScoreSet, QueryRecord, ScoreDimension};
pub use factuality::{FactualityResult, SupportScore};
pub use judge::{Judge, JudgeOptions, JudgeVerdict, PromptTemplate, VerdictSchema};
pub use quality::QualityScores;
pub use redundancy::{PairScore, RedundancyResult};
pub use segment::{Claim, Paragraph, ParagraphPair, ReportDocument};
pub use sources::{SourceDocument, SourceStatus};
