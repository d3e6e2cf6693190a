//! Claim–source factuality: judge every claim against each of its cited
//! sources on the three-level support scale, then aggregate the average
//! support score and the strong support rate.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

use crate::exec;
use crate::judge::{bindings, Judge, JudgeError, TemplateSet, VerdictPayload, VerdictSchema};
use crate::segment::{claim_hash, ReportDocument};
use crate::sources::{SourceDocument, SourceError, SourceStatus, SourceStore};
use crate::util::truncate_tokens;

/// Three-level support verdict: 1 full, 0 partial, −1 none.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupportScore {
    pub value: i8,
    pub sentence_support: String,
}

/// One judged claim–source pair, keyed for persistence and re-aggregation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClaimSourceScore {
    pub claim: String,
    pub claim_hash: String,
    pub source_ref: String,
    pub source_hash: String,
    pub support: SupportScore,
}

/// Report-level factuality. `f1` is the mean support score (−1..1) and `f2`
/// the fraction of pairs with full support (0..1); both are absent when no
/// pair could be judged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactualityResult {
    pub report_id: String,
    pub pair_scores: Vec<ClaimSourceScore>,
    /// Judged pair count (the denominator of both metrics).
    pub m: usize,
    pub f1: Option<f64>,
    pub f2: Option<f64>,
    /// Pairs whose source could not be resolved; excluded from `m` — a
    /// fetch failure is not evidence of hallucination.
    pub unresolved_count: usize,
    /// Pairs with invalid verdicts after retry; excluded from `m`.
    pub invalid_count: usize,
    /// Sources truncated to the token budget before judging.
    pub truncated_sources: usize,
    pub no_pairs: bool,
}

impl FactualityResult {
    pub fn from_scored_pairs(
        report_id: impl Into<String>,
        pair_scores: Vec<ClaimSourceScore>,
        unresolved_count: usize,
        invalid_count: usize,
        truncated_sources: usize,
    ) -> Self {
        let m = pair_scores.len();
        let (f1, f2) = if m == 0 {
            (None, None)
        } else {
            let sum: f64 = pair_scores.iter().map(|p| p.support.value as f64).sum();
            let full = pair_scores.iter().filter(|p| p.support.value == 1).count();
            (Some(sum / m as f64), Some(full as f64 / m as f64))
        };
        Self {
            report_id: report_id.into(),
            pair_scores,
            m,
            f1,
            f2,
            unresolved_count,
            invalid_count,
            truncated_sources,
            no_pairs: m == 0,
        }
    }

    /// All claim–source pairs the evaluation attempted, judged or not.
    pub fn total_pairs(&self) -> usize {
        self.m + self.unresolved_count + self.invalid_count
    }
}

#[derive(Debug, Clone)]
pub struct FactualityOptions {
    /// Source documents are truncated to this budget before judging, with
    /// the truncation counted in the result.
    pub source_token_budget: usize,
    /// Optional cost-control budget on expanded claim–source pairs; `None`
    /// keeps every pair. When set, a uniform seeded sample is taken.
    pub pair_budget: Option<usize>,
    pub seed: u64,
}

impl Default for FactualityOptions {
    fn default() -> Self {
        Self {
            source_token_budget: 16_000,
            pair_budget: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Error)]
pub enum FactualityError {
    #[error(transparent)]
    Judge(#[from] JudgeError),
    #[error(transparent)]
    Source(#[from] SourceError),
}

/// Judge one claim against one resolved source. `{markdown}` carries the
/// (budgeted) source text, `{input}` the claim sentence.
pub fn score_claim_source(
    claim_text: &str,
    source: &SourceDocument,
    judge: &Judge,
    templates: &TemplateSet,
    source_token_budget: usize,
) -> Result<(SupportScore, bool), JudgeError> {
    debug_assert_eq!(source.status, SourceStatus::Resolved);
    let markdown = source.markdown.as_deref().unwrap_or_default();
    let (body, truncated) = truncate_tokens(markdown, source_token_budget);
    let verdict = judge.render_and_judge(
        &templates.factuality,
        &bindings([("markdown", body.as_str()), ("input", claim_text)]),
        VerdictSchema::Factuality,
    )?;
    let VerdictPayload::Factuality(payload) = verdict.payload else {
        return Err(JudgeError::Backend(
            "schema mismatch in factuality verdict".into(),
        ));
    };
    Ok((
        SupportScore {
            value: payload.is_factual,
            sentence_support: payload.sentence_support,
        },
        truncated,
    ))
}

/// Expand claims × sources, resolve the sources, judge every resolved pair,
/// and aggregate. Multi-source claims are judged independently against each
/// source.
pub fn evaluate_factuality(
    report: &ReportDocument,
    judge: &Judge,
    templates: &TemplateSet,
    store: &SourceStore,
    options: &FactualityOptions,
) -> Result<FactualityResult, FactualityError> {
    // Expand into (claim text, source ref) pairs, preserving claim order.
    let mut expanded: Vec<(String, String)> = Vec::new();
    for claim in &report.claims {
        for source_ref in &claim.source_refs {
            expanded.push((claim.text.clone(), source_ref.clone()));
        }
    }
    if let Some(budget) = options.pair_budget {
        expanded = sample_pairs(expanded, budget, options.seed, &report.id);
    }

    // Resolve each distinct source once.
    let mut unique_refs: Vec<String> = Vec::new();
    for (_, source_ref) in &expanded {
        if !unique_refs.contains(source_ref) {
            unique_refs.push(source_ref.clone());
        }
    }
    let mut sources: BTreeMap<String, SourceDocument> = BTreeMap::new();
    let fetched = exec::map(&unique_refs, |source_ref| store.fetch_source(source_ref));
    for (source_ref, outcome) in unique_refs.iter().zip(fetched) {
        sources.insert(source_ref.clone(), outcome?);
    }

    // Judge the resolved pairs.
    let mut unresolved = 0usize;
    let mut judgeable: Vec<(String, String)> = Vec::new();
    for (claim_text, source_ref) in expanded {
        match sources.get(&source_ref).map(|s| s.status) {
            Some(SourceStatus::Resolved) => judgeable.push((claim_text, source_ref)),
            _ => unresolved += 1,
        }
    }

    let outcomes = exec::map(&judgeable, |(claim_text, source_ref)| {
        let source = &sources[source_ref];
        score_claim_source(
            claim_text,
            source,
            judge,
            templates,
            options.source_token_budget,
        )
        .map(|(support, truncated)| {
            let score = ClaimSourceScore {
                claim: claim_text.clone(),
                claim_hash: claim_hash(claim_text),
                source_ref: source_ref.clone(),
                source_hash: source
                    .content_hash
                    .clone()
                    .unwrap_or_else(|| crate::util::short_hash(source_ref)),
                support,
            };
            (score, truncated)
        })
    });

    let mut scored = Vec::with_capacity(judgeable.len());
    let mut invalid = 0usize;
    let mut truncated_sources = 0usize;
    for outcome in outcomes {
        match outcome {
            Ok((score, truncated)) => {
                if truncated {
                    truncated_sources += 1;
                }
                scored.push(score);
            }
            Err(err) if err.is_invalid_verdict() => invalid += 1,
            Err(err) => return Err(err.into()),
        }
    }

    Ok(FactualityResult::from_scored_pairs(
        report.id.clone(),
        scored,
        unresolved,
        invalid,
        truncated_sources,
    ))
}

/// Uniform seeded sample preserving original order.
fn sample_pairs(
    expanded: Vec<(String, String)>,
    budget: usize,
    seed: u64,
    report_id: &str,
) -> Vec<(String, String)> {
    use rand::SeedableRng;
    if expanded.len() <= budget {
        return expanded;
    }
    let key = crate::util::sha256_hex(format!("{seed}:claims:{report_id}").as_bytes());
    let mut state = [0u8; 32];
    for (i, byte) in state.iter_mut().enumerate() {
        *byte = u8::from_str_radix(&key[2 * i..2 * i + 2], 16).unwrap_or(0);
    }
    let mut rng = rand_chacha::ChaCha8Rng::from_seed(state);
    let mut keep: Vec<usize> =
        rand::seq::index::sample(&mut rng, expanded.len(), budget).into_vec();
    keep.sort_unstable();
    let mut keep_iter = keep.into_iter().peekable();
    expanded
        .into_iter()
        .enumerate()
        .filter_map(|(idx, pair)| {
            if keep_iter.peek() == Some(&idx) {
                keep_iter.next();
                Some(pair)
            } else {
                None
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::judge::{JudgeOptions, MockBackend, PromptTemplate, TemplateKind};
    use crate::segment::SegmentOptions;
    use crate::sources::{resolved_document, FetchPolicy, SourceCache};
    use proptest::prelude::*;
    use std::sync::Arc;

    fn scored(value: i8) -> ClaimSourceScore {
        ClaimSourceScore {
            claim: "c".into(),
            claim_hash: "ch".into(),
            source_ref: "s".into(),
            source_hash: "sh".into(),
            support: SupportScore {
                value,
                sentence_support: String::new(),
            },
        }
    }

    #[test]
    fn hand_summed_metrics() {
        let result = FactualityResult::from_scored_pairs(
            "r",
            vec![scored(1), scored(1), scored(0), scored(-1)],
            0,
            0,
            0,
        );
        assert_eq!(result.m, 4);
        assert_eq!(result.f1, Some(0.25));
        assert_eq!(result.f2, Some(0.5));
        assert!(!result.no_pairs);
    }

    #[test]
    fn all_full_support() {
        let result = FactualityResult::from_scored_pairs("r", vec![scored(1), scored(1)], 0, 0, 0);
        assert_eq!(result.f1, Some(1.0));
        assert_eq!(result.f2, Some(1.0));
    }

    #[test]
    fn no_citations_sets_no_pairs_flag() {
        let result = FactualityResult::from_scored_pairs("r", vec![], 0, 0, 0);
        assert!(result.no_pairs);
        assert_eq!(result.m, 0);
        assert_eq!(result.f1, None);
        assert_eq!(result.f2, None);
    }

    fn tiny_templates() -> TemplateSet {
        let mut set = TemplateSet::default();
        set.set(PromptTemplate::from_body(
            TemplateKind::Factuality,
            "#template-version: tiny\nSRC: {markdown}\nCLAIM: {input}",
        ));
        set
    }

    #[test]
    fn pipeline_counts_unresolved_and_scores_resolved() {
        // One claim citing a cached source and one citing a dead label.
        let md = "Opening filler paragraph with plenty of words to stay uncited here.\n\n\
                  Rust ships in trains [1]. The moon is cheese [2].\n\n\
                  ## References\n\n[1] https://release.test/trains\n[2] archive box 7\n";
        let report = ReportDocument::parse("r1", md, &SegmentOptions { min_tokens: 1 }).unwrap();
        assert_eq!(report.claim_source_pair_count(), 2);

        let dir = tempfile::tempdir().unwrap();
        let cache = SourceCache::open(dir.path()).unwrap();
        cache
            .put(&resolved_document(
                "https://release.test/trains",
                "Rust releases ride a train schedule.",
            ))
            .unwrap();
        // The label is pre-cached as unreachable so the run stays offline.
        cache
            .put(&SourceDocument {
                source_ref: "archive box 7".to_string(),
                status: SourceStatus::Unreachable,
                markdown: None,
                content_hash: None,
                fetched_at: "t".to_string(),
            })
            .unwrap();
        let store = SourceStore::new(cache, FetchPolicy::offline());

        let templates = tiny_templates();
        let prompt = "SRC: Rust releases ride a train schedule.\nCLAIM: Rust ships in trains [1].";
        let judge = Judge::new(
            Arc::new(MockBackend::from_pairs([(
                prompt,
                r#"{"is_factual": 1, "sentence_support": "Rust releases ride a train schedule."}"#,
            )])),
            JudgeOptions::immediate(),
        );

        let result = evaluate_factuality(
            &report,
            &judge,
            &templates,
            &store,
            &FactualityOptions::default(),
        )
        .unwrap();
        assert_eq!(result.m, 1);
        assert_eq!(result.unresolved_count, 1);
        assert_eq!(result.invalid_count, 0);
        assert_eq!(result.f1, Some(1.0));
        assert_eq!(result.total_pairs(), 2);
    }

    #[test]
    fn pair_budget_samples_deterministically() {
        let expanded: Vec<(String, String)> = (0..20)
            .map(|i| (format!("claim {i}"), format!("ref {i}")))
            .collect();
        let a = sample_pairs(expanded.clone(), 5, 9, "r");
        let b = sample_pairs(expanded.clone(), 5, 9, "r");
        assert_eq!(a, b);
        assert_eq!(a.len(), 5);
        // Order preserved.
        let indices: Vec<usize> = a
            .iter()
            .map(|(c, _)| c.trim_start_matches("claim ").parse().unwrap())
            .collect();
        let mut sorted = indices.clone();
        sorted.sort_unstable();
        assert_eq!(indices, sorted);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        /// Average support score and strong support rate against brute force,
        /// plus the f1 ≤ f2 ordering.
        #[test]
        fn metrics_match_brute_force(values in proptest::collection::vec(-1i8..=1, 1..80)) {
            let pairs: Vec<ClaimSourceScore> = values.iter().map(|v| scored(*v)).collect();
            let result = FactualityResult::from_scored_pairs("r", pairs, 0, 0, 0);

            let mut sum = 0.0f64;
            let mut full = 0usize;
            for v in &values {
                sum += *v as f64;
                if *v == 1 {
                    full += 1;
                }
            }
            let brute_f1 = sum / values.len() as f64;
            let brute_f2 = full as f64 / values.len() as f64;

            let f1 = result.f1.unwrap();
            let f2 = result.f2.unwrap();
            prop_assert!((f1 - brute_f1).abs() < 1e-12);
            prop_assert!((f2 - brute_f2).abs() < 1e-12);
            prop_assert!((-1.0..=1.0).contains(&f1));
            prop_assert!((0.0..=1.0).contains(&f2));
            prop_assert!(f1 <= f2 + 1e-12);
        }

        #[test]
        fn pair_accounting_adds_up(
            judged in proptest::collection::vec(-1i8..=1, 0..30),
            unresolved in 0usize..10,
            invalid in 0usize..10,
        ) {
            let pairs: Vec<ClaimSourceScore> = judged.iter().map(|v| scored(*v)).collect();
            let total = pairs.len() + unresolved + invalid;
            let result = FactualityResult::from_scored_pairs("r", pairs, unresolved, invalid, 0);
            prop_assert_eq!(result.total_pairs(), total);
        }
    }
}
