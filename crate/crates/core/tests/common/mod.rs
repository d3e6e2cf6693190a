//! Fixture support for the integration suites: deterministic synthetic
//! corpora plus mock-judge scripts built by rendering the same prompts the
//! engine renders.

#![allow(dead_code)]

use std::path::Path;
use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::Arc;

use reporteval_core::benchmark::EvalOptions;
use reporteval_core::corpus::{CategoryTag, QueryRecord};
use reporteval_core::judge::{bindings, BackendError, JudgeBackend, MockBackend, TemplateSet};
use reporteval_core::segment::{enumerate_pairs, ReportDocument};
use reporteval_core::sources::{resolved_document, SourceCache};
use reporteval_core::util::truncate_tokens;

/// Scripted outcomes for one synthetic report.
#[derive(Debug, Clone)]
pub struct ReportFixture {
    pub id: String,
    /// Interior (pairable) body paragraphs beyond intro and conclusion.
    pub body_paragraphs: usize,
    /// Citing sentences to embed (one claim each, one source per claim).
    pub claims: usize,
    pub quality: (u8, u8, u8, u8, u8),
    /// Redundancy score the mock returns for every enumerated pair.
    pub pair_score: u8,
    /// Support value the mock returns for claim `i`.
    pub claim_values: Vec<i8>,
}

impl ReportFixture {
    pub fn new(id: &str) -> Self {
        Self {
            id: id.to_string(),
            body_paragraphs: 4,
            claims: 2,
            quality: (3, 3, 3, 3, 3),
            pair_score: 4,
            claim_values: vec![1, 1],
        }
    }
}

fn filler(tag: &str, words: usize) -> String {
    (0..words)
        .map(|i| format!("{tag}w{i}"))
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn source_key(system: &str, report_id: &str, n: usize) -> String {
    format!("src-{system}-{report_id}-{n}")
}

pub fn source_body(key: &str) -> String {
    format!("Reference material for {key} confirming the stated fact in detail.")
}

/// Deterministic report markdown: intro, `body_paragraphs` interior
/// paragraphs (the first `claims` of them carry one cited sentence each),
/// conclusion, then a references section of resolvable cache keys.
pub fn report_markdown(system: &str, fixture: &ReportFixture) -> String {
    let id = &fixture.id;
    let mut md = String::new();
    md.push_str(&format!("Opening overview for {system} {id}. "));
    md.push_str(&filler(&format!("{system}{id}intro"), 34));
    md.push_str("\n\n");
    for p in 0..fixture.body_paragraphs {
        if p < fixture.claims {
            md.push_str(&format!(
                "Documented fact number {n} for {system} {id} holds [{r}]. ",
                n = p + 1,
                r = p + 1
            ));
        }
        md.push_str(&filler(&format!("{system}{id}p{p}"), 34));
        md.push_str("\n\n");
    }
    md.push_str(&format!("Closing remarks for {system} {id}. "));
    md.push_str(&filler(&format!("{system}{id}end"), 34));
    md.push_str("\n\n## References\n\n");
    for c in 0..fixture.claims {
        md.push_str(&format!("[{}] {}\n", c + 1, source_key(system, id, c + 1)));
    }
    md
}

pub fn quality_response(q: (u8, u8, u8, u8, u8)) -> String {
    format!(
        r#"{{"Reason": "scripted", "Comprehensiveness_Score": {}, "Coherence_Score": {}, "Clarity_Score": {}, "Insightfulness_Score": {}, "Overall_Score": {}}}"#,
        q.0, q.1, q.2, q.3, q.4
    )
}

pub fn redundancy_response(score: u8) -> String {
    format!(
        r#"{{"score": {score}, "explanation": "scripted", "repetitions_found": [], "confidence": "90%"}}"#
    )
}

pub fn factuality_response(value: i8) -> String {
    format!(r#"{{"is_factual": {value}, "sentence_support": "scripted support"}}"#)
}

pub fn category_response(name: &str) -> String {
    format!(r#"{{"category": "{name}"}}"#)
}

/// Seed the cache with every source a fixture report cites.
pub fn seed_sources(cache: &SourceCache, system: &str, fixture: &ReportFixture) {
    for c in 0..fixture.claims {
        let key = source_key(system, &fixture.id, c + 1);
        cache
            .put(&resolved_document(&key, &source_body(&key)))
            .expect("cache seed");
    }
}

/// Render the prompts the engine will render for this report and map them
/// to scripted responses.
pub fn script_report(
    system: &str,
    fixture: &ReportFixture,
    query: &QueryRecord,
    templates: &TemplateSet,
    options: &EvalOptions,
    cache: &SourceCache,
) -> Vec<(String, String)> {
    let markdown = report_markdown(system, fixture);
    let report = ReportDocument::parse(&fixture.id, &markdown, &options.segment)
        .expect("fixture report parses");
    let mut pairs = Vec::new();

    // Quality: one whole-report call.
    let (body, _) = truncate_tokens(&report.raw, options.quality_token_budget);
    let quality_prompt = templates
        .quality
        .render(&bindings([
            ("question", query.text.as_str()),
            ("paragraph", body.as_str()),
        ]))
        .expect("quality prompt renders")
        .text;
    pairs.push((quality_prompt, quality_response(fixture.quality)));

    // Redundancy: one call per enumerated pair.
    for pair in enumerate_pairs(
        &report.paragraphs,
        options.pair_cap,
        options.seed,
        &report.id,
    ) {
        let prompt = templates
            .redundancy
            .render(&bindings([
                ("para1", report.paragraphs[pair.first_index].text.as_str()),
                ("para2", report.paragraphs[pair.second_index].text.as_str()),
            ]))
            .expect("redundancy prompt renders")
            .text;
        pairs.push((prompt, redundancy_response(fixture.pair_score)));
    }

    // Factuality: one call per expanded claim-source pair.
    let mut pair_index = 0usize;
    for claim in &report.claims {
        for source_ref in &claim.source_refs {
            let source = cache
                .get(source_ref)
                .unwrap_or_else(|| panic!("source {source_ref} not seeded"));
            let (source_md, _) = truncate_tokens(
                source.markdown.as_deref().unwrap_or(""),
                options.source_token_budget,
            );
            let prompt = templates
                .factuality
                .render(&bindings([
                    ("markdown", source_md.as_str()),
                    ("input", claim.text.as_str()),
                ]))
                .expect("factuality prompt renders")
                .text;
            let value = fixture.claim_values.get(pair_index).copied().unwrap_or(1);
            pairs.push((prompt, factuality_response(value)));
            pair_index += 1;
        }
    }

    pairs
}

pub fn query_for(id: &str) -> QueryRecord {
    QueryRecord {
        id: id.to_string(),
        text: format!("Research question for {id}?"),
        category: CategoryTag::ScienceTechnology,
    }
}

/// Write fixture reports to `<dir>/<id>.md`.
pub fn write_reports(dir: &Path, system: &str, fixtures: &[ReportFixture]) {
    std::fs::create_dir_all(dir).expect("report dir");
    for fixture in fixtures {
        std::fs::write(
            dir.join(format!("{}.md", fixture.id)),
            report_markdown(system, fixture),
        )
        .expect("write report");
    }
}

/// Backend wrapper that counts completions, for invocation accounting.
pub struct CountingBackend {
    inner: MockBackend,
    calls: AtomicU32,
}

impl CountingBackend {
    pub fn new(inner: MockBackend) -> Arc<Self> {
        Arc::new(Self {
            inner,
            calls: AtomicU32::new(0),
        })
    }

    pub fn calls(&self) -> u32 {
        self.calls.load(Ordering::SeqCst)
    }
}

impl JudgeBackend for CountingBackend {
    fn complete(&self, prompt: &str) -> Result<String, BackendError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.inner.complete(prompt)
    }

    fn identifier(&self) -> String {
        self.inner.identifier()
    }
}
