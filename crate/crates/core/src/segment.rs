//! Markdown report parsing: paragraph segmentation, pair enumeration under
//! the 30-pair cap, claim extraction with citation resolution, and token
//! counting.
//!
//! Segmentation rules (declared, deterministic):
//! - blocks split on blank lines; fenced code and markdown tables stay whole
//! - headings attach to the block that follows them; a heading with nothing
//!   after it is dropped
//! - blocks under the minimum token threshold merge forward into the next
//!   block (a short final block stays as its own paragraph)
//! - a trailing section titled "References" or "Sources" is structural: it
//!   feeds citation resolution and is excluded from the paragraph stream

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::sync::LazyLock;
use thiserror::Error;

use crate::util::short_hash;

/// Paragraph classification after segmentation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParagraphKind {
    Body,
    HeadingAttached,
    Table,
}

/// One paragraph-level unit of a report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Paragraph {
    pub index: usize,
    pub text: String,
    pub kind: ParagraphKind,
}

/// An unordered pair of paragraph indices eligible for redundancy judging.
/// Never includes the first or last paragraph of the report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ParagraphPair {
    pub first_index: usize,
    pub second_index: usize,
}

/// A cited sentence with its resolved citation targets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Claim {
    pub text: String,
    pub source_refs: Vec<String>,
    pub paragraph_index: usize,
}

/// A citation marker that could not be resolved to a target.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnresolvedRef {
    pub paragraph_index: usize,
    pub marker: String,
    pub sentence: String,
}

/// Claims plus the per-claim resolution failures encountered on the way.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClaimExtraction {
    pub claims: Vec<Claim>,
    pub unresolved: Vec<UnresolvedRef>,
}

/// A fully parsed report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub id: String,
    pub raw: String,
    pub paragraphs: Vec<Paragraph>,
    pub claims: Vec<Claim>,
    pub unresolved_refs: Vec<UnresolvedRef>,
    pub token_count: usize,
}

#[derive(Debug, Clone)]
pub struct SegmentOptions {
    /// Blocks shorter than this many tokens merge forward into the next
    /// block. Pairwise judgments on one-line fragments are noise.
    pub min_tokens: usize,
}

impl Default for SegmentOptions {
    fn default() -> Self {
        Self { min_tokens: 30 }
    }
}

#[derive(Debug, Error)]
pub enum SegmentError {
    #[error("empty report")]
    EmptyReport,
}

impl ReportDocument {
    /// Parse a markdown report: segment, extract claims, count tokens.
    pub fn parse(
        id: impl Into<String>,
        markdown: &str,
        options: &SegmentOptions,
    ) -> Result<ReportDocument, SegmentError> {
        let id = id.into();
        let paragraphs = segment_report_with(markdown, options)?;
        let extraction = extract_claims_from(markdown, &paragraphs);
        Ok(ReportDocument {
            id,
            raw: markdown.to_string(),
            token_count: count_tokens(markdown),
            paragraphs,
            claims: extraction.claims,
            unresolved_refs: extraction.unresolved,
        })
    }

    /// Total claim–source pairs after expanding multi-source claims.
    pub fn claim_source_pair_count(&self) -> usize {
        self.claims.iter().map(|c| c.source_refs.len()).sum()
    }
}

// ── Token counting ─────────────────────────────────────────────────────

fn is_token_punct(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(
            c,
            '—' | '–'
                | '…'
                | '“'
                | '”'
                | '‘'
                | '’'
                | '«'
                | '»'
                | '。'
                | '，'
                | '；'
                | '：'
                | '？'
                | '！'
                | '、'
        )
}

/// Tokens in one whitespace-separated chunk: a leading punctuation run and a
/// trailing punctuation run each count as one token beside the core.
pub(crate) fn chunk_token_count(chunk: &str) -> usize {
    let chars: Vec<char> = chunk.chars().collect();
    if chars.is_empty() {
        return 0;
    }
    let lead = chars.iter().take_while(|c| is_token_punct(**c)).count();
    if lead == chars.len() {
        return 1; // chunk is a single punctuation run
    }
    let trail = chars
        .iter()
        .rev()
        .take_while(|c| is_token_punct(**c))
        .count();
    1 + usize::from(lead > 0) + usize::from(trail > 0)
}

/// Approximate token count: split on whitespace, then split off leading and
/// trailing punctuation runs as separate tokens. Comparative statistic, not
/// a model vocabulary.
pub fn count_tokens(text: &str) -> usize {
    text.split_whitespace().map(chunk_token_count).sum()
}

// ── Segmentation ───────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BlockKind {
    Text,
    Heading,
    Table,
    Code,
}

#[derive(Debug, Clone)]
struct RawBlock {
    lines: Vec<String>,
    kind: BlockKind,
}

impl RawBlock {
    fn text(&self) -> String {
        self.lines.join("\n")
    }
}

fn is_heading_line(line: &str) -> bool {
    let trimmed = line.trim_start();
    let hashes = trimmed.chars().take_while(|c| *c == '#').count();
    (1..=6).contains(&hashes) && trimmed[hashes..].starts_with([' ', '\t'])
}

fn heading_title(line: &str) -> String {
    line.trim_start()
        .trim_start_matches('#')
        .trim()
        .trim_end_matches(':')
        .trim()
        .to_lowercase()
}

fn is_table_line(line: &str) -> bool {
    line.trim_start().starts_with('|')
}

fn is_fence_line(line: &str) -> bool {
    let trimmed = line.trim_start();
    trimmed.starts_with("```") || trimmed.starts_with("~~~")
}

/// Group raw lines into blocks: headings one per block, tables and fenced
/// code kept whole, text split on blank lines.
fn scan_blocks(markdown: &str) -> Vec<RawBlock> {
    let normalized = markdown.replace("\r\n", "\n");
    let mut blocks: Vec<RawBlock> = Vec::new();
    let mut current: Option<RawBlock> = None;
    let mut in_fence = false;

    for line in normalized.lines() {
        if in_fence {
            if let Some(block) = current.as_mut() {
                block.lines.push(line.to_string());
            }
            if is_fence_line(line) {
                in_fence = false;
                blocks.extend(current.take());
            }
            continue;
        }
        if is_fence_line(line) {
            blocks.extend(current.take());
            current = Some(RawBlock {
                lines: vec![line.to_string()],
                kind: BlockKind::Code,
            });
            in_fence = true;
            continue;
        }
        if line.trim().is_empty() {
            blocks.extend(current.take());
            continue;
        }
        if is_heading_line(line) {
            blocks.extend(current.take());
            blocks.push(RawBlock {
                lines: vec![line.to_string()],
                kind: BlockKind::Heading,
            });
            continue;
        }
        let kind = if is_table_line(line) {
            BlockKind::Table
        } else {
            BlockKind::Text
        };
        match current.as_mut() {
            Some(block) if block.kind == kind => block.lines.push(line.to_string()),
            _ => {
                blocks.extend(current.take());
                current = Some(RawBlock {
                    lines: vec![line.to_string()],
                    kind,
                });
            }
        }
    }
    blocks.extend(current.take());
    blocks
}

fn is_reference_heading(block: &RawBlock) -> bool {
    block.kind == BlockKind::Heading
        && matches!(
            heading_title(&block.lines[0]).as_str(),
            "references" | "sources"
        )
}

/// Split blocks into body blocks and the trailing reference-section lines.
/// The reference section starts at the last References/Sources heading,
/// provided no other heading follows it.
fn split_references(blocks: Vec<RawBlock>) -> (Vec<RawBlock>, Vec<String>) {
    let ref_start = blocks.iter().rposition(is_reference_heading);
    if let Some(start) = ref_start {
        let trailing = blocks[start + 1..]
            .iter()
            .all(|b| b.kind != BlockKind::Heading);
        if trailing {
            let mut body = blocks;
            let tail = body.split_off(start);
            let ref_lines = tail.into_iter().skip(1).flat_map(|b| b.lines).collect();
            return (body, ref_lines);
        }
    }
    (blocks, Vec::new())
}

/// Segment a report into paragraphs with the default options.
pub fn segment_report(markdown: &str) -> Result<Vec<Paragraph>, SegmentError> {
    segment_report_with(markdown, &SegmentOptions::default())
}

pub fn segment_report_with(
    markdown: &str,
    options: &SegmentOptions,
) -> Result<Vec<Paragraph>, SegmentError> {
    if markdown.trim().is_empty() {
        return Err(SegmentError::EmptyReport);
    }
    let (body, _refs) = split_references(scan_blocks(markdown));
    Ok(assemble_paragraphs(body, options))
}

fn assemble_paragraphs(blocks: Vec<RawBlock>, options: &SegmentOptions) -> Vec<Paragraph> {
    // Attach headings to the block that follows; drop a trailing heading run.
    let mut attached: Vec<(String, ParagraphKind)> = Vec::new();
    let mut pending_headings: Vec<String> = Vec::new();
    for block in blocks {
        match block.kind {
            BlockKind::Heading => pending_headings.push(block.text()),
            _ => {
                let kind = if !pending_headings.is_empty() {
                    ParagraphKind::HeadingAttached
                } else if block.kind == BlockKind::Table {
                    ParagraphKind::Table
                } else {
                    ParagraphKind::Body
                };
                let mut text = pending_headings.join("\n");
                pending_headings.clear();
                if !text.is_empty() {
                    text.push('\n');
                }
                text.push_str(&block.text());
                attached.push((text, kind));
            }
        }
    }

    // Merge sub-threshold blocks forward.
    let mut merged: Vec<(String, ParagraphKind)> = Vec::new();
    let mut carry: Option<(String, ParagraphKind)> = None;
    for (text, kind) in attached {
        let (text, kind) = match carry.take() {
            Some((prev_text, prev_kind)) => {
                let combined_kind = if prev_kind == ParagraphKind::HeadingAttached
                    || kind == ParagraphKind::HeadingAttached
                {
                    ParagraphKind::HeadingAttached
                } else if prev_kind == ParagraphKind::Table || kind == ParagraphKind::Table {
                    ParagraphKind::Table
                } else {
                    ParagraphKind::Body
                };
                (format!("{prev_text}\n{text}"), combined_kind)
            }
            None => (text, kind),
        };
        if count_tokens(&text) < options.min_tokens {
            carry = Some((text, kind));
        } else {
            merged.push((text, kind));
        }
    }
    if let Some(last) = carry {
        // Nothing left to merge into: a short final block stands alone.
        merged.push(last);
    }

    merged
        .into_iter()
        .filter(|(text, _)| !text.trim().is_empty())
        .enumerate()
        .map(|(index, (text, kind))| Paragraph { index, text, kind })
        .collect()
}

// ── Pair enumeration ───────────────────────────────────────────────────

/// Deterministic RNG for pair sampling, keyed on (global seed, report id).
fn pair_rng(seed: u64, report_id: &str) -> ChaCha8Rng {
    let key = crate::util::sha256_hex(format!("{seed}:{report_id}").as_bytes());
    let mut state = [0u8; 32];
    for (i, byte) in state.iter_mut().enumerate() {
        *byte = u8::from_str_radix(&key[2 * i..2 * i + 2], 16).unwrap_or(0);
    }
    ChaCha8Rng::from_seed(state)
}

/// Enumerate unordered paragraph pairs over the eligible interior
/// paragraphs (the first and last are excluded). If more than `cap`
/// candidates exist, a uniform sample of size `cap` is drawn with a
/// generator seeded by `(seed, report_id)`. Output is sorted by
/// `(first_index, second_index)`.
pub fn enumerate_pairs(
    paragraphs: &[Paragraph],
    cap: usize,
    seed: u64,
    report_id: &str,
) -> Vec<ParagraphPair> {
    enumerate_pairs_for_count(paragraphs.len(), cap, seed, report_id)
}

/// Same as [`enumerate_pairs`] for a paragraph count alone.
pub fn enumerate_pairs_for_count(
    paragraph_count: usize,
    cap: usize,
    seed: u64,
    report_id: &str,
) -> Vec<ParagraphPair> {
    if paragraph_count < 4 {
        // Fewer than two eligible interior paragraphs.
        return Vec::new();
    }
    let eligible = 1..paragraph_count - 1;
    let mut candidates = Vec::new();
    for first_index in eligible.clone() {
        for second_index in first_index + 1..paragraph_count - 1 {
            candidates.push(ParagraphPair {
                first_index,
                second_index,
            });
        }
    }
    if candidates.len() <= cap {
        return candidates;
    }
    let mut rng = pair_rng(seed, report_id);
    let mut picked: Vec<ParagraphPair> = rand::seq::index::sample(&mut rng, candidates.len(), cap)
        .into_iter()
        .map(|i| candidates[i])
        .collect();
    picked.sort();
    picked
}

// ── Claim extraction ───────────────────────────────────────────────────

static INLINE_LINK: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(!?)\[([^\]]*)\]\(([^)\s]+)(?:\s+[^)]*)?\)").unwrap());
static FOOTNOTE_REF: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\[\^([A-Za-z0-9_-]+)\]").unwrap());
static NUMERIC_REF: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\[(\d+(?:\s*,\s*\d+)*)\]").unwrap());
static REFERENCE_LINE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^\s*\[(\d+)\]:?\s*(.+)$").unwrap());
static FOOTNOTE_DEF: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^\s*\[\^([A-Za-z0-9_-]+)\]:\s*(.+)$").unwrap());
static URL_IN_TEXT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"https?://[^\s)>\]]+").unwrap());

/// Resolution tables built from the report's reference section and footnote
/// definitions.
#[derive(Debug, Default)]
struct ReferenceTable {
    numeric: HashMap<String, String>,
    footnotes: HashMap<String, String>,
}

fn reference_target(entry: &str) -> Option<String> {
    if let Some(m) = URL_IN_TEXT.find(entry) {
        return Some(m.as_str().trim_end_matches(['.', ',']).to_string());
    }
    // Inline-link style entry: [1] [Title](url)
    if let Some(caps) = INLINE_LINK.captures(entry) {
        if &caps[1] != "!" {
            return Some(caps[3].to_string());
        }
    }
    let label = entry.trim();
    (!label.is_empty()).then(|| label.to_string())
}

fn build_reference_table(markdown: &str) -> ReferenceTable {
    let normalized = markdown.replace("\r\n", "\n");
    let (_, ref_lines) = split_references(scan_blocks(&normalized));
    let mut table = ReferenceTable::default();
    for line in &ref_lines {
        if let Some(caps) = REFERENCE_LINE.captures(line) {
            if let Some(target) = reference_target(&caps[2]) {
                table.numeric.entry(caps[1].to_string()).or_insert(target);
            }
        }
    }
    for line in normalized.lines() {
        if let Some(caps) = FOOTNOTE_DEF.captures(line) {
            if let Some(target) = reference_target(&caps[2]) {
                table.footnotes.entry(caps[1].to_string()).or_insert(target);
            }
        }
    }
    table
}

/// Split paragraph text into sentences on terminal punctuation outside
/// brackets and quotes. A terminal mark between digits (e.g. "3.5") does
/// not end a sentence.
fn split_sentences(text: &str) -> Vec<String> {
    let chars: Vec<char> = text.chars().collect();
    let mut sentences = Vec::new();
    let mut start = 0usize;
    let mut depth = 0i32;
    let mut in_quote = false;
    let mut i = 0usize;
    while i < chars.len() {
        let c = chars[i];
        match c {
            '(' | '[' | '{' => depth += 1,
            ')' | ']' | '}' => depth = (depth - 1).max(0),
            '"' | '“' | '”' => in_quote = !in_quote,
            '.' | '!' | '?' | '…' => {
                let digit_context = c == '.'
                    && i > 0
                    && i + 1 < chars.len()
                    && chars[i - 1].is_ascii_digit()
                    && chars[i + 1].is_ascii_digit();
                // "![" opens a markdown image, not a sentence end.
                let image_marker = c == '!' && chars.get(i + 1) == Some(&'[');
                if depth == 0 && !in_quote && !digit_context && !image_marker {
                    // Consume a run of terminal marks plus closing quotes.
                    let mut end = i + 1;
                    while end < chars.len()
                        && matches!(chars[end], '.' | '!' | '?' | '…' | '"' | '”' | '’' | '\'')
                    {
                        end += 1;
                    }
                    let sentence: String = chars[start..end].iter().collect();
                    let sentence = sentence.trim();
                    if !sentence.is_empty() {
                        sentences.push(sentence.to_string());
                    }
                    start = end;
                    i = end;
                    continue;
                }
            }
            _ => {}
        }
        i += 1;
    }
    let tail: String = chars[start..].iter().collect();
    let tail = tail.trim();
    if !tail.is_empty() {
        sentences.push(tail.to_string());
    }
    sentences
}

fn push_unique(refs: &mut Vec<String>, target: String) {
    if !refs.contains(&target) {
        refs.push(target);
    }
}

fn mask_span(masked: &mut String, range: std::ops::Range<usize>) {
    let width = range.len();
    masked.replace_range(range, &" ".repeat(width));
}

/// Citation markers found in one sentence, resolved where possible.
fn sentence_refs(
    sentence: &str,
    table: &ReferenceTable,
) -> (Vec<String>, Vec<String /* unresolved marker */>) {
    let mut refs: Vec<String> = Vec::new();
    let mut unresolved: Vec<String> = Vec::new();

    // Inline links first; blank out their spans so the bracket scans below
    // do not re-match the link text. Image links are not citations.
    let mut masked = sentence.to_string();
    let links: Vec<(std::ops::Range<usize>, bool, String)> = INLINE_LINK
        .captures_iter(sentence)
        .map(|caps| {
            (
                caps.get(0).unwrap().range(),
                &caps[1] == "!",
                caps[3].to_string(),
            )
        })
        .collect();
    for (range, is_image, target) in links {
        if !is_image {
            push_unique(&mut refs, target);
        }
        mask_span(&mut masked, range);
    }

    let snapshot = masked.clone();
    for caps in FOOTNOTE_REF.captures_iter(&snapshot) {
        let label = &caps[1];
        match table.footnotes.get(label) {
            Some(target) => push_unique(&mut refs, target.clone()),
            None => unresolved.push(format!("[^{label}]")),
        }
        mask_span(&mut masked, caps.get(0).unwrap().range());
    }

    for caps in NUMERIC_REF.captures_iter(&masked) {
        for number in caps[1].split(',') {
            let number = number.trim();
            match table.numeric.get(number) {
                Some(target) => push_unique(&mut refs, target.clone()),
                None => unresolved.push(format!("[{number}]")),
            }
        }
    }

    (refs, unresolved)
}

/// Extract claims from a markdown report. A claim is any sentence carrying
/// at least one recognized citation marker; a sentence citing several
/// sources yields one claim with several `source_refs`.
pub fn extract_claims(markdown: &str) -> ClaimExtraction {
    match segment_report(markdown) {
        Ok(paragraphs) => extract_claims_from(markdown, &paragraphs),
        Err(_) => ClaimExtraction::default(),
    }
}

/// Drop footnote-definition and reference-entry lines from body text so
/// citation targets never scan as claims of their own.
fn strip_definition_lines(text: &str) -> String {
    text.lines()
        .filter(|line| !FOOTNOTE_DEF.is_match(line) && !REFERENCE_LINE.is_match(line))
        .collect::<Vec<_>>()
        .join("\n")
}

fn extract_claims_from(markdown: &str, paragraphs: &[Paragraph]) -> ClaimExtraction {
    let table = build_reference_table(markdown);
    let mut extraction = ClaimExtraction::default();
    for paragraph in paragraphs {
        for sentence in split_sentences(&strip_definition_lines(&paragraph.text)) {
            let (refs, unresolved) = sentence_refs(&sentence, &table);
            for marker in unresolved {
                extraction.unresolved.push(UnresolvedRef {
                    paragraph_index: paragraph.index,
                    marker,
                    sentence: sentence.clone(),
                });
            }
            if !refs.is_empty() {
                extraction.claims.push(Claim {
                    text: sentence,
                    source_refs: refs,
                    paragraph_index: paragraph.index,
                });
            }
        }
    }
    extraction
}

/// Stable identifier for a claim sentence, used to key persisted verdicts.
pub fn claim_hash(claim_text: &str) -> String {
    short_hash(claim_text)
}
