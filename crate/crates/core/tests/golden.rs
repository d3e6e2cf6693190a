//! Golden-file checks: HTML conversion against hand-checked markdown, and
//! report segmentation against hand-counted paragraph structure.

use reporteval_core::segment::{segment_report, ParagraphKind, ReportDocument, SegmentOptions};
use reporteval_core::sources::to_markdown;

fn fixture(path: &str) -> String {
    let base = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    std::fs::read_to_string(base.join(path))
        .unwrap_or_else(|e| panic!("missing fixture {path}: {e}"))
}

#[test]
fn article_page_converts_to_golden_markdown() {
    let html = fixture("html/article.html");
    let expected = fixture("html/article.md");
    let converted = to_markdown(&html);
    assert_eq!(converted, expected.trim_end());
    // Stable under re-conversion.
    assert_eq!(to_markdown(&converted), converted);
    // Boilerplate gone.
    assert!(!converted.contains("analytics"));
    assert!(!converted.contains("Home"));
    assert!(!converted.contains("Copyright"));
}

#[test]
fn nested_list_converts_to_golden_markdown() {
    let html = fixture("html/nested_list.html");
    let expected = fixture("html/nested_list.md");
    let converted = to_markdown(&html);
    assert_eq!(converted, expected.trim_end());
    assert_eq!(to_markdown(&converted), converted);
}

#[test]
fn battery_survey_segments_as_hand_counted() {
    let markdown = fixture("report/battery_survey.md");
    let paragraphs = segment_report(&markdown).unwrap();

    assert_eq!(paragraphs.len(), 4, "hand count says four paragraphs");
    assert_eq!(paragraphs[0].kind, ParagraphKind::HeadingAttached);
    assert!(paragraphs[0].text.starts_with("# Battery Survey"));
    assert_eq!(paragraphs[1].kind, ParagraphKind::HeadingAttached);
    assert!(paragraphs[1].text.starts_with("## Methods"));
    assert_eq!(paragraphs[2].kind, ParagraphKind::HeadingAttached);
    assert!(paragraphs[2].text.contains("| Sintered ceramic |"));
    // The short note merges forward into the conclusion block.
    assert_eq!(paragraphs[3].kind, ParagraphKind::Body);
    assert!(paragraphs[3].text.starts_with("Note: preliminary data."));
    assert!(paragraphs[3].text.contains("conclusion paragraph"));
    // The references section is structural, not a paragraph.
    assert!(!paragraphs.iter().any(|p| p.text.contains("example.org")));

    let doc = ReportDocument::parse("battery", &markdown, &SegmentOptions::default()).unwrap();
    assert_eq!(doc.claims.len(), 1);
    assert_eq!(
        doc.claims[0].source_refs,
        vec!["https://example.org/pilot-study".to_string()]
    );
    assert_eq!(doc.claims[0].paragraph_index, 1);
    // k=4 leaves exactly one eligible interior pair: (1, 2).
    let pairs = reporteval_core::segment::enumerate_pairs(&doc.paragraphs, 30, 0, "battery");
    assert_eq!(pairs.len(), 1);
    assert_eq!((pairs[0].first_index, pairs[0].second_index), (1, 2));
}
