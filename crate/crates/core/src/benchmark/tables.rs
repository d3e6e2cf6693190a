//! Table rendering: per-system statistics and cross-system comparisons, in
//! a fixed-width human form and a line-delimited JSON machine form. Both
//! are deterministic functions of their inputs.

use super::{ComparisonTable, StatsSummary};

/// Human-readable statistics block (mean ± sample std per statistic).
pub fn render_stats(system: &str, stats: &StatsSummary) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "Statistics for {} ({} reports)\n",
        system, stats.n
    ));
    let rows = [
        ("Report Length", &stats.token_length),
        ("Paragraph Pair Count", &stats.pair_count),
        ("Claim-Source Pair Count", &stats.claim_source_pairs),
    ];
    for (label, cell) in rows {
        out.push_str(&format!(
            "{label:<26} {:>10.1} \u{b1} {:>8.1}{}\n",
            cell.mean,
            cell.std,
            if cell.single_sample {
                "  [single sample]"
            } else {
                ""
            },
        ));
    }
    out
}

/// Machine-readable statistics: one JSON record per row.
pub fn stats_jsonl(system: &str, stats: &StatsSummary) -> String {
    let mut out = String::new();
    let rows = [
        ("report_length", &stats.token_length),
        ("paragraph_pair_count", &stats.pair_count),
        ("claim_source_pair_count", &stats.claim_source_pairs),
    ];
    for (key, cell) in rows {
        let record = serde_json::json!({
            "system": system,
            "row": key,
            "mean": cell.mean,
            "std": cell.std,
            "n": stats.n,
            "single_sample": cell.single_sample,
        });
        out.push_str(&record.to_string());
        out.push('\n');
    }
    out
}

/// Human-readable comparison table. The best value per row is wrapped in
/// `**`, the second-best in `_`; ties mark every tied system and flag the
/// row.
pub fn render_comparison(table: &ComparisonTable) -> String {
    let mut out = String::new();
    let label_width = 24usize;
    let col_width = table
        .systems
        .iter()
        .map(|s| s.len() + 6)
        .max()
        .unwrap_or(12)
        .max(12);

    out.push_str(&format!("{:<12}{:<label_width$}", "", "Metric"));
    for system in &table.systems {
        out.push_str(&format!("{system:>col_width$}"));
    }
    out.push('\n');

    let mut previous_section = String::new();
    let mut any_tie = false;
    for row in &table.rows {
        let section = if row.section == previous_section {
            String::new()
        } else {
            previous_section = row.section.clone();
            row.section.clone()
        };
        out.push_str(&format!("{section:<12}{:<label_width$}", row.label));
        for (idx, value) in row.values.iter().enumerate() {
            let cell = match value {
                None => "-".to_string(),
                Some(v) => {
                    let plain = format!("{v:.2}");
                    if row.best.contains(&idx) {
                        format!("**{plain}**")
                    } else if row.second.contains(&idx) {
                        format!("_{plain}_")
                    } else {
                        plain
                    }
                }
            };
            out.push_str(&format!("{cell:>col_width$}"));
        }
        if row.tie {
            any_tie = true;
            out.push_str("  [tie]");
        }
        out.push('\n');
    }

    out.push_str("\n** best, _ second-best; higher is better on every row.\n");
    if any_tie {
        out.push_str("[tie] rows mark every tied system as best.\n");
    }
    if table.vacuous_redundancy.iter().any(|n| *n > 0) {
        out.push_str("Vacuous redundancy (reports with no eligible pairs): ");
        let cells: Vec<String> = table
            .systems
            .iter()
            .zip(&table.vacuous_redundancy)
            .map(|(s, n)| format!("{s}={n}"))
            .collect();
        out.push_str(&cells.join(", "));
        out.push('\n');
    }
    let coverage: Vec<String> = table
        .systems
        .iter()
        .zip(&table.quality_coverage)
        .map(|(s, (done, total))| format!("{s}={done}/{total}"))
        .collect();
    out.push_str(&format!("Quality coverage: {}\n", coverage.join(", ")));
    out
}

/// Machine-readable comparison: one JSON record per (row, system) cell.
pub fn comparison_jsonl(table: &ComparisonTable) -> String {
    let mut out = String::new();
    for row in &table.rows {
        for (idx, system) in table.systems.iter().enumerate() {
            let record = serde_json::json!({
                "section": row.section,
                "metric": row.label,
                "system": system,
                "value": row.values[idx],
                "best": row.best.contains(&idx),
                "second": row.second.contains(&idx),
                "tie": row.tie,
            });
            out.push_str(&record.to_string());
            out.push('\n');
        }
    }
    out
}
