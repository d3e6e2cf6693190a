//! Subcommand implementations: thin argument wiring over the core engines.

use anyhow::{Context, Result};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use reporteval_core::alignment::{
    alignment_report, append_journal, derive_model_ranking, load_journal, AlignmentRecord,
    RankingCase,
};
use reporteval_core::benchmark::{
    classify_query, compare_systems, comparison_jsonl, corpus_stats, evaluate_system, load_run,
    render_comparison, render_stats, stats_jsonl, SystemRun,
};
use reporteval_core::corpus::{
    average_expert_scores, load_human_scores, load_queries, ScoreDimension,
};
use reporteval_core::judge::{
    HttpBackend, Judge, JudgeBackend, MockBackend, TemplateKind, TemplateSet,
};
use reporteval_core::segment::ReportDocument;
use reporteval_core::sources::{SourceCache, SourceStatus, SourceStore};

use crate::config::{usage, usage_msg, FileConfig};
use crate::{AlignArgs, ClassifyArgs, CompareArgs, EvalArgs, FetchArgs, StatsArgs};

fn build_judge(config: &FileConfig, mock: Option<&Path>) -> Result<Judge> {
    let backend: Arc<dyn JudgeBackend> = match mock {
        Some(script) => Arc::new(
            MockBackend::from_script(script)
                .with_context(|| format!("cannot load mock script {}", script.display()))
                .map_err(usage)?,
        ),
        None => Arc::new(
            HttpBackend::new(config.http_backend_config()).map_err(|e| usage_msg(e.to_string()))?,
        ),
    };
    Ok(Judge::new(backend, config.judge_options()))
}

// ── eval ───────────────────────────────────────────────────────────────

pub fn eval(config: &FileConfig, args: EvalArgs) -> Result<()> {
    let queries_path = args
        .queries
        .clone()
        .or_else(|| config.paths.queries.clone())
        .ok_or_else(|| usage_msg("missing --queries (or paths.queries in the config file)"))?;
    let reports_dir = args
        .reports
        .clone()
        .or_else(|| config.paths.reports.clone())
        .ok_or_else(|| usage_msg("missing --reports (or paths.reports in the config file)"))?;
    let queries = load_queries(&queries_path).map_err(|e| usage_msg(e.to_string()))?;

    let mut flag_templates: Vec<(TemplateKind, PathBuf)> = Vec::new();
    for (kind, path) in [
        (TemplateKind::Quality, &args.template_quality),
        (TemplateKind::Redundancy, &args.template_redundancy),
        (TemplateKind::Factuality, &args.template_factuality),
        (TemplateKind::Category, &args.template_category),
    ] {
        if let Some(path) = path {
            flag_templates.push((kind, path.clone()));
        }
    }
    let templates: TemplateSet = config.templates(&flag_templates)?;

    let judge = build_judge(config, args.mock.as_deref())?;

    let mut options = config.eval_options();
    if let Some(seed) = args.seed {
        options.seed = seed;
    }
    if let Some(cap) = args.cap {
        options.pair_cap = cap;
    }
    if args.claim_pair_budget.is_some() {
        options.claim_pair_budget = args.claim_pair_budget;
    }
    options.stop_after = args.stop_after;

    let cache_dir = args
        .cache
        .or_else(|| config.paths.cache.clone())
        .unwrap_or_else(|| PathBuf::from("cache"));
    let store = SourceStore::new(
        SourceCache::open(&cache_dir)?,
        config.fetch_policy(args.offline),
    );

    let runs_base = args
        .runs
        .or_else(|| config.paths.runs.clone())
        .unwrap_or_else(|| PathBuf::from("runs"));
    let model = judge.model_identifier();
    let run_id = args
        .run_id
        .unwrap_or_else(|| format!("r-{}", options.config_hash(&templates, &model)));
    let run_dir = runs_base.join(&args.system).join(&run_id);

    if !reports_dir.is_dir() {
        return Err(usage_msg(format!(
            "report directory {} does not exist",
            reports_dir.display()
        )));
    }

    println!(
        "evaluating system {:?} into {} (seed {}, cap {})",
        args.system,
        run_dir.display(),
        options.seed,
        options.pair_cap
    );
    let run = evaluate_system(
        &args.system,
        &run_id,
        &run_dir,
        &reports_dir,
        &queries,
        &judge,
        &templates,
        &store,
        &options,
    )?;

    if !run.reports.is_empty() {
        let stats = corpus_stats(&run)?;
        std::fs::write(
            run_dir.join("stats.txt"),
            render_stats(&args.system, &stats),
        )?;
        std::fs::write(
            run_dir.join("stats.jsonl"),
            stats_jsonl(&args.system, &stats),
        )?;
        print!("{}", render_stats(&args.system, &stats));
    }

    let quality_done = run.reports.iter().filter(|r| r.quality.is_some()).count();
    let invalid_pairs: usize = run.reports.iter().map(|r| r.redundancy.invalid_count).sum();
    let invalid_claims: usize = run.reports.iter().map(|r| r.factuality.invalid_count).sum();
    let unresolved: usize = run
        .reports
        .iter()
        .map(|r| r.factuality.unresolved_count)
        .sum();
    println!(
        "done: {} reports, quality coverage {}/{}, invalid verdicts {} (pairs) + {} (claims), unresolved sources {}",
        run.reports.len(),
        quality_done,
        run.reports.len(),
        invalid_pairs,
        invalid_claims,
        unresolved
    );
    Ok(())
}

// ── stats / compare ────────────────────────────────────────────────────

pub fn stats(args: StatsArgs) -> Result<()> {
    let run = load_run(&args.run)?;
    let stats = corpus_stats(&run)?;
    if args.json {
        print!("{}", stats_jsonl(&run.manifest.system, &stats));
    } else {
        print!("{}", render_stats(&run.manifest.system, &stats));
    }
    Ok(())
}

pub fn compare(args: CompareArgs) -> Result<()> {
    let runs: Vec<SystemRun> = args
        .runs
        .iter()
        .map(|dir| load_run(dir).with_context(|| format!("loading run {}", dir.display())))
        .collect::<Result<_>>()?;
    let table = compare_systems(&runs)?;
    if args.json {
        print!("{}", comparison_jsonl(&table));
    } else {
        print!("{}", render_comparison(&table));
    }
    Ok(())
}

// ── align ──────────────────────────────────────────────────────────────

pub fn align(args: AlignArgs) -> Result<()> {
    let run = load_run(&args.run)?;
    let human_sets = load_human_scores(&args.human).map_err(|e| usage_msg(e.to_string()))?;

    // (report, dimension) → human mean; duplicates are a data error.
    let mut human: BTreeMap<(String, ScoreDimension), f64> = BTreeMap::new();
    for set in &human_sets {
        let mean = average_expert_scores(set)?;
        let key = (set.report_id.clone(), set.dimension);
        if human.insert(key, mean).is_some() {
            return Err(usage_msg(format!(
                "duplicate human scores for report {:?} dimension {}",
                set.report_id, set.dimension
            )));
        }
    }

    let dimensions: Vec<ScoreDimension> = {
        let mut seen = Vec::new();
        for set in &human_sets {
            if !seen.contains(&set.dimension) {
                seen.push(set.dimension);
            }
        }
        seen
    };

    let mut records = Vec::new();
    for dimension in dimensions {
        let mut rows: Vec<(String, f64, f64)> = Vec::new();
        for report in &run.reports {
            let Some(human_mean) = human.get(&(report.report_id.clone(), dimension)) else {
                continue;
            };
            let model_value = match dimension {
                ScoreDimension::Redundancy => Some(report.redundancy.overall),
                ScoreDimension::Factuality => report.factuality.f1,
                quality_dim => report
                    .quality
                    .as_ref()
                    .and_then(|q| q.dimension_value(quality_dim)),
            };
            if let Some(model_value) = model_value {
                rows.push((report.report_id.clone(), model_value, *human_mean));
            }
        }
        if !rows.is_empty() {
            records.push(AlignmentRecord::new(dimension, rows)?);
        }
    }

    let cases = match &args.rankings {
        None => Vec::new(),
        Some(path) => load_ranking_cases(path, &run)?,
    };

    let journal_records = match &args.journal {
        Some(path) => load_journal(path)?,
        None => Vec::new(),
    };

    let alignment_id = args
        .alignment_id
        .unwrap_or_else(|| run.manifest.run_id.clone());
    let summary = alignment_report(
        &alignment_id,
        &run.manifest.model,
        run.manifest.template_versions.clone(),
        &records,
        &cases,
        &journal_records,
        args.baseline.as_deref(),
    )?;

    if let Some(path) = &args.journal {
        append_journal(path, &summary.record)?;
    }

    if args.json {
        println!("{}", serde_json::to_string(&summary)?);
        return Ok(());
    }

    println!(
        "Alignment for run {} (model {}, {} reports)",
        summary.record.run_id, summary.record.model, summary.record.n_reports
    );
    println!("{:<20} {:>8}  delta vs baseline", "Dimension", "MAD");
    for (dimension, mad) in &summary.record.mads {
        let delta = summary
            .mad_deltas
            .as_ref()
            .and_then(|d| d.get(dimension))
            .map(|d| format!("{d:+.4}"))
            .unwrap_or_default();
        println!("{dimension:<20} {mad:>8.4}  {delta}");
    }
    if let Some(quality_mad) = summary.record.quality_mad {
        println!(
            "{:<20} {quality_mad:>8.4}  (mean of the five quality dimensions)",
            "quality (avg)"
        );
    }
    match summary.record.ranking_agreement {
        Some(rate) => {
            let delta = summary
                .agreement_delta
                .map(|d| format!("  ({d:+.4} vs baseline)"))
                .unwrap_or_default();
            println!(
                "Ranking agreement: {:.2}% over {} cases, {} tie-flagged{}",
                rate * 100.0,
                cases.len(),
                summary.tie_flagged_cases,
                delta
            );
        }
        None => println!("Ranking agreement: no ranking cases supplied"),
    }
    Ok(())
}

/// Ranking file: `query_id<TAB>report_id,report_id,...` (human order, best
/// first). Model rankings come from the run's quality/redundancy scores.
fn load_ranking_cases(path: &Path, run: &SystemRun) -> Result<Vec<RankingCase>> {
    let raw = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read rankings {}", path.display()))
        .map_err(usage)?;
    let by_id: BTreeMap<&str, &reporteval_core::benchmark::ReportRecord> = run
        .reports
        .iter()
        .map(|r| (r.report_id.as_str(), r))
        .collect();

    let mut cases = Vec::new();
    for (idx, line) in raw.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (query_id, ids) = line.split_once('\t').ok_or_else(|| {
            usage_msg(format!(
                "rankings line {}: expected query_id<TAB>id,id,...",
                idx + 1
            ))
        })?;
        let human_ranking: Vec<String> = ids.split(',').map(|s| s.trim().to_string()).collect();

        let mut entries = Vec::new();
        for report_id in &human_ranking {
            let record = by_id.get(report_id.as_str()).ok_or_else(|| {
                usage_msg(format!(
                    "rankings line {}: report {report_id:?} is not in the run",
                    idx + 1
                ))
            })?;
            let overall = record
                .quality
                .as_ref()
                .map(|q| q.overall as f64)
                .ok_or_else(|| {
                    anyhow::anyhow!("report {report_id:?} has no quality verdict to rank by")
                })?;
            entries.push((report_id.clone(), overall, record.redundancy.overall));
        }
        let (model_ranking, tie_flagged) = derive_model_ranking(&entries);
        cases.push(RankingCase {
            query_id: query_id.trim().to_string(),
            human_ranking,
            model_ranking,
            tie_flagged,
        });
    }
    Ok(cases)
}

// ── classify ───────────────────────────────────────────────────────────

pub fn classify(config: &FileConfig, args: ClassifyArgs) -> Result<()> {
    let queries = load_queries(&args.queries).map_err(|e| usage_msg(e.to_string()))?;
    let flag_templates: Vec<(TemplateKind, PathBuf)> = args
        .template_category
        .as_ref()
        .map(|p| vec![(TemplateKind::Category, p.clone())])
        .unwrap_or_default();
    let templates = config.templates(&flag_templates)?;
    let judge = build_judge(config, args.mock.as_deref())?;

    let mut matches = 0usize;
    for query in &queries {
        let predicted = classify_query(query, &judge, &templates)?;
        let agree = predicted == query.category;
        if agree {
            matches += 1;
        }
        if args.json {
            println!(
                "{}",
                serde_json::json!({
                    "id": query.id,
                    "predicted": predicted.name(),
                    "tagged": query.category.name(),
                    "match": agree,
                })
            );
        } else {
            println!(
                "{}\t{}\t{}\t{}",
                query.id,
                predicted.name(),
                query.category.name(),
                if agree { "match" } else { "MISMATCH" }
            );
        }
    }
    if !args.json {
        println!(
            "agreement with tags: {}/{} ({:.1}%)",
            matches,
            queries.len(),
            100.0 * matches as f64 / queries.len() as f64
        );
    }
    Ok(())
}

// ── fetch ──────────────────────────────────────────────────────────────

pub fn fetch(config: &FileConfig, args: FetchArgs) -> Result<()> {
    if args.reports.is_none() && args.urls.is_empty() {
        return Err(usage_msg("fetch needs --reports and/or at least one --url"));
    }
    let store = SourceStore::new(SourceCache::open(&args.cache)?, config.fetch_policy(false));

    let mut refs: Vec<String> = args.urls.clone();
    if let Some(reports_dir) = &args.reports {
        for entry in std::fs::read_dir(reports_dir)
            .with_context(|| format!("cannot read {}", reports_dir.display()))
            .map_err(usage)?
        {
            let path = entry?.path();
            if path.extension().map(|e| e == "md") != Some(true) {
                continue;
            }
            let id = path
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or_default()
                .to_string();
            let raw = std::fs::read_to_string(&path)?;
            let doc = ReportDocument::parse(&id, &raw, &config.eval_options().segment)?;
            for claim in &doc.claims {
                for source_ref in &claim.source_refs {
                    if !refs.contains(source_ref) {
                        refs.push(source_ref.clone());
                    }
                }
            }
        }
    }

    let mut counts: BTreeMap<&'static str, usize> = BTreeMap::new();
    for source_ref in &refs {
        let doc = store.fetch_source(source_ref)?;
        let status = match doc.status {
            SourceStatus::Resolved => "resolved",
            SourceStatus::Unreachable => "unreachable",
            SourceStatus::NonHtml => "non-html",
        };
        *counts.entry(status).or_default() += 1;
        println!("{status}\t{source_ref}");
    }
    let summary: Vec<String> = counts.iter().map(|(k, v)| format!("{k}={v}")).collect();
    println!("cached {} references ({})", refs.len(), summary.join(", "));
    Ok(())
}
