//! End-to-end tests driving the `reporteval` binary: offline mock runs,
//! exit codes, and the table-producing subcommands.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use reporteval_core::corpus::{format_queries, CategoryTag, QueryRecord};
use reporteval_core::judge::{bindings, write_mock_script, TemplateSet};
use reporteval_core::segment::ReportDocument;
use reporteval_core::util::truncate_tokens;

fn binary() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_reporteval"));
    for (key, _) in std::env::vars() {
        if key.starts_with("REPORTEVAL_") {
            cmd.env_remove(key);
        }
    }
    cmd.env_remove("OPENAI_API_KEY");
    cmd
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).to_string()
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).to_string()
}

fn filler(tag: &str, words: usize) -> String {
    (0..words)
        .map(|i| format!("{tag}w{i}"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// A citation-free three-paragraph report: quality judging only.
fn report_markdown(system: &str, id: &str) -> String {
    format!(
        "Overview for {system} {id}. {}\n\nDetails for {system} {id}. {}\n\nClosing for {system} {id}. {}\n",
        filler(&format!("{system}{id}a"), 34),
        filler(&format!("{system}{id}b"), 34),
        filler(&format!("{system}{id}c"), 34),
    )
}

struct Fixture {
    dir: tempfile::TempDir,
    queries_path: PathBuf,
    queries: Vec<QueryRecord>,
}

impl Fixture {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let queries: Vec<QueryRecord> = (1..=2)
            .map(|i| QueryRecord {
                id: format!("q-{i:02}"),
                text: format!("Benchmark question number {i}?"),
                category: CategoryTag::ScienceTechnology,
            })
            .collect();
        let queries_path = dir.path().join("queries.tsv");
        std::fs::write(&queries_path, format_queries(&queries)).unwrap();
        Self {
            dir,
            queries_path,
            queries,
        }
    }

    fn path(&self) -> &Path {
        self.dir.path()
    }

    /// Write reports plus a mock script answering their quality prompts
    /// with the given overall scores. Returns (reports_dir, script_path).
    fn system(&self, system: &str, overall: &[u8]) -> (PathBuf, PathBuf) {
        let templates = TemplateSet::default();
        let reports_dir = self.path().join(format!("reports-{system}"));
        std::fs::create_dir_all(&reports_dir).unwrap();
        let mut pairs = Vec::new();
        for (query, score) in self.queries.iter().zip(overall) {
            let markdown = report_markdown(system, &query.id);
            std::fs::write(reports_dir.join(format!("{}.md", query.id)), &markdown).unwrap();
            let report = ReportDocument::parse(&query.id, &markdown, &Default::default()).unwrap();
            let (body, _) = truncate_tokens(&report.raw, 32_000);
            let prompt = templates
                .quality
                .render(&bindings([
                    ("question", query.text.as_str()),
                    ("paragraph", body.as_str()),
                ]))
                .unwrap()
                .text;
            let response = format!(
                r#"{{"Reason": "ok", "Comprehensiveness_Score": 3, "Coherence_Score": 3, "Clarity_Score": 3, "Insightfulness_Score": 2, "Overall_Score": {score}}}"#
            );
            pairs.push((prompt, response));
        }
        let script_dir = self.path().join(format!("mock-{system}"));
        let script = write_mock_script(&script_dir, &pairs).unwrap();
        (reports_dir, script)
    }

    fn eval(&self, system: &str, reports: &Path, script: &Path) -> Output {
        run(binary()
            .current_dir(self.path())
            .args(["eval", "--system", system])
            .arg("--reports")
            .arg(reports)
            .arg("--queries")
            .arg(&self.queries_path)
            .arg("--mock")
            .arg(script)
            .args(["--run-id", "r1", "--offline"])
            .arg("--runs")
            .arg(self.path().join("runs"))
            .arg("--cache")
            .arg(self.path().join("cache")))
    }
}

#[test]
fn eval_with_mock_completes_offline() {
    let fixture = Fixture::new();
    let (reports, script) = fixture.system("demo", &[4, 3]);
    let output = fixture.eval("demo", &reports, &script);
    assert!(output.status.success(), "eval failed: {}", stderr(&output));
    let out = stdout(&output);
    assert!(
        out.contains("quality coverage 2/2"),
        "unexpected output: {out}"
    );

    let run_dir = fixture.path().join("runs/demo/r1");
    assert!(run_dir.join("manifest.json").exists());
    assert!(run_dir.join("reports/q-01.json").exists());
    assert!(run_dir.join("stats.txt").exists());
    assert!(run_dir.join("stats.jsonl").exists());
}

#[test]
fn missing_queries_is_usage_error_exit_2() {
    let fixture = Fixture::new();
    let output = run(binary()
        .current_dir(fixture.path())
        .args(["eval", "--system", "demo"])
        .arg("--reports")
        .arg(fixture.path()));
    assert_eq!(output.status.code(), Some(2), "stderr: {}", stderr(&output));
    assert!(stderr(&output).contains("--queries"));
}

#[test]
fn online_run_without_api_key_names_the_variable() {
    let fixture = Fixture::new();
    let (reports, _script) = fixture.system("demo", &[4, 3]);
    let output = run(binary()
        .current_dir(fixture.path())
        .args(["eval", "--system", "demo"])
        .arg("--reports")
        .arg(&reports)
        .arg("--queries")
        .arg(&fixture.queries_path));
    assert_eq!(output.status.code(), Some(2), "stderr: {}", stderr(&output));
    assert!(
        stderr(&output).contains("OPENAI_API_KEY"),
        "stderr should name the key variable: {}",
        stderr(&output)
    );
}

#[test]
fn stats_compare_and_align_read_back_runs() {
    let fixture = Fixture::new();
    let (reports_a, script_a) = fixture.system("alpha", &[4, 3]);
    let (reports_b, script_b) = fixture.system("beta", &[2, 3]);
    assert!(fixture
        .eval("alpha", &reports_a, &script_a)
        .status
        .success());
    assert!(fixture.eval("beta", &reports_b, &script_b).status.success());

    let alpha_run = fixture.path().join("runs/alpha/r1");
    let beta_run = fixture.path().join("runs/beta/r1");

    // stats
    let output = run(binary()
        .current_dir(fixture.path())
        .args(["stats", "--run"])
        .arg(&alpha_run));
    assert!(output.status.success(), "{}", stderr(&output));
    let table = stdout(&output);
    assert!(table.contains("Report Length"));
    assert!(table.contains("Paragraph Pair Count"));

    // stats --json
    let output = run(binary()
        .current_dir(fixture.path())
        .args(["stats", "--json", "--run"])
        .arg(&alpha_run));
    assert!(output.status.success());
    let first_line = stdout(&output).lines().next().unwrap().to_string();
    let parsed: serde_json::Value = serde_json::from_str(&first_line).unwrap();
    assert_eq!(parsed["row"], "report_length");

    // compare
    let output = run(binary()
        .current_dir(fixture.path())
        .args(["compare", "--runs"])
        .arg(&alpha_run)
        .arg(&beta_run));
    assert!(output.status.success(), "{}", stderr(&output));
    let table = stdout(&output);
    assert!(table.contains("Overall Quality"));
    assert!(table.contains("alpha") && table.contains("beta"));
    assert!(
        table.contains("**3.50**"),
        "alpha should be best overall: {table}"
    );

    // align: humans agree exactly with the model overall scores.
    let human_csv = "report_id,dimension,expert1,expert2,expert3\n\
                     q-01,overall,4,4,4\n\
                     q-02,overall,3,3,3\n\
                     q-01,redundancy,4,4,4\n\
                     q-02,redundancy,4,4,4\n";
    let human_path = fixture.path().join("human.csv");
    std::fs::write(&human_path, human_csv).unwrap();
    let journal = fixture.path().join("journal.jsonl");
    let output = run(binary()
        .current_dir(fixture.path())
        .args(["align", "--run"])
        .arg(&alpha_run)
        .arg("--human")
        .arg(&human_path)
        .arg("--journal")
        .arg(&journal));
    assert!(output.status.success(), "{}", stderr(&output));
    let report = stdout(&output);
    assert!(report.contains("overall"), "{report}");
    assert!(report.contains("0.0000"), "zero MAD expected: {report}");
    assert!(journal.exists());

    // align again with the first run as baseline: deltas appear.
    let output = run(binary()
        .current_dir(fixture.path())
        .args(["align", "--run"])
        .arg(&alpha_run)
        .arg("--human")
        .arg(&human_path)
        .arg("--journal")
        .arg(&journal)
        .args(["--alignment-id", "second", "--baseline", "r1"]));
    assert!(output.status.success(), "{}", stderr(&output));
    assert!(stdout(&output).contains("+0.0000"), "{}", stdout(&output));

    // unknown baseline errors at runtime (exit 1) naming the run.
    let output = run(binary()
        .current_dir(fixture.path())
        .args(["align", "--run"])
        .arg(&alpha_run)
        .arg("--human")
        .arg(&human_path)
        .args(["--baseline", "no-such-run"]));
    assert_eq!(output.status.code(), Some(1));
    assert!(stderr(&output).contains("no-such-run"));
}

#[test]
fn classify_reports_agreement_with_tags() {
    let fixture = Fixture::new();
    let templates = TemplateSet::default();
    let mut pairs = Vec::new();
    for (i, query) in fixture.queries.iter().enumerate() {
        let prompt = templates
            .category
            .render(&bindings([("input", query.text.as_str())]))
            .unwrap()
            .text;
        let category = if i == 0 {
            "Science & Technology"
        } else {
            "Lifestyle"
        };
        pairs.push((prompt, format!(r#"{{"category": "{category}"}}"#)));
    }
    let script = write_mock_script(fixture.path().join("mock-classify"), &pairs).unwrap();

    let output = run(binary()
        .current_dir(fixture.path())
        .args(["classify", "--queries"])
        .arg(&fixture.queries_path)
        .arg("--mock")
        .arg(&script));
    assert!(output.status.success(), "{}", stderr(&output));
    let out = stdout(&output);
    assert!(out.contains("q-01\tScience & Technology\tScience & Technology\tmatch"));
    assert!(out.contains("q-02\tLifestyle\tScience & Technology\tMISMATCH"));
    assert!(out.contains("agreement with tags: 1/2"));
}

#[test]
fn fetch_warms_cache_from_report_citations() {
    let fixture = Fixture::new();
    let reports_dir = fixture.path().join("cited");
    std::fs::create_dir_all(&reports_dir).unwrap();
    // A report citing a label (unreachable) — no network touched for labels.
    let md = format!(
        "Factual sentence with a citation [1]. {}\n\n## References\n\n[1] offline archive shelf 3\n",
        filler("fetch", 34)
    );
    std::fs::write(reports_dir.join("q-01.md"), md).unwrap();

    let output = run(binary()
        .current_dir(fixture.path())
        .args(["fetch", "--cache"])
        .arg(fixture.path().join("fetch-cache"))
        .arg("--reports")
        .arg(&reports_dir));
    assert!(output.status.success(), "{}", stderr(&output));
    let out = stdout(&output);
    assert!(
        out.contains("unreachable\toffline archive shelf 3"),
        "{out}"
    );
    assert!(out.contains("cached 1 references"));

    let index = std::fs::read_to_string(fixture.path().join("fetch-cache/index.tsv")).unwrap();
    assert!(index.contains("offline archive shelf 3\t!unreachable\t"));
}
