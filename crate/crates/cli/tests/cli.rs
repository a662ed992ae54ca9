use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use facts_core::llm::scripts::ScriptBuilder;
use facts_core::ScriptedBackend;

const QUERY: &str = "Show all document names using templates with template type code BK.";
const SUMMARY: &str = "There are 5 documents that use templates with the template type code BK. The document names are Robbin CV, Data base, How to read a book, Palm reading, About Korea.";
const SQL: &str = r#"SELECT d."Document_Name" FROM "Documents" AS d JOIN "Templates" AS t ON d."Template_ID" = t."Template_ID" WHERE t."Template_Type_Code" = 'BK'"#;

fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(rel)
}

fn config() -> String {
    fixture("qfmts_303/scripted.toml").display().to_string()
}

fn tables() -> Vec<String> {
    vec![
        format!("Templates={}", fixture("qfmts_303/Templates.csv").display()),
        format!("Documents={}", fixture("qfmts_303/Documents.csv").display()),
    ]
}

fn facts(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_facts"))
        .args(args)
        .current_dir(cwd)
        .env_remove("OPENROUTER_API_KEY")
        .env("RUST_LOG", "off")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn summarize(store: &Path, cwd: &Path) -> Output {
    let t = tables();
    let store = store.display().to_string();
    facts(
        &[
            "--config", &config(), "--store", &store, "summarize", "--query", QUERY,
            "--table", &t[0], "--table", &t[1],
        ],
        cwd,
    )
}

fn field<'a>(out: &'a str, name: &str) -> &'a str {
    out.lines()
        .find_map(|l| l.strip_prefix(name))
        .map(str::trim)
        .unwrap_or_else(|| panic!("no `{name}` line in:\n{out}"))
}

#[test]
fn summarize_builds_then_hits_the_store() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("store");

    let first = summarize(&store, dir.path());
    assert_eq!(first.status.code(), Some(0), "{}", stderr(&first));
    let out = stdout(&first);
    assert_eq!(out.lines().next(), Some(SUMMARY));
    assert_eq!(field(&out, "provenance"), "built");
    assert_eq!(field(&out, "llm calls"), "24");

    let second = summarize(&store, dir.path());
    assert_eq!(second.status.code(), Some(0), "{}", stderr(&second));
    let out2 = stdout(&second);
    assert_eq!(out2.lines().next(), Some(SUMMARY));
    assert_eq!(field(&out2, "provenance"), "store hit");
    // Only the optional summary judgment runs on a hit.
    assert_eq!(field(&out2, "llm calls"), "3");
    assert_eq!(field(&out, "key"), field(&out2, "key"));
}

#[test]
fn gen_template_then_apply_without_any_model() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("store").display().to_string();
    let doc = dir.path().join("t.json").display().to_string();
    let t = tables();
    let built = facts(
        &[
            "--config", &config(), "--store", &store, "--out", &doc, "gen-template", "--query",
            QUERY, "--table", &t[0], "--table", &t[1],
        ],
        dir.path(),
    );
    assert_eq!(built.status.code(), Some(0), "{}", stderr(&built));
    let key = field(&stdout(&built), "key").to_string();

    // No config, no script, no credentials: apply must still work.
    for reference in [doc.as_str(), key.as_str()] {
        let applied = facts(
            &["--store", &store, "apply", "--template", reference, "--table", &t[0], "--table", &t[1]],
            dir.path(),
        );
        assert_eq!(applied.status.code(), Some(0), "{}", stderr(&applied));
        assert_eq!(stdout(&applied).trim_end(), SUMMARY);
    }
}

#[test]
fn schema_mismatch_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let store = dir.path().join("store").display().to_string();
    let doc = dir.path().join("t.json").display().to_string();
    let t = tables();
    let built = facts(
        &[
            "--config", &config(), "--store", &store, "--out", &doc, "gen-template", "--query",
            QUERY, "--table", &t[0], "--table", &t[1],
        ],
        dir.path(),
    );
    assert_eq!(built.status.code(), Some(0), "{}", stderr(&built));

    let renamed = format!("Docs={}", fixture("qfmts_303/Documents.csv").display());
    let o = facts(
        &["apply", "--template", &doc, "--table", &t[0], "--table", &renamed],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("fingerprint"), "{}", stderr(&o));
}

#[test]
fn input_and_config_problems_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let t = tables();

    let missing = facts(
        &["--config", &config(), "summarize", "--query", QUERY, "--table", "df=nope.csv"],
        dir.path(),
    );
    assert_eq!(missing.status.code(), Some(2), "{}", stderr(&missing));

    let unknown = facts(&["apply", "--template", "abc123", "--table", &t[0]], dir.path());
    assert_eq!(unknown.status.code(), Some(2), "{}", stderr(&unknown));

    // Default live mode with no key in the environment.
    let live = facts(
        &["summarize", "--query", QUERY, "--table", &t[0], "--table", &t[1]],
        dir.path(),
    );
    assert_eq!(live.status.code(), Some(2), "{}", stderr(&live));
    assert!(stderr(&live).contains("OPENROUTER_API_KEY"), "{}", stderr(&live));

    let bad_cfg = dir.path().join("bad.toml");
    std::fs::write(&bad_cfg, "colour = 1\n").unwrap();
    let o = facts(
        &["--config", bad_cfg.to_str().unwrap(), "eval", "--dataset", "x.jsonl"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));

    let usage = facts(&["summarize"], dir.path());
    assert_eq!(usage.status.code(), Some(2));
}

#[test]
fn patience_exhaustion_exits_4_with_the_stage_named() {
    let dir = tempfile::tempdir().unwrap();
    let mut b = ScriptBuilder::new(3)
        .specification("Should only BK templates count?", true)
        .specification("Should template dates be ignored?", true)
        .sufficiency(true);
    for _ in 0..3 {
        b = b.sql(SQL, false);
    }
    let script = dir.path().join("no.json");
    std::fs::write(&script, ScriptedBackend::to_json(&b.build())).unwrap();
    let t = tables();
    let o = facts(
        &[
            "--script", script.to_str().unwrap(), "--store", "s", "summarize", "--query", QUERY,
            "--table", &t[0], "--table", &t[1],
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    assert!(stderr(&o).contains("stage2/sql"), "{}", stderr(&o));
}

#[test]
fn scripted_eval_is_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let dataset = fixture("qfmts_303/dataset.jsonl").display().to_string();
    let run = |name: &str| {
        let report = dir.path().join(name);
        let o = facts(
            &["--config", &config(), "--out", report.to_str().unwrap(), "eval", "--dataset", &dataset],
            dir.path(),
        );
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let text = stdout(&o).replace(report.to_str().unwrap(), "<report>");
        (text, std::fs::read(&report).unwrap())
    };
    let (out_a, report_a) = run("a.json");
    let (out_b, report_b) = run("b.json");
    assert_eq!(out_a, out_b);
    assert_eq!(report_a, report_b);
    let json: serde_json::Value = serde_json::from_slice(&report_a).unwrap();
    assert_eq!(json["pass_rate"], 1.0);
    assert_eq!(json["per_example"][0]["summary"], SUMMARY);
}

#[test]
fn bench_commands_report_reuse_and_flat_prompts() {
    let dir = tempfile::tempdir().unwrap();
    let dataset = fixture("qfmts_303/dataset.jsonl").display().to_string();
    let reuse_out = dir.path().join("reuse.json");
    let o = facts(
        &[
            "--config", &config(), "--out", reuse_out.to_str().unwrap(), "bench-reuse", "--dataset",
            &dataset, "--n", "6", "--seed", "3",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = stdout(&o);
    assert_eq!(field(&out, "builds"), "1");
    assert_eq!(field(&out, "store hits"), "5");
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&reuse_out).unwrap()).unwrap();
    assert_eq!(report["total_llm_calls"], 21);

    let scale_out = dir.path().join("scale.json");
    let o = facts(
        &[
            "--config", &config(), "--out", scale_out.to_str().unwrap(), "bench-scale", "--dataset",
            &dataset, "--rows", "30,90",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("prompt payload flat"), "{}", stdout(&o));
}
