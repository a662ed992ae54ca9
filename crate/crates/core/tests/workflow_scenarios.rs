mod support;

use facts_core::eval::{reusability_experiment, scalability_experiment};
use facts_core::llm::scripts::{self, ScriptBuilder};
use facts_core::store::serialize_template;
use facts_core::{
    apply_offline_template, MemoryStore, Table, Value, ScriptEntry, SummarySource, TemplateStore,
    WorkflowConfig, WorkflowError,
};
use support::scenarios::*;

fn quiet() -> WorkflowConfig {
    WorkflowConfig {
        validate_final_summary: false,
        ..WorkflowConfig::default()
    }
}

#[test]
fn case_study_replays_to_the_expected_summary() {
    let backend = scripted(case_script());
    let p = pipeline(&backend, WorkflowConfig::default());
    let store = MemoryStore::new();
    let tables = case_tables();

    let first = p.summarize(&store, CASE_QUERY, &tables).unwrap();
    assert_eq!(first.text, CASE_GENERATED);
    assert_eq!(first.source, SummarySource::Built);
    assert!(first.warnings.is_empty());
    assert_eq!(backend.remaining(), 0);
    assert_eq!(first.llm_calls_used, backend.call_count());
    assert_eq!(first.llm_calls_used, 24);

    // A hit skips the build; only the optional summary judgment runs.
    for e in ScriptBuilder::new(COUNCIL.len()).summary(true).build() {
        backend.push(e);
    }
    let key_query = "  show ALL document names using templates   with template type code BK. ";
    let second = p.summarize(&store, key_query, &tables).unwrap();
    assert_eq!(second.text, CASE_GENERATED);
    assert_eq!(second.source, SummarySource::StoreHit);
    assert_eq!(second.llm_calls_used, COUNCIL.len());

    let quiet_p = p.clone().with_config(quiet());
    let third = quiet_p.summarize(&store, CASE_QUERY, &tables).unwrap();
    assert_eq!(third.source, SummarySource::StoreHit);
    assert_eq!(third.llm_calls_used, 0);
    assert_eq!(backend.call_count(), 24 + COUNCIL.len());

    let schemas: Vec<_> = tables.iter().map(|t| t.schema()).collect();
    let template = store.lookup(CASE_QUERY, &schemas).unwrap().unwrap();
    assert_eq!(template.sql_queries.len(), 1);
    assert_eq!(template.sql_queries[0].text(), CASE_SQL);
    assert_eq!(template.provenance.accepted_specifications.len(), 2);
    assert_eq!(template.provenance.iterations.template_rounds, 2);
    assert_eq!(template.provenance.iterations.sql_rounds, 1);
    assert_eq!(template.provenance.created_at, "1970-01-01T00:00:00Z");
}

#[test]
fn scripted_builds_are_bit_reproducible() {
    let build = || {
        let backend = scripted(case_script());
        let t = pipeline(&backend, quiet())
            .build_offline_template(CASE_QUERY, &case_tables())
            .unwrap();
        serialize_template(&t)
    };
    assert_eq!(build(), build());
}

#[test]
fn applying_to_a_different_schema_is_rejected() {
    let backend = scripted(case_script());
    let template = pipeline(&backend, quiet())
        .build_offline_template(CASE_QUERY, &case_tables())
        .unwrap();
    let mut swapped = case_tables();
    swapped.reverse();
    assert!(matches!(
        apply_offline_template(&template, &swapped),
        Err(WorkflowError::FingerprintMismatch { .. })
    ));
    let calls = backend.call_count();
    let applied = apply_offline_template(&template, &case_tables()).unwrap();
    assert_eq!(applied.text, CASE_GENERATED);
    assert_eq!(backend.call_count(), calls);
}

/// Brute-force join of the two case tables: names of documents whose
/// template has type `code`, in document order.
fn expected_names(tables: &[Table], code: &str) -> Vec<String> {
    let templates = &tables[0];
    let documents = &tables[1];
    let codes: Vec<(Value, Value)> = templates
        .rows()
        .iter()
        .map(|r| (r[0].clone(), r[2].clone()))
        .collect();
    documents
        .rows()
        .iter()
        .filter(|d| codes.iter().any(|(id, c)| *id == d[1] && c.to_text() == code))
        .map(|d| d[2].to_text())
        .collect()
}

#[test]
fn case_template_applies_to_new_rows_without_calls() {
    let backend = scripted(case_script());
    let template = pipeline(&backend, quiet())
        .build_offline_template(CASE_QUERY, &case_tables())
        .unwrap();
    let calls = backend.call_count();
    let base = case_tables();
    let docs = &base[1];
    let picked = [("Budget plan", 9), ("Field notes", 11), ("Tide charts", 4)];
    let rows = picked
        .iter()
        .enumerate()
        .map(|(i, (name, tpl))| {
            vec![
                Value::Integer(i as i64 + 1),
                Value::Integer(*tpl),
                Value::Text(name.to_string()),
                Value::Text("x".into()),
                Value::Null,
            ]
        })
        .collect();
    let variant = vec![base[0].clone(), docs.with_rows(rows).unwrap()];
    // The SQL has no ORDER BY, so only the count and the set of names are fixed.
    let mut names = expected_names(&variant, "BK");
    let text = apply_offline_template(&template, &variant).unwrap().text;
    let prefix = format!(
        "There are {} documents that use templates with the template type code BK. The document names are ",
        names.len()
    );
    let listed = text.strip_prefix(&prefix).and_then(|r| r.strip_suffix('.')).expect(&text);
    let mut got: Vec<&str> = listed.split(", ").collect();
    got.sort_unstable();
    names.sort_unstable();
    assert_eq!(got, names);
    assert_eq!(expected_names(&base, "BK").len(), 5);

    let no_bk: Vec<Vec<Value>> = base[0]
        .rows()
        .iter()
        .map(|r| {
            let mut r = r.clone();
            if r[2].to_text() == "BK" {
                r[2] = Value::Text("PP".into());
            }
            r
        })
        .collect();
    let bk_free = vec![base[0].with_rows(no_bk).unwrap(), base[1].clone()];
    assert_eq!(
        apply_offline_template(&template, &bk_free).unwrap().text,
        "There are 0 documents that use templates with the template type code BK."
    );
    assert_eq!(backend.call_count(), calls);
}

#[test]
fn stage1_all_no_hits_its_ceiling() {
    let mut b = ScriptBuilder::new(COUNCIL.len());
    for i in 0..40 {
        b = b
            .agent(scripts::GENERATE_SPECIFICATION, scripts::specification_reply(&format!("rule {i}")))
            .council(scripts::JUDGE_SPECIFICATION, false, "not useful");
    }
    let backend = scripted(b.build());
    let err = pipeline(&backend, quiet())
        .build_offline_template(CASE_QUERY, &case_tables())
        .unwrap_err();
    assert!(matches!(err, WorkflowError::EmptySpecificationSet { rounds: 10 }), "{err}");
    assert_eq!(backend.call_count(), 160);
    assert_eq!(backend.remaining(), 0);
}

fn through_stage1(b: ScriptBuilder) -> ScriptBuilder {
    b.specification("Should only BK templates count?", true)
        .specification("Should template dates be ignored?", true)
        .sufficiency(true)
}

#[test]
fn stage2_all_no_hits_its_ceiling() {
    let mut b = through_stage1(ScriptBuilder::new(COUNCIL.len()));
    for _ in 0..3 {
        b = b.sql(CASE_SQL, false);
    }
    let backend = scripted(b.build());
    let err = pipeline(&backend, quiet())
        .build_offline_template(CASE_QUERY, &case_tables())
        .unwrap_err();
    assert!(matches!(err, WorkflowError::SqlPatienceExhausted { .. }), "{err}");
    assert_eq!(backend.call_count(), 9 + 12);
}

#[test]
fn stage3_all_no_hits_its_ceiling() {
    let final_template = "{% for row in values %}{{ row[\"Document_Name\"] }} {% endfor %}";
    let mut b = through_stage1(ScriptBuilder::new(COUNCIL.len())).sql(CASE_SQL, true);
    for _ in 0..3 {
        b = b.template(final_template, false);
    }
    let backend = scripted(b.build());
    let err = pipeline(&backend, quiet())
        .build_offline_template(CASE_QUERY, &case_tables())
        .unwrap_err();
    assert!(matches!(err, WorkflowError::TemplatePatienceExhausted { .. }), "{err}");
    assert_eq!(backend.call_count(), 9 + 4 + 12);
}

#[test]
fn duplicate_specification_is_rejected_without_council() {
    let b = ScriptBuilder::new(COUNCIL.len())
        .specification("Only BK?", true)
        .agent(scripts::GENERATE_SPECIFICATION, scripts::specification_reply("Only BK?"))
        .agent(scripts::GENERATE_SPECIFICATION, scripts::specification_reply("Ignore dates?"))
        .council(scripts::JUDGE_SPECIFICATION, true, "Question is good")
        .sufficiency(true)
        .sql(CASE_SQL, true)
        .template("{{ values|length }} documents", true);
    let backend = scripted(b.build());
    let t = pipeline(&backend, quiet())
        .build_offline_template(CASE_QUERY, &case_tables())
        .unwrap();
    assert_eq!(t.provenance.accepted_specifications.len(), 2);
    assert_eq!(t.provenance.iterations.spec_revisions, 1);
    assert_eq!(backend.remaining(), 0);
}

#[test]
fn empty_result_forces_a_sql_revision() {
    let empty = CASE_SQL.replace("'BK'", "'ZZ'");
    let b = through_stage1(ScriptBuilder::new(COUNCIL.len()))
        .sql(&empty, true)
        .sql(CASE_SQL, true)
        .template("{{ values|length }} documents", true);
    let backend = scripted(b.build());
    let t = pipeline(&backend, quiet())
        .build_offline_template(CASE_QUERY, &case_tables())
        .unwrap();
    assert_eq!(t.provenance.iterations.sql_rounds, 2);
    let revision = &backend.call_log()[9 + 4].prompt;
    assert!(revision.contains("execution check failed"), "{revision}");
}

#[test]
fn invalid_sql_in_a_refinement_skips_the_council() {
    let template = "{{ values|length }} documents";
    let b = through_stage1(ScriptBuilder::new(COUNCIL.len()))
        .sql(CASE_SQL, true)
        .agent(
            scripts::GENERATE_TEMPLATE,
            scripts::sql_and_template_reply("SELECT \"Nope\" FROM \"Documents\"", template),
        )
        .template(template, true);
    let backend = scripted(b.build());
    let t = pipeline(&backend, quiet())
        .build_offline_template(CASE_QUERY, &case_tables())
        .unwrap();
    assert_eq!(t.provenance.iterations.template_rounds, 2);
    assert_eq!(backend.call_count(), 9 + 4 + 1 + 4);
}

#[test]
fn refinement_recovers_where_single_shot_fails() {
    let case = synthetic_case(3);
    let backend = scripted(case.error_injecting_script(false));
    let t = pipeline(&backend, quiet())
        .build_offline_template(&case.example.query, &case.example.tables)
        .unwrap();
    assert_eq!(t.provenance.iterations.sql_rounds, 2);

    let single = WorkflowConfig {
        validate_final_summary: false,
        ..WorkflowConfig::single_shot()
    };
    let backend = scripted(case.error_injecting_script(false));
    let err = pipeline(&backend, single)
        .build_offline_template(&case.example.query, &case.example.tables)
        .unwrap_err();
    assert!(matches!(err, WorkflowError::SqlPatienceExhausted { .. }), "{err}");
}

#[test]
fn prompts_never_carry_cell_values() {
    for i in 0..5 {
        let case = synthetic_case(i);
        let backend = scripted(case.error_injecting_script(false));
        pipeline(&backend, quiet())
            .build_offline_template(&case.example.query, &case.example.tables)
            .unwrap();
        let cells = sentinel_cells(&case.example.tables);
        for request in backend.call_log() {
            for cell in &cells {
                assert!(!request.prompt.contains(cell.as_str()), "{cell} leaked");
            }
        }
    }
}

#[test]
fn rejected_summary_becomes_a_provenance_warning() {
    let case = synthetic_case(1);
    let mut script = case.clean_script(false);
    script.extend(ScriptBuilder::new(COUNCIL.len()).summary(false).build());
    let backend = scripted(script);
    let store = MemoryStore::new();
    let s = pipeline(&backend, WorkflowConfig::default())
        .summarize(&store, &case.example.query, &case.example.tables)
        .unwrap();
    assert_eq!(s.warnings.len(), 1);
    assert!(s.warnings[0].starts_with("summary validation: NO"));
    let schemas: Vec<_> = case.example.tables.iter().map(|t| t.schema()).collect();
    let saved = store.lookup(&case.example.query, &schemas).unwrap().unwrap();
    assert_eq!(saved.provenance.warnings, s.warnings);
}

#[test]
fn reuse_builds_once_and_scale_prompts_stay_flat() {
    let case = synthetic_case(0);
    let one = {
        let backend = scripted(case.clean_script(false));
        reusability_experiment(&pipeline(&backend, quiet()), &case.example, 1, 7).unwrap()
    };
    let many = {
        let backend = scripted(case.clean_script(false));
        reusability_experiment(&pipeline(&backend, quiet()), &case.example, 25, 7).unwrap()
    };
    assert_eq!(one.builds, 1);
    assert_eq!(many.builds, 1);
    assert_eq!(many.store_hits, 24);
    assert_eq!(many.total_llm_calls, one.total_llm_calls);
    assert!(many.per_table[1..].iter().all(|t| t.llm_calls == 0));

    let sizes = [10, 40];
    let mut script: Vec<ScriptEntry> = Vec::new();
    for _ in sizes {
        script.extend(case.clean_script(false));
    }
    let backend = scripted(script);
    let report = scalability_experiment(&pipeline(&backend, quiet()), &case.example, &sizes).unwrap();
    assert!(report.prompt_chars_flat);
    assert_eq!(report.points.len(), 2);
    assert_eq!(report.points[0].llm_calls, report.points[1].llm_calls);
}
