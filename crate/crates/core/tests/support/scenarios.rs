//! Fixtures and scripted pipelines shared by the integration suites.

#![allow(dead_code)]

use std::fs::File;
use std::path::PathBuf;
use std::sync::Arc;

use facts_core::eval::DatasetExample;
use facts_core::llm::scripts::{self, ScriptBuilder};
use facts_core::workflow::FixedClock;
use facts_core::{
    load_table, Agent, Council, Pipeline, RetryPolicy, ScriptEntry, ScriptedBackend, Table,
    TableFormat, Value, WorkflowConfig,
};

pub const COUNCIL: [&str; 3] = ["gpt-4o-mini", "claude-sonnet-4", "deepseek-v3"];
pub const AGENT_MODEL: &str = "gpt-4o";

pub const CASE_QUERY: &str = "Show all document names using templates with template type code BK.";
pub const CASE_GENERATED: &str = "There are 5 documents that use templates with the template type code BK. The document names are Robbin CV, Data base, How to read a book, Palm reading, About Korea.";
pub const CASE_REFERENCE: &str = "There are 5 document names that use templates with the template type code BK. The document names are Robbin CV, Data base, How to read a book, Palm reading, and About Korea.";
pub const CASE_SQL: &str = "SELECT d.\"Document_Name\"\nFROM \"Documents\" AS d\nJOIN \"Templates\" AS t\n  ON d.\"Template_ID\" = t.\"Template_ID\"\nWHERE t.\"Template_Type_Code\" = 'BK';";

pub fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(rel)
}

pub fn case_tables() -> Vec<Table> {
    ["Templates", "Documents"]
        .iter()
        .map(|name| {
            let file = File::open(fixture(&format!("qfmts_303/{name}.csv"))).unwrap();
            load_table(file, TableFormat::CsvWithHeader, name).unwrap()
        })
        .collect()
}

pub fn case_script() -> Vec<ScriptEntry> {
    let text = std::fs::read_to_string(fixture("qfmts_303/script.json")).unwrap();
    ScriptedBackend::parse_entries(&text).unwrap()
}

/// Agent and a three-member council on one replay backend, no retries and
/// a fixed clock.
pub fn pipeline(backend: &Arc<ScriptedBackend>, config: WorkflowConfig) -> Pipeline {
    let provider: Arc<dyn facts_core::ChatProvider> = backend.clone();
    let agent = Agent::new(provider.clone(), AGENT_MODEL).with_retry(RetryPolicy::none());
    let council = Council::uniform(provider, &COUNCIL)
        .unwrap()
        .with_retry(RetryPolicy::none());
    Pipeline::new(agent, council, config).with_clock(Arc::new(FixedClock::epoch()))
}

pub fn scripted(entries: Vec<ScriptEntry>) -> Arc<ScriptedBackend> {
    Arc::new(ScriptedBackend::new(entries))
}

/// Schema-only case with a known-good SQL, a faulty first draft and a
/// template. Text cells carry sentinel tokens that must never reach a
/// prompt.
#[derive(Debug, Clone)]
pub struct SyntheticCase {
    pub example: DatasetExample,
    pub specs: [String; 2],
    pub good_sql: String,
    pub faulty_sql: String,
    pub template: String,
}

const ENTITIES: [(&str, &str, &str); 5] = [
    ("accounts", "name", "balance"),
    ("products", "title", "price"),
    ("cities", "city", "population"),
    ("players", "player", "score"),
    ("films", "film", "rating"),
];

pub fn sentinel(case: usize, row: usize) -> String {
    format!("zqx{case}k{row}v")
}

pub fn synthetic_case(i: usize) -> SyntheticCase {
    let (entities, label, num) = ENTITIES[i % ENTITIES.len()];
    let label = format!("{label}_{}", i / ENTITIES.len());
    let rows_n = 5 + i % 7;
    let rows: Vec<Vec<Value>> = (0..rows_n)
        .map(|r| {
            vec![
                Value::Integer(r as i64 + 1),
                Value::Text(sentinel(i, r)),
                Value::Real(100.0 * (r as f64 + 1.0) + 0.25 + i as f64),
            ]
        })
        .collect();
    let schema = facts_core::TableSchema::new(
        "df",
        vec![
            facts_core::Column::new("id", facts_core::DataType::Integer, false),
            facts_core::Column::new(label.clone(), facts_core::DataType::Text, false),
            facts_core::Column::new(num, facts_core::DataType::Real, false),
        ],
    )
    .unwrap();
    let table = Table::new(schema, rows).unwrap();
    let threshold = 200;
    let query = format!("Which {entities} have a {num} above {threshold}?");
    let good_sql =
        format!("SELECT \"{label}\", \"{num}\" FROM df WHERE \"{num}\" > {threshold} ORDER BY \"{num}\" DESC");
    let faulty_sql =
        format!("SELECT \"{label}_value\", \"{num}\" FROM df WHERE \"{num}\" > {threshold}");
    let template = format!(
        "{{% if values|length > 0 %}}{{% for row in values %}}{{{{ row[\"{label}\"] }}}} has a {num} of {{{{ row[\"{num}\"] }}}}. {{% endfor %}}{{% else %}}No {entities} have a {num} above {threshold}.{{% endif %}}"
    );
    SyntheticCase {
        example: DatasetExample {
            id: format!("synthetic-{i}"),
            query,
            tables: vec![table],
            reference: format!("{entities} above {threshold}"),
        },
        specs: [
            format!("Should only rows with {num} strictly greater than {threshold} be kept?"),
            format!("Should the {entities} be listed by {num} from highest to lowest?"),
        ],
        good_sql,
        faulty_sql,
        template,
    }
}

impl SyntheticCase {
    /// First SQL draft fails to execute and is rejected; the first revision
    /// is correct.
    pub fn error_injecting_script(&self, judge_summary: bool) -> Vec<ScriptEntry> {
        let mut b = ScriptBuilder::new(COUNCIL.len())
            .specification(&self.specs[0], true)
            .specification(&self.specs[1], true)
            .sufficiency(true)
            .sql(&self.faulty_sql, false)
            .sql(&self.good_sql, true)
            .template(&self.template, true);
        if judge_summary {
            b = b.summary(true);
        }
        b.build()
    }

    pub fn clean_script(&self, judge_summary: bool) -> Vec<ScriptEntry> {
        let specs: Vec<&str> = self.specs.iter().map(String::as_str).collect();
        scripts::first_try_build(COUNCIL.len(), &specs, &self.good_sql, &self.template, judge_summary)
    }
}

/// Text and real cells of `tables`, as they would print.
pub fn sentinel_cells(tables: &[Table]) -> Vec<String> {
    tables
        .iter()
        .flat_map(|t| t.rows().iter().flatten())
        .filter(|v| matches!(v, Value::Text(_) | Value::Real(_)))
        .map(Value::to_text)
        .collect()
}
