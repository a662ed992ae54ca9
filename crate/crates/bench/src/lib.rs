//! Inputs for the hot-path benchmarks: a sized table, the SQL and template
//! that summarize it, and a finished offline template.

use facts_core::workflow::{IterationCounts, Provenance};
use facts_core::{
    schema_fingerprint, Column, DataType, Jinja2Template, OfflineTemplate, SqlQuery, Table,
    TableSchema, Value,
};

pub const QUERY: &str = "Which products cost more than 50, and how many are there?";

pub const TEMPLATE: &str = "There are {{ values_2[0][\"n\"] }} products priced above 50. \
{% for row in values %}{{ row[\"title\"] }} costs {{ row[\"price\"] }}{% if not loop.last %}, {% else %}.{% endif %}{% endfor %}";

pub fn sql() -> Vec<SqlQuery> {
    vec![
        SqlQuery::new("SELECT \"title\", \"price\" FROM df WHERE \"price\" > 50 ORDER BY \"price\" DESC"),
        SqlQuery::new("SELECT COUNT(*) AS n FROM df WHERE \"price\" > 50"),
    ]
}

/// `rows` products with prices spread over 0 to 100.
pub fn products(rows: usize) -> Table {
    let schema = TableSchema::new(
        "df",
        vec![
            Column::new("id", DataType::Integer, false),
            Column::new("title", DataType::Text, false),
            Column::new("price", DataType::Real, false),
        ],
    )
    .expect("valid schema");
    let data = (0..rows)
        .map(|i| {
            vec![
                Value::Integer(i as i64),
                Value::Text(format!("item {i}")),
                Value::Real(((i * 37) % 1000) as f64 / 10.0),
            ]
        })
        .collect();
    Table::new(schema, data).expect("rows match schema")
}

pub fn offline_template(table: &Table) -> OfflineTemplate {
    OfflineTemplate {
        user_query: QUERY.to_string(),
        schema_fingerprints: vec![schema_fingerprint(table.schema())],
        sql_queries: sql(),
        jinja2_template: Jinja2Template::parse(TEMPLATE).expect("template parses"),
        provenance: Provenance {
            created_at: "1970-01-01T00:00:00Z".to_string(),
            council_members: vec!["judge".to_string()],
            accepted_specifications: Vec::new(),
            iterations: IterationCounts::default(),
            warnings: Vec::new(),
        },
    }
}

pub const CANDIDATE: &str = "There are 5 documents that use templates with the template type code BK. The document names are Robbin CV, Data base, How to read a book, Palm reading, About Korea.";
pub const REFERENCE: &str = "There are 5 document names that use templates with the template type code BK. The document names are Robbin CV, Data base, How to read a book, Palm reading, and About Korea.";
