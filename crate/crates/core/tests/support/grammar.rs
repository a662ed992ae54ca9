//! Random templates from the supported grammar and random result sets.

#![allow(dead_code)]

use facts_core::sqlexec::QueryResult;
use facts_core::{SqlExecutionResult, Value};
use proptest::prelude::*;
use proptest::sample::{select, subsequence};

pub const FIELDS: [&str; 4] = ["a", "b", "Name", "unit price"];

fn is_ident(f: &str) -> bool {
    f.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn text() -> impl Strategy<Value = String> {
    "[a-z ,.]{0,6}"
}

fn field() -> impl Strategy<Value = &'static str> {
    select(FIELDS.to_vec())
}

fn binding() -> impl Strategy<Value = &'static str> {
    prop_oneof![4 => Just("values"), 1 => Just("values_2")]
}

/// `var["f"]`, or `var.f` when `f` is an identifier.
fn access(var: &'static str) -> impl Strategy<Value = String> {
    (field(), any::<bool>()).prop_map(move |(f, dot)| {
        if dot && is_ident(f) {
            format!("{var}.{f}")
        } else {
            format!("{var}[\"{f}\"]")
        }
    })
}

fn loop_body() -> BoxedStrategy<String> {
    let leaf = prop_oneof![
        text(),
        access("row").prop_map(|e| format!("{{{{ {e} }}}}")),
        Just("{{ loop.index }}".to_string()),
        Just("{% if not loop.last %}, {% endif %}".to_string()),
    ];
    leaf.prop_recursive(2, 8, 3, |inner| {
        prop_oneof![
            (access("row"), inner.clone(), inner.clone()).prop_map(|(c, a, b)| {
                format!("{{% if {c} %}}{a}{{% else %}}{b}{{% endif %}}")
            }),
            (access("row"), text(), inner.clone())
                .prop_map(|(c, t, a)| format!("{{% if {c} == \"{t}\" %}}{a}{{% endif %}}")),
            prop::collection::vec(inner, 1..3).prop_map(|v| v.concat()),
        ]
    })
    .boxed()
}

fn piece() -> BoxedStrategy<String> {
    prop_oneof![
        3 => text(),
        2 => binding().prop_map(|b| format!("{{{{ {b}|length }}}}")),
        4 => (binding(), loop_body())
            .prop_map(|(b, body)| format!("{{% for row in {b} %}}{body}{{% endfor %}}")),
        2 => (binding(), field()).prop_map(|(b, f)| format!(
            "{{% set xs = {b}|map(attribute=\"{f}\")|unique|list %}}{{{{ xs|join(\", \") }}}}"
        )),
        1 => (binding(), field()).prop_map(|(b, f)| format!("{{{{ {b}[0][\"{f}\"] }}}}")),
        1 => access("row").prop_map(|e| format!("{{{{ {e} }}}}")),
        3 => (binding(), loop_body(), text()).prop_map(|(b, body, t)| format!(
            "{{% if {b}|length > 0 %}}{{% for row in {b} %}}{body}{{% endfor %}}{{% else %}}{t}{{% endif %}}"
        )),
    ]
    .boxed()
}

/// Template source text; always parses.
pub fn template_source() -> impl Strategy<Value = String> {
    prop::collection::vec(piece(), 1..4).prop_map(|v| v.concat())
}

pub fn cell() -> impl Strategy<Value = Value> {
    prop_oneof![
        Just(Value::Null),
        (-50i64..50).prop_map(Value::Integer),
        (-1e4f64..1e4).prop_map(Value::Real),
        "[a-z]{0,4}".prop_map(Value::Text),
    ]
}

fn query_result() -> impl Strategy<Value = QueryResult> {
    subsequence(FIELDS.to_vec(), 0..=FIELDS.len()).prop_flat_map(|cols| {
        let width = cols.len();
        prop::collection::vec(prop::collection::vec(cell(), width), 0..4).prop_map(move |rows| {
            QueryResult {
                columns: cols.iter().map(|c| c.to_string()).collect(),
                rows,
                error: None,
            }
        })
    })
}

pub fn result_set() -> impl Strategy<Value = SqlExecutionResult> {
    prop::collection::vec(query_result(), 1..=2)
        .prop_map(|per_query| SqlExecutionResult { per_query })
}
