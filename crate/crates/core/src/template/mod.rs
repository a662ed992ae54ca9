//! A strict subset of Jinja2.
//!
//! Supported: `{{ }}` output, `{% for %}` (with `loop.index`, `loop.first`
//! and friends), `{% if %}`/`{% elif %}`/`{% else %}`, `{% set name = ... %}`,
//! `{# #}` comments, `-` whitespace control, attribute and subscript access,
//! comparisons, `in`, `and`/`or`/`not`, and the filters `length`, `join`,
//! `unique`, `list` and `map(attribute="...")`. Anything else is rejected at
//! parse time with [`TemplateError::UnsupportedConstruct`].
//!
//! Rows are bound as `values` for the first query and `values_2`,
//! `values_3`, ... for later ones. Looking up a column a row does not have
//! is an error rather than an empty string.

mod analysis;
mod ast;
mod parser;
mod render;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::schema::Value;
use crate::sqlexec::{QueryResult, SqlExecutionResult};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TemplateError {
    #[error("template syntax error on line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("unsupported template construct: {0}")]
    UnsupportedConstruct(String),
    #[error("template reads undefined field `{0}`")]
    UndefinedField(String),
    #[error("render error: {0}")]
    Render(String),
}

/// Name under which query `index` (0-based) is bound.
pub fn binding_name(index: usize) -> String {
    if index == 0 {
        "values".to_string()
    } else {
        format!("values_{}", index + 1)
    }
}

/// Inverse of [`binding_name`].
pub(crate) fn binding_index(name: &str) -> Option<usize> {
    if name == "values" {
        return Some(0);
    }
    let k: usize = name.strip_prefix("values_")?.parse().ok()?;
    (k >= 2 && name == format!("values_{k}")).then(|| k - 1)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct BoundRows {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

/// Query results exposed to a template, in query order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RenderBinding {
    pub results: Vec<BoundRows>,
}

impl RenderBinding {
    pub fn single(columns: Vec<String>, rows: Vec<Vec<Value>>) -> Self {
        Self {
            results: vec![BoundRows { columns, rows }],
        }
    }

    pub fn from_query_result(result: &QueryResult) -> Self {
        Self::single(result.columns.clone(), result.rows.clone())
    }

    pub fn from_execution(exec: &SqlExecutionResult) -> Self {
        Self {
            results: exec
                .per_query
                .iter()
                .map(|r| BoundRows {
                    columns: r.columns.clone(),
                    rows: r.rows.clone(),
                })
                .collect(),
        }
    }

    /// Same columns, no rows.
    pub fn emptied(&self) -> Self {
        Self {
            results: self
                .results
                .iter()
                .map(|r| BoundRows {
                    columns: r.columns.clone(),
                    rows: Vec::new(),
                })
                .collect(),
        }
    }
}

/// Parsed template. Serializes as its source text.
#[derive(Clone)]
pub struct Jinja2Template {
    source: String,
    nodes: Vec<ast::Node>,
}

impl Jinja2Template {
    pub fn parse(source: &str) -> Result<Self, TemplateError> {
        Ok(Self {
            source: source.to_string(),
            nodes: parser::parse(source)?,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn render(&self, binding: &RenderBinding) -> Result<String, TemplateError> {
        let mut out = String::new();
        render::Renderer::new(binding).render(&self.nodes, &mut out)?;
        Ok(out)
    }

    /// Every column name the template may look up on a row, across all
    /// bindings.
    pub fn field_refs(&self) -> BTreeSet<String> {
        analysis::analyze(&self.nodes)
            .fields
            .into_values()
            .flatten()
            .collect()
    }

    /// Checks the template against executed query results without rendering.
    pub fn check_alignment(&self, exec: &SqlExecutionResult) -> AlignmentReport {
        let usage = analysis::analyze(&self.nodes);
        let n = exec.per_query.len();
        let mut missing = BTreeSet::new();
        let mut shape_issues = Vec::new();

        for (&b, fields) in &usage.fields {
            if let Some(result) = exec.per_query.get(b) {
                for f in fields {
                    if !result.columns.iter().any(|c| c == f) {
                        missing.insert(f.clone());
                    }
                }
            }
        }
        for &b in usage.bindings.iter().filter(|b| **b >= n) {
            shape_issues.push(format!(
                "template uses `{}` but only {n} quer{} produced",
                binding_name(b),
                if n == 1 { "y was" } else { "ies were" }
            ));
        }
        for name in &usage.undefined_names {
            shape_issues.push(format!("undefined variable `{name}`"));
        }
        if usage.dynamic_access {
            shape_issues.push("dynamic field access on row".to_string());
        }
        if !usage.iterated.is_empty() && n > 0 && exec.per_query.iter().all(QueryResult::is_scalar)
        {
            shape_issues.push("loop over scalar result".to_string());
        }
        for &b in &usage.scalar_used {
            if exec.per_query.get(b).is_some_and(|r| r.rows.len() > 1) {
                shape_issues.push(format!(
                    "scalar use of multi-row result `{}`",
                    binding_name(b)
                ));
            }
        }

        AlignmentReport {
            aligned: missing.is_empty() && shape_issues.is_empty(),
            missing_fields: missing.into_iter().collect(),
            shape_issues,
        }
    }
}

impl fmt::Debug for Jinja2Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("Jinja2Template").field(&self.source).finish()
    }
}

impl PartialEq for Jinja2Template {
    fn eq(&self, other: &Self) -> bool {
        self.source == other.source
    }
}

impl Serialize for Jinja2Template {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.source)
    }
}

impl<'de> Deserialize<'de> for Jinja2Template {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let source = String::deserialize(d)?;
        Jinja2Template::parse(&source).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignmentReport {
    pub aligned: bool,
    /// Sorted, without duplicates.
    pub missing_fields: Vec<String>,
    pub shape_issues: Vec<String>,
}

impl AlignmentReport {
    /// One line per problem, for feedback prompts.
    pub fn problems(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .missing_fields
            .iter()
            .map(|f| format!("template reads field `{f}` that the SQL does not return"))
            .collect();
        out.extend(self.shape_issues.iter().cloned());
        out
    }
}

pub fn parse_template(source: &str) -> Result<Jinja2Template, TemplateError> {
    Jinja2Template::parse(source)
}

pub fn render(template: &Jinja2Template, binding: &RenderBinding) -> Result<String, TemplateError> {
    template.render(binding)
}

pub fn extract_field_refs(template: &Jinja2Template) -> BTreeSet<String> {
    template.field_refs()
}

pub fn check_alignment(template: &Jinja2Template, exec: &SqlExecutionResult) -> AlignmentReport {
    template.check_alignment(exec)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(src: &str) -> Jinja2Template {
        Jinja2Template::parse(src).unwrap()
    }

    fn text(s: &str) -> Value {
        Value::Text(s.into())
    }

    fn people() -> RenderBinding {
        RenderBinding::single(
            vec!["Name".into(), "Salary".into()],
            vec![
                vec![text("Wang"), Value::Real(999999999.0)],
                vec![text("O'mahony"), Value::Real(230000.0)],
                vec![text("Brown"), Value::Real(200000.0)],
            ],
        )
    }

    fn exec(columns: &[&str], rows: usize) -> SqlExecutionResult {
        SqlExecutionResult {
            per_query: vec![QueryResult {
                columns: columns.iter().map(|c| c.to_string()).collect(),
                rows: vec![vec![Value::Integer(1); columns.len()]; rows],
                error: None,
            }],
        }
    }

    #[test]
    fn loop_with_separators() {
        let tpl = t(r#"{% for row in values %}{{ row["Name"] }} earns {{ row.Salary }}{% if not loop.last %}; {% endif %}{% endfor %}."#);
        assert_eq!(
            tpl.render(&people()).unwrap(),
            "Wang earns 999999999.0; O'mahony earns 230000.0; Brown earns 200000.0."
        );
    }

    #[test]
    fn set_map_unique_join() {
        let b = RenderBinding::single(
            vec!["n".into()],
            vec![vec![text("a")], vec![text("B")], vec![text("b")], vec![text("c")]],
        );
        let tpl = t(r#"{%- set xs = values|map(attribute="n")|unique|list -%}{{ xs|length }}: {{ xs|join(", ") }}"#);
        assert_eq!(tpl.render(&b).unwrap(), "3: a, B, c");
    }

    #[test]
    fn python_style_printing() {
        let b = RenderBinding::single(
            vec!["a".into(), "b".into(), "c".into()],
            vec![vec![Value::Null, Value::Boolean(true), Value::Integer(7)]],
        );
        assert_eq!(
            t("{{ values[0].a }} {{ values[0].b }} {{ values[0].c }}").render(&b).unwrap(),
            "None True 7"
        );
        assert_eq!(
            t("{{ values|map(attribute='c')|list }}").render(&b).unwrap(),
            "[7]"
        );
    }

    #[test]
    fn missing_field_is_an_error() {
        let err = t("{% for r in values %}{{ r.date }}{% endfor %}")
            .render(&people())
            .unwrap_err();
        assert_eq!(err, TemplateError::UndefinedField("date".into()));
    }

    #[test]
    fn render_errors_do_not_leak_values() {
        let err = t("{% for r in values %}{{ r.Name > 3 }}{% endfor %}")
            .render(&people())
            .unwrap_err();
        let msg = err.to_string();
        assert!(!msg.contains("Wang"), "{msg}");
        assert!(msg.contains("str"), "{msg}");
    }

    #[test]
    fn multi_query_bindings() {
        let exec = SqlExecutionResult {
            per_query: vec![
                QueryResult {
                    columns: vec!["n".into()],
                    rows: vec![vec![Value::Integer(3)]],
                    error: None,
                },
                QueryResult {
                    columns: vec!["m".into()],
                    rows: vec![vec![text("x")], vec![text("y")]],
                    error: None,
                },
            ],
        };
        let tpl = t("{{ values[0].n }}/{{ values_2|map(attribute='m')|join('+') }}");
        assert_eq!(tpl.render(&RenderBinding::from_execution(&exec)).unwrap(), "3/x+y");
        assert!(tpl.check_alignment(&exec).aligned);
    }

    #[test]
    fn binding_names_round_trip() {
        for i in 0..12 {
            assert_eq!(binding_index(&binding_name(i)), Some(i));
        }
        assert_eq!(binding_index("values_1"), None);
        assert_eq!(binding_index("values_02"), None);
        assert_eq!(binding_index("row"), None);
    }

    #[test]
    fn field_refs_follow_aliases() {
        let tpl = t(r#"{% set first = values[0] %}{{ first["A"] }}{% for r in values|list %}{{ r.B }}{% endfor %}{{ values|map(attribute="C")|join }}"#);
        let refs: Vec<_> = tpl.field_refs().into_iter().collect();
        assert_eq!(refs, ["A", "B", "C"]);
    }

    #[test]
    fn alignment_reports_missing_fields() {
        let tpl = t("{% for r in values %}{{ r.name }} {{ r.date }}{% endfor %}");
        let rep = tpl.check_alignment(&exec(&["name", "amount"], 2));
        assert!(!rep.aligned);
        assert_eq!(rep.missing_fields, ["date"]);
    }

    #[test]
    fn alignment_reports_shape_issues() {
        let loop_tpl = t("{% for r in values %}{{ r.n }}{% endfor %}");
        let rep = loop_tpl.check_alignment(&exec(&["n"], 1));
        assert_eq!(rep.shape_issues, ["loop over scalar result"]);

        let scalar_tpl = t("{{ values[0].n }}");
        assert!(scalar_tpl.check_alignment(&exec(&["n"], 1)).aligned);
        let rep = scalar_tpl.check_alignment(&exec(&["n"], 4));
        assert_eq!(rep.shape_issues, ["scalar use of multi-row result `values`"]);

        let dynamic = t("{% for r in values %}{% for k in r %}{{ r[k] }}{% endfor %}{% endfor %}");
        assert!(dynamic
            .check_alignment(&exec(&["n"], 2))
            .shape_issues
            .contains(&"dynamic field access on row".to_string()));

        let extra = t("{{ values_2|length }}");
        assert!(!extra.check_alignment(&exec(&["n"], 2)).aligned);
    }

    #[test]
    fn emptied_binding_renders_else_branch() {
        let tpl = t("{% if values %}some{% else %}none{% endif %}");
        assert_eq!(tpl.render(&people().emptied()).unwrap(), "none");
    }

    #[test]
    fn serde_uses_source_text() {
        let tpl = t("{{ values|length }}");
        let json = serde_json::to_string(&tpl).unwrap();
        assert_eq!(json, "\"{{ values|length }}\"");
        let back: Jinja2Template = serde_json::from_str(&json).unwrap();
        assert_eq!(back, tpl);
        assert!(serde_json::from_str::<Jinja2Template>("\"{{ x + 1 }}\"").is_err());
    }
}
