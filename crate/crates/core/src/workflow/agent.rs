use std::fmt;
use std::sync::Arc;

use crate::llm::{with_retry, ChatProvider, ChatRequest, LlmError, RetryPolicy, DEFAULT_MAX_TOKENS};
use crate::sqlexec::{split_statements, SqlQuery};

/// The generating model: one provider, one model id.
#[derive(Clone)]
pub struct Agent {
    provider: Arc<dyn ChatProvider>,
    model_id: String,
    retry: RetryPolicy,
    max_tokens: u32,
}

impl fmt::Debug for Agent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Agent")
            .field("provider", &self.provider.name())
            .field("model_id", &self.model_id)
            .finish()
    }
}

impl Agent {
    pub fn new(provider: Arc<dyn ChatProvider>, model_id: impl Into<String>) -> Self {
        Self {
            provider,
            model_id: model_id.into(),
            retry: RetryPolicy::default(),
            max_tokens: DEFAULT_MAX_TOKENS,
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn model_id(&self) -> &str {
        &self.model_id
    }

    pub(crate) fn map_provider(
        &self,
        wrap: impl FnOnce(Arc<dyn ChatProvider>) -> Arc<dyn ChatProvider>,
    ) -> Self {
        Self {
            provider: wrap(self.provider.clone()),
            ..self.clone()
        }
    }

    pub fn ask(&self, prompt: &str) -> Result<String, LlmError> {
        let request = ChatRequest {
            max_tokens: self.max_tokens,
            ..ChatRequest::new(self.model_id.clone(), prompt)
        };
        with_retry(self.provider.as_ref(), &request, &self.retry).map(|r| r.text)
    }
}

/// `label:` at a line start, ignoring case, list bullets and emphasis.
/// Returns the remainder of that line.
fn label_rest<'a>(line: &'a str, label: &str) -> Option<&'a str> {
    let body = line.trim_start_matches(|c: char| {
        c.is_whitespace() || matches!(c, '*' | '#' | '-' | '>' | '_' | '`')
    });
    let head = body.get(..label.len())?;
    if !head.eq_ignore_ascii_case(label) {
        return None;
    }
    body[label.len()..]
        .trim_start_matches(['*', '_'])
        .strip_prefix(':')
        .map(|r| r.trim_start_matches(['*', '_']))
}

fn strip_brackets(s: &str) -> &str {
    let t = s.trim();
    match t.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
        Some(inner) => inner.trim(),
        None => t,
    }
}

/// Text of the `Specification:` line, or the first non-blank line after a
/// bare label.
pub fn parse_specification(response: &str) -> Option<String> {
    let lines: Vec<&str> = response.lines().collect();
    for (i, line) in lines.iter().enumerate() {
        if let Some(rest) = label_rest(line, "specification") {
            let text = strip_brackets(rest);
            if !text.is_empty() {
                return Some(text.to_string());
            }
            return lines[i + 1..]
                .iter()
                .map(|l| strip_brackets(l))
                .find(|l| !l.is_empty())
                .map(str::to_string);
        }
    }
    None
}

/// Removes a surrounding markdown code fence, if any.
fn strip_fence(block: &str) -> String {
    let trimmed = block.trim_matches(|c| c == '\n' || c == '\r');
    let mut lines: Vec<&str> = trimmed.lines().collect();
    while lines.first().is_some_and(|l| l.trim().is_empty()) {
        lines.remove(0);
    }
    while lines.last().is_some_and(|l| l.trim().is_empty()) {
        lines.pop();
    }
    if lines.first().is_some_and(|l| l.trim_start().starts_with("```")) {
        lines.remove(0);
        if let Some(end) = lines.iter().rposition(|l| l.trim() == "```") {
            lines.truncate(end);
        }
    }
    lines.join("\n")
}

struct Sections {
    sql: Option<String>,
    template: Option<String>,
}

fn sections(response: &str) -> Sections {
    let lines: Vec<&str> = response.lines().collect();
    let sql_at = lines
        .iter()
        .position(|l| label_rest(l, "sql queries").is_some() || label_rest(l, "sql query").is_some());
    let tpl_at = lines.iter().position(|l| {
        label_rest(l, "jinja2 template").is_some() || label_rest(l, "jinja template").is_some()
    });
    let grab = |start: usize, end: usize| -> String {
        let first = lines[start];
        let rest_of_label = ["sql queries", "sql query", "jinja2 template", "jinja template"]
            .iter()
            .find_map(|l| label_rest(first, l))
            .unwrap_or("")
            .trim();
        let mut body = String::new();
        if !rest_of_label.is_empty() {
            body.push_str(rest_of_label);
            body.push('\n');
        }
        body.push_str(&lines[start + 1..end].join("\n"));
        strip_fence(&body)
    };
    let sql = sql_at.map(|s| {
        let end = tpl_at.filter(|t| *t > s).unwrap_or(lines.len());
        grab(s, end)
    });
    let template = tpl_at.map(|t| {
        let end = sql_at.filter(|s| *s > t).unwrap_or(lines.len());
        grab(t, end)
    });
    Sections { sql, template }
}

/// Statements under the `SQL queries:` label. Empty when the label is
/// missing or has no statements.
pub fn parse_sql_section(response: &str) -> Vec<SqlQuery> {
    sections(response)
        .sql
        .map(|text| {
            split_statements(&text)
                .into_iter()
                .filter(|s| !is_placeholder(s))
                .map(SqlQuery::new)
                .collect()
        })
        .unwrap_or_default()
}

fn is_placeholder(stmt: &str) -> bool {
    stmt.starts_with('[') && stmt.ends_with(']')
}

/// `(sql, template)` sections of a template response. Either may be
/// absent; a blank template counts as absent.
pub fn parse_template_response(response: &str) -> (Option<Vec<SqlQuery>>, Option<String>) {
    let s = sections(response);
    let sql = s.sql.map(|text| {
        split_statements(&text)
            .into_iter()
            .filter(|s| !is_placeholder(s))
            .map(SqlQuery::new)
            .collect::<Vec<_>>()
    });
    let template = s.template.filter(|t| !t.trim().is_empty());
    (sql.filter(|q| !q.is_empty()), template)
}
