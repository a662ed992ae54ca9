//! Prompt texts for the council and the generating agent.
//!
//! Placeholders are `{name}` with a lowercase identifier. [`fill`] replaces
//! them in a single pass, so substituted values are never re-scanned; Jinja
//! syntax such as `{% for %}` or `{{ x }}` passes through untouched.

use std::collections::HashMap;

pub const EVALUATE_SPECIFICATION: &str = "\
You are evaluating a question or filtering rule for table summarization.

Table Information:
{schema}

User Query:
{query}

Previously Generated Questions or Filtering Rules:
{prior_specs}

Current Question or Filtering Rule to Evaluate:
{artifact}

Is this a good question or filtering rule that will help guide SQL query generation? Answer with YES or NO only.

If NO, provide a brief reason why this question is not helpful.

Output format:
Decision: [YES/NO]
Feedback: [Brief reason if NO, or 'Question is good' if YES]";

pub const EVALUATE_SQL: &str = "\
You are evaluating a SQL query execution for table summarization.

Table Information:
{schema}

Guidance:
{guidance}

SQL Query:
{artifact}

Execution Result:
{execution}

Evaluate whether this SQL query is valid and appropriate:
1. Does it execute without errors?
2. Does it return the non-empty data for summarization?
3. Does it filter and select appropriate columns?

Answer with YES or NO only. If NO, provide a brief reason.

Output format:
Decision: [YES/NO]
Feedback: [Brief reason if NO, or 'SQL query is good' if YES]";

pub const EVALUATE_ALIGNMENT: &str = "\
You are evaluating whether a SQL query result aligns with a Jinja2 template for table summarization.

Table Information:
{schema}

SQL Query:
{sql}

Jinja2 Template:
{artifact}

Evaluate:
1. Does the SQL return all fields that the template tries to access?
2. Is the data structure compatible (e.g., if template expects multiple rows, does SQL return them)?
3. Are field names in the template matching the column names returned by SQL?

Answer with YES or NO only. If NO, provide a brief reason.

Output format:
Decision: [YES/NO]
Feedback: [Brief reason if NO, or 'SQL and template are well-aligned' if YES]";

pub const EVALUATE_SUMMARY: &str = "\
You are evaluating a generated summary for table summarization.

Table Information:
{schema}

User Query:
{query}

Generated Summary:
{artifact}

Evaluate summary quality:
1. Relevance to the query
2. Accuracy of information
3. Clarity and coherence
4. Completeness

Answer with YES or NO only. If NO, provide a brief reason.

Output format:
Decision: [YES/NO]
Feedback: [Brief reason if NO, or 'Summary is good' if YES]";

pub const GENERATE_SPECIFICATION: &str = "\
Based on the table information and user query below, generate ONE specific, detailed question or filtering rule that will help guide SQL query generation.

Table Information:
{schema}

User Query: {query}

Previously generated questions and filtering rules:
{prior_specs}

Generate ONE new question or filtering rule that:
1. Is different from previously generated questions and filtering rules
2. Clarifies what specific information is needed or what information is irrelevant
3. Helps understand data relationships
4. Guides the SQL query structure

Output format:
Specification: [Your single question or filtering rule here]";

pub const REVISE_SPECIFICATION: &str = "

--- Revision Request ---
Previous question or filtering rule:
{previous}

Council feedback:
{feedback}

Revise the question or filtering rule so that it addresses the feedback. Keep the same output format.";

pub const SUFFICIENCY_PROBE: &str = "\
You are checking whether guided specifications are complete enough for SQL generation.

Table Information:
{schema}

User Query:
{query}

Guided Specifications:
{prior_specs}

Do these specifications suffice to write SQL for the query? YES/NO

Output format:
Decision: [YES/NO]
Feedback: [Brief reason]";

pub const GENERATE_SQL: &str = "\
Based on the table information, user query, and refined questions below, generate a valid DuckDB SQL query.

Table Information:
{schema}

User Query: {query}

Guided Specifications:
{specs}

IMPORTANT: {table_reference_note}

Generate valid DuckDB SQL SELECT query that:
1. Retrieves the necessary information to answer the user query
2. Uses proper DuckDB syntax
3. {table_reference_rule}
4. Quotes column names exactly as they appear
5. Handles data types appropriately

Output format:
SQL queries:
[Your SQL query here]";

pub const SINGLE_TABLE_NOTE: &str =
    "You are querying a pandas DataFrame named 'df' that contains the table data. ";
pub const SINGLE_TABLE_RULE: &str = "References the DataFrame as 'df'";
pub const MULTI_TABLE_NOTE: &str =
    "You are querying the tables listed above; reference each one by its exact table name.";
pub const MULTI_TABLE_RULE: &str = "References each table by its quoted table name";

pub const REVISE_SQL: &str = "

--- Revision Request ---
Previous SQL queries:
{previous}

Execution Result:
{execution}

Council feedback:
{feedback}

Revise the SQL queries so that they execute without errors, return non-empty data, and address the feedback. Keep the same output format.";

pub const GENERATE_TEMPLATE: &str = "\
Based on the demonstration examples below and the current SQL result, generate a Jinja2 template.

--- Demonstration Examples ---
{demos}

--- Current Task ---
Table Information: {schema}
User Query: {query}
SQL Query: {sql}

Generate a Jinja2 template that:
1. Uses the variable name 'values' to access the data{extra_bindings}
2. Iterates with {% for row in values %}
3. Accesses fields with row[\"Column Name\"]
4. Produces a coherent paragraph summary in the style of the examples
5. Handles empty results gracefully

Output format:
Jinja2 template:
[Your Jinja2 template here]";

pub const REFINE_TEMPLATE: &str = "

--- Refinement Request ---
Previous Jinja2 template:
{previous}

Problems found:
{problems}

Council feedback:
{feedback}

Revise the template, and the SQL queries if the template needs fields they do not return, so that every field the template accesses is returned by the SQL and the result shape matches how the template uses it. Only these template constructs are available: {{ }} output, {% for %}, {% if %}/{% elif %}/{% else %}, {% set %}, row[\"Column\"] access, and the filters length, join, unique, list, map(attribute=...).

Output format:
SQL queries:
[Revised SQL query, or the unchanged one]
Jinja2 template:
[Revised Jinja2 template here]";

/// Replaces every `{name}` whose name is a key of `slots`. Unknown
/// placeholders are left as written.
pub fn fill(template: &str, slots: &[(&str, &str)]) -> String {
    let map: HashMap<&str, &str> = slots.iter().copied().collect();
    let mut out = String::with_capacity(template.len() + 256);
    let mut rest = template;
    while let Some(start) = rest.find('{') {
        out.push_str(&rest[..start]);
        let after = &rest[start + 1..];
        let name_len = after
            .bytes()
            .take_while(|b| b.is_ascii_lowercase() || *b == b'_')
            .count();
        if name_len > 0 && after.as_bytes().get(name_len) == Some(&b'}') {
            if let Some(value) = map.get(&after[..name_len]) {
                out.push_str(value);
                rest = &after[name_len + 1..];
                continue;
            }
        }
        out.push('{');
        rest = after;
    }
    out.push_str(rest);
    out
}

/// Numbered list, or `None` when empty.
pub fn numbered_list<S: AsRef<str>>(items: &[S]) -> String {
    if items.is_empty() {
        return "None".to_string();
    }
    items
        .iter()
        .enumerate()
        .map(|(i, s)| format!("{}. {}", i + 1, s.as_ref()))
        .collect::<Vec<_>>()
        .join("\n")
}
