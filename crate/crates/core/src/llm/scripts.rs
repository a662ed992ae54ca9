//! Canned exchanges for [`ScriptedBackend`](super::ScriptedBackend).
//!
//! Matchers are fixed phrases from each prompt kind. Revision and refinement
//! prompts embed their base prompt, so they match the same phrase.

use super::ScriptEntry;

pub const GENERATE_SPECIFICATION: &str = "generate ONE specific";
pub const JUDGE_SPECIFICATION: &str = "You are evaluating a question or filtering rule";
pub const SUFFICIENCY: &str = "Do these specifications suffice";
pub const GENERATE_SQL: &str = "generate a valid DuckDB SQL query";
pub const JUDGE_SQL: &str = "You are evaluating a SQL query execution";
pub const GENERATE_TEMPLATE: &str = "generate a Jinja2 template";
pub const JUDGE_ALIGNMENT: &str = "You are evaluating whether a SQL query result aligns";
pub const JUDGE_SUMMARY: &str = "You are evaluating a generated summary";

pub fn yes(feedback: &str) -> String {
    format!("Decision: YES\nFeedback: {feedback}")
}

pub fn no(feedback: &str) -> String {
    format!("Decision: NO\nFeedback: {feedback}")
}

pub fn specification_reply(text: &str) -> String {
    format!("Specification: {text}")
}

pub fn sql_reply(sql: &str) -> String {
    format!("SQL queries:\n```sql\n{sql}\n```")
}

pub fn template_reply(template: &str) -> String {
    format!("Jinja2 template:\n```jinja\n{template}\n```")
}

pub fn sql_and_template_reply(sql: &str, template: &str) -> String {
    format!("{}\n{}", sql_reply(sql), template_reply(template))
}

/// Appends exchanges in the order the workflow will request them.
#[derive(Debug, Clone)]
pub struct ScriptBuilder {
    council_size: usize,
    entries: Vec<ScriptEntry>,
}

impl ScriptBuilder {
    pub fn new(council_size: usize) -> Self {
        Self {
            council_size,
            entries: Vec::new(),
        }
    }

    pub fn agent(mut self, matcher: &str, response: impl Into<String>) -> Self {
        self.entries.push(ScriptEntry::text(matcher, response));
        self
    }

    /// One unanimous council round.
    pub fn council(mut self, matcher: &str, accept: bool, feedback: &str) -> Self {
        let reply = if accept { yes(feedback) } else { no(feedback) };
        for _ in 0..self.council_size {
            self.entries.push(ScriptEntry::text(matcher, reply.clone()));
        }
        self
    }

    pub fn specification(self, text: &str, accept: bool) -> Self {
        let feedback = if accept { "Question is good" } else { "too vague" };
        self.agent(GENERATE_SPECIFICATION, specification_reply(text))
            .council(JUDGE_SPECIFICATION, accept, feedback)
    }

    pub fn sufficiency(self, enough: bool) -> Self {
        let reply = if enough {
            yes("the specifications cover the query")
        } else {
            no("more detail is needed")
        };
        self.agent(SUFFICIENCY, reply)
    }

    pub fn sql(self, sql: &str, accept: bool) -> Self {
        let feedback = if accept { "SQL query is good" } else { "the query fails to execute" };
        self.agent(GENERATE_SQL, sql_reply(sql))
            .council(JUDGE_SQL, accept, feedback)
    }

    pub fn template(self, template: &str, accept: bool) -> Self {
        let feedback = if accept {
            "SQL and template are well-aligned"
        } else {
            "the template does not match the SQL result"
        };
        self.agent(GENERATE_TEMPLATE, template_reply(template))
            .council(JUDGE_ALIGNMENT, accept, feedback)
    }

    pub fn summary(self, accept: bool) -> Self {
        let feedback = if accept { "Summary is good" } else { "the summary is incomplete" };
        self.council(JUDGE_SUMMARY, accept, feedback)
    }

    pub fn build(self) -> Vec<ScriptEntry> {
        self.entries
    }
}

/// A build where every artifact passes on its first attempt. The probe
/// fires once, after the last specification, so `specs.len()` must equal
/// the configured sufficiency minimum.
pub fn first_try_build(
    council_size: usize,
    specs: &[&str],
    sql: &str,
    template: &str,
    judge_summary: bool,
) -> Vec<ScriptEntry> {
    let mut b = ScriptBuilder::new(council_size);
    for s in specs {
        b = b.specification(s, true);
    }
    b = b.sufficiency(true).sql(sql, true).template(template, true);
    if judge_summary {
        b = b.summary(true);
    }
    b.build()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompts;

    #[test]
    fn matchers_occur_in_their_prompts_only() {
        let all = [
            (GENERATE_SPECIFICATION, prompts::GENERATE_SPECIFICATION),
            (JUDGE_SPECIFICATION, prompts::EVALUATE_SPECIFICATION),
            (SUFFICIENCY, prompts::SUFFICIENCY_PROBE),
            (GENERATE_SQL, prompts::GENERATE_SQL),
            (JUDGE_SQL, prompts::EVALUATE_SQL),
            (GENERATE_TEMPLATE, prompts::GENERATE_TEMPLATE),
            (JUDGE_ALIGNMENT, prompts::EVALUATE_ALIGNMENT),
            (JUDGE_SUMMARY, prompts::EVALUATE_SUMMARY),
        ];
        for (i, (m, _)) in all.iter().enumerate() {
            for (j, (_, p)) in all.iter().enumerate() {
                assert_eq!(p.contains(m), i == j, "{m} vs prompt {j}");
            }
        }
    }

    #[test]
    fn builder_emits_one_entry_per_member() {
        let s = ScriptBuilder::new(3).sql("SELECT 1", false).build();
        assert_eq!(s.len(), 4);
        assert_eq!(first_try_build(3, &["a", "b"], "q", "t", true).len(), 4 + 4 + 1 + 4 + 4 + 3);
    }
}
