use crate::council::{ArtifactKind, Council, EvaluationContext};
use crate::llm::LlmError;
use crate::prompts;
use crate::sqlexec::{validate, SqlExecutionResult, SqlQuery, SqlSession, Validity};
use crate::template::{binding_name, Jinja2Template, RenderBinding};

use super::agent::{parse_specification, parse_sql_section, parse_template_response, Agent};
use super::{Demonstration, GuidedSpecification, Stage, WorkflowConfig, WorkflowError};

fn llm(stage: Stage) -> impl Fn(LlmError) -> WorkflowError {
    move |source| WorkflowError::Llm { stage, source }
}

fn council_err(stage: Stage) -> impl Fn(crate::council::CouncilError) -> WorkflowError {
    move |source| WorkflowError::Council { stage, source }
}

fn spec_texts(specs: &[GuidedSpecification]) -> Vec<String> {
    specs.iter().map(|s| s.text.clone()).collect()
}

fn generation_prompt(query: &str, schema_text: &str, accepted: &[GuidedSpecification]) -> String {
    prompts::fill(
        prompts::GENERATE_SPECIFICATION,
        &[
            ("schema", schema_text),
            ("query", query),
            ("prior_specs", &prompts::numbered_list(&spec_texts(accepted))),
        ],
    )
}

/// One generation call. `None` when the response has no `Specification:`
/// line.
pub fn generate_specification(
    agent: &Agent,
    query: &str,
    schema_text: &str,
    accepted: &[GuidedSpecification],
) -> Result<Option<GuidedSpecification>, LlmError> {
    let response = agent.ask(&generation_prompt(query, schema_text, accepted))?;
    Ok(parse_specification(&response).map(GuidedSpecification::classify))
}

/// One revision call: the generation prompt plus the rejected text and the
/// council's feedback.
pub fn revise_specification(
    agent: &Agent,
    previous: Option<&GuidedSpecification>,
    feedback: &str,
    query: &str,
    schema_text: &str,
    accepted: &[GuidedSpecification],
) -> Result<Option<GuidedSpecification>, LlmError> {
    let mut prompt = generation_prompt(query, schema_text, accepted);
    prompt.push_str(&prompts::fill(
        prompts::REVISE_SPECIFICATION,
        &[
            ("previous", previous.map_or("(no usable specification)", |s| &s.text)),
            ("feedback", feedback),
        ],
    ));
    let response = agent.ask(&prompt)?;
    Ok(parse_specification(&response).map(GuidedSpecification::classify))
}

/// False below the configured minimum, true at the cap, otherwise the
/// answer of one sufficiency probe (unreadable answers count as NO).
/// The second value is the number of model calls made.
pub fn sufficient(
    agent: &Agent,
    query: &str,
    schema_text: &str,
    accepted: &[GuidedSpecification],
    config: &WorkflowConfig,
) -> Result<(bool, usize), LlmError> {
    if accepted.len() >= config.max_specs {
        return Ok((true, 0));
    }
    if accepted.len() < config.min_specs_for_sufficiency {
        return Ok((false, 0));
    }
    let prompt = prompts::fill(
        prompts::SUFFICIENCY_PROBE,
        &[
            ("schema", schema_text),
            ("query", query),
            ("prior_specs", &prompts::numbered_list(&spec_texts(accepted))),
        ],
    );
    let response = agent.ask(&prompt)?;
    let judgment = crate::council::parse_judgment(&response);
    Ok((judgment.decision == crate::council::Decision::Yes, 1))
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Stage1Outcome {
    pub accepted: Vec<GuidedSpecification>,
    /// Generation prompts sent, re-asks included.
    pub generations: usize,
    /// Revision prompts sent, re-asks included.
    pub revisions: usize,
    pub judge_rounds: usize,
    pub probes: usize,
}

const NO_SPEC_LINE: &str = "the response did not contain a `Specification:` line";
const DUPLICATE_SPEC: &str = "duplicate of an already accepted specification";

pub fn stage1(
    agent: &Agent,
    council: &Council,
    query: &str,
    schema_text: &str,
    config: &WorkflowConfig,
) -> Result<Stage1Outcome, WorkflowError> {
    let stage = Stage::Specification;
    let mut out = Stage1Outcome::default();
    let mut probed_at = None;

    for _ in 0..config.max_specs {
        // A parse failure earns one re-ask before it counts as a rejection.
        let mut candidate = None;
        for _ in 0..2 {
            out.generations += 1;
            candidate = generate_specification(agent, query, schema_text, &out.accepted)
                .map_err(llm(stage))?;
            if candidate.is_some() {
                break;
            }
        }

        let mut revisions_used = 0;
        loop {
            let (passed, feedback) = match &candidate {
                None => (false, NO_SPEC_LINE.to_string()),
                Some(spec) if out.accepted.iter().any(|a| a.text == spec.text) => {
                    (false, DUPLICATE_SPEC.to_string())
                }
                Some(spec) => {
                    out.judge_rounds += 1;
                    let ctx = EvaluationContext {
                        schema_text: Some(schema_text.to_string()),
                        user_query: Some(query.to_string()),
                        prior_specs: Some(spec_texts(&out.accepted)),
                        ..Default::default()
                    };
                    let verdict = council
                        .judge(ArtifactKind::GuidedSpecification, &spec.text, &ctx)
                        .map_err(council_err(stage))?;
                    (verdict.accepted(), verdict.consensus_feedback)
                }
            };
            if passed {
                out.accepted.push(candidate.take().expect("judged candidate"));
                break;
            }
            if revisions_used == config.spec_patience {
                log::debug!("specification dropped after {revisions_used} revisions");
                break;
            }
            revisions_used += 1;
            let previous = candidate.take();
            for _ in 0..2 {
                out.revisions += 1;
                candidate = revise_specification(
                    agent,
                    previous.as_ref(),
                    &feedback,
                    query,
                    schema_text,
                    &out.accepted,
                )
                .map_err(llm(stage))?;
                if candidate.is_some() {
                    break;
                }
            }
        }

        // Probe again only when the accepted set changed since the last probe.
        if probed_at != Some(out.accepted.len()) {
            let (done, calls) = sufficient(agent, query, schema_text, &out.accepted, config)
                .map_err(llm(stage))?;
            out.probes += calls;
            if calls > 0 {
                probed_at = Some(out.accepted.len());
            }
            if done {
                break;
            }
        }
    }

    if out.accepted.is_empty() {
        return Err(WorkflowError::EmptySpecificationSet {
            rounds: config.max_specs,
        });
    }
    Ok(out)
}

fn join_sql(queries: &[SqlQuery]) -> String {
    queries
        .iter()
        .map(|q| q.text())
        .collect::<Vec<_>>()
        .join("\n")
}

fn sql_prompt(query: &str, schema_text: &str, specs: &[GuidedSpecification], single_table: bool) -> String {
    let (note, rule) = if single_table {
        (prompts::SINGLE_TABLE_NOTE, prompts::SINGLE_TABLE_RULE)
    } else {
        (prompts::MULTI_TABLE_NOTE, prompts::MULTI_TABLE_RULE)
    };
    prompts::fill(
        prompts::GENERATE_SQL,
        &[
            ("schema", schema_text),
            ("query", query),
            ("specs", &prompts::numbered_list(&spec_texts(specs))),
            ("table_reference_note", note),
            ("table_reference_rule", rule),
        ],
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stage2Outcome {
    pub queries: Vec<SqlQuery>,
    pub execution: SqlExecutionResult,
    pub rounds: usize,
}

/// `sql_patience` rounds in total: one generation, then revisions that see
/// the previous SQL, its execution outcome and the council's feedback.
pub fn stage2(
    agent: &Agent,
    council: &Council,
    query: &str,
    schema_text: &str,
    specs: &[GuidedSpecification],
    session: &SqlSession,
    config: &WorkflowConfig,
) -> Result<Stage2Outcome, WorkflowError> {
    let stage = Stage::Sql;
    let single_table = session.table_names().len() == 1;
    let base = sql_prompt(query, schema_text, specs, single_table);
    let guidance = prompts::numbered_list(&spec_texts(specs));
    let mut previous = String::new();
    let mut last_execution = String::new();
    let mut last_feedback = String::new();

    for round in 1..=config.sql_patience {
        let prompt = if round == 1 {
            base.clone()
        } else {
            let mut p = base.clone();
            p.push_str(&prompts::fill(
                prompts::REVISE_SQL,
                &[
                    ("previous", &previous),
                    ("execution", &last_execution),
                    ("feedback", &last_feedback),
                ],
            ));
            p
        };
        let response = agent.ask(&prompt).map_err(llm(stage))?;
        let queries = parse_sql_section(&response);
        if queries.is_empty() {
            previous = "(no SQL found)".to_string();
            last_execution = "No SQL query was found under `SQL queries:`.".to_string();
            last_feedback = "the response contained no SQL statement".to_string();
            continue;
        }
        let execution = session.execute(&queries);
        let validity = validate(&execution);
        previous = join_sql(&queries);
        last_execution = execution.describe();

        let ctx = EvaluationContext {
            schema_text: Some(schema_text.to_string()),
            guidance: Some(guidance.clone()),
            execution_result: Some(last_execution.clone()),
            ..Default::default()
        };
        let verdict = council
            .judge(ArtifactKind::SqlQuery, &previous, &ctx)
            .map_err(council_err(stage))?;
        if verdict.accepted() && validity.is_valid() {
            return Ok(Stage2Outcome {
                queries,
                execution,
                rounds: round,
            });
        }
        last_feedback = match validity {
            Validity::Invalid(reasons) if verdict.accepted() => {
                format!("execution check failed: {}", reasons.join("; "))
            }
            _ => verdict.consensus_feedback,
        };
    }
    Err(WorkflowError::SqlPatienceExhausted {
        last_feedback,
        last_execution,
    })
}

fn format_demos(demos: &[Demonstration]) -> String {
    if demos.is_empty() {
        return "None".to_string();
    }
    demos
        .iter()
        .enumerate()
        .map(|(i, d)| {
            format!(
                "Example {}:\nTable Information: {}\nUser Query: {}\nSummary: {}",
                i + 1,
                d.schema_text,
                d.query,
                d.summary
            )
        })
        .collect::<Vec<_>>()
        .join("\n\n")
}

fn extra_bindings(n: usize) -> String {
    if n <= 1 {
        return String::new();
    }
    let names: Vec<String> = (1..n).map(binding_name).collect();
    format!(
        " (results of queries 2 to {n} are available as {})",
        names
            .iter()
            .map(|n| format!("'{n}'"))
            .collect::<Vec<_>>()
            .join(", ")
    )
}

/// Alignment, empty-result rendering and rendering of the actual result.
/// Messages carry types and column names only.
pub(crate) fn local_problems(template: &Jinja2Template, exec: &SqlExecutionResult) -> Vec<String> {
    let report = template.check_alignment(exec);
    let mut problems = report.problems();
    if report.aligned {
        let binding = RenderBinding::from_execution(exec);
        if let Err(e) = template.render(&binding.emptied()) {
            problems.push(format!("rendering an empty result fails: {e}"));
        }
        match template.render(&binding) {
            Err(e) => problems.push(format!("rendering the SQL result fails: {e}")),
            Ok(text) if text.trim().is_empty() => {
                problems.push("template renders only whitespace".to_string())
            }
            Ok(_) => {}
        }
    }
    problems
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stage3Outcome {
    pub queries: Vec<SqlQuery>,
    pub execution: SqlExecutionResult,
    pub template: Jinja2Template,
    pub rounds: usize,
}

/// `template_patience` rounds: one generation, then refinements that may
/// replace the SQL as well. Changed SQL must execute validly before the
/// template is considered.
#[allow(clippy::too_many_arguments)]
pub fn stage3(
    agent: &Agent,
    council: &Council,
    query: &str,
    schema_text: &str,
    queries: Vec<SqlQuery>,
    execution: SqlExecutionResult,
    session: &SqlSession,
    config: &WorkflowConfig,
) -> Result<Stage3Outcome, WorkflowError> {
    let stage = Stage::Template;
    let demos = format_demos(&config.demos);
    let mut queries = queries;
    let mut execution = execution;
    let mut previous = String::new();
    let mut last_problems: Vec<String> = Vec::new();
    let mut last_feedback = String::new();

    for round in 1..=config.template_patience {
        let sql_text = join_sql(&queries);
        let mut prompt = prompts::fill(
            prompts::GENERATE_TEMPLATE,
            &[
                ("demos", &demos),
                ("schema", schema_text),
                ("query", query),
                ("sql", &sql_text),
                ("extra_bindings", &extra_bindings(queries.len())),
            ],
        );
        if round > 1 {
            prompt.push_str(&prompts::fill(
                prompts::REFINE_TEMPLATE,
                &[
                    ("previous", &previous),
                    ("problems", &prompts::numbered_list(&last_problems)),
                    ("feedback", &last_feedback),
                ],
            ));
        }
        let response = agent.ask(&prompt).map_err(llm(stage))?;
        let (new_sql, source) = parse_template_response(&response);

        if let Some(new_sql) = new_sql.filter(|q| *q != queries) {
            let new_exec = session.execute(&new_sql);
            match validate(&new_exec) {
                Validity::Valid => {
                    queries = new_sql;
                    execution = new_exec;
                }
                Validity::Invalid(reasons) => {
                    previous = source.unwrap_or_default();
                    last_problems = vec![format!(
                        "revised SQL is not usable: {}",
                        reasons.join("; ")
                    )];
                    last_feedback = "keep the SQL valid when revising it".to_string();
                    continue;
                }
            }
        }

        let Some(source) = source else {
            previous = "(no template found)".to_string();
            last_problems = vec!["the response contained no `Jinja2 template:` section".into()];
            last_feedback = "no template to evaluate".to_string();
            continue;
        };
        let template = match Jinja2Template::parse(&source) {
            Ok(t) => t,
            Err(e) => {
                previous = source;
                last_problems = vec![e.to_string()];
                last_feedback = "the template does not parse".to_string();
                continue;
            }
        };
        let problems = local_problems(&template, &execution);
        let ctx = EvaluationContext {
            schema_text: Some(schema_text.to_string()),
            sql: Some(join_sql(&queries)),
            ..Default::default()
        };
        let verdict = council
            .judge(ArtifactKind::SqlTemplateAlignment, &source, &ctx)
            .map_err(council_err(stage))?;
        if verdict.accepted() && problems.is_empty() {
            return Ok(Stage3Outcome {
                queries,
                execution,
                template,
                rounds: round,
            });
        }
        previous = source;
        last_problems = problems;
        last_feedback = verdict.consensus_feedback;
    }
    Err(WorkflowError::TemplatePatienceExhausted {
        last_problems,
        last_feedback,
    })
}
