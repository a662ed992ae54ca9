//! Multi-model judging with majority vote.
//!
//! Every member receives the same prompt and answers independently with a
//! `Decision:` / `Feedback:` pair. A candidate passes only on a strict
//! majority of YES votes; ties, unparseable answers and unavailable members
//! all count against it.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::llm::{with_retry, ChatProvider, ChatRequest, RetryPolicy, DEFAULT_MAX_TOKENS};
use crate::prompts;

pub const ACCEPTED_TEXT: &str = "accepted by council majority";
pub const MEMBER_UNAVAILABLE: &str = "member unavailable";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArtifactKind {
    GuidedSpecification,
    SqlQuery,
    SqlTemplateAlignment,
    Summary,
}

impl fmt::Display for ArtifactKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ArtifactKind::GuidedSpecification => "guided_specification",
            ArtifactKind::SqlQuery => "sql_query",
            ArtifactKind::SqlTemplateAlignment => "sql_template_alignment",
            ArtifactKind::Summary => "summary",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Decision {
    #[serde(rename = "YES")]
    Yes,
    #[serde(rename = "NO")]
    No,
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Decision::Yes => "YES",
            Decision::No => "NO",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Judgment {
    pub decision: Decision,
    pub feedback: String,
}

impl Judgment {
    pub fn new(decision: Decision, feedback: impl Into<String>) -> Self {
        Self {
            decision,
            feedback: feedback.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CouncilVerdict {
    pub decision: Decision,
    pub consensus_feedback: String,
    pub judgments: Vec<(String, Judgment)>,
}

impl CouncilVerdict {
    pub fn accepted(&self) -> bool {
        self.decision == Decision::Yes
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CouncilError {
    #[error("prompt for {kind} needs context slot `{slot}`")]
    MissingContextSlot { kind: ArtifactKind, slot: &'static str },
    #[error("majority vote over zero judgments")]
    EmptyJudgments,
    #[error("council has no members")]
    EmptyCouncil,
    #[error("every council member failed; last error: {0}")]
    AllMembersUnavailable(String),
}

/// Context slots referenced by the evaluation prompts. Each kind reads only
/// the slots its prompt shows.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EvaluationContext {
    pub schema_text: Option<String>,
    pub user_query: Option<String>,
    pub prior_specs: Option<Vec<String>>,
    pub guidance: Option<String>,
    pub sql: Option<String>,
    pub execution_result: Option<String>,
}

fn slot<'a>(
    kind: ArtifactKind,
    name: &'static str,
    value: &'a Option<String>,
) -> Result<&'a str, CouncilError> {
    value
        .as_deref()
        .ok_or(CouncilError::MissingContextSlot { kind, slot: name })
}

pub fn build_prompt(
    kind: ArtifactKind,
    artifact: &str,
    context: &EvaluationContext,
) -> Result<String, CouncilError> {
    let schema = slot(kind, "schema", &context.schema_text)?;
    Ok(match kind {
        ArtifactKind::GuidedSpecification => {
            let query = slot(kind, "user_query", &context.user_query)?;
            let prior = context
                .prior_specs
                .as_deref()
                .ok_or(CouncilError::MissingContextSlot {
                    kind,
                    slot: "prior_specs",
                })?;
            prompts::fill(
                prompts::EVALUATE_SPECIFICATION,
                &[
                    ("schema", schema),
                    ("query", query),
                    ("prior_specs", &prompts::numbered_list(prior)),
                    ("artifact", artifact),
                ],
            )
        }
        ArtifactKind::SqlQuery => {
            let guidance = slot(kind, "guidance", &context.guidance)?;
            let execution = slot(kind, "execution_result", &context.execution_result)?;
            prompts::fill(
                prompts::EVALUATE_SQL,
                &[
                    ("schema", schema),
                    ("guidance", guidance),
                    ("artifact", artifact),
                    ("execution", execution),
                ],
            )
        }
        ArtifactKind::SqlTemplateAlignment => {
            let sql = slot(kind, "sql", &context.sql)?;
            prompts::fill(
                prompts::EVALUATE_ALIGNMENT,
                &[("schema", schema), ("sql", sql), ("artifact", artifact)],
            )
        }
        ArtifactKind::Summary => {
            let query = slot(kind, "user_query", &context.user_query)?;
            prompts::fill(
                prompts::EVALUATE_SUMMARY,
                &[("schema", schema), ("query", query), ("artifact", artifact)],
            )
        }
    })
}

/// Strips list bullets, quote markers and markdown emphasis from a line start.
fn strip_line_decoration(line: &str) -> &str {
    line.trim_start_matches(|c: char| c.is_whitespace() || matches!(c, '*' | '#' | '-' | '>' | '_' | '`'))
}

/// If `line` is `<label>: rest` (case-insensitive, decoration tolerated),
/// returns `rest`.
fn labelled<'a>(line: &'a str, label: &str) -> Option<&'a str> {
    let body = strip_line_decoration(line);
    match body.get(..label.len()) {
        Some(head) if head.eq_ignore_ascii_case(label) => {}
        _ => return None,
    }
    let rest = body[label.len()..].trim_start_matches(|c: char| c.is_whitespace() || matches!(c, '*' | '_'));
    rest.strip_prefix(':')
}

fn decision_word(rest: &str) -> Option<Decision> {
    let t = rest.trim_start_matches(|c: char| {
        c.is_whitespace() || matches!(c, '[' | '(' | '*' | '"' | '\'' | '`' | '_')
    });
    let word: String = t.chars().take_while(|c| c.is_ascii_alphabetic()).collect();
    match word.to_ascii_lowercase().as_str() {
        "yes" => Some(Decision::Yes),
        "no" => Some(Decision::No),
        _ => None,
    }
}

fn clean_feedback(rest: &str) -> String {
    let mut t = rest.trim().trim_matches(|c| matches!(c, '*' | '`')).trim();
    if t.starts_with('[') && t.ends_with(']') && t.len() >= 2 {
        t = t[1..t.len() - 1].trim();
    }
    t.to_string()
}

/// Parses a member response. The decision comes from the first
/// `Decision: YES|NO` line; feedback from the first `Feedback:` line (or the
/// line after it when the label stands alone). Responses without a readable
/// decision become NO.
pub fn parse_judgment(response: &str) -> Judgment {
    let lines: Vec<&str> = response.lines().collect();
    let decision = lines
        .iter()
        .find_map(|line| labelled(line, "decision").and_then(decision_word));
    let Some(decision) = decision else {
        let head: String = response.trim().chars().take(80).collect();
        return Judgment::new(Decision::No, format!("unparseable council response: {head}"));
    };
    let mut feedback = String::new();
    for (i, line) in lines.iter().enumerate() {
        if let Some(rest) = labelled(line, "feedback") {
            feedback = clean_feedback(rest);
            if feedback.is_empty() {
                if let Some(next) = lines[i + 1..].iter().find(|l| !l.trim().is_empty()) {
                    feedback = clean_feedback(next);
                }
            }
            break;
        }
    }
    if feedback.is_empty() {
        feedback = "no feedback given".to_string();
    }
    Judgment::new(decision, feedback)
}

/// YES iff strictly more than half the votes are YES.
pub fn majority_vote(decisions: &[Decision]) -> Result<Decision, CouncilError> {
    if decisions.is_empty() {
        return Err(CouncilError::EmptyJudgments);
    }
    let yes = decisions.iter().filter(|d| **d == Decision::Yes).count();
    Ok(if 2 * yes > decisions.len() {
        Decision::Yes
    } else {
        Decision::No
    })
}

fn dedup_feedback<'a>(items: impl Iterator<Item = &'a str>) -> Vec<&'a str> {
    let mut out: Vec<&str> = Vec::new();
    for item in items {
        if !out.contains(&item) {
            out.push(item);
        }
    }
    out
}

/// NO: the distinct NO-voter feedback, `"; "`-joined in input order.
/// YES: [`ACCEPTED_TEXT`], followed by `"; advisory: ..."` when some members
/// dissented.
pub fn aggregate_feedback(judgments: &[Judgment], decision: Decision) -> String {
    let dissent = dedup_feedback(
        judgments
            .iter()
            .filter(|j| j.decision == Decision::No)
            .map(|j| j.feedback.as_str()),
    );
    match decision {
        Decision::No if dissent.is_empty() => "rejected by council majority".to_string(),
        Decision::No => dissent.join("; "),
        Decision::Yes if dissent.is_empty() => ACCEPTED_TEXT.to_string(),
        Decision::Yes => format!("{ACCEPTED_TEXT}; advisory: {}", dissent.join("; ")),
    }
}

#[derive(Clone)]
pub struct CouncilMember {
    pub id: String,
    pub model_id: String,
    pub provider: Arc<dyn ChatProvider>,
}

impl fmt::Debug for CouncilMember {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CouncilMember")
            .field("id", &self.id)
            .field("model_id", &self.model_id)
            .field("provider", &self.provider.name())
            .finish()
    }
}

/// An ordered, immutable set of judges. Odd sizes avoid ties.
#[derive(Debug, Clone)]
pub struct Council {
    members: Vec<CouncilMember>,
    retry: RetryPolicy,
    max_tokens: u32,
}

impl Council {
    pub fn new(members: Vec<CouncilMember>) -> Result<Self, CouncilError> {
        if members.is_empty() {
            return Err(CouncilError::EmptyCouncil);
        }
        Ok(Self {
            members,
            retry: RetryPolicy::default(),
            max_tokens: DEFAULT_MAX_TOKENS,
        })
    }

    /// Every member backed by the same provider, one per model id.
    pub fn uniform(
        provider: Arc<dyn ChatProvider>,
        model_ids: &[&str],
    ) -> Result<Self, CouncilError> {
        Self::new(
            model_ids
                .iter()
                .map(|m| CouncilMember {
                    id: m.to_string(),
                    model_id: m.to_string(),
                    provider: provider.clone(),
                })
                .collect(),
        )
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }

    pub fn members(&self) -> &[CouncilMember] {
        &self.members
    }

    pub fn member_ids(&self) -> Vec<String> {
        self.members.iter().map(|m| m.id.clone()).collect()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Wraps every member provider, e.g. to meter calls.
    pub fn map_providers(
        &self,
        mut wrap: impl FnMut(Arc<dyn ChatProvider>) -> Arc<dyn ChatProvider>,
    ) -> Self {
        let mut out = self.clone();
        for member in &mut out.members {
            member.provider = wrap(member.provider.clone());
        }
        out
    }

    /// One round: the same prompt to every member in order, then vote and
    /// aggregate. A member whose call fails after retries votes NO.
    pub fn judge(
        &self,
        kind: ArtifactKind,
        artifact: &str,
        context: &EvaluationContext,
    ) -> Result<CouncilVerdict, CouncilError> {
        let prompt = build_prompt(kind, artifact, context)?;
        let mut judgments = Vec::with_capacity(self.members.len());
        let mut last_error = None;
        for member in &self.members {
            let request = ChatRequest {
                max_tokens: self.max_tokens,
                ..ChatRequest::new(member.model_id.clone(), prompt.clone())
            };
            let judgment = match with_retry(member.provider.as_ref(), &request, &self.retry) {
                Ok(response) => parse_judgment(&response.text),
                Err(err) => {
                    log::warn!("council member {} unavailable: {err}", member.id);
                    last_error = Some(err.to_string());
                    Judgment::new(Decision::No, MEMBER_UNAVAILABLE)
                }
            };
            judgments.push((member.id.clone(), judgment));
        }
        if let Some(err) = last_error {
            if judgments.iter().all(|(_, j)| j.feedback == MEMBER_UNAVAILABLE) {
                return Err(CouncilError::AllMembersUnavailable(err));
            }
        }
        let decisions: Vec<Decision> = judgments.iter().map(|(_, j)| j.decision).collect();
        let decision = majority_vote(&decisions)?;
        let plain: Vec<Judgment> = judgments.iter().map(|(_, j)| j.clone()).collect();
        Ok(CouncilVerdict {
            decision,
            consensus_feedback: aggregate_feedback(&plain, decision),
            judgments,
        })
    }
}
