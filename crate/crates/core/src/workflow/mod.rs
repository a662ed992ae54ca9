//! The three-stage template builder and its reuse path.
//!
//! [`Pipeline::build_offline_template`] runs specification, SQL and template
//! stages, each gated by the council. [`apply_offline_template`] replays a
//! finished template on new tables without any model calls, and
//! [`Pipeline::summarize`] puts a store lookup in front of both.

mod agent;
mod pipeline;
mod stages;

use std::fmt;
use std::sync::Arc;
use std::time::Duration;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::council::CouncilError;
use crate::llm::LlmError;
use crate::sqlexec::{SqlError, SqlQuery};
use crate::template::Jinja2Template;

pub use agent::{parse_specification, parse_sql_section, parse_template_response, Agent};
pub use pipeline::{apply_offline_template, Pipeline};
pub use stages::{
    generate_specification, revise_specification, stage1, stage2, stage3, sufficient,
    Stage1Outcome, Stage2Outcome, Stage3Outcome,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpecificationKind {
    GuidedQuestion,
    FilteringRule,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GuidedSpecification {
    pub kind: SpecificationKind,
    pub text: String,
}

impl GuidedSpecification {
    /// Questions end with `?`; everything else is a filtering rule.
    pub fn classify(text: impl Into<String>) -> Self {
        let text = text.into();
        let kind = if text.trim_end().ends_with('?') {
            SpecificationKind::GuidedQuestion
        } else {
            SpecificationKind::FilteringRule
        };
        Self { kind, text }
    }
}

/// A worked example shown to the template generator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Demonstration {
    pub schema_text: String,
    pub query: String,
    pub summary: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorkflowConfig {
    /// Upper bound on specification generation rounds.
    pub max_specs: usize,
    pub spec_patience: usize,
    pub sql_patience: usize,
    pub template_patience: usize,
    pub min_specs_for_sufficiency: usize,
    /// Zero to three examples; more are rejected by [`WorkflowConfig::validate`].
    pub demos: Vec<Demonstration>,
    pub validate_final_summary: bool,
}

impl Default for WorkflowConfig {
    fn default() -> Self {
        Self {
            max_specs: 10,
            spec_patience: 3,
            sql_patience: 3,
            template_patience: 3,
            min_specs_for_sufficiency: 2,
            demos: Vec::new(),
            validate_final_summary: true,
        }
    }
}

impl WorkflowConfig {
    /// No refinement: every stage gets exactly one attempt.
    pub fn single_shot() -> Self {
        Self {
            spec_patience: 0,
            sql_patience: 1,
            template_patience: 1,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), WorkflowError> {
        let bad = |what: &str| Err(WorkflowError::InvalidConfig(what.to_string()));
        if self.max_specs == 0 {
            return bad("max_specs must be positive");
        }
        if self.sql_patience == 0 || self.template_patience == 0 {
            return bad("sql and template patience must be positive");
        }
        if self.min_specs_for_sufficiency == 0 {
            return bad("min_specs_for_sufficiency must be positive");
        }
        if self.demos.len() > 3 {
            return bad("at most three demonstrations");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IterationCounts {
    pub spec_generations: usize,
    pub spec_revisions: usize,
    pub spec_judge_rounds: usize,
    pub sufficiency_probes: usize,
    pub sql_rounds: usize,
    pub template_rounds: usize,
    pub llm_calls: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    /// RFC 3339, second precision.
    pub created_at: String,
    pub council_members: Vec<String>,
    pub accepted_specifications: Vec<GuidedSpecification>,
    pub iterations: IterationCounts,
    #[serde(default)]
    pub warnings: Vec<String>,
}

/// A validated SQL/template pair bound to a query and a schema list.
#[derive(Debug, Clone, PartialEq)]
pub struct OfflineTemplate {
    pub user_query: String,
    /// One per input table, in input order.
    pub schema_fingerprints: Vec<String>,
    pub sql_queries: Vec<SqlQuery>,
    pub jinja2_template: Jinja2Template,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SummarySource {
    /// Template built during this call.
    Built,
    /// Template found in the store.
    StoreHit,
    /// Template supplied directly by the caller.
    Applied,
}

impl fmt::Display for SummarySource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SummarySource::Built => "built",
            SummarySource::StoreHit => "store hit",
            SummarySource::Applied => "applied",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub text: String,
    pub llm_calls_used: usize,
    pub wall_time: Duration,
    pub source: SummarySource,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Specification,
    Sql,
    Template,
    Summary,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Specification => "stage1/specification",
            Stage::Sql => "stage2/sql",
            Stage::Template => "stage3/template",
            Stage::Summary => "summary",
        })
    }
}

#[derive(Debug, Error)]
pub enum WorkflowError {
    #[error("invalid workflow config: {0}")]
    InvalidConfig(String),
    #[error("at least one table is required")]
    NoTables,
    #[error("[{}] no specification was accepted in {rounds} rounds", Stage::Specification)]
    EmptySpecificationSet { rounds: usize },
    #[error("[{}] patience exhausted; last feedback: {last_feedback}; last execution: {last_execution}", Stage::Sql)]
    SqlPatienceExhausted {
        last_feedback: String,
        last_execution: String,
    },
    #[error("[{}] patience exhausted; last problems: {}; last feedback: {last_feedback}", Stage::Template, .last_problems.join("; "))]
    TemplatePatienceExhausted {
        last_problems: Vec<String>,
        last_feedback: String,
    },
    #[error("[{stage}] model call failed: {source}")]
    Llm {
        stage: Stage,
        #[source]
        source: LlmError,
    },
    #[error("[{stage}] council failed: {source}")]
    Council {
        stage: Stage,
        #[source]
        source: CouncilError,
    },
    #[error("table registration failed: {0}")]
    Tables(#[from] SqlError),
    #[error("schema fingerprint mismatch: expected {expected:?}, got {got:?}")]
    FingerprintMismatch {
        expected: Vec<String>,
        got: Vec<String>,
    },
    #[error("template application failed: {0}")]
    Application(String),
    #[error(transparent)]
    Store(#[from] crate::store::StoreError),
}

impl WorkflowError {
    pub fn stage(&self) -> Option<Stage> {
        match self {
            WorkflowError::EmptySpecificationSet { .. } => Some(Stage::Specification),
            WorkflowError::SqlPatienceExhausted { .. } => Some(Stage::Sql),
            WorkflowError::TemplatePatienceExhausted { .. } => Some(Stage::Template),
            WorkflowError::Llm { stage, .. } | WorkflowError::Council { stage, .. } => Some(*stage),
            _ => None,
        }
    }

    pub fn is_patience_exhausted(&self) -> bool {
        matches!(
            self,
            WorkflowError::EmptySpecificationSet { .. }
                | WorkflowError::SqlPatienceExhausted { .. }
                | WorkflowError::TemplatePatienceExhausted { .. }
        )
    }
}

pub trait Clock: Send + Sync {
    fn now(&self) -> DateTime<Utc>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }
}

/// Always returns the same instant, for reproducible builds.
#[derive(Debug, Clone, Copy)]
pub struct FixedClock(pub DateTime<Utc>);

impl Clock for FixedClock {
    fn now(&self) -> DateTime<Utc> {
        self.0
    }
}

impl FixedClock {
    pub fn epoch() -> Self {
        Self(DateTime::<Utc>::UNIX_EPOCH)
    }
}

pub(crate) fn timestamp(clock: &Arc<dyn Clock>) -> String {
    clock.now().to_rfc3339_opts(SecondsFormat::Secs, true)
}

/// Trim, collapse internal whitespace, lowercase.
pub fn normalize_query(query: &str) -> String {
    query
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classify_specifications() {
        assert_eq!(
            GuidedSpecification::classify("Exclude rows where category='expense'").kind,
            SpecificationKind::FilteringRule
        );
        assert_eq!(
            GuidedSpecification::classify("Which columns hold names? ").kind,
            SpecificationKind::GuidedQuestion
        );
    }

    #[test]
    fn defaults() {
        let c = WorkflowConfig::default();
        assert_eq!(
            (c.max_specs, c.spec_patience, c.sql_patience, c.template_patience),
            (10, 3, 3, 3)
        );
        assert_eq!(c.min_specs_for_sufficiency, 2);
        assert!(c.validate_final_summary);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn normalization() {
        assert_eq!(normalize_query("  Show   ALL\tnames \n"), "show all names");
    }

    #[test]
    fn config_validation() {
        let mut c = WorkflowConfig {
            demos: vec![
                Demonstration {
                    schema_text: String::new(),
                    query: String::new(),
                    summary: String::new(),
                };
                4
            ],
            ..WorkflowConfig::default()
        };
        assert!(c.validate().is_err());
        c.demos.clear();
        c.sql_patience = 0;
        assert!(c.validate().is_err());
    }
}
