//! Query-focused table summarization through reusable offline templates.
//!
//! A template pairs council-validated SQL with a Jinja2-style rendering
//! program. Building one takes model calls; applying it to any table with
//! the same schema takes none.

pub mod council;
pub mod eval;
pub mod llm;
pub mod prompts;
pub mod schema;
pub mod sqlexec;
pub mod store;
pub mod template;
pub mod workflow;

pub use council::{
    majority_vote, parse_judgment, ArtifactKind, Council, CouncilError, CouncilMember,
    CouncilVerdict, Decision, EvaluationContext, Judgment,
};
pub use llm::{ChatProvider, LlmError, Meter, RetryPolicy, ScriptEntry, ScriptedBackend};
pub use schema::{
    load_table, render_schema_text, schema_fingerprint, Column, DataType, Table, TableFormat,
    TableSchema, Value,
};
pub use sqlexec::{SqlExecutionResult, SqlQuery, SqlSession};
pub use store::{DirStore, MemoryStore, StoreError, StoreKey, TemplateStore};
pub use template::{AlignmentReport, Jinja2Template, RenderBinding, TemplateError};
pub use workflow::{
    apply_offline_template, Agent, GuidedSpecification, OfflineTemplate, Pipeline, Summary,
    SummarySource, WorkflowConfig, WorkflowError,
};
