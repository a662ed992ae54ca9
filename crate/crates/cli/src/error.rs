use facts_core::eval::{DatasetError, EvalError};
use facts_core::{StoreError, WorkflowError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("input error: {0}")]
    Input(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Workflow(#[from] WorkflowError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("cannot write {path}: {source}")]
    Output {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Experiment(String),
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Workflow(w) => CliError::Workflow(w),
            EvalError::EmptyOutcomes | EvalError::InvalidArgument(_) => {
                CliError::Input(e.to_string())
            }
            EvalError::Invariant(msg) => CliError::Experiment(msg),
        }
    }
}

impl CliError {
    /// 0 ok, 1 other failure, 2 input or config, 3 template application,
    /// 4 patience exhausted.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Input(_) | CliError::Dataset(_) => 2,
            CliError::Workflow(w) => match w {
                WorkflowError::FingerprintMismatch { .. } | WorkflowError::Application(_) => 3,
                e if e.is_patience_exhausted() => 4,
                WorkflowError::InvalidConfig(_)
                | WorkflowError::NoTables
                | WorkflowError::Tables(_) => 2,
                _ => 1,
            },
            CliError::Store(StoreError::Corruption { .. } | StoreError::UnsupportedVersion(_)) => 2,
            CliError::Store(_) | CliError::Output { .. } | CliError::Experiment(_) => 1,
        }
    }
}
