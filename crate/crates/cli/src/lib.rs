//! Command-line front end for the jet engine: JSON metric specifications in,
//! deterministic JSON reports out.

pub mod commands;
pub mod expr;
pub mod report;
pub mod spec;
pub mod suite;

pub use commands::{run_command, run_or_report, Command, RunOptions};
pub use report::{Check, Report, Value};
pub use spec::{conformal_rescale, MetricSpec, Mode};
pub use suite::{parse_suite, run_suite, Suite, SuiteReport};

use willmore_core::{EngineError, Rational};

pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Process exit codes.
pub mod exit {
    pub const PASSED: i32 = 0;
    pub const CHECKS_FAILED: i32 = 1;
    pub const INVALID_INPUT: i32 = 2;
    pub const ENGINE_ERROR: i32 = 3;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{}", located(*line, *column, message))]
    Parse { line: usize, column: usize, message: String },
    #[error("invalid spec: {0}")]
    Invalid(String),
    #[error("{module}: {source}")]
    Engine {
        module: &'static str,
        #[source]
        source: EngineError,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn located(line: usize, column: usize, message: &str) -> String {
    if line == 0 {
        message.to_string()
    } else {
        format!("line {line}, column {column}: {message}")
    }
}

impl From<EngineError> for CliError {
    fn from(source: EngineError) -> Self {
        CliError::Engine { module: "engine", source }
    }
}

impl CliError {
    pub fn engine(module: &'static str, source: EngineError) -> Self {
        CliError::Engine { module, source }
    }

    pub fn from_json(e: serde_json::Error) -> Self {
        CliError::Parse { line: e.line(), column: e.column(), message: e.to_string() }
    }

    fn in_instance(self, i: usize) -> Self {
        match self {
            CliError::Invalid(m) => CliError::Invalid(format!("instance {i}: {m}")),
            CliError::Parse { line, column, message } => {
                CliError::Parse { line, column, message: format!("instance {i}: {message}") }
            }
            e => e,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Engine { .. } => exit::ENGINE_ERROR,
            _ => exit::INVALID_INPUT,
        }
    }
}

/// Command-line overrides applied to every spec.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub order: Option<usize>,
    pub mode: Option<Mode>,
    pub base_point: Option<Vec<Rational>>,
}

impl Overrides {
    pub fn apply(&self, mut spec: MetricSpec) -> Result<MetricSpec, CliError> {
        if let Some(n) = self.order {
            spec.order = n;
        }
        if let Some(m) = self.mode {
            spec.mode = m;
        }
        if let Some(p) = &self.base_point {
            spec = spec.with_base_point(p.clone())?;
        }
        Ok(spec)
    }
}

/// Parses `"0,1/2,0"` into a point.
pub fn parse_point(text: &str) -> Result<Vec<Rational>, CliError> {
    text.split(',')
        .map(|x| x.trim().parse().map_err(|_| CliError::Invalid(format!("invalid coordinate `{x}` in base point"))))
        .collect()
}
