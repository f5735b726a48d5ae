use std::fmt;

use serde_json::json;

pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NONCONVERGED: i32 = 4;

#[derive(Debug)]
pub enum CliError {
    Config { field: Option<String>, message: String },
    Data(String),
    NonConvergence(String),
    Replay(String),
}

impl CliError {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Config {
            field: Some(field.into()),
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => EXIT_CONFIG,
            CliError::Data(_) => EXIT_DATA,
            CliError::NonConvergence(_) => EXIT_NONCONVERGED,
            CliError::Replay(_) => EXIT_FAILURE,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Config { .. } => "config",
            CliError::Data(_) => "data",
            CliError::NonConvergence(_) => "non_convergence",
            CliError::Replay(_) => "replay_mismatch",
        }
    }

    /// Machine-readable record printed on stderr.
    pub fn record(&self) -> serde_json::Value {
        let mut v = json!({
            "error": self.kind(),
            "exit_code": self.exit_code(),
            "message": self.to_string(),
        });
        if let CliError::Config { field: Some(f), .. } = self {
            v["field"] = json!(f);
        }
        v
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config { field: Some(field), message } => write!(f, "{field}: {message}"),
            CliError::Config { field: None, message } => f.write_str(message),
            CliError::Data(m) | CliError::NonConvergence(m) | CliError::Replay(m) => f.write_str(m),
        }
    }
}

impl From<xgbias::Error> for CliError {
    fn from(e: xgbias::Error) -> Self {
        use xgbias::Error as E;
        match e {
            E::InvalidArgument(m) => CliError::Config { field: None, message: m },
            E::SingularHessian | E::Experiment(_) => CliError::NonConvergence(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
