use std::fmt;

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorClass {
    Config,
    Input,
    Validation,
}

impl ErrorClass {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorClass::Config => 2,
            ErrorClass::Input => 3,
            ErrorClass::Validation => 4,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorClass::Config => "config",
            ErrorClass::Input => "input",
            ErrorClass::Validation => "validation",
        }
    }
}

impl fmt::Display for ErrorClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, thiserror::Error)]
#[error("{class} error: {message}")]
pub struct CliError {
    pub class: ErrorClass,
    pub message: String,
}

impl CliError {
    pub fn new(class: ErrorClass, message: impl Into<String>) -> Self {
        CliError {
            class,
            message: message.into(),
        }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new(ErrorClass::Config, message)
    }

    pub fn input(message: impl Into<String>) -> Self {
        Self::new(ErrorClass::Input, message)
    }

    pub fn validation(message: impl Into<String>) -> Self {
        Self::new(ErrorClass::Validation, message)
    }

    /// Single-line JSON for stderr.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).unwrap_or_else(|_| format!("{{\"class\":\"{}\"}}", self.class))
    }
}

impl From<rowcrop::Error> for CliError {
    fn from(e: rowcrop::Error) -> Self {
        use rowcrop::Error::*;
        let class = match &e {
            Io { .. } | Decode { .. } | Georeference { .. } | Parse { .. } => ErrorClass::Input,
            InvalidInput(_) | OutOfBounds { .. } | InsufficientData(_) | UndefinedOrientation | EmptyGrid(_) => {
                ErrorClass::Validation
            }
        };
        CliError::new(class, e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
