use std::fmt;

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_MODEL: i32 = 4;

/// A command failure carrying its process exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError { code: EXIT_USAGE, message: msg.into() }
    }

    pub fn data(msg: impl Into<String>) -> Self {
        CliError { code: EXIT_DATA, message: msg.into() }
    }

    pub fn model(msg: impl Into<String>) -> Self {
        CliError { code: EXIT_MODEL, message: msg.into() }
    }

    pub fn kind(&self) -> &'static str {
        match self.code {
            EXIT_USAGE => "usage",
            EXIT_MODEL => "model",
            _ => "data",
        }
    }

    /// `error code=<n> kind=<kind>: <message>` on a single line.
    pub fn line(&self) -> String {
        let msg: String = self.message.split_whitespace().collect::<Vec<_>>().join(" ");
        format!("error code={} kind={}: {msg}", self.code, self.kind())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<hometrace::Error> for CliError {
    fn from(e: hometrace::Error) -> Self {
        if e.is_model_error() {
            CliError::model(e.to_string())
        } else {
            CliError::data(e.to_string())
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::data(e.to_string())
    }
}
