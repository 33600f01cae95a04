use std::fmt;

/// Failure classes, one per process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Bad arguments, configuration or input records.
    Validation,
    /// An upstream stage was never built.
    Missing,
    /// An upstream stage was built from inputs that have since changed.
    Stale,
    /// The LLM endpoint or another outside service failed.
    External,
}

#[derive(Debug, Clone)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
    /// Command that fixes a missing or stale upstream.
    pub rebuild: Option<String>,
}

impl CliError {
    pub fn validation(message: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::Validation,
            message: message.into(),
            rebuild: None,
        }
    }

    pub fn external(message: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::External,
            message: message.into(),
            rebuild: None,
        }
    }

    pub fn missing(message: impl Into<String>, rebuild: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::Missing,
            message: message.into(),
            rebuild: Some(rebuild.into()),
        }
    }

    pub fn stale(message: impl Into<String>, rebuild: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::Stale,
            message: message.into(),
            rebuild: Some(rebuild.into()),
        }
    }

    pub fn io(what: impl fmt::Display, e: std::io::Error) -> Self {
        Self::validation(format!("{what}: {e}"))
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            ErrorKind::Validation => 1,
            ErrorKind::Missing | ErrorKind::Stale => 2,
            ErrorKind::External => 3,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "ok": false,
            "error": self.message,
            "exit_code": self.exit_code(),
            "rebuild": self.rebuild,
        })
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)?;
        if let Some(cmd) = &self.rebuild {
            write!(f, "; rebuild with: {cmd}")?;
        }
        Ok(())
    }
}

impl std::error::Error for CliError {}

pub type CliResult<T> = Result<T, CliError>;
