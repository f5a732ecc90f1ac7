use serde::Serialize;
use std::fmt;

pub const EXIT_IO: i32 = 1;
pub const EXIT_SCHEMA: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_RESOURCE: i32 = 4;

/// Machine-readable failure: printed to stderr as one JSON object.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Failure {
    pub code: i32,
    pub module: String,
    pub message: String,
}

impl Failure {
    pub fn new(code: i32, module: &str, message: impl Into<String>) -> Self {
        Failure { code, module: module.to_string(), message: message.into() }
    }

    pub fn schema(message: impl Into<String>) -> Self {
        Failure::new(EXIT_SCHEMA, "config", message)
    }

    pub fn io(message: impl Into<String>) -> Self {
        Failure::new(EXIT_IO, "emit", message)
    }

    /// Maps a core error onto the exit-code classes, tagging the module that raised it.
    pub fn core(module: &str, e: cohpath_core::Error) -> Self {
        let code = if e.is_resource_limit() {
            EXIT_RESOURCE
        } else if e.is_numerical() {
            EXIT_NUMERICAL
        } else {
            EXIT_SCHEMA
        };
        Failure::new(code, module, e.to_string())
    }

    pub fn to_json(&self) -> String {
        serde_json::json!({ "error": self }).to_string()
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}: {}", self.code, self.module, self.message)
    }
}

impl std::error::Error for Failure {}

pub type CliResult<T> = Result<T, Failure>;

/// Attaches a module name to core results.
pub trait InModule<T> {
    fn in_module(self, module: &str) -> CliResult<T>;
}

impl<T> InModule<T> for cohpath_core::Result<T> {
    fn in_module(self, module: &str) -> CliResult<T> {
        self.map_err(|e| Failure::core(module, e))
    }
}
