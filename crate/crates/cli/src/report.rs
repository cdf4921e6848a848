//! The machine-readable result document every command emits.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NEGATIVE: i32 = 2;
pub const EXIT_UNDETERMINED: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Success,
    Negative,
    Undetermined,
}

impl Outcome {
    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Success => EXIT_OK,
            Outcome::Negative => EXIT_NEGATIVE,
            Outcome::Undetermined => EXIT_UNDETERMINED,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub command: String,
    pub tool_version: String,
    pub input_digest: String,
    pub outcome: Outcome,
    /// Command-specific status word, e.g. `feasible` or `violated`.
    pub status: String,
    pub exit_code: i32,
    pub wall_time_ms: f64,
    pub details: Value,
    pub warnings: Vec<String>,
}

impl Report {
    pub fn new(command: &str, input_digest: String) -> Self {
        Self {
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            input_digest,
            outcome: Outcome::Success,
            status: String::new(),
            exit_code: EXIT_OK,
            wall_time_ms: 0.0,
            details: Value::Null,
            warnings: Vec::new(),
        }
    }

    pub fn finish(&mut self, outcome: Outcome, status: impl Into<String>) {
        self.outcome = outcome;
        self.status = status.into();
        self.exit_code = outcome.exit_code();
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_json() + "\n")
    }
}

/// Matrix rows in a form that round-trips through the problem schema.
pub fn rows(m: &lure_contract::Matrix) -> Value {
    serde_json::to_value(m.to_rows()).expect("finite rows serialize")
}
