//! JSON run report.
//!
//! Schema (version 1):
//!
//! ```text
//! {
//!   "schema_version": 1,
//!   "command": "<subcommand>",
//!   "inputs_digest": "<sha256 hex of command, config and referenced files>",
//!   "exit_code": 0 | 1 | 2 | 3,
//!   "verdict": { ... },          // deterministic for identical inputs
//!   "certificates": [ ... ],     // deterministic for identical inputs
//!   "timings": { "total_ms": <float> },
//!   "artifacts": [ "<path>", ... ]
//! }
//! ```

use serde::Serialize;
use serde_json::Value;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Timings {
    pub total_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub command: String,
    pub inputs_digest: String,
    pub exit_code: i32,
    pub verdict: Value,
    pub certificates: Vec<Value>,
    pub timings: Timings,
    pub artifacts: Vec<String>,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// The verdict section alone, as compared across repeated runs.
    pub fn verdict_json(&self) -> String {
        serde_json::to_string(&self.verdict).expect("verdict serializes")
    }
}
