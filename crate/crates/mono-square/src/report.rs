//! Machine-readable run reports emitted by the command-line front end.

use serde::{Deserialize, Serialize};

/// A self-contained record of one command invocation: re-running with the
/// embedded parameters reproduces the payload byte for byte (timing aside).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub parameters: serde_json::Value,
    pub result: serde_json::Value,
    pub timing_ms: u64,
    pub version: String,
}

impl RunReport {
    pub fn new(
        command: &str,
        parameters: serde_json::Value,
        result: serde_json::Value,
        timing_ms: u64,
    ) -> RunReport {
        RunReport {
            command: command.to_string(),
            parameters,
            result,
            timing_ms,
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }
}
