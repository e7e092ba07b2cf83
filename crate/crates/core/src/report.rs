//! Machine-readable command reports.

use std::collections::BTreeSet;

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Item {
    pub name: String,
    pub kind: String,
    pub residuals: Vec<String>,
    pub verdict: String,
}

impl Item {
    pub fn new(name: impl Into<String>, kind: &str, residuals: Vec<String>, verdict: impl Into<String>) -> Item {
        Item { name: name.into(), kind: kind.to_string(), residuals, verdict: verdict.into() }
    }
}

#[derive(Clone, Debug, Default)]
pub struct Report {
    pub command: String,
    pub inputs: Vec<u8>,
    pub passed: bool,
    pub items: Vec<Item>,
    pub findings: Vec<String>,
    pub dimension_set: Option<BTreeSet<usize>>,
}

/// Hex SHA-256.
pub fn digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

impl Report {
    pub fn new(command: &str) -> Report {
        Report { command: command.to_string(), passed: true, ..Report::default() }
    }

    pub fn add_input(&mut self, label: &str, bytes: &[u8]) {
        self.inputs.extend_from_slice(label.as_bytes());
        self.inputs.push(0);
        self.inputs.extend_from_slice(bytes);
        self.inputs.push(0);
    }

    pub fn status(&self) -> &'static str {
        if self.passed {
            "pass"
        } else {
            "fail"
        }
    }

    /// Keys come out sorted since `serde_json` maps are ordered.
    pub fn to_json(&self) -> Value {
        let items: Vec<Value> = self
            .items
            .iter()
            .map(|i| json!({ "name": i.name, "kind": i.kind, "residuals": i.residuals, "verdict": i.verdict }))
            .collect();
        let mut v = json!({
            "command": self.command,
            "inputs_digest": digest(&self.inputs),
            "status": self.status(),
            "items": items,
            "findings": self.findings,
        });
        if let Some(d) = &self.dimension_set {
            v["dimension_set"] = json!(d.iter().collect::<Vec<_>>());
        }
        v
    }

    pub fn json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_json()).expect("report serialises");
        s.push('\n');
        s
    }
}
