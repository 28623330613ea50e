//! Report envelope shared by every subcommand.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Machine- and human-readable command report. Maps are ordered, so the JSON
/// form is byte-stable for identical inputs.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ReportEnvelope {
    pub command: String,
    pub inputs_echo: BTreeMap<String, Value>,
    pub results: BTreeMap<String, Value>,
    pub warnings: Vec<String>,
}

impl ReportEnvelope {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.to_string(),
            ..Self::default()
        }
    }

    pub fn input(&mut self, key: &str, value: impl Serialize) -> &mut Self {
        self.inputs_echo.insert(key.to_string(), to_value(value));
        self
    }

    pub fn result(&mut self, key: &str, value: impl Serialize) -> &mut Self {
        self.results.insert(key.to_string(), to_value(value));
        self
    }

    pub fn warn(&mut self, msg: impl Into<String>) -> &mut Self {
        self.warnings.push(msg.into());
        self
    }

    /// One JSON object on one line.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("report values are plain JSON")
    }

    pub fn parse_json_line(line: &str) -> serde_json::Result<Self> {
        serde_json::from_str(line)
    }

    /// Aligned `key  value` text.
    pub fn to_text(&self) -> String {
        let width = self
            .inputs_echo
            .keys()
            .chain(self.results.keys())
            .map(String::len)
            .max()
            .unwrap_or(0);
        let mut out = String::new();
        let _ = writeln!(out, "{}", self.command);
        for (title, map) in [("inputs", &self.inputs_echo), ("results", &self.results)] {
            if map.is_empty() {
                continue;
            }
            let _ = writeln!(out, "  {title}:");
            for (k, v) in map {
                let _ = writeln!(out, "    {k:<width$}  {}", plain(v));
            }
        }
        if !self.warnings.is_empty() {
            let _ = writeln!(out, "  warnings:");
            for w in &self.warnings {
                let _ = writeln!(out, "    - {w}");
            }
        }
        out
    }
}

/// Non-finite floats have no JSON form; they are written as strings.
fn to_value(value: impl Serialize) -> Value {
    serde_json::to_value(value).unwrap_or(Value::Null)
}

fn plain(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => "-".to_string(),
        other => other.to_string(),
    }
}

/// Serializes a float, writing infinities as `"inf"` / `"-inf"`.
pub fn float(x: f64) -> Value {
    if x.is_finite() {
        Value::from(x)
    } else if x.is_nan() {
        Value::Null
    } else if x > 0.0 {
        Value::from("inf")
    } else {
        Value::from("-inf")
    }
}
