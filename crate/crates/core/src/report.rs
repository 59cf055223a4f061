//! Machine-readable verification reports shared by the command line and the
//! Python bindings.

use serde::Serialize;
use serde_json::Value;

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct Check {
    pub name: String,
    pub max_error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    /// `pass` is `max_error <= tolerance`; a NaN error fails.
    pub fn new(name: impl Into<String>, max_error: f64, tolerance: f64) -> Self {
        Self { name: name.into(), max_error, tolerance, pass: max_error <= tolerance }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct VerificationReport {
    pub command: String,
    pub parameters: Value,
    pub checks: Vec<Check>,
    /// Extra named values (constants, ratios) reported alongside the checks.
    pub values: serde_json::Map<String, Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
}

impl VerificationReport {
    pub fn new(command: impl Into<String>, parameters: Value) -> Self {
        Self {
            command: command.into(),
            parameters,
            checks: Vec::new(),
            values: serde_json::Map::new(),
            wall_time_s: None,
        }
    }

    pub fn check(&mut self, name: impl Into<String>, max_error: f64, tolerance: f64) -> &mut Self {
        self.checks.push(Check::new(name, max_error, tolerance));
        self
    }

    pub fn value(&mut self, name: impl Into<String>, v: impl Serialize) -> &mut Self {
        self.values.insert(name.into(), serde_json::to_value(v).unwrap_or(Value::Null));
        self
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pass_rule() {
        assert!(Check::new("a", 1e-12, 1e-12).pass);
        assert!(!Check::new("a", 2e-12, 1e-12).pass);
        assert!(!Check::new("a", f64::NAN, 1.0).pass);
        let mut r = VerificationReport::new("x", serde_json::json!({"delta": 0.2}));
        r.check("ok", 0.0, 1.0).value("c", 0.25);
        assert!(r.passed());
        let s = r.to_json();
        assert!(s.contains("\"command\": \"x\"") && !s.contains("wall_time"));
        assert_eq!(s, r.to_json());
    }
}
