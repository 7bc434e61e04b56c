//! Reports: a human-readable text block and a byte-deterministic JSON
//! document.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::Duration;

use deforma_core::check::Check;
use deforma_core::scalar::format_rat;
use deforma_core::{Jet, NuJet, Scalar, EXACT};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

pub const SCHEMA: u32 = 1;

#[derive(Clone, Debug, Serialize)]
pub struct Inputs {
    /// SHA-256 of the spec file bytes.
    pub spec_sha256: String,
    pub order: i32,
    pub degree: i32,
    pub seed: u64,
    pub args: Vec<String>,
}

impl Inputs {
    pub fn new(spec_bytes: &[u8], order: i32, degree: i32, seed: u64, args: Vec<String>) -> Inputs {
        let digest = Sha256::digest(spec_bytes);
        let spec_sha256 = digest.iter().fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        });
        Inputs { spec_sha256, order, degree, seed, args }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CheckRecord {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl From<&Check> for CheckRecord {
    fn from(c: &Check) -> CheckRecord {
        CheckRecord { name: c.name.clone(), pass: c.pass, detail: c.detail.clone() }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub schema: u32,
    pub command: String,
    pub inputs: Inputs,
    pub outputs: BTreeMap<String, Value>,
    pub checks: Vec<CheckRecord>,
    pub status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Wall-clock time per stage; text output only.
    #[serde(skip)]
    pub timings: Vec<(String, Duration)>,
}

impl Report {
    pub fn new(command: impl Into<String>, inputs: Inputs) -> Report {
        Report {
            schema: SCHEMA,
            command: command.into(),
            inputs,
            outputs: BTreeMap::new(),
            checks: Vec::new(),
            status: "pass",
            error: None,
            timings: Vec::new(),
        }
    }

    pub fn output(&mut self, key: &str, v: Value) {
        self.outputs.insert(key.to_string(), v);
    }

    pub fn push(&mut self, c: &Check) {
        if !c.pass {
            self.status = "fail";
        }
        self.checks.push(c.into());
    }

    pub fn set_error(&mut self, msg: String) {
        self.status = "error";
        self.error = Some(msg);
    }

    pub fn passed(&self) -> bool {
        self.status == "pass"
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("deforma {}\n", self.command);
        let _ = writeln!(
            s,
            "spec sha256 {}, order {}, degree {}",
            self.inputs.spec_sha256, self.inputs.order, self.inputs.degree
        );
        for (k, v) in &self.outputs {
            let _ = writeln!(s, "{k}: {}", v.get("text").and_then(Value::as_str).unwrap_or(&v.to_string()));
        }
        for c in &self.checks {
            let tag = if c.pass { "PASS" } else { "FAIL" };
            let _ = writeln!(s, "{tag} {}: {}", c.name, c.detail);
        }
        for (name, t) in &self.timings {
            let _ = writeln!(s, "time {name}: {:.3} s", t.as_secs_f64());
        }
        if let Some(e) = &self.error {
            let _ = writeln!(s, "error: {e}");
        }
        let failed = self.checks.iter().filter(|c| !c.pass).count();
        let _ = writeln!(s, "result: {} ({} checks, {failed} failed)", self.status, self.checks.len());
        s
    }
}

pub fn scalar_json(c: &Scalar) -> Value {
    json!({ "re": format_rat(&c.re), "im": format_rat(&c.im) })
}

/// Coefficients in display order, with the validity degree when the jet
/// is not an exact polynomial.
pub fn jet_json(j: &Jet) -> Value {
    let vars = j.vars();
    let coeffs: Vec<Value> = j
        .sorted_terms()
        .iter()
        .map(|(m, c)| json!({ "monomial": m.render(&vars), "re": format_rat(&c.re), "im": format_rat(&c.im) }))
        .collect();
    let valid = if j.valid() == EXACT { Value::Null } else { json!(j.valid()) };
    json!({ "valid_through": valid, "coefficients": coeffs, "text": j.to_string() })
}

pub fn series_json(x: &NuJet) -> Value {
    let terms: Vec<Value> = x
        .terms()
        .iter()
        .map(|(k, j)| {
            let mut v = jet_json(j);
            v["nu"] = json!(k);
            v
        })
        .collect();
    let cap = if x.cap() == EXACT { Value::Null } else { json!(x.cap()) };
    json!({ "log_nu": x.log_nu, "known_through": cap, "terms": terms, "text": x.render() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use deforma_core::{Nu, VarSet};

    #[test]
    fn deterministic_json() {
        let v = VarSet::base(1);
        let x = Nu::from_terms([(0, &Jet::var(v, 0) * &Jet::var(v, 1)), (1, Jet::one(v))], 3);
        let mk = || {
            let mut r = Report::new("star-mul", Inputs::new(b"{}", 3, 6, 0, vec!["zb".into(), "z".into()]));
            r.output("product", series_json(&x));
            r.push(&Check::pass("a", "b"));
            r.timings.push(("run".into(), Duration::from_millis(5)));
            r.to_json()
        };
        assert_eq!(mk(), mk());
        let v: Value = serde_json::from_str(&mk()).unwrap();
        assert_eq!(v["schema"], 1);
        assert_eq!(v["outputs"]["product"]["terms"][1]["coefficients"][0]["re"], "1");
        assert!(!mk().contains("timings"));
    }
}
