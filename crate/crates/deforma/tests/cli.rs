use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn chart(name: &str) -> PathBuf {
    [env!("CARGO_MANIFEST_DIR"), "..", "..", "charts", name].iter().collect()
}

fn deforma(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_deforma")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn wick_product_of_coordinates() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let spec = chart("flat1.json");
    let o = deforma(&[
        "star-mul",
        "--spec",
        spec.to_str().unwrap(),
        "--star",
        "m",
        "zb",
        "z",
        "--json",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(r["schema"], 1);
    assert_eq!(r["status"], "pass");
    let terms = r["outputs"]["product"]["terms"].as_array().unwrap();
    assert_eq!(terms.len(), 2);
    assert_eq!(terms[0]["nu"], 0);
    assert_eq!(terms[0]["coefficients"][0]["monomial"], "z*zb");
    assert_eq!(terms[0]["coefficients"][0]["re"], "1");
    assert_eq!(terms[1]["nu"], 1);
    assert_eq!(terms[1]["coefficients"][0]["monomial"], "1");
}

#[test]
fn covar_witness() {
    let spec = chart("flat1.json");
    let o = deforma(&["verify", "covar", "--spec", spec.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("PASS covar/witness: Q_zb . Q_z = Q_(z*zb + nu)"));
}

#[test]
fn degenerate_chart_is_an_input_error() {
    let spec = chart("degenerate.json");
    let o = deforma(&["verify", "all", "--spec", spec.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("degenerate"));
}

#[test]
fn shallow_jets_report_the_needed_degree() {
    let spec = chart("fubini_study.json");
    let o = deforma(&["verify", "comp", "--spec", spec.to_str().unwrap(), "--degree", "6"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("need valid degree 8"));
}

#[test]
fn symbol_product_and_malformed_operands() {
    let spec = chart("flat1.json");
    let o = deforma(&["symbol-product", "eta", "etab", "--n", "2", "--spec", spec.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let o = deforma(&["star-mul", "z", "(", "--spec", spec.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn json_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let spec = chart("fubini_study.json");
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o =
            deforma(&["verify", "norm2", "--quick", "--spec", spec.to_str().unwrap(), "--json", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0));
        std::fs::read(out).unwrap()
    };
    assert_eq!(run("a.json"), run("b.json"));
}

#[test]
fn parse_errors_carry_a_locus() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\n  \"m\": 1,\n  \"potential\": [ {\"powers\": [1, 1], \"re\": \"1/0\"} ],\n  \"jet_degree\": 6,\n  \"nu_order\": 3\n}\n").unwrap();
    let o = deforma(&["star-mul", "z", "zb", "--spec", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr).into_owned();
    assert!(err.contains("potential[0].re"), "{err}");

    std::fs::write(&bad, "{\n  \"m\": 1,\n  \"jet_degree\": 6 6\n}\n").unwrap();
    let o = deforma(&["star-mul", "z", "zb", "--spec", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));

    let spec = chart("flat1.json");
    let o = deforma(&["star-mul", "z", "z + q", "--spec", spec.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("column"));
}
