//! One pass/fail line per acceptance criterion, on the bundled charts and a
//! batch of random ones.

use std::collections::BTreeMap;
use std::path::PathBuf;

use deforma::random::Sampler;
use deforma::{Chart, ChartSpec, Samples, Session, Suite};
use deforma_core::check::Check;
use deforma_core::{Jet, Mono, Nu, NuJet, Scalar, VarSet, EXACT};

fn spec(name: &str) -> ChartSpec {
    let path: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "charts", name].iter().collect();
    ChartSpec::parse(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn session(spec: ChartSpec, order: i32, degree: i32) -> Session {
    Session::new(Chart::new(spec, Some(order), Some(degree)).unwrap(), 0)
}

/// Checks of one suite, keyed `suite/check` and tagged with the chart.
fn run(label: &str, s: &Session, suite: Suite, n: &Samples) -> Vec<Check> {
    match deforma::suites::run(s, suite, n) {
        Ok(v) => v
            .into_iter()
            .map(|c| Check::new(format!("{label}:{}/{}", suite.name(), c.name), c.pass, c.detail))
            .collect(),
        Err(e) => vec![Check::fail(format!("{label}:{}", suite.name()), e.to_string())],
    }
}

fn pick<'a>(checks: &'a [Check], names: &'a [&str]) -> impl Iterator<Item = Check> + 'a {
    checks.iter().filter(move |c| names.iter().any(|n| c.name.split(':').nth(1) == Some(*n))).cloned()
}

/// `Σ νʳ/r! ∂_z̄ʳ φ ∂_zʳ ψ` for monomials `φ = z^a z̄^b`, `ψ = z^c z̄^d`.
fn wick(v: VarSet, (a, b): (u32, u32), (c, d): (u32, u32)) -> NuJet {
    let falling = |n: u32, r: u32| (n - r + 1..=n).map(i64::from).product::<i64>();
    let mut out = Vec::new();
    for r in 0..=b.min(c) {
        let coef = falling(b, r) * falling(c, r) / (1..=i64::from(r)).product::<i64>();
        let mono = Mono::from_exps(&[a + c - r, b + d - r]);
        out.push((r as i32, Jet::monomial(v, mono, Scalar::from_int(coef))));
    }
    Nu::from_terms(out, EXACT)
}

fn wick_criterion(charts: &[(&str, &Session)]) -> Vec<Check> {
    let s = session(ChartSpec::flat(1, 14, 4), 4, 14);
    let star = s.m_star().unwrap();
    let v = s.base();
    let monos: Vec<(u32, u32)> = (0..=6u32).flat_map(|d| (0..=d).map(move |a| (a, d - a))).collect();
    let mut failures = Vec::new();
    let mut compared = 0;
    for &x in &monos {
        for &y in &monos {
            let f = Jet::monomial(v, Mono::from_exps(&[x.0, x.1]), Scalar::one());
            let g = Jet::monomial(v, Mono::from_exps(&[y.0, y.1]), Scalar::one());
            let got = star.mul_jets(&f, &g).unwrap();
            let want = wick(v, x, y);
            let deep = got.terms().values().all(|j| j.valid() >= (x.0 + x.1 + y.0 + y.1) as i32);
            if got.cap() < 4 || !deep || got.first_difference(&want).is_some() {
                failures.push(format!("{f} * {g} = {}", got.render()));
            }
            compared += 1;
        }
    }
    let mut out = vec![match failures.first() {
        None => Check::pass("flat:wick", format!("{compared} monomial pairs up to degree 6 through nu^4")),
        Some(f) => Check::fail("flat:wick", f.clone()),
    }];
    for (label, s) in charts {
        let c = s.m_star().unwrap().check_first_order(&s.chart.geometry.phi).unwrap();
        out.push(Check::new(format!("{label}:first-order"), c.pass, c.detail));
    }
    out
}

fn random_charts(count: usize) -> Vec<Check> {
    let mut r = Sampler::new(2024);
    let mut out = Vec::new();
    for i in 0..count {
        let s = session(r.chart(1, 6, 3), 3, 6);
        let label = format!("random{i}");
        for suite in [Suite::Commrel, Suite::Leftast, Suite::Lbaretaq, Suite::Lfrf] {
            out.extend(run(&label, &s, suite, &Samples::quick()));
        }
    }
    out
}

fn main() {
    let flat1 = session(spec("flat1.json"), 3, 6);
    let flat2 = session(spec("flat2.json"), 3, 5);
    let fs = session(spec("fubini_study.json"), 3, 6);
    let charts = [("flat1", &flat1), ("flat2", &flat2), ("fs", &fs)];
    let n = Samples::default();

    let mut by_chart = Vec::new();
    for (label, s) in charts {
        for suite in Suite::ALL {
            if suite != Suite::Comp {
                by_chart.extend(run(label, s, suite, &n));
            }
        }
    }
    let mut structure4 = Vec::new();
    for (label, sp, d) in
        [("flat1", spec("flat1.json"), 6), ("flat2", spec("flat2.json"), 6), ("fs", spec("fubini_study.json"), 6)]
    {
        let s = session(sp, 4, d);
        let checks = run(&format!("{label}-k4"), &s, Suite::SovAssoc, &Samples::quick());
        structure4.extend(checks.into_iter().filter(|c| c.name.contains("/structure-")));
    }
    let mut comp = Vec::new();
    for (label, sp, d) in
        [("flat1", spec("flat1.json"), 10), ("flat2", spec("flat2.json"), 8), ("fs", spec("fubini_study.json"), 12)]
    {
        comp.extend(run(&format!("{label}-d{d}"), &session(sp, 3, d), Suite::Comp, &n));
    }

    let mut criteria: BTreeMap<u32, (&str, Vec<Check>)> = BTreeMap::new();
    criteria.insert(1, ("star product solver against Wick and C_1", wick_criterion(&charts)));
    let mut c2: Vec<Check> = pick(
        &by_chart,
        &[
            "sov-assoc/structure-m",
            "sov-assoc/assoc-m",
            "sov-assoc/structure-tm",
            "sov-assoc/assoc-tm",
            "sov-assoc/structure-tilde",
            "sov-assoc/assoc-tilde",
            "sov-assoc/structure-prime",
            "sov-assoc/assoc-prime",
            "sov-assoc/structure-star",
            "sov-assoc/assoc-star",
        ],
    )
    .collect();
    c2.extend(structure4);
    criteria.insert(2, ("associativity and separation of variables", c2));
    let mut c3: Vec<Check> = pick(
        &by_chart,
        &[
            "commrel/commrel",
            "commrel/commuting-families",
            "commrel/etaf",
            "commrel/numeric",
            "commrel/formal",
            "commrel/flat-commutator",
            "leftast/leftast",
            "lbaretaq/lbaretaq",
            "lfrf/lfrf",
        ],
    )
    .collect();
    c3.extend(random_charts(10));
    criteria.insert(3, ("symbol calculus", c3));
    criteria.insert(4, ("formalization", pick(&by_chart, &["sov-assoc/formalization"]).collect()));
    criteria.insert(
        5,
        (
            "trace densities",
            pick(
                &by_chart,
                &[
                    "norm2/flat-psi",
                    "norm2/trace-closed",
                    "norm2/trace-log-multiple",
                    "norm2/trace-singular-part",
                    "norm2/trace-leading-term",
                    "norm2/trace",
                    "mustar/lambda",
                    "mustar/wedge",
                    "mustar/trace-tm",
                ],
            )
            .collect(),
        ),
    );
    criteria.insert(
        6,
        (
            "Fourier transform and groupoid",
            pick(
                &by_chart,
                &[
                    "fourst/fourst",
                    "fourst/poisson",
                    "fourst/pullback",
                    "lfinal/lfinal",
                    "lfinal/tildelfrac",
                    "hochschild/hochschild",
                ],
            )
            .collect(),
        ),
    );
    let mut c7: Vec<Check> = pick(
        &by_chart,
        &[
            "berezin-id/products",
            "bullet-assoc/idempotent",
            "bullet-assoc/assoc-generators",
            "bullet-assoc/assoc-random",
        ],
    )
    .collect();
    c7.extend(comp);
    criteria.insert(7, ("bullet algebra", c7));
    criteria.insert(
        8,
        (
            "Q and T elements",
            pick(&by_chart, &["covar/covar", "covar/toeplitz", "covar/witness", "circ-eq-star/circ-eq-star"]).collect(),
        ),
    );
    criteria.insert(
        9,
        (
            "normalization and pairing",
            pick(&by_chart, &["norm2/normalization", "norm2/norm2-tm", "pairing/norm", "pairing/pairing"]).collect(),
        ),
    );

    let mut red = Vec::new();
    for (k, (title, checks)) in &criteria {
        let failed: Vec<&Check> = checks.iter().filter(|c| !c.pass).collect();
        let ok = !checks.is_empty() && failed.is_empty();
        let tag = if ok { "PASS" } else { "FAIL" };
        println!("criterion {k}: {tag} {title} ({} checks, {} failed)", checks.len(), failed.len());
        for c in failed {
            println!("    {}: {}", c.name, c.detail);
        }
        if !ok {
            red.push(*k);
        }
    }
    if !red.is_empty() {
        eprintln!("criteria failing: {red:?}");
        std::process::exit(1);
    }
}
