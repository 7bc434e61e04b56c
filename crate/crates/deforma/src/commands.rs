//! The commands behind the command-line surface, producing reports.

use std::time::Instant;

use deforma_core::check::Check;
use deforma_core::star::check_normalization;
use serde_json::json;

use crate::expr::{parse, parse_jet};
use crate::report::{jet_json, scalar_json, series_json, Inputs, Report};
use crate::session::{Session, Which};
use crate::spec::{Chart, ChartSpec};
use crate::suites::{self, Samples, Suite};
use crate::Failure;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Element {
    /// `Q_f = fε`.
    Q,
    /// `T_f = B★(f)ε`.
    T,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Command {
    StarMul { star: Which, a: String, b: String },
    Berezin { star: Which, a: String },
    SymbolProduct { p: String, q: String, n: i64 },
    TraceDensity { star: Which },
    Toeplitz { element: Element, a: String, b: Option<String> },
    Verify { suite: String, samples: Samples },
}

impl Command {
    pub fn name(&self) -> String {
        match self {
            Command::StarMul { .. } => "star-mul".into(),
            Command::Berezin { .. } => "berezin".into(),
            Command::SymbolProduct { .. } => "symbol-product".into(),
            Command::TraceDensity { .. } => "trace-density".into(),
            Command::Toeplitz { .. } => "toeplitz".into(),
            Command::Verify { suite, .. } => format!("verify {suite}"),
        }
    }

    fn args(&self) -> Vec<String> {
        match self {
            Command::StarMul { star, a, b } => vec![format!("--star={}", star.name()), a.clone(), b.clone()],
            Command::Berezin { star, a } => vec![format!("--star={}", star.name()), a.clone()],
            Command::SymbolProduct { p, q, n } => vec![p.clone(), q.clone(), format!("--n={n}")],
            Command::TraceDensity { star } => vec![format!("--star={}", star.name())],
            Command::Toeplitz { element, a, b } => {
                let mut v = vec![format!("--element={}", if *element == Element::Q { "q" } else { "t" }), a.clone()];
                v.extend(b.clone());
                v
            }
            Command::Verify { suite, samples } => {
                let mut v = vec![suite.clone()];
                if *samples != Samples::default() {
                    v.push(format!("{samples:?}"));
                }
                v
            }
        }
    }
}

/// Options shared by every command.
#[derive(Clone, Debug, Default)]
pub struct Options {
    pub order: Option<i32>,
    pub degree: Option<i32>,
    pub seed: u64,
}

/// Runs `cmd` against the spec document `spec_bytes`. The exit code is 0
/// when every check passed, 1 on a refuted identity and 2 on input errors.
pub fn execute(cmd: &Command, spec_bytes: &[u8], opts: &Options) -> (Report, i32) {
    let parsed = std::str::from_utf8(spec_bytes)
        .map_err(|_| Failure::Input("spec is not UTF-8".into()))
        .and_then(ChartSpec::parse);
    let (order, degree) = match &parsed {
        Ok(s) => (opts.order.unwrap_or(s.nu_order), opts.degree.unwrap_or(s.jet_degree)),
        Err(_) => (opts.order.unwrap_or(-1), opts.degree.unwrap_or(-1)),
    };
    let inputs = Inputs::new(spec_bytes, order, degree, opts.seed, cmd.args());
    let mut report = Report::new(cmd.name(), inputs);
    let session = parsed.and_then(|spec| Chart::new(spec, opts.order, opts.degree)).map(|c| Session::new(c, opts.seed));
    let result = session.and_then(|s| run(cmd, &s, &mut report));
    match result {
        Ok(()) => {
            let code = if report.passed() { 0 } else { 1 };
            (report, code)
        }
        Err(e) => {
            report.set_error(e.to_string());
            (report, e.exit_code())
        }
    }
}

fn run(cmd: &Command, s: &Session, report: &mut Report) -> Result<(), Failure> {
    let start = Instant::now();
    match cmd {
        Command::StarMul { star, a, b } => {
            let v = s.vars(*star);
            let (x, y) = (parse(a, v)?, parse(b, v)?);
            let p = s.star(*star)?.mul(&x, &y)?;
            report.output("product", series_json(&p));
        }
        Command::Berezin { star, a } => {
            let x = parse(a, s.vars(*star))?;
            let st = s.star(*star)?;
            let bx = st.berezin().apply(&x)?;
            report.output("berezin", series_json(&bx));
            report.push(&st.check_berezin_conjugation()?);
        }
        Command::SymbolProduct { p, q, n } => {
            if *n < 1 {
                return Err(Failure::Input(format!("N = {n} must be positive")));
            }
            let t = s.tangent();
            let (x, y) = (parse_jet(p, t)?, parse_jet(q, t)?);
            let sc = s.symbols();
            report.output("product_at_n", jet_json(&sc.mul_at(&x, &y, *n)?));
            let formal = sc.mul(&s.one(x.clone()), &s.one(y.clone()))?;
            let mut v = series_json(&formal);
            v["text"] = json!(formal.render().replace("nu", "h"));
            report.output("product_in_h", v);
            report.push(&sc.check_numeric(&x, &y, *n)?);
        }
        Command::TraceDensity { star } => trace_density(*star, s, report)?,
        Command::Toeplitz { element, a, b } => toeplitz(*element, a, b.as_deref(), s, report)?,
        Command::Verify { suite, samples } => {
            let list = Suite::parse(suite)?;
            verify(&list, s, samples, report)?;
        }
    }
    report.timings.push(("total".into(), start.elapsed()));
    Ok(())
}

fn trace_density(which: Which, s: &Session, report: &mut Report) -> Result<(), Failure> {
    let (star, td) = match which {
        Which::M => (s.m_star()?.clone(), s.trace_m()?.clone()),
        Which::Tm => (s.tm()?.star.clone(), s.trace_tm()?.clone()),
        Which::Dual | Which::Prime => {
            let (star, td) = s.dual_from_potential()?;
            report.push(&match s.dual()?.first_difference(&star) {
                Some((e, what)) => Check::fail("dual-potential", format!("at nu^{e}: {what}")),
                None => Check::pass("dual-potential", "dual product equals the product of the dual potential"),
            });
            (star, td)
        }
    };
    report.output("psi", series_json(&td.psi));
    report.output("mu", series_json(&td.mu));
    report.output("constant", scalar_json(&td.constant));
    report.output("wedge", jet_json(&td.wedge));
    for c in &td.checks {
        report.push(c);
    }
    let phi = star.potential.clone().expect("solved products carry their potential");
    report.push(&check_normalization(&star, &phi, &td.psi)?);
    Ok(())
}

fn toeplitz(element: Element, a: &str, b: Option<&str>, s: &Session, report: &mut Report) -> Result<(), Failure> {
    let tp = s.toeplitz()?;
    let v = s.base();
    let make = |f| match element {
        Element::Q => tp.q_element(f),
        Element::T => tp.toeplitz_element(f),
    };
    let x = parse(a, v)?;
    let ex = make(&x)?;
    let Some(b) = b else {
        report.output("element", series_json(&ex));
        return Ok(());
    };
    let y = parse(b, v)?;
    let ey = make(&y)?;
    let got = tp.bullet(&ex, &ey)?;
    let (prod, label) = match element {
        Element::Q => (tp.star.mul(&x, &y)?, "Q_a . Q_b = Q_(a star b)"),
        Element::T => (tp.prime.mul(&x, &y)?, "T_a . T_b = T_(a star' b)"),
    };
    let want = make(&prod)?;
    report.output("bullet", series_json(&got));
    report.output("product", series_json(&prod));
    report.push(&match got.first_difference(&want) {
        Some(e) => Check::fail("bullet", format!("{label} fails at nu^{e}")),
        None => Check::pass("bullet", format!("{label} through nu^{}", got.cap().min(want.cap()))),
    });
    Ok(())
}

/// Runs the suites on scoped threads and assembles the results in order.
fn verify(list: &[Suite], s: &Session, samples: &Samples, report: &mut Report) -> Result<(), Failure> {
    let results: Vec<_> = std::thread::scope(|scope| {
        let handles: Vec<_> = list
            .iter()
            .map(|&suite| {
                scope.spawn(move || {
                    let start = Instant::now();
                    let out = suites::run(s, suite, samples);
                    (suite, out, start.elapsed())
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("suite thread panicked")).collect()
    });
    let mut first_err = None;
    for (suite, out, t) in results {
        report.timings.push((suite.name().into(), t));
        match out {
            Ok(checks) => {
                for c in &checks {
                    let mut c = c.clone();
                    c.name = format!("{}/{}", suite.name(), c.name);
                    report.push(&c);
                }
            }
            Err(e) => {
                report.push(&Check::fail(suite.name(), e.to_string()));
                first_err.get_or_insert(e);
            }
        }
    }
    match first_err {
        Some(e) if list.len() == 1 => Err(e),
        Some(e) if e.exit_code() == 2 => Err(e),
        _ => Ok(()),
    }
}
