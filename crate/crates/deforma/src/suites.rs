//! Named verification suites. Each suite maps to one family of identities;
//! `all` runs every suite.

use deforma_core::check::{summarize, Check};
use deforma_core::geometry::TmPotential;
use deforma_core::star::{check_normalization, trace_defect, wick_table, StarProduct};
use deforma_core::symbol::HSymbol;
use deforma_core::toeplitz::Generator;
use deforma_core::{Error, Jet, Nu, NuJet, Scalar, EXACT};

use crate::random::Sampler;
use crate::session::Session;
use crate::Failure;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Suite {
    Kp,
    Commrel,
    Lfrf,
    Leftast,
    Lbaretaq,
    SovAssoc,
    BerezinId,
    Norm2,
    Mustar,
    Fourst,
    Lfinal,
    Hochschild,
    Comp,
    BulletAssoc,
    Covar,
    CircEqStar,
    Pairing,
}

impl Suite {
    pub const ALL: [Suite; 17] = [
        Suite::Kp,
        Suite::Commrel,
        Suite::Lfrf,
        Suite::Leftast,
        Suite::Lbaretaq,
        Suite::SovAssoc,
        Suite::BerezinId,
        Suite::Norm2,
        Suite::Mustar,
        Suite::Fourst,
        Suite::Lfinal,
        Suite::Hochschild,
        Suite::Comp,
        Suite::BulletAssoc,
        Suite::Covar,
        Suite::CircEqStar,
        Suite::Pairing,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Kp => "kp",
            Suite::Commrel => "commrel",
            Suite::Lfrf => "lfrf",
            Suite::Leftast => "leftast",
            Suite::Lbaretaq => "lbaretaq",
            Suite::SovAssoc => "sov-assoc",
            Suite::BerezinId => "berezin-id",
            Suite::Norm2 => "norm2",
            Suite::Mustar => "mustar",
            Suite::Fourst => "fourst",
            Suite::Lfinal => "lfinal",
            Suite::Hochschild => "hochschild",
            Suite::Comp => "comp",
            Suite::BulletAssoc => "bullet-assoc",
            Suite::Covar => "covar",
            Suite::CircEqStar => "circ-eq-star",
            Suite::Pairing => "pairing",
        }
    }

    /// A suite name, or `all`.
    pub fn parse(s: &str) -> Result<Vec<Suite>, Failure> {
        if s == "all" {
            return Ok(Suite::ALL.to_vec());
        }
        Suite::ALL
            .iter()
            .find(|x| x.name() == s)
            .map(|x| vec![*x])
            .ok_or_else(|| Failure::Input(format!("unknown suite {s:?}")))
    }
}

/// How many random operands each suite draws.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Samples {
    /// Jet triples per product for associativity.
    pub triples: usize,
    /// Function pairs for the covariance and Toeplitz identities.
    pub pairs: usize,
    /// Functions for the trace test.
    pub functions: usize,
    /// Functions for the groupoid identities and the pairing.
    pub phis: usize,
    /// Test symbols on `TM`.
    pub symbols: usize,
    /// Random element triples for bullet associativity.
    pub element_triples: usize,
}

impl Default for Samples {
    fn default() -> Samples {
        Samples { triples: 50, pairs: 30, functions: 20, phis: 10, symbols: 3, element_triples: 20 }
    }
}

impl Samples {
    /// A light sampling for smoke runs.
    pub fn quick() -> Samples {
        Samples { triples: 3, pairs: 3, functions: 3, phis: 2, symbols: 1, element_triples: 2 }
    }
}

/// Runs one suite. Refuted identities become failing checks; depth and
/// chart errors propagate.
pub fn run(s: &Session, suite: Suite, n: &Samples) -> Result<Vec<Check>, Failure> {
    let mut r = Sampler::for_stream(s.seed, suite.name());
    let out = match suite {
        Suite::Kp => kp(s),
        Suite::Commrel => commrel(s, &mut r, n),
        Suite::Lfrf => lfrf(s, &mut r, n),
        Suite::Leftast => leftast(s, &mut r, n),
        Suite::Lbaretaq => lbaretaq(s, &mut r, n),
        Suite::SovAssoc => sov_assoc(s, &mut r, n),
        Suite::BerezinId => berezin_id(s),
        Suite::Norm2 => norm2(s, &mut r, n),
        Suite::Mustar => mustar(s, &mut r),
        Suite::Fourst => fourst(s, &mut r, n),
        Suite::Lfinal => lfinal(s, &mut r, n),
        Suite::Hochschild => hochschild(s, &mut r),
        Suite::Comp => comp(s, &mut r),
        Suite::BulletAssoc => bullet_assoc(s, &mut r, n),
        Suite::Covar => covar(s, &mut r, n),
        Suite::CircEqStar => circ(s, &mut r),
        Suite::Pairing => pairing(s, &mut r, n),
    };
    match out {
        Err(e) if e.exit_code() == 1 => Ok(vec![Check::fail(suite.name(), e.to_string())]),
        other => other,
    }
}

type Out = Result<Vec<Check>, Failure>;

fn collect(name: &str, it: impl IntoIterator<Item = Result<Check, Error>>) -> Result<Check, Failure> {
    let v = it.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(summarize(name, v))
}

fn h(j: Jet) -> HSymbol {
    Nu::single(0, j, EXACT)
}

fn kp(s: &Session) -> Out {
    let g = &s.chart.geometry;
    Ok(vec![g.check_kahler_poisson(), g.check_wedge_constants()?])
}

fn commrel(s: &Session, r: &mut Sampler, n: &Samples) -> Out {
    let sc = s.symbols();
    let (b, t) = (s.base(), s.tangent());
    let mut out = vec![sc.check_commrel()?, sc.check_commuting_families()?];
    let fs: Vec<Jet> = (0..3).map(|_| r.function(b)).collect();
    out.push(collect("etaf", fs.iter().map(|f| sc.check_etaf(f)))?);
    let mut numeric = Vec::new();
    for nn in [1, 2, 5] {
        for _ in 0..n.symbols {
            numeric.push(sc.check_numeric(&r.symbol(t, 3), &r.symbol(t, 3), nn)?);
        }
    }
    out.push(summarize("numeric", numeric));
    let mut formal = Vec::new();
    for _ in 0..n.symbols {
        let (p, q, w) = (h(r.symbol(t, 2)), h(r.symbol(t, 2)), h(r.symbol(t, 1)));
        let (pp, qq) = (sc.quantize(&p)?, sc.quantize(&q)?);
        let pq = sc.mul(&p, &q)?;
        let pq_hat = sc.quantize_bounded(&pq, 4)?;
        let pq_w = sc.dequantize(&pq_hat.compose(&sc.quantize(&w)?)?)?;
        let qw_hat = sc.quantize_bounded(&sc.mul(&q, &w)?, 3)?;
        let p_qw = sc.dequantize(&pp.compose(&qw_hat)?)?;
        let cases = [
            ("round trip", sc.dequantize(&pp)?.first_difference(&p)),
            ("homomorphism", pq_hat.first_difference(&pp.compose(&qq)?)),
            ("associativity", pq_w.first_difference(&p_qw)),
        ];
        for (name, diff) in cases {
            formal.push(match diff {
                Some(e) => Check::fail("formal", format!("{name} for {} at h^{e}", p.render())),
                None => Check::pass("formal", name),
            });
        }
    }
    out.push(summarize("formal", formal));
    if s.chart.is_flat() {
        let (eta, etab) = (h(Jet::var(t, t.fib(0))), h(Jet::var(t, t.fibbar(0))));
        let c = sc.mul(&eta, &etab)?.try_sub(&sc.mul(&etab, &eta)?)?;
        let want = Nu::single(1, Jet::one(t), EXACT);
        out.push(Check::new(
            "flat-commutator",
            c.first_difference(&want).is_none(),
            format!("[eta, etab] = {}", c.render()),
        ));
    }
    Ok(out)
}

fn tests(s: &Session, r: &mut Sampler, n: &Samples) -> Vec<HSymbol> {
    (0..n.symbols.max(1)).map(|_| h(r.symbol(s.tangent(), 2))).collect()
}

fn lfrf(s: &Session, r: &mut Sampler, n: &Samples) -> Out {
    let ts = tests(s, r, n);
    let b = s.base();
    let cases: Vec<(Jet, Jet)> = (0..3).map(|_| (r.function(b), r.function(b))).collect();
    Ok(vec![collect("lfrf", cases.iter().map(|(f, g)| s.symbols().check_lfrf(f, g, &ts)))?])
}

fn leftast(s: &Session, r: &mut Sampler, n: &Samples) -> Out {
    let ts = tests(s, r, n);
    let b = s.base();
    let cases: Vec<(Jet, Jet)> = (0..3).map(|_| (r.holomorphic(b), r.antiholomorphic(b))).collect();
    Ok(vec![collect("leftast", cases.iter().map(|(a, c)| s.symbols().check_leftast(a, c, &ts)))?])
}

fn lbaretaq(s: &Session, r: &mut Sampler, n: &Samples) -> Out {
    let ts = tests(s, r, n);
    Ok(vec![s.symbols().check_lbaretaq(&ts)?])
}

fn assoc(name: &str, star: &StarProduct, triples: &[(Jet, Jet, Jet)]) -> Result<Check, Failure> {
    for (i, (f, g, k)) in triples.iter().enumerate() {
        if let Some(e) = star.associativity_defect(f, g, k)? {
            return Ok(Check::fail(name, format!("triple {i} ({f}, {g}, {k}) at nu^{e}")));
        }
    }
    Ok(Check::pass(name, format!("{} triples through nu^{}", triples.len(), star.order())))
}

fn sov_assoc(s: &Session, r: &mut Sampler, n: &Samples) -> Out {
    let (b, t) = (s.base(), s.tangent());
    let m = s.m_star()?;
    let mut out = vec![m.check_first_order(&s.chart.geometry.phi)?];
    if s.chart.is_flat() {
        let w = wick_table(b, s.order());
        out.push(Check::new("wick", m.table.agrees(&w), format!("closed form through nu^{}", s.order())));
    }
    let tm = s.tm()?;
    let tp = s.toeplitz()?;
    let (hb, ab) = (b.holomorphic(), b.antiholomorphic());
    let (ht, at) = (t.holomorphic(), t.antiholomorphic());
    let products: [(&str, &StarProduct, &[usize], &[usize]); 5] = [
        ("m", m, &ab, &hb),
        ("tm", &tm.star, &at, &ht),
        ("star", &tp.star, &ab, &hb),
        ("tilde", &tp.tilde, &ab, &hb),
        ("prime", &tp.prime, &hb, &ab),
    ];
    for (name, star, first, second) in products {
        let c = star.check_structure(first, second);
        out.push(Check::new(format!("structure-{name}"), c.pass, c.detail));
        let triples: Vec<(Jet, Jet, Jet)> = if name == "tm" {
            (0..n.triples).map(|_| (r.symbol(t, 1), r.symbol(t, 1), r.symbol(t, 1))).collect()
        } else {
            (0..n.triples).map(|_| (r.function(b), r.function(b), r.function(b))).collect()
        };
        out.push(assoc(&format!("assoc-{name}"), star, &triples)?);
    }
    let pairs: Vec<(Jet, Jet)> = (0..n.symbols).map(|_| (r.symbol(t, 2), r.symbol(t, 2))).collect();
    out.push(s.symbols().check_formalization(tm, &pairs)?);
    Ok(out)
}

fn berezin_id(s: &Session) -> Out {
    let m = s.m_star()?;
    let mut out = vec![m.check_berezin_conjugation()?, m.check_berezin_definition(3)?];
    let (solved, _) = s.dual_from_potential()?;
    out.push(match s.dual()?.first_difference(&solved) {
        Some((e, what)) => Check::fail("dual-potential", format!("at nu^{e}: {what}")),
        None => Check::pass("dual-potential", "dual product equals the product of the dual potential"),
    });
    out.push(s.toeplitz()?.check_products()?);
    Ok(out)
}

fn norm2(s: &Session, r: &mut Sampler, n: &Samples) -> Out {
    let m = s.m_star()?;
    let td = s.trace_m()?;
    let mut out: Vec<Check> =
        td.checks.iter().map(|c| Check::new(format!("trace-{}", c.name), c.pass, c.detail.clone())).collect();
    out.push(check_normalization(m, &s.potential(), &td.psi)?);
    if s.chart.is_flat() {
        let b = s.base();
        let mut zz = Jet::zero(b);
        for k in 0..b.m {
            zz.add_scaled(&(&Jet::var(b, b.z(k)) * &Jet::var(b, b.zbar(k))), &Scalar::one());
        }
        let mut want = Nu::single(-1, -&zz, EXACT);
        want.log_nu = -(b.m as i64);
        let ok = td.psi.first_difference(&want).is_none();
        out.push(Check::new("flat-psi", ok, format!("Psi = {}", td.psi.render())));
    }
    let g = &s.chart.geometry;
    let tm = s.tm()?;
    let xi = g.tm_potential(TmPotential::Xi, EXACT);
    let xit = g.tm_potential(TmPotential::XiTilde, EXACT);
    let c = check_normalization(&tm.star, &xi, &xit)?;
    out.push(Check::new("norm2-tm", c.pass, c.detail));
    let b = s.base();
    let fs: Vec<Jet> = (0..n.functions).map(|_| r.function(b)).collect();
    let mut trace = Vec::new();
    for f in &fs {
        trace.push(match trace_defect(m, &td.mu, f)? {
            Some(e) => Check::fail("trace", format!("f = {f} at nu^{e}")),
            None => Check::pass("trace", ""),
        });
    }
    out.push(summarize("trace", trace));
    Ok(out)
}

fn mustar(s: &Session, r: &mut Sampler) -> Out {
    let g = &s.chart.geometry;
    let t = s.tangent();
    let td = s.trace_tm()?;
    let m2 = 2 * g.m as i32;
    let mut out: Vec<Check> =
        td.checks.iter().map(|c| Check::new(format!("trace-{}", c.name), c.pass, c.detail.clone())).collect();
    let lambda = g.lambda()?;
    let gl = g.det_g.lift(t);
    let want = Nu::single(-m2, (&gl * &gl).scale(&lambda), EXACT);
    out.push(Check::new(
        "lambda",
        td.mu.first_difference(&want).is_none(),
        format!("mu = lambda nu^-{m2} g^2, lambda = {lambda}, through nu^{}", td.mu.cap()),
    ));
    let wedge = Nu::single(-m2, g.tm_omega_top(), EXACT);
    out.push(Check::new(
        "wedge",
        td.mu.first_difference(&wedge).is_none(),
        format!("mu = nu^-{m2} Omega^{m2}/({m2})!"),
    ));
    let tm = s.tm()?;
    let mut trace = Vec::new();
    for _ in 0..3 {
        let f = r.symbol(t, 2);
        trace.push(match trace_defect(&tm.star, &td.mu, &f)? {
            Some(e) => Check::fail("trace-tm", format!("f = {f} at nu^{e}")),
            None => Check::pass("trace-tm", ""),
        });
    }
    out.push(summarize("trace-tm", trace));
    Ok(out)
}

fn fourst(s: &Session, r: &mut Sampler, n: &Samples) -> Out {
    let (g, tm) = (s.groupoid()?, s.tm()?);
    let b = s.base();
    let fs: Vec<Jet> = (0..n.phis).map(|_| r.function(b)).collect();
    let mut out = vec![collect("fourst", fs.iter().map(|f| g.check_fourst(tm, f)))?];
    out.push(collect("poisson", fs.iter().zip(fs.iter().rev()).map(|(f, k)| g.check_poisson(f, k)))?);
    let d = g.diagonal();
    let all: Vec<usize> = (0..d.nvars()).collect();
    let samples: Vec<Jet> = fs.iter().map(|_| r.poly(d, &all, 2, 3)).collect();
    out.push(collect("pullback", fs.iter().zip(&samples).map(|(f, x)| g.check_pullback(f, x)))?);
    Ok(out)
}

fn lfinal(s: &Session, r: &mut Sampler, n: &Samples) -> Out {
    let (g, tm) = (s.groupoid()?, s.tm()?);
    let b = s.base();
    let fs: Vec<Jet> = (0..n.phis).map(|_| r.function(b)).collect();
    Ok(vec![collect("lfinal", fs.iter().map(|f| g.check_lfinal(tm, f)))?, g.check_tildelfrac(tm)?])
}

fn hochschild(s: &Session, r: &mut Sampler) -> Out {
    let (g, tm) = (s.groupoid()?, s.tm()?);
    let b = s.base();
    let pairs: Vec<(Jet, Jet)> = (0..3).map(|_| (r.function(b), r.function(b))).collect();
    Ok(vec![collect("hochschild", pairs.iter().map(|(f, k)| g.check_hochschild(tm, f, k)))?])
}

fn elements(s: &Session, r: &mut Sampler, count: usize) -> Result<Vec<NuJet>, Failure> {
    let d = s.groupoid()?.diagonal();
    Ok((0..count).map(|_| r.element(d)).collect())
}

fn comp(s: &Session, r: &mut Sampler) -> Out {
    let tp = s.toeplitz()?;
    let f = r.function(s.base());
    let e = elements(s, r, 4)?;
    let pairs = vec![(e[0].clone(), e[1].clone()), (e[2].clone(), tp.unit()), (tp.unit(), e[3].clone())];
    Ok(vec![tp.check_comp(&Generator::all(&f, s.chart.m()), &pairs)?])
}

fn bullet_assoc(s: &Session, r: &mut Sampler, n: &Samples) -> Out {
    let tp = s.toeplitz()?;
    let b = s.base();
    let fs: Vec<Jet> = (0..3).map(|_| r.function(b)).collect();
    let mut out = vec![tp.check_idempotent(&fs)?];
    let mut triples = Vec::new();
    for _ in 0..3 {
        triples.push(tp.generator_triple(&r.function(b), &r.function(b), &r.function(b), &r.function(b))?);
    }
    let gen = tp.check_assoc(&triples)?;
    out.push(Check::new("assoc-generators", gen.pass, gen.detail));
    let e = elements(s, r, 3 * n.element_triples)?;
    let triples: Vec<_> = e.chunks(3).map(|c| (c[0].clone(), c[1].clone(), c[2].clone())).collect();
    let rnd = tp.check_assoc(&triples)?;
    out.push(Check::new("assoc-random", rnd.pass, rnd.detail));
    Ok(out)
}

/// `Q_{z̄}•Q_z = Q_{z z̄ + ν}` on the first coordinate.
fn flat_witness(s: &Session) -> Result<Check, Failure> {
    let tp = s.toeplitz()?;
    let b = s.base();
    let (z, zb) = (Jet::var(b, b.z(0)), Jet::var(b, b.zbar(0)));
    let got = tp.bullet(&tp.q_element(&s.one(zb))?, &tp.q_element(&s.one(z.clone()))?)?;
    let prod = Nu::from_terms([(0, &z * &Jet::var(b, b.zbar(0))), (1, Jet::one(b))], EXACT);
    let want = tp.q_element(&prod)?;
    let (zn, zbn) = (b.name(b.z(0)), b.name(b.zbar(0)));
    Ok(match got.first_difference(&want) {
        Some(e) => Check::fail("witness", format!("Q_{zbn} . Q_{zn} at nu^{e}")),
        None => Check::pass("witness", format!("Q_{zbn} . Q_{zn} = Q_({zn}*{zbn} + nu)")),
    })
}

fn covar(s: &Session, r: &mut Sampler, n: &Samples) -> Out {
    let tp = s.toeplitz()?;
    let b = s.base();
    let pairs: Vec<(Jet, Jet)> = (0..n.pairs).map(|_| (r.function(b), r.function(b))).collect();
    let mut out = vec![tp.check_covar(&pairs)?, tp.check_toeplitz(&pairs)?];
    if s.chart.is_flat() {
        out.push(flat_witness(s)?);
    }
    Ok(out)
}

fn circ(s: &Session, r: &mut Sampler) -> Out {
    let fs: Vec<Jet> = (0..4).map(|_| r.function(s.base())).collect();
    Ok(vec![s.toeplitz()?.circ_check(&fs)?])
}

fn pairing(s: &Session, r: &mut Sampler, n: &Samples) -> Out {
    let tp = s.toeplitz()?;
    let fs: Vec<Jet> = (0..n.phis).map(|_| r.function(s.base())).collect();
    Ok(vec![tp.check_normalization()?, tp.pairing_check(&fs, &s.trace_tm()?.mu)?])
}
