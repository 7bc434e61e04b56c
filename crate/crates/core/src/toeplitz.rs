//! The idempotent `ε`, the product `•` on functions on the formal
//! neighbourhood of the zero section of `T*M`, and Toeplitz elements.
//!
//! Elements `X = (S⊗T)(F)·ε` are stored as the diagonal-model series `F`
//! alone; `ε` stays implicit. In that encoding `ε ↔ 1`, `S(φ)ε ↔ φ⊗1`,
//! `T(ψ)ε ↔ 1⊗ψ` and `Q_f = fε ↔ δf`, and
//! `S(φ₁)T(ψ₁)ε • S(φ₂)T(ψ₂)ε = S(φ₁)B★(ψ₁φ₂)T(ψ₂)ε` becomes the extension
//! of the bidifferential operator `(ψ₁, φ₂) ↦ B★(ψ₁φ₂)`.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::check::Check;
use crate::geometry::ChartGeometry;
use crate::groupoid::Groupoid;
use crate::nu::Nu;
use crate::star::{canonical_trace_density, nu_op_inverse, StarProduct, TraceDensity};
use crate::symbol::Side;
use crate::{DiffOp, Error, Jet, Mono, NuJet, NuOp, Scalar, VarSet, EXACT};

/// `1/x` for a series whose lowest payload has nonzero constant term.
/// The result is known through `ν^{min(cap, cap(x) − 2v)}`, `v` the
/// valuation of `x`.
pub fn nu_jet_inverse(x: &NuJet, cap: i32, degree: i32) -> Result<NuJet, Error> {
    let v = x.valuation();
    let lead = x.get(v).ok_or_else(|| Error::Domain("inverse of a zero series".into()))?;
    if lead.constant_term().is_zero() {
        return Err(Error::Domain(format!("leading payload {lead} vanishes at the base point")));
    }
    let cap = if x.cap() == EXACT { cap } else { cap.min(x.cap() - 2 * v) };
    let y0 = lead.inverse(degree)?;
    let mut ys: Vec<Jet> = Vec::new();
    let mut out = Nu::zero(cap);
    for n in 0..=(cap + v).max(-1) {
        let mut acc = Jet::zero(lead.vars());
        for k in 1..=n {
            if let Some(xk) = x.get(v + k) {
                acc = &acc + &(xk * &ys[(n - k) as usize]);
            }
        }
        let y = if n == 0 { y0.clone() } else { -&(&y0 * &acc).truncate(degree) };
        out.set(n - v, y.clone());
        ys.push(y);
    }
    Ok(out)
}

fn lift_nu(x: &NuJet, v: VarSet) -> NuJet {
    x.map(|_, j| Ok(j.lift(v))).unwrap()
}

fn constant_series(c: &Nu<Scalar>, v: VarSet) -> NuJet {
    c.map(|_, s| Ok(Jet::constant(v, s.clone()))).unwrap()
}

/// `ε` with `μ★ = C(ν) ε ω₋₁^m`.
#[derive(Clone, Debug)]
pub struct Epsilon {
    pub value: NuJet,
    /// Leading `ν`-exponent.
    pub n: i32,
    pub c_nu: Nu<Scalar>,
    pub inverse: NuJet,
}

impl Epsilon {
    /// Solves `μ★ = C(ν) ε ω₋₁^m`. Without an explicit `C(ν)` the canonical
    /// `λ_m/(ν^{2m} κ_m m!)` is used.
    pub fn new(chart: &ChartGeometry, mu_star: &NuJet, c_nu: Option<&Nu<Scalar>>) -> Result<Epsilon, Error> {
        let b = chart.vars();
        let m = chart.m as i32;
        let d = chart.degree;
        let c_nu = match c_nu {
            Some(c) => c.clone(),
            None => {
                let mf: i64 = (1..=m as i64).product();
                let c = &chart.lambda()? / &(&chart.kappa()? * &Scalar::from_int(mf));
                Nu::single(-2 * m, c, EXACT)
            }
        };
        let mf: i64 = (1..=m as i64).product();
        let wedge = chart.omega_top().scale_int(mf);
        let den = constant_series(&c_nu, b).mul(&Nu::single(0, wedge, EXACT))?;
        let target_cap = mu_star.cap() - den.valuation() - mu_star.valuation();
        let value = mu_star.mul(&nu_jet_inverse(&den, target_cap, d)?)?;
        let n = value.valuation();
        if value.get(n).map_or(true, |j| j.constant_term().is_zero()) {
            return Err(Error::Domain("epsilon has vanishing leading term".into()));
        }
        let inverse = nu_jet_inverse(&value, value.cap() - 2 * n, d)?;
        Ok(Epsilon { value, n, c_nu, inverse })
    }

    /// `ε_n`.
    pub fn leading(&self) -> Jet {
        self.value.get(self.n).cloned().unwrap()
    }
}

/// The five families of functions on `TM` whose `L̃` and `R̃` are known in
/// closed form.
#[derive(Clone, Debug, PartialEq)]
pub enum Generator {
    Function(Jet),
    Eta(usize),
    EtaBar(usize),
    DXi(usize),
    DXiBar(usize),
}

impl Generator {
    pub fn label(&self) -> String {
        match self {
            Generator::Function(f) => format!("f = {f}"),
            Generator::Eta(p) => format!("eta^{}", p + 1),
            Generator::EtaBar(q) => format!("etabar^{}", q + 1),
            Generator::DXi(p) => format!("dXi/dz^{}", p + 1),
            Generator::DXiBar(q) => format!("dXi/dzbar^{}", q + 1),
        }
    }

    /// Every family for one function `f` on a chart of dimension `m`.
    pub fn all(f: &Jet, m: usize) -> Vec<Generator> {
        let mut out = alloc::vec![Generator::Function(f.clone())];
        for p in 0..m {
            out.extend([Generator::Eta(p), Generator::EtaBar(p), Generator::DXi(p), Generator::DXiBar(p)]);
        }
        out
    }
}

/// The products `★̃`, `★ = ★̃ dual`, `★′ = ★̃ᵒᵖ`, the Berezin transform of
/// `★`, its trace density and `ε`, with the groupoid of one chart.
#[derive(Clone, Debug)]
pub struct Toeplitz {
    pub groupoid: Groupoid,
    pub tilde: StarProduct,
    pub star: StarProduct,
    pub prime: StarProduct,
    /// `B★`.
    pub berezin: NuOp,
    pub trace: TraceDensity,
    pub eps: Epsilon,
    /// Requested order; the products are built one order higher so that
    /// `ε` is known to relative order `k`.
    k: i32,
}

impl Toeplitz {
    /// Builds `★̃` from the potential `−Φ₋₁/ν + log g` and `★` from the
    /// dual potential of its canonical trace density.
    pub fn new(chart: &ChartGeometry, k: i32) -> Result<Toeplitz, Error> {
        Self::with_constant(chart, k, None)
    }

    pub fn with_constant(chart: &ChartGeometry, k: i32, c_nu: Option<&Nu<Scalar>>) -> Result<Toeplitz, Error> {
        let d = chart.degree;
        let pot: NuJet = Nu::from_terms([(-1, -&chart.phi), (0, chart.log_g.clone())], EXACT);
        let tilde = StarProduct::from_potential(&pot, k + 2, d)?;
        let mut psi = canonical_trace_density(&tilde)?.psi;
        psi.log_nu = 0;
        let star = StarProduct::from_potential(&psi, k + 1, d)?;
        let trace = canonical_trace_density(&star)?;
        let eps = Epsilon::new(chart, &trace.mu, c_nu)?;
        Ok(Toeplitz {
            groupoid: Groupoid::new(chart)?,
            prime: tilde.opposite(),
            berezin: star.berezin(),
            tilde,
            star,
            trace,
            eps,
            k,
        })
    }

    pub fn chart(&self) -> &ChartGeometry {
        &self.groupoid.chart
    }

    fn base(&self) -> VarSet {
        self.groupoid.base()
    }

    pub fn order(&self) -> i32 {
        self.k
    }

    /// `ε` itself.
    pub fn unit(&self) -> NuJet {
        Nu::single(0, Jet::one(self.groupoid.diagonal()), EXACT)
    }

    /// `S(φ)ε`.
    pub fn source_element(&self, f: &NuJet) -> NuJet {
        f.map(|_, j| Ok(self.groupoid.tensor_one(j))).unwrap()
    }

    /// `T(ψ)ε`.
    pub fn target_element(&self, f: &NuJet) -> Result<NuJet, Error> {
        f.map(|_, j| self.groupoid.one_tensor(j))
    }

    /// `Q_f = fε`.
    pub fn q_element(&self, f: &NuJet) -> Result<NuJet, Error> {
        f.map(|_, j| self.groupoid.delta_extension(j))
    }

    /// `T_f = B★(f)ε`.
    pub fn toeplitz_element(&self, f: &NuJet) -> Result<NuJet, Error> {
        self.q_element(&self.berezin.apply(f)?)
    }

    /// `A • B`.
    pub fn bullet(&self, a: &NuJet, b: &NuJet) -> Result<NuJet, Error> {
        self.groupoid.extend_bidifferential(&self.berezin, a, b)
    }

    /// `ε⁻¹ ∘ P ∘ ε` for an operator on `T*M`.
    pub fn conjugate(&self, op: &NuOp) -> Result<NuOp, Error> {
        let c = self.groupoid.cotangent();
        let n = c.nvars();
        let base = c.base_mask();
        let eps = lift_nu(&self.eps.value, c);
        let inv = lift_nu(&self.eps.inverse, c);
        let mut w: BTreeMap<Mono, NuJet> = BTreeMap::new();
        let mut pieces: Vec<(i32, DiffOp)> = Vec::new();
        let mut cap = op.cap();
        for (e, d) in op.terms() {
            for (alpha, coeff) in d.terms() {
                let a = alpha.restrict(base);
                let rest = alpha.div(a).unwrap();
                for beta in a.divisors(n) {
                    let gamma = a.div(beta).unwrap();
                    let b = Scalar::from_int(a.binomial(beta, n) as i64);
                    let mono = beta.mul(rest);
                    if gamma == Mono::ONE {
                        pieces.push((*e, DiffOp::term(coeff.scale(&b), mono)));
                        continue;
                    }
                    if !w.contains_key(&gamma) {
                        let dg = eps.map(|_, j| Ok(j.deriv_mono(gamma)))?;
                        w.insert(gamma, inv.mul(&dg)?);
                    }
                    let wg = &w[&gamma];
                    cap = cap.min(e + wg.cap());
                    for (r, x) in wg.terms() {
                        pieces.push((e + r, DiffOp::term(&coeff.scale(&b) * x, mono)));
                    }
                }
            }
        }
        let mut out: NuOp = Nu::zero(cap);
        for (k, p) in pieces {
            if k <= cap {
                out.add_at(k, &p)?;
            }
        }
        Ok(out)
    }

    /// Applies an operator on `T*M` to an element.
    pub fn act(&self, op: &NuOp, f: &NuJet) -> Result<NuJet, Error> {
        let x = self.groupoid.st_apply_nu(f)?;
        self.groupoid.st_invert_nu(&self.conjugate(op)?.apply(&x)?)
    }

    /// `L̃_F` and `R̃_F`, unscaled.
    pub fn tilde_ops(&self, g: &Generator) -> Result<(NuOp, NuOp), Error> {
        let gr = &self.groupoid;
        let b = self.base();
        let phi = &self.chart().phi;
        let pair = |f: &Jet| -> Result<(NuOp, NuOp), Error> {
            Ok((gr.tilde_la(f, Side::Left)?, gr.tilde_la(f, Side::Right)?))
        };
        match g {
            Generator::Function(f) => Ok((gr.tilde_mult(f, Side::Left)?, gr.tilde_mult(f, Side::Right)?)),
            Generator::Eta(p) => pair(&Jet::var(b, b.z(*p))),
            Generator::EtaBar(q) => pair(&Jet::var(b, b.zbar(*q))),
            Generator::DXi(_) | Generator::DXiBar(_) => {
                let i = match g {
                    Generator::DXi(p) => b.z(*p),
                    Generator::DXiBar(q) => b.zbar(*q),
                    _ => unreachable!(),
                };
                // ∂Ξ/∂x = ν⁻¹(∂Φ₋₁ + A(∂Φ₋₁)) + ∂ log g
                let dphi = phi.deriv(i);
                let dlg = self.chart().log_g.deriv(i);
                let mut out = Vec::new();
                for side in [Side::Left, Side::Right] {
                    let op = gr
                        .tilde_mult(&dphi, side)?
                        .try_add(&gr.tilde_la(&dphi, side)?)?
                        .shift(-1)
                        .try_add(&gr.tilde_mult(&dlg, side)?)?;
                    out.push(op);
                }
                let r = out.pop().unwrap();
                Ok((out.pop().unwrap(), r))
            }
        }
    }

    /// `n = m`, `ε_m = κ_m/λ_m` and `μ★ = C(ν) ε ω₋₁^m`.
    pub fn check_normalization(&self) -> Result<Check, Error> {
        let ch = self.chart();
        let m = ch.m as i32;
        let want = &ch.kappa()? / &ch.lambda()?;
        let lead = self.eps.leading();
        if self.eps.n != m {
            return Ok(Check::fail("norm", format!("epsilon starts at nu^{}, dimension {m}", self.eps.n)));
        }
        if !lead.agrees(&Jet::constant(self.base(), want.clone())) {
            return Ok(Check::fail("norm", format!("eps_m = {lead}, kappa/lambda = {want}")));
        }
        let b = self.base();
        let mf: i64 = (1..=m as i64).product();
        let rhs = constant_series(&self.eps.c_nu, b).mul(&self.eps.value)?.mul(&Nu::single(
            0,
            ch.omega_top().scale_int(mf),
            EXACT,
        ))?;
        if let Some(e) = rhs.first_difference(&self.trace.mu) {
            return Ok(Check::fail("norm", format!("mu_star vs C eps omega^m at nu^{e}")));
        }
        Ok(Check::pass(
            "norm",
            format!("n = {m}, eps_m = kappa/lambda = {want}, eps known through nu^{}", self.eps.value.cap()),
        ))
    }

    /// `★ = ★̃` dual, `★′ = B★⁻¹(B★· ★ B★·)` and `B★̃ = B★⁻¹`.
    pub fn check_products(&self) -> Result<Check, Error> {
        let dual = self.tilde.dual()?;
        if let Some((r, what)) = self.star.first_difference(&dual) {
            return Ok(Check::fail("products", format!("star vs dual of tilde star at nu^{r}: {what}")));
        }
        let prime = self.star.prime()?;
        if let Some((r, what)) = self.prime.first_difference(&prime) {
            return Ok(Check::fail("products", format!("prime vs opposite of tilde star at nu^{r}: {what}")));
        }
        let bt = self.tilde.berezin().truncate(self.star.order());
        let inv = nu_op_inverse(&self.berezin)?;
        if let Some(r) = bt.first_difference(&inv) {
            return Ok(Check::fail("products", format!("B of tilde star vs inverse of B at nu^{r}")));
        }
        Ok(Check::pass("products", format!("through nu^{}", self.order())))
    }

    /// `ε•ε = ε` and `ε•(S(f)ε) = (T(f)ε)•ε = B★(f)ε`, the latter also with
    /// `S(f)ε` and `T(f)ε` obtained by letting `L̃_f`, `R̃_f` act on `ε`.
    pub fn check_idempotent(&self, fs: &[Jet]) -> Result<Check, Error> {
        let e = self.unit();
        let ee = self.bullet(&e, &e)?;
        if let Some(r) = ee.first_difference(&e) {
            return Ok(Check::fail("idempotent", format!("eps . eps at nu^{r}")));
        }
        for f in fs {
            let fl = Nu::single(0, f.clone(), EXACT);
            let want = self.toeplitz_element(&fl)?;
            let (l, r) = self.tilde_ops(&Generator::Function(f.clone()))?;
            let cases = [
                ("eps . S(f)eps", self.bullet(&e, &self.source_element(&fl))?),
                ("T(f)eps . eps", self.bullet(&self.target_element(&fl)?, &e)?),
                ("eps . L~_f eps", self.bullet(&e, &self.act(&l, &e)?)?),
                ("R~_f eps . eps", self.bullet(&self.act(&r, &e)?, &e)?),
            ];
            for (name, got) in cases {
                if let Some(k) = got.first_difference(&want) {
                    return Ok(Check::fail("idempotent", format!("{name} vs B(f)eps, f = {f}, at nu^{k}")));
                }
            }
        }
        Ok(Check::pass("idempotent", format!("{} functions, through nu^{}", fs.len(), self.order())))
    }

    /// `(A•B)•C = A•(B•C)`.
    pub fn check_assoc(&self, triples: &[(NuJet, NuJet, NuJet)]) -> Result<Check, Error> {
        let mut depth = (EXACT, EXACT);
        for (i, (a, b, c)) in triples.iter().enumerate() {
            let lhs = self.bullet(&self.bullet(a, b)?, c)?;
            let rhs = self.bullet(a, &self.bullet(b, c)?)?;
            depth = reach(depth, &lhs, &rhs, self.k);
            if let Some(r) = lhs.first_difference(&rhs) {
                return Ok(Check::fail("bullet-assoc", format!("triple {i} at nu^{r}")));
            }
        }
        self.depth_check("bullet-assoc", depth, format!("{} triples", triples.len()))
    }

    /// The triples `(T(ψ₁)ε, S(φ₂)T(ψ₂)ε, S(φ₃)ε)`.
    pub fn generator_triple(
        &self,
        psi1: &Jet,
        phi2: &Jet,
        psi2: &Jet,
        phi3: &Jet,
    ) -> Result<(NuJet, NuJet, NuJet), Error> {
        let g = &self.groupoid;
        let one = |j: Jet| Nu::single(0, j, EXACT);
        Ok((one(g.one_tensor(psi1)?), one(&g.tensor_one(phi2) * &g.one_tensor(psi2)?), one(g.tensor_one(phi3))))
    }

    /// `(L̃_F A)•B = L̃_F(A•B)`, `(R̃_F A)•B = A•(L̃_F B)` and
    /// `A•(R̃_F B) = R̃_F(A•B)`.
    pub fn check_comp(&self, gens: &[Generator], pairs: &[(NuJet, NuJet)]) -> Result<Check, Error> {
        let mut depth = (EXACT, EXACT);
        for g in gens {
            let (l, r) = self.tilde_ops(g)?;
            for (i, (a, b)) in pairs.iter().enumerate() {
                let ab = self.bullet(a, b)?;
                let cases = [
                    ("(L~A).B = L~(A.B)", self.bullet(&self.act(&l, a)?, b)?, self.act(&l, &ab)?),
                    ("(R~A).B = A.(L~B)", self.bullet(&self.act(&r, a)?, b)?, self.bullet(a, &self.act(&l, b)?)?),
                    ("A.(R~B) = R~(A.B)", self.bullet(a, &self.act(&r, b)?)?, self.act(&r, &ab)?),
                ];
                for (name, x, y) in cases {
                    depth = reach(depth, &x, &y, self.k);
                    if let Some(k) = x.first_difference(&y) {
                        return Ok(Check::fail("comp", format!("{name} for {}, pair {i}, at nu^{k}", g.label())));
                    }
                }
            }
        }
        self.depth_check("comp", depth, format!("{} generators, {} pairs", gens.len(), pairs.len()))
    }

    /// `Q_φ•Q_ψ = Q_{φ★ψ}`.
    pub fn check_covar(&self, pairs: &[(Jet, Jet)]) -> Result<Check, Error> {
        let mut notes = Vec::new();
        for (f, g) in pairs {
            let (fl, gl) = (Nu::single(0, f.clone(), EXACT), Nu::single(0, g.clone(), EXACT));
            let got = self.bullet(&self.q_element(&fl)?, &self.q_element(&gl)?)?;
            let prod = self.star.mul(&fl, &gl)?;
            let want = self.q_element(&prod)?;
            if let Some(r) = got.first_difference(&want) {
                return Ok(Check::fail("covar", format!("Q_({f}) . Q_({g}) at nu^{r}")));
            }
            if notes.len() < 2 {
                notes.push(format!("Q_({f}) . Q_({g}) = Q_({})", prod.render()));
            }
        }
        Ok(Check::pass("covar", format!("{} pairs; {}", pairs.len(), notes.join("; "))))
    }

    /// `T_φ•T_ψ = T_{φ★′ψ}`, with no fibre dependence on `T*M`.
    pub fn check_toeplitz(&self, pairs: &[(Jet, Jet)]) -> Result<Check, Error> {
        let c = self.groupoid.cotangent();
        for (f, g) in pairs {
            let (fl, gl) = (Nu::single(0, f.clone(), EXACT), Nu::single(0, g.clone(), EXACT));
            let got = self.bullet(&self.toeplitz_element(&fl)?, &self.toeplitz_element(&gl)?)?;
            let want = self.toeplitz_element(&self.prime.mul(&fl, &gl)?)?;
            if let Some(r) = got.first_difference(&want) {
                return Ok(Check::fail("toeplitz", format!("T_({f}) . T_({g}) at nu^{r}")));
            }
            for (r, j) in self.groupoid.st_apply_nu(&got)?.terms() {
                if !j.set_zero(c.fibre_mask()).agrees(j) {
                    return Ok(Check::fail("toeplitz", format!("T_({f}) . T_({g}) depends on xi at nu^{r}")));
                }
            }
        }
        Ok(Check::pass("toeplitz", format!("{} pairs through nu^{}", pairs.len(), self.order())))
    }

    /// Fails with a depth error when a comparison could not reach `ν^k` or
    /// any jet degree.
    fn depth_check(&self, name: &str, (cap, valid): (i32, i32), detail: String) -> Result<Check, Error> {
        if valid < 0 {
            let d = self.chart().degree;
            return Err(Error::Depth {
                needed: d - valid,
                available: d,
                what: format!("jet degree of the {name} check"),
            });
        }
        if cap < self.k {
            return Err(Error::Depth { needed: self.k, available: cap, what: format!("{name} nu-order") });
        }
        let d = if valid == EXACT { String::from("exactly") } else { format!("through jet degree {valid}") };
        Ok(Check::pass(name, format!("{detail}, compared through nu^{} {d}", cap.min(self.k))))
    }

    /// `∂Φ/∂x` with `Φ = Φ₋₁/ν + log ε`.
    fn d_phi(&self, i: usize) -> Result<NuJet, Error> {
        let de = self.eps.value.map(|_, j| Ok(j.deriv(i)))?;
        let dl = de.mul(&self.eps.inverse)?;
        Nu::single(-1, self.chart().phi.deriv(i), EXACT).try_add(&dl)
    }

    /// `(φε)•(ψε) = (φ★ψ)ε` and
    /// `(−B★̃ ∂Φ/∂z^p) ★̃ f = ∂f/∂z^p + f ∂(−Ψ + log g)/∂z^p` with its
    /// antiholomorphic mirror.
    pub fn circ_check(&self, fs: &[Jet]) -> Result<Check, Error> {
        let pairs: Vec<(Jet, Jet)> = fs.iter().zip(fs.iter().rev()).map(|(a, b)| (a.clone(), b.clone())).collect();
        let c = self.check_covar(&pairs)?;
        if !c.pass {
            return Ok(Check::fail("circ-eq-star", c.detail));
        }
        let b = self.base();
        let bt = self.tilde.berezin();
        let ch = self.chart();
        for f in fs {
            let fl = Nu::single(0, f.clone(), EXACT);
            for p in 0..b.m {
                for (i, left) in [(b.z(p), true), (b.zbar(p), false)] {
                    let x = bt.apply(&self.d_phi(i)?)?.neg();
                    let lhs = if left { self.tilde.mul(&x, &fl)? } else { self.tilde.mul(&fl, &x)? };
                    let w = Nu::from_terms([(-1, -&ch.phi.deriv(i)), (0, ch.log_g.deriv(i))], EXACT);
                    let rhs = Nu::single(0, f.deriv(i), EXACT).try_add(&fl.mul(&w)?)?;
                    if let Some(r) = lhs.first_difference(&rhs) {
                        let name = if left { "ltilde" } else { "rtilde" };
                        return Ok(Check::fail("circ-eq-star", format!("{name} for f = {f}, index {p}, at nu^{r}")));
                    }
                }
            }
        }
        Ok(Check::pass("circ-eq-star", format!("{} functions, {}", fs.len(), c.detail)))
    }

    /// `f ε μ_*|_{η=0} / g = f μ★ λ_m/(ν^{2m} C(ν) m! κ_m)`; with the
    /// canonical constant the rescaling is 1. `mu_tm` is the trace density
    /// coefficient of the product on `TM`.
    pub fn pairing_check(&self, fs: &[Jet], mu_tm: &NuJet) -> Result<Check, Error> {
        let ch = self.chart();
        let b = self.base();
        let d = ch.degree;
        let m = ch.m as i32;
        let fibre = ch.tangent().fibre_mask();
        let at_zero = mu_tm.map(|_, j| Ok(j.set_zero(fibre).to_base()))?;
        let inv_g = ch.det_g.inverse(d)?;
        let lhs0 = self.eps.value.mul(&at_zero)?.mul(&Nu::single(0, inv_g, EXACT))?;
        let mf: i64 = (1..=m as i64).product();
        let k = &ch.kappa()? * &Scalar::from_int(mf);
        let den = constant_series(&self.eps.c_nu, b).scale(&k);
        let scale = nu_jet_inverse(&den, self.trace.mu.cap() + 2 * m, d)?.scale(&ch.lambda()?).shift(-2 * m);
        let rhs0 = self.trace.mu.mul(&scale)?;
        for f in fs {
            let fl = Nu::single(0, f.clone(), EXACT);
            let (x, y) = (fl.mul(&lhs0)?, fl.mul(&rhs0)?);
            if let Some(r) = x.first_difference(&y) {
                return Ok(Check::fail("pairing", format!("f = {f} at nu^{r}")));
            }
        }
        Ok(Check::pass("pairing", format!("{} functions through nu^{}", fs.len(), lhs0.cap().min(rhs0.cap()))))
    }
}

/// Lowest `ν`-cap and lowest jet validity through `ν^k` seen so far.
fn reach(acc: (i32, i32), x: &NuJet, y: &NuJet, k: i32) -> (i32, i32) {
    let valid = |z: &NuJet| z.terms().iter().filter(|(r, _)| **r <= k).map(|(_, j)| j.valid()).min().unwrap_or(EXACT);
    (acc.0.min(x.cap()).min(y.cap()), acc.1.min(valid(x)).min(valid(y)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chart(fs: bool, d: i32) -> ChartGeometry {
        let v = VarSet::base(1);
        let zz = &Jet::var(v, 0) * &Jet::var(v, 1);
        let phi = if fs { (&Jet::one(v) + &zz).log(d).unwrap() } else { zz };
        ChartGeometry::build(&phi, d).unwrap()
    }

    #[test]
    fn flat_epsilon() {
        let t = Toeplitz::new(&chart(false, 6), 3).unwrap();
        assert_eq!(t.eps.n, 1);
        assert!(t.eps.leading().agrees(&Jet::constant(t.base(), Scalar::minus_i_pow(1))));
        for c in [t.check_normalization().unwrap(), t.check_products().unwrap()] {
            assert!(c.pass, "{c}");
        }
    }

    #[test]
    fn flat_witness() {
        let t = Toeplitz::new(&chart(false, 6), 3).unwrap();
        let b = t.base();
        let (z, zb) = (Jet::var(b, 0), Jet::var(b, 1));
        let one = |j: Jet| Nu::single(0, j, EXACT);
        let got = t.bullet(&t.q_element(&one(zb.clone())).unwrap(), &t.q_element(&one(z.clone())).unwrap()).unwrap();
        let want = t.q_element(&Nu::from_terms([(0, &z * &zb), (1, Jet::one(b))], EXACT)).unwrap();
        assert!(got.first_difference(&want).is_none());
        let zz = one(t.q_element(&one(&z * &zb)).unwrap().get(0).unwrap().clone());
        let got = t.bullet(&zz, &zz).unwrap();
        let want = Nu::from_terms([(0, &(&z * &zb) * &(&z * &zb)), (1, &z * &zb)], EXACT);
        assert!(got.first_difference(&t.q_element(&want).unwrap()).is_none());
    }

    #[test]
    fn flat_bullet_checks() {
        let t = Toeplitz::new(&chart(false, 6), 3).unwrap();
        let b = t.base();
        let (z, zb) = (Jet::var(b, 0), Jet::var(b, 1));
        let f = &z.pow(2) * &zb;
        let c = t.check_idempotent(&[f.clone(), zb.clone()]).unwrap();
        assert!(c.pass, "{c}");
        let tr = t.generator_triple(&zb, &z, &(&z * &zb), &zb.pow(2)).unwrap();
        let c = t.check_assoc(&[tr]).unwrap();
        assert!(c.pass, "{c}");
        let pair = (t.q_element(&Nu::single(0, z.clone(), EXACT)).unwrap(), t.unit());
        let c = t.check_comp(&Generator::all(&f, 1), &[pair]).unwrap();
        assert!(c.pass, "{c}");
        let c = t.circ_check(&[f.clone(), zb.clone(), z.clone()]).unwrap();
        assert!(c.pass, "{c}");
        let c = t.check_toeplitz(&[(f.clone(), zb.clone())]).unwrap();
        assert!(c.pass, "{c}");
    }

    #[test]
    fn fubini_study_bullet() {
        let t = Toeplitz::new(&chart(true, 8), 3).unwrap();
        let b = t.base();
        let (z, zb) = (Jet::var(b, 0), Jet::var(b, 1));
        let a = t.q_element(&Nu::single(0, z.clone(), EXACT)).unwrap();
        let bb = t.target_element(&Nu::single(0, zb.clone(), EXACT)).unwrap();
        let tr = t.generator_triple(&zb, &z, &(&z * &zb), &zb.pow(2)).unwrap();
        for c in [
            t.check_normalization().unwrap(),
            t.check_products().unwrap(),
            t.check_idempotent(&[&z * &zb]).unwrap(),
            t.check_covar(&[(zb.clone(), z.clone()), (&z * &zb, zb.clone())]).unwrap(),
            t.check_toeplitz(&[(zb.clone(), z.clone())]).unwrap(),
            t.circ_check(&[z.clone(), zb.clone()]).unwrap(),
            t.check_assoc(&[tr]).unwrap(),
            t.check_comp(&Generator::all(&(&z * &zb), 1), &[(a, bb)]).unwrap(),
        ] {
            assert!(c.pass, "{c}");
        }
    }

    #[test]
    fn swapped_sides_break_compatibility() {
        let t = Toeplitz::new(&chart(true, 8), 2).unwrap();
        let b = t.base();
        let a = t.q_element(&Nu::single(0, Jet::var(b, 0), EXACT)).unwrap();
        let bb = t.target_element(&Nu::single(0, Jet::var(b, 1), EXACT)).unwrap();
        let (_, r) = t.tilde_ops(&Generator::Eta(0)).unwrap();
        let x = t.bullet(&t.act(&r, &a).unwrap(), &bb).unwrap();
        let y = t.act(&r, &t.bullet(&a, &bb).unwrap()).unwrap();
        assert!(x.first_difference(&y).is_some());
    }

    #[test]
    fn shallow_jets_are_a_depth_error() {
        let t = Toeplitz::new(&chart(true, 6), 3).unwrap();
        let b = t.base();
        let a = t.q_element(&Nu::single(0, Jet::var(b, 0), EXACT)).unwrap();
        let r = t.check_comp(&[Generator::DXi(0)], &[(a, t.unit())]);
        assert!(matches!(r, Err(Error::Depth { .. })), "{r:?}");
    }
}
