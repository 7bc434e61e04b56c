//! Normal-ordered symbols on `TU` and the symbol product `*_h`.
//!
//! A symbol is a fibrewise polynomial on the tangent variables. With `h`
//! kept formal it is stored as a series in `h` ([`HSymbol`]); operators on the
//! sections of `L^N` are series in `h` of base differential operators
//! ([`HOp`]). At a concrete `h = 1/N` both collapse to a single jet or
//! operator.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::check::Check;
use crate::diffop::{conjugate_exp, nu_conjugate};
use crate::geometry::ChartGeometry;
use crate::nu::Nu;
use crate::{DiffOp, Error, Jet, Mono, NuOp, Scalar, VarSet, EXACT};

/// `Σ hʳ P_r` with `P_r` on the tangent variables.
pub type HSymbol = Nu<Jet>;
/// `Σ hʳ D_r` with `D_r` on the base variables.
pub type HOp = Nu<DiffOp>;

/// Which of `J_h` and `K_h` conjugates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Symbol calculus of one chart.
#[derive(Clone, Debug)]
pub struct SymbolCalculus {
    pub chart: ChartGeometry,
    /// `η̂^p = −h g^{l̄p} ∂_{z̄^l}`.
    pub eta_hat: Vec<HOp>,
    /// `η̄̂^q = h g^{q̄k} ∂_{z^k} − g^{q̄k} ∂Φ₋₁/∂z^k`.
    pub etabar_hat: Vec<HOp>,
    /// `ζ_k ↦ g_{kq̄} η̄^q`, inverting the principal symbol of `η̄̂`.
    zeta: Vec<Jet>,
    /// `ζ̄_l ↦ −g_{pl̄} η^p`.
    zetabar: Vec<Jet>,
}

impl SymbolCalculus {
    pub fn new(chart: &ChartGeometry) -> SymbolCalculus {
        let m = chart.m;
        let (b, t) = (chart.vars(), chart.tangent());
        let mut eta_hat = Vec::new();
        let mut etabar_hat = Vec::new();
        for p in 0..m {
            let mut op = DiffOp::zero(b);
            for l in 0..m {
                op.add_term(Mono::var(b.zbar(l)), &-chart.gu(l, p));
            }
            eta_hat.push(Nu::single(1, op, EXACT));
            let mut d = DiffOp::zero(b);
            let mut c = Jet::zero(b);
            for k in 0..m {
                d.add_term(Mono::var(b.z(k)), chart.gu(p, k));
                c.add_scaled(&(chart.gu(p, k) * &chart.phi.deriv(b.z(k))), &Scalar::from_int(-1));
            }
            etabar_hat.push(Nu::from_terms([(1, d), (0, DiffOp::mul_by(&c))], EXACT));
        }
        let mut zeta = Vec::new();
        let mut zetabar = Vec::new();
        for k in 0..m {
            let mut z = Jet::zero(t);
            let mut zb = Jet::zero(t);
            for q in 0..m {
                z.add_scaled(&(&chart.gl(k, q).lift(t) * &Jet::var(t, t.fibbar(q))), &Scalar::one());
                zb.add_scaled(&(&chart.gl(q, k).lift(t) * &Jet::var(t, t.fib(q))), &Scalar::from_int(-1));
            }
            zeta.push(z);
            zetabar.push(zb);
        }
        SymbolCalculus { chart: chart.clone(), eta_hat, etabar_hat, zeta, zetabar }
    }

    pub fn base(&self) -> VarSet {
        self.chart.vars()
    }

    pub fn tangent(&self) -> VarSet {
        self.chart.tangent()
    }

    fn hop_identity(&self) -> HOp {
        Nu::single(0, DiffOp::identity(self.base()), EXACT)
    }

    /// Splits a fibrewise polynomial into base coefficients of
    /// `η^A η̄^B`. When the jet is truncated, every fibre monomial up to
    /// fibre degree `fibre` is reported, possibly as a truncated zero.
    pub fn decompose(&self, p: &Jet, fibre: u32) -> BTreeMap<(Mono, Mono), Jet> {
        let t = self.tangent();
        let b = self.base();
        let (fm, fbm) = (t.fib_mask(), t.fibbar_mask());
        let mut groups: BTreeMap<(Mono, Mono), Vec<(Mono, Scalar)>> = BTreeMap::new();
        for (mono, c) in p.terms() {
            let key = (mono.restrict(fm), mono.restrict(fbm));
            groups.entry(key).or_default().push((mono.restrict(t.base_mask()), c.clone()));
        }
        if !p.is_exact() {
            let fib: Vec<usize> = (0..t.m).map(|k| t.fib(k)).collect();
            let fibbar: Vec<usize> = (0..t.m).map(|k| t.fibbar(k)).collect();
            let deg = fibre.max(p.degree_in(t.fibre_mask()));
            for a in Mono::all_up_to(&fib, deg) {
                for bb in Mono::all_up_to(&fibbar, deg - a.degree()) {
                    groups.entry((a, bb)).or_default();
                }
            }
        }
        groups
            .into_iter()
            .map(|((a, bb), terms)| {
                let valid = crate::jet::vsub(p.valid(), (a.degree() + bb.degree()) as i32);
                ((a, bb), Jet::from_terms(b, terms, valid))
            })
            .collect()
    }

    /// `Σ u(η̂) f v(η̄̂)` over the normal-ordered terms of `p`. A truncated
    /// coefficient is taken to have no fibre terms beyond its known ones;
    /// see [`SymbolCalculus::quantize_bounded`].
    pub fn quantize(&self, p: &HSymbol) -> Result<HOp, Error> {
        self.quantize_bounded(p, 0)
    }

    /// [`SymbolCalculus::quantize`] for a symbol of fibre degree at most
    /// `fibre`. Unknown fibre terms of high degree reach the low-degree
    /// coefficients of the operator, so the bound enters the validity.
    pub fn quantize_bounded(&self, p: &HSymbol, fibre: u32) -> Result<HOp, Error> {
        let mut out: HOp = Nu::zero(EXACT);
        let mut left: BTreeMap<Mono, HOp> = BTreeMap::new();
        let mut right: BTreeMap<Mono, HOp> = BTreeMap::new();
        for (e, pj) in p.terms() {
            for ((a, bb), f) in self.decompose(pj, fibre) {
                let u = self.power(&self.eta_hat, a, self.tangent().fib(0), &mut left)?;
                let v = self.power(&self.etabar_hat, bb, self.tangent().fibbar(0), &mut right)?;
                let op = u.compose(&Nu::single(0, DiffOp::mul_by(&f), EXACT))?.compose(&v)?;
                out = out.try_add(&op.shift(*e))?;
            }
        }
        Ok(out)
    }

    fn power(&self, gens: &[HOp], a: Mono, offset: usize, cache: &mut BTreeMap<Mono, HOp>) -> Result<HOp, Error> {
        if a == Mono::ONE {
            return Ok(self.hop_identity());
        }
        if let Some(x) = cache.get(&a) {
            return Ok(x.clone());
        }
        let p = (0..gens.len()).find(|&p| a.exp(offset + p) > 0).unwrap();
        let rest = a.div(Mono::var(offset + p)).unwrap();
        let x = gens[p].compose(&self.power(gens, rest, offset, cache)?)?;
        cache.insert(a, x.clone());
        Ok(x)
    }

    /// Fibre polynomial matching a top-order operator term `c ∂^α`.
    fn principal(&self, alpha: Mono, c: &Jet, powers: &mut BTreeMap<Mono, Jet>) -> Jet {
        let t = self.tangent();
        let b = self.base();
        let sub = powers
            .entry(alpha)
            .or_insert_with(|| {
                let mut s = Jet::one(t);
                for k in 0..b.m {
                    for _ in 0..alpha.exp(b.z(k)) {
                        s = &s * &self.zeta[k];
                    }
                    for _ in 0..alpha.exp(b.zbar(k)) {
                        s = &s * &self.zetabar[k];
                    }
                }
                s
            })
            .clone();
        &c.lift(t) * &sub
    }

    /// Inverse of [`SymbolCalculus::quantize`], peeling off principal symbols
    /// from the top order down.
    pub fn dequantize(&self, d: &HOp) -> Result<HSymbol, Error> {
        let mut resid = d.clone();
        let mut out: HSymbol = Nu::zero(EXACT);
        let mut powers = BTreeMap::new();
        loop {
            let top = resid.terms().values().map(DiffOp::order).max().unwrap_or(-1);
            if top < 0 {
                break;
            }
            let mut piece: HSymbol = Nu::zero(EXACT);
            for (e, op) in resid.terms() {
                let mut s = Jet::zero(self.tangent());
                let mut any = false;
                for (alpha, c) in op.terms() {
                    if alpha.degree() as i32 == top && !c.is_zero() {
                        s.add_scaled(&self.principal(*alpha, c, &mut powers), &Scalar::one());
                        any = true;
                    }
                }
                if any {
                    piece.add_at(e - top, &s)?;
                }
            }
            let q = self.quantize(&piece)?;
            resid = resid.try_sub(&q)?;
            out = out.try_add(&piece)?;
            if resid.terms().values().map(DiffOp::order).max().unwrap_or(-1) >= top {
                return Err(Error::NotASymbol(alloc::format!("order {top} part does not cancel")));
            }
        }
        Ok(out)
    }

    /// `P *_h Q`, with `h` formal.
    pub fn mul(&self, p: &HSymbol, q: &HSymbol) -> Result<HSymbol, Error> {
        self.dequantize(&self.quantize(p)?.compose(&self.quantize(q)?)?)
    }

    /// `P̂` at `h = 1/N`.
    pub fn quantize_at(&self, p: &Jet, n: i64) -> Result<DiffOp, Error> {
        self.quantize_at_bounded(p, n, 0)
    }

    pub fn quantize_at_bounded(&self, p: &Jet, n: i64, fibre: u32) -> Result<DiffOp, Error> {
        Ok(eval_h(&self.quantize_bounded(&Nu::single(0, p.clone(), EXACT), fibre)?, n))
    }

    /// Inverse of [`SymbolCalculus::quantize_at`].
    pub fn dequantize_at(&self, d: &DiffOp, n: i64) -> Result<Jet, Error> {
        let mut resid = d.clone();
        let mut out = Jet::zero(self.tangent());
        let mut powers = BTreeMap::new();
        loop {
            let top = resid.order();
            if top < 0 {
                break;
            }
            let mut s = Jet::zero(self.tangent());
            for (alpha, c) in resid.terms() {
                if alpha.degree() as i32 == top && !c.is_zero() {
                    s.add_scaled(&self.principal(*alpha, c, &mut powers), &Scalar::from_int(n.pow(top as u32)));
                }
            }
            resid = resid.try_sub(&self.quantize_at(&s, n)?)?;
            out.add_scaled(&s, &Scalar::one());
            if resid.order() >= top {
                return Err(Error::NotASymbol(alloc::format!("order {top} part does not cancel")));
            }
        }
        Ok(out)
    }

    /// `P *_{1/N} Q`.
    pub fn mul_at(&self, p: &Jet, q: &Jet, n: i64) -> Result<Jet, Error> {
        self.dequantize_at(&self.quantize_at(p, n)?.try_compose(&self.quantize_at(q, n)?)?, n)
    }

    /// `Ξ_h = Ξ₋₁/h + log g`.
    pub fn xi_h(&self) -> HSymbol {
        let t = self.tangent();
        Nu::from_terms([(-1, self.chart.xi_minus1()), (0, self.chart.log_g.lift(t))], EXACT)
    }

    /// `J_h f J_h⁻¹` (left) or `K_h f K_h⁻¹` (right) as a series in `h`,
    /// through `h^cap`.
    pub fn conjugation(&self, f: &Jet, side: Side, cap: i32) -> Result<NuOp, Error> {
        nu_conjugate(&self.conjugator(side), &DiffOp::mul_by(&f.lift(self.tangent())), cap)
    }

    /// `g^{l̄k}∂²/∂η^k∂z̄^l` or `g^{l̄k}∂²/∂z^k∂η̄^l`.
    pub fn conjugator(&self, side: Side) -> DiffOp {
        let t = self.tangent();
        let mut x = DiffOp::zero(t);
        for k in 0..t.m {
            for l in 0..t.m {
                let g = self.chart.gu(l, k).lift(t);
                let d = match side {
                    Side::Left => Mono::var(t.fib(k)).mul(Mono::var(t.zbar(l))),
                    Side::Right => Mono::var(t.z(k)).mul(Mono::var(t.fibbar(l))),
                };
                x.add_term(d, &g);
            }
        }
        x
    }

    /// `J_h f J_h⁻¹` or `K_h f K_h⁻¹` at `h = 1/N`, exact on symbols of
    /// fibre degree at most `fibre_degree`.
    pub fn jk_conjugation(&self, f: &Jet, n: i64, side: Side, fibre_degree: u32) -> Result<DiffOp, Error> {
        let t = self.tangent();
        let mask = match side {
            Side::Left => t.fib_mask(),
            Side::Right => t.fibbar_mask(),
        };
        let x = self.conjugator(side).scale(&Scalar::from_ratio(1, n));
        conjugate_exp(&x, &DiffOp::mul_by(&f.lift(t)), mask, fibre_degree)
    }
}

/// `Σ hʳ D_r` at `h = 1/N`.
pub fn eval_h(d: &HOp, n: i64) -> DiffOp {
    let mut out: Option<DiffOp> = None;
    for (e, op) in d.terms() {
        let c = Scalar::from_int(n).pow(-*e).unwrap();
        let x = op.scale(&c);
        out = Some(match out {
            None => x,
            Some(o) => o.try_add(&x).unwrap(),
        });
    }
    out.unwrap_or_else(|| DiffOp::zero(VarSet::base(1)))
}

/// Replaces `h` by `ν`; both are stored as the series exponent.
pub fn formalize(p: &HSymbol) -> crate::NuJet {
    p.clone()
}

fn h_const(f: Jet) -> HSymbol {
    Nu::single(0, f, EXACT)
}

fn op_check(name: &str, got: &HOp, want: &HOp) -> Option<Check> {
    got.first_difference(want).map(|e| {
        let a = got.at(e, &DiffOp::zero(got.get(e).or(want.get(e)).unwrap().vars()));
        let b = want.at(e, &DiffOp::zero(a.vars()));
        Check::fail("commrel", alloc::format!("{name} at h^{e}: {} vs {}", a.render(), b.render()))
    })
}

impl SymbolCalculus {
    /// The six identities for `∂Ξ_h` and the generators.
    pub fn check_commrel(&self) -> Result<Check, Error> {
        let (b, t) = (self.base(), self.tangent());
        let m = b.m;
        let xi = self.xi_h();
        let phi = &self.chart.phi;
        let d_xi = |i: usize| xi.map(|_, j| Ok(j.deriv(i))).unwrap();
        let one = self.hop_identity();
        for p in 0..m {
            // ∂Ξ/∂η^p ↦ ∂Ψ_h/∂z^p and ∂Ξ/∂η̄^p ↦ ∂Ψ_h/∂z̄^p
            let q_eta = self.quantize(&d_xi(t.fib(p)))?;
            let want = Nu::single(-1, DiffOp::mul_by(&phi.deriv(b.z(p))), EXACT);
            if let Some(c) = op_check("d Xi/d eta", &q_eta, &want) {
                return Ok(c);
            }
            let q_etab = self.quantize(&d_xi(t.fibbar(p)))?;
            let want = Nu::single(-1, DiffOp::mul_by(&phi.deriv(b.zbar(p))), EXACT);
            if let Some(c) = op_check("d Xi/d etabar", &q_etab, &want) {
                return Ok(c);
            }
            // ∂Ξ/∂z^p ↦ ∂_p − g^{l̄k} Φ_{kp} ∂_{l̄}
            let q_z = self.quantize(&d_xi(t.z(p)))?;
            let mut w = DiffOp::d(b, b.z(p));
            for k in 0..m {
                let phikp = phi.deriv(b.z(k)).deriv(b.z(p));
                for l in 0..m {
                    w.add_term(Mono::var(b.zbar(l)), &-&(self.chart.gu(l, k) * &phikp));
                }
            }
            if let Some(c) = op_check("d Xi/d z", &q_z, &Nu::single(0, w, EXACT)) {
                return Ok(c);
            }
            // ∂Ξ/∂z̄^q ↦ −∂_q̄ + g^{l̄k}Φ_{l̄q̄}∂_k + (Φ_q̄ − g^{l̄k}Φ_{l̄q̄}Φ_k)/h
            let q_zb = self.quantize(&d_xi(t.zbar(p)))?;
            let mut w0 = DiffOp::d(b, b.zbar(p)).scale(&Scalar::from_int(-1));
            let mut wm1 = phi.deriv(b.zbar(p));
            for l in 0..m {
                let philq = phi.deriv(b.zbar(l)).deriv(b.zbar(p));
                for k in 0..m {
                    let c = self.chart.gu(l, k) * &philq;
                    w0.add_term(Mono::var(b.z(k)), &c);
                    wm1 = &wm1 - &(&c * &phi.deriv(b.z(k)));
                }
            }
            let want = Nu::from_terms([(0, w0), (-1, DiffOp::mul_by(&wm1))], EXACT);
            if let Some(c) = op_check("d Xi/d zbar", &q_zb, &want) {
                return Ok(c);
            }
            for k in 0..m {
                let delta = if k == p { one.clone() } else { Nu::zero(EXACT) };
                let c1 = q_eta.commutator(&self.eta_hat[k])?;
                if let Some(c) = op_check("[d Xi/d eta, eta]", &c1, &delta) {
                    return Ok(c);
                }
                let c2 = q_etab.commutator(&self.etabar_hat[k])?;
                if let Some(c) = op_check("[d Xi/d etabar, etabar]", &c2, &delta.neg()) {
                    return Ok(c);
                }
                let c3 = q_z.commutator(&self.eta_hat[k])?;
                if let Some(c) = op_check("[d Xi/d z, eta]", &c3, &Nu::zero(EXACT)) {
                    return Ok(c);
                }
                let c4 = q_zb.commutator(&self.etabar_hat[k])?;
                if let Some(c) = op_check("[d Xi/d zbar, etabar]", &c4, &Nu::zero(EXACT)) {
                    return Ok(c);
                }
            }
        }
        Ok(Check::pass("commrel", alloc::format!("six identities, m = {m}")))
    }

    /// `z^k, η̂^p` pairwise commute, and so do `z̄^l, η̄̂^q`.
    pub fn check_commuting_families(&self) -> Result<Check, Error> {
        let b = self.base();
        let m = b.m;
        let mul = |i: usize| Nu::single(0, DiffOp::mul_by(&Jet::var(b, i)), EXACT);
        let zero: HOp = Nu::zero(EXACT);
        for p in 0..m {
            for q in 0..m {
                let pairs = [
                    (mul(b.z(p)), self.eta_hat[q].clone()),
                    (self.eta_hat[p].clone(), self.eta_hat[q].clone()),
                    (mul(b.zbar(p)), self.etabar_hat[q].clone()),
                    (self.etabar_hat[p].clone(), self.etabar_hat[q].clone()),
                ];
                for (x, y) in pairs {
                    if let Some(c) = op_check("commuting family", &x.commutator(&y)?, &zero) {
                        return Ok(c);
                    }
                }
            }
        }
        Ok(Check::pass("commuting-families", "[z, eta^], [eta^, eta^], [zb, etab^], [etab^, etab^] vanish"))
    }

    /// `f *_h η^p = η^p f + h g^{l̄p} ∂f/∂z̄^l` and
    /// `η̄^q *_h f = f η̄^q + h g^{q̄k} ∂f/∂z^k`.
    pub fn check_etaf(&self, f: &Jet) -> Result<Check, Error> {
        let (b, t) = (self.base(), self.tangent());
        for p in 0..b.m {
            let eta = h_const(Jet::var(t, t.fib(p)));
            let etab = h_const(Jet::var(t, t.fibbar(p)));
            let fl = h_const(f.lift(t));
            let lhs = self.mul(&fl, &eta)?;
            let mut h1 = Jet::zero(b);
            for l in 0..b.m {
                h1.add_scaled(&(self.chart.gu(l, p) * &f.deriv(b.zbar(l))), &Scalar::one());
            }
            let want = Nu::from_terms([(0, &f.lift(t) * &Jet::var(t, t.fib(p))), (1, h1.lift(t))], EXACT);
            if let Some(e) = lhs.first_difference(&want) {
                return Ok(Check::fail("etaf", alloc::format!("f *_h eta at h^{e}")));
            }
            let lhs = self.mul(&etab, &fl)?;
            let mut h1 = Jet::zero(b);
            for k in 0..b.m {
                h1.add_scaled(&(self.chart.gu(p, k) * &f.deriv(b.z(k))), &Scalar::one());
            }
            let want = Nu::from_terms([(0, &f.lift(t) * &Jet::var(t, t.fibbar(p))), (1, h1.lift(t))], EXACT);
            if let Some(e) = lhs.first_difference(&want) {
                return Ok(Check::fail("etaf", alloc::format!("etabar *_h f at h^{e}")));
            }
        }
        Ok(Check::pass("etaf", "f *_h eta and etabar *_h f"))
    }

    /// The left and right multiplication formulas for holomorphic `a`,
    /// antiholomorphic `b`, the fibre coordinates and the derivatives of
    /// `Ξ_h`, applied to each test symbol.
    pub fn check_leftast(&self, a: &Jet, bfun: &Jet, tests: &[HSymbol]) -> Result<Check, Error> {
        let t = self.tangent();
        let m = t.m;
        let xi = self.xi_h();
        let d_xi = |i: usize| xi.map(|_, j| Ok(j.deriv(i))).unwrap();
        let hd = |i: usize, q: &HSymbol| q.map(|_, j| Ok(j.deriv(i))).unwrap();
        let mulsym = |x: &HSymbol, q: &HSymbol| x.convolve(q, |u, v| u.try_mul(v));
        for q in tests {
            let mut cases: Vec<(String, HSymbol, HSymbol)> = Vec::new();
            let al = h_const(a.lift(t));
            let bl = h_const(bfun.lift(t));
            cases.push(("L_a".into(), self.mul(&al, q)?, mulsym(&al, q)?));
            cases.push(("R_b".into(), self.mul(q, &bl)?, mulsym(q, &bl)?));
            for p in 0..m {
                let eta = h_const(Jet::var(t, t.fib(p)));
                let etab = h_const(Jet::var(t, t.fibbar(p)));
                cases.push(("L_eta".into(), self.mul(&eta, q)?, mulsym(&eta, q)?));
                cases.push(("R_etabar".into(), self.mul(q, &etab)?, mulsym(q, &etab)?));
                let x = d_xi(t.fib(p));
                cases.push(("L_dXi/deta".into(), self.mul(&x, q)?, hd(t.fib(p), q).try_add(&mulsym(&x, q)?)?));
                let x = d_xi(t.fibbar(p));
                cases.push(("R_dXi/detabar".into(), self.mul(q, &x)?, hd(t.fibbar(p), q).try_add(&mulsym(&x, q)?)?));
                let x = d_xi(t.z(p));
                cases.push(("L_dXi/dz".into(), self.mul(&x, q)?, hd(t.z(p), q).try_add(&mulsym(&x, q)?)?));
                let x = d_xi(t.zbar(p));
                cases.push(("R_dXi/dzbar".into(), self.mul(q, &x)?, hd(t.zbar(p), q).try_add(&mulsym(&x, q)?)?));
            }
            for (name, got, want) in cases {
                if let Some(e) = got.first_difference(&want) {
                    return Ok(Check::fail("leftast", alloc::format!("{name} on {} at h^{e}", q.render())));
                }
            }
        }
        Ok(Check::pass("leftast", alloc::format!("eight formulas on {} symbols", tests.len())))
    }

    /// `L_{η̄^q} = h L_{g^{q̄p}}(L_{∂Ξ/∂z^p} − L_{∂_pΨ_h + ∂_p log g} − η^k L_{∂_k∂_pΨ_h})`
    /// with `L_f = J_h f J_h⁻¹` and `L_{∂Ξ/∂z^p} = ∂_p + ∂Ξ/∂z^p`.
    pub fn check_lbaretaq(&self, tests: &[HSymbol]) -> Result<Check, Error> {
        let (b, t) = (self.base(), self.tangent());
        let m = b.m;
        let xi = self.xi_h();
        let phi = &self.chart.phi;
        for q in tests {
            let cap = q.terms().values().map(|j| j.degree_in(t.fibre_mask()) as i32).max().unwrap_or(0) + 1;
            let lf =
                |f: &Jet, x: &HSymbol| -> Result<HSymbol, Error> { self.conjugation(f, Side::Left, cap)?.apply(x) };
            for qq in 0..m {
                let lhs = self.mul(&h_const(Jet::var(t, t.fibbar(qq))), q)?;
                let mut rhs: HSymbol = Nu::zero(EXACT);
                for p in 0..m {
                    let dxi = xi.map(|_, j| Ok(j.deriv(t.z(p))))?;
                    let mut inner =
                        q.map(|_, j| Ok(j.deriv(t.z(p))))?.try_add(&dxi.convolve(q, |u, v| u.try_mul(v))?)?;
                    let f0 = phi.deriv(b.z(p));
                    let f1 = self.chart.log_g.deriv(b.z(p));
                    inner = inner.try_sub(&lf(&f0, q)?.shift(-1))?.try_sub(&lf(&f1, q)?)?;
                    for k in 0..m {
                        let fk = phi.deriv(b.z(k)).deriv(b.z(p));
                        let term = lf(&fk, q)?.shift(-1).map(|_, j| Ok(j * &Jet::var(t, t.fib(k))))?;
                        inner = inner.try_sub(&term)?;
                    }
                    rhs = rhs.try_add(&lf(self.chart.gu(qq, p), &inner)?.shift(1))?;
                }
                if let Some(e) = lhs.first_difference(&rhs) {
                    return Ok(Check::fail("lbaretaq", alloc::format!("on {} at h^{e}", q.render())));
                }
            }
        }
        Ok(Check::pass("lbaretaq", alloc::format!("{} symbols", tests.len())))
    }

    /// `L_f = J_h f J_h⁻¹`, `R_f = K_h f K_h⁻¹` on the test symbols, and
    /// `[J_h φ J_h⁻¹, ψ] = [K_h φ K_h⁻¹, ψ] = 0`.
    pub fn check_lfrf(&self, f: &Jet, psi: &Jet, tests: &[HSymbol]) -> Result<Check, Error> {
        let t = self.tangent();
        let fl = h_const(f.lift(t));
        for q in tests {
            let cap = q.terms().values().map(|j| j.degree_in(t.fibre_mask()) as i32).max().unwrap_or(0) + 1;
            let l = self.conjugation(f, Side::Left, cap)?;
            let r = self.conjugation(f, Side::Right, cap)?;
            if let Some(e) = self.mul(&fl, q)?.first_difference(&l.apply(q)?) {
                return Ok(Check::fail("lfrf", alloc::format!("L_f on {} at h^{e}", q.render())));
            }
            if let Some(e) = self.mul(q, &fl)?.first_difference(&r.apply(q)?) {
                return Ok(Check::fail("lfrf", alloc::format!("R_f on {} at h^{e}", q.render())));
            }
            let mp = NuOp::from_op(DiffOp::mul_by(&psi.lift(t)), EXACT);
            for (name, op) in [("J", &l), ("K", &r)] {
                let c = op.commutator(&mp)?;
                if let Some(e) = c.first_difference(&Nu::zero(c.cap())) {
                    return Ok(Check::fail("lfrf", alloc::format!("[{name} phi {name}^-1, psi] at h^{e}")));
                }
            }
        }
        Ok(Check::pass("lfrf", alloc::format!("{} symbols", tests.len())))
    }

    /// Round trip and homomorphism at `h = 1/N`.
    pub fn check_numeric(&self, p: &Jet, q: &Jet, n: i64) -> Result<Check, Error> {
        let pq = self.quantize_at(p, n)?;
        let back = self.dequantize_at(&pq, n)?;
        if let Some((mo, x, y)) = back.first_difference(p) {
            return Ok(Check::fail(
                "numeric",
                alloc::format!("round trip at N = {n}, {}: {x} vs {y}", mo.render(&self.tangent())),
            ));
        }
        let prod = self.mul_at(p, q, n)?;
        let fm = self.tangent().fibre_mask();
        let lhs = self.quantize_at_bounded(&prod, n, p.degree_in(fm) + q.degree_in(fm))?;
        let rhs = pq.try_compose(&self.quantize_at(q, n)?)?;
        if let Some(mo) = lhs.first_difference(&rhs) {
            return Ok(Check::fail(
                "numeric",
                alloc::format!("homomorphism at N = {n}, D[{}]", mo.render(&self.base())),
            ));
        }
        let formal = self.mul(&h_const(p.clone()), &h_const(q.clone()))?;
        let mut at_n = Jet::zero(self.tangent());
        for (e, j) in formal.terms() {
            at_n.add_scaled(j, &Scalar::from_int(n).pow(-*e)?);
        }
        if !at_n.agrees(&prod) {
            return Ok(Check::fail("numeric", alloc::format!("formal product at h = 1/{n} differs")));
        }
        Ok(Check::pass("numeric", alloc::format!("N = {n}")))
    }
}

impl SymbolCalculus {
    /// The formal product `*_h` with `h ↦ ν` against the star product built
    /// from the potential on `TU`, on each pair of fibre polynomials.
    pub fn check_formalization(&self, tm: &crate::star::TmStar, pairs: &[(Jet, Jet)]) -> Result<Check, Error> {
        for (p, q) in pairs {
            let a = formalize(&h_const(p.clone()));
            let b = formalize(&h_const(q.clone()));
            let got = self.mul(&a, &b)?;
            let want = tm.star.mul(&a, &b)?;
            if let Some(e) = got.first_difference(&want) {
                return Ok(Check::fail("formalization", alloc::format!("{} * {} at nu^{e}", p, q)));
            }
        }
        Ok(Check::pass("formalization", alloc::format!("{} pairs through order {}", pairs.len(), tm.star.order())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat() -> SymbolCalculus {
        let v = VarSet::base(1);
        let phi = &Jet::var(v, 0) * &Jet::var(v, 1);
        SymbolCalculus::new(&ChartGeometry::build(&phi, 6).unwrap())
    }

    #[test]
    fn flat_generators() {
        let s = flat();
        let (b, t) = (s.base(), s.tangent());
        let eta = h_const(Jet::var(t, 2));
        let etab = h_const(Jet::var(t, 3));
        assert_eq!(s.quantize(&eta).unwrap(), Nu::single(1, DiffOp::d(b, 1).scale(&Scalar::from_int(-1)), EXACT));
        let q = s.quantize(&etab).unwrap();
        assert_eq!(q.get(1), Some(&DiffOp::d(b, 0)));
        assert_eq!(q.get(0), Some(&DiffOp::mul_by(&-&Jet::var(b, 1))));
        // η̄ *_h η = ηη̄ − h, η *_h η̄ = ηη̄
        let p = s.mul(&etab, &eta).unwrap();
        let ee = &Jet::var(t, 2) * &Jet::var(t, 3);
        assert_eq!(p, Nu::from_terms([(0, ee.clone()), (1, Jet::constant(t, Scalar::from_int(-1)))], EXACT));
        assert_eq!(s.mul(&eta, &etab).unwrap(), h_const(ee));
    }

    #[test]
    fn flat_checks() {
        let s = flat();
        let t = s.tangent();
        assert!(s.check_commrel().unwrap().pass);
        assert!(s.check_commuting_families().unwrap().pass);
        let f = &Jet::var(s.base(), 0).pow(2) * &Jet::var(s.base(), 1);
        assert!(s.check_etaf(&f).unwrap().pass);
        let q = h_const(&Jet::var(t, 2) * &Jet::var(t, 1));
        let c = s.check_lfrf(&f, &Jet::var(s.base(), 1), core::slice::from_ref(&q)).unwrap();
        assert!(c.pass, "{c}");
        let c = s.check_lbaretaq(&[q]).unwrap();
        assert!(c.pass, "{c}");
        let p = &Jet::var(t, 3).pow(2) * &Jet::var(t, 0);
        for n in [1, 2, 5] {
            let c = s.check_numeric(&p, &Jet::var(t, 2), n).unwrap();
            assert!(c.pass, "{c}");
        }
    }

    #[test]
    fn fubini_study() {
        let v = VarSet::base(1);
        let w = &Jet::var(v, 0) * &Jet::var(v, 1);
        let phi = (&Jet::one(v) + &w).truncate(8).log(8).unwrap();
        let c = ChartGeometry::build(&phi, 8).unwrap();
        let s = SymbolCalculus::new(&c);
        let t = s.tangent();
        let q = h_const(&Jet::var(t, 3) * &Jet::var(t, 0));
        assert!(s.check_commrel().unwrap().pass);
        let c2 = s.check_leftast(&Jet::var(v, 0), &Jet::var(v, 1), core::slice::from_ref(&q)).unwrap();
        assert!(c2.pass, "{c2}");
        let tm = crate::star::TmStar::build(&c, 2).unwrap();
        let pairs = [(&Jet::var(t, 3) * &Jet::var(t, 0), &Jet::var(t, 2) * &Jet::var(t, 1))];
        let c3 = s.check_formalization(&tm, &pairs).unwrap();
        assert!(c3.pass, "{c3}");
    }

    #[test]
    fn jk_flat() {
        let s = flat();
        let (b, t) = (s.base(), s.tangent());
        let op = s.jk_conjugation(&Jet::var(b, 1), 1, Side::Left, 3).unwrap();
        let mut want = DiffOp::mul_by(&Jet::var(t, 1));
        want.add_term(Mono::var(2), &Jet::one(t));
        assert_eq!(op, want);
    }
}
