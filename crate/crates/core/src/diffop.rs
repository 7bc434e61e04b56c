//! Differential operators with jet coefficients, `Σ a_α(x) ∂^α`, coefficient
//! on the left.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::mono::display_key;
use crate::nu::{Coeff, Nu};
use crate::{Error, Jet, Mono, Scalar, VarMask, VarSet, EXACT};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DiffOp {
    vars: VarSet,
    terms: BTreeMap<Mono, Jet>,
}

/// A `ν`-graded operator.
pub type NuOp = Nu<DiffOp>;

/// How an exponential series is made finite.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Grading {
    /// Every term differentiates in `mask` and has coefficients free of the
    /// `mask` variables, so each application lowers the `mask`-degree.
    LowersDegreeIn(VarMask),
    /// Every coefficient monomial has positive `mask`-degree and no term
    /// differentiates in `mask`.
    RaisesDegreeIn(VarMask),
}

impl DiffOp {
    pub fn zero(vars: VarSet) -> DiffOp {
        DiffOp { vars, terms: BTreeMap::new() }
    }

    pub fn identity(vars: VarSet) -> DiffOp {
        DiffOp::mul_by(&Jet::one(vars))
    }

    /// Multiplication by `f`.
    pub fn mul_by(f: &Jet) -> DiffOp {
        DiffOp::term(f.clone(), Mono::ONE)
    }

    /// `∂/∂xᵢ`.
    pub fn d(vars: VarSet, i: usize) -> DiffOp {
        DiffOp::term(Jet::one(vars), Mono::var(i))
    }

    /// `c ∂^α`.
    pub fn term(c: Jet, alpha: Mono) -> DiffOp {
        let mut op = DiffOp::zero(c.vars());
        op.add_term(alpha, &c);
        op
    }

    pub fn vars(&self) -> VarSet {
        self.vars
    }

    pub fn terms(&self) -> &BTreeMap<Mono, Jet> {
        &self.terms
    }

    pub fn coeff(&self, alpha: Mono) -> Jet {
        self.terms.get(&alpha).cloned().unwrap_or_else(|| Jet::zero(self.vars))
    }

    /// Adds `c ∂^α`. Exact zeros are dropped; a truncated zero coefficient is
    /// kept because it records how far the operator is known.
    pub fn add_term(&mut self, alpha: Mono, c: &Jet) {
        assert_eq!(c.vars(), self.vars, "operator coefficient on wrong variables");
        match self.terms.get_mut(&alpha) {
            Some(x) => {
                x.add_scaled(c, &Scalar::one());
                if x.is_zero() && x.is_exact() {
                    self.terms.remove(&alpha);
                }
            }
            None => {
                if !(c.is_zero() && c.is_exact()) {
                    self.terms.insert(alpha, c.clone());
                }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.values().all(Jet::is_zero)
    }

    /// Highest derivative order over terms with a stored coefficient.
    pub fn order(&self) -> i32 {
        self.terms.iter().filter(|(_, c)| !c.is_zero()).map(|(a, _)| a.degree() as i32).max().unwrap_or(-1)
    }

    /// Highest derivative order in the `mask` variables.
    pub fn order_in(&self, mask: VarMask) -> u32 {
        self.terms.iter().filter(|(_, c)| !c.is_zero()).map(|(a, _)| a.degree_in(mask)).max().unwrap_or(0)
    }

    pub fn min_valid(&self) -> i32 {
        self.terms.values().map(Jet::valid).min().unwrap_or(EXACT)
    }

    fn check(&self, o: &DiffOp) -> Result<(), Error> {
        if self.vars != o.vars {
            return Err(Error::Structural(alloc::format!(
                "operator variable sets differ: {} vs {}",
                self.vars,
                o.vars
            )));
        }
        Ok(())
    }

    pub fn try_add(&self, o: &DiffOp) -> Result<DiffOp, Error> {
        self.check(o)?;
        let mut out = self.clone();
        for (a, c) in &o.terms {
            out.add_term(*a, c);
        }
        Ok(out)
    }

    pub fn try_sub(&self, o: &DiffOp) -> Result<DiffOp, Error> {
        self.try_add(&o.scale(&Scalar::from_int(-1)))
    }

    pub fn scale(&self, c: &Scalar) -> DiffOp {
        DiffOp { vars: self.vars, terms: self.terms.iter().map(|(a, x)| (*a, x.scale(c))).collect() }
    }

    pub fn map_coeffs(&self, mut f: impl FnMut(Mono, &Jet) -> Jet) -> DiffOp {
        let mut out = DiffOp::zero(self.vars);
        for (a, c) in &self.terms {
            out.add_term(*a, &f(*a, c));
        }
        out
    }

    /// Truncates every coefficient to degree `d`.
    pub fn truncate(&self, d: i32) -> DiffOp {
        self.map_coeffs(|_, c| c.truncate(d))
    }

    /// `f ∘ self`.
    pub fn left_mul(&self, f: &Jet) -> DiffOp {
        self.map_coeffs(|_, c| f * c)
    }

    /// `self ∘ f`.
    pub fn right_mul(&self, f: &Jet) -> DiffOp {
        self.compose(&DiffOp::mul_by(f))
    }

    /// `self ∘ o`, normal-ordered by the Leibniz rule
    /// `∂^α ∘ b = Σ_{γ ≤ α} C(α, γ) (∂^γ b) ∂^{α−γ}`.
    pub fn try_compose(&self, o: &DiffOp) -> Result<DiffOp, Error> {
        self.check(o)?;
        let n = self.vars.nvars();
        let mut out = DiffOp::zero(self.vars);
        let mut cache: BTreeMap<(Mono, Mono), Jet> = BTreeMap::new();
        for (alpha, a) in &self.terms {
            for gamma in alpha.divisors(n) {
                let rest = alpha.div(gamma).unwrap();
                let binom = Scalar::from_int(alpha.binomial(gamma, n) as i64);
                for (beta, b) in &o.terms {
                    let db = cache.entry((gamma, *beta)).or_insert_with(|| b.deriv_mono(gamma));
                    if db.is_zero() && db.is_exact() {
                        continue;
                    }
                    let c = (a * &*db).scale(&binom);
                    out.add_term(rest.mul(*beta), &c);
                }
            }
        }
        Ok(out)
    }

    pub fn compose(&self, o: &DiffOp) -> DiffOp {
        self.try_compose(o).expect("operator variable sets differ")
    }

    pub fn commutator(&self, o: &DiffOp) -> Result<DiffOp, Error> {
        self.try_compose(o)?.try_sub(&o.try_compose(self)?)
    }

    pub fn try_apply(&self, f: &Jet) -> Result<Jet, Error> {
        if f.vars() != self.vars {
            return Err(Error::Structural("operator applied to a jet on other variables".into()));
        }
        let mut out = Jet::zero(self.vars);
        for (alpha, a) in &self.terms {
            out.add_scaled(&(a * &f.deriv_mono(*alpha)), &Scalar::one());
        }
        Ok(out)
    }

    pub fn apply(&self, f: &Jet) -> Jet {
        self.try_apply(f).expect("operator applied to a jet on other variables")
    }

    /// Formal transpose `Pᵗ f = Σ (−1)^{|α|} ∂^α(a_α f)`.
    pub fn adjoint(&self) -> DiffOp {
        let n = self.vars.nvars();
        let mut out = DiffOp::zero(self.vars);
        for (alpha, a) in &self.terms {
            let sign = if alpha.degree() % 2 == 0 { 1 } else { -1 };
            for gamma in alpha.divisors(n) {
                let rest = alpha.div(gamma).unwrap();
                let c = a.deriv_mono(rest).scale_int(sign * alpha.binomial(gamma, n) as i64);
                out.add_term(gamma, &c);
            }
        }
        out
    }

    /// Drops terms differentiating more than `d` times in `mask`; exact on
    /// arguments of `mask`-degree at most `d`.
    pub fn cut_order_in(&self, mask: VarMask, d: u32) -> DiffOp {
        DiffOp {
            vars: self.vars,
            terms: self.terms.iter().filter(|(a, _)| a.degree_in(mask) <= d).map(|(a, c)| (*a, c.clone())).collect(),
        }
    }

    /// Drops coefficient monomials of `mask`-degree above `d`.
    pub fn cut_coeff_degree_in(&self, mask: VarMask, d: u32) -> DiffOp {
        self.map_coeffs(|_, c| c.cut_degree_in(mask, d))
    }

    /// Re-indexes into another variable set (see [`Jet::embed`]).
    pub fn embed(&self, target: VarSet, map: &[usize]) -> DiffOp {
        let mut out = DiffOp::zero(target);
        for (a, c) in &self.terms {
            out.add_term(a.remap(map), &c.embed(target, map));
        }
        out
    }

    pub fn lift(&self, target: VarSet) -> DiffOp {
        let map: Vec<usize> = (0..self.vars.nvars()).collect();
        self.embed(target, &map)
    }

    pub fn agrees(&self, o: &DiffOp) -> bool {
        self.first_difference(o).is_none()
    }

    /// First derivative index whose coefficients differ within their common
    /// validity.
    pub fn first_difference(&self, o: &DiffOp) -> Option<Mono> {
        if self.vars != o.vars {
            return Some(Mono::ONE);
        }
        let zero = Jet::zero(self.vars);
        let mut keys: Vec<Mono> = self.terms.keys().chain(o.terms.keys()).copied().collect();
        keys.sort_by_key(|m| display_key(*m, self.vars.nvars()));
        keys.dedup();
        keys.into_iter().find(|a| {
            let x = self.terms.get(a).unwrap_or(&zero);
            let y = o.terms.get(a).unwrap_or(&zero);
            !x.agrees(y)
        })
    }

    fn check_grading(&self, g: Grading) -> Result<(), Error> {
        match g {
            Grading::LowersDegreeIn(mask) => {
                for (a, c) in &self.terms {
                    if c.is_zero() {
                        continue;
                    }
                    if a.degree_in(mask) == 0 || c.terms().keys().any(|m| m.degree_in(mask) > 0) {
                        return Err(Error::Divergence("operator does not lower the declared degree".into()));
                    }
                }
            }
            Grading::RaisesDegreeIn(mask) => {
                for (a, c) in &self.terms {
                    if a.degree_in(mask) > 0 || c.terms().keys().any(|m| m.degree_in(mask) == 0) {
                        return Err(Error::Divergence("operator does not raise the declared degree".into()));
                    }
                }
            }
        }
        Ok(())
    }

    fn cut(&self, g: Grading, d: u32) -> DiffOp {
        match g {
            Grading::LowersDegreeIn(mask) => self.cut_order_in(mask, d),
            Grading::RaisesDegreeIn(mask) => self.cut_coeff_degree_in(mask, d),
        }
    }

    /// Renders terms as `(coeff)*d_z^2*d_zb`.
    pub fn render(&self) -> String {
        let n = self.vars.nvars();
        let mut keys: Vec<&Mono> = self.terms.keys().collect();
        keys.sort_by_key(|m| display_key(**m, n));
        let mut parts = Vec::new();
        for a in keys {
            let c = &self.terms[a];
            let mut d = Vec::new();
            for i in 0..n {
                match a.exp(i) {
                    0 => {}
                    1 => d.push(alloc::format!("d_{}", self.vars.name(i))),
                    e => d.push(alloc::format!("d_{}^{}", self.vars.name(i), e)),
                }
            }
            if d.is_empty() {
                parts.push(alloc::format!("({c})"));
            } else {
                parts.push(alloc::format!("({c})*{}", d.join("*")));
            }
        }
        if parts.is_empty() {
            "0".into()
        } else {
            parts.join(" + ")
        }
    }
}

impl fmt::Display for DiffOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

impl Coeff for DiffOp {
    fn is_exact_zero(&self) -> bool {
        self.terms.is_empty()
    }
    fn zero_like(&self) -> Self {
        DiffOp::zero(self.vars)
    }
    fn try_add(&self, o: &Self) -> Result<Self, Error> {
        DiffOp::try_add(self, o)
    }
    fn scale(&self, c: &Scalar) -> Self {
        DiffOp::scale(self, c)
    }
    fn agrees(&self, o: &Self) -> bool {
        DiffOp::agrees(self, o)
    }
}

/// `exp(X) = Σ Xᵏ/k!`, exact on arguments of degree at most `d` in the graded
/// variables (for [`Grading::RaisesDegreeIn`]: exact on outputs up to that
/// degree).
pub fn diffop_exp(x: &DiffOp, grading: Grading, d: u32) -> Result<DiffOp, Error> {
    x.check_grading(grading)?;
    let mut out = DiffOp::identity(x.vars);
    let mut pow = DiffOp::identity(x.vars);
    for k in 1..=d as i64 + 1 {
        pow = pow.try_compose(x)?.cut(grading, d).scale(&Scalar::from_ratio(1, k));
        if pow.terms.is_empty() {
            return Ok(out);
        }
        out = out.try_add(&pow)?;
    }
    if pow.terms.values().all(|c| c.is_zero()) {
        return Ok(out);
    }
    Err(Error::Divergence("exponential did not terminate within the grading bound".into()))
}

/// `exp(X) ∘ P ∘ exp(−X)` for `X` lowering the `mask`-degree, exact on
/// arguments of `mask`-degree at most `d`.
pub fn conjugate_exp(x: &DiffOp, p: &DiffOp, mask: VarMask, d: u32) -> Result<DiffOp, Error> {
    let g = Grading::LowersDegreeIn(mask);
    let raise = p.terms.values().map(|c| c.degree_in(mask)).max().unwrap_or(0);
    let right = diffop_exp(&x.scale(&Scalar::from_int(-1)), g, d)?;
    let left = diffop_exp(x, g, d + raise)?;
    Ok(left.try_compose(&p.try_compose(&right)?.cut_order_in(mask, d))?.cut_order_in(mask, d))
}

/// `Σ_k νᵏ ad_Xᵏ(P)/k!`, that is `exp(νX) P exp(−νX)`, through `ν^cap`.
pub fn nu_conjugate(x: &DiffOp, p: &DiffOp, cap: i32) -> Result<NuOp, Error> {
    let mut out = Nu::zero(cap);
    let mut term = p.clone();
    out.set(0, term.clone());
    for k in 1..=cap.max(0) {
        term = x.commutator(&term)?.scale(&Scalar::from_ratio(1, k as i64));
        if term.terms.is_empty() {
            break;
        }
        out.set(k, term.clone());
    }
    Ok(out)
}

impl NuOp {
    pub fn from_op(p: DiffOp, cap: i32) -> NuOp {
        Nu::single(0, p, cap)
    }

    pub fn compose(&self, o: &NuOp) -> Result<NuOp, Error> {
        self.convolve(o, |a, b| a.try_compose(b))
    }

    pub fn commutator(&self, o: &NuOp) -> Result<NuOp, Error> {
        self.compose(o)?.try_sub(&o.compose(self)?)
    }

    pub fn apply(&self, f: &Nu<Jet>) -> Result<Nu<Jet>, Error> {
        self.convolve(f, |a, b| a.try_apply(b))
    }

    pub fn adjoint(&self) -> NuOp {
        self.map(|_, p| Ok(p.adjoint())).unwrap()
    }

    /// Highest `(ν-exponent, order)` violation of naturality, if any: a
    /// natural operator has order at most `r` at `ν^r`.
    pub fn naturality_violation(&self) -> Option<(i32, i32)> {
        self.terms().iter().find(|(k, p)| p.order() > (**k).max(0)).map(|(k, p)| (*k, p.order()))
    }

    pub fn min_valid(&self) -> i32 {
        self.terms().values().map(DiffOp::min_valid).min().unwrap_or(EXACT)
    }

    pub fn render(&self) -> String {
        let mut parts: Vec<String> = self.terms().iter().map(|(k, p)| alloc::format!("nu^{k}*[{p}]")).collect();
        if parts.is_empty() {
            parts.push("0".into());
        }
        let mut s = parts.join(" + ");
        if self.cap() != EXACT {
            s.push_str(&alloc::format!(" + O(nu^{})", self.cap() + 1));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b1() -> VarSet {
        VarSet::base(1)
    }

    #[test]
    fn canonical_commutator() {
        let dz = DiffOp::d(b1(), 0);
        let z = DiffOp::mul_by(&Jet::var(b1(), 0));
        let p = dz.compose(&z);
        let want = DiffOp::term(Jet::var(b1(), 0), Mono::var(0)).try_add(&DiffOp::identity(b1())).unwrap();
        assert_eq!(p, want);
        assert_eq!(DiffOp::d(b1(), 1).compose(&dz), DiffOp::term(Jet::one(b1()), Mono::from_exps(&[1, 1])));
    }

    #[test]
    fn flat_generators() {
        // (−h∂_z̄)(h∂_z − z̄) = −h²∂_z∂_z̄ + h z̄ ∂_z̄ + h, h = 1/2
        let h = Scalar::from_ratio(1, 2);
        let eta = DiffOp::d(b1(), 1).scale(&-&h);
        let etab = DiffOp::d(b1(), 0).scale(&h).try_sub(&DiffOp::mul_by(&Jet::var(b1(), 1))).unwrap();
        let p = eta.compose(&etab);
        let h2 = &h * &h;
        let want = DiffOp::term(Jet::constant(b1(), -&h2), Mono::from_exps(&[1, 1]))
            .try_add(&DiffOp::term(Jet::var(b1(), 1).scale(&h), Mono::var(1)))
            .unwrap()
            .try_add(&DiffOp::mul_by(&Jet::constant(b1(), h.clone())))
            .unwrap();
        assert_eq!(p, want);
    }

    #[test]
    fn exp_of_vector_field() {
        // exp(−iξ∂_z̄) z̄ = z̄ − iξ
        let c = VarSet::cotangent(1);
        let x = DiffOp::term(Jet::var(c, 2).scale(&-Scalar::i()), Mono::var(1));
        let e = diffop_exp(&x, Grading::RaisesDegreeIn(c.fib_mask()), 3).unwrap();
        let got = e.apply(&Jet::var(c, 1));
        let want = &Jet::var(c, 1) - &Jet::var(c, 2).scale(&Scalar::i());
        assert_eq!(got, want);
        let back = diffop_exp(&x.scale(&Scalar::from_int(-1)), Grading::RaisesDegreeIn(c.fib_mask()), 3)
            .unwrap()
            .compose(&e)
            .cut_coeff_degree_in(c.fib_mask(), 3);
        assert_eq!(back, DiffOp::identity(c));
    }

    #[test]
    fn divergence_detected() {
        let x = DiffOp::mul_by(&Jet::var(b1(), 0));
        assert!(matches!(diffop_exp(&x, Grading::LowersDegreeIn(0b01), 2), Err(Error::Divergence(_))));
    }

    #[test]
    fn conjugation_of_zbar() {
        // J z̄ J⁻¹ with J = exp(h ∂_η ∂_z̄) on the flat tangent chart
        let t = VarSet::tangent(1);
        let h = Scalar::from_ratio(1, 3);
        let x = DiffOp::term(Jet::constant(t, h.clone()), Mono::from_exps(&[0, 1, 1, 0]));
        let p = DiffOp::mul_by(&Jet::var(t, 1));
        let got = conjugate_exp(&x, &p, t.fib_mask(), 3).unwrap();
        let want = p.try_add(&DiffOp::term(Jet::constant(t, h), Mono::var(2))).unwrap();
        assert_eq!(got, want);
    }

    #[test]
    fn adjoint_of_derivative() {
        let z = Jet::var(b1(), 0);
        let p = DiffOp::term(z.clone(), Mono::var(0));
        // (z∂)ᵗ = −∂∘z = −z∂ − 1
        let want = DiffOp::term(-&z, Mono::var(0))
            .try_add(&DiffOp::mul_by(&Jet::constant(b1(), Scalar::from_int(-1))))
            .unwrap();
        assert_eq!(p.adjoint(), want);
    }
}
