//! Truncated multivariate Taylor series at the chart base point.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::ops::{Add, Mul, Neg, Sub};

use crate::mono::{display_key, Mono, VarMask, VarSet};
use crate::{Error, Scalar};

/// Validity marker of an exact polynomial.
pub const EXACT: i32 = i32::MAX;

/// `a + b` on validity degrees, with [`EXACT`] absorbing.
pub(crate) fn vadd(a: i32, b: i32) -> i32 {
    if a == EXACT || b == EXACT {
        EXACT
    } else {
        a + b
    }
}

pub(crate) fn vsub(a: i32, b: i32) -> i32 {
    if a == EXACT {
        EXACT
    } else {
        a - b
    }
}

/// A jet: the stored monomials are exact up to total degree `valid`, and
/// nothing is known beyond it. `valid == EXACT` marks a polynomial.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Jet {
    vars: VarSet,
    terms: BTreeMap<Mono, Scalar>,
    valid: i32,
}

impl Jet {
    pub fn zero(vars: VarSet) -> Jet {
        Jet { vars, terms: BTreeMap::new(), valid: EXACT }
    }

    pub fn constant(vars: VarSet, c: Scalar) -> Jet {
        Jet::monomial(vars, Mono::ONE, c)
    }

    pub fn one(vars: VarSet) -> Jet {
        Jet::constant(vars, Scalar::one())
    }

    pub fn var(vars: VarSet, i: usize) -> Jet {
        Jet::monomial(vars, Mono::var(i), Scalar::one())
    }

    pub fn monomial(vars: VarSet, m: Mono, c: Scalar) -> Jet {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(m, c);
        }
        Jet { vars, terms, valid: EXACT }
    }

    /// Builds a jet from terms; monomials above `valid` are dropped.
    pub fn from_terms(vars: VarSet, terms: impl IntoIterator<Item = (Mono, Scalar)>, valid: i32) -> Jet {
        let mut j = Jet { vars, terms: BTreeMap::new(), valid };
        for (m, c) in terms {
            j.add_term(m, &c);
        }
        j.clean();
        j
    }

    pub fn vars(&self) -> VarSet {
        self.vars
    }

    pub fn valid(&self) -> i32 {
        self.valid
    }

    pub fn is_exact(&self) -> bool {
        self.valid == EXACT
    }

    pub fn terms(&self) -> &BTreeMap<Mono, Scalar> {
        &self.terms
    }

    pub fn into_terms(self) -> BTreeMap<Mono, Scalar> {
        self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// True when no monomial is stored. A zero jet of finite validity only
    /// says the function vanishes to that order.
    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, m: Mono) -> Scalar {
        self.terms.get(&m).cloned().unwrap_or_else(Scalar::zero)
    }

    pub fn constant_term(&self) -> Scalar {
        self.coeff(Mono::ONE)
    }

    /// Highest stored total degree, `-1` for the zero jet.
    pub fn degree(&self) -> i32 {
        self.terms.keys().map(|m| m.degree() as i32).max().unwrap_or(-1)
    }

    /// Lowest degree that may be nonzero: the lowest stored degree, capped by
    /// `valid + 1`.
    pub fn valuation(&self) -> i32 {
        let low = self.terms.keys().map(|m| m.degree() as i32).min().unwrap_or(EXACT);
        if self.valid == EXACT {
            low
        } else {
            low.min(self.valid + 1)
        }
    }

    pub(crate) fn add_term(&mut self, m: Mono, c: &Scalar) {
        if c.is_zero() || (self.valid != EXACT && m.degree() as i32 > self.valid) {
            return;
        }
        match self.terms.get_mut(&m) {
            Some(x) => {
                *x += c;
                if x.is_zero() {
                    self.terms.remove(&m);
                }
            }
            None => {
                self.terms.insert(m, c.clone());
            }
        }
    }

    fn clean(&mut self) {
        let v = self.valid;
        self.terms.retain(|m, c| !c.is_zero() && (v == EXACT || m.degree() as i32 <= v));
    }

    /// Lowers validity to `min(valid, d)` and drops what lies above.
    pub fn truncate(&self, d: i32) -> Jet {
        let mut j = self.clone();
        j.truncate_mut(d);
        j
    }

    /// Like [`Jet::truncate`], but an exact polynomial of degree at most `d`
    /// stays exact.
    pub fn trim(&self, d: i32) -> Jet {
        if self.valid == EXACT && self.degree() <= d {
            self.clone()
        } else {
            self.truncate(d)
        }
    }

    pub fn truncate_mut(&mut self, d: i32) {
        if d < self.valid {
            self.valid = d;
            self.clean();
        }
    }

    fn check(&self, o: &Jet) -> Result<(), Error> {
        if self.vars != o.vars {
            return Err(Error::Structural(alloc::format!("jet variable sets differ: {} vs {}", self.vars, o.vars)));
        }
        Ok(())
    }

    pub fn try_add(&self, o: &Jet) -> Result<Jet, Error> {
        self.check(o)?;
        let mut out = self.clone();
        out.valid = self.valid.min(o.valid);
        out.clean();
        for (m, c) in &o.terms {
            out.add_term(*m, c);
        }
        Ok(out)
    }

    pub fn try_mul(&self, o: &Jet) -> Result<Jet, Error> {
        self.check(o)?;
        let valid = vadd(self.valid, o.valuation()).min(vadd(o.valid, self.valuation()));
        let mut out = Jet { vars: self.vars, terms: BTreeMap::new(), valid };
        if self.terms.is_empty() || o.terms.is_empty() {
            return Ok(out);
        }
        let mut rhs: Vec<(u32, Mono, &Scalar)> = o.terms.iter().map(|(m, c)| (m.degree(), *m, c)).collect();
        rhs.sort_by_key(|t| t.0);
        for (ma, ca) in &self.terms {
            let da = ma.degree();
            for (db, mb, cb) in &rhs {
                if valid != EXACT && (da + db) as i32 > valid {
                    break;
                }
                let p = ca * *cb;
                out.add_term(ma.mul(*mb), &p);
            }
        }
        Ok(out)
    }

    pub fn scale(&self, c: &Scalar) -> Jet {
        if c.is_zero() {
            return Jet { vars: self.vars, terms: BTreeMap::new(), valid: self.valid };
        }
        Jet { vars: self.vars, terms: self.terms.iter().map(|(m, x)| (*m, x * c)).collect(), valid: self.valid }
    }

    pub fn scale_int(&self, n: i64) -> Jet {
        self.scale(&Scalar::from_int(n))
    }

    /// `self += c·o` in place.
    pub fn add_scaled(&mut self, o: &Jet, c: &Scalar) {
        assert_eq!(self.vars, o.vars, "jet variable sets differ");
        if o.valid < self.valid {
            self.valid = o.valid;
            self.clean();
        }
        if c.is_zero() {
            return;
        }
        for (m, x) in &o.terms {
            self.add_term(*m, &(x * c));
        }
    }

    pub fn pow(&self, k: u32) -> Jet {
        let mut out = Jet::one(self.vars);
        for _ in 0..k {
            out = &out * self;
        }
        out
    }

    /// `∂/∂xᵢ`.
    pub fn deriv(&self, i: usize) -> Jet {
        let mut out = Jet { vars: self.vars, terms: BTreeMap::new(), valid: vsub(self.valid, 1) };
        for (m, c) in &self.terms {
            let e = m.exp(i);
            if e > 0 {
                out.add_term(m.with(i, e - 1), &c.scale_int(e as i64));
            }
        }
        out
    }

    /// `∂^α`.
    pub fn deriv_mono(&self, alpha: Mono) -> Jet {
        if alpha == Mono::ONE {
            return self.clone();
        }
        let n = self.vars.nvars();
        let mut out = Jet { vars: self.vars, terms: BTreeMap::new(), valid: vsub(self.valid, alpha.degree() as i32) };
        for (m, c) in &self.terms {
            if let Some(rest) = m.div(alpha) {
                let f = m.falling(alpha, n);
                out.add_term(rest, &c.scale_int(f as i64));
            }
        }
        out
    }

    /// Sets every variable in `mask` to zero.
    pub fn set_zero(&self, mask: VarMask) -> Jet {
        Jet {
            vars: self.vars,
            terms: self.terms.iter().filter(|(m, _)| m.support() & mask == 0).map(|(m, c)| (*m, c.clone())).collect(),
            valid: self.valid,
        }
    }

    /// Keeps monomials whose degree in `mask` is exactly `d`.
    pub fn part_of_degree(&self, mask: VarMask, d: u32) -> Jet {
        Jet {
            vars: self.vars,
            terms: self.terms.iter().filter(|(m, _)| m.degree_in(mask) == d).map(|(m, c)| (*m, c.clone())).collect(),
            valid: self.valid,
        }
    }

    /// Largest degree in the variables of `mask` over the stored monomials.
    pub fn degree_in(&self, mask: VarMask) -> u32 {
        self.terms.keys().map(|m| m.degree_in(mask)).max().unwrap_or(0)
    }

    /// Drops monomials with `degree_in(mask) > d`. Only meaningful when the
    /// caller knows the discarded part is not needed (a grading cut).
    pub fn cut_degree_in(&self, mask: VarMask, d: u32) -> Jet {
        Jet {
            vars: self.vars,
            terms: self.terms.iter().filter(|(m, _)| m.degree_in(mask) <= d).map(|(m, c)| (*m, c.clone())).collect(),
            valid: self.valid,
        }
    }

    /// Re-indexes into a larger variable set: variable `i` becomes `map[i]`.
    pub fn embed(&self, target: VarSet, map: &[usize]) -> Jet {
        Jet {
            vars: target,
            terms: self.terms.iter().map(|(m, c)| (m.remap(map), c.clone())).collect(),
            valid: self.valid,
        }
    }

    /// Lifts a base jet to `target`, which must share the base block.
    pub fn lift(&self, target: VarSet) -> Jet {
        debug_assert_eq!(self.vars.m, target.m);
        let map: Vec<usize> = (0..self.vars.nvars()).collect();
        self.embed(target, &map)
    }

    /// Restricts to the base variables after the fibre block is known to be
    /// absent (or after [`Jet::set_zero`]).
    pub fn to_base(&self) -> Jet {
        let b = self.vars.base_of();
        let mask = self.vars.fibre_mask();
        Jet {
            vars: b,
            terms: self.terms.iter().filter(|(m, _)| m.support() & mask == 0).map(|(m, c)| (*m, c.clone())).collect(),
            valid: self.valid,
        }
    }

    /// Composition `F(s₁, …, sₙ)` with `sᵢ` jets on `target`. For a
    /// non-polynomial `F` every `sᵢ` must vanish at the origin.
    pub fn substitute(&self, target: VarSet, images: &[Jet]) -> Result<Jet, Error> {
        let n = self.vars.nvars();
        if images.len() != n {
            return Err(Error::Structural("substitution needs one image per variable".into()));
        }
        let mut valid = self.valid;
        for s in images {
            if s.vars != target {
                return Err(Error::Structural("substitution image on wrong variable set".into()));
            }
            if !self.is_exact() && !s.constant_term().is_zero() {
                return Err(Error::Domain("substituting a non-vanishing jet into a truncated series".into()));
            }
            valid = valid.min(s.valid);
        }
        let mut cache: Vec<Vec<Jet>> = images.iter().map(|_| alloc::vec![Jet::one(target)]).collect();
        let mut out = Jet { vars: target, terms: BTreeMap::new(), valid };
        for (m, c) in &self.terms {
            let mut prod = Jet::constant(target, c.clone());
            for i in 0..n {
                let e = m.exp(i) as usize;
                if e == 0 {
                    continue;
                }
                while cache[i].len() <= e {
                    let next = (cache[i].last().unwrap() * &images[i]).truncate(valid);
                    cache[i].push(next);
                }
                prod = (&prod * &cache[i][e]).truncate(valid);
                if prod.is_zero() {
                    break;
                }
            }
            out.add_scaled(&prod, &Scalar::one());
        }
        out.truncate_mut(valid);
        Ok(out)
    }

    /// `exp(self)` to total degree `d` (or less if `self` is less valid). The
    /// constant term must vanish: `e^c` is not a Gaussian rational.
    pub fn exp(&self, d: i32) -> Result<Jet, Error> {
        if !self.constant_term().is_zero() {
            return Err(Error::Domain("exp of a jet with nonzero constant term".into()));
        }
        if self.is_exact() && self.is_zero() {
            return Ok(Jet::one(self.vars));
        }
        let v = self.valid.min(d);
        let u = self.truncate(v);
        let mut out = Jet::one(self.vars).truncate(v);
        let mut term = Jet::one(self.vars);
        let mut k = 1i64;
        loop {
            term = (&term * &u).truncate(v).scale(&Scalar::from_ratio(1, k));
            if term.is_zero() {
                break;
            }
            out.add_scaled(&term, &Scalar::one());
            k += 1;
        }
        Ok(out)
    }

    /// `log(self)` to total degree `d`; the constant term must be 1.
    pub fn log(&self, d: i32) -> Result<Jet, Error> {
        if !self.constant_term().is_one() {
            return Err(Error::Domain("log of a jet whose constant term is not 1".into()));
        }
        if self.is_exact() && self.terms.len() == 1 {
            return Ok(Jet::zero(self.vars));
        }
        let v = self.valid.min(d);
        let mut u = self.truncate(v);
        u.add_term(Mono::ONE, &Scalar::from_int(-1));
        let mut out = Jet::zero(self.vars).truncate(v);
        let mut term = Jet::one(self.vars);
        let mut k = 1i64;
        loop {
            term = (&term * &u).truncate(v);
            if term.is_zero() {
                break;
            }
            let sign = if k % 2 == 1 { 1 } else { -1 };
            out.add_scaled(&term, &Scalar::from_ratio(sign, k));
            k += 1;
        }
        Ok(out)
    }

    /// `1/self` to total degree `d`; the constant term must be nonzero.
    pub fn inverse(&self, d: i32) -> Result<Jet, Error> {
        let c = self.constant_term();
        let ci = c.inv().map_err(|_| Error::Domain("inverse of a jet with zero constant term".into()))?;
        if self.is_exact() && self.terms.len() == 1 {
            return Ok(Jet::constant(self.vars, ci));
        }
        let v = self.valid.min(d);
        // 1/(c(1+u)) = c⁻¹ Σ (−u)^k
        let mut u = self.truncate(v).scale(&ci);
        u.add_term(Mono::ONE, &Scalar::from_int(-1));
        let mu = -&u;
        let mut out = Jet::one(self.vars).truncate(v);
        let mut term = Jet::one(self.vars);
        loop {
            term = (&term * &mu).truncate(v);
            if term.is_zero() {
                break;
            }
            out.add_scaled(&term, &Scalar::one());
        }
        Ok(out.scale(&ci))
    }

    /// `self / o`, computing `1/o` to the validity the product can use.
    pub fn div(&self, o: &Jet, d: i32) -> Result<Jet, Error> {
        Ok((self * &o.inverse(d)?).truncate(d))
    }

    /// True when `self − o` vanishes through the lower of the two validities.
    pub fn agrees(&self, o: &Jet) -> bool {
        self.first_difference(o).is_none()
    }

    /// First monomial (in display order) on which the jets differ within their
    /// common validity.
    pub fn first_difference(&self, o: &Jet) -> Option<(Mono, Scalar, Scalar)> {
        if self.vars != o.vars {
            return Some((Mono::ONE, Scalar::zero(), Scalar::zero()));
        }
        let v = self.valid.min(o.valid);
        let n = self.vars.nvars();
        let mut keys: Vec<Mono> = self.terms.keys().chain(o.terms.keys()).copied().collect();
        keys.sort_by_key(|m| display_key(*m, n));
        keys.dedup();
        for m in keys {
            if v != EXACT && m.degree() as i32 > v {
                continue;
            }
            let (a, b) = (self.coeff(m), o.coeff(m));
            if a != b {
                return Some((m, a, b));
            }
        }
        None
    }

    /// Terms in canonical display order.
    pub fn sorted_terms(&self) -> Vec<(Mono, Scalar)> {
        let n = self.vars.nvars();
        let mut v: Vec<(Mono, Scalar)> = self.terms.iter().map(|(m, c)| (*m, c.clone())).collect();
        v.sort_by_key(|(m, _)| display_key(*m, n));
        v
    }

    /// Complex conjugation of the coefficients together with the swap
    /// `z ↔ z̄`, `fibre ↔ fibre-bar`.
    pub fn bar(&self) -> Jet {
        let m = self.vars.m;
        let n = self.vars.nvars();
        let map: Vec<usize> = (0..n).map(|i| if (i / m) % 2 == 0 { i + m } else { i - m }).collect();
        Jet {
            vars: self.vars,
            terms: self.terms.iter().map(|(mo, c)| (mo.remap(&map), c.conj())).collect(),
            valid: self.valid,
        }
    }

    pub fn render(&self) -> String {
        if self.terms.is_empty() {
            return "0".into();
        }
        let mut s = String::new();
        for (k, (m, c)) in self.sorted_terms().into_iter().enumerate() {
            if k > 0 {
                s.push_str(" + ");
            }
            if m == Mono::ONE {
                s.push_str(&alloc::format!("{c}"));
            } else if c.is_one() {
                s.push_str(&m.render(&self.vars));
            } else {
                s.push_str(&alloc::format!("({c})*{}", m.render(&self.vars)));
            }
        }
        s
    }
}

impl fmt::Display for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())?;
        if self.valid != EXACT {
            write!(f, " + O({})", self.valid + 1)?;
        }
        Ok(())
    }
}

impl Add for &Jet {
    type Output = Jet;
    fn add(self, o: &Jet) -> Jet {
        self.try_add(o).expect("jet variable sets differ")
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, o: &Jet) -> Jet {
        let mut out = self.clone();
        out.add_scaled(o, &Scalar::from_int(-1));
        out
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, o: &Jet) -> Jet {
        self.try_mul(o).expect("jet variable sets differ")
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(&Scalar::from_int(-1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b1() -> VarSet {
        VarSet::base(1)
    }

    #[test]
    fn monomial_product() {
        let z = Jet::var(b1(), 0);
        let zb = Jet::var(b1(), 1);
        let p = &(&z * &zb) * &z;
        assert_eq!(p, Jet::monomial(b1(), Mono::from_exps(&[2, 1]), Scalar::one()));
    }

    #[test]
    fn truncated_square() {
        // ((1+z)(1+z̄))² at D = 2
        let one = Jet::one(b1());
        let a = &(&one + &Jet::var(b1(), 0)) * &(&one + &Jet::var(b1(), 1));
        let a = a.truncate(2);
        let sq = &a * &a;
        let want = Jet::from_terms(
            b1(),
            [
                (Mono::from_exps(&[0, 0]), Scalar::from_int(1)),
                (Mono::from_exps(&[1, 0]), Scalar::from_int(2)),
                (Mono::from_exps(&[0, 1]), Scalar::from_int(2)),
                (Mono::from_exps(&[2, 0]), Scalar::from_int(1)),
                (Mono::from_exps(&[1, 1]), Scalar::from_int(4)),
                (Mono::from_exps(&[0, 2]), Scalar::from_int(1)),
            ],
            2,
        );
        assert_eq!(sq, want);
    }

    #[test]
    fn sharp_validity() {
        let z = Jet::var(b1(), 0);
        let f = (&Jet::one(b1()) + &z).truncate(3);
        // z·f is known through degree 4, f·f through degree 3
        assert_eq!((&z * &f).valid(), 4);
        assert_eq!((&f * &f).valid(), 3);
    }

    #[test]
    fn geometric_series() {
        let a = &Jet::one(b1()) - &Jet::var(b1(), 0);
        let inv = a.inverse(3).unwrap();
        let want = Jet::from_terms(b1(), (0..=3).map(|k| (Mono::var_pow(0, k), Scalar::one())), 3);
        assert_eq!(inv, want);
    }

    #[test]
    fn log_exp_round_trip() {
        let zzb = &Jet::var(b1(), 0) * &Jet::var(b1(), 1);
        let back = zzb.exp(4).unwrap().log(4).unwrap();
        assert!(back.agrees(&zzb));
        assert_eq!(back.valid(), 4);
        assert!(Jet::one(b1()).exp(3).is_err());
        assert_eq!(Jet::zero(b1()).exp(3).unwrap(), Jet::one(b1()));
    }

    #[test]
    fn mismatched_vars() {
        let a = Jet::one(VarSet::base(1));
        let b = Jet::one(VarSet::base(2));
        assert!(matches!(a.try_add(&b), Err(Error::Structural(_))));
    }

    #[test]
    fn substitution_shift() {
        // f(z, z̄) = z z̄ with z̄ ↦ z̄ + τ̄ on the diagonal model
        let d = VarSet::diagonal(1);
        let f = &Jet::var(b1(), 0) * &Jet::var(b1(), 1);
        let img = [Jet::var(d, 0), &Jet::var(d, 1) + &Jet::var(d, 3)];
        let g = f.substitute(d, &img).unwrap();
        let want = &Jet::var(d, 0) * &(&Jet::var(d, 1) + &Jet::var(d, 3));
        assert_eq!(g, want);
    }
}
