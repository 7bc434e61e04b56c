//! Truncated formal Laurent series in `ν`, optionally carrying a `log ν`
//! multiple.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::jet::vadd;
use crate::{Error, Jet, Scalar, EXACT};

/// Payloads of a [`Nu`] series.
pub trait Coeff: Clone {
    /// A zero carrying no truncation information; such payloads are not
    /// stored.
    fn is_exact_zero(&self) -> bool;
    fn zero_like(&self) -> Self;
    fn try_add(&self, o: &Self) -> Result<Self, Error>;
    fn scale(&self, c: &Scalar) -> Self;
    /// Equality within the known part of both operands.
    fn agrees(&self, o: &Self) -> bool;
}

impl Coeff for Scalar {
    fn is_exact_zero(&self) -> bool {
        self.is_zero()
    }
    fn zero_like(&self) -> Self {
        Scalar::zero()
    }
    fn try_add(&self, o: &Self) -> Result<Self, Error> {
        Ok(self + o)
    }
    fn scale(&self, c: &Scalar) -> Self {
        self * c
    }
    fn agrees(&self, o: &Self) -> bool {
        self == o
    }
}

impl Coeff for Jet {
    fn is_exact_zero(&self) -> bool {
        self.is_zero() && self.is_exact()
    }
    fn zero_like(&self) -> Self {
        Jet::zero(self.vars())
    }
    fn try_add(&self, o: &Self) -> Result<Self, Error> {
        Jet::try_add(self, o)
    }
    fn scale(&self, c: &Scalar) -> Self {
        Jet::scale(self, c)
    }
    fn agrees(&self, o: &Self) -> bool {
        Jet::agrees(self, o)
    }
}

/// `Σ_{k ≤ cap} ν^k T_k + log_nu · log ν`. Exponents above `cap` are unknown.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Nu<T> {
    pub log_nu: i64,
    terms: BTreeMap<i32, T>,
    cap: i32,
}

pub type NuJet = Nu<Jet>;

impl<T: Coeff> Nu<T> {
    pub fn zero(cap: i32) -> Self {
        Nu { log_nu: 0, terms: BTreeMap::new(), cap }
    }

    pub fn single(k: i32, t: T, cap: i32) -> Self {
        let mut n = Nu::zero(cap);
        n.set(k, t);
        n
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (i32, T)>, cap: i32) -> Self {
        let mut n = Nu::zero(cap);
        for (k, t) in terms {
            n.add_at(k, &t).expect("payload shapes differ");
        }
        n
    }

    pub fn cap(&self) -> i32 {
        self.cap
    }

    pub fn terms(&self) -> &BTreeMap<i32, T> {
        &self.terms
    }

    pub fn get(&self, k: i32) -> Option<&T> {
        self.terms.get(&k)
    }

    /// Payload at `ν^k`, or `zero` when absent.
    pub fn at(&self, k: i32, zero: &T) -> T {
        self.terms.get(&k).cloned().unwrap_or_else(|| zero.clone())
    }

    pub fn set(&mut self, k: i32, t: T) {
        if k > self.cap || t.is_exact_zero() {
            self.terms.remove(&k);
        } else {
            self.terms.insert(k, t);
        }
    }

    pub fn add_at(&mut self, k: i32, t: &T) -> Result<(), Error> {
        if k > self.cap {
            return Ok(());
        }
        let v = match self.terms.get(&k) {
            Some(x) => x.try_add(t)?,
            None => t.clone(),
        };
        self.set(k, v);
        Ok(())
    }

    /// Lowest exponent that may be nonzero.
    pub fn valuation(&self) -> i32 {
        self.terms.keys().next().copied().unwrap_or(EXACT).min(self.cap.saturating_add(1))
    }

    pub fn truncate(&self, cap: i32) -> Self {
        let cap = cap.min(self.cap);
        Nu { log_nu: self.log_nu, terms: self.terms.range(..=cap).map(|(k, t)| (*k, t.clone())).collect(), cap }
    }

    pub fn try_add(&self, o: &Self) -> Result<Self, Error> {
        let mut out = self.truncate(o.cap);
        out.log_nu += o.log_nu;
        for (k, t) in o.terms.range(..=out.cap) {
            out.add_at(*k, t)?;
        }
        Ok(out)
    }

    pub fn try_sub(&self, o: &Self) -> Result<Self, Error> {
        self.try_add(&o.neg())
    }

    pub fn neg(&self) -> Self {
        Nu {
            log_nu: -self.log_nu,
            terms: self.terms.iter().map(|(k, t)| (*k, t.scale(&Scalar::from_int(-1)))).collect(),
            cap: self.cap,
        }
    }

    /// Multiplies the payloads by `c`. A `log ν` multiple is only defined to
    /// scale by integers, so it must vanish here.
    pub fn scale(&self, c: &Scalar) -> Self {
        assert!(self.log_nu == 0, "scaling a series with a log ν multiple");
        let mut out = Nu::zero(self.cap);
        for (k, t) in &self.terms {
            out.set(*k, t.scale(c));
        }
        out
    }

    /// Multiplication by `ν^s`.
    pub fn shift(&self, s: i32) -> Self {
        Nu {
            log_nu: self.log_nu,
            terms: self.terms.iter().map(|(k, t)| (k + s, t.clone())).collect(),
            cap: vadd(self.cap, s),
        }
    }

    pub fn map<U: Coeff>(&self, mut f: impl FnMut(i32, &T) -> Result<U, Error>) -> Result<Nu<U>, Error> {
        let mut out = Nu::zero(self.cap);
        for (k, t) in &self.terms {
            out.set(*k, f(*k, t)?);
        }
        Ok(out)
    }

    /// Cauchy product with the sharp cap rule.
    pub fn convolve<U: Coeff, V: Coeff>(
        &self,
        o: &Nu<U>,
        mut f: impl FnMut(&T, &U) -> Result<V, Error>,
    ) -> Result<Nu<V>, Error> {
        if self.log_nu != 0 || o.log_nu != 0 {
            return Err(Error::Structural("product of series carrying log ν".into()));
        }
        let cap = vadd(self.cap, o.valuation()).min(vadd(o.cap, self.valuation()));
        let mut out: Nu<V> = Nu::zero(cap);
        for (i, a) in &self.terms {
            for (j, b) in &o.terms {
                if i + j > cap {
                    break;
                }
                let p = f(a, b)?;
                out.add_at(i + j, &p)?;
            }
        }
        Ok(out)
    }

    /// Term-wise `d/dν`; the `log ν` multiple contributes `log_nu · one / ν`.
    pub fn d_dnu(&self, one: &T) -> Result<Self, Error> {
        let mut out = Nu::zero(self.cap - 1);
        for (k, t) in &self.terms {
            if *k != 0 {
                out.add_at(k - 1, &t.scale(&Scalar::from_int(*k as i64)))?;
            }
        }
        if self.log_nu != 0 {
            out.add_at(-1, &one.scale(&Scalar::from_int(self.log_nu)))?;
        }
        Ok(out)
    }

    /// Equality through the lower cap.
    pub fn agrees(&self, o: &Self) -> bool {
        self.first_difference(o).is_none()
    }

    /// Lowest exponent at which the two series differ within both caps.
    pub fn first_difference(&self, o: &Self) -> Option<i32> {
        if self.log_nu != o.log_nu {
            return Some(i32::MIN);
        }
        let cap = self.cap.min(o.cap);
        let mut keys: Vec<i32> = self.terms.keys().chain(o.terms.keys()).copied().filter(|k| *k <= cap).collect();
        keys.sort_unstable();
        keys.dedup();
        for k in keys {
            let same = match (self.terms.get(&k), o.terms.get(&k)) {
                (Some(a), Some(b)) => a.agrees(b),
                (Some(a), None) => a.agrees(&a.zero_like()),
                (None, Some(b)) => b.zero_like().agrees(b),
                (None, None) => true,
            };
            if !same {
                return Some(k);
            }
        }
        None
    }
}

impl NuJet {
    pub fn mul(&self, o: &NuJet) -> Result<NuJet, Error> {
        self.convolve(o, |a, b| a.try_mul(b))
    }

    /// Lowest jet validity over the stored payloads.
    pub fn min_valid(&self) -> i32 {
        self.terms.values().map(Jet::valid).min().unwrap_or(EXACT)
    }

    pub fn truncate_jets(&self, d: i32) -> NuJet {
        self.map(|_, j| Ok(j.truncate(d))).unwrap()
    }

    pub fn render(&self) -> String {
        let mut parts: Vec<String> = Vec::new();
        if self.log_nu != 0 {
            parts.push(alloc::format!("{}*log(nu)", self.log_nu));
        }
        for (k, j) in &self.terms {
            parts.push(alloc::format!("nu^{k}*({j})"));
        }
        if parts.is_empty() {
            parts.push("0".into());
        }
        let mut s = parts.join(" + ");
        if self.cap != EXACT {
            s.push_str(&alloc::format!(" + O(nu^{})", self.cap + 1));
        }
        s
    }
}

impl fmt::Display for NuJet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::VarSet;

    fn c(n: i64) -> Scalar {
        Scalar::from_int(n)
    }

    #[test]
    fn sharp_cap() {
        // ν·(1 + ν + O(ν³)) is known through ν⁴... only through ν³ + 1
        let a: Nu<Scalar> = Nu::from_terms([(1, c(1))], EXACT);
        let b: Nu<Scalar> = Nu::from_terms([(0, c(1)), (1, c(1))], 2);
        let p = a.convolve(&b, |x, y| Ok(x * y)).unwrap();
        assert_eq!(p.cap(), 3);
        assert_eq!(p.terms().len(), 2);
    }

    #[test]
    fn valuation_adds() {
        let a: Nu<Scalar> = Nu::from_terms([(-1, c(2)), (0, c(1))], 4);
        let b: Nu<Scalar> = Nu::from_terms([(2, c(3))], 4);
        let p = a.convolve(&b, |x, y| Ok(x * y)).unwrap();
        assert_eq!(p.valuation(), a.valuation() + b.valuation());
    }

    #[test]
    fn log_nu_derivative() {
        let v = VarSet::base(1);
        let mut a: NuJet = Nu::from_terms([(2, Jet::var(v, 0))], 5);
        a.log_nu = -1;
        let d = a.d_dnu(&Jet::one(v)).unwrap();
        assert_eq!(d.get(-1), Some(&Jet::constant(v, c(-1))));
        assert_eq!(d.get(1), Some(&Jet::var(v, 0).scale_int(2)));
        assert_eq!(d.cap(), 4);
    }

    #[test]
    fn inexact_zero_is_kept() {
        let v = VarSet::base(1);
        let a: NuJet = Nu::single(0, Jet::zero(v).truncate(3), 2);
        assert_eq!(a.terms().len(), 1);
        assert_eq!(a.min_valid(), 3);
    }
}
