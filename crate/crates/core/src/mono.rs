//! Variable sets and packed exponent vectors.

use alloc::vec::Vec;
use core::fmt;

/// Which coordinates a jet or operator lives on.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, PartialOrd, Ord)]
pub enum VarKind {
    /// `z¹..zᵐ, z̄¹..z̄ᵐ`.
    Base,
    /// Base plus tangent fibre coordinates `η, η̄`.
    Tangent,
    /// Base plus cotangent fibre coordinates `ξ, ξ̄`.
    Cotangent,
    /// Base plus `τ = w − z`, `τ̄ = w̄ − z̄` on the formal neighbourhood of the
    /// diagonal.
    Diagonal,
}

/// Largest supported complex dimension (the packed exponent holds 16
/// variables).
pub const MAX_DIM: usize = 4;

/// A variable set. Indices are laid out as `[z, z̄, fibre, fibre-bar]`, each
/// block of length `m`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, PartialOrd, Ord)]
pub struct VarSet {
    pub kind: VarKind,
    pub m: usize,
}

/// Bitmask over variable indices.
pub type VarMask = u16;

impl VarSet {
    pub fn base(m: usize) -> Self {
        VarSet { kind: VarKind::Base, m }
    }
    pub fn tangent(m: usize) -> Self {
        VarSet { kind: VarKind::Tangent, m }
    }
    pub fn cotangent(m: usize) -> Self {
        VarSet { kind: VarKind::Cotangent, m }
    }
    pub fn diagonal(m: usize) -> Self {
        VarSet { kind: VarKind::Diagonal, m }
    }

    pub fn nvars(&self) -> usize {
        match self.kind {
            VarKind::Base => 2 * self.m,
            _ => 4 * self.m,
        }
    }

    pub fn z(&self, k: usize) -> usize {
        k
    }
    pub fn zbar(&self, l: usize) -> usize {
        self.m + l
    }
    /// Holomorphic fibre variable (`η`, `ξ` or `τ`).
    pub fn fib(&self, k: usize) -> usize {
        debug_assert!(self.kind != VarKind::Base);
        2 * self.m + k
    }
    /// Antiholomorphic fibre variable (`η̄`, `ξ̄` or `τ̄`).
    pub fn fibbar(&self, l: usize) -> usize {
        debug_assert!(self.kind != VarKind::Base);
        3 * self.m + l
    }

    fn block(&self, start: usize) -> VarMask {
        (((1u32 << self.m) - 1) << start) as VarMask
    }
    pub fn z_mask(&self) -> VarMask {
        self.block(0)
    }
    pub fn zbar_mask(&self) -> VarMask {
        self.block(self.m)
    }
    pub fn base_mask(&self) -> VarMask {
        self.z_mask() | self.zbar_mask()
    }
    pub fn fib_mask(&self) -> VarMask {
        if self.kind == VarKind::Base {
            0
        } else {
            self.block(2 * self.m)
        }
    }
    pub fn fibbar_mask(&self) -> VarMask {
        if self.kind == VarKind::Base {
            0
        } else {
            self.block(3 * self.m)
        }
    }
    pub fn fibre_mask(&self) -> VarMask {
        self.fib_mask() | self.fibbar_mask()
    }
    pub fn all_mask(&self) -> VarMask {
        ((1u32 << self.nvars()) - 1) as VarMask
    }

    /// Holomorphic coordinates in pairing order: `z` then (on `TM`) `η`.
    pub fn holomorphic(&self) -> Vec<usize> {
        let mut v: Vec<usize> = (0..self.m).collect();
        if self.kind != VarKind::Base {
            v.extend((0..self.m).map(|k| self.fib(k)));
        }
        v
    }

    /// Antiholomorphic coordinates paired index-by-index with
    /// [`VarSet::holomorphic`].
    pub fn antiholomorphic(&self) -> Vec<usize> {
        let mut v: Vec<usize> = (0..self.m).map(|l| self.zbar(l)).collect();
        if self.kind != VarKind::Base {
            v.extend((0..self.m).map(|l| self.fibbar(l)));
        }
        v
    }

    /// Printable name of variable `i`.
    pub fn name(&self, i: usize) -> alloc::string::String {
        let m = self.m;
        let (stem, k) = match i / m {
            0 => ("z", i),
            1 => ("zb", i - m),
            2 => (self.fib_stem(), i - 2 * m),
            _ => (self.fibbar_stem(), i - 3 * m),
        };
        if m == 1 {
            stem.into()
        } else {
            alloc::format!("{stem}{}", k + 1)
        }
    }

    fn fib_stem(&self) -> &'static str {
        match self.kind {
            VarKind::Tangent => "eta",
            VarKind::Cotangent => "xi",
            _ => "tau",
        }
    }
    fn fibbar_stem(&self) -> &'static str {
        match self.kind {
            VarKind::Tangent => "etab",
            VarKind::Cotangent => "xib",
            _ => "taub",
        }
    }

    /// The base variable set of the same dimension.
    pub fn base_of(&self) -> VarSet {
        VarSet::base(self.m)
    }
}

impl fmt::Display for VarSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}({})", self.kind, self.m)
    }
}

/// Exponent vector over at most 16 variables, one byte per variable.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Debug)]
pub struct Mono(pub u128);

impl Mono {
    pub const ONE: Mono = Mono(0);

    pub fn var(i: usize) -> Mono {
        Mono(1u128 << (8 * i))
    }

    pub fn var_pow(i: usize, e: u32) -> Mono {
        debug_assert!(e < 256);
        Mono((e as u128) << (8 * i))
    }

    pub fn from_exps(exps: &[u32]) -> Mono {
        let mut m = Mono::ONE;
        for (i, &e) in exps.iter().enumerate() {
            m = m.with(i, e);
        }
        m
    }

    pub fn exp(self, i: usize) -> u32 {
        ((self.0 >> (8 * i)) & 0xff) as u32
    }

    pub fn with(self, i: usize, e: u32) -> Mono {
        debug_assert!(e < 256);
        let mask = !(0xffu128 << (8 * i));
        Mono((self.0 & mask) | ((e as u128) << (8 * i)))
    }

    pub fn exps(self, n: usize) -> Vec<u32> {
        (0..n).map(|i| self.exp(i)).collect()
    }

    pub fn degree(self) -> u32 {
        let mut x = self.0;
        let mut d = 0;
        while x != 0 {
            d += (x & 0xff) as u32;
            x >>= 8;
        }
        d
    }

    /// Total degree in the variables selected by `mask`.
    pub fn degree_in(self, mask: VarMask) -> u32 {
        let mut d = 0;
        let mut m = mask;
        while m != 0 {
            let i = m.trailing_zeros() as usize;
            d += self.exp(i);
            m &= m - 1;
        }
        d
    }

    /// Keeps only the variables in `mask`.
    pub fn restrict(self, mask: VarMask) -> Mono {
        let mut out = Mono::ONE;
        let mut m = mask;
        while m != 0 {
            let i = m.trailing_zeros() as usize;
            out = out.with(i, self.exp(i));
            m &= m - 1;
        }
        out
    }

    pub fn mul(self, o: Mono) -> Mono {
        Mono(self.0 + o.0)
    }

    /// `self / o` when `o` divides `self`.
    pub fn div(self, o: Mono) -> Option<Mono> {
        if self.divides_by(o) {
            Some(Mono(self.0 - o.0))
        } else {
            None
        }
    }

    pub fn divides_by(self, o: Mono) -> bool {
        let (mut a, mut b) = (self.0, o.0);
        while b != 0 {
            if (a & 0xff) < (b & 0xff) {
                return false;
            }
            a >>= 8;
            b >>= 8;
        }
        true
    }

    /// Variables with a positive exponent.
    pub fn support(self) -> VarMask {
        let mut s = 0;
        for i in 0..16 {
            if self.exp(i) > 0 {
                s |= 1 << i;
            }
        }
        s
    }

    /// All `β ≤ self` componentwise.
    pub fn divisors(self, n: usize) -> Vec<Mono> {
        let mut out = alloc::vec![Mono::ONE];
        for i in 0..n {
            let e = self.exp(i);
            if e == 0 {
                continue;
            }
            let prev = core::mem::take(&mut out);
            for b in prev {
                for k in 0..=e {
                    out.push(b.with(i, k));
                }
            }
        }
        out
    }

    /// All exponent vectors over `vars` (indices) with total degree exactly `d`.
    pub fn all_of_degree(vars: &[usize], d: u32) -> Vec<Mono> {
        fn rec(vars: &[usize], d: u32, acc: Mono, out: &mut Vec<Mono>) {
            match vars.split_first() {
                None => {
                    if d == 0 {
                        out.push(acc)
                    }
                }
                Some((&v, rest)) => {
                    if rest.is_empty() {
                        out.push(acc.with(v, d));
                    } else {
                        for e in (0..=d).rev() {
                            rec(rest, d - e, acc.with(v, e), out);
                        }
                    }
                }
            }
        }
        let mut out = Vec::new();
        rec(vars, d, Mono::ONE, &mut out);
        out
    }

    /// All exponent vectors over `vars` with total degree at most `d`.
    pub fn all_up_to(vars: &[usize], d: u32) -> Vec<Mono> {
        (0..=d).flat_map(|k| Mono::all_of_degree(vars, k)).collect()
    }

    /// `self! = Π aᵢ!`.
    pub fn factorial(self, n: usize) -> u64 {
        (0..n).map(|i| fact(self.exp(i))).product()
    }

    /// Multinomial `Π C(aᵢ, bᵢ)` for `b ≤ a`.
    pub fn binomial(self, b: Mono, n: usize) -> u64 {
        (0..n).map(|i| binom(self.exp(i), b.exp(i))).product()
    }

    /// Falling factorial `Π aᵢ!/(aᵢ−bᵢ)!`, zero unless `b ≤ a`.
    pub fn falling(self, b: Mono, n: usize) -> u64 {
        let mut out = 1u64;
        for i in 0..n {
            let (a, k) = (self.exp(i), b.exp(i));
            if k > a {
                return 0;
            }
            for j in 0..k {
                out *= (a - j) as u64;
            }
        }
        out
    }

    /// Moves the exponents through an index map `src → dst`.
    pub fn remap(self, map: &[usize]) -> Mono {
        let mut out = Mono::ONE;
        for (i, &j) in map.iter().enumerate() {
            let e = self.exp(i);
            if e > 0 {
                out = out.with(j, out.exp(j) + e);
            }
        }
        out
    }

    /// Human-readable rendering such as `z^2*zb`.
    pub fn render(self, vars: &VarSet) -> alloc::string::String {
        let mut parts = Vec::new();
        for i in 0..vars.nvars() {
            match self.exp(i) {
                0 => {}
                1 => parts.push(vars.name(i)),
                e => parts.push(alloc::format!("{}^{}", vars.name(i), e)),
            }
        }
        if parts.is_empty() {
            "1".into()
        } else {
            parts.join("*")
        }
    }
}

pub(crate) fn fact(n: u32) -> u64 {
    (1..=n as u64).product()
}

pub(crate) fn binom(n: u32, k: u32) -> u64 {
    if k > n {
        return 0;
    }
    let mut r = 1u64;
    for j in 0..k as u64 {
        r = r * (n as u64 - j) / (j + 1);
    }
    r
}

/// Canonical display order: total degree, then `z` before `z̄` before the
/// fibre blocks, each lexicographic from the highest power down.
pub fn display_key(m: Mono, n: usize) -> (u32, Vec<core::cmp::Reverse<u32>>) {
    (m.degree(), m.exps(n).into_iter().map(core::cmp::Reverse).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn packing() {
        let a = Mono::from_exps(&[2, 0, 1, 3]);
        assert_eq!(a.degree(), 6);
        assert_eq!(a.exp(3), 3);
        let b = Mono::var(2);
        assert_eq!(a.div(b), Some(Mono::from_exps(&[2, 0, 0, 3])));
        assert_eq!(b.div(a), None);
        assert_eq!(a.divisors(4).len(), 3 * 2 * 4);
        assert_eq!(a.degree_in(0b1001), 5);
    }

    #[test]
    fn enumeration() {
        assert_eq!(Mono::all_of_degree(&[0, 1], 3).len(), 4);
        assert_eq!(Mono::all_up_to(&[0, 1, 2], 2).len(), 10);
    }

    #[test]
    fn masks() {
        let v = VarSet::tangent(2);
        assert_eq!(v.nvars(), 8);
        assert_eq!(v.fib_mask(), 0b0011_0000);
        assert_eq!(v.holomorphic(), alloc::vec![0, 1, 4, 5]);
        assert_eq!(v.name(5), "eta2");
    }
}
