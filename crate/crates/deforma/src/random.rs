//! Seeded samplers for test operands and charts.

use deforma_core::{Jet, Mono, Nu, NuJet, Scalar, VarSet, EXACT};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::spec::{ChartSpec, PotentialTerm};

pub struct Sampler {
    rng: ChaCha8Rng,
}

impl Sampler {
    pub fn new(seed: u64) -> Sampler {
        Sampler { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    /// Independent stream for one named consumer.
    pub fn for_stream(seed: u64, name: &str) -> Sampler {
        let h = name.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3));
        Sampler::new(seed ^ h)
    }

    fn small(&mut self) -> (i64, i64) {
        let p = *[-3i64, -2, -1, 1, 2, 3].choose(&mut self.rng).unwrap();
        (p, self.rng.gen_range(1..=3))
    }

    /// A nonzero Gaussian rational with small numerator and denominator.
    pub fn scalar(&mut self) -> Scalar {
        let re = self.small();
        let im = if self.rng.gen_bool(0.3) { self.small() } else { (0, 1) };
        Scalar::from_parts(re, im)
    }

    /// Exact polynomial in the variables `allowed` with up to `terms`
    /// monomials of total degree `1..=max_deg`.
    pub fn poly(&mut self, vars: VarSet, allowed: &[usize], max_deg: u32, terms: usize) -> Jet {
        let mut out = Jet::zero(vars);
        let monos: Vec<Mono> = (1..=max_deg).flat_map(|d| Mono::all_of_degree(allowed, d)).collect();
        while out.is_zero() {
            for _ in 0..self.rng.gen_range(1..=terms) {
                let m = *monos.choose(&mut self.rng).unwrap();
                let c = self.scalar();
                out.add_scaled(&Jet::monomial(vars, m, c), &Scalar::one());
            }
        }
        out
    }

    /// A function on the base of degree at most 3.
    pub fn function(&mut self, vars: VarSet) -> Jet {
        let all: Vec<usize> = (0..2 * vars.m).collect();
        let f = self.poly(vars, &all, 3, 3);
        if self.rng.gen_bool(0.5) {
            &f + &Jet::constant(vars, self.scalar())
        } else {
            f
        }
    }

    pub fn holomorphic(&mut self, vars: VarSet) -> Jet {
        self.poly(vars, &vars.holomorphic(), 3, 2)
    }

    pub fn antiholomorphic(&mut self, vars: VarSet) -> Jet {
        self.poly(vars, &vars.antiholomorphic(), 3, 2)
    }

    /// A function on `TM`: fibre degree at most `fibre`, base degree at
    /// most 2.
    pub fn symbol(&mut self, t: VarSet, fibre: u32) -> Jet {
        let fib: Vec<usize> = (2 * t.m..4 * t.m).collect();
        let base: Vec<usize> = (0..2 * t.m).collect();
        let mut out = Jet::zero(t);
        while out.is_zero() {
            for _ in 0..self.rng.gen_range(1..=3) {
                let f = Mono::all_up_to(&fib, fibre);
                let fm = *f.choose(&mut self.rng).unwrap();
                let b = Mono::all_up_to(&base, 2);
                let bm = *b.choose(&mut self.rng).unwrap();
                let c = self.scalar();
                out.add_scaled(&Jet::monomial(t, fm.mul(bm), c), &Scalar::one());
            }
        }
        out
    }

    /// An element of the diagonal model: a polynomial through `ν¹`.
    pub fn element(&mut self, d: VarSet) -> NuJet {
        let all: Vec<usize> = (0..d.nvars()).collect();
        let a = &self.poly(d, &all, 2, 3) + &Jet::constant(d, self.scalar());
        let b = self.poly(d, &all, 1, 2);
        Nu::from_terms([(0, a), (1, b)], EXACT)
    }

    /// `Σ zᵏz̄ᵏ` plus Hermitian terms `c z^a z̄^b + c̄ z^b z̄^a` of degree 3
    /// and 4, so the Hessian at the origin is the identity.
    pub fn chart(&mut self, m: usize, jet_degree: i32, nu_order: i32) -> ChartSpec {
        let mut spec = ChartSpec::flat(m, jet_degree, nu_order);
        let zs: Vec<usize> = (0..m).collect();
        let zbs: Vec<usize> = (m..2 * m).collect();
        for _ in 0..self.rng.gen_range(1..=3) {
            let total = self.rng.gen_range(3..=4u32);
            let a = self.rng.gen_range(1..total);
            let ma = *Mono::all_of_degree(&zs, a).choose(&mut self.rng).unwrap();
            let mb = *Mono::all_of_degree(&zbs, total - a).choose(&mut self.rng).unwrap();
            let (re, im) = self.small();
            let q = self.rng.gen_range(1..=3) * 2;
            let mono = ma.mul(mb);
            let swapped = Mono::from_exps(&{
                let e = mono.exps(2 * m);
                let mut s = e[m..].to_vec();
                s.extend_from_slice(&e[..m]);
                s
            });
            let im_part = if self.rng.gen_bool(0.5) { im } else { 0 };
            for (mo, sign) in [(mono, 1), (swapped, -1)] {
                spec.potential.push(PotentialTerm {
                    powers: mo.exps(2 * m),
                    re: format!("{re}/{q}"),
                    im: format!("{}/{q}", sign * im_part),
                });
            }
        }
        spec
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic() {
        let v = VarSet::base(2);
        let a = Sampler::new(7).function(v);
        let b = Sampler::new(7).function(v);
        assert_eq!(a, b);
        assert_ne!(Sampler::for_stream(7, "x").function(v), Sampler::for_stream(7, "y").function(v));
    }

    #[test]
    fn charts_are_real_and_nondegenerate() {
        let mut s = Sampler::new(1);
        for m in 1..=2 {
            let spec = s.chart(m, 6, 3);
            let phi = spec.potential_jet().unwrap();
            let conj = {
                let mut out = Jet::zero(phi.vars());
                for (mo, c) in phi.terms() {
                    let e = mo.exps(2 * m);
                    let mut sw = e[m..].to_vec();
                    sw.extend_from_slice(&e[..m]);
                    out.add_scaled(&Jet::monomial(phi.vars(), Mono::from_exps(&sw), c.conj()), &Scalar::one());
                }
                out
            };
            assert_eq!(phi, conj);
            assert!(crate::spec::Chart::new(spec, None, None).is_ok());
        }
    }
}
