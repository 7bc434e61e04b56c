//! The fibrewise Fourier transform `TM → T*M`, the source and target maps of
//! the formal symplectic groupoid and the diagonal model of
//! `C^∞(M × M̄, M_diag)`.
//!
//! Functions on `T*M` come in two encodings. *Unscaled* jets use the fibre
//! coordinates `ξ` directly; `S(φ)` and `T(ψ)` are plain jets there.
//! *Scaled* series use `ξ′ = ξ/ν`, so that a fibre monomial of degree `n`
//! at `ν^r` in `ξ` sits at `ν^{r+n}` in `ξ′`; transferred operators from
//! `TM` are `ν`-graded only in this encoding.
//!
//! Diagonal-model jets use `(z, z̄, τ, τ̄)` with `τ = w − z`, `τ̄ = w̄ − z̄`.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::check::Check;
use crate::geometry::ChartGeometry;
use crate::jet::vsub;
use crate::nu::Nu;
use crate::star::TmStar;
use crate::symbol::Side;
use crate::{DiffOp, Error, Jet, Mono, NuJet, NuOp, Scalar, VarSet, EXACT};

/// `S` or `T`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Leg {
    Source,
    Target,
}

/// Restrictions of the diagonal model.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Restriction {
    /// `F ↦ F|_{w=z}`.
    WEqZ,
    /// `F ↦ F|_{z̄=w̄}`.
    ZbarEqWbar,
}

/// Splits a jet on a 4m-variable set by its fibre monomial. For a truncated
/// jet every fibre monomial up to the validity appears, possibly as a
/// truncated zero.
pub(crate) fn fibre_groups(p: &Jet) -> BTreeMap<Mono, Jet> {
    let v = p.vars();
    let fm = v.fibre_mask();
    let mut groups: BTreeMap<Mono, Vec<(Mono, Scalar)>> = BTreeMap::new();
    for (mono, c) in p.terms() {
        groups.entry(mono.restrict(fm)).or_default().push((mono.restrict(v.base_mask()), c.clone()));
    }
    if !p.is_exact() && p.valid() >= 0 {
        let fib: Vec<usize> = (0..v.m).flat_map(|k| [v.fib(k), v.fibbar(k)]).collect();
        for u in Mono::all_up_to(&fib, p.valid() as u32) {
            groups.entry(u).or_default();
        }
    }
    groups.into_iter().map(|(u, terms)| (u, Jet::from_terms(v, terms, vsub(p.valid(), u.degree() as i32)))).collect()
}

/// Re-expresses an unscaled jet in `ξ′`.
pub fn scale_jet(x: &Jet) -> NuJet {
    let v = x.vars();
    let fm = v.fibre_mask();
    let mut parts: BTreeMap<i32, Vec<(Mono, Scalar)>> = BTreeMap::new();
    for (mono, c) in x.terms() {
        parts.entry(mono.degree_in(fm) as i32).or_default().push((*mono, c.clone()));
    }
    let cap = if x.is_exact() { EXACT } else { x.valid() };
    if !x.is_exact() {
        for n in 0..=x.valid() {
            parts.entry(n).or_default();
        }
    }
    let mut out = Nu::zero(cap);
    for (n, terms) in parts {
        out.set(n, Jet::from_terms(v, terms, x.valid()));
    }
    out
}

/// [`scale_jet`] on a series.
pub fn scale_nujet(x: &NuJet) -> Result<NuJet, Error> {
    let mut out: NuJet = Nu::zero(x.cap());
    for (e, j) in x.terms() {
        out = out.try_add(&scale_jet(j).shift(*e))?;
    }
    Ok(out)
}

/// Re-expresses an unscaled operator on `T*M` in `ξ′`.
pub fn scale_op(op: &NuOp) -> Result<NuOp, Error> {
    let mut pieces: Vec<(i32, DiffOp)> = Vec::new();
    let mut cap = op.cap();
    for (e, d) in op.terms() {
        let v = d.vars();
        let fm = v.fibre_mask();
        let amax = d.terms().keys().map(|a| a.degree_in(fm) as i32).max().unwrap_or(0);
        if op.cap() != EXACT {
            cap = cap.min(op.cap() - amax);
        }
        for (alpha, c) in d.terms() {
            let a = alpha.degree_in(fm) as i32;
            let s = scale_jet(c);
            if s.cap() != EXACT {
                cap = cap.min(e - a + s.cap());
            }
            for (n, j) in s.terms() {
                pieces.push((e + n - a, DiffOp::term(j.clone(), *alpha)));
            }
        }
    }
    let mut out: NuOp = Nu::zero(cap);
    for (k, p) in pieces {
        out.add_at(k, &p)?;
    }
    Ok(out)
}

/// `{A, B} = ∂A/∂ξ_k ∂B/∂z^k − ∂B/∂ξ_k ∂A/∂z^k + ∂A/∂ξ̄_l ∂B/∂z̄^l − ∂B/∂ξ̄_l ∂A/∂z̄^l`.
pub fn poisson_tstar(a: &Jet, b: &Jet) -> Jet {
    hamiltonian(a).apply(b)
}

/// `H_A`, with `H_A B = {A, B}`.
pub fn hamiltonian(a: &Jet) -> DiffOp {
    let v = a.vars();
    let mut h = DiffOp::zero(v);
    for k in 0..v.m {
        for (x, p) in [(v.z(k), v.fib(k)), (v.zbar(k), v.fibbar(k))] {
            h.add_term(Mono::var(x), &a.deriv(p));
            h.add_term(Mono::var(p), &-&a.deriv(x));
        }
    }
    h
}

/// `∂_η^A ∂_η̄^B [δ(η)δ(η̄)/g] ↦ (−iξ′)^A (−iξ̄′)^B`. Delta elements are
/// stored on the tangent variables with the fibre monomial `η^A η̄^B`
/// standing for the derivative stack.
pub fn fourier(a: &NuJet) -> Result<NuJet, Error> {
    relabel_fibre(a, VarSet::cotangent(vars_of(a).m), false)
}

/// Inverse of [`fourier`].
pub fn fourier_inv(x: &NuJet) -> Result<NuJet, Error> {
    relabel_fibre(x, VarSet::tangent(vars_of(x).m), true)
}

fn vars_of(a: &NuJet) -> VarSet {
    a.terms().values().next().map(Jet::vars).unwrap_or(VarSet::tangent(1))
}

fn relabel_fibre(a: &NuJet, target: VarSet, inverse: bool) -> Result<NuJet, Error> {
    let fm = target.fibre_mask();
    a.map(|_, j| {
        let terms = j.terms().iter().map(|(mo, c)| {
            let k = mo.degree_in(fm);
            let f = if inverse { Scalar::i_pow(k) } else { Scalar::minus_i_pow(k) };
            (*mo, c * &f)
        });
        Ok(Jet::from_terms(target, terms, j.valid()))
    })
}

/// Lowest `s` with fibre degree at most `r − s` at every `ν^r`.
pub fn filtration_offset(x: &NuJet) -> i32 {
    let v = vars_of(x);
    x.terms()
        .iter()
        .filter(|(_, j)| !j.is_zero())
        .map(|(r, j)| r - j.degree_in(v.fibre_mask()) as i32)
        .min()
        .unwrap_or(EXACT)
}

/// Source and target maps, the diagonal model and transfers for one chart.
#[derive(Clone, Debug)]
pub struct Groupoid {
    pub chart: ChartGeometry,
    /// `S(z̄^l)`, unscaled.
    s_img: Vec<Jet>,
    /// `T(z^k)`, unscaled.
    t_img: Vec<Jet>,
    /// Images of `(z, z̄, ξ, ξ̄)` under the inverse of `S⊗T`.
    inverse: Vec<Jet>,
}

impl Groupoid {
    pub fn new(chart: &ChartGeometry) -> Result<Groupoid, Error> {
        let c = VarSet::cotangent(chart.m);
        let d = chart.degree;
        let m = chart.m;
        let mut vs = DiffOp::zero(c);
        let mut vt = DiffOp::zero(c);
        let mi = Jet::constant(c, Scalar::minus_i_pow(1));
        for k in 0..m {
            for l in 0..m {
                let g = chart.gu(l, k).lift(c);
                vs.add_term(Mono::var(c.zbar(l)), &(&(&g * &Jet::var(c, c.fib(k))) * &mi));
                vt.add_term(Mono::var(c.z(k)), &(&(&g * &Jet::var(c, c.fibbar(l))) * &mi));
            }
        }
        let s_img = (0..m).map(|l| exp_field(&vs, &Jet::var(c, c.zbar(l)), d)).collect();
        let t_img = (0..m).map(|k| exp_field(&vt, &Jet::var(c, c.z(k)), d)).collect();
        let mut gr = Groupoid { chart: chart.clone(), s_img, t_img, inverse: Vec::new() };
        gr.inverse = gr.solve_inverse()?;
        Ok(gr)
    }

    pub fn base(&self) -> VarSet {
        self.chart.vars()
    }

    pub fn cotangent(&self) -> VarSet {
        VarSet::cotangent(self.chart.m)
    }

    pub fn diagonal(&self) -> VarSet {
        VarSet::diagonal(self.chart.m)
    }

    /// `Sφ = e^{−iξ_k g^{l̄k}∂/∂z̄^l} φ` or `Tψ = e^{−iξ̄_l g^{l̄k}∂/∂z^k} ψ`.
    pub fn source_target(&self, f: &Jet, leg: Leg) -> Result<Jet, Error> {
        let c = self.cotangent();
        let m = self.chart.m;
        let mut images: Vec<Jet> = (0..2 * m).map(|i| Jet::var(c, i)).collect();
        match leg {
            Leg::Source => images[m..].clone_from_slice(&self.s_img),
            Leg::Target => images[..m].clone_from_slice(&self.t_img),
        }
        f.substitute(c, &images)
    }

    pub fn source(&self, f: &Jet) -> Result<Jet, Error> {
        self.source_target(f, Leg::Source)
    }

    pub fn target(&self, f: &Jet) -> Result<Jet, Error> {
        self.source_target(f, Leg::Target)
    }

    /// `{φ, ψ}_M = i g^{l̄k}(∂_kφ ∂_l̄ψ − ∂_kψ ∂_l̄φ)`.
    pub fn poisson_m(&self, f: &Jet, g: &Jet) -> Jet {
        let b = self.base();
        let mut out = Jet::zero(b);
        for k in 0..b.m {
            for l in 0..b.m {
                let t = &(&f.deriv(b.z(k)) * &g.deriv(b.zbar(l))) - &(&g.deriv(b.z(k)) * &f.deriv(b.zbar(l)));
                out.add_scaled(&(self.chart.gu(l, k) * &t), &Scalar::i());
            }
        }
        out
    }

    /// `δf = f(z, z̄ + τ̄)`.
    pub fn delta_extension(&self, f: &Jet) -> Result<Jet, Error> {
        let d = self.diagonal();
        let m = self.chart.m;
        let mut images: Vec<Jet> = (0..m).map(|k| Jet::var(d, d.z(k))).collect();
        images.extend((0..m).map(|l| &Jet::var(d, d.zbar(l)) + &Jet::var(d, d.fibbar(l))));
        f.substitute(d, &images)
    }

    /// `φ ⊗ 1 = φ(z, z̄)`.
    pub fn tensor_one(&self, f: &Jet) -> Jet {
        f.lift(self.diagonal())
    }

    /// `1 ⊗ ψ = ψ(z + τ, z̄ + τ̄)`.
    pub fn one_tensor(&self, f: &Jet) -> Result<Jet, Error> {
        let d = self.diagonal();
        let m = self.chart.m;
        let mut images: Vec<Jet> = (0..m).map(|k| &Jet::var(d, d.z(k)) + &Jet::var(d, d.fib(k))).collect();
        images.extend((0..m).map(|l| &Jet::var(d, d.zbar(l)) + &Jet::var(d, d.fibbar(l))));
        f.substitute(d, &images)
    }

    /// `F|_{w=z}` sets `τ = 0`; `F|_{z̄=w̄}` is `F(z, z̄ + τ̄, τ, 0)`.
    pub fn restrict(&self, f: &Jet, which: Restriction) -> Result<Jet, Error> {
        let d = self.diagonal();
        match which {
            Restriction::WEqZ => Ok(f.set_zero(d.fib_mask())),
            Restriction::ZbarEqWbar => {
                let m = self.chart.m;
                let mut images: Vec<Jet> = (0..m).map(|k| Jet::var(d, d.z(k))).collect();
                images.extend((0..m).map(|l| &Jet::var(d, d.zbar(l)) + &Jet::var(d, d.fibbar(l))));
                images.extend((0..m).map(|k| Jet::var(d, d.fib(k))));
                images.extend((0..m).map(|_| Jet::zero(d)));
                f.substitute(d, &images)
            }
        }
    }

    /// `(S⊗T)(F)`: `z ↦ z`, `z̄ ↦ S(z̄)`, `w ↦ T(z)`, `w̄ ↦ z̄`.
    pub fn st_apply(&self, f: &Jet) -> Result<Jet, Error> {
        let c = self.cotangent();
        let m = self.chart.m;
        let mut images: Vec<Jet> = (0..m).map(|k| Jet::var(c, c.z(k))).collect();
        images.extend(self.s_img.iter().cloned());
        images.extend((0..m).map(|k| &self.t_img[k] - &Jet::var(c, c.z(k))));
        images.extend((0..m).map(|l| &Jet::var(c, c.zbar(l)) - &self.s_img[l]));
        f.substitute(c, &images)
    }

    /// Inverse of [`Groupoid::st_apply`].
    pub fn st_invert(&self, x: &Jet) -> Result<Jet, Error> {
        x.substitute(self.diagonal(), &self.inverse)
    }

    pub fn st_apply_nu(&self, f: &NuJet) -> Result<NuJet, Error> {
        f.map(|_, j| self.st_apply(j))
    }

    pub fn st_invert_nu(&self, x: &NuJet) -> Result<NuJet, Error> {
        x.map(|_, j| self.st_invert(j))
    }

    /// Solves `S(z̄)(Λ) = z̄`, `T(z)(Λ) = z + τ` with `Λ(z̄) = z̄ + τ̄` for the
    /// fibre images, one degree per sweep.
    fn solve_inverse(&self) -> Result<Vec<Jet>, Error> {
        let d = self.diagonal();
        let m = self.chart.m;
        let deg = self.chart.degree;
        let ext: Vec<Vec<Jet>> = (0..m)
            .map(|k| (0..m).map(|l| self.delta_extension(self.chart.gl(k, l))).collect::<Result<_, _>>())
            .collect::<Result<_, _>>()?;
        let mut img: Vec<Jet> = (0..m).map(|k| Jet::var(d, d.z(k))).collect();
        img.extend((0..m).map(|l| &Jet::var(d, d.zbar(l)) + &Jet::var(d, d.fibbar(l))));
        img.extend((0..2 * m).map(|_| Jet::zero(d)));
        let mi = Scalar::minus_i_pow(1);
        for _ in 0..=deg + 1 {
            let mut next = img.clone();
            for l in 0..m {
                let r = &self.s_img[l].substitute(d, &img)? - &Jet::var(d, d.zbar(l));
                for k in 0..m {
                    next[2 * m + k].add_scaled(&(&ext[k][l] * &r).trim(deg), &mi);
                }
            }
            for k in 0..m {
                let r = &(&self.t_img[k].substitute(d, &img)? - &Jet::var(d, d.z(k))) - &Jet::var(d, d.fib(k));
                for l in 0..m {
                    next[3 * m + l].add_scaled(&(&ext[k][l] * &r).trim(deg), &mi);
                }
            }
            let done = next.iter().zip(&img).all(|(a, b)| a == b);
            img = next.into_iter().map(|j| j.trim(deg)).collect();
            if done {
                break;
            }
        }
        Ok(img)
    }

    /// Extends `(φ₁⊗ψ₁, φ₂⊗ψ₂) ↦ (φ₁⊗ψ₂)·δ(A(ψ₁φ₂))` to the diagonal model:
    /// `B(z, w̄) (∂_w^β F₁)|_{w=z} (∂_z^γ F₂)|_{z̄=w̄}` summed over the Leibniz
    /// expansion `A(φψ) = Σ B_{βγ} ∂^βφ ∂^γψ`.
    pub fn extend_bidifferential(&self, a: &NuOp, f1: &NuJet, f2: &NuJet) -> Result<NuJet, Error> {
        let nb = 2 * self.chart.m;
        let to_tau: Vec<usize> = (0..nb).map(|i| i + nb).collect();
        let mut first: BTreeMap<Mono, NuJet> = BTreeMap::new();
        let mut second: BTreeMap<Mono, NuJet> = BTreeMap::new();
        let mut out: NuJet = Nu::zero(EXACT);
        let mut any = false;
        for (r, op) in a.terms() {
            for (alpha, c) in op.terms() {
                let coeff = self.delta_extension(c)?;
                for beta in alpha.divisors(nb) {
                    let gamma = alpha.div(beta).unwrap();
                    let b = coeff.scale(&Scalar::from_int(alpha.binomial(beta, nb) as i64));
                    if !first.contains_key(&beta) {
                        let tb = beta.remap(&to_tau);
                        let x = f1.map(|_, j| self.restrict(&j.deriv_mono(tb), Restriction::WEqZ))?;
                        first.insert(beta, x);
                    }
                    if !second.contains_key(&gamma) {
                        let x = f2.map(|_, j| {
                            let mut y = j.clone();
                            for i in 0..nb {
                                for _ in 0..gamma.exp(i) {
                                    y = &y.deriv(i) - &y.deriv(i + nb);
                                }
                            }
                            self.restrict(&y, Restriction::ZbarEqWbar)
                        })?;
                        second.insert(gamma, x);
                    }
                    let term = Nu::single(*r, b, a.cap()).mul(&first[&beta])?.mul(&second[&gamma])?;
                    out = if any { out.try_add(&term)? } else { term };
                    any = true;
                }
            }
        }
        if !any {
            out = Nu::zero(a.cap().min(f1.cap()).min(f2.cap()));
        }
        Ok(out)
    }

    /// Fourier transform of a natural operator on `TM`, in `ξ′`.
    pub fn transfer(&self, op: &NuOp) -> Result<NuOp, Error> {
        let c = self.cotangent();
        let n = 4 * self.chart.m;
        let ident: Vec<usize> = (0..n).collect();
        let base_mask = c.base_mask();
        let fm = c.fibre_mask();
        let mut zcache: BTreeMap<Mono, DiffOp> = BTreeMap::new();
        let mut out: NuOp = Nu::zero(op.cap());
        for (e, d) in op.terms() {
            let mut acc = DiffOp::zero(c);
            for (alpha, coeff) in d.terms() {
                let a = alpha.restrict(base_mask);
                let big_a = alpha.restrict(fm);
                let right = DiffOp::mul_by(&Jet::monomial(c, big_a, Scalar::minus_i_pow(big_a.degree())));
                let mid = match zcache.get(&a) {
                    Some(x) => x.clone(),
                    None => {
                        let x = self.shifted_derivative(a);
                        zcache.insert(a, x.clone());
                        x
                    }
                };
                let tail = mid.try_compose(&right)?;
                for (u, cu) in fibre_groups(&coeff.embed(c, &ident)) {
                    let left = DiffOp::term(cu.scale(&Scalar::minus_i_pow(u.degree())), u);
                    acc = acc.try_add(&left.try_compose(&tail)?)?;
                }
            }
            out.add_at(*e, &acc)?;
        }
        Ok(out)
    }

    /// `Π (∂ᵢ − ∂ᵢ log g)^{aᵢ}` on the cotangent variables.
    fn shifted_derivative(&self, a: Mono) -> DiffOp {
        let c = self.cotangent();
        let lg = self.chart.log_g.lift(c);
        let mut out = DiffOp::identity(c);
        for i in 0..2 * self.chart.m {
            let mut step = DiffOp::d(c, i);
            step.add_term(Mono::ONE, &-&lg.deriv(i));
            for _ in 0..a.exp(i) {
                out = out.compose(&step);
            }
        }
        out
    }

    /// Multiplication by `S(f)` (left) or `T(f)` (right), unscaled.
    pub fn tilde_mult(&self, f: &Jet, side: Side) -> Result<NuOp, Error> {
        let leg = if side == Side::Left { Leg::Source } else { Leg::Target };
        Ok(Nu::single(0, DiffOp::mul_by(&self.source_target(f, leg)?), EXACT))
    }

    /// `iν e^{−Ψ} H_{ν^p A} e^{Ψ} = i ν^{p+1} H_A + i ν^p {A, Φ₋₁}` with
    /// `Ψ = Φ₋₁/ν`, unscaled.
    pub fn ham_conj(&self, a: &Jet, p: i32) -> NuOp {
        let c = self.cotangent();
        let h = hamiltonian(a).scale(&Scalar::i());
        let phi = self.chart.phi.lift(c);
        let f = DiffOp::mul_by(&poisson_tstar(a, &phi).scale(&Scalar::i()));
        Nu::from_terms([(p + 1, h), (p, f)], EXACT)
    }

    /// `L̃_{A(φ)}` (left) or `R̃_{A(φ)}` (right) in closed form, unscaled:
    /// `iν e^{−Ψ}H_{S(φ)}e^{Ψ} − νS(Δφ + g^{l̄k}∂_kΨ ∂_l̄φ)` and its mirror.
    pub fn tilde_la(&self, phi: &Jet, side: Side) -> Result<NuOp, Error> {
        let b = self.base();
        let leg = if side == Side::Left { Leg::Source } else { Leg::Target };
        let p = &self.chart.phi;
        let mut mixed = Jet::zero(b);
        for k in 0..b.m {
            for l in 0..b.m {
                let t = match side {
                    Side::Left => &p.deriv(b.z(k)) * &phi.deriv(b.zbar(l)),
                    Side::Right => &p.deriv(b.zbar(l)) * &phi.deriv(b.z(k)),
                };
                mixed.add_scaled(&(self.chart.gu(l, k) * &t), &Scalar::one());
            }
        }
        let lap = self.source_target(&self.chart.laplacian(phi), leg)?;
        let mix = self.source_target(&mixed, leg)?;
        let tail: NuOp = Nu::from_terms([(1, DiffOp::mul_by(&-&lap)), (0, DiffOp::mul_by(&-&mix))], EXACT);
        self.ham_conj(&self.source_target(phi, leg)?, 0).try_add(&tail)
    }

    /// `A(φ) = ∂_kφ η^k + ∂_l̄φ η̄^l`.
    pub fn a_of(&self, phi: &Jet) -> Jet {
        let (b, t) = (self.base(), self.chart.tangent());
        let mut out = Jet::zero(t);
        for k in 0..b.m {
            out.add_scaled(&(&phi.deriv(b.z(k)).lift(t) * &Jet::var(t, t.fib(k))), &Scalar::one());
            out.add_scaled(&(&phi.deriv(b.zbar(k)).lift(t) * &Jet::var(t, t.fibbar(k))), &Scalar::one());
        }
        out
    }

    /// `L̃_f = S(f)` and `R̃_f = T(f)` against the transferred
    /// multiplications of the product on `TM`.
    pub fn check_fourst(&self, tm: &TmStar, f: &Jet) -> Result<Check, Error> {
        let t = self.chart.tangent();
        for side in [Side::Left, Side::Right] {
            let op = match side {
                Side::Left => tm.star.left(&f.lift(t))?,
                Side::Right => tm.star.right(&f.lift(t))?,
            };
            let got = self.transfer(&op)?;
            let want = scale_op(&self.tilde_mult(f, side)?)?;
            if let Some(e) = got.first_difference(&want) {
                return Ok(Check::fail("fourst", alloc::format!("{side:?} multiplication by {f} at nu^{e}")));
            }
        }
        Ok(Check::pass("fourst", alloc::format!("f = {f}, through nu^{}", tm.star.order())))
    }

    /// `{Sφ, Tψ} = 0`, `{Sφ, Sψ} = S{φ, ψ}_M` and `{Tφ, Tψ} = −T{φ, ψ}_M`.
    pub fn check_poisson(&self, f: &Jet, g: &Jet) -> Result<Check, Error> {
        let (sf, sg, tf, tg) = (self.source(f)?, self.source(g)?, self.target(f)?, self.target(g)?);
        let c = self.cotangent();
        let pm = self.poisson_m(f, g);
        let cases = [
            ("{S f, T g}", poisson_tstar(&sf, &tg), Jet::zero(c)),
            ("{S f, S g}", poisson_tstar(&sf, &sg), self.source(&pm)?),
            ("{T f, T g}", poisson_tstar(&tf, &tg), -&self.target(&pm)?),
        ];
        for (name, got, want) in cases {
            if let Some((mo, x, y)) = got.first_difference(&want) {
                return Ok(Check::fail("poisson", alloc::format!("{name} at {}: {x} vs {y}", mo.render(&c))));
            }
        }
        let valid = sf.valid().min(tg.valid()) - 1;
        Ok(Check::pass("poisson", alloc::format!("through total degree {valid}")))
    }

    /// Closed forms of `L̃_{A(φ)}` and `R̃_{A(φ)}` against the transferred
    /// multiplications by `A(φ)` of the product on `TM`.
    pub fn check_lfinal(&self, tm: &TmStar, phi: &Jet) -> Result<Check, Error> {
        let a = self.a_of(phi);
        for side in [Side::Left, Side::Right] {
            let op = match side {
                Side::Left => tm.star.left(&a)?,
                Side::Right => tm.star.right(&a)?,
            };
            let got = self.transfer(&op)?;
            let want = scale_op(&self.tilde_la(phi, side)?)?;
            if let Some(e) = got.first_difference(&want) {
                return Ok(Check::fail("lfinal", alloc::format!("{side:?}, phi = {phi}, at nu^{e}")));
            }
        }
        Ok(Check::pass("lfinal", alloc::format!("phi = {phi}, through nu^{}", tm.star.order())))
    }

    /// `L̃_{∂Ξ/∂z^p} = iν e^{−Ψ}H_{S(∂_pΨ)}e^{Ψ}` and
    /// `R̃_{∂Ξ/∂z̄^q} = iν e^{−Ψ}H_{T(∂_q̄Ψ)}e^{Ψ}`.
    pub fn check_tildelfrac(&self, tm: &TmStar) -> Result<Check, Error> {
        let b = self.base();
        let xi = self.chart.tm_potential(crate::geometry::TmPotential::Xi, tm.star.order());
        for p in 0..b.m {
            for (side, i) in [(Side::Left, b.z(p)), (Side::Right, b.zbar(p))] {
                let dxi = xi.map(|_, j| Ok(j.deriv(i)))?;
                let op = match side {
                    Side::Left => tm.star.left_nu(&dxi)?,
                    Side::Right => tm.star.right_nu(&dxi)?,
                };
                let got = self.transfer(&op)?;
                let leg = if side == Side::Left { Leg::Source } else { Leg::Target };
                let a = self.source_target(&self.chart.phi.deriv(i), leg)?;
                let want = scale_op(&self.ham_conj(&a, -1))?;
                if let Some(e) = got.first_difference(&want) {
                    return Ok(Check::fail("tildelfrac", alloc::format!("{side:?} p = {p} at nu^{e}")));
                }
            }
        }
        Ok(Check::pass("tildelfrac", alloc::format!("through nu^{}", tm.star.order())))
    }

    /// `C(φ)` read off from `L̃_{A(φ)} − iν e^{−Ψ}H_{S(φ)}e^{Ψ}`, which must
    /// be multiplication by `S(C(φ))`.
    pub fn hochschild_c(&self, tm: &TmStar, phi: &Jet) -> Result<NuJet, Error> {
        let c = self.cotangent();
        let got = self.transfer(&tm.star.left(&self.a_of(phi))?)?;
        let h = scale_op(&self.ham_conj(&self.source(phi)?, 0))?;
        let diff = got.try_sub(&h)?;
        let mut out: NuJet = Nu::zero(diff.cap());
        for (e, d) in diff.terms() {
            for (alpha, coeff) in d.terms() {
                if *alpha != Mono::ONE && !coeff.is_zero() {
                    return Err(Error::Inconsistent(alloc::format!(
                        "L~_A(phi) - i nu H is not a multiplication at nu^{e}"
                    )));
                }
            }
            let m0 = d.coeff(Mono::ONE).set_zero(c.fibre_mask());
            out.set(*e, m0.to_base());
        }
        Ok(out)
    }

    /// `φC(ψ) − C(φψ) + C(φ)ψ = νg^{l̄k}(∂_kφ∂_l̄ψ + ∂_kψ∂_l̄φ)`, `D(z^k) = 0`
    /// and `D(z̄^l) = −νg^{l̄k}∂_kΨ` for `D = C + νΔ`.
    pub fn check_hochschild(&self, tm: &TmStar, f: &Jet, g: &Jet) -> Result<Check, Error> {
        let b = self.base();
        let cf = self.hochschild_c(tm, f)?;
        let cg = self.hochschild_c(tm, g)?;
        let cfg = self.hochschild_c(tm, &(f * g))?;
        let fl = Nu::single(0, f.clone(), EXACT);
        let gl = Nu::single(0, g.clone(), EXACT);
        let lhs = fl.mul(&cg)?.try_sub(&cfg)?.try_add(&cf.mul(&gl)?)?;
        let mut r = Jet::zero(b);
        for k in 0..b.m {
            for l in 0..b.m {
                let t = &(&f.deriv(b.z(k)) * &g.deriv(b.zbar(l))) + &(&g.deriv(b.z(k)) * &f.deriv(b.zbar(l)));
                r.add_scaled(&(self.chart.gu(l, k) * &t), &Scalar::one());
            }
        }
        let rhs = Nu::single(1, r, EXACT);
        if let Some(e) = lhs.first_difference(&rhs) {
            return Ok(Check::fail("hochschild", alloc::format!("d_Hoch C({f}, {g}) at nu^{e}")));
        }
        for k in 0..b.m {
            let z = Jet::var(b, b.z(k));
            let dz = self.hochschild_c(tm, &z)?;
            if let Some(e) = dz.first_difference(&Nu::zero(EXACT)) {
                return Ok(Check::fail("hochschild", alloc::format!("D(z^{k}) at nu^{e}")));
            }
            let zb = Jet::var(b, b.zbar(k));
            let dzb = self.hochschild_c(tm, &zb)?;
            let mut want = Jet::zero(b);
            for kk in 0..b.m {
                want.add_scaled(&(self.chart.gu(k, kk) * &self.chart.phi.deriv(b.z(kk))), &Scalar::from_int(-1));
            }
            if let Some(e) = dzb.first_difference(&Nu::single(0, want, EXACT)) {
                return Ok(Check::fail("hochschild", alloc::format!("D(zb^{k}) at nu^{e}")));
            }
        }
        Ok(Check::pass("hochschild", "C = -nu Delta + D with D(zb) = -nu g dPsi"))
    }

    /// `(S⊗T)(δf) = f`, the pullbacks of `S(f)·` and `T(f)·` are `f⊗1` and
    /// `1⊗f`, and `S⊗T` inverts on `F`.
    pub fn check_pullback(&self, f: &Jet, sample: &Jet) -> Result<Check, Error> {
        let c = self.cotangent();
        let d = self.diagonal();
        let cases = [
            ("(S x T)(delta f)", self.st_apply(&self.delta_extension(f)?)?, f.lift(c), c),
            ("pullback of S(f)", self.st_invert(&self.source(f)?)?, self.tensor_one(f), d),
            ("pullback of T(f)", self.st_invert(&self.target(f)?)?, self.one_tensor(f)?, d),
            ("inverse", self.st_invert(&self.st_apply(sample)?)?, sample.clone(), d),
        ];
        for (name, got, want, v) in cases {
            if let Some((mo, x, y)) = got.first_difference(&want) {
                return Ok(Check::fail("pullback", alloc::format!("{name} at {}: {x} vs {y}", mo.render(&v))));
            }
        }
        Ok(Check::pass("pullback", alloc::format!("f = {f}")))
    }

    /// A natural operator of valuation `k` maps delta elements of offset `s`
    /// to offset at least `s + k`.
    pub fn check_action(&self, op: &NuOp, a: &NuJet) -> Result<Check, Error> {
        let out = fourier_inv(&self.transfer(op)?.apply(&fourier(a)?)?)?;
        let (s, k, s2) = (filtration_offset(a), op.valuation(), filtration_offset(&out));
        let back = fourier_inv(&fourier(a)?)?;
        if back.first_difference(a).is_some() {
            return Ok(Check::fail("action", "fourier round trip"));
        }
        Ok(Check::new("action", s2 >= s + k, alloc::format!("offset {s} + {k} -> {s2}")))
    }
}

/// `e^V f` for a vector field `V` raising fibre degree, through degree `d`.
fn exp_field(v: &DiffOp, f: &Jet, d: i32) -> Jet {
    let mut out = f.trim(d);
    let mut term = f.trim(d);
    for n in 1..=d as i64 + 1 {
        term = v.apply(&term).trim(d).scale(&Scalar::from_ratio(1, n));
        if term.is_zero() {
            break;
        }
        out.add_scaled(&term, &Scalar::one());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat() -> Groupoid {
        let v = VarSet::base(1);
        let phi = &Jet::var(v, 0) * &Jet::var(v, 1);
        Groupoid::new(&ChartGeometry::build(&phi, 6).unwrap()).unwrap()
    }

    #[test]
    fn source_of_zbar() {
        let g = flat();
        let c = g.cotangent();
        let s = g.source(&Jet::var(g.base(), 1)).unwrap();
        let want = &Jet::var(c, 1) + &Jet::var(c, 2).scale(&Scalar::minus_i_pow(1));
        assert!(s.agrees(&want), "{s}");
        assert!(g.source(&Jet::var(g.base(), 0)).unwrap().agrees(&Jet::var(c, 0)));
        // {S(z̄), z} = −i
        let p = poisson_tstar(&s, &Jet::var(c, 0));
        assert!(p.agrees(&Jet::constant(c, Scalar::minus_i_pow(1))));
    }

    #[test]
    fn delta_and_restrict() {
        let g = flat();
        let d = g.diagonal();
        let b = g.base();
        let zz = &Jet::var(b, 0) * &Jet::var(b, 1);
        let de = g.delta_extension(&zz).unwrap();
        let want = &Jet::var(d, 0) * &(&Jet::var(d, 1) + &Jet::var(d, 3));
        assert_eq!(de, want);
        assert_eq!(g.restrict(&de, Restriction::WEqZ).unwrap(), want);
        assert_eq!(g.restrict(&de, Restriction::ZbarEqWbar).unwrap(), want);
        let t = &Jet::var(d, 2) * &Jet::var(d, 3);
        assert!(g.restrict(&t, Restriction::WEqZ).unwrap().is_zero());
    }

    #[test]
    fn flat_pullbacks() {
        let g = flat();
        let b = g.base();
        let f = &Jet::var(b, 0).pow(2) * &Jet::var(b, 1);
        let d = g.diagonal();
        let sample = &(&Jet::var(d, 2) * &Jet::var(d, 1)) + &Jet::var(d, 3).pow(2);
        let c = g.check_pullback(&f, &sample).unwrap();
        assert!(c.pass, "{c}");
        let c = g.check_poisson(&f, &Jet::var(b, 1)).unwrap();
        assert!(c.pass, "{c}");
    }

    #[test]
    fn flat_transfers() {
        let g = flat();
        let tm = TmStar::build(&g.chart, 3).unwrap();
        let b = g.base();
        let f = &Jet::var(b, 0) * &Jet::var(b, 1).pow(2);
        for c in [
            g.check_fourst(&tm, &f).unwrap(),
            g.check_lfinal(&tm, &f).unwrap(),
            g.check_tildelfrac(&tm).unwrap(),
            g.check_hochschild(&tm, &f, &Jet::var(b, 1)).unwrap(),
        ] {
            assert!(c.pass, "{c}");
        }
    }

    #[test]
    fn identity_extension() {
        let g = flat();
        let b = g.base();
        let id: NuOp = Nu::single(0, DiffOp::identity(b), EXACT);
        let f1 = Nu::single(0, g.one_tensor(&Jet::var(b, 1)).unwrap(), EXACT);
        let f2 = Nu::single(0, g.tensor_one(&Jet::var(b, 0)), EXACT);
        // (1⊗z̄, z⊗1) ↦ δ(z̄ z)
        let got = g.extend_bidifferential(&id, &f1, &f2).unwrap();
        let want = g.delta_extension(&(&Jet::var(b, 0) * &Jet::var(b, 1))).unwrap();
        assert!(got.first_difference(&Nu::single(0, want, EXACT)).is_none());
    }
}
