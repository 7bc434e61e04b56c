//! Star products with separation of variables, built order by order from a
//! formal potential, together with their Berezin transforms, dual and
//! opposite products and canonical trace densities.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::check::Check;
use crate::diffop::nu_conjugate;
use crate::geometry::{hessian, invert_matrix, wedge_top, ChartGeometry, TmPotential};
use crate::mono::display_key;
use crate::nu::{Coeff, Nu};
use crate::{DiffOp, Error, Jet, Mono, NuJet, NuOp, Scalar, VarSet, EXACT};

/// `Σ c_{αβ} ∂^α φ ∂^β ψ`, keyed by `(α, β)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bidiff {
    vars: VarSet,
    terms: BTreeMap<(Mono, Mono), Jet>,
}

impl Bidiff {
    pub fn zero(vars: VarSet) -> Bidiff {
        Bidiff { vars, terms: BTreeMap::new() }
    }

    pub fn vars(&self) -> VarSet {
        self.vars
    }

    pub fn terms(&self) -> &BTreeMap<(Mono, Mono), Jet> {
        &self.terms
    }

    pub fn coeff(&self, a: Mono, b: Mono) -> Jet {
        self.terms.get(&(a, b)).cloned().unwrap_or_else(|| Jet::zero(self.vars))
    }

    pub fn add_term(&mut self, a: Mono, b: Mono, c: &Jet) {
        match self.terms.get_mut(&(a, b)) {
            Some(x) => {
                x.add_scaled(c, &Scalar::one());
                if x.is_zero() && x.is_exact() {
                    self.terms.remove(&(a, b));
                }
            }
            None => {
                if !(c.is_zero() && c.is_exact()) {
                    self.terms.insert((a, b), c.clone());
                }
            }
        }
    }

    pub fn apply(&self, f: &Jet, g: &Jet) -> Jet {
        let mut out = Jet::zero(self.vars);
        for ((a, b), c) in &self.terms {
            out.add_scaled(&(&(c * &f.deriv_mono(*a)) * &g.deriv_mono(*b)), &Scalar::one());
        }
        out
    }

    /// `ψ ↦ Σ c (∂^α f) ∂^β ψ`.
    pub fn left_op(&self, f: &Jet) -> DiffOp {
        let mut out = DiffOp::zero(self.vars);
        for ((a, b), c) in &self.terms {
            out.add_term(*b, &(c * &f.deriv_mono(*a)));
        }
        out
    }

    /// `φ ↦ Σ c (∂^β g) ∂^α φ`.
    pub fn right_op(&self, g: &Jet) -> DiffOp {
        let mut out = DiffOp::zero(self.vars);
        for ((a, b), c) in &self.terms {
            out.add_term(*a, &(c * &g.deriv_mono(*b)));
        }
        out
    }

    /// `Σ c ∂^{α+β}`.
    pub fn diagonal_op(&self) -> DiffOp {
        let mut out = DiffOp::zero(self.vars);
        for ((a, b), c) in &self.terms {
            out.add_term(a.mul(*b), c);
        }
        out
    }

    pub fn swapped(&self) -> Bidiff {
        Bidiff { vars: self.vars, terms: self.terms.iter().map(|((a, b), c)| ((*b, *a), c.clone())).collect() }
    }

    /// Highest derivative orders in the first and second argument.
    pub fn orders(&self) -> (u32, u32) {
        self.terms
            .iter()
            .filter(|(_, c)| !c.is_zero())
            .fold((0, 0), |(x, y), ((a, b), _)| (x.max(a.degree()), y.max(b.degree())))
    }

    pub fn min_valid(&self) -> i32 {
        self.terms.values().map(Jet::valid).min().unwrap_or(EXACT)
    }

    pub fn first_difference(&self, o: &Bidiff) -> Option<(Mono, Mono)> {
        let mut keys: Vec<(Mono, Mono)> = self.terms.keys().chain(o.terms.keys()).copied().collect();
        keys.sort();
        keys.dedup();
        keys.into_iter().find(|(a, b)| !self.coeff(*a, *b).agrees(&o.coeff(*a, *b)))
    }

    pub fn render(&self) -> String {
        let n = self.vars.nvars();
        let mut keys: Vec<&(Mono, Mono)> = self.terms.keys().collect();
        keys.sort_by_key(|(a, b)| (display_key(*a, n), display_key(*b, n)));
        let parts: Vec<String> = keys
            .into_iter()
            .map(|k| {
                alloc::format!("({})*D[{}](f)*D[{}](g)", self.terms[k], k.0.render(&self.vars), k.1.render(&self.vars))
            })
            .collect();
        if parts.is_empty() {
            "0".into()
        } else {
            parts.join(" + ")
        }
    }
}

impl Coeff for Bidiff {
    fn is_exact_zero(&self) -> bool {
        self.terms.values().all(|c| c.is_zero() && c.is_exact())
    }
    fn zero_like(&self) -> Self {
        Bidiff::zero(self.vars)
    }
    fn try_add(&self, o: &Self) -> Result<Self, Error> {
        if self.vars != o.vars {
            return Err(Error::Structural("bidifferential operators on different variables".into()));
        }
        let mut out = self.clone();
        for ((a, b), c) in &o.terms {
            out.add_term(*a, *b, c);
        }
        Ok(out)
    }
    fn scale(&self, c: &Scalar) -> Self {
        Bidiff { vars: self.vars, terms: self.terms.iter().map(|(k, x)| (*k, x.scale(c))).collect() }
    }
    fn agrees(&self, o: &Self) -> bool {
        self.first_difference(o).is_none()
    }
}

/// A star product `φ ★ ψ = Σ νʳ C_r(φ, ψ)` through `ν^K`.
#[derive(Clone, Debug)]
pub struct StarProduct {
    pub vars: VarSet,
    /// `C_r` at `ν^r`.
    pub table: Nu<Bidiff>,
    /// The potential the product was solved from, when there is one.
    pub potential: Option<NuJet>,
    /// Degree to which inverse matrices were expanded.
    pub degree: i32,
}

/// `Σ_{k≥0} Yᵏ/k!` for `Y` of positive `ν`-valuation.
pub fn nu_exp(y: &NuJet, vars: VarSet) -> Result<NuJet, Error> {
    if y.valuation() < 1 {
        return Err(Error::Domain("exponential of a series without positive valuation".into()));
    }
    let cap = y.cap();
    let mut out = Nu::single(0, Jet::one(vars), cap);
    let mut pow = out.clone();
    for k in 1..=cap.max(0) {
        pow = pow.mul(y)?.map(|_, j| Ok(j.scale(&Scalar::from_ratio(1, k as i64))))?;
        out = out.try_add(&pow)?;
    }
    Ok(out)
}

/// `A ∘ f − f ∘ A` for multiplication by `f`.
fn commute_with_function(a: &DiffOp, f: &Jet) -> Result<DiffOp, Error> {
    a.try_compose(&DiffOp::mul_by(f))?.try_sub(&a.left_mul(f))
}

/// Solves `L_{x̄_j}` (one per antiholomorphic coordinate) for the star product
/// with separation of variables of the potential `phi`.
fn solve_generators(phi: &NuJet, k: i32, degree: i32) -> Result<Vec<NuOp>, Error> {
    let p = phi.get(-1).ok_or_else(|| Error::Structural("potential has no ν⁻¹ term".into()))?;
    let vars = p.vars();
    let (hol, ah) = (vars.holomorphic(), vars.antiholomorphic());
    let n = hol.len();
    let h = hessian(p);
    let (hinv, _) = invert_matrix(&h, degree)?;
    let zero = Jet::zero(vars);
    // Φ_{s, j̄} for s = −1..K
    let dphi: Vec<Vec<Jet>> = (-1..=k).map(|s| ah.iter().map(|&j| phi.at(s, &zero).deriv(j)).collect()).collect();
    let dphi_at = |s: i32, j: usize| &dphi[(s + 1) as usize][j];
    let mut out = Vec::new();
    for &x in &ah {
        let mut a: Vec<DiffOp> = alloc::vec![DiffOp::mul_by(&Jet::var(vars, x))];
        for t in 0..k {
            let mut e: Vec<DiffOp> = Vec::with_capacity(n);
            for (j, &aj) in ah.iter().enumerate() {
                let mut ej = a[t as usize].map_coeffs(|_, c| c.deriv(aj));
                for s in 0..=t {
                    ej = ej.try_sub(&commute_with_function(&a[(t - s) as usize], dphi_at(s, j))?)?;
                }
                e.push(ej);
            }
            a.push(solve_commutator(&e, &hol, &hinv, |op| {
                (0..n).map(|j| commute_with_function(op, dphi_at(-1, j))).collect()
            })?);
        }
        let mut nu = Nu::zero(k);
        for (t, op) in a.into_iter().enumerate() {
            nu.set(t as i32, op);
        }
        out.push(nu);
    }
    Ok(out)
}

/// Finds `A`, differentiating only in `hol` and without order-0 part, with
/// `[A, ∂_{āⱼ}Φ₋₁] = E_j` for all `j`, top order first.
fn solve_commutator(
    e: &[DiffOp],
    hol: &[usize],
    hinv: &[Vec<Jet>],
    comm: impl Fn(&DiffOp) -> Result<Vec<DiffOp>, Error>,
) -> Result<DiffOp, Error> {
    let vars = e[0].vars();
    let n = hol.len();
    let mut hol_mask = 0u16;
    for &i in hol {
        hol_mask |= 1 << i;
    }
    let mut resid: Vec<DiffOp> = e.to_vec();
    let mut a = DiffOp::zero(vars);
    let top = resid.iter().map(DiffOp::order).max().unwrap_or(-1);
    for ord in (0..=top).rev() {
        let mut piece = DiffOp::zero(vars);
        let mut betas: Vec<Mono> = Vec::new();
        for r in &resid {
            for (beta, c) in r.terms() {
                if beta.degree() as i32 == ord && !c.is_zero() {
                    if beta.degree_in(hol_mask) != beta.degree() {
                        return Err(Error::Inconsistent(alloc::format!(
                            "commutator equation has a non-holomorphic derivative {}",
                            beta.render(&vars)
                        )));
                    }
                    betas.push(*beta);
                }
            }
        }
        betas.sort();
        betas.dedup();
        let scale = Scalar::from_ratio(1, ord as i64 + 1);
        for beta in betas {
            for k in 0..n {
                let mut w = Jet::zero(vars);
                for (j, r) in resid.iter().enumerate() {
                    w.add_scaled(&(&r.coeff(beta) * &hinv[j][k]), &Scalar::one());
                }
                piece.add_term(beta.mul(Mono::var(hol[k])), &w.scale(&scale));
            }
        }
        let c = comm(&piece)?;
        for (r, ci) in resid.iter_mut().zip(c) {
            *r = r.try_sub(&ci)?;
        }
        a = a.try_add(&piece)?;
        for r in &resid {
            if let Some((beta, _)) = r.terms().iter().find(|(b, c)| b.degree() as i32 >= ord && !c.is_zero()) {
                return Err(Error::Inconsistent(alloc::format!(
                    "residual at order {} after solving order {ord}",
                    beta.degree()
                )));
            }
        }
    }
    if let Some(r) = resid.iter().find(|r| !r.is_zero()) {
        return Err(Error::Inconsistent(alloc::format!("unsolved residual {}", r.render())));
    }
    Ok(a)
}

impl StarProduct {
    /// The star product with separation of variables whose left
    /// multiplications commute with `b` and `∂_{b̄} + ∂Φ/∂b̄`, through `ν^k`.
    pub fn from_potential(phi: &NuJet, k: i32, degree: i32) -> Result<StarProduct, Error> {
        let gens = solve_generators(phi, k, degree)?;
        let vars = phi.get(-1).unwrap().vars();
        let mut s = StarProduct::from_left_generators(vars, &gens, k, degree)?;
        s.potential = Some(phi.clone());
        Ok(s)
    }

    /// Recovers the bidifferential table from `L_{x̄_j}` for every
    /// antiholomorphic coordinate, composing them into `L_{x̄^δ}` for
    /// `|δ| ≤ k`.
    pub fn from_left_generators(vars: VarSet, gens: &[NuOp], k: i32, degree: i32) -> Result<StarProduct, Error> {
        let ah = vars.antiholomorphic();
        let nv = vars.nvars();
        let mut hol_mask = 0u16;
        for i in vars.holomorphic() {
            hol_mask |= 1 << i;
        }
        let mut lops: BTreeMap<Mono, NuOp> = BTreeMap::new();
        lops.insert(Mono::ONE, NuOp::from_op(DiffOp::identity(vars), k));
        let deltas = Mono::all_up_to(&ah, k.max(0) as u32);
        for &d in &deltas {
            if d == Mono::ONE {
                continue;
            }
            let (j, &x) = ah.iter().enumerate().find(|(_, &x)| d.exp(x) > 0).unwrap();
            let prev = &lops[&d.div(Mono::var(x)).unwrap()];
            let op = prev.compose(&gens[j])?;
            lops.insert(d, op);
        }
        let mut table: Nu<Bidiff> = Nu::zero(k);
        for r in 0..=k {
            let mut c: BTreeMap<(Mono, Mono), Jet> = BTreeMap::new();
            for &d in &deltas {
                let Some(op) = lops[&d].get(r) else { continue };
                let inv_fact = Scalar::from_ratio(1, d.factorial(nv) as i64);
                for (g, p) in op.terms() {
                    if g.degree_in(hol_mask) != g.degree() && !p.is_zero() {
                        return Err(Error::Inconsistent(alloc::format!(
                            "left multiplication differentiates in {}",
                            g.render(&vars)
                        )));
                    }
                    let mut x = p.clone();
                    for d2 in d.divisors(nv) {
                        if d2 == d {
                            continue;
                        }
                        if let Some(prev) = c.get(&(d2, *g)) {
                            let f = d.falling(d2, nv) as i64;
                            let mono = Jet::monomial(vars, d.div(d2).unwrap(), Scalar::from_int(f));
                            x = &x - &(prev * &mono);
                        }
                    }
                    c.insert((d, *g), x.scale(&inv_fact));
                }
            }
            let mut bd = Bidiff::zero(vars);
            for ((a, b), x) in c {
                bd.add_term(a, b, &x);
            }
            table.set(r, bd);
        }
        Ok(StarProduct { vars, table, potential: None, degree })
    }

    pub fn order(&self) -> i32 {
        self.table.cap()
    }

    /// `C_r`.
    pub fn coefficient(&self, r: i32) -> Bidiff {
        self.table.at(r, &Bidiff::zero(self.vars))
    }

    fn lift_arg(&self, f: &Jet) -> NuJet {
        Nu::single(0, f.clone(), EXACT)
    }

    pub fn mul(&self, f: &NuJet, g: &NuJet) -> Result<NuJet, Error> {
        self.left_nu(f)?.apply(g)
    }

    pub fn mul_jets(&self, f: &Jet, g: &Jet) -> Result<NuJet, Error> {
        self.mul(&self.lift_arg(f), &self.lift_arg(g))
    }

    pub fn left(&self, f: &Jet) -> Result<NuOp, Error> {
        self.left_nu(&self.lift_arg(f))
    }

    pub fn right(&self, g: &Jet) -> Result<NuOp, Error> {
        self.right_nu(&self.lift_arg(g))
    }

    pub fn left_nu(&self, f: &NuJet) -> Result<NuOp, Error> {
        self.table.convolve(f, |c, x| Ok(c.left_op(x)))
    }

    pub fn right_nu(&self, g: &NuJet) -> Result<NuOp, Error> {
        self.table.convolve(g, |c, x| Ok(c.right_op(x)))
    }

    /// The formal Berezin transform `Σ νʳ Σ c ∂^{δ+γ}`, with `B(ab) = b ★ a`.
    pub fn berezin(&self) -> NuOp {
        self.table.map(|_, c| Ok(c.diagonal_op())).unwrap()
    }

    pub fn berezin_inverse(&self) -> Result<NuOp, Error> {
        nu_op_inverse(&self.berezin())
    }

    /// `φ ★ᵒᵖ ψ = ψ ★ φ`.
    pub fn opposite(&self) -> StarProduct {
        StarProduct {
            vars: self.vars,
            table: self.table.map(|_, c| Ok(c.swapped())).unwrap(),
            potential: None,
            degree: self.degree,
        }
    }

    /// `φ ★̃ ψ = B⁻¹(Bψ ★ Bφ)`, with `L̃_{x̄_l} = B⁻¹ x̄_l B`.
    pub fn dual(&self) -> Result<StarProduct, Error> {
        let b = self.berezin();
        let binv = nu_op_inverse(&b)?;
        let k = self.order();
        let gens: Vec<NuOp> = self
            .vars
            .antiholomorphic()
            .into_iter()
            .map(|x| binv.compose(&NuOp::from_op(DiffOp::mul_by(&Jet::var(self.vars, x)), k))?.compose(&b))
            .collect::<Result<_, _>>()?;
        StarProduct::from_left_generators(self.vars, &gens, k, self.degree)
    }

    /// `φ ★′ ψ = B⁻¹(Bφ ★ Bψ)`, the opposite of the dual.
    pub fn prime(&self) -> Result<StarProduct, Error> {
        Ok(self.dual()?.opposite())
    }

    /// Compares two tables through the lower cap.
    pub fn first_difference(&self, o: &StarProduct) -> Option<(i32, String)> {
        let k = self.order().min(o.order());
        for r in 0..=k {
            let (a, b) = (self.coefficient(r), o.coefficient(r));
            if let Some((x, y)) = a.first_difference(&b) {
                return Some((
                    r,
                    alloc::format!(
                        "D[{}]⊗D[{}]: {} vs {}",
                        x.render(&self.vars),
                        y.render(&self.vars),
                        a.coeff(x, y),
                        b.coeff(x, y)
                    ),
                ));
            }
        }
        None
    }

    /// `(f★g)★h = f★(g★h)`; returns the first differing `ν`-order.
    pub fn associativity_defect(&self, f: &Jet, g: &Jet, h: &Jet) -> Result<Option<i32>, Error> {
        let (f, g, h) = (self.lift_arg(f), self.lift_arg(g), self.lift_arg(h));
        let lhs = self.mul(&self.mul(&f, &g)?, &h)?;
        let rhs = self.mul(&f, &self.mul(&g, &h)?)?;
        Ok(lhs.first_difference(&rhs))
    }

    /// Every `C_r`, `r ≥ 1`, differentiates its first argument only in
    /// `first` and its second only in `second`, with order at most `r` in each.
    pub fn check_structure(&self, first: &[usize], second: &[usize]) -> Check {
        let mask = |v: &[usize]| v.iter().fold(0u16, |m, &i| m | (1 << i));
        let (fm, sm) = (mask(first), mask(second));
        if !self.coefficient(0).agrees(&unit_bidiff(self.vars)) {
            return Check::fail("structure", "C_0 is not pointwise multiplication");
        }
        for r in 1..=self.order() {
            let c = self.coefficient(r);
            for ((a, b), x) in c.terms() {
                if x.is_zero() {
                    continue;
                }
                if a.degree_in(fm) != a.degree() || b.degree_in(sm) != b.degree() {
                    return Check::fail(
                        "structure",
                        alloc::format!(
                            "C_{r} has term D[{}]⊗D[{}] against separation of variables",
                            a.render(&self.vars),
                            b.render(&self.vars)
                        ),
                    );
                }
                if a.degree() as i32 > r || b.degree() as i32 > r {
                    return Check::fail(
                        "structure",
                        alloc::format!("C_{r} has order ({}, {}) above {r}", a.degree(), b.degree()),
                    );
                }
                if a.degree() == 0 || b.degree() == 0 {
                    return Check::fail("structure", alloc::format!("C_{r} does not annihilate constants"));
                }
            }
        }
        Check::pass("structure", alloc::format!("C_0..C_{} separate variables and are natural", self.order()))
    }

    /// `C_1(φ, ψ) = g^{l̄k} ∂φ/∂x̄^l ∂ψ/∂x^k` for the inverse of the mixed
    /// Hessian of `Φ₋₁`.
    pub fn check_first_order(&self, phi_minus1: &Jet) -> Result<Check, Error> {
        let (hol, ah) = (self.vars.holomorphic(), self.vars.antiholomorphic());
        let (hinv, _) = invert_matrix(&hessian(phi_minus1), self.degree)?;
        let mut want = Bidiff::zero(self.vars);
        for (l, &x) in ah.iter().enumerate() {
            for (k, &y) in hol.iter().enumerate() {
                want.add_term(Mono::var(x), Mono::var(y), &hinv[l][k]);
            }
        }
        let got = self.coefficient(1);
        Ok(match got.first_difference(&want) {
            None => Check::pass("first-order", "C_1 = g^{lk} d_lbar(f) d_k(g)"),
            Some((a, b)) => Check::fail(
                "first-order",
                alloc::format!(
                    "C_1 at D[{}]⊗D[{}]: {} vs {}",
                    a.render(&self.vars),
                    b.render(&self.vars),
                    got.coeff(a, b),
                    want.coeff(a, b)
                ),
            ),
        })
    }

    /// `B a B⁻¹ = R_a` and `B b B⁻¹ = L_b` for the coordinate functions.
    pub fn check_berezin_conjugation(&self) -> Result<Check, Error> {
        let b = self.berezin();
        let binv = nu_op_inverse(&b)?;
        let k = self.order();
        for (hol, x) in self
            .vars
            .holomorphic()
            .into_iter()
            .map(|x| (true, x))
            .chain(self.vars.antiholomorphic().into_iter().map(|x| (false, x)))
        {
            let f = Jet::var(self.vars, x);
            let conj = b.compose(&NuOp::from_op(DiffOp::mul_by(&f), k))?.compose(&binv)?;
            let want = if hol { self.right(&f)? } else { self.left(&f)? };
            if let Some(r) = conj.first_difference(&want) {
                return Ok(Check::fail("berezin-conjugation", alloc::format!("{} at nu^{r}", self.vars.name(x))));
            }
        }
        let one = Jet::one(self.vars);
        let b1 = b.apply(&Nu::single(0, one.clone(), EXACT))?;
        if !b1.agrees(&Nu::single(0, one, b1.cap())) {
            return Ok(Check::fail("berezin-conjugation", "B(1) != 1"));
        }
        Ok(Check::pass("berezin-conjugation", "B a B^-1 = R_a, B b B^-1 = L_b on coordinates, B(1) = 1"))
    }

    /// `B(ab) = b ★ a` on monomials `a` holomorphic, `b` antiholomorphic of
    /// degree at most `d`.
    pub fn check_berezin_definition(&self, d: u32) -> Result<Check, Error> {
        let b = self.berezin();
        for a in Mono::all_up_to(&self.vars.holomorphic(), d) {
            for c in Mono::all_up_to(&self.vars.antiholomorphic(), d) {
                let fa = Jet::monomial(self.vars, a, Scalar::one());
                let fb = Jet::monomial(self.vars, c, Scalar::one());
                let lhs = b.apply(&self.lift_arg(&(&fa * &fb)))?;
                let rhs = self.mul_jets(&fb, &fa)?;
                if let Some(r) = lhs.first_difference(&rhs) {
                    return Ok(Check::fail(
                        "berezin-definition",
                        alloc::format!("a = {}, b = {} at nu^{r}", a.render(&self.vars), c.render(&self.vars)),
                    ));
                }
            }
        }
        Ok(Check::pass("berezin-definition", alloc::format!("B(ab) = b*a on monomials of degree <= {d}")))
    }
}

fn unit_bidiff(vars: VarSet) -> Bidiff {
    let mut b = Bidiff::zero(vars);
    b.add_term(Mono::ONE, Mono::ONE, &Jet::one(vars));
    b
}

/// `Σ_k (−N)ᵏ` for `A = 1 + N` with `N` of positive `ν`-valuation.
pub fn nu_op_inverse(a: &NuOp) -> Result<NuOp, Error> {
    let vars = a.get(0).map(DiffOp::vars).ok_or_else(|| Error::Domain("operator without ν⁰ term".into()))?;
    let id = NuOp::from_op(DiffOp::identity(vars), EXACT);
    let n = a.try_sub(&id)?;
    if n.valuation() < 1 {
        return Err(Error::Domain("operator is not 1 + O(ν)".into()));
    }
    let cap = a.cap();
    let minus_n = n.map(|_, p| Ok(p.scale(&Scalar::from_int(-1))))?;
    let mut out = NuOp::from_op(DiffOp::identity(vars), cap);
    let mut pow = out.clone();
    for _ in 1..=cap.max(0) {
        pow = pow.compose(&minus_n)?;
        out = out.try_add(&pow)?;
    }
    Ok(out)
}

/// The canonical trace density `μ = C e^{Φ+Ψ}` of a star product with
/// separation of variables, with the dual potential `Ψ` it is built from.
#[derive(Clone, Debug)]
pub struct TraceDensity {
    /// `Ψ`, including its `log ν` multiple.
    pub psi: NuJet,
    /// Coefficient of `μ` against the interleaved coordinate volume.
    pub mu: NuJet,
    /// `C`.
    pub constant: Scalar,
    /// Coefficient of `ω₋₁ⁿ/n!`.
    pub wedge: Jet,
    pub checks: Vec<Check>,
}

/// Jet `F` with `∂ᵢF = gᵢ` for every variable and `F(0) = 0`; `None` when
/// the gradient is not closed.
fn integrate_gradient(grad: &[Jet]) -> Option<Jet> {
    let vars = grad[0].vars();
    let valid = grad.iter().map(|g| crate::jet::vadd(g.valid(), 1)).min().unwrap();
    let mut acc: BTreeMap<Mono, Scalar> = BTreeMap::new();
    for (i, g) in grad.iter().enumerate() {
        for (m, c) in g.terms() {
            let a = m.mul(Mono::var(i));
            let e = acc.entry(a).or_insert_with(Scalar::zero);
            *e += &c.scale_int(1);
        }
    }
    let f = Jet::from_terms(vars, acc.into_iter().map(|(m, c)| (m, &c / &Scalar::from_int(m.degree() as i64))), valid);
    grad.iter().enumerate().all(|(i, g)| f.deriv(i).agrees(g)).then_some(f)
}

/// Solves the normalization equations `B(∂Ψ) = −∂Φ`, `B(dΨ/dν) = −dΦ/dν`
/// for `Ψ`, fixing `Ψ₋₁ = −Φ₋₁` and `(Φ₀ + Ψ₀)(0) = 0`.
pub fn canonical_trace_density(star: &StarProduct) -> Result<TraceDensity, Error> {
    let phi = star.potential.as_ref().ok_or_else(|| Error::Structural("star product without potential".into()))?;
    let vars = star.vars;
    let nv = vars.nvars();
    let n = (nv / 2) as i64;
    let zero = Jet::zero(vars);
    let b = star.berezin();
    let cap = star.order() - 1;
    let br = |r: i32| b.get(r).cloned();
    let mut checks = Vec::new();
    // gradients G_t and primitives Ψ̂_t
    let mut grads: BTreeMap<i32, Vec<Jet>> = BTreeMap::new();
    let mut hats: BTreeMap<i32, Jet> = BTreeMap::new();
    for t in -1..=cap {
        let mut g: Vec<Jet> = (0..nv).map(|i| -&phi.at(t, &zero).deriv(i)).collect();
        for r in 1..=t + 1 {
            if let (Some(op), Some(prev)) = (br(r), grads.get(&(t - r))) {
                for i in 0..nv {
                    g[i] = &g[i] - &op.apply(&prev[i]);
                }
            }
        }
        let f = integrate_gradient(&g)
            .ok_or_else(|| Error::Inconsistent(alloc::format!("gradient of Psi_{t} is not closed")))?;
        grads.insert(t, g);
        hats.insert(t, f);
    }
    checks.push(Check::pass("closed", alloc::format!("dPsi_t closed for t = -1..{cap}")));
    // constants from the ν-derivative equation
    let mut psi: NuJet = Nu::zero(cap);
    let mut log_multiple = 0i64;
    for t in -1..=cap {
        let mut r = (&phi.at(t, &zero) + &hats[&t]).scale_int(-(t as i64));
        for rr in 1..=t + 1 {
            if let (Some(op), Some(prev)) = (br(rr), hats.get(&(t - rr))) {
                r = &r - &op.apply(prev).scale_int((t - rr) as i64);
            }
        }
        if t == 0 {
            r = &r - &Jet::constant(vars, Scalar::from_int(phi.log_nu));
        }
        let c0 = r.constant_term();
        if !r.agrees(&Jet::constant(vars, c0.clone())) {
            return Err(Error::Inconsistent(alloc::format!("nu-derivative equation at order {t} is not constant")));
        }
        let kappa = if t == 0 {
            log_multiple = match c0.to_i64() {
                Some(c) => c,
                None => return Err(Error::Inconsistent(alloc::format!("log nu multiple {c0} is not an integer"))),
            };
            -phi.at(0, &zero).constant_term()
        } else {
            &c0 / &Scalar::from_int(t as i64)
        };
        psi.set(t, &hats[&t] + &Jet::constant(vars, kappa));
    }
    psi.log_nu = log_multiple;
    checks.push(Check::new(
        "log-multiple",
        log_multiple == -n,
        alloc::format!("Psi carries {log_multiple} log nu, complex dimension {n}"),
    ));
    // X = Φ + Ψ
    let mut x: NuJet = Nu::zero(cap);
    for t in -1..=cap {
        x.set(t, &phi.at(t, &zero) + &psi.at(t, &zero));
    }
    let xm1 = x.at(-1, &zero);
    checks.push(Check::new("singular-part", xm1.agrees(&zero), alloc::format!("Phi_-1 + Psi_-1 = {xm1}")));
    let x0 = x.at(0, &zero);
    let e0 = x0.exp(star.degree)?;
    let w = wedge_top(&hessian(&phi.at(-1, &zero)));
    let c = w.constant_term();
    let lead = e0.scale(&c);
    checks.push(Check::new(
        "leading-term",
        lead.agrees(&w),
        alloc::format!("C e^(Phi_0+Psi_0) against omega^n/n!, C = {c}"),
    ));
    let mut rest: NuJet = Nu::zero(cap);
    for t in 1..=cap {
        rest.set(t, x.at(t, &zero));
    }
    let ex = nu_exp(&rest, vars)?;
    let mu = ex.map(|_, j| Ok((j * &lead).clone()))?.shift((log_multiple + phi.log_nu) as i32);
    Ok(TraceDensity { psi, mu, constant: c, wedge: w, checks })
}

/// `(L_φ − R_φ)ᵗ μ = 0`: `∫ (φ★ψ − ψ★φ) μ` vanishes for every compactly
/// supported `ψ`. Returns the first failing `ν`-order.
pub fn trace_defect(star: &StarProduct, mu: &NuJet, f: &Jet) -> Result<Option<i32>, Error> {
    let d = star.left(f)?.try_sub(&star.right(f)?)?;
    let out = d.adjoint().apply(mu)?;
    let z = Nu::zero(out.cap());
    Ok(out.first_difference(&z))
}

/// Checks `B(∂Ψ/∂xᵢ) = −∂Φ/∂xᵢ` for every coordinate and
/// `B(dΨ/dν) = −dΦ/dν`.
pub fn check_normalization(star: &StarProduct, phi: &NuJet, psi: &NuJet) -> Result<Check, Error> {
    let b = star.berezin();
    let vars = star.vars;
    let one = Jet::one(vars);
    let cap = star.order() - 1;
    for i in 0..vars.nvars() {
        let dpsi = psi.map(|_, j| Ok(j.deriv(i)))?.truncate(cap);
        let dphi = phi.map(|_, j| Ok(j.deriv(i)))?;
        let lhs = b.apply(&dpsi)?;
        let rhs = dphi.neg();
        if let Some(r) = lhs.first_difference(&rhs) {
            return Ok(Check::fail("normalization", alloc::format!("d/d{} equation at nu^{r}", vars.name(i))));
        }
    }
    let mut dpsi = psi.truncate(cap).d_dnu(&one)?;
    let mut dphi = phi.d_dnu(&one)?;
    dpsi.log_nu = 0;
    dphi.log_nu = 0;
    let lhs = b.apply(&dpsi)?;
    if let Some(r) = lhs.first_difference(&dphi.neg()) {
        return Ok(Check::fail("normalization", alloc::format!("d/dnu equation at nu^{r}")));
    }
    Ok(Check::pass("normalization", alloc::format!("B(dPsi) = -dPhi through nu^{}", cap - 1)))
}

/// `φ ★ ψ = Σ νʳ/r! ∂_{z̄}^r φ ∂_z^r ψ` summed over multi-indices, the
/// product of the flat potential `Σ zᵏz̄ᵏ/ν`.
pub fn wick_table(vars: VarSet, k: i32) -> Nu<Bidiff> {
    let m = vars.m;
    let zs: Vec<usize> = (0..m).collect();
    let mut t = Nu::zero(k);
    for r in 0..=k {
        let mut b = Bidiff::zero(vars);
        for a in Mono::all_of_degree(&zs, r as u32) {
            let f = a.factorial(m) as i64;
            let zb = Mono(a.0 << (8 * m));
            b.add_term(zb, a, &Jet::constant(vars, Scalar::from_ratio(1, f)));
        }
        t.set(r, b);
    }
    t
}

/// The product `*` on `TM` and its fast left and right multiplications.
#[derive(Clone, Debug)]
pub struct TmStar {
    pub star: StarProduct,
    /// `g^{l̄k} ∂²/∂η^k∂z̄^l`.
    pub x_left: DiffOp,
    /// `g^{l̄k} ∂²/∂z^k∂η̄^l`.
    pub x_right: DiffOp,
}

impl TmStar {
    pub fn build(chart: &ChartGeometry, k: i32) -> Result<TmStar, Error> {
        let t = chart.tangent();
        let xi = chart.tm_potential(TmPotential::Xi, EXACT);
        let star = StarProduct::from_potential(&xi, k, chart.degree)?;
        let mut x_left = DiffOp::zero(t);
        let mut x_right = DiffOp::zero(t);
        for kk in 0..chart.m {
            for l in 0..chart.m {
                let g = chart.gu(l, kk).lift(t);
                x_left.add_term(Mono::var(t.fib(kk)).mul(Mono::var(t.zbar(l))), &g);
                x_right.add_term(Mono::var(t.z(kk)).mul(Mono::var(t.fibbar(l))), &g);
            }
        }
        Ok(TmStar { star, x_left, x_right })
    }

    /// `J f J⁻¹` for a base function `f`.
    pub fn left_fast(&self, f: &Jet) -> Result<NuOp, Error> {
        nu_conjugate(&self.x_left, &DiffOp::mul_by(&f.lift(self.star.vars)), self.star.order())
    }

    /// `K f K⁻¹` for a base function `f`.
    pub fn right_fast(&self, f: &Jet) -> Result<NuOp, Error> {
        nu_conjugate(&self.x_right, &DiffOp::mul_by(&f.lift(self.star.vars)), self.star.order())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat(m: usize) -> NuJet {
        let v = VarSet::base(m);
        let mut p = Jet::zero(v);
        for k in 0..m {
            p.add_scaled(&(&Jet::var(v, k) * &Jet::var(v, m + k)), &Scalar::one());
        }
        Nu::single(-1, p, EXACT)
    }

    #[test]
    fn flat_is_wick() {
        for m in 1..=2 {
            let s = StarProduct::from_potential(&flat(m), 3, 6).unwrap();
            let w = wick_table(s.vars, 3);
            assert!(s.table.agrees(&w), "m = {m}");
            assert!(s.table.terms().values().all(|b| b.min_valid() == EXACT));
        }
    }

    #[test]
    fn zbar_z() {
        let s = StarProduct::from_potential(&flat(1), 2, 6).unwrap();
        let v = s.vars;
        let p = s.mul_jets(&Jet::var(v, 1), &Jet::var(v, 0)).unwrap();
        assert_eq!(p.get(0), Some(&(&Jet::var(v, 0) * &Jet::var(v, 1))));
        assert_eq!(p.get(1), Some(&Jet::one(v)));
        let b = s.berezin();
        let bz = b.apply(&Nu::single(0, &Jet::var(v, 0) * &Jet::var(v, 1), EXACT)).unwrap();
        assert_eq!(bz.get(1), Some(&Jet::one(v)));
    }

    #[test]
    fn flat_dual_is_anti_wick() {
        let s = StarProduct::from_potential(&flat(1), 3, 6).unwrap();
        let d = s.dual().unwrap();
        let v = s.vars;
        let p = d.mul_jets(&Jet::var(v, 1), &Jet::var(v, 0)).unwrap();
        assert_eq!(p.get(1), Some(&Jet::constant(v, Scalar::from_int(-1))));
        let dd = d.dual().unwrap();
        assert!(dd.first_difference(&s).is_none());
    }

    #[test]
    fn flat_trace_density() {
        let s = StarProduct::from_potential(&flat(1), 4, 6).unwrap();
        let td = canonical_trace_density(&s).unwrap();
        assert!(td.checks.iter().all(|c| c.pass), "{:?}", td.checks);
        assert_eq!(td.psi.log_nu, -1);
        let v = s.vars;
        assert_eq!(td.psi.get(-1), Some(&-&(&Jet::var(v, 0) * &Jet::var(v, 1))));
        assert!(td.psi.terms().iter().all(|(k, j)| *k == -1 || j.is_zero()));
        assert_eq!(td.mu.get(-1), Some(&Jet::constant(v, -Scalar::i())));
        let f = &Jet::var(v, 0).pow(2) * &Jet::var(v, 1);
        assert_eq!(trace_defect(&s, &td.mu, &f).unwrap(), None);
    }

    #[test]
    fn fubini_study() {
        let v = VarSet::base(1);
        let w = &Jet::var(v, 0) * &Jet::var(v, 1);
        let phi = (&Jet::one(v) + &w).truncate(10).log(10).unwrap();
        let s = StarProduct::from_potential(&Nu::single(-1, phi.clone(), EXACT), 3, 10).unwrap();
        assert!(s.check_first_order(&phi).unwrap().pass);
        assert!(s.check_structure(&[1], &[0]).pass);
        let f = &Jet::var(v, 0) + &w;
        let g = &Jet::var(v, 1).pow(2) + &Jet::var(v, 0);
        assert_eq!(s.associativity_defect(&f, &g, &w).unwrap(), None);
        assert!(s.check_berezin_conjugation().unwrap().pass);
    }
}
