//! Metric data of a chart, potentials on the tangent bundle and top wedge
//! powers of `(1,1)`-forms.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::check::Check;
use crate::nu::Nu;
use crate::{Error, Jet, NuJet, Scalar, VarSet};

/// Pseudo-Kähler data of a chart centred at the origin.
#[derive(Clone, Debug)]
pub struct ChartGeometry {
    pub m: usize,
    /// Degree to which inverses and logarithms are expanded.
    pub degree: i32,
    /// `Φ₋₁` on the base variables.
    pub phi: Jet,
    /// `g_{kl̄} = ∂²Φ₋₁/∂z^k∂z̄^l`, indexed `[k][l]`.
    pub g_lower: Vec<Vec<Jet>>,
    /// `g^{l̄k}`, indexed `[l][k]`.
    pub g_upper: Vec<Vec<Jet>>,
    pub det_g: Jet,
    /// `det g` at the origin. Only derivatives of `log g` are ever used, so
    /// its logarithm is never taken.
    pub det0: Scalar,
    /// `log(det g / det g(0))`.
    pub log_g: Jet,
}

/// Which potential on `TM` to build.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TmPotential {
    /// `Ξ = Ξ₋₁/ν + log g`.
    Xi,
    /// `Ξ̃ = −2m log ν − Ξ₋₁/ν + log g`.
    XiTilde,
}

/// Inverse and determinant of a square jet matrix, by elimination with
/// pivots chosen among entries with nonzero constant term.
pub fn invert_matrix(a: &[Vec<Jet>], d: i32) -> Result<(Vec<Vec<Jet>>, Jet), Error> {
    let n = a.len();
    let vars = a[0][0].vars();
    let mut m: Vec<Vec<Jet>> = a.iter().map(|r| r.iter().map(|x| x.trim(d)).collect()).collect();
    let mut inv: Vec<Vec<Jet>> =
        (0..n).map(|i| (0..n).map(|j| if i == j { Jet::one(vars) } else { Jet::zero(vars) }).collect()).collect();
    let mut det = Jet::one(vars);
    for c in 0..n {
        let p = (c..n).find(|&r| !m[r][c].constant_term().is_zero()).ok_or(Error::DegenerateChart)?;
        if p != c {
            m.swap(p, c);
            inv.swap(p, c);
            det = -&det;
        }
        let piv = m[c][c].clone();
        det = (&det * &piv).trim(d);
        let pinv = piv.inverse(d)?;
        for j in 0..n {
            m[c][j] = (&m[c][j] * &pinv).trim(d);
            inv[c][j] = (&inv[c][j] * &pinv).trim(d);
        }
        for r in 0..n {
            if r == c || m[r][c].is_zero() {
                continue;
            }
            let f = m[r][c].clone();
            for j in 0..n {
                let a = (&f * &m[c][j]).trim(d);
                m[r][j] = (&m[r][j] - &a).trim(d);
                let b = (&f * &inv[c][j]).trim(d);
                inv[r][j] = (&inv[r][j] - &b).trim(d);
            }
        }
    }
    Ok((inv, det))
}

/// `H[i][j] = ∂²f/∂hᵢ∂āⱼ` over the paired holomorphic and antiholomorphic
/// coordinates of `f`'s variable set.
pub fn hessian(f: &Jet) -> Vec<Vec<Jet>> {
    let v = f.vars();
    let (hol, ah) = (v.holomorphic(), v.antiholomorphic());
    hol.iter().map(|&i| ah.iter().map(|&j| f.deriv(i).deriv(j)).collect()).collect()
}

/// Coefficient of `Ωⁿ/n!` for `Ω = −i Σ H_{ij} dhᵢ ∧ dāⱼ` against the
/// interleaved volume `dh₁∧dā₁∧dh₂∧dā₂∧…`.
pub fn wedge_top(h: &[Vec<Jet>]) -> Jet {
    let n = h.len();
    let vars = h[0][0].vars();
    let minus_i = -Scalar::i();
    let mut omega: BTreeMap<u32, Jet> = BTreeMap::new();
    for (i, row) in h.iter().enumerate() {
        for (j, x) in row.iter().enumerate() {
            if !x.is_zero() {
                let c = if i > j { Scalar::i() } else { minus_i.clone() };
                omega.insert((1 << (2 * i)) | (1 << (2 * j + 1)), x.scale(&c));
            }
        }
    }
    let mut power: BTreeMap<u32, Jet> = BTreeMap::new();
    power.insert(0, Jet::one(vars));
    for _ in 0..n {
        let mut next: BTreeMap<u32, Jet> = BTreeMap::new();
        for (a, x) in &power {
            for (b, y) in &omega {
                if a & b != 0 {
                    continue;
                }
                let t = if wedge_sign(*a, *b) { -&(x * y) } else { x * y };
                match next.get_mut(&(a | b)) {
                    Some(s) => s.add_scaled(&t, &Scalar::one()),
                    None => {
                        next.insert(a | b, t);
                    }
                }
            }
        }
        power = next;
    }
    let full = (1u32 << (2 * n)) - 1;
    let nf: i64 = (1..=n as i64).product();
    power.get(&full).cloned().unwrap_or_else(|| Jet::zero(vars)).scale(&Scalar::from_ratio(1, nf))
}

/// Sign of reordering `e_a ∧ e_b` into increasing basis order: the number of
/// pairs `x ∈ a`, `y ∈ b` with `x > y`, mod 2.
fn wedge_sign(a: u32, b: u32) -> bool {
    let mut count = 0;
    let mut bb = b;
    while bb != 0 {
        let y = bb.trailing_zeros();
        count += (a >> (y + 1)).count_ones();
        bb &= bb - 1;
    }
    count % 2 == 1
}

impl ChartGeometry {
    pub fn build(phi: &Jet, degree: i32) -> Result<ChartGeometry, Error> {
        let vars = phi.vars();
        if vars != VarSet::base(vars.m) {
            return Err(Error::Structural("a chart potential lives on the base variables".into()));
        }
        let m = vars.m;
        let g_lower: Vec<Vec<Jet>> =
            (0..m).map(|k| (0..m).map(|l| phi.deriv(vars.z(k)).deriv(vars.zbar(l))).collect()).collect();
        let (g_upper, det_g) = invert_matrix(&g_lower, degree)?;
        let det0 = det_g.constant_term();
        let log_g = det_g.scale(&det0.inv()?).log(degree)?;
        Ok(ChartGeometry { m, degree, phi: phi.clone(), g_lower, g_upper, det_g, det0, log_g })
    }

    pub fn vars(&self) -> VarSet {
        VarSet::base(self.m)
    }

    pub fn tangent(&self) -> VarSet {
        VarSet::tangent(self.m)
    }

    /// `g^{l̄k}`.
    pub fn gu(&self, l: usize, k: usize) -> &Jet {
        &self.g_upper[l][k]
    }

    /// `g_{kl̄}`.
    pub fn gl(&self, k: usize, l: usize) -> &Jet {
        &self.g_lower[k][l]
    }

    /// Laplace–Beltrami `Δφ = g^{l̄k} ∂²φ/∂z^k∂z̄^l`.
    pub fn laplacian(&self, f: &Jet) -> Jet {
        let v = self.vars();
        let mut out = Jet::zero(v);
        for k in 0..self.m {
            for l in 0..self.m {
                out.add_scaled(&(self.gu(l, k) * &f.deriv(v.z(k)).deriv(v.zbar(l))), &Scalar::one());
            }
        }
        out
    }

    /// Checks the Kähler–Poisson identities
    /// `g^{l̄k}∂_k g^{n̄m} = g^{n̄k}∂_k g^{l̄m}` and
    /// `g^{l̄k}∂_{l̄} g^{n̄m} = g^{l̄m}∂_{l̄} g^{n̄k}`.
    pub fn check_kahler_poisson(&self) -> Check {
        let v = self.vars();
        let m = self.m;
        for a in 0..m {
            for n in 0..m {
                for c in 0..m {
                    let mut lhs = Jet::zero(v);
                    let mut rhs = Jet::zero(v);
                    for k in 0..m {
                        lhs.add_scaled(&(self.gu(a, k) * &self.gu(n, c).deriv(v.z(k))), &Scalar::one());
                        rhs.add_scaled(&(self.gu(n, k) * &self.gu(a, c).deriv(v.z(k))), &Scalar::one());
                    }
                    if let Some((mo, x, y)) = lhs.first_difference(&rhs) {
                        return Check::fail(
                            "kahler-poisson",
                            alloc::format!("holomorphic identity ({a},{n},{c}) at {}: {x} vs {y}", mo.render(&v)),
                        );
                    }
                    let mut lhs = Jet::zero(v);
                    let mut rhs = Jet::zero(v);
                    for l in 0..m {
                        lhs.add_scaled(&(self.gu(l, a) * &self.gu(n, c).deriv(v.zbar(l))), &Scalar::one());
                        rhs.add_scaled(&(self.gu(l, c) * &self.gu(n, a).deriv(v.zbar(l))), &Scalar::one());
                    }
                    if let Some((mo, x, y)) = lhs.first_difference(&rhs) {
                        return Check::fail(
                            "kahler-poisson",
                            alloc::format!("antiholomorphic identity ({a},{n},{c}) at {}: {x} vs {y}", mo.render(&v)),
                        );
                    }
                }
            }
        }
        let mut inv_ok = true;
        for k in 0..m {
            for n in 0..m {
                let mut s = Jet::zero(v);
                for l in 0..m {
                    s.add_scaled(&(self.gl(k, l) * self.gu(l, n)), &Scalar::one());
                }
                let id = if k == n { Jet::one(v) } else { Jet::zero(v) };
                inv_ok &= s.agrees(&id);
            }
        }
        if !inv_ok {
            return Check::fail("kahler-poisson", "g_lower·g_upper is not the identity");
        }
        Check::pass("kahler-poisson", alloc::format!("m = {m}, valid through degree {}", self.g_upper[0][0].valid()))
    }

    /// `Ξ₋₁ = Φ₋₁ + ∂_kΦ₋₁ η^k + ∂_{l̄}Φ₋₁ η̄^l` on the tangent variables.
    pub fn xi_minus1(&self) -> Jet {
        let (v, t) = (self.vars(), self.tangent());
        let mut out = self.phi.lift(t);
        for k in 0..self.m {
            out.add_scaled(&(&self.phi.deriv(v.z(k)).lift(t) * &Jet::var(t, t.fib(k))), &Scalar::one());
            out.add_scaled(&(&self.phi.deriv(v.zbar(k)).lift(t) * &Jet::var(t, t.fibbar(k))), &Scalar::one());
        }
        out
    }

    /// The formal potentials on `TM` through `ν^cap`.
    pub fn tm_potential(&self, which: TmPotential, cap: i32) -> NuJet {
        let t = self.tangent();
        let x = self.xi_minus1();
        let lg = self.log_g.lift(t);
        match which {
            TmPotential::Xi => Nu::from_terms([(-1, x), (0, lg)], cap),
            TmPotential::XiTilde => {
                let mut p = Nu::from_terms([(-1, -&x), (0, lg)], cap);
                p.log_nu = -2 * self.m as i64;
                p
            }
        }
    }

    /// `Ξ_h = N Ξ₋₁ + log g` at `h = 1/N`.
    pub fn xi_h(&self, n: i64) -> Jet {
        &self.xi_minus1().scale_int(n) + &self.log_g.lift(self.tangent())
    }

    /// Coefficient of `ω₋₁^m/m!` against `dz¹∧dz̄¹∧…`.
    pub fn omega_top(&self) -> Jet {
        wedge_top(&hessian(&self.phi))
    }

    /// Coefficient of `Ω₋₁^{2m}/(2m)!` on `TM` against
    /// `dz¹∧dz̄¹∧…∧dη¹∧dη̄¹∧…`.
    pub fn tm_omega_top(&self) -> Jet {
        wedge_top(&hessian(&self.xi_minus1()))
    }

    /// `κ_m` with `ω₋₁^m/m! = κ_m g dz dz̄`.
    pub fn kappa(&self) -> Result<Scalar, Error> {
        Ok(&self.omega_top().constant_term() / &self.det0)
    }

    /// `λ_m` with `Ω₋₁^{2m}/(2m)! = λ_m g² dz dz̄ dη dη̄`.
    pub fn lambda(&self) -> Result<Scalar, Error> {
        Ok(&self.tm_omega_top().constant_term() / &(&self.det0 * &self.det0))
    }

    /// `κ_m` and `λ_m` are constants: the wedge coefficients are exactly
    /// `κ_m g` and `λ_m g²`.
    pub fn check_wedge_constants(&self) -> Result<Check, Error> {
        let (v, t) = (self.vars(), self.tangent());
        let kappa = self.kappa()?;
        let lambda = self.lambda()?;
        let w = self.omega_top();
        let want = self.det_g.scale(&kappa);
        if let Some((mo, x, y)) = w.first_difference(&want) {
            return Ok(Check::fail("wedge", alloc::format!("ω^m/m! vs κ g at {}: {x} vs {y}", mo.render(&v))));
        }
        let g = self.det_g.lift(t);
        let want = (&g * &g).scale(&lambda);
        let w = self.tm_omega_top();
        if let Some((mo, x, y)) = w.first_difference(&want) {
            return Ok(Check::fail("wedge", alloc::format!("Ω^2m/(2m)! vs λ g² at {}: {x} vs {y}", mo.render(&t))));
        }
        Ok(Check::pass("wedge", alloc::format!("kappa = {kappa}, lambda = {lambda}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Mono;

    fn flat(m: usize) -> ChartGeometry {
        let v = VarSet::base(m);
        let mut phi = Jet::zero(v);
        for k in 0..m {
            phi.add_scaled(&(&Jet::var(v, k) * &Jet::var(v, m + k)), &Scalar::one());
        }
        ChartGeometry::build(&phi, 6).unwrap()
    }

    #[test]
    fn flat_chart() {
        let c = flat(1);
        assert_eq!(c.g_upper[0][0], Jet::one(VarSet::base(1)));
        assert!(c.log_g.is_zero() && c.log_g.is_exact());
        assert_eq!(c.kappa().unwrap(), -Scalar::i());
        // TM Hessian [[1,1],[1,0]] has determinant −1
        let h = hessian(&c.xi_minus1());
        assert_eq!(h[0][1].constant_term(), Scalar::one());
        assert!(h[1][1].is_zero());
        assert_eq!(c.tm_omega_top().constant_term(), Scalar::one());
        assert!(c.check_kahler_poisson().pass);
        assert!(flat(2).check_wedge_constants().unwrap().pass);
    }

    #[test]
    fn fubini_study_metric() {
        // Φ = log(1 + z z̄) through degree 8
        let v = VarSet::base(1);
        let w = &Jet::var(v, 0) * &Jet::var(v, 1);
        let phi = (&Jet::one(v) + &w).truncate(8).log(8).unwrap();
        let c = ChartGeometry::build(&phi, 6).unwrap();
        let want = (&Jet::one(v) + &w).pow(2).inverse(6).unwrap();
        assert!(c.g_lower[0][0].agrees(&want));
        assert!(c.det_g.agrees(&want));
        assert!(c.check_kahler_poisson().pass);
        assert!(c.check_wedge_constants().unwrap().pass);
        assert_eq!(c.omega_top().coeff(Mono::from_exps(&[1, 1])), Scalar::from_int(-2).scale_int(1) * -Scalar::i());
    }

    #[test]
    fn degenerate() {
        let v = VarSet::base(1);
        let phi = &Jet::var(v, 0) * &Jet::var(v, 0);
        assert!(matches!(ChartGeometry::build(&phi, 4), Err(Error::DegenerateChart)));
    }
}
