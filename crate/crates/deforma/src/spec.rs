//! Chart specifications: a JSON document naming a polynomial potential
//! `Φ₋₁` and the truncation depths.

use deforma_core::scalar::parse_rat;
use deforma_core::{ChartGeometry, Jet, Mono, Scalar, VarSet};
use serde::{Deserialize, Serialize};

use crate::Failure;

/// The largest supported complex dimension: the diagonal model uses `4m`
/// packed variables.
pub const MAX_DIM: usize = 4;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartSpec {
    pub m: usize,
    pub potential: Vec<PotentialTerm>,
    pub jet_degree: i32,
    pub nu_order: i32,
}

/// One monomial `c · z^a z̄^b` of the potential; `powers` lists the `z`
/// exponents followed by the `z̄` exponents.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialTerm {
    pub powers: Vec<u32>,
    pub re: String,
    #[serde(default = "zero_string")]
    pub im: String,
}

fn zero_string() -> String {
    "0".into()
}

impl ChartSpec {
    /// Parses a spec document. Syntax errors carry line and column, shape
    /// errors the offending field.
    pub fn parse(text: &str) -> Result<ChartSpec, Failure> {
        serde_json::from_str(text).map_err(|e| Failure::Input(format!("spec: {e}")))
    }

    /// The flat potential `Σ zᵏz̄ᵏ`.
    pub fn flat(m: usize, jet_degree: i32, nu_order: i32) -> ChartSpec {
        let potential = (0..m)
            .map(|k| {
                let mut powers = vec![0; 2 * m];
                powers[k] = 1;
                powers[m + k] = 1;
                PotentialTerm { powers, re: "1".into(), im: "0".into() }
            })
            .collect();
        ChartSpec { m, potential, jet_degree, nu_order }
    }

    /// `log(1 + z z̄)` expanded through `jet_degree`.
    pub fn fubini_study(jet_degree: i32, nu_order: i32) -> ChartSpec {
        let potential = (1..=(jet_degree / 2) as u32)
            .map(|k| {
                let sign = if k % 2 == 1 { "" } else { "-" };
                PotentialTerm { powers: vec![k, k], re: format!("{sign}1/{k}"), im: "0".into() }
            })
            .collect();
        ChartSpec { m: 1, potential, jet_degree, nu_order }
    }

    /// The potential as an exact polynomial.
    pub fn potential_jet(&self) -> Result<Jet, Failure> {
        if self.m == 0 || self.m > MAX_DIM {
            return Err(Failure::Input(format!("spec: m = {} outside 1..={MAX_DIM}", self.m)));
        }
        let vars = VarSet::base(self.m);
        let mut terms = Vec::with_capacity(self.potential.len());
        for (i, t) in self.potential.iter().enumerate() {
            if t.powers.len() != 2 * self.m {
                return Err(Failure::Input(format!(
                    "spec: potential[{i}].powers has {} entries, expected {}",
                    t.powers.len(),
                    2 * self.m
                )));
            }
            if t.powers.iter().any(|&e| e > 255) {
                return Err(Failure::Input(format!("spec: potential[{i}].powers exponent above 255")));
            }
            let re = parse_rat(&t.re).map_err(|e| Failure::Input(format!("spec: potential[{i}].re: {e}")))?;
            let im = parse_rat(&t.im).map_err(|e| Failure::Input(format!("spec: potential[{i}].im: {e}")))?;
            terms.push((Mono::from_exps(&t.powers), Scalar::new(re, im)));
        }
        let mut phi = Jet::zero(vars);
        for (m, c) in terms {
            phi.add_scaled(&Jet::monomial(vars, m, c), &Scalar::one());
        }
        Ok(phi)
    }
}

/// A validated spec with its derived chart data.
#[derive(Clone, Debug)]
pub struct Chart {
    pub spec: ChartSpec,
    pub geometry: ChartGeometry,
    /// `ν`-order `K`.
    pub order: i32,
    /// Jet degree `D`.
    pub degree: i32,
}

impl Chart {
    /// Validates `spec` with optional overrides of `K` and `D`.
    pub fn new(spec: ChartSpec, order: Option<i32>, degree: Option<i32>) -> Result<Chart, Failure> {
        let order = order.unwrap_or(spec.nu_order);
        let degree = degree.unwrap_or(spec.jet_degree);
        if order < 0 {
            return Err(Failure::Input(format!("nu_order = {order} is negative")));
        }
        if degree < order + 2 {
            return Err(Failure::Input(format!(
                "insufficient jet depth: jet_degree = {degree}, nu_order = {order} needs jet_degree >= {}",
                order + 2
            )));
        }
        let phi = spec.potential_jet()?;
        let geometry = ChartGeometry::build(&phi, degree).map_err(Failure::Core)?;
        Ok(Chart { spec, geometry, order, degree })
    }

    pub fn m(&self) -> usize {
        self.geometry.m
    }

    pub fn base(&self) -> VarSet {
        self.geometry.vars()
    }

    /// True for the potential `Σ zᵏz̄ᵏ`.
    pub fn is_flat(&self) -> bool {
        let v = self.base();
        let mut flat = Jet::zero(v);
        for k in 0..v.m {
            flat.add_scaled(&(&Jet::var(v, v.z(k)) * &Jet::var(v, v.zbar(k))), &Scalar::one());
        }
        self.geometry.phi == flat
    }
}
