//! One validated chart with its products, built on first use.

use std::sync::OnceLock;

use deforma_core::groupoid::Groupoid;
use deforma_core::star::{canonical_trace_density, StarProduct, TmStar, TraceDensity};
use deforma_core::symbol::SymbolCalculus;
use deforma_core::toeplitz::Toeplitz;
use deforma_core::{Error, Jet, Nu, NuJet, VarSet, EXACT};

use crate::spec::Chart;
use crate::Failure;

/// Which product a command works with.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Which {
    /// Separation of variables on `M` from `Φ₋₁/ν`.
    M,
    /// The product on `TM`.
    Tm,
    /// The dual of `M`.
    Dual,
    /// The opposite of the dual.
    Prime,
}

impl Which {
    pub fn parse(s: &str) -> Result<Which, Failure> {
        match s {
            "m" => Ok(Which::M),
            "tm" => Ok(Which::Tm),
            "dual" => Ok(Which::Dual),
            "prime" => Ok(Which::Prime),
            _ => Err(Failure::Input(format!("unknown star {s:?}; expected m, tm, dual or prime"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Which::M => "m",
            Which::Tm => "tm",
            Which::Dual => "dual",
            Which::Prime => "prime",
        }
    }
}

type Cell<T> = OnceLock<Result<T, Error>>;

fn get<T>(cell: &Cell<T>, build: impl FnOnce() -> Result<T, Error>) -> Result<&T, Failure> {
    cell.get_or_init(build).as_ref().map_err(|e| Failure::Core(e.clone()))
}

pub struct Session {
    pub chart: Chart,
    pub seed: u64,
    m_star: Cell<StarProduct>,
    dual: Cell<StarProduct>,
    tm: Cell<TmStar>,
    toeplitz: Cell<Toeplitz>,
    symbols: OnceLock<SymbolCalculus>,
    groupoid: Cell<Groupoid>,
    trace_m: Cell<TraceDensity>,
    trace_tm: Cell<TraceDensity>,
}

impl Session {
    pub fn new(chart: Chart, seed: u64) -> Session {
        Session {
            chart,
            seed,
            m_star: OnceLock::new(),
            dual: OnceLock::new(),
            tm: OnceLock::new(),
            toeplitz: OnceLock::new(),
            symbols: OnceLock::new(),
            groupoid: OnceLock::new(),
            trace_m: OnceLock::new(),
            trace_tm: OnceLock::new(),
        }
    }

    pub fn order(&self) -> i32 {
        self.chart.order
    }

    pub fn degree(&self) -> i32 {
        self.chart.degree
    }

    pub fn base(&self) -> VarSet {
        self.chart.base()
    }

    pub fn tangent(&self) -> VarSet {
        self.chart.geometry.tangent()
    }

    /// `Φ₋₁/ν`.
    pub fn potential(&self) -> NuJet {
        Nu::single(-1, self.chart.geometry.phi.clone(), EXACT)
    }

    pub fn m_star(&self) -> Result<&StarProduct, Failure> {
        get(&self.m_star, || StarProduct::from_potential(&self.potential(), self.order(), self.degree()))
    }

    pub fn dual(&self) -> Result<&StarProduct, Failure> {
        let m = self.m_star()?;
        get(&self.dual, || m.dual())
    }

    pub fn tm(&self) -> Result<&TmStar, Failure> {
        get(&self.tm, || TmStar::build(&self.chart.geometry, self.order()))
    }

    pub fn toeplitz(&self) -> Result<&Toeplitz, Failure> {
        get(&self.toeplitz, || Toeplitz::new(&self.chart.geometry, self.order()))
    }

    pub fn symbols(&self) -> &SymbolCalculus {
        self.symbols.get_or_init(|| SymbolCalculus::new(&self.chart.geometry))
    }

    pub fn groupoid(&self) -> Result<&Groupoid, Failure> {
        get(&self.groupoid, || Groupoid::new(&self.chart.geometry))
    }

    /// The product selected by `which`; `Prime` is built from the cached
    /// dual on every call.
    pub fn star(&self, which: Which) -> Result<StarProduct, Failure> {
        Ok(match which {
            Which::M => self.m_star()?.clone(),
            Which::Tm => self.tm()?.star.clone(),
            Which::Dual => self.dual()?.clone(),
            Which::Prime => self.dual()?.opposite(),
        })
    }

    /// Variables the operands of `which` live on.
    pub fn vars(&self, which: Which) -> VarSet {
        match which {
            Which::Tm => self.tangent(),
            _ => self.base(),
        }
    }

    pub fn trace_m(&self) -> Result<&TraceDensity, Failure> {
        let m = self.m_star()?;
        get(&self.trace_m, || canonical_trace_density(m))
    }

    pub fn trace_tm(&self) -> Result<&TraceDensity, Failure> {
        let tm = self.tm()?;
        get(&self.trace_tm, || canonical_trace_density(&tm.star))
    }

    /// The dual product solved from the dual potential `Ψ` of a product one
    /// order higher, with the canonical trace density of the result.
    pub fn dual_from_potential(&self) -> Result<(StarProduct, TraceDensity), Failure> {
        let up = StarProduct::from_potential(&self.potential(), self.order() + 1, self.degree())?;
        let mut psi = canonical_trace_density(&up)?.psi;
        psi.log_nu = 0;
        let star = StarProduct::from_potential(&psi, self.order(), self.degree())?;
        let td = canonical_trace_density(&star)?;
        Ok((star, td))
    }

    pub fn one(&self, j: Jet) -> NuJet {
        Nu::single(0, j, EXACT)
    }
}
