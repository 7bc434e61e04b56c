use deforma_core::groupoid::{fourier, fourier_inv};
use deforma_core::scalar::{format_rat, parse_rat};
use deforma_core::star::StarProduct;
use deforma_core::symbol::SymbolCalculus;
use deforma_core::{ChartGeometry, Jet, Mono, Nu, NuJet, Scalar, VarSet, EXACT};
use proptest::prelude::*;

fn scalar() -> impl Strategy<Value = Scalar> {
    (-4i64..=4, 1i64..=3, -2i64..=2).prop_map(|(p, q, i)| Scalar::from_parts((p, q), (i, 1)))
}

/// Exact polynomial over `vars` with total degree at most `deg`.
fn poly(vars: VarSet, deg: u32, terms: usize) -> impl Strategy<Value = Jet> {
    let n = vars.nvars();
    prop::collection::vec((prop::collection::vec(0u32..=deg, n), scalar()), 1..=terms).prop_map(move |ts| {
        let ts = ts.into_iter().filter(|(e, _)| e.iter().sum::<u32>() <= deg).map(|(e, c)| (Mono::from_exps(&e), c));
        Jet::from_terms(vars, ts, EXACT)
    })
}

fn base1() -> VarSet {
    VarSet::base(1)
}

fn flat_star(k: i32) -> StarProduct {
    let v = base1();
    let phi = Nu::single(-1, &Jet::var(v, 0) * &Jet::var(v, 1), EXACT);
    StarProduct::from_potential(&phi, k, 8).unwrap()
}

/// `Σ νʳ/r! ∂_z̄ʳf ∂_zʳg`, computed without the solver.
fn wick(f: &Jet, g: &Jet, k: i32) -> NuJet {
    let mut out = Nu::zero(k);
    let (mut df, mut dg) = (f.clone(), g.clone());
    let mut fact = 1i64;
    for r in 0..=k {
        if r > 0 {
            df = df.deriv(1);
            dg = dg.deriv(0);
            fact *= r as i64;
        }
        out.set(r, (&df * &dg).scale(&Scalar::from_ratio(1, fact)));
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn rational_roundtrip(p in -1000i64..1000, q in 1i64..1000) {
        let r = parse_rat(&format!("{p}/{q}")).unwrap();
        prop_assert_eq!(parse_rat(&format_rat(&r)).unwrap(), r);
    }

    #[test]
    fn jet_ring_laws(a in poly(base1(), 3, 4), b in poly(base1(), 3, 4), c in poly(base1(), 3, 4)) {
        prop_assert_eq!(&a * &b, &b * &a);
        prop_assert_eq!(&(&a * &b) * &c, &a * &(&b * &c));
        prop_assert_eq!(&a * &(&b + &c), &(&a * &b) + &(&a * &c));
    }

    #[test]
    fn truncation_commutes_with_products(a in poly(base1(), 4, 5), b in poly(base1(), 4, 5), d in 0i32..6) {
        let lhs = (&a * &b).truncate(d);
        let rhs = &a.truncate(d) * &b.truncate(d);
        prop_assert!(lhs.agrees(&rhs));
        prop_assert!(rhs.valid() >= d);
    }

    #[test]
    fn exp_log_inverse(a in poly(base1(), 3, 4)) {
        let x = &a - &Jet::constant(base1(), a.constant_term());
        let one_plus = &Jet::one(base1()) + &x;
        let back = one_plus.log(6).unwrap().exp(6).unwrap();
        prop_assert!(back.agrees(&one_plus.truncate(6)));
    }

    #[test]
    fn leibniz(a in poly(base1(), 3, 4), b in poly(base1(), 3, 4)) {
        for i in 0..2 {
            prop_assert_eq!((&a * &b).deriv(i), &(&a.deriv(i) * &b) + &(&a * &b.deriv(i)));
        }
    }

    #[test]
    fn flat_star_is_wick(f in poly(base1(), 4, 4), g in poly(base1(), 4, 4)) {
        let s = flat_star(4);
        let got = s.mul_jets(&f, &g).unwrap();
        prop_assert!(got.first_difference(&wick(&f, &g, 4)).is_none());
    }

    #[test]
    fn flat_star_associative(f in poly(base1(), 3, 3), g in poly(base1(), 3, 3), h in poly(base1(), 3, 3)) {
        prop_assert_eq!(flat_star(3).associativity_defect(&f, &g, &h).unwrap(), None);
    }

    #[test]
    fn berezin_swaps_separated_factors(a in poly(base1(), 3, 3), b in poly(base1(), 3, 3)) {
        let v = base1();
        let a = a.set_zero(v.zbar_mask());
        let b = b.set_zero(v.z_mask());
        let s = flat_star(3);
        let lhs = s.berezin().apply(&Nu::single(0, &a * &b, EXACT)).unwrap();
        let rhs = s.mul_jets(&b, &a).unwrap();
        prop_assert!(lhs.first_difference(&rhs).is_none());
    }

    #[test]
    fn symbol_roundtrip(p in poly(VarSet::tangent(1), 3, 4)) {
        let v = base1();
        let chart = ChartGeometry::build(&(&Jet::var(v, 0) * &Jet::var(v, 1)), 6).unwrap();
        let s = SymbolCalculus::new(&chart);
        let p = Nu::single(0, p, EXACT);
        let back = s.dequantize(&s.quantize(&p).unwrap()).unwrap();
        prop_assert!(back.first_difference(&p).is_none());
    }

    #[test]
    fn fourier_roundtrip(p in poly(VarSet::tangent(1), 3, 4)) {
        let a = Nu::single(0, p, EXACT);
        let back = fourier_inv(&fourier(&a).unwrap()).unwrap();
        prop_assert!(back.first_difference(&a).is_none());
    }
}
