use modeq_core::constructions::{
    alternate_display_report, case1_candidates, class_form, class_r, class_system, enumerate_ab, enumerate_report, level2_pole_count, level2_system,
    nu_inf, orbit_images, required_precision, schwarz_check, verify_class, Level2Variant, RunSettings, CLASSES,
};
use modeq_core::solver::{admissible, stieltjes_family};
use modeq_core::{BigComplex, Float, Polynomial, Rational};
use proptest::prelude::*;

fn q(n: i64, d: i64) -> Rational {
    Rational::from((n, d))
}

#[test]
fn class_exponents_give_r() {
    // r is the leading q-exponent of the class form.
    for &alpha in &CLASSES {
        for n in 0..3 {
            assert_eq!(class_r(alpha, n), q(12 * n as i64 + alpha as i64, 6));
            let sys = class_system(alpha, n).unwrap();
            assert_eq!(sys.c, 12);
        }
    }
}

#[test]
fn schwarz_constant_term_is_minus_half_lead_squared() {
    for &alpha in &CLASSES {
        let f = class_form::<Rational>(alpha, &[]).unwrap();
        let rep = schwarz_check(&f, &class_r(alpha, 0), 12, (), None).unwrap();
        assert!(rep.pass);
        assert_eq!(rep.details["constant_term_matches"], true);
    }
}

#[test]
fn alternate_display_differs_by_1728() {
    let rep = alternate_display_report(20).unwrap();
    assert!(rep.pass);
    assert_eq!(rep.details["scalar"], "1728");
}

#[test]
fn class_5_pipeline() {
    let run = RunSettings { order: 30, ..RunSettings::default() };
    let reps = verify_class(5, 1, &run).unwrap();
    assert!(reps.iter().all(|r| r.pass), "{:?}", reps.iter().filter(|r| !r.pass).map(|r| &r.check).collect::<Vec<_>>());
    assert!(reps.iter().any(|r| r.check.contains("rho")));
}

#[test]
fn level2_systems_for_n3() {
    assert_eq!(level2_pole_count(3, Level2Variant::Case1).unwrap(), 4);
    assert_eq!(level2_pole_count(3, Level2Variant::Case2Cusp0).unwrap(), 1);
    assert!(level2_pole_count(4, Level2Variant::Case1).is_err());
    // Case 2 at n = 3 has the single point −1 (cusp 0) or 2 (cusp 1).
    let s0 = level2_system(3, Level2Variant::Case2Cusp0).unwrap();
    let s1 = level2_system(3, Level2Variant::Case2Cusp1).unwrap();
    assert_eq!(s0.closed_form(), Some(q(-1, 1)));
    assert_eq!(s1.closed_form(), Some(q(2, 1)));
}

#[test]
fn case1_label_candidate_is_inadmissible() {
    let [(_, label), (_, example)] = case1_candidates(3).unwrap();
    let fam = stieltjes_family(&label).unwrap();
    assert_eq!(fam.dimension(), 0);
    // x³(x − 2/3)
    assert_eq!(fam.particular, Polynomial::new(vec![q(0, 1), q(0, 1), q(0, 1), q(-2, 3), q(1, 1)]));
    assert!(!admissible(&fam.particular));
    let fam = stieltjes_family(&example).unwrap();
    assert!(fam.contains(&Polynomial::from_ints(&[-2, 4, 0, -2, 1])));
}

#[test]
fn orbit_of_i_contains_translates() {
    let i = BigComplex::i(128);
    let imgs = orbit_images(&i, false, 0.1);
    let one = BigComplex::one(128);
    assert!(imgs.iter().any(|z| z.dist(&(&i + &one)).to_f64() < 1e-30));
    // i is fixed by τ ↦ −1/τ, so no duplicate appears.
    assert_eq!(imgs.iter().filter(|z| z.dist(&i).to_f64() < 1e-30).count(), 1);
}

#[test]
fn cusp_counts() {
    assert_eq!([2, 3, 4, 5].map(|m| nu_inf(m).unwrap()), [3, 4, 6, 12]);
    let d = enumerate_ab(4, 1).unwrap();
    assert_eq!(d.discarded, vec![(-1, 2)]);
}

proptest! {
    #[test]
    fn enumeration_is_consistent(m in 2u32..6, n in 1u32..40) {
        prop_assume!((2..=m).all(|p| m % p != 0 || n % p != 0));
        let data = enumerate_ab(m, n).unwrap();
        prop_assert!(enumerate_report(&data).pass);
        for (a, b) in &data.pairs {
            prop_assert!(*a >= 0 && *b >= 0);
        }
    }

    #[test]
    fn required_precision_is_monotone(h in 0.5f64..3.0, order in 10u32..60) {
        let tol = Float::with_val(128, 1e-25);
        prop_assert!(required_precision(h, order, &tol) <= required_precision(h + 0.5, order, &tol));
        prop_assert!(required_precision(h, order, &tol) <= required_precision(h, order + 5, &tol));
    }
}
