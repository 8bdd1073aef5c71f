//! Solver output against frozen 60-digit roots and an independent Stieltjes
//! polynomial built here from its coefficient recurrence.

use modeq_core::solver::{admissible, certification_tolerance, residual, scale_equivalence_check, solve, solve_complex_multistart, solve_positive, stieltjes_family, to_polynomial};
use modeq_core::{AlgebraicSystem, BigComplex, Float, Polynomial, Rational};
use proptest::prelude::*;

const P: u32 = 256;

fn sys(a: i64, b: i64, c: i64, n: usize) -> AlgebraicSystem {
    AlgebraicSystem::from_ints(a, b, c, n).unwrap()
}

fn re(z: &BigComplex) -> f64 {
    z.re().to_f64()
}

fn assert_points(s: &AlgebraicSystem, want: &[&str]) {
    let sol = solve_positive(s, P).unwrap();
    for (p, w) in sol.points.iter().zip(want) {
        let w = BigComplex::parse(w, "0", P).unwrap();
        assert!(p.dist(&w).to_f64() < 1e-55, "{} vs {:?}", s, w.to_f64_pair());
    }
}

#[test]
fn two_point_systems_match_frozen_roots() {
    assert_points(
        &sys(4, 3, 12, 2),
        &["0.187103480718163372391483614386565764680805350835833748739994", "0.865528098229205048661147964560802656371826228111534672312638"],
    );
    assert_points(
        &sys(4, 9, 12, 2),
        &["0.124701119355325880911348506282550589949241857353740319775347", "0.675298880644674119088651493717449410050758142646259680224653"],
    );
}

#[test]
fn closed_forms() {
    for (a, b, want) in [(4, 3, (4, 7)), (4, 9, (4, 13)), (8, 3, (8, 11)), (8, 9, (8, 17))] {
        let out = solve(&sys(a, b, 12, 1), 8, 0, P).unwrap();
        assert_eq!(out[0].exact.as_ref().unwrap()[0], Rational::from(want));
    }
}

#[test]
fn residual_at_half_is_two() {
    let x = [BigComplex::from_f64(0.5, 0.0, P)];
    let f = residual(&sys(4, 3, 12, 1), &x).unwrap();
    assert!(f[0].dist(&BigComplex::from_f64(2.0, 0.0, P)).to_f64() < 1e-70);
}

// Monic P with c·x(x−1)P'' + 2((a+b)x − a)P' = κ_n P, solved top-down.
fn stieltjes_oracle(a: i64, b: i64, c: i64, n: usize) -> Polynomial {
    let kappa = |k: i64| Rational::from(c * k * (k - 1) + 2 * (a + b) * k);
    let kn = kappa(n as i64);
    let mut p = vec![Rational::new(); n + 1];
    p[n] = Rational::from(1);
    for k in (0..n).rev() {
        let kk = k as i64;
        p[k] = Rational::from((kk + 1) * (c * kk + 2 * a)) * &p[k + 1] / (kappa(kk) - &kn);
    }
    Polynomial::new(p)
}

#[test]
fn positive_systems_are_stieltjes_zeros() {
    for (a, b, c) in [(1, 1, 1), (4, 3, 12), (8, 9, 12), (2, 5, 3)] {
        for n in 1..=6 {
            let s = sys(a, b, c, n);
            let sol = solve_positive(&s, P).unwrap();
            assert!(sol.residual_norm <= certification_tolerance(P));
            let xs: Vec<f64> = sol.points.iter().map(re).collect();
            assert!(xs[0] > 0.0 && xs[n - 1] < 1.0 && xs.windows(2).all(|w| w[0] < w[1]));
            let oracle = stieltjes_oracle(a, b, c, n);
            let got = to_polynomial(&sol);
            for k in 0..=n {
                let want = oracle.coeff(n - k);
                let g = Float::with_val(P, got[k].re()) - Float::with_val(P, &want);
                assert!(g.abs().to_f64() < 1e-50, "{} coefficient {}", s, k);
            }
            assert!(stieltjes_family(&s).unwrap().contains(&oracle));
        }
    }
}

#[test]
fn quartic_belongs_to_example_family() {
    // x⁴ − 2x³ + 4x − 2, ascending
    let quartic = Polynomial::from_ints(&[-2, 4, 0, -2, 1]);
    assert!(admissible(&quartic));
    let fam = stieltjes_family(&sys(1, 1, -1, 4)).unwrap();
    assert_eq!(fam.dimension(), 1);
    assert!(fam.contains(&quartic));
}

#[test]
fn multistart_solutions_certify() {
    let s = sys(1, 1, -1, 4);
    let sols = solve_complex_multistart(&s, 8, 1, P).unwrap();
    assert!(!sols.is_empty());
    let fam = stieltjes_family(&s).unwrap();
    for sol in &sols {
        assert!(sol.residual_norm <= certification_tolerance(P));
        // Each member is x⁴ − 2x³ + s(x − ½) for some s.
        let c = to_polynomial(sol);
        assert!(c[1].dist(&BigComplex::from_f64(-2.0, 0.0, P)).to_f64() < 1e-25);
        assert!(c[2].abs().to_f64() < 1e-25);
        let half = c[3].scale_rational(&Rational::from((-1, 2)));
        assert!(c[4].dist(&half).to_f64() < 1e-25);
        assert_eq!(fam.dimension(), 1);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn scaling_preserves_solutions(a in 1i64..9, b in 1i64..9, c in 1i64..9, n in 1usize..4, num in 1i64..7, den in 1i64..5) {
        let sol = solve_positive(&sys(a, b, c, n), P).unwrap();
        let rep = scale_equivalence_check(&sol, &Rational::from((num, den))).unwrap();
        prop_assert!(rep.pass);
    }

    #[test]
    fn two_point_symmetry(a in 1i64..9, c in 1i64..9) {
        // With a = b the configuration is symmetric about ½.
        let sol = solve_positive(&sys(a, a, c, 2), P).unwrap();
        let s = re(&sol.points[0]) + re(&sol.points[1]);
        prop_assert!((s - 1.0).abs() < 1e-14);
    }
}
