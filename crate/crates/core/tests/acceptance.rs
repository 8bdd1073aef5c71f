//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit when any
//! criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use modeq_core::catalog::identity_reports;
use modeq_core::constructions::{
    class_form, class_r, class_residue_reports, class_schwarz_report, enumerate_ab, enumerate_report, level2_example_functions, level2_example_hprime,
    level2_schwarz_check, mde_check, moebius_relation_check, ode_solution, ratfunc_derivative_check, schwarz_check, verify_level2, Level2Variant,
    ResidueClassSpec, RunSettings, CLASSES,
};
use modeq_core::eval::special_value_report;
use modeq_core::solver::{certification_tolerance, solve, solve_positive, to_polynomial};
use modeq_core::{AlgebraicSystem, BigComplex, EvalConfig, FormAtom, FormExpr, Float, Rational, VerificationReport};

const PREC: u32 = 256;

struct Outcome {
    pass: bool,
    notes: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Outcome { pass: true, notes: Vec::new() }
    }

    fn require(&mut self, ok: bool, what: impl Into<String>) {
        if !ok {
            self.pass = false;
            self.notes.push(format!("FAILED {}", what.into()));
        }
    }

    fn report(&mut self, rep: &VerificationReport) {
        self.require(rep.pass, format!("{} (deviation {:e})", rep.check, rep.deviation_f64()));
    }

    fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }
}

fn q(n: i64, d: i64) -> Rational {
    Rational::from((n, d))
}

fn settings() -> RunSettings {
    RunSettings { prec: PREC, order: 40, tol: Float::with_val(PREC, 1e-25), seed: 0, tries: 32 }
}

fn criterion_1() -> Outcome {
    let mut o = Outcome::new();
    let start = Instant::now();
    let cfg = EvalConfig::new(PREC, 60);
    match special_value_report(&cfg, &Float::with_val(PREC, 1e-25)) {
        Ok(rep) => {
            o.report(&rep);
            o.note(format!("max deviation {:e}", rep.deviation_f64()));
        }
        Err(e) => o.require(false, e.to_string()),
    }
    let secs = start.elapsed().as_secs_f64();
    o.require(secs < 10.0, format!("runtime {:.2}s >= 10s", secs));
    o.note(format!("{:.2}s", secs));
    o
}

fn criterion_2() -> Outcome {
    let mut o = Outcome::new();
    for rep in identity_reports(40).iter().filter(|r| r.check.starts_with("identity (")) {
        o.report(rep);
    }
    o
}

fn criterion_3() -> Outcome {
    let mut o = Outcome::new();
    for (a, b, want) in [(4, 3, (4, 7)), (4, 9, (4, 13)), (8, 3, (8, 11)), (8, 9, (8, 17))] {
        let sys = AlgebraicSystem::from_ints(a, b, 12, 1).unwrap();
        let got = solve(&sys, 32, 0, PREC).ok().and_then(|s| s[0].exact.clone());
        o.require(got.as_deref() == Some(&[q(want.0, want.1)][..]), format!("{} closed form", sys));
    }

    // The worked quartic system, E^4_{1,1,-1} in the orientation used here.
    let sys = AlgebraicSystem::from_ints(1, 1, -1, 4).unwrap();
    let quartic: Vec<BigComplex> = [1, -2, 0, 4, -2].iter().map(|&c| BigComplex::from_f64(c as f64, 0.0, PREC)).collect();
    match solve(&sys, 32, 0, PREC) {
        Ok(sols) => {
            let best = sols
                .iter()
                .map(|s| to_polynomial(s).iter().zip(&quartic).map(|(x, y)| x.dist(y).to_f64()).fold(0.0, f64::max))
                .fold(f64::INFINITY, f64::min);
            o.note(format!("{}: {} solutions, closest coefficient distance to the quartic {:e}", sys, sols.len(), best));
            o.require(best <= 1e-20, "quartic coefficients (1, -2, 0, 4, -2) within 1e-20");
        }
        Err(e) => o.require(false, format!("{}: {}", sys, e)),
    }

    let tol = certification_tolerance(PREC);
    for (a, b, c) in [(1, 1, 1), (4, 3, 12), (4, 9, 12), (8, 3, 12), (8, 9, 12), (3, 7, 2)] {
        for n in 1..=6 {
            let sys = AlgebraicSystem::from_ints(a, b, c, n).unwrap();
            match solve_positive(&sys, PREC) {
                Ok(sol) => {
                    let xs: Vec<f64> = sol.points.iter().map(|p| p.re().to_f64()).collect();
                    let ordered = xs.first().map(|x| *x > 0.0).unwrap_or(false)
                        && xs.last().map(|x| *x < 1.0).unwrap_or(false)
                        && xs.windows(2).all(|w| w[0] < w[1]);
                    o.require(sol.residual_norm <= tol && ordered, format!("{} residual/ordering", sys));
                }
                Err(e) => o.require(false, format!("{}: {}", sys, e)),
            }
        }
    }
    o
}

fn criterion_4() -> Outcome {
    let mut o = Outcome::new();
    let tol = Float::with_val(PREC, 1e-25);
    for &alpha in &CLASSES {
        for n in 0..=2 {
            let rep = ResidueClassSpec::solve(alpha, n, PREC).and_then(|s| class_schwarz_report(&s, 40, &tol));
            match rep {
                Ok(rep) => {
                    o.report(&rep);
                    if n < 2 {
                        o.require(rep.deviation_f64() == 0.0, format!("{} exact", rep.check));
                    }
                }
                Err(e) => o.require(false, format!("class {} n={}: {}", alpha, n, e)),
            }
        }
    }
    let wrong = class_form(1, &[q(1, 2)]).and_then(|f| schwarz_check(&f, &class_r(1, 1), 40, (), None));
    match wrong {
        Ok(rep) => {
            o.require(!rep.pass && rep.deviation_f64() >= 1e-6, "negative control x = 1/2 must fail by >= 1e-6");
            o.note(format!("negative control deviation {:e}", rep.deviation_f64()));
        }
        Err(e) => o.require(false, e.to_string()),
    }
    o
}

fn criterion_5() -> Outcome {
    let mut o = Outcome::new();
    for (roots, r) in [(vec![], q(1, 6)), (vec![q(4, 7)], q(13, 6))] {
        match mde_check(&ode_solution(&roots), &r, 40, (), None) {
            Ok(rep) => o.report(&rep),
            Err(e) => o.require(false, e.to_string()),
        }
    }
    o
}

fn criterion_6(level2: &[(Level2Variant, Vec<VerificationReport>)]) -> Outcome {
    let mut o = Outcome::new();
    let cfg = EvalConfig::new(PREC, 40);
    let mut count = 0;
    for &alpha in &CLASSES {
        for n in 0..=2 {
            match ResidueClassSpec::solve(alpha, n, PREC).and_then(|s| class_residue_reports(&s, &cfg)) {
                Ok(reps) => {
                    for rep in &reps {
                        o.report(rep);
                        count += 1;
                    }
                }
                Err(e) => o.require(false, format!("class {} n={}: {}", alpha, n, e)),
            }
        }
    }
    for (v, reps) in level2 {
        let res: Vec<&VerificationReport> = reps.iter().filter(|r| r.check.starts_with("residue")).collect();
        o.require(!res.is_empty(), format!("{} has residue reports", v.name()));
        for rep in res {
            o.report(rep);
            count += 1;
        }
    }
    o.note(format!("{} poles", count));
    o
}

fn criterion_7(level2: &[(Level2Variant, Vec<VerificationReport>)]) -> Outcome {
    let mut o = Outcome::new();
    if let Some(g) = identity_reports(40).iter().find(|r| r.check == "identity (g)") {
        o.report(g);
    } else {
        o.require(false, "identity (g) missing");
    }
    match schwarz_check::<Rational>(&FormExpr::atom(FormAtom::DT), &q(1, 2), 40, (), None) {
        Ok(rep) => o.report(&rep),
        Err(e) => o.require(false, e.to_string()),
    }
    for (name, h, d) in level2_example_functions() {
        o.report(&ratfunc_derivative_check(name, &h, &d));
    }
    o.report(&moebius_relation_check());
    for v in Level2Variant::ALL {
        match level2_schwarz_check(&level2_example_hprime(v), &q(3, 2), 40, (), None) {
            Ok(rep) => o.require(rep.pass, format!("example h' {} schwarz", v.name())),
            Err(e) => o.require(false, e.to_string()),
        }
    }
    for (v, reps) in level2 {
        let s = reps.iter().find(|r| r.check.starts_with("level-2 schwarz"));
        o.require(s.map(|r| r.pass).unwrap_or(false), format!("solver-built h' {} schwarz", v.name()));
    }
    o
}

// Cusps of Γ(m): primitive vectors of (Z/m)², up to sign when m > 2.
fn cusps_by_count(m: i64) -> i64 {
    let gcd = |mut a: i64, mut b: i64| {
        while b != 0 {
            (a, b) = (b, a % b);
        }
        a
    };
    let prim = (0..m).flat_map(|c| (0..m).map(move |d| (c, d))).filter(|&(c, d)| gcd(gcd(c, d), m) == 1).count() as i64;
    if m > 2 {
        prim / 2
    } else {
        prim
    }
}

fn criterion_8() -> Outcome {
    let mut o = Outcome::new();
    for m in 2..=5i64 {
        let nu = cusps_by_count(m);
        for n in (1..=9i64).filter(|n| (1..=m).all(|p| p == 1 || m % p != 0 || n % p != 0)) {
            let listed: Vec<(i64, i64)> = match m {
                2 => vec![((3 * n - 1) / 2, 0), ((n - 1) / 2, 1)],
                3 => vec![(2 * n - 1, 0), (n - 1, 1)],
                4 => vec![(3 * n - 2, 0), (2 * n - 2, 1), (n - 2, 2)],
                _ => (0..=5).map(|k| (n * (6 - k) - 5, k)).collect(),
            };
            let want: Vec<(i64, i64)> = listed.into_iter().filter(|(a, _)| *a >= 0).collect();
            match enumerate_ab(m as u32, n as u32) {
                Ok(data) => {
                    o.require(data.nu_inf as i64 == nu, format!("nu_inf({}) = {} vs {}", m, data.nu_inf, nu));
                    o.require(data.pairs == want, format!("m={} n={} pairs {:?} vs {:?}", m, n, data.pairs, want));
                    for (a, b) in &data.pairs {
                        let d = a + n * b;
                        o.require(2 * d - 2 == (n - 1) * nu, format!("m={} n={} ({}, {}) Riemann-Hurwitz", m, n, a, b));
                    }
                    o.report(&enumerate_report(&data));
                }
                Err(e) => o.require(false, format!("m={} n={}: {}", m, n, e)),
            }
        }
    }
    o
}

fn criterion_9(level2: &[(Level2Variant, Vec<VerificationReport>)]) -> Outcome {
    let mut o = Outcome::new();
    let rep = level2.iter().find(|(v, _)| *v == Level2Variant::Case1).and_then(|(_, reps)| reps.iter().find(|r| r.check == "case1 sign resolution"));
    match rep {
        Some(rep) => {
            o.report(rep);
            o.note(format!("retained {}", rep.details.get("retained").map(|v| v.to_string()).unwrap_or_default()));
        }
        None => o.require(false, "no case-1 resolution report"),
    }
    o
}

fn main() -> ExitCode {
    let start = Instant::now();
    // Criterion 1 runs first so its runtime includes building the series cache.
    let c1 = criterion_1();
    let run = settings();
    let level2: Vec<(Level2Variant, Vec<VerificationReport>)> = Level2Variant::ALL
        .iter()
        .map(|&v| (v, verify_level2(3, v, &run).unwrap_or_else(|e| vec![VerificationReport::new(format!("level2 {}: {}", v.name(), e), 0, false)])))
        .collect();

    let results = [
        ("1 special values", c1),
        ("2 catalog identities", criterion_2()),
        ("3 solver", criterion_3()),
        ("4 schwarzian suite", criterion_4()),
        ("5 ode suite", criterion_5()),
        ("6 residue suite", criterion_6(&level2)),
        ("7 level 2", criterion_7(&level2)),
        ("8 enumeration", criterion_8()),
        ("9 case-1 sign resolution", criterion_9(&level2)),
    ];
    let mut all = true;
    for (name, o) in &results {
        all &= o.pass;
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("{} criterion {}{}", tag, name, if o.notes.is_empty() { String::new() } else { format!(": {}", o.notes.join("; ")) });
    }
    println!("acceptance finished in {:.1}s", start.elapsed().as_secs_f64());
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
