//! q-expansions of the classical forms and compilation of form expressions.
//!
//! All atoms are built exactly over the rationals on the 1/48 grid and cached;
//! complex-valued compilation promotes the cached series.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, OnceLock, RwLock};

use rug::ops::Pow;
use rug::Rational;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::report::VerificationReport;
use crate::scalar::{BigComplex, Scalar};
use crate::series::{Series, DEFAULT_GRID};

const GRID: i64 = DEFAULT_GRID;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum FormAtom {
    E2,
    E4,
    E6,
    Eta,
    Delta,
    J,
    Lambda,
    Theta2,
    Theta3,
    Theta4,
    /// Level-2 Hauptmodul `t = 1/λ`.
    T,
    /// `D t` with `D = q·d/dq`.
    DT,
}

impl FormAtom {
    pub const ALL: [FormAtom; 12] = [
        FormAtom::E2,
        FormAtom::E4,
        FormAtom::E6,
        FormAtom::Eta,
        FormAtom::Delta,
        FormAtom::J,
        FormAtom::Lambda,
        FormAtom::Theta2,
        FormAtom::Theta3,
        FormAtom::Theta4,
        FormAtom::T,
        FormAtom::DT,
    ];

    /// Exponent of the leading q-power.
    pub fn leading_exponent(self) -> Rational {
        match self {
            FormAtom::E2 | FormAtom::E4 | FormAtom::E6 | FormAtom::Theta3 | FormAtom::Theta4 => Rational::new(),
            FormAtom::Eta => Rational::from((1, 24)),
            FormAtom::Delta => Rational::from(1),
            FormAtom::J => Rational::from(-1),
            FormAtom::Lambda => Rational::from((1, 2)),
            FormAtom::Theta2 => Rational::from((1, 8)),
            FormAtom::T | FormAtom::DT => Rational::from((-1, 2)),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FormAtom::E2 => "E2",
            FormAtom::E4 => "E4",
            FormAtom::E6 => "E6",
            FormAtom::Eta => "eta",
            FormAtom::Delta => "Delta",
            FormAtom::J => "J",
            FormAtom::Lambda => "lambda",
            FormAtom::Theta2 => "theta2",
            FormAtom::Theta3 => "theta3",
            FormAtom::Theta4 => "theta4",
            FormAtom::T => "t",
            FormAtom::DT => "Dt",
        }
    }
}

impl fmt::Display for FormAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Symbolic product of atoms, powers and polynomials in an atom.
#[derive(Clone, Debug, PartialEq)]
pub enum FormExpr<S: Scalar> {
    Atom(FormAtom),
    Pow(Box<FormExpr<S>>, i64),
    Product(Vec<FormExpr<S>>),
    /// Polynomial in an atom, coefficients in ascending degree.
    PolyInAtom(FormAtom, Vec<S>),
}

impl<S: Scalar> FormExpr<S> {
    pub fn atom(a: FormAtom) -> Self {
        FormExpr::Atom(a)
    }

    pub fn pow(self, m: i64) -> Self {
        FormExpr::Pow(Box::new(self), m)
    }

    pub fn product(parts: Vec<FormExpr<S>>) -> Self {
        FormExpr::Product(parts)
    }

    /// `atom − root`.
    pub fn shifted(a: FormAtom, root: S) -> Self {
        let ctx = root.ctx();
        FormExpr::PolyInAtom(a, vec![root.neg(), S::one(ctx)])
    }

    pub fn constant(c: S) -> Self {
        FormExpr::PolyInAtom(FormAtom::E4, vec![c])
    }

    /// Leading exponent implied by the atom table, when it is determined
    /// without compiling (polynomials in weight-0 atoms may cancel).
    pub fn predicted_leading_exponent(&self) -> Option<Rational> {
        match self {
            FormExpr::Atom(a) => Some(a.leading_exponent()),
            FormExpr::Pow(e, m) => e.predicted_leading_exponent().map(|x| x * Rational::from(*m)),
            FormExpr::Product(v) => v.iter().try_fold(Rational::new(), |acc, e| e.predicted_leading_exponent().map(|x| acc + x)),
            FormExpr::PolyInAtom(a, cs) => {
                let lead = a.leading_exponent();
                let nonzero: Vec<usize> = cs.iter().enumerate().filter(|(_, c)| !c.is_zero()).map(|(k, _)| k).collect();
                let (&lo, &hi) = (nonzero.first()?, nonzero.last()?);
                match lead.cmp0() {
                    std::cmp::Ordering::Less => Some(lead * Rational::from(hi)),
                    std::cmp::Ordering::Greater => Some(lead * Rational::from(lo)),
                    std::cmp::Ordering::Equal => (hi == 0).then(Rational::new),
                }
            }
        }
    }

    /// Atoms referenced anywhere in the tree.
    pub fn atoms(&self) -> Vec<FormAtom> {
        let mut out = Vec::new();
        self.collect_atoms(&mut out);
        out.sort();
        out.dedup();
        out
    }

    fn collect_atoms(&self, out: &mut Vec<FormAtom>) {
        match self {
            FormExpr::Atom(a) | FormExpr::PolyInAtom(a, _) => out.push(*a),
            FormExpr::Pow(e, _) => e.collect_atoms(out),
            FormExpr::Product(v) => v.iter().for_each(|e| e.collect_atoms(out)),
        }
    }

    pub fn map_scalars<T: Scalar>(&self, f: &impl Fn(&S) -> T) -> FormExpr<T> {
        match self {
            FormExpr::Atom(a) => FormExpr::Atom(*a),
            FormExpr::Pow(e, m) => FormExpr::Pow(Box::new(e.map_scalars(f)), *m),
            FormExpr::Product(v) => FormExpr::Product(v.iter().map(|e| e.map_scalars(f)).collect()),
            FormExpr::PolyInAtom(a, cs) => FormExpr::PolyInAtom(*a, cs.iter().map(f).collect()),
        }
    }

    pub fn to_complex(&self, prec: u32) -> FormExpr<BigComplex> {
        self.map_scalars(&|c| c.to_complex(prec))
    }
}

impl<S: Scalar> fmt::Display for FormExpr<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FormExpr::Atom(a) => write!(f, "{}", a),
            FormExpr::Pow(e, m) => write!(f, "({})^{}", e, m),
            FormExpr::Product(v) => {
                if v.is_empty() {
                    return write!(f, "1");
                }
                for (i, e) in v.iter().enumerate() {
                    if i > 0 {
                        write!(f, "·")?;
                    }
                    write!(f, "{}", e)?;
                }
                Ok(())
            }
            FormExpr::PolyInAtom(a, cs) => write!(f, "poly_{}[{} coeffs]", a, cs.len()),
        }
    }
}

fn divisor_sum(n: u64, k: u32) -> rug::Integer {
    let mut s = rug::Integer::new();
    let mut d = 1;
    while d * d <= n {
        if n % d == 0 {
            s += rug::Integer::from(d).pow(k);
            let e = n / d;
            if e != d {
                s += rug::Integer::from(e).pow(k);
            }
        }
        d += 1;
    }
    s
}

fn trunc_for(order: u32) -> i64 {
    order as i64 * GRID
}

/// Eisenstein series E2, E4, E6 normalized with constant term 1.
pub fn eisenstein(k: u32, order: u32) -> Result<Series<Rational>> {
    let (c, p) = match k {
        2 => (-24, 1),
        4 => (240, 3),
        6 => (-504, 5),
        _ => return Err(Error::UnsupportedWeight(k)),
    };
    if order == 0 {
        return Err(Error::InvalidArgument("order must be at least 1".into()));
    }
    let terms = (0..order as u64).map(|n| {
        let v = if n == 0 { rug::Integer::from(1) } else { divisor_sum(n, p) * c };
        (n as i64 * GRID, Rational::from(v))
    });
    Ok(Series::from_terms(GRID, terms, trunc_for(order), ()))
}

/// Dedekind η via Euler's pentagonal-number theorem.
pub fn eta(order: u32) -> Series<Rational> {
    let t = trunc_for(order);
    let mut terms = Vec::new();
    // q^{1/24}·Σ (−1)^k q^{k(3k−1)/2}, numerators 2 + 24k(3k−1) on the 1/48 grid
    let mut k: i64 = 0;
    loop {
        let mut any = false;
        for kk in if k == 0 { vec![0] } else { vec![k, -k] } {
            let e = 2 + 24 * kk * (3 * kk - 1);
            if e < t {
                any = true;
                let sign = if kk.rem_euclid(2) == 0 { 1 } else { -1 };
                terms.push((e, Rational::from(sign)));
            }
        }
        if !any {
            break;
        }
        k += 1;
    }
    Series::from_terms(GRID, terms, t, ())
}

/// θ2, θ3 or θ4 in the nome `q = e^{2πiτ}`:
/// θ3 = Σ q^{n²/2}, θ4 = Σ (−1)ⁿ q^{n²/2}, θ2 = 2Σ_{n≥0} q^{(2n+1)²/8}.
pub fn theta(which: u32, order: u32) -> Result<Series<Rational>> {
    let t = trunc_for(order);
    let mut terms = Vec::new();
    match which {
        2 => {
            for n in 0i64.. {
                let e = 6 * (2 * n + 1) * (2 * n + 1);
                if e >= t {
                    break;
                }
                terms.push((e, Rational::from(2)));
            }
        }
        3 | 4 => {
            terms.push((0, Rational::from(1)));
            for n in 1i64.. {
                let e = 24 * n * n;
                if e >= t {
                    break;
                }
                let sign = if which == 4 && n % 2 == 1 { -2 } else { 2 };
                terms.push((e, Rational::from(sign)));
            }
        }
        _ => return Err(Error::InvalidArgument(format!("theta index {} not in 2..4", which))),
    }
    Ok(Series::from_terms(GRID, terms, t, ()))
}

/// Δ built as η²⁴ and as (E4³ − E6²)/1728; the two must agree exactly.
pub fn delta(order: u32) -> Series<Rational> {
    let o = Rational::from(order);
    let from_eta = eta(order).pow_int(24).expect("η is nonzero").truncate(&o);
    let e4 = eisenstein(4, order).unwrap();
    let e6 = eisenstein(6, order).unwrap();
    let from_eis = (&e4.pow_int(3).unwrap() - &e6.pow_int(2).unwrap()).mul_rational(&Rational::from((1, 1728))).truncate(&o);
    assert_eq!(from_eta, from_eis, "η²⁴ and (E4³−E6²)/1728 disagree");
    from_eta
}

/// J = E4³/(1728Δ), so that J(i) = 1 and J(ρ) = 0.
pub fn j_invariant(order: u32) -> Series<Rational> {
    let w = order + 2;
    let e4 = eisenstein(4, w).unwrap();
    let d = delta(w).mul_rational(&Rational::from(1728));
    let j = &e4.pow_int(3).unwrap() * &d.reciprocal().unwrap();
    finish(j, order)
}

/// λ = θ2⁴/θ3⁴.
pub fn lambda(order: u32) -> Series<Rational> {
    let w = order + 2;
    let t2 = theta(2, w).unwrap().pow_int(4).unwrap();
    let t3 = theta(3, w).unwrap().pow_int(4).unwrap();
    finish(&t2 * &t3.reciprocal().unwrap(), order)
}

/// Level-2 Hauptmodul t = 1/λ = θ3⁴/θ2⁴, leading term q^{−1/2}/16.
pub fn hauptmodul_t(order: u32) -> Series<Rational> {
    let w = order + 2;
    let t2 = theta(2, w).unwrap().pow_int(4).unwrap();
    let t3 = theta(3, w).unwrap().pow_int(4).unwrap();
    finish(&t3 * &t2.reciprocal().unwrap(), order)
}

fn finish(s: Series<Rational>, order: u32) -> Series<Rational> {
    let o = Rational::from(order);
    assert!(s.trunc() >= o, "internal padding too small");
    s.truncate(&o)
}

fn build_atom(atom: FormAtom, order: u32) -> Series<Rational> {
    match atom {
        FormAtom::E2 => eisenstein(2, order).unwrap(),
        FormAtom::E4 => eisenstein(4, order).unwrap(),
        FormAtom::E6 => eisenstein(6, order).unwrap(),
        FormAtom::Eta => eta(order),
        FormAtom::Delta => delta(order),
        FormAtom::J => j_invariant(order),
        FormAtom::Lambda => lambda(order),
        FormAtom::Theta2 => theta(2, order).unwrap(),
        FormAtom::Theta3 => theta(3, order).unwrap(),
        FormAtom::Theta4 => theta(4, order).unwrap(),
        FormAtom::T => hauptmodul_t(order),
        FormAtom::DT => hauptmodul_t(order).d(),
    }
}

type Cache = RwLock<HashMap<(FormAtom, u32), Arc<Series<Rational>>>>;

fn cache() -> &'static Cache {
    static CACHE: OnceLock<Cache> = OnceLock::new();
    CACHE.get_or_init(|| RwLock::new(HashMap::new()))
}

/// Exact series of an atom to q-order `order`, memoized.
pub fn atom_series(atom: FormAtom, order: u32) -> Arc<Series<Rational>> {
    if let Some(s) = cache().read().unwrap().get(&(atom, order)) {
        return s.clone();
    }
    let s = Arc::new(build_atom(atom, order));
    cache().write().unwrap().entry((atom, order)).or_insert(s).clone()
}

fn compile_at<S: Scalar>(expr: &FormExpr<S>, work: u32, ctx: S::Ctx) -> Result<Series<S>> {
    let exact_trunc = 4 * trunc_for(work);
    Ok(match expr {
        FormExpr::Atom(a) => atom_series(*a, work).promote(ctx),
        FormExpr::Pow(e, m) => compile_at(e, work, ctx)?.pow_int(*m)?,
        FormExpr::Product(v) => {
            let mut acc = Series::constant(S::one(ctx), GRID, exact_trunc);
            for e in v {
                acc = &acc * &compile_at(e, work, ctx)?;
            }
            acc
        }
        FormExpr::PolyInAtom(a, cs) => {
            if cs.len() <= 1 {
                let c = cs.first().cloned().unwrap_or_else(|| S::zero(ctx));
                return Ok(Series::constant(c, GRID, exact_trunc));
            }
            let x = atom_series(*a, work).promote::<S>(ctx);
            let mut acc = Series::constant(cs.last().unwrap().clone(), GRID, exact_trunc);
            for c in cs.iter().rev().skip(1) {
                acc = (&acc * &x).add_scalar(c);
            }
            acc
        }
    })
}

/// Compiles an expression to a series known through q-order `order`.
///
/// Reciprocals of forms with a pole at the cusp shorten the known range, so
/// atoms are rebuilt at a higher working order until the target is met.
pub fn compile<S: Scalar>(expr: &FormExpr<S>, order: u32, ctx: S::Ctx) -> Result<Series<S>> {
    let target = Rational::from(order);
    let mut work = order;
    for _ in 0..16 {
        let s = compile_at(expr, work, ctx)?;
        if s.trunc() >= target {
            return Ok(s.truncate(&target));
        }
        let short = Rational::from(&target - s.trunc()).ceil().numer().to_u32().unwrap_or(1);
        work += short.max(1);
    }
    Err(Error::InvalidArgument(format!("could not reach order {} for {}", order, expr)))
}

fn exact_check(name: &str, lhs: &Series<Rational>, rhs: &Series<Rational>, order: u32, formula: &str) -> VerificationReport {
    let o = Rational::from(order);
    let known = lhs.trunc() >= o && rhs.trunc() >= o;
    let diff = (lhs - rhs).truncate(&o);
    let dev = diff.max_abs_below(&o, 128);
    let mut r = VerificationReport::from_deviation(name, order, dev, None).with_detail("identity", formula);
    if !known {
        r.pass = false;
        r.set_detail("error", "operands not known to the requested order");
    }
    r
}

/// The exact catalog identities, each checked through q-order `order`.
pub fn identity_reports(order: u32) -> Vec<VerificationReport> {
    let w = order + 4;
    let get = |a| (*atom_series(a, w)).clone();
    let (e2, e4, e6, eta_s, dl, j) = (get(FormAtom::E2), get(FormAtom::E4), get(FormAtom::E6), get(FormAtom::Eta), get(FormAtom::Delta), get(FormAtom::J));
    let (lam, th2, th3, th4) = (get(FormAtom::Lambda), get(FormAtom::Theta2), get(FormAtom::Theta3), get(FormAtom::Theta4));
    let one = Series::constant(Rational::from(1), GRID, 4 * trunc_for(w));
    let dj = j.d();
    let d2j = dj.d();
    let jm1 = &j - &one;
    let inv = |s: &Series<Rational>| s.reciprocal().expect("nonzero");
    let r = |n: i64, d: i64| Rational::from((n, d));

    let mut out = Vec::new();
    let lhs = dl.mul_rational(&r(1728, 1));
    let rhs = &e4.pow_int(3).unwrap() - &e6.pow_int(2).unwrap();
    out.push(exact_check("identity (a)", &lhs, &rhs, order, "1728·Δ = E4³ − E6²"));

    let rhs = &dj.pow_int(2).unwrap() * &inv(&(&j * &jm1));
    out.push(exact_check("identity (b)", &e4, &rhs, order, "E4 = (DJ)²/(J(J−1))"));

    // DJ = −E6·J/E4, so the cube carries a minus sign.
    let cube = &dj.pow_int(3).unwrap() * &inv(&(&j.pow_int(2).unwrap() * &jm1));
    out.push(exact_check("identity (c)", &e6, &-&cube, order, "E6 = −(DJ)³/(J²(J−1))"));

    let rhs = (&dj.pow_int(6).unwrap() * &inv(&(&j.pow_int(4).unwrap() * &jm1.pow_int(3).unwrap()))).mul_rational(&r(1, 1728));
    out.push(exact_check("identity (d)", &dl, &rhs, order, "Δ = (DJ)⁶/(1728·J⁴(J−1)³)"));

    let lhs = (&eta_s.d() * &inv(&eta_s)).mul_rational(&r(24, 1));
    let rhs = &(&(&d2j * &inv(&dj)).mul_rational(&r(6, 1)) - &(&dj * &inv(&j)).mul_rational(&r(4, 1))) - &(&dj * &inv(&jm1)).mul_rational(&r(3, 1));
    out.push(exact_check("identity (e)", &lhs, &rhs, order, "24·Dη/η = 6·D²J/DJ − 4·DJ/J − 3·DJ/(J−1)"));

    let lhs = &e4.d() * &inv(&e4);
    let rhs = &(&(&d2j * &inv(&dj)).mul_rational(&r(2, 1)) - &(&dj * &inv(&j))) - &(&dj * &inv(&jm1));
    out.push(exact_check("identity (f)", &lhs, &rhs, order, "DE4/E4 = 2·D²J/DJ − DJ/J − DJ/(J−1)"));

    let rhs = (&th4.pow_int(4).unwrap() * &lam).mul_rational(&r(1, 2));
    out.push(exact_check("identity (g)", &lam.d(), &rhs, order, "Dλ = ½·θ4⁴·λ"));

    let rhs = &th2.pow_int(4).unwrap() + &th4.pow_int(4).unwrap();
    out.push(exact_check("jacobi quartic", &th3.pow_int(4).unwrap(), &rhs, order, "θ3⁴ = θ2⁴ + θ4⁴"));

    // Ramanujan's DE2 = (E2² − E4)/12, an independent check on E2.
    let rhs = (&e2.pow_int(2).unwrap() - &e4).mul_rational(&r(1, 12));
    out.push(exact_check("ramanujan E2", &e2.d(), &rhs, order, "DE2 = (E2² − E4)/12"));
    out
}

/// The positive-sign display `E6 = (DJ)³/(J²(J−1))`; it fails, and the
/// report records by how much.
pub fn e6_positive_sign_report(order: u32) -> VerificationReport {
    let w = order + 4;
    let j = (*atom_series(FormAtom::J, w)).clone();
    let e6 = (*atom_series(FormAtom::E6, w)).clone();
    let one = Series::constant(Rational::from(1), GRID, 4 * trunc_for(w));
    let dj = j.d();
    let cube = &dj.pow_int(3).unwrap() * &(&j.pow_int(2).unwrap() * &(&j - &one)).reciprocal().unwrap();
    let sum = (&e6 + &cube).truncate(&Rational::from(order));
    exact_check("identity (c), positive sign", &e6, &cube, order, "E6 = (DJ)³/(J²(J−1))")
        .with_detail("E6_plus_cube_vanishes", sum.is_zero())
}

/// Compares the eta-quotient (η(τ/2)/η(2τ))⁸ with λ and with 16(1−λ)/λ.
pub fn eta_quotient_report(order: u32) -> VerificationReport {
    let w = order + 4;
    // η(τ/2) is known only to half the order of η.
    let e = eta(2 * w + 2);
    let half = e.scale_exponents(&Rational::from((1, 2)));
    let double = e.scale_exponents(&Rational::from(2));
    let quotient = (&half * &double.reciprocal().unwrap()).pow_int(8).unwrap();
    let lam = lambda(w);
    let one = Series::constant(Rational::from(1), GRID, 4 * trunc_for(w));
    let candidate = (&(&one - &lam) * &lam.reciprocal().unwrap()).mul_rational(&Rational::from(16));
    let o = Rational::from(order);
    let matches_candidate = quotient.trunc() >= o && (&quotient - &candidate).is_zero_below(&o);
    let matches_lambda = (&quotient - &lam).is_zero_below(&o);
    let (qe, qc) = quotient.leading().unwrap();
    let (le, lc) = lam.leading().unwrap();
    VerificationReport::new("eta quotient vs lambda", order, matches_candidate)
        .with_detail("equals_lambda", matches_lambda)
        .with_detail("equals_16(1-lambda)/lambda", matches_candidate)
        .with_detail("eta_quotient_leading", format!("{}·q^({})", qc, qe))
        .with_detail("lambda_leading", format!("{}·q^({})", lc, le))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> Rational {
        Rational::from((n, d))
    }

    // Truncated product q^{1/24} ∏ (1 − qⁿ), computed directly.
    fn eta_by_product(order: u32) -> Series<Rational> {
        let t = order as i64 * GRID;
        let mut acc = Series::monomial(Rational::from(1), 2, GRID, t + 2);
        for n in 1..order as i64 {
            let f = Series::from_terms(GRID, [(0, Rational::from(1)), (n * GRID, Rational::from(-1))], t, ());
            acc = &acc * &f;
        }
        acc.truncate(&Rational::from(order))
    }

    #[test]
    fn eisenstein_coefficients() {
        let e4 = eisenstein(4, 10).unwrap();
        let expect = [1, 240, 2160, 6720];
        for (n, c) in expect.iter().enumerate() {
            assert_eq!(e4.coeff(&r(n as i64, 1)).unwrap(), *c);
        }
        assert_eq!(eisenstein(2, 5).unwrap().coeff(&r(1, 1)).unwrap(), -24);
        assert_eq!(eisenstein(6, 5).unwrap().coeff(&r(1, 1)).unwrap(), -504);
        assert_eq!(eisenstein(8, 5).unwrap_err(), Error::UnsupportedWeight(8));
        let sum = &eisenstein(4, 5).unwrap() + &eisenstein(6, 5).unwrap();
        assert_eq!(sum.coeff(&r(0, 1)).unwrap(), 2);
    }

    #[test]
    fn eta_matches_product() {
        let e = eta(30);
        assert_eq!(e, eta_by_product(30));
        assert_eq!(e.leading().unwrap(), (r(1, 24), Rational::from(1)));
        assert_eq!(e.coeff(&r(25, 24)).unwrap(), -1);
    }

    #[test]
    fn delta_and_j() {
        let d = delta(10);
        assert_eq!(d.leading().unwrap(), (r(1, 1), Rational::from(1)));
        assert_eq!(d.coeff(&r(2, 1)).unwrap(), -24);
        let dd = d.d();
        let log = &dd * &d.reciprocal().unwrap();
        assert_eq!(log.coeff(&r(0, 1)).unwrap(), 1);
        let j = j_invariant(10);
        assert_eq!(j.leading().unwrap(), (r(-1, 1), r(1, 1728)));
        assert_eq!(j.coeff(&r(0, 1)).unwrap(), r(744, 1728));
        assert_eq!(j.coeff(&r(1, 1)).unwrap(), r(196884, 1728));
        assert!(j.trunc() >= 10);
    }

    #[test]
    fn level_two_atoms() {
        let lam = lambda(10);
        assert_eq!(lam.leading().unwrap(), (r(1, 2), Rational::from(16)));
        assert_eq!(lam.coeff(&r(1, 1)).unwrap(), -128);
        let t = hauptmodul_t(10);
        assert_eq!(t.leading().unwrap(), (r(-1, 2), r(1, 16)));
        let one = &lam * &t;
        assert_eq!(one.truncate(&Rational::from(9)), Series::constant(Rational::from(1), GRID, 9 * GRID));
    }

    #[test]
    fn compile_leading_exponents() {
        let eta4: FormExpr<Rational> = FormExpr::product(vec![FormExpr::atom(FormAtom::Eta).pow(4)]);
        let s = compile(&eta4, 10, ()).unwrap();
        assert_eq!(s, eta(10).pow_int(4).unwrap().truncate(&Rational::from(10)));
        let f7: FormExpr<Rational> = FormExpr::product(vec![FormExpr::atom(FormAtom::Eta).pow(28), FormExpr::atom(FormAtom::E6).pow(-2)]);
        assert_eq!(compile(&f7, 10, ()).unwrap().leading().unwrap().0, r(7, 6));
        assert_eq!(f7.predicted_leading_exponent(), Some(r(7, 6)));
        let f5: FormExpr<Rational> = FormExpr::product(vec![FormExpr::atom(FormAtom::Eta).pow(20), FormExpr::atom(FormAtom::E4).pow(-2)]);
        assert_eq!(compile(&f5, 10, ()).unwrap().leading().unwrap().0, r(5, 6));
        let f1: FormExpr<Rational> = FormExpr::product(vec![FormExpr::atom(FormAtom::Eta).pow(4), FormExpr::shifted(FormAtom::J, r(4, 7)).pow(-2)]);
        let s = compile(&f1, 12, ()).unwrap();
        assert_eq!(s.leading().unwrap().0, r(13, 6));
        assert_eq!(f1.predicted_leading_exponent(), Some(r(13, 6)));
        assert!(s.trunc() >= 12);
    }

    #[test]
    fn eta_quotient_is_not_lambda() {
        let rep = eta_quotient_report(20);
        assert!(rep.pass);
        assert_eq!(rep.details["equals_lambda"], false);
    }

    #[test]
    fn positive_sign_e6_display_fails() {
        let rep = e6_positive_sign_report(10);
        assert!(!rep.pass);
        assert_eq!(rep.details["E6_plus_cube_vanishes"], true);
    }

    #[test]
    fn identities_hold_at_low_order() {
        for rep in identity_reports(12) {
            assert!(rep.pass, "{:?}", rep);
        }
    }

    #[test]
    fn cache_is_shared_across_threads() {
        let handles: Vec<_> = (0..4).map(|_| std::thread::spawn(|| atom_series(FormAtom::J, 15))).collect();
        let first = atom_series(FormAtom::J, 15);
        for h in handles {
            assert_eq!(*h.join().unwrap(), *first);
        }
    }
}
