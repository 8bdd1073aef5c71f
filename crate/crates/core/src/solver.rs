//! The residue systems `E^n_{a,b,c}`:
//!
//! `F_i(x) = a/x_i + b/(x_i − 1) + Σ_{j≠i} c/(x_i − x_j) = 0`, `i = 1..n`.
//!
//! A point set solves the system exactly when the monic polynomial P with
//! those roots satisfies `c·x(x−1)P'' + 2((a+b)x − a)P' = κ_n·P` with
//! `κ_k = c·k(k−1) + 2(a+b)k`, which gives an exact description of all
//! solutions with distinct roots ([`stieltjes_family`]).

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rug::{Float, Rational};
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::poly::Polynomial;
use crate::report::VerificationReport;
use crate::scalar::{float_to_decimal, float_to_short, BigComplex, Scalar};

/// `E^n_{a,b,c}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct AlgebraicSystem {
    pub a: Rational,
    pub b: Rational,
    pub c: Rational,
    pub n: usize,
}

impl fmt::Display for AlgebraicSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "E^{}_{{{},{},{}}}", self.n, self.a, self.b, self.c)
    }
}

impl AlgebraicSystem {
    pub fn new(a: Rational, b: Rational, c: Rational, n: usize) -> Result<Self> {
        if a == 0 && b == 0 && c == 0 {
            return Err(Error::InvalidArgument("(a, b, c) = (0, 0, 0)".into()));
        }
        Ok(AlgebraicSystem { a, b, c, n })
    }

    pub fn from_ints(a: i64, b: i64, c: i64, n: usize) -> Result<Self> {
        Self::new(a.into(), b.into(), c.into(), n)
    }

    pub fn is_positive(&self) -> bool {
        self.a > 0 && self.b > 0 && self.c > 0
    }

    /// `E^n_{αa,αb,αc}`.
    pub fn scaled(&self, alpha: &Rational) -> Result<Self> {
        if *alpha == 0 {
            return Err(Error::InvalidArgument("scaling by zero".into()));
        }
        Ok(AlgebraicSystem {
            a: Rational::from(&self.a * alpha),
            b: Rational::from(&self.b * alpha),
            c: Rational::from(&self.c * alpha),
            n: self.n,
        })
    }

    /// The n = 1 closed form `x = a/(a+b)`.
    pub fn closed_form(&self) -> Option<Rational> {
        let s = Rational::from(&self.a + &self.b);
        if self.n != 1 || s == 0 || self.a == 0 {
            return None;
        }
        Some(Rational::from(&self.a / &s))
    }

    fn coeffs(&self, prec: u32) -> (BigComplex, BigComplex, BigComplex) {
        (
            BigComplex::from_rational(&self.a, prec),
            BigComplex::from_rational(&self.b, prec),
            BigComplex::from_rational(&self.c, prec),
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DomainTag {
    RealUnitInterval,
    Complex,
}

/// A certified solution of a system.
#[derive(Clone, Debug)]
pub struct SolutionSet {
    pub system: AlgebraicSystem,
    pub points: Vec<BigComplex>,
    pub residual_norm: Float,
    pub domain: DomainTag,
    /// Exact points, when the solution is known in closed form.
    pub exact: Option<Vec<Rational>>,
}

impl SolutionSet {
    pub fn to_json(&self) -> Value {
        let pts: Vec<Value> = self
            .points
            .iter()
            .map(|p| {
                let (re, im) = p.to_decimal_parts();
                json!({ "re": re, "im": im })
            })
            .collect();
        let mut v = json!({
            "a": self.system.a.to_string(),
            "b": self.system.b.to_string(),
            "c": self.system.c.to_string(),
            "n": self.system.n,
            "points": pts,
            "residual": float_to_decimal(&self.residual_norm),
            "domain": self.domain,
        });
        if let Some(ex) = &self.exact {
            v["exact"] = json!(ex.iter().map(|r| r.to_string()).collect::<Vec<_>>());
        }
        v
    }

    /// Points in canonical (re, im) order.
    pub fn canonical_points(&self) -> Vec<BigComplex> {
        canonical(&self.points)
    }

    /// Same points as an unordered set, within `tol`.
    pub fn same_points(&self, other: &SolutionSet, tol: f64) -> bool {
        same_sets(&self.points, &other.points, tol)
    }

    pub fn prec(&self) -> u32 {
        self.residual_norm.prec()
    }
}

fn canonical(points: &[BigComplex]) -> Vec<BigComplex> {
    let mut v = points.to_vec();
    v.sort_by(|x, y| {
        x.re()
            .partial_cmp(y.re())
            .unwrap()
            .then(x.im().partial_cmp(y.im()).unwrap())
    });
    v
}

fn same_sets(x: &[BigComplex], y: &[BigComplex], tol: f64) -> bool {
    if x.len() != y.len() {
        return false;
    }
    // Greedy matching is enough once both sides are far apart at `tol`.
    let mut used = vec![false; y.len()];
    'outer: for p in x {
        for (k, q) in y.iter().enumerate() {
            if !used[k] && p.dist(q).to_f64() <= tol {
                used[k] = true;
                continue 'outer;
            }
        }
        return false;
    }
    true
}

/// Residual tolerance used to certify a solution at `prec` bits.
pub fn certification_tolerance(prec: u32) -> Float {
    if prec >= 200 {
        Float::with_val(prec, Float::parse("1e-30").unwrap())
    } else {
        Float::with_val(prec, Float::i_exp(1, -(prec as i32 - 40)))
    }
}

fn check_points(x: &[BigComplex]) -> Result<()> {
    for (i, p) in x.iter().enumerate() {
        if p.is_zero() || (p - &BigComplex::one(p.prec())).is_zero() {
            return Err(Error::SingularPoints);
        }
        for q in &x[i + 1..] {
            if (p - q).is_zero() {
                return Err(Error::SingularPoints);
            }
        }
    }
    Ok(())
}

/// `F_i(x)`.
pub fn residual(sys: &AlgebraicSystem, x: &[BigComplex]) -> Result<Vec<BigComplex>> {
    if x.len() != sys.n {
        return Err(Error::InvalidArgument(format!("{} points for {}", x.len(), sys)));
    }
    check_points(x)?;
    let prec = x.first().map(|p| p.prec()).unwrap_or(64);
    let (a, b, c) = sys.coeffs(prec);
    let one = BigComplex::one(prec);
    Ok(x.iter()
        .enumerate()
        .map(|(i, xi)| {
            let mut f = &a.div(xi).unwrap() + &b.div(&(xi - &one)).unwrap();
            for (j, xj) in x.iter().enumerate() {
                if j != i {
                    f = &f + &c.div(&(xi - xj)).unwrap();
                }
            }
            f
        })
        .collect())
}

/// `∂F_i/∂x_j`.
pub fn jacobian(sys: &AlgebraicSystem, x: &[BigComplex]) -> Result<Vec<Vec<BigComplex>>> {
    if x.len() != sys.n {
        return Err(Error::InvalidArgument(format!("{} points for {}", x.len(), sys)));
    }
    check_points(x)?;
    let n = x.len();
    let prec = x.first().map(|p| p.prec()).unwrap_or(64);
    let (a, b, c) = sys.coeffs(prec);
    let one = BigComplex::one(prec);
    let mut m = vec![vec![BigComplex::zero(prec); n]; n];
    for i in 0..n {
        let xi = &x[i];
        let mut diag = -&(&a.div(&(xi * xi)).unwrap() + &b.div(&(&(xi - &one) * &(xi - &one))).unwrap());
        for j in 0..n {
            if j != i {
                let d = &x[i] - &x[j];
                let t = c.div(&(&d * &d)).unwrap();
                diag = &diag - &t;
                m[i][j] = t;
            }
        }
        m[i][i] = diag;
    }
    Ok(m)
}

fn max_norm(v: &[BigComplex], prec: u32) -> Float {
    v.iter().map(|z| z.abs()).fold(Float::new(prec), |m, z| if z > m { z } else { m })
}

/// Gaussian elimination with partial pivoting; `None` when singular.
fn solve_linear(mut m: Vec<Vec<BigComplex>>, mut rhs: Vec<BigComplex>) -> Option<Vec<BigComplex>> {
    let n = rhs.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[i][col].abs().partial_cmp(&m[j][col].abs()).unwrap())?;
        if m[piv][col].is_zero() {
            return None;
        }
        m.swap(col, piv);
        rhs.swap(col, piv);
        let inv = m[col][col].recip()?;
        for r in col + 1..n {
            let f = &m[r][col] * &inv;
            if f.is_zero() {
                continue;
            }
            for k in col..n {
                let t = &f * &m[col][k];
                m[r][k] = &m[r][k] - &t;
            }
            let t = &f * &rhs[col];
            rhs[r] = &rhs[r] - &t;
        }
    }
    let mut out = vec![BigComplex::zero(rhs[0].prec()); n];
    for r in (0..n).rev() {
        let mut acc = rhs[r].clone();
        for k in r + 1..n {
            acc = &acc - &(&m[r][k] * &out[k]);
        }
        out[r] = acc.div(&m[r][r])?;
    }
    Some(out)
}

fn exact_n1(sys: &AlgebraicSystem, prec: u32, domain: DomainTag) -> Result<SolutionSet> {
    let x = sys.closed_form().ok_or(Error::NoSolution)?;
    if x == 1 {
        return Err(Error::NoSolution);
    }
    Ok(SolutionSet {
        system: sys.clone(),
        points: vec![BigComplex::from_rational(&x, prec)],
        residual_norm: Float::new(prec),
        domain,
        exact: Some(vec![x]),
    })
}

fn in_open_box_increasing(x: &[BigComplex]) -> bool {
    let mut prev = Float::new(x[0].prec());
    for p in x {
        if !(*p.re() > prev && *p.re() < 1) {
            return false;
        }
        prev = p.re().clone();
    }
    true
}

/// Damped Newton in the ordered box `0 < x_1 < … < x_n < 1` for a, b, c > 0.
pub fn solve_positive(sys: &AlgebraicSystem, prec: u32) -> Result<SolutionSet> {
    if !sys.is_positive() {
        return Err(Error::InvalidArgument(format!("{} is not a positive system", sys)));
    }
    let n = sys.n;
    if n == 0 {
        return Ok(SolutionSet {
            system: sys.clone(),
            points: vec![],
            residual_norm: Float::new(prec),
            domain: DomainTag::RealUnitInterval,
            exact: Some(vec![]),
        });
    }
    if n == 1 {
        return exact_n1(sys, prec, DomainTag::RealUnitInterval);
    }
    let tol = certification_tolerance(prec);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for restart in 0..12 {
        let mut x: Vec<BigComplex> = if restart == 0 {
            (1..=n).map(|i| BigComplex::from_rational(&Rational::from((i as i64, n as i64 + 1)), prec)).collect()
        } else {
            let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..0.99)).collect();
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            v.dedup();
            if v.len() < n {
                continue;
            }
            v.into_iter().map(|t| BigComplex::from_f64(t, 0.0, prec)).collect()
        };
        let mut f = residual(sys, &x)?;
        let mut norm = max_norm(&f, prec);
        // Past the certification tolerance, keep polishing until the
        // residual stops decreasing (the line search rejects the step).
        for _ in 0..200 {
            let jac = jacobian(sys, &x)?;
            let Some(step) = solve_linear(jac, f.clone()) else { break };
            let mut lam = Float::with_val(prec, 1);
            let mut moved = false;
            for _ in 0..40 {
                let cand: Vec<BigComplex> = x.iter().zip(&step).map(|(p, s)| p - &s.scale(&lam)).collect();
                if in_open_box_increasing(&cand) {
                    if let Ok(fc) = residual(sys, &cand) {
                        let nc = max_norm(&fc, prec);
                        if nc < norm {
                            x = cand;
                            f = fc;
                            norm = nc;
                            moved = true;
                            break;
                        }
                    }
                }
                lam /= 2u32;
            }
            if !moved {
                break;
            }
        }
        if norm <= tol {
            let x: Vec<BigComplex> = x.into_iter().map(|p| BigComplex::from_real(p.re().clone())).collect();
            let residual_norm = max_norm(&residual(sys, &x)?, prec);
            return Ok(SolutionSet { system: sys.clone(), points: x, residual_norm, domain: DomainTag::RealUnitInterval, exact: None });
        }
    }
    Err(Error::NoConvergence(format!("{}: damped Newton failed after restarts", sys)))
}

fn random_seed_point(rng: &mut ChaCha8Rng, n: usize, prec: u32) -> Vec<BigComplex> {
    (0..n)
        .map(|_| {
            let r = 3.0 * rng.random::<f64>().sqrt();
            let th = std::f64::consts::TAU * rng.random::<f64>();
            BigComplex::from_f64(r * th.cos(), r * th.sin(), prec)
        })
        .collect()
}

/// `G_i = x_i(x_i − 1)·F_i`. Unlike F it does not tend to zero as points
/// escape to infinity, so minimizing ‖G‖ has no spurious limits there.
fn scaled_residual(sys: &AlgebraicSystem, x: &[BigComplex]) -> Result<Vec<BigComplex>> {
    let one = BigComplex::one(x[0].prec());
    Ok(residual(sys, x)?.iter().zip(x).map(|(f, xi)| &(xi * &(xi - &one)) * f).collect())
}

fn scaled_jacobian(sys: &AlgebraicSystem, x: &[BigComplex]) -> Result<Vec<Vec<BigComplex>>> {
    let prec = x[0].prec();
    let one = BigComplex::one(prec);
    let f = residual(sys, x)?;
    let mut jac = jacobian(sys, x)?;
    for (i, row) in jac.iter_mut().enumerate() {
        let w = &x[i] * &(&x[i] - &one);
        for v in row.iter_mut() {
            *v = &w * v;
        }
        let dw = &(&x[i] + &x[i]) - &one;
        row[i] = &row[i] + &(&dw * &f[i]);
    }
    Ok(jac)
}

/// Levenberg–Marquardt on G with μ = λ‖G‖², λ adapted on accept/reject. Near a
/// root μ vanishes quadratically, which keeps fast local convergence at
/// isolated roots and still converges onto solution manifolds.
fn lm_from(sys: &AlgebraicSystem, mut x: Vec<BigComplex>, prec: u32, tol: &Float) -> Option<(Vec<BigComplex>, Float)> {
    let n = x.len();
    let sq = |f: &[BigComplex]| f.iter().map(|z| z.norm_sqr()).fold(Float::new(prec), |a, b| a + b);
    let mut f = scaled_residual(sys, &x).ok()?;
    let mut e = sq(&f);
    let mut lam = Float::with_val(prec, 1);
    let mut iters = 0;
    while iters < 400 {
        if max_norm(&f, prec) <= *tol {
            break;
        }
        iters += 1;
        let jac = scaled_jacobian(sys, &x).ok()?;
        let mu = Float::with_val(prec, &lam * &e);
        let mut m = vec![vec![BigComplex::zero(prec); n]; n];
        let mut g = vec![BigComplex::zero(prec); n];
        for i in 0..n {
            for j in 0..n {
                let mut acc = BigComplex::zero(prec);
                for k in 0..n {
                    acc.add_assign_product(&jac[k][i].conj(), &jac[k][j]);
                }
                m[i][j] = acc;
            }
            m[i][i] = &m[i][i] + &BigComplex::from_real(mu.clone());
            let mut acc = BigComplex::zero(prec);
            for k in 0..n {
                acc.add_assign_product(&jac[k][i].conj(), &f[k]);
            }
            g[i] = acc;
        }
        let step = solve_linear(m, g)?;
        let cand: Vec<BigComplex> = x.iter().zip(&step).map(|(p, s)| p - s).collect();
        if cand.iter().any(|p| p.abs() > 1e8) {
            return None;
        }
        match scaled_residual(sys, &cand) {
            Ok(fc) if sq(&fc) < e => {
                x = cand;
                e = sq(&fc);
                f = fc;
                lam /= 4u32;
                if lam < 1e-20 {
                    lam = Float::with_val(prec, 1e-20);
                }
            }
            _ => {
                lam *= 8u32;
                if lam > 1e20 {
                    return None;
                }
            }
        }
    }
    let norm = max_norm(&residual(sys, &x).ok()?, prec);
    (norm <= *tol).then_some((x, norm))
}

fn well_separated(x: &[BigComplex]) -> bool {
    let one = BigComplex::one(x.first().map(|p| p.prec()).unwrap_or(64));
    for (i, p) in x.iter().enumerate() {
        if p.abs() < 1e-10 || (p - &one).abs() < 1e-10 {
            return false;
        }
        if x[i + 1..].iter().any(|q| p.dist(q) < 1e-10) {
            return false;
        }
    }
    true
}

/// Levenberg–Marquardt from `tries` random seeds in the disk |x| < 3.
///
/// Try `k` draws from ChaCha8 seeded with `rng_seed` on stream `k`, so the
/// output does not depend on thread scheduling. Distinct solutions (as
/// unordered sets, tolerance 1e−12) are returned in order of discovery.
pub fn solve_complex_multistart(sys: &AlgebraicSystem, tries: usize, rng_seed: u64, prec: u32) -> Result<Vec<SolutionSet>> {
    if sys.n == 0 {
        return Ok(vec![SolutionSet {
            system: sys.clone(),
            points: vec![],
            residual_norm: Float::new(prec),
            domain: DomainTag::Complex,
            exact: Some(vec![]),
        }]);
    }
    if sys.n == 1 && sys.closed_form().is_some() {
        return exact_n1(sys, prec, DomainTag::Complex).map(|s| vec![s]);
    }
    let tol = certification_tolerance(prec);
    let found: Vec<Option<(Vec<BigComplex>, Float)>> = (0..tries)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
            rng.set_stream(k as u64);
            let seed = random_seed_point(&mut rng, sys.n, prec);
            lm_from(sys, seed, prec, &tol).filter(|(x, _)| well_separated(x))
        })
        .collect();
    let mut out: Vec<SolutionSet> = Vec::new();
    for (x, norm) in found.into_iter().flatten() {
        let x = canonical(&x);
        if out.iter().any(|s| same_sets(&s.points, &x, 1e-12)) {
            continue;
        }
        out.push(SolutionSet { system: sys.clone(), points: x, residual_norm: norm, domain: DomainTag::Complex, exact: None });
    }
    if out.is_empty() {
        Err(Error::NoSolution)
    } else {
        Ok(out)
    }
}

/// Re-converges a solution at a higher precision, polishing to near the
/// rounding level of `prec`.
pub fn refine(sol: &SolutionSet, prec: u32) -> Result<SolutionSet> {
    if sol.system.n == 0 || sol.exact.is_some() {
        let mut out = sol.clone();
        out.points = sol.points.iter().map(|p| p.with_prec(prec)).collect();
        out.residual_norm = Float::with_val(prec, &sol.residual_norm);
        return Ok(out);
    }
    if sol.domain == DomainTag::RealUnitInterval {
        return solve_positive(&sol.system, prec);
    }
    let tight = Float::with_val(prec, Float::i_exp(1, -((prec as i32) * 7 / 8)));
    let x: Vec<BigComplex> = sol.points.iter().map(|p| p.with_prec(prec)).collect();
    let (x, norm) = lm_from(&sol.system, x, prec, &tight).ok_or_else(|| Error::NoConvergence(format!("refining {}", sol.system)))?;
    Ok(SolutionSet { system: sol.system.clone(), points: canonical(&x), residual_norm: norm, domain: sol.domain, exact: None })
}

/// Positive path when a, b, c > 0, multistart otherwise.
pub fn solve(sys: &AlgebraicSystem, tries: usize, rng_seed: u64, prec: u32) -> Result<Vec<SolutionSet>> {
    if sys.is_positive() {
        solve_positive(sys, prec).map(|s| vec![s])
    } else {
        solve_complex_multistart(sys, tries, rng_seed, prec)
    }
}

/// Monic coefficients, highest degree first.
pub fn to_polynomial(sol: &SolutionSet) -> Vec<BigComplex> {
    let prec = sol.prec();
    let mut c = vec![BigComplex::one(prec)];
    for p in &sol.points {
        let mut next = c.clone();
        next.push(BigComplex::zero(prec));
        for (k, ck) in c.iter().enumerate() {
            next[k + 1] = &next[k + 1] - &(ck * p);
        }
        c = next;
    }
    c
}

/// Exact monic polynomial (ascending) for closed-form solutions.
pub fn to_polynomial_exact(sol: &SolutionSet) -> Option<Polynomial> {
    sol.exact.as_ref().map(|ex| Polynomial::from_roots(ex))
}

/// All roots of a polynomial given highest degree first (Aberth iteration).
pub fn polynomial_roots(desc: &[BigComplex]) -> Result<Vec<BigComplex>> {
    let deg = desc.len().saturating_sub(1);
    if deg == 0 {
        return Ok(vec![]);
    }
    let prec = desc[0].prec();
    let lead = desc[0].clone();
    let monic: Vec<BigComplex> = desc.iter().map(|c| c.div(&lead).unwrap()).collect();
    let bound = 1.0 + monic[1..].iter().map(|c| c.abs().to_f64()).fold(0.0, f64::max);
    let mut z: Vec<BigComplex> = (0..deg)
        .map(|k| {
            let th = std::f64::consts::TAU * (k as f64 + 0.25) / deg as f64 + 0.4;
            BigComplex::from_f64(bound * 0.7 * th.cos(), bound * 0.7 * th.sin(), prec)
        })
        .collect();
    let eval = |x: &BigComplex| -> (BigComplex, BigComplex) {
        let mut p = BigComplex::zero(prec);
        let mut dp = BigComplex::zero(prec);
        for c in &monic {
            dp = &(&dp * x) + &p;
            p = &(&p * x) + c;
        }
        (p, dp)
    };
    let eps = Float::with_val(prec, Float::i_exp(1, -(prec as i32) + 16));
    for _ in 0..2000 {
        let mut max_step = Float::new(prec);
        for i in 0..deg {
            let (p, dp) = eval(&z[i]);
            let Some(ratio) = p.div(&dp) else { continue };
            let mut s = BigComplex::zero(prec);
            for j in 0..deg {
                if j != i {
                    if let Some(r) = (&z[i] - &z[j]).recip() {
                        s = &s + &r;
                    }
                }
            }
            let denom = &BigComplex::one(prec) - &(&ratio * &s);
            let Some(w) = ratio.div(&denom) else { continue };
            let size = w.abs();
            if size > max_step {
                max_step = size;
            }
            z[i] = &z[i] - &w;
        }
        if max_step <= eps {
            return Ok(canonical(&z));
        }
    }
    Err(Error::NoConvergence("Aberth iteration".into()))
}

/// Residual of the scaled system at a certified solution.
pub fn scale_equivalence_check(sol: &SolutionSet, alpha: &Rational) -> Result<VerificationReport> {
    let scaled = sol.system.scaled(alpha)?;
    let prec = sol.prec();
    let dev = if sol.points.is_empty() { Float::new(prec) } else { max_norm(&residual(&scaled, &sol.points)?, prec) };
    let bound = certification_tolerance(prec) * Float::with_val(prec, alpha.clone()).abs();
    Ok(VerificationReport::from_deviation("scale equivalence", 0, dev, Some(&bound))
        .with_detail("system", sol.system.to_string())
        .with_detail("scaled", scaled.to_string()))
}

/// Affine space of monic degree-n polynomials satisfying the Stieltjes
/// equation: `particular + Σ s_k·directions[k]`, coefficients ascending.
#[derive(Clone, Debug, PartialEq)]
pub struct StieltjesFamily {
    pub particular: Polynomial,
    pub directions: Vec<Polynomial>,
    /// Coefficient index that parametrizes each direction.
    pub free: Vec<usize>,
}

impl StieltjesFamily {
    pub fn dimension(&self) -> usize {
        self.directions.len()
    }

    /// Exact membership of a monic polynomial.
    pub fn contains(&self, p: &Polynomial) -> bool {
        let diff = p - &self.particular;
        let mut acc = Polynomial::zero();
        for (d, &k) in self.directions.iter().zip(&self.free) {
            acc = &acc + &d.scale(&diff.coeff(k));
        }
        acc == diff
    }

    /// Members of the family whose roots are distinct and avoid 0 and 1
    /// are exactly the solution sets; this reports whether the particular
    /// member is admissible.
    pub fn particular_is_admissible(&self) -> bool {
        admissible(&self.particular)
    }
}

/// Roots distinct and different from 0 and 1.
pub fn admissible(p: &Polynomial) -> bool {
    p.is_squarefree() && p.coeff(0) != 0 && p.eval(&Rational::from(1)) != 0
}

fn kappa(sys: &AlgebraicSystem, k: usize) -> Rational {
    let k = Rational::from(k as i64);
    let ab = Rational::from(&sys.a + &sys.b);
    Rational::from(&sys.c * &k) * Rational::from(&k - 1u32) + Rational::from(2 * ab * &k)
}

/// Exact solution space of `p_k(κ_k − κ_n) = (k+1)(ck + 2a)p_{k+1}`,
/// `p_n = 1`. `None` when inconsistent (no solutions).
pub fn stieltjes_family(sys: &AlgebraicSystem) -> Option<StieltjesFamily> {
    let n = sys.n;
    let kn = kappa(sys, n);
    // Unknowns p_0..p_{n-1}; augmented column carries the p_n = 1 term.
    let mut rows: Vec<Vec<Rational>> = (0..n)
        .map(|k| {
            let mut r = vec![Rational::new(); n + 1];
            r[k] = kappa(sys, k) - &kn;
            let f = Rational::from(k as i64 + 1) * (Rational::from(&sys.c * k as u32) + Rational::from(2 * &sys.a));
            if k + 1 < n {
                r[k + 1] = -f;
            } else {
                r[n] = f;
            }
            r
        })
        .collect();
    // Reduced row echelon form.
    let mut pivots = Vec::new();
    let mut row = 0;
    for col in 0..n {
        let Some(p) = (row..rows.len()).find(|&r| rows[r][col] != 0) else { continue };
        rows.swap(row, p);
        let inv = Rational::from(1) / rows[row][col].clone();
        for v in rows[row].iter_mut() {
            *v *= &inv;
        }
        for r in 0..rows.len() {
            if r != row && rows[r][col] != 0 {
                let f = rows[r][col].clone();
                for k in 0..=n {
                    let t = Rational::from(&f * &rows[row][k]);
                    rows[r][k] -= t;
                }
            }
        }
        pivots.push(col);
        row += 1;
    }
    if rows[row..].iter().any(|r| r[n] != 0) {
        return None;
    }
    let free: Vec<usize> = (0..n).filter(|c| !pivots.contains(c)).collect();
    let mut part = vec![Rational::new(); n + 1];
    part[n] = Rational::from(1);
    for (r, &c) in pivots.iter().enumerate() {
        part[c] = rows[r][n].clone();
    }
    let directions = free
        .iter()
        .map(|&fc| {
            let mut d = vec![Rational::new(); n + 1];
            d[fc] = Rational::from(1);
            for (r, &c) in pivots.iter().enumerate() {
                d[c] = -rows[r][fc].clone();
            }
            Polynomial::new(d)
        })
        .collect();
    Some(StieltjesFamily { particular: Polynomial::new(part), directions, free })
}

/// Largest coefficient of `c·x(x−1)P'' + 2((a+b)x − a)P' − κ_n·P` for the
/// monic polynomial of the points (highest degree first).
pub fn stieltjes_defect(sys: &AlgebraicSystem, desc: &[BigComplex]) -> Float {
    let prec = desc.first().map(|c| c.prec()).unwrap_or(64);
    let n = desc.len() - 1;
    let asc: Vec<BigComplex> = desc.iter().rev().cloned().collect();
    let (a, _, c) = sys.coeffs(prec);
    let kn = BigComplex::from_rational(&kappa(sys, n), prec);
    let mut out = vec![BigComplex::zero(prec); n + 1];
    for k in 0..=n {
        let kf = BigComplex::from_rational(&Rational::from(k as i64), prec);
        let kk = BigComplex::from_rational(&kappa(sys, k), prec);
        // x^k term: κ_k p_k − (k+1)(ck + 2a)p_{k+1} − κ_n p_k
        let mut t = &(&kk - &kn) * &asc[k];
        if k < n {
            let two = BigComplex::from_f64(2.0, 0.0, prec);
            let f = &(&kf + &BigComplex::one(prec)) * &(&(&c * &kf) + &(&two * &a));
            t = &t - &(&f * &asc[k + 1]);
        }
        out[k] = t;
    }
    max_norm(&out, prec)
}

/// Report that a solution set satisfies the Stieltjes equation of its system.
pub fn stieltjes_report(sol: &SolutionSet, tol: &Float) -> VerificationReport {
    let poly = to_polynomial(sol);
    let dev = stieltjes_defect(&sol.system, &poly);
    let coeffs: Vec<String> = poly.iter().map(|c| float_to_short(c.re())).collect();
    VerificationReport::from_deviation("stieltjes certificate", 0, dev, Some(tol))
        .with_detail("system", sol.system.to_string())
        .with_detail("monic_coefficients_re", coeffs)
}
