//! Truncated Laurent–Puiseux series in `u = q^(1/N)`.
//!
//! Coefficients are stored densely on the lattice `lo + stride·j`, which
//! keeps series such as E4 (integral exponents on a 1/48 grid) as compact as
//! ordinary power series.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use rug::{Float, Integer, Rational};

use crate::error::{Error, Result};
use crate::scalar::{BigComplex, Scalar};

/// Grid denominator used by the catalog: covers η (1/24), η(τ/2) (1/48),
/// θ-series (1/8) and level-2 expansions (1/2).
pub const DEFAULT_GRID: i64 = 48;

/// Default q-order of truncation.
pub const DEFAULT_ORDER: u32 = 60;

pub(crate) fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

fn lcm(a: i64, b: i64) -> i64 {
    a / gcd(a, b) * b
}

fn div_ceil(a: i64, b: i64) -> i64 {
    (a + b - 1).div_euclid(b)
}

/// Truncated series `Σ c_k u^k` with `u = q^(1/denom)`; exponents at or above
/// `trunc/denom` are unknown.
#[derive(Clone)]
pub struct Series<S: Scalar> {
    denom: i64,
    lo: i64,
    // Zero when at most one coefficient is stored.
    stride: i64,
    coeffs: Vec<S>,
    trunc: i64,
    ctx: S::Ctx,
}

impl<S: Scalar> fmt::Debug for Series<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Series[N={}, O(u^{})]", self.denom, self.trunc)?;
        for (k, c) in self.terms().take(8) {
            write!(f, " {:?}·u^{}", c, k)?;
        }
        Ok(())
    }
}

impl<S: Scalar> Series<S> {
    /// Builds a series from `(numerator, coefficient)` pairs on grid `denom`.
    /// Repeated exponents are summed and terms at or above `trunc` dropped.
    pub fn from_terms<I>(denom: i64, terms: I, trunc: i64, ctx: S::Ctx) -> Self
    where
        I: IntoIterator<Item = (i64, S)>,
    {
        assert!(denom > 0, "grid denominator must be positive");
        let mut map: BTreeMap<i64, S> = BTreeMap::new();
        for (k, c) in terms {
            if k >= trunc {
                continue;
            }
            match map.get_mut(&k) {
                Some(v) => *v = Scalar::add(v, &c),
                None => {
                    map.insert(k, c);
                }
            }
        }
        map.retain(|_, c| !c.is_zero());
        let Some((&lo, _)) = map.iter().next() else {
            return Self::zero(denom, trunc, ctx);
        };
        let stride = map.keys().fold(0, |g, &k| gcd(g, k - lo));
        let len = if stride == 0 { 1 } else { (map.keys().last().unwrap() - lo) / stride + 1 };
        let mut coeffs = vec![S::zero(ctx); len as usize];
        for (k, c) in map {
            let idx = if stride == 0 { 0 } else { (k - lo) / stride };
            coeffs[idx as usize] = c;
        }
        Series { denom, lo, stride, coeffs, trunc, ctx }
    }

    /// Dense coefficients on `lo + stride·j`; normalizes afterwards.
    pub fn from_lattice(denom: i64, lo: i64, stride: i64, coeffs: Vec<S>, trunc: i64, ctx: S::Ctx) -> Self {
        assert!(denom > 0 && stride >= 0);
        Series { denom, lo, stride, coeffs, trunc, ctx }.normalized()
    }

    pub fn zero(denom: i64, trunc: i64, ctx: S::Ctx) -> Self {
        Series { denom, lo: trunc, stride: 0, coeffs: Vec::new(), trunc, ctx }
    }

    pub fn constant(c: S, denom: i64, trunc: i64) -> Self {
        let ctx = c.ctx();
        Self::from_terms(denom, [(0, c)], trunc, ctx)
    }

    pub fn monomial(c: S, k: i64, denom: i64, trunc: i64) -> Self {
        let ctx = c.ctx();
        Self::from_terms(denom, [(k, c)], trunc, ctx)
    }

    fn normalized(mut self) -> Self {
        if self.stride == 0 {
            self.coeffs.truncate(1);
        }
        if self.lo >= self.trunc {
            self.coeffs.clear();
        } else if self.stride > 0 {
            let keep = div_ceil(self.trunc - self.lo, self.stride) as usize;
            self.coeffs.truncate(keep);
        }
        let first = self.coeffs.iter().position(|c| !c.is_zero());
        let Some(first) = first else {
            return Self::zero(self.denom, self.trunc, self.ctx);
        };
        let last = self.coeffs.iter().rposition(|c| !c.is_zero()).unwrap();
        self.lo += self.stride * first as i64;
        self.coeffs.truncate(last + 1);
        self.coeffs.drain(..first);
        let g = self
            .coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .fold(0i64, |g, (j, _)| gcd(g, j as i64));
        if g == 0 {
            self.stride = 0;
            self.coeffs.truncate(1);
        } else if g > 1 {
            self.coeffs = self.coeffs.into_iter().step_by(g as usize).collect();
            self.stride *= g;
        }
        self
    }

    pub fn ctx(&self) -> S::Ctx {
        self.ctx
    }

    pub fn denom(&self) -> i64 {
        self.denom
    }

    /// Truncation numerator on this series' grid.
    pub fn trunc_numer(&self) -> i64 {
        self.trunc
    }

    /// Truncation order as an exponent of q.
    pub fn trunc(&self) -> Rational {
        Rational::from((self.trunc, self.denom))
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Stored `(numerator, coefficient)` pairs, in increasing exponent order.
    pub fn terms(&self) -> impl Iterator<Item = (i64, &S)> + '_ {
        let (lo, stride) = (self.lo, self.stride);
        self.coeffs.iter().enumerate().map(move |(j, c)| (lo + stride * j as i64, c))
    }

    /// Nonzero terms with rational exponents.
    pub fn nonzero_terms(&self) -> Vec<(Rational, S)> {
        self.terms()
            .filter(|(_, c)| !c.is_zero())
            .map(|(k, c)| (Rational::from((k, self.denom)), c.clone()))
            .collect()
    }

    /// Leading exponent and coefficient; `None` for the zero series.
    pub fn leading(&self) -> Option<(Rational, S)> {
        self.coeffs.first().map(|c| (Rational::from((self.lo, self.denom)), c.clone()))
    }

    pub fn leading_numer(&self) -> Option<i64> {
        (!self.coeffs.is_empty()).then_some(self.lo)
    }

    /// Coefficient of `q^e`.
    pub fn coeff(&self, e: &Rational) -> Result<S> {
        let scaled = Rational::from(e * self.denom);
        if *scaled.denom() != 1 {
            return Err(Error::OffGrid(e.to_string()));
        }
        let k = scaled.numer().to_i64().ok_or_else(|| Error::OffGrid(e.to_string()))?;
        if k >= self.trunc {
            return Err(Error::BeyondTruncation { exponent: e.to_string(), trunc: self.trunc().to_string() });
        }
        Ok(self.coeff_numer(k))
    }

    /// Coefficient of `u^k`; zero when absent (no truncation check).
    pub fn coeff_numer(&self, k: i64) -> S {
        if self.coeffs.is_empty() || k < self.lo {
            return S::zero(self.ctx);
        }
        let off = k - self.lo;
        if self.stride == 0 {
            return if off == 0 { self.coeffs[0].clone() } else { S::zero(self.ctx) };
        }
        if off % self.stride != 0 {
            return S::zero(self.ctx);
        }
        self.coeffs.get((off / self.stride) as usize).cloned().unwrap_or_else(|| S::zero(self.ctx))
    }

    /// Same series on a finer grid `denom' = denom·m`.
    pub fn regrid(&self, new_denom: i64) -> Self {
        assert!(new_denom % self.denom == 0, "grid {} does not refine {}", new_denom, self.denom);
        let m = new_denom / self.denom;
        Series {
            denom: new_denom,
            lo: self.lo * m,
            stride: self.stride * m,
            coeffs: self.coeffs.clone(),
            trunc: self.trunc * m,
            ctx: self.ctx,
        }
    }

    fn on_common_grid(&self, other: &Self) -> (Self, Self) {
        let l = lcm(self.denom, other.denom);
        (self.regrid(l), other.regrid(l))
    }

    /// Lowers the truncation to `order` (an exponent of q); never raises it.
    pub fn truncate(&self, order: &Rational) -> Self {
        let t = Rational::from(order * self.denom).ceil().numer().to_i64().unwrap_or(i64::MAX);
        let mut s = self.clone();
        s.trunc = s.trunc.min(t);
        s.normalized()
    }

    pub fn map_scalars<T: Scalar>(&self, ctx: T::Ctx, f: impl Fn(&S) -> T) -> Series<T> {
        Series {
            denom: self.denom,
            lo: self.lo,
            stride: self.stride,
            coeffs: self.coeffs.iter().map(f).collect(),
            trunc: self.trunc,
            ctx,
        }
        .normalized()
    }

    pub fn to_complex(&self, prec: u32) -> Series<BigComplex> {
        self.map_scalars(prec, |c| c.to_complex(prec))
    }

    pub fn scale(&self, c: &S) -> Self {
        let ctx = S::merge_ctx(self.ctx, c.ctx());
        self.map_scalars(ctx, |x| Scalar::mul(x, c))
    }

    pub fn mul_rational(&self, r: &Rational) -> Self {
        self.map_scalars(self.ctx, |x| x.mul_rational(r))
    }

    /// Adds a constant.
    pub fn add_scalar(&self, c: &S) -> Self {
        self + &Series::constant(c.clone(), self.denom, self.trunc.max(1))
    }

    fn accumulate<'a>(denom: i64, lo: i64, stride: i64, trunc: i64, ctx: S::Ctx, parts: impl Iterator<Item = (i64, &'a S)>) -> Self {
        let len = if lo >= trunc {
            0
        } else if stride == 0 {
            1
        } else {
            div_ceil(trunc - lo, stride)
        };
        let mut coeffs = vec![S::zero(ctx); len as usize];
        for (k, c) in parts {
            if k >= trunc {
                continue;
            }
            let idx = if stride == 0 { 0 } else { (k - lo) / stride };
            coeffs[idx as usize] = Scalar::add(&coeffs[idx as usize], c);
        }
        Series { denom, lo, stride, coeffs, trunc, ctx }.normalized()
    }

    fn add_impl(&self, other: &Self) -> Self {
        let (f, g) = self.on_common_grid(other);
        let ctx = S::merge_ctx(f.ctx, g.ctx);
        let trunc = f.trunc.min(g.trunc);
        match (f.is_zero(), g.is_zero()) {
            (true, true) => Self::zero(f.denom, trunc, ctx),
            (true, false) => Self::accumulate(f.denom, g.lo, g.stride, trunc, ctx, g.terms()),
            (false, true) => Self::accumulate(f.denom, f.lo, f.stride, trunc, ctx, f.terms()),
            (false, false) => {
                let lo = f.lo.min(g.lo);
                let stride = gcd(gcd(f.stride, g.stride), f.lo - g.lo);
                Self::accumulate(f.denom, lo, stride, trunc, ctx, f.terms().chain(g.terms()))
            }
        }
    }

    fn mul_impl(&self, other: &Self) -> Self {
        let (f, g) = self.on_common_grid(other);
        let ctx = S::merge_ctx(f.ctx, g.ctx);
        let trunc = (f.trunc + g.leading_numer().unwrap_or(g.trunc)).min(g.trunc + f.leading_numer().unwrap_or(f.trunc));
        if f.is_zero() || g.is_zero() {
            return Self::zero(f.denom, trunc, ctx);
        }
        let lo = f.lo + g.lo;
        let stride = gcd(f.stride, g.stride);
        let len = if lo >= trunc {
            0
        } else if stride == 0 {
            1
        } else {
            div_ceil(trunc - lo, stride)
        };
        let mut coeffs = vec![S::zero(ctx); len as usize];
        for (i, a) in f.coeffs.iter().enumerate() {
            let oi = f.stride * i as i64;
            if lo + oi >= trunc {
                break;
            }
            if a.is_zero() {
                continue;
            }
            for (j, b) in g.coeffs.iter().enumerate() {
                let off = oi + g.stride * j as i64;
                if lo + off >= trunc {
                    break;
                }
                let idx = if stride == 0 { 0 } else { off / stride };
                coeffs[idx as usize].add_assign_product(a, b);
            }
        }
        Series { denom: f.denom, lo, stride, coeffs, trunc, ctx }.normalized()
    }

    /// Raises `u^lo Σ a_j v^j` to the power `m` given the leading value
    /// `g0 = a_0^m`, by the J.C.P. Miller recurrence.
    fn miller(&self, m: &Rational, g0: S) -> Result<Self> {
        let lo_m = Rational::from(m * self.lo);
        if *lo_m.denom() != 1 {
            return Err(Error::OddLeadingExponent(self.lo));
        }
        let new_lo = lo_m.numer().to_i64().unwrap();
        let rel = self.trunc - self.lo;
        let trunc = new_lo + rel;
        if self.stride == 0 {
            return Ok(Self::from_terms(self.denom, [(new_lo, g0)], trunc, self.ctx));
        }
        let count = div_ceil(rel, self.stride).max(0) as usize;
        let a = &self.coeffs;
        let inv_a0 = a[0].inv().ok_or(Error::ZeroSeries)?;
        let m1 = Rational::from(m + 1u32);
        let mut g: Vec<S> = Vec::with_capacity(count);
        if count > 0 {
            g.push(g0);
        }
        for k in 1..count {
            let mut acc = S::zero(self.ctx);
            for j in 1..=k.min(a.len() - 1) {
                if a[j].is_zero() {
                    continue;
                }
                let w = Rational::from(&m1 * j as i64) - k as i64;
                if w == 0 {
                    continue;
                }
                acc = Scalar::add(&acc, &Scalar::mul(&a[j], &g[k - j]).mul_rational(&w));
            }
            let scaled = Scalar::mul(&acc, &inv_a0).mul_rational(&Rational::from((1, k as i64)));
            g.push(scaled);
        }
        Ok(Series { denom: self.denom, lo: new_lo, stride: self.stride, coeffs: g, trunc, ctx: self.ctx }.normalized())
    }

    pub fn reciprocal(&self) -> Result<Self> {
        let a0 = self.coeffs.first().ok_or(Error::ZeroSeries)?;
        let g0 = a0.inv().ok_or(Error::ZeroSeries)?;
        self.miller(&Rational::from(-1), g0)
    }

    pub fn pow_int(&self, m: i64) -> Result<Self> {
        match m {
            0 => {
                let rel = if self.is_zero() { 0 } else { self.trunc - self.lo };
                Ok(Series::constant(S::one(self.ctx), self.denom, rel))
            }
            1 => Ok(self.clone()),
            _ => {
                let a0 = self.coeffs.first().ok_or(Error::ZeroSeries)?;
                let base = if m < 0 { a0.inv().ok_or(Error::ZeroSeries)? } else { a0.clone() };
                let mut g0 = S::one(self.ctx);
                for _ in 0..m.unsigned_abs() {
                    g0 = Scalar::mul(&g0, &base);
                }
                self.miller(&Rational::from(m), g0)
            }
        }
    }

    /// Principal square root: the leading coefficient gets a nonnegative real
    /// part (positive imaginary part when the real part is zero).
    pub fn sqrt(&self) -> Result<Self> {
        let a0 = self.coeffs.first().ok_or(Error::ZeroSeries)?;
        if self.lo % 2 != 0 {
            return Err(Error::OddLeadingExponent(self.lo));
        }
        let g0 = Scalar::sqrt(a0).ok_or(Error::NonSquareLeading)?;
        self.miller(&Rational::from((1, 2)), g0)
    }

    /// `q·d/dq`, i.e. `(1/2πi)·d/dτ`.
    pub fn d(&self) -> Self {
        let denom = self.denom;
        let terms: Vec<S> = self.terms().map(|(k, c)| c.mul_rational(&Rational::from((k, denom)))).collect();
        Series { denom, lo: self.lo, stride: self.stride, coeffs: terms, trunc: self.trunc, ctx: self.ctx }.normalized()
    }

    /// Substitutes `q ↦ q^r` for positive rational `r` (τ ↦ rτ).
    pub fn scale_exponents(&self, r: &Rational) -> Self {
        assert!(r.cmp0() == std::cmp::Ordering::Greater, "exponent scale must be positive");
        let p = r.numer().to_i64().expect("scale numerator fits i64");
        let q = r.denom().to_i64().expect("scale denominator fits i64");
        Series {
            denom: self.denom * q,
            lo: self.lo * p,
            stride: self.stride * p,
            coeffs: self.coeffs.clone(),
            trunc: self.trunc * p,
            ctx: self.ctx,
        }
    }

    /// Equality of known coefficients, up to the smaller truncation order.
    pub fn agrees_with(&self, other: &Self) -> bool {
        let t = std::cmp::min(self.trunc(), other.trunc());
        self.truncate(&t) == other.truncate(&t)
    }

    /// True when every coefficient below `order` vanishes.
    pub fn is_zero_below(&self, order: &Rational) -> bool {
        self.truncate(order).is_zero()
    }

    /// Largest coefficient magnitude among exponents below `order`.
    pub fn max_abs_below(&self, order: &Rational, prec: u32) -> Float {
        let limit = Rational::from(order * self.denom);
        self.terms()
            .filter(|(k, _)| limit > *k)
            .map(|(_, c)| c.magnitude(prec))
            .fold(Float::new(prec), |m, x| if x > m { x } else { m })
    }
}

impl Series<Rational> {
    /// Exact series promoted into another domain.
    pub fn promote<T: Scalar>(&self, ctx: T::Ctx) -> Series<T> {
        self.map_scalars(ctx, |c| T::from_rational(c, ctx))
    }

    /// Integer coefficients (used by tests and catalog oracles).
    pub fn integer_coeffs(&self) -> Option<Vec<(i64, Integer)>> {
        self.terms()
            .map(|(k, c)| (*c.denom() == 1).then(|| (k, c.numer().clone())))
            .collect()
    }
}

impl<S: Scalar> PartialEq for Series<S> {
    /// Semantic equality: same truncation order and same nonzero terms,
    /// regardless of grid.
    fn eq(&self, other: &Self) -> bool {
        let (f, g) = self.on_common_grid(other);
        if f.trunc != g.trunc {
            return false;
        }
        let fa: Vec<_> = f.terms().filter(|(_, c)| !c.is_zero()).collect();
        let ga: Vec<_> = g.terms().filter(|(_, c)| !c.is_zero()).collect();
        fa == ga
    }
}

impl<S: Scalar> Add for &Series<S> {
    type Output = Series<S>;
    fn add(self, rhs: &Series<S>) -> Series<S> {
        self.add_impl(rhs)
    }
}

impl<S: Scalar> Sub for &Series<S> {
    type Output = Series<S>;
    fn sub(self, rhs: &Series<S>) -> Series<S> {
        self.add_impl(&-rhs)
    }
}

impl<S: Scalar> Mul for &Series<S> {
    type Output = Series<S>;
    fn mul(self, rhs: &Series<S>) -> Series<S> {
        self.mul_impl(rhs)
    }
}

impl<S: Scalar> Neg for &Series<S> {
    type Output = Series<S>;
    fn neg(self) -> Series<S> {
        self.map_scalars(self.ctx, |c| Scalar::neg(c))
    }
}
