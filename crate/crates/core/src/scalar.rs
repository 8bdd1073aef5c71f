//! Coefficient domains for q-series.
//!
//! Two domains are supported: exact rationals ([`Rational`], from GMP) and
//! multiprecision complex numbers ([`BigComplex`], built on MPFR floats).
//! Promotion from the exact domain to the complex one is always explicit.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use rug::float::Constant;
use rug::ops::Pow;
use rug::{Assign, Float, Integer, Rational};

/// Lowest precision accepted for complex arithmetic, in bits.
pub const MIN_PRECISION: u32 = 128;

/// Default working precision, in bits.
pub const DEFAULT_PRECISION: u32 = 256;

/// Operations a series coefficient must support.
///
/// `Ctx` carries whatever a value needs to be created from nothing: unit for
/// exact rationals, the precision in bits for complex floats.
pub trait Scalar: Clone + fmt::Debug + PartialEq + Send + Sync + 'static {
    type Ctx: Copy + fmt::Debug + PartialEq + Send + Sync + 'static;

    /// True when arithmetic is exact and equality is decidable.
    const EXACT: bool;

    fn ctx(&self) -> Self::Ctx;
    /// Context of a result combining two operands (lower precision wins).
    fn merge_ctx(a: Self::Ctx, b: Self::Ctx) -> Self::Ctx;
    fn zero(ctx: Self::Ctx) -> Self;
    fn one(ctx: Self::Ctx) -> Self;
    fn from_rational(r: &Rational, ctx: Self::Ctx) -> Self;

    fn is_zero(&self) -> bool;
    fn add(&self, other: &Self) -> Self;
    fn sub(&self, other: &Self) -> Self;
    fn mul(&self, other: &Self) -> Self;
    fn neg(&self) -> Self;
    /// Multiplicative inverse; `None` for zero.
    fn inv(&self) -> Option<Self>;
    fn mul_rational(&self, r: &Rational) -> Self;
    /// Principal square root. Exact values return `None` unless they are
    /// squares of rationals.
    fn sqrt(&self) -> Option<Self>;

    /// Absolute value as a float of the given precision.
    fn magnitude(&self, prec: u32) -> Float;
    fn to_complex(&self, prec: u32) -> BigComplex;

    fn add_assign_product(&mut self, a: &Self, b: &Self) {
        *self = Scalar::add(self, &Scalar::mul(a, b));
    }
}

impl Scalar for Rational {
    type Ctx = ();
    const EXACT: bool = true;

    fn ctx(&self) {}
    fn merge_ctx(_: (), _: ()) {}
    fn zero(_: ()) -> Self {
        Rational::new()
    }
    fn one(_: ()) -> Self {
        Rational::from(1)
    }
    fn from_rational(r: &Rational, _: ()) -> Self {
        r.clone()
    }
    fn is_zero(&self) -> bool {
        self.cmp0() == Ordering::Equal
    }
    fn add(&self, other: &Self) -> Self {
        Rational::from(self + other)
    }
    fn sub(&self, other: &Self) -> Self {
        Rational::from(self - other)
    }
    fn mul(&self, other: &Self) -> Self {
        Rational::from(self * other)
    }
    fn neg(&self) -> Self {
        Rational::from(-self)
    }
    fn inv(&self) -> Option<Self> {
        if Scalar::is_zero(self) {
            None
        } else {
            Some(self.clone().recip())
        }
    }
    fn mul_rational(&self, r: &Rational) -> Self {
        Rational::from(self * r)
    }
    fn sqrt(&self) -> Option<Self> {
        if self.cmp0() == Ordering::Less {
            return None;
        }
        let (num, den) = (self.numer(), self.denom());
        if num.is_perfect_square() && den.is_perfect_square() {
            Some(Rational::from((num.clone().sqrt(), den.clone().sqrt())))
        } else {
            None
        }
    }
    fn magnitude(&self, prec: u32) -> Float {
        Float::with_val(prec, self).abs()
    }
    fn to_complex(&self, prec: u32) -> BigComplex {
        BigComplex::from_rational(self, prec)
    }
    fn add_assign_product(&mut self, a: &Self, b: &Self) {
        *self += Rational::from(a * b);
    }
}

/// Complex number with MPFR real and imaginary parts of equal precision.
#[derive(Clone, PartialEq)]
pub struct BigComplex {
    re: Float,
    im: Float,
}

impl fmt::Debug for BigComplex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({} + {}i)", self.re.to_string_radix(10, Some(20)), self.im.to_string_radix(10, Some(20)))
    }
}

impl fmt::Display for BigComplex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl BigComplex {
    pub fn zero(prec: u32) -> Self {
        BigComplex { re: Float::new(prec), im: Float::new(prec) }
    }

    pub fn one(prec: u32) -> Self {
        Self::from_f64(1.0, 0.0, prec)
    }

    pub fn i(prec: u32) -> Self {
        Self::from_f64(0.0, 1.0, prec)
    }

    pub fn from_f64(re: f64, im: f64, prec: u32) -> Self {
        BigComplex { re: Float::with_val(prec, re), im: Float::with_val(prec, im) }
    }

    pub fn from_floats(re: Float, im: Float) -> Self {
        let prec = re.prec().min(im.prec());
        BigComplex { re: Float::with_val(prec, re), im: Float::with_val(prec, im) }
    }

    pub fn from_real(re: Float) -> Self {
        let prec = re.prec();
        BigComplex { re, im: Float::new(prec) }
    }

    pub fn from_rational(r: &Rational, prec: u32) -> Self {
        BigComplex { re: Float::with_val(prec, r), im: Float::new(prec) }
    }

    pub fn from_rationals(re: &Rational, im: &Rational, prec: u32) -> Self {
        BigComplex { re: Float::with_val(prec, re), im: Float::with_val(prec, im) }
    }

    /// Parses decimal strings such as `"0.25"` or `"-1e-3"`.
    pub fn parse(re: &str, im: &str, prec: u32) -> Option<Self> {
        let re = Float::parse(re).ok()?;
        let im = Float::parse(im).ok()?;
        Some(BigComplex { re: Float::with_val(prec, re), im: Float::with_val(prec, im) })
    }

    /// `e^{iθ}`.
    pub fn cis(theta: &Float) -> Self {
        let prec = theta.prec();
        let (s, c) = theta.clone().sin_cos(Float::new(prec));
        BigComplex { re: c, im: s }
    }

    pub fn pi(prec: u32) -> Float {
        Float::with_val(prec, Constant::Pi)
    }

    /// `2πi`.
    pub fn two_pi_i(prec: u32) -> Self {
        BigComplex { re: Float::new(prec), im: Self::pi(prec) * 2u32 }
    }

    pub fn re(&self) -> &Float {
        &self.re
    }

    pub fn im(&self) -> &Float {
        &self.im
    }

    pub fn prec(&self) -> u32 {
        self.re.prec().min(self.im.prec())
    }

    pub fn with_prec(&self, prec: u32) -> Self {
        BigComplex { re: Float::with_val(prec, &self.re), im: Float::with_val(prec, &self.im) }
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn is_finite(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }

    pub fn conj(&self) -> Self {
        BigComplex { re: self.re.clone(), im: -self.im.clone() }
    }

    pub fn norm_sqr(&self) -> Float {
        let p = self.prec();
        Float::with_val(p, self.re.square_ref()) + Float::with_val(p, self.im.square_ref())
    }

    pub fn abs(&self) -> Float {
        self.re.clone().hypot(&self.im)
    }

    pub fn arg(&self) -> Float {
        self.im.clone().atan2(&self.re)
    }

    pub fn scale(&self, f: &Float) -> Self {
        let p = self.prec();
        BigComplex { re: Float::with_val(p, &self.re * f), im: Float::with_val(p, &self.im * f) }
    }

    pub fn scale_rational(&self, r: &Rational) -> Self {
        let p = self.prec();
        BigComplex { re: Float::with_val(p, &self.re * r), im: Float::with_val(p, &self.im * r) }
    }

    pub fn recip(&self) -> Option<Self> {
        if self.is_zero() {
            return None;
        }
        let n = self.norm_sqr();
        Some(BigComplex { re: Float::with_val(self.prec(), &self.re / &n), im: -(Float::with_val(self.prec(), &self.im / &n)) })
    }

    pub fn div(&self, other: &Self) -> Option<Self> {
        other.recip().map(|r| self * &r)
    }

    pub fn exp(&self) -> Self {
        let m = self.re.clone().exp();
        let z = Self::cis(&self.im);
        z.scale(&m)
    }

    /// Principal square root: nonnegative real part, nonnegative imaginary
    /// part when the real part vanishes.
    pub fn sqrt(&self) -> Self {
        let p = self.prec();
        let r = self.abs();
        let re = Float::with_val(p, (Float::with_val(p, &r + &self.re) / 2u32).sqrt());
        let mut im = Float::with_val(p, (Float::with_val(p, &r - &self.re) / 2u32).sqrt());
        if self.im.is_sign_negative() && !self.im.is_zero() {
            im = -im;
        }
        BigComplex { re, im }
    }

    pub fn powi(&self, k: i64) -> Option<Self> {
        let base = if k < 0 { self.recip()? } else { self.clone() };
        let mut e = k.unsigned_abs();
        let mut acc = Self::one(self.prec());
        let mut sq = base;
        while e > 0 {
            if e & 1 == 1 {
                acc = &acc * &sq;
            }
            e >>= 1;
            if e > 0 {
                sq = &sq * &sq;
            }
        }
        Some(acc)
    }

    pub fn dist(&self, other: &Self) -> Float {
        (self - other).abs()
    }

    /// Full-precision decimal strings for the real and imaginary parts.
    pub fn to_decimal_parts(&self) -> (String, String) {
        let digits = decimal_digits(self.prec());
        (self.re.to_string_radix(10, Some(digits)), self.im.to_string_radix(10, Some(digits)))
    }

    pub fn to_f64_pair(&self) -> (f64, f64) {
        (self.re.to_f64(), self.im.to_f64())
    }
}

/// Number of significant decimal digits carried by `prec` bits.
pub fn decimal_digits(prec: u32) -> usize {
    ((prec as f64) * std::f64::consts::LOG10_2).ceil() as usize
}

/// Decimal string for a float, at full precision.
pub fn float_to_decimal(x: &Float) -> String {
    if x.is_zero() {
        return "0".to_string();
    }
    x.to_string_radix(10, Some(decimal_digits(x.prec())))
}

/// Short decimal string, for reporting deviations.
pub fn float_to_short(x: &Float) -> String {
    if x.is_zero() {
        return "0".to_string();
    }
    x.to_string_radix(10, Some(6))
}

/// Parses a positive tolerance such as `"1e-20"`.
pub fn parse_tolerance(s: &str, prec: u32) -> Option<Float> {
    let f = Float::with_val(prec, Float::parse(s.trim()).ok()?);
    if f.is_finite() && f > 0 {
        Some(f)
    } else {
        None
    }
}

/// Parses `"3"`, `"-4/7"` or a decimal such as `"0.25"` into an exact rational.
pub fn parse_rational(s: &str) -> Option<Rational> {
    let s = s.trim();
    if let Ok(r) = s.parse::<Rational>() {
        return Some(r);
    }
    // Decimal notation: split mantissa and exponent by hand so that the
    // conversion stays exact.
    let (mant, exp) = match s.find(['e', 'E']) {
        Some(pos) => (&s[..pos], s[pos + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (neg, mant) = match mant.strip_prefix('-') {
        Some(m) => (true, m),
        None => (false, mant.strip_prefix('+').unwrap_or(mant)),
    };
    let (int_part, frac_part) = match mant.find('.') {
        Some(pos) => (&mant[..pos], &mant[pos + 1..]),
        None => (mant, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{}{}", int_part, frac_part);
    let mut value = Rational::from(digits.parse::<Integer>().ok()?);
    let shift = exp - frac_part.len() as i32;
    let ten = Rational::from(10);
    if shift >= 0 {
        value *= ten.pow(shift as u32);
    } else {
        value /= ten.pow((-shift) as u32);
    }
    if neg {
        value = -value;
    }
    Some(value)
}

/// Best rational approximation with denominator at most `max_den`, accepted
/// only if it lies within `tol` of `x`.
pub fn rationalize(x: &Float, max_den: u64, tol: &Float) -> Option<Rational> {
    let prec = x.prec();
    let mut rem = x.clone();
    // Convergents p_k / q_k.
    let (mut p0, mut q0) = (Integer::from(0), Integer::from(1));
    let (mut p1, mut q1) = (Integer::from(1), Integer::from(0));
    for _ in 0..128 {
        let a = rem.to_integer_round(rug::float::Round::Down)?.0;
        let p2 = Integer::from(&a * &p1) + &p0;
        let q2 = Integer::from(&a * &q1) + &q0;
        if q2 > max_den {
            break;
        }
        let cand = Rational::from((p2.clone(), q2.clone()));
        let err = Float::with_val(prec, x - &cand).abs();
        if err <= *tol {
            return Some(cand);
        }
        p0 = std::mem::replace(&mut p1, p2);
        q0 = std::mem::replace(&mut q1, q2);
        let frac = Float::with_val(prec, &rem - &a);
        if frac.is_zero() {
            break;
        }
        rem.assign(frac.recip());
    }
    None
}

impl Scalar for BigComplex {
    type Ctx = u32;
    const EXACT: bool = false;

    fn ctx(&self) -> u32 {
        self.prec()
    }
    fn merge_ctx(a: u32, b: u32) -> u32 {
        a.min(b)
    }
    fn zero(prec: u32) -> Self {
        BigComplex::zero(prec)
    }
    fn one(prec: u32) -> Self {
        BigComplex::one(prec)
    }
    fn from_rational(r: &Rational, prec: u32) -> Self {
        BigComplex::from_rational(r, prec)
    }
    fn is_zero(&self) -> bool {
        BigComplex::is_zero(self)
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn sub(&self, other: &Self) -> Self {
        self - other
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
    fn neg(&self) -> Self {
        -self
    }
    fn inv(&self) -> Option<Self> {
        self.recip()
    }
    fn mul_rational(&self, r: &Rational) -> Self {
        self.scale_rational(r)
    }
    fn sqrt(&self) -> Option<Self> {
        Some(BigComplex::sqrt(self))
    }
    fn magnitude(&self, prec: u32) -> Float {
        Float::with_val(prec, self.abs())
    }
    fn to_complex(&self, prec: u32) -> BigComplex {
        self.with_prec(prec)
    }
    fn add_assign_product(&mut self, a: &Self, b: &Self) {
        let p = self.prec();
        let rr = Float::with_val(p, &a.re * &b.re);
        let ii = Float::with_val(p, &a.im * &b.im);
        let ri = Float::with_val(p, &a.re * &b.im);
        let ir = Float::with_val(p, &a.im * &b.re);
        self.re += rr;
        self.re -= ii;
        self.im += ri;
        self.im += ir;
    }
}

impl Add for &BigComplex {
    type Output = BigComplex;
    fn add(self, rhs: &BigComplex) -> BigComplex {
        let p = self.prec().min(rhs.prec());
        BigComplex { re: Float::with_val(p, &self.re + &rhs.re), im: Float::with_val(p, &self.im + &rhs.im) }
    }
}

impl Sub for &BigComplex {
    type Output = BigComplex;
    fn sub(self, rhs: &BigComplex) -> BigComplex {
        let p = self.prec().min(rhs.prec());
        BigComplex { re: Float::with_val(p, &self.re - &rhs.re), im: Float::with_val(p, &self.im - &rhs.im) }
    }
}

impl Mul for &BigComplex {
    type Output = BigComplex;
    fn mul(self, rhs: &BigComplex) -> BigComplex {
        let p = self.prec().min(rhs.prec());
        let rr = Float::with_val(p, &self.re * &rhs.re);
        let ii = Float::with_val(p, &self.im * &rhs.im);
        let ri = Float::with_val(p, &self.re * &rhs.im);
        let ir = Float::with_val(p, &self.im * &rhs.re);
        BigComplex { re: rr - ii, im: ri + ir }
    }
}

impl Neg for &BigComplex {
    type Output = BigComplex;
    fn neg(self) -> BigComplex {
        BigComplex { re: -self.re.clone(), im: -self.im.clone() }
    }
}
