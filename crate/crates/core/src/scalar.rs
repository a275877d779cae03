//! Scalar backends.
//!
//! Everything numeric in this crate is generic over [`Real`], which has two
//! implementations: hardware `f64` (53-bit, used for search) and [`MpFloat`],
//! an MPFR-backed float whose mantissa width is chosen at construction (256
//! bits by default, used for refinement and certification).

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use rug::float::Round;
use rug::ops::Pow;
use rug::Float;

use crate::error::{Error, Result};

/// Bits kept out of the absolute tolerance to absorb accumulated rounding.
const SAFETY_MARGIN_BITS: i32 = 10;

/// Working precision of a computation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Precision {
    mantissa_bits: u32,
}

impl Precision {
    pub const DOUBLE: Precision = Precision { mantissa_bits: 53 };
    pub const HIGH: Precision = Precision { mantissa_bits: 256 };

    pub fn new(mantissa_bits: u32) -> Result<Self> {
        if mantissa_bits < 53 {
            return Err(Error::InvalidArgument(format!(
                "mantissa_bits must be at least 53, got {mantissa_bits}"
            )));
        }
        Ok(Precision { mantissa_bits })
    }

    pub fn mantissa_bits(self) -> u32 {
        self.mantissa_bits
    }

    /// Absolute tolerance `2^(-bits + margin)` for quantities of unit scale.
    pub fn abs_tol(self) -> f64 {
        2f64.powi(-(self.mantissa_bits as i32) + SAFETY_MARGIN_BITS)
    }

    /// Same precision with the mantissa doubled; used to re-run certificate
    /// comparisons.
    pub fn doubled(self) -> Precision {
        Precision { mantissa_bits: self.mantissa_bits * 2 }
    }
}

impl Default for Precision {
    fn default() -> Self {
        Precision::HIGH
    }
}

/// Real scalar arithmetic shared by the `f64` and MPFR backends.
pub trait Real:
    Clone
    + fmt::Debug
    + fmt::Display
    + PartialEq
    + PartialOrd
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + for<'a> Add<&'a Self, Output = Self>
    + for<'a> Sub<&'a Self, Output = Self>
    + for<'a> Mul<&'a Self, Output = Self>
    + for<'a> Div<&'a Self, Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + for<'a> AddAssign<&'a Self>
    + for<'a> SubAssign<&'a Self>
    + for<'a> MulAssign<&'a Self>
{
    fn from_f64(x: f64, p: Precision) -> Self;

    /// Exact rational `num/den` rounded once to the working precision.
    fn from_ratio(num: i64, den: i64, p: Precision) -> Self;

    /// Parses a decimal literal at full working precision (no detour through
    /// `f64`).
    fn parse_decimal(s: &str, p: Precision) -> Result<Self>;

    fn precision(&self) -> Precision;
    fn to_f64(&self) -> f64;

    /// Decimal string that round-trips at this value's precision.
    fn to_decimal_string(&self) -> String;

    fn sqrt(&self) -> Self;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn acos(&self) -> Self;
    fn atan2(&self, x: &Self) -> Self;
    fn exp(&self) -> Self;
    fn ln(&self) -> Self;
    fn abs(&self) -> Self;
    fn powi(&self, n: i32) -> Self;
    fn pi(p: Precision) -> Self;
    fn is_finite(&self) -> bool;

    fn zero(p: Precision) -> Self {
        Self::from_f64(0.0, p)
    }

    fn one(p: Precision) -> Self {
        Self::from_f64(1.0, p)
    }

    fn sin_cos(&self) -> (Self, Self) {
        (self.sin(), self.cos())
    }

    fn max_of(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    /// Rounds to the nearest value of `p` bits; identity for `f64`.
    fn round_to(&self, p: Precision) -> Self;
}

impl Real for f64 {
    fn from_f64(x: f64, _p: Precision) -> Self {
        x
    }

    fn from_ratio(num: i64, den: i64, _p: Precision) -> Self {
        num as f64 / den as f64
    }

    fn parse_decimal(s: &str, _p: Precision) -> Result<Self> {
        s.trim()
            .parse::<f64>()
            .map_err(|e| Error::InvalidArgument(format!("cannot parse {s:?} as a real: {e}")))
    }

    fn precision(&self) -> Precision {
        Precision::DOUBLE
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn to_decimal_string(&self) -> String {
        format!("{self:e}")
    }

    fn sqrt(&self) -> Self {
        f64::sqrt(*self)
    }

    fn sin(&self) -> Self {
        f64::sin(*self)
    }

    fn cos(&self) -> Self {
        f64::cos(*self)
    }

    fn acos(&self) -> Self {
        f64::acos(*self)
    }

    fn atan2(&self, x: &Self) -> Self {
        f64::atan2(*self, *x)
    }

    fn exp(&self) -> Self {
        f64::exp(*self)
    }

    fn ln(&self) -> Self {
        f64::ln(*self)
    }

    fn abs(&self) -> Self {
        f64::abs(*self)
    }

    fn powi(&self, n: i32) -> Self {
        f64::powi(*self, n)
    }

    fn pi(_p: Precision) -> Self {
        std::f64::consts::PI
    }

    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }

    fn sin_cos(&self) -> (Self, Self) {
        f64::sin_cos(*self)
    }

    fn round_to(&self, _p: Precision) -> Self {
        *self
    }
}

/// MPFR float with a per-value mantissa width.
///
/// Binary operations produce a result at the wider of the two operand
/// precisions, rounded to nearest.
#[derive(Clone)]
pub struct MpFloat(Float);

impl MpFloat {
    pub fn new(bits: u32, x: f64) -> Self {
        MpFloat(Float::with_val(bits, x))
    }

    pub fn inner(&self) -> &Float {
        &self.0
    }

    fn bits(&self) -> u32 {
        self.0.prec()
    }
}

impl From<Float> for MpFloat {
    fn from(f: Float) -> Self {
        MpFloat(f)
    }
}

impl fmt::Debug for MpFloat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MpFloat({})", self.to_decimal_string())
    }
}

impl fmt::Display for MpFloat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // Short form for logs; use `to_decimal_string` for full precision.
        write!(f, "{}", self.0.to_string_radix(10, Some(20)))
    }
}

impl PartialEq for MpFloat {
    fn eq(&self, other: &Self) -> bool {
        self.0 == other.0
    }
}

impl PartialOrd for MpFloat {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.0.partial_cmp(&other.0)
    }
}

macro_rules! mp_binop {
    ($trait:ident, $method:ident, $assign_trait:ident, $assign_method:ident, $op:tt) => {
        impl<'a> $trait<&'a MpFloat> for &'a MpFloat {
            type Output = MpFloat;
            fn $method(self, rhs: &'a MpFloat) -> MpFloat {
                let bits = self.bits().max(rhs.bits());
                MpFloat(Float::with_val(bits, &self.0 $op &rhs.0))
            }
        }
        impl<'a> $trait<&'a MpFloat> for MpFloat {
            type Output = MpFloat;
            fn $method(self, rhs: &'a MpFloat) -> MpFloat {
                (&self).$method(rhs)
            }
        }
        impl $trait<MpFloat> for MpFloat {
            type Output = MpFloat;
            fn $method(self, rhs: MpFloat) -> MpFloat {
                (&self).$method(&rhs)
            }
        }
        impl<'a> $assign_trait<&'a MpFloat> for MpFloat {
            fn $assign_method(&mut self, rhs: &'a MpFloat) {
                *self = (&*self).$method(rhs);
            }
        }
        impl $assign_trait<MpFloat> for MpFloat {
            fn $assign_method(&mut self, rhs: MpFloat) {
                *self = (&*self).$method(&rhs);
            }
        }
    };
}

mp_binop!(Add, add, AddAssign, add_assign, +);
mp_binop!(Sub, sub, SubAssign, sub_assign, -);
mp_binop!(Mul, mul, MulAssign, mul_assign, *);

impl<'a> Div<&'a MpFloat> for &'a MpFloat {
    type Output = MpFloat;
    fn div(self, rhs: &'a MpFloat) -> MpFloat {
        let bits = self.bits().max(rhs.bits());
        MpFloat(Float::with_val(bits, &self.0 / &rhs.0))
    }
}

impl<'a> Div<&'a MpFloat> for MpFloat {
    type Output = MpFloat;
    fn div(self, rhs: &'a MpFloat) -> MpFloat {
        (&self).div(rhs)
    }
}

impl Div<MpFloat> for MpFloat {
    type Output = MpFloat;
    fn div(self, rhs: MpFloat) -> MpFloat {
        (&self).div(&rhs)
    }
}

impl Neg for MpFloat {
    type Output = MpFloat;
    fn neg(self) -> MpFloat {
        MpFloat(-self.0)
    }
}

impl Real for MpFloat {
    fn from_f64(x: f64, p: Precision) -> Self {
        MpFloat(Float::with_val(p.mantissa_bits(), x))
    }

    fn from_ratio(num: i64, den: i64, p: Precision) -> Self {
        let n = Float::with_val(p.mantissa_bits() + 64, num);
        let q = Float::with_val(p.mantissa_bits(), &n / den);
        MpFloat(q)
    }

    fn parse_decimal(s: &str, p: Precision) -> Result<Self> {
        let parsed = Float::parse(s.trim())
            .map_err(|e| Error::InvalidArgument(format!("cannot parse {s:?} as a real: {e}")))?;
        Ok(MpFloat(Float::with_val(p.mantissa_bits(), parsed)))
    }

    fn precision(&self) -> Precision {
        Precision { mantissa_bits: self.bits() }
    }

    fn to_f64(&self) -> f64 {
        self.0.to_f64()
    }

    fn to_decimal_string(&self) -> String {
        self.0.to_string_radix(10, None)
    }

    fn sqrt(&self) -> Self {
        MpFloat(self.0.clone().sqrt())
    }

    fn sin(&self) -> Self {
        MpFloat(self.0.clone().sin())
    }

    fn cos(&self) -> Self {
        MpFloat(self.0.clone().cos())
    }

    fn acos(&self) -> Self {
        MpFloat(self.0.clone().acos())
    }

    fn atan2(&self, x: &Self) -> Self {
        MpFloat(self.0.clone().atan2(&x.0))
    }

    fn exp(&self) -> Self {
        MpFloat(self.0.clone().exp())
    }

    fn ln(&self) -> Self {
        MpFloat(self.0.clone().ln())
    }

    fn abs(&self) -> Self {
        MpFloat(self.0.clone().abs())
    }

    fn powi(&self, n: i32) -> Self {
        MpFloat(self.0.clone().pow(n))
    }

    fn pi(p: Precision) -> Self {
        MpFloat(Float::with_val(p.mantissa_bits(), rug::float::Constant::Pi))
    }

    fn is_finite(&self) -> bool {
        self.0.is_finite()
    }

    fn sin_cos(&self) -> (Self, Self) {
        let bits = self.bits();
        let (s, c) = self
            .0
            .clone()
            .sin_cos(Float::new(bits));
        (MpFloat(s), MpFloat(c))
    }

    fn round_to(&self, p: Precision) -> Self {
        let mut f = self.0.clone();
        f.set_prec_round(p.mantissa_bits(), Round::Nearest);
        MpFloat(f)
    }
}

/// Complex number over a [`Real`] backend.
#[derive(Clone, Debug, PartialEq)]
pub struct Complex<R> {
    pub re: R,
    pub im: R,
}

impl<R: Real> Complex<R> {
    pub fn new(re: R, im: R) -> Self {
        Complex { re, im }
    }

    pub fn real(re: R) -> Self {
        let im = R::zero(re.precision());
        Complex { re, im }
    }

    pub fn zero(p: Precision) -> Self {
        Complex::new(R::zero(p), R::zero(p))
    }

    pub fn one(p: Precision) -> Self {
        Complex::new(R::one(p), R::zero(p))
    }

    pub fn i(p: Precision) -> Self {
        Complex::new(R::zero(p), R::one(p))
    }

    pub fn from_f64(re: f64, im: f64, p: Precision) -> Self {
        Complex::new(R::from_f64(re, p), R::from_f64(im, p))
    }

    /// `e^{i phi}`.
    pub fn cis(phi: &R) -> Self {
        let (s, c) = phi.sin_cos();
        Complex::new(c, s)
    }

    pub fn conj(&self) -> Self {
        Complex::new(self.re.clone(), -self.im.clone())
    }

    pub fn norm_sqr(&self) -> R {
        self.re.clone() * &self.re + self.im.clone() * &self.im
    }

    pub fn abs(&self) -> R {
        self.norm_sqr().sqrt()
    }

    pub fn arg(&self) -> R {
        self.im.atan2(&self.re)
    }

    pub fn scale(&self, s: &R) -> Self {
        Complex::new(self.re.clone() * s, self.im.clone() * s)
    }

    /// Multiplication by `i`.
    pub fn mul_i(&self) -> Self {
        Complex::new(-self.im.clone(), self.re.clone())
    }

    pub fn inv(&self) -> Self {
        let d = self.norm_sqr();
        Complex::new(self.re.clone() / &d, -self.im.clone() / &d)
    }

    /// Principal square root.
    pub fn sqrt(&self) -> Self {
        let p = self.re.precision();
        let r = self.abs();
        let half = R::from_ratio(1, 2, p);
        let re = ((r.clone() + &self.re) * &half).max_of(R::zero(p)).sqrt();
        let im_mag = ((r - &self.re) * &half).max_of(R::zero(p)).sqrt();
        let im = if self.im < R::zero(p) { -im_mag } else { im_mag };
        Complex::new(re, im)
    }

    pub fn to_f64(&self) -> Complex<f64> {
        Complex::new(self.re.to_f64(), self.im.to_f64())
    }

    pub fn is_finite(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

impl<'a, R: Real> Add<&'a Complex<R>> for &'a Complex<R> {
    type Output = Complex<R>;
    fn add(self, rhs: &'a Complex<R>) -> Complex<R> {
        Complex::new(self.re.clone() + &rhs.re, self.im.clone() + &rhs.im)
    }
}

impl<R: Real> Add for Complex<R> {
    type Output = Complex<R>;
    fn add(self, rhs: Complex<R>) -> Complex<R> {
        Complex::new(self.re + rhs.re, self.im + rhs.im)
    }
}

impl<'a, R: Real> Sub<&'a Complex<R>> for &'a Complex<R> {
    type Output = Complex<R>;
    fn sub(self, rhs: &'a Complex<R>) -> Complex<R> {
        Complex::new(self.re.clone() - &rhs.re, self.im.clone() - &rhs.im)
    }
}

impl<R: Real> Sub for Complex<R> {
    type Output = Complex<R>;
    fn sub(self, rhs: Complex<R>) -> Complex<R> {
        Complex::new(self.re - rhs.re, self.im - rhs.im)
    }
}

impl<'a, R: Real> Mul<&'a Complex<R>> for &'a Complex<R> {
    type Output = Complex<R>;
    fn mul(self, rhs: &'a Complex<R>) -> Complex<R> {
        let re = self.re.clone() * &rhs.re - self.im.clone() * &rhs.im;
        let im = self.re.clone() * &rhs.im + self.im.clone() * &rhs.re;
        Complex::new(re, im)
    }
}

impl<R: Real> Mul for Complex<R> {
    type Output = Complex<R>;
    fn mul(self, rhs: Complex<R>) -> Complex<R> {
        &self * &rhs
    }
}

impl<'a, R: Real> Div<&'a Complex<R>> for &'a Complex<R> {
    type Output = Complex<R>;
    fn div(self, rhs: &'a Complex<R>) -> Complex<R> {
        self * &rhs.inv()
    }
}

impl<R: Real> Neg for Complex<R> {
    type Output = Complex<R>;
    fn neg(self) -> Complex<R> {
        Complex::new(-self.re, -self.im)
    }
}

impl<R: Real> AddAssign<&Complex<R>> for Complex<R> {
    fn add_assign(&mut self, rhs: &Complex<R>) {
        self.re += &rhs.re;
        self.im += &rhs.im;
    }
}

impl<R: Real> SubAssign<&Complex<R>> for Complex<R> {
    fn sub_assign(&mut self, rhs: &Complex<R>) {
        self.re -= &rhs.re;
        self.im -= &rhs.im;
    }
}

/// Converts a list of decimal literals at precision `p`.
pub fn parse_all<R: Real>(values: &[&str], p: Precision) -> Result<Vec<R>> {
    values.iter().map(|s| R::parse_decimal(s, p)).collect()
}
