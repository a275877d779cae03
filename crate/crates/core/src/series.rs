//! Truncated Taylor series in one variable `xi` about 0.
//!
//! Coefficients are stored as plain Taylor coefficients `c_k = f^(k)(0)/k!`.
//! All binary operations require equal truncation order.

use num_bigint::BigInt;
use num_rational::BigRational;

use crate::error::{Error, Result};
use crate::scalar::{Complex, Precision, Real};

/// Degree-`N` Taylor polynomial with complex coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct TruncatedJet<R> {
    coeffs: Vec<Complex<R>>,
}

impl<R: Real> TruncatedJet<R> {
    /// Builds a jet of order `coeffs.len() - 1`. Rejects empty input and
    /// non-finite coefficients.
    pub fn new(coeffs: Vec<Complex<R>>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidArgument("a jet needs at least one coefficient".into()));
        }
        if let Some(k) = coeffs.iter().position(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument(format!("coefficient {k} is not finite")));
        }
        Ok(TruncatedJet { coeffs })
    }

    pub fn from_real(coeffs: Vec<R>) -> Result<Self> {
        Self::new(coeffs.into_iter().map(Complex::real).collect())
    }

    pub fn zero(order: usize, p: Precision) -> Self {
        TruncatedJet { coeffs: vec![Complex::zero(p); order + 1] }
    }

    pub fn constant(c: Complex<R>, order: usize) -> Self {
        let p = c.re.precision();
        let mut jet = Self::zero(order, p);
        jet.coeffs[0] = c;
        jet
    }

    /// The multiplicative identity `(1, 0, ..., 0)`.
    pub fn identity(order: usize, p: Precision) -> Self {
        Self::constant(Complex::one(p), order)
    }

    /// The jet of `xi` itself.
    pub fn variable(order: usize, p: Precision) -> Self {
        let mut jet = Self::zero(order, p);
        if order >= 1 {
            jet.coeffs[1] = Complex::one(p);
        }
        jet
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[Complex<R>] {
        &self.coeffs
    }

    pub fn coeff(&self, k: usize) -> &Complex<R> {
        &self.coeffs[k]
    }

    pub fn precision(&self) -> Precision {
        self.coeffs[0].re.precision()
    }

    pub fn real_parts(&self) -> Vec<R> {
        self.coeffs.iter().map(|c| c.re.clone()).collect()
    }

    fn check_order(&self, other: &Self) -> Result<()> {
        if self.order() != other.order() {
            return Err(Error::OrderMismatch { left: self.order(), right: other.order() });
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_order(other)?;
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect();
        Ok(TruncatedJet { coeffs })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_order(other)?;
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a - b).collect();
        Ok(TruncatedJet { coeffs })
    }

    /// Truncated Cauchy product.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_order(other)?;
        let n = self.order();
        let p = self.precision();
        let mut coeffs = Vec::with_capacity(n + 1);
        for k in 0..=n {
            let mut acc = Complex::zero(p);
            for i in 0..=k {
                acc += &(&self.coeffs[i] * &other.coeffs[k - i]);
            }
            coeffs.push(acc);
        }
        Ok(TruncatedJet { coeffs })
    }

    pub fn scale(&self, s: &Complex<R>) -> Self {
        TruncatedJet { coeffs: self.coeffs.iter().map(|c| c * s).collect() }
    }

    pub fn scale_real(&self, s: &R) -> Self {
        TruncatedJet { coeffs: self.coeffs.iter().map(|c| c.scale(s)).collect() }
    }

    pub fn neg(&self) -> Self {
        TruncatedJet { coeffs: self.coeffs.iter().cloned().map(|c| -c).collect() }
    }

    pub fn conj(&self) -> Self {
        TruncatedJet { coeffs: self.coeffs.iter().map(Complex::conj).collect() }
    }

    /// Multiplication by `i`.
    pub fn mul_i(&self) -> Self {
        TruncatedJet { coeffs: self.coeffs.iter().map(Complex::mul_i).collect() }
    }

    /// Multiplication by `xi`, dropping the coefficient pushed past the order.
    pub fn mul_xi(&self) -> Self {
        let p = self.precision();
        let mut coeffs = Vec::with_capacity(self.coeffs.len());
        coeffs.push(Complex::zero(p));
        coeffs.extend(self.coeffs[..self.order()].iter().cloned());
        TruncatedJet { coeffs }
    }

    /// Drops every coefficient above `order`.
    pub fn truncate(&self, order: usize) -> Result<Self> {
        if order > self.order() {
            return Err(Error::InvalidArgument(format!(
                "cannot truncate an order-{} jet to order {order}",
                self.order()
            )));
        }
        Ok(TruncatedJet { coeffs: self.coeffs[..=order].to_vec() })
    }

    /// Quotient `self / other`; the divisor must have a non-zero constant term.
    pub fn div(&self, other: &Self) -> Result<Self> {
        self.check_order(other)?;
        let b0 = &other.coeffs[0];
        if b0.norm_sqr() == R::zero(self.precision()) {
            return Err(Error::InvalidArgument("division by a jet with zero constant term".into()));
        }
        let inv_b0 = b0.inv();
        let mut q: Vec<Complex<R>> = Vec::with_capacity(self.coeffs.len());
        for k in 0..=self.order() {
            let mut acc = self.coeffs[k].clone();
            for j in 1..=k {
                acc -= &(&other.coeffs[j] * &q[k - j]);
            }
            q.push(&acc * &inv_b0);
        }
        Ok(TruncatedJet { coeffs: q })
    }

    /// Principal square root; the constant term must be non-zero.
    pub fn sqrt(&self) -> Result<Self> {
        let p = self.precision();
        let a0 = &self.coeffs[0];
        if a0.norm_sqr() == R::zero(p) {
            return Err(Error::InvalidArgument("square root of a jet with zero constant term".into()));
        }
        let s0 = a0.sqrt();
        let inv_2s0 = (&s0 + &s0).inv();
        let mut s = vec![s0];
        for k in 1..=self.order() {
            let mut acc = self.coeffs[k].clone();
            for j in 1..k {
                acc -= &(&s[j] * &s[k - j]);
            }
            s.push(&acc * &inv_2s0);
        }
        Ok(TruncatedJet { coeffs: s })
    }

    /// `(sin f, cos f)` for a jet `f` whose constant term is real.
    pub fn sin_cos(&self) -> Result<(Self, Self)> {
        let p = self.precision();
        let f0 = &self.coeffs[0];
        if f0.im.abs().to_f64() > p.abs_tol() * (1.0 + f0.re.abs().to_f64()) {
            return Err(Error::InvalidArgument(
                "sin/cos of a jet requires a real constant term".into(),
            ));
        }
        let (s0, c0) = f0.re.sin_cos();
        let mut s = vec![Complex::real(s0)];
        let mut c = vec![Complex::real(c0)];
        // k s_k = sum_j j f_j c_{k-j},  k c_k = -sum_j j f_j s_{k-j}
        for k in 1..=self.order() {
            let mut sk = Complex::zero(p);
            let mut ck = Complex::zero(p);
            for j in 1..=k {
                let jf = self.coeffs[j].scale(&R::from_f64(j as f64, p));
                sk += &(&jf * &c[k - j]);
                ck -= &(&jf * &s[k - j]);
            }
            let inv_k = R::from_ratio(1, k as i64, p);
            s.push(sk.scale(&inv_k));
            c.push(ck.scale(&inv_k));
        }
        Ok((TruncatedJet { coeffs: s }, TruncatedJet { coeffs: c }))
    }

    /// Derivative in `xi`; the result has order `N - 1` (order 0 stays 0).
    pub fn derivative(&self) -> Self {
        let p = self.precision();
        if self.order() == 0 {
            return Self::zero(0, p);
        }
        let coeffs = (1..=self.order())
            .map(|k| self.coeffs[k].scale(&R::from_f64(k as f64, p)))
            .collect();
        TruncatedJet { coeffs }
    }

    /// Antiderivative with the given constant term; the result has order `N + 1`.
    pub fn integrate(&self, constant: Complex<R>) -> Self {
        let p = self.precision();
        let mut coeffs = Vec::with_capacity(self.coeffs.len() + 1);
        coeffs.push(constant);
        for (k, c) in self.coeffs.iter().enumerate() {
            coeffs.push(c.scale(&R::from_ratio(1, k as i64 + 1, p)));
        }
        TruncatedJet { coeffs }
    }

    /// Horner evaluation at a real point.
    pub fn evaluate(&self, xi: &R) -> Complex<R> {
        let mut acc = self.coeffs[self.order()].clone();
        for c in self.coeffs[..self.order()].iter().rev() {
            acc = &acc.scale(xi) + c;
        }
        acc
    }

    /// `k`-th derivative at 0, i.e. `k! c_k`.
    pub fn derivative_at_zero(&self, k: usize) -> Complex<R> {
        let p = self.precision();
        let mut fact = R::one(p);
        for j in 2..=k {
            fact *= R::from_f64(j as f64, p);
        }
        self.coeffs[k].scale(&fact)
    }

    /// Largest coefficient modulus.
    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.abs().to_f64()).fold(0.0, f64::max)
    }

    /// Largest imaginary part in absolute value.
    pub fn max_imag(&self) -> f64 {
        self.coeffs.iter().map(|c| c.im.abs().to_f64()).fold(0.0, f64::max)
    }

    /// Largest modulus among odd-degree coefficients.
    pub fn max_odd(&self) -> f64 {
        self.coeffs.iter().skip(1).step_by(2).map(|c| c.abs().to_f64()).fold(0.0, f64::max)
    }

    /// Largest modulus among even-degree coefficients.
    pub fn max_even(&self) -> f64 {
        self.coeffs.iter().step_by(2).map(|c| c.abs().to_f64()).fold(0.0, f64::max)
    }

    /// Largest coefficient-wise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        Ok(self.sub(other)?.max_abs())
    }

    pub fn round_to(&self, p: Precision) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .map(|c| Complex::new(c.re.round_to(p), c.im.round_to(p)))
            .collect();
        TruncatedJet { coeffs }
    }
}

/// Coefficients of `(1 + u)^(num/2)` in powers of `u` through `u^kmax`.
fn half_integer_binomials<R: Real>(num: i64, kmax: usize, p: Precision) -> Vec<R> {
    let mut out = Vec::with_capacity(kmax + 1);
    let mut c = R::one(p);
    out.push(c.clone());
    for k in 1..=kmax as i64 {
        // binom(a, k) = binom(a, k-1) (a - k + 1) / k with a = num / 2
        c = c * R::from_ratio(num - 2 * k + 2, 2 * k, p);
        out.push(c.clone());
    }
    out
}

/// Jet of `(1 + xi^2)^(num/2)`: only even slots are populated.
fn even_power_jet<R: Real>(num: i64, order: usize, p: Precision) -> TruncatedJet<R> {
    let binoms = half_integer_binomials::<R>(num, order / 2, p);
    let mut jet = TruncatedJet::zero(order, p);
    for (k, b) in binoms.into_iter().enumerate() {
        jet.coeffs[2 * k] = Complex::real(b);
    }
    jet
}

/// Taylor jet of `omega(xi) = sqrt(1 + xi^2)`.
pub fn omega_jet<R: Real>(order: usize, p: Precision) -> TruncatedJet<R> {
    even_power_jet(1, order, p)
}

/// Taylor jet of `1 / omega(xi) = (1 + xi^2)^(-1/2)`.
pub fn inv_omega_jet<R: Real>(order: usize, p: Precision) -> TruncatedJet<R> {
    even_power_jet(-1, order, p)
}

/// Exact rational Taylor coefficients of `(1 + xi^2)^(num/2)`.
fn even_power_exact(num: i64, order: usize) -> Vec<BigRational> {
    let zero = BigRational::from_integer(BigInt::from(0));
    let mut out = vec![zero; order + 1];
    let mut c = BigRational::from_integer(BigInt::from(1));
    out[0] = c.clone();
    for k in 1..=(order / 2) as i64 {
        c = c * BigRational::new(BigInt::from(num - 2 * k + 2), BigInt::from(2 * k));
        out[2 * k as usize] = c.clone();
    }
    out
}

/// Exact rational coefficients of the `omega` jet.
pub fn omega_jet_exact(order: usize) -> Vec<BigRational> {
    even_power_exact(1, order)
}

/// Exact rational coefficients of the `1/omega` jet.
pub fn inv_omega_jet_exact(order: usize) -> Vec<BigRational> {
    even_power_exact(-1, order)
}

/// Truncated product of two exact rational coefficient lists of equal length.
pub fn rational_mul(a: &[BigRational], b: &[BigRational]) -> Result<Vec<BigRational>> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::OrderMismatch {
            left: a.len().saturating_sub(1),
            right: b.len().saturating_sub(1),
        });
    }
    let zero = BigRational::from_integer(BigInt::from(0));
    Ok((0..a.len())
        .map(|k| (0..=k).fold(zero.clone(), |acc, i| acc + &a[i] * &b[k - i]))
        .collect())
}

/// `(sin(t omega), cos(t omega))` jets.
///
/// Uses `cos(t w) = cos t cos(t(w-1)) - sin t sin(t(w-1))` (and the matching
/// sine identity) so the composed inner jet `t(w - 1)` has zero constant term.
pub fn sin_cos_t_omega_jet<R: Real>(
    t: &R,
    order: usize,
    p: Precision,
) -> (TruncatedJet<R>, TruncatedJet<R>) {
    let mut inner = omega_jet::<R>(order, p).scale_real(t);
    inner.coeffs[0] = Complex::zero(p);
    let (s_in, c_in) = inner.sin_cos().expect("inner jet has a zero constant term");
    let (st, ct) = t.sin_cos();
    let cos_jet = c_in
        .scale_real(&ct)
        .sub(&s_in.scale_real(&st))
        .expect("equal orders");
    let sin_jet = c_in
        .scale_real(&st)
        .add(&s_in.scale_real(&ct))
        .expect("equal orders");
    (sin_jet, cos_jet)
}

/// Jet of `cos(t omega(xi))`.
pub fn cos_t_omega_jet<R: Real>(t: &R, order: usize, p: Precision) -> TruncatedJet<R> {
    sin_cos_t_omega_jet(t, order, p).1
}

/// Jet of `sin(t omega(xi))`.
pub fn sin_t_omega_jet<R: Real>(t: &R, order: usize, p: Precision) -> TruncatedJet<R> {
    sin_cos_t_omega_jet(t, order, p).0
}
