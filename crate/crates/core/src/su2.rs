//! Letters, words and their monodromy in SU(2).
//!
//! A letter is the constant-mass propagator
//! `g_s(t, xi) = cos(w t) I + i sin(w t)/w (s sigma_1 + xi sigma_3)` with
//! `w = sqrt(1 + xi^2)`, i.e. `exp(t a_s(xi))` for the generator
//! `a_s(xi) = i s sigma_1 + i xi sigma_3`. A word applies its letters
//! right-to-left: `M = g_m ... g_1`, so the first letter acts first.

use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::{Complex, Precision, Real};
use crate::series::{inv_omega_jet, sin_cos_t_omega_jet, TruncatedJet};

/// Sign of the mass term on one interval.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> i64 {
        match self {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }

    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }

    pub fn from_value(v: i64) -> Result<Sign> {
        match v {
            1 => Ok(Sign::Plus),
            -1 => Ok(Sign::Minus),
            other => Err(Error::InvalidArgument(format!("sign must be +1 or -1, got {other}"))),
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sign::Plus => "+",
            Sign::Minus => "-",
        })
    }
}

/// Signed durations of the piecewise-constant forcing over one period.
#[derive(Clone, Debug, PartialEq)]
pub struct Word<R> {
    letters: Vec<(Sign, R)>,
}

impl<R: Real> Word<R> {
    pub fn new(letters: Vec<(Sign, R)>) -> Result<Self> {
        if letters.is_empty() {
            return Err(Error::InvalidArgument("a word needs at least one letter".into()));
        }
        for (j, (_, t)) in letters.iter().enumerate() {
            if !t.is_finite() || *t <= R::zero(t.precision()) {
                return Err(Error::InvalidArgument(format!(
                    "duration {j} must be positive and finite, got {t}"
                )));
            }
        }
        Ok(Word { letters })
    }

    /// The 4-letter word with signs `(+, -, +, -)`.
    pub fn alternating4(durations: &[R; 4]) -> Result<Self> {
        let signs = [Sign::Plus, Sign::Minus, Sign::Plus, Sign::Minus];
        Word::new(signs.into_iter().zip(durations.iter().cloned()).collect())
    }

    pub fn single(sign: Sign, t: R) -> Result<Self> {
        Word::new(vec![(sign, t)])
    }

    pub fn letters(&self) -> &[(Sign, R)] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn durations(&self) -> Vec<R> {
        self.letters.iter().map(|(_, t)| t.clone()).collect()
    }

    pub fn signs(&self) -> Vec<Sign> {
        self.letters.iter().map(|(s, _)| *s).collect()
    }

    pub fn total_period(&self) -> R {
        let p = self.precision();
        self.letters.iter().fold(R::zero(p), |acc, (_, t)| acc + t)
    }

    /// True iff consecutive signs differ.
    pub fn is_alternating(&self) -> bool {
        self.letters.windows(2).all(|w| w[0].0 != w[1].0)
    }

    pub fn precision(&self) -> Precision {
        self.letters[0].1.precision()
    }

    /// Rotates the letters left by `k` positions.
    pub fn cyclic_shift(&self, k: usize) -> Word<R> {
        let mut letters = self.letters.clone();
        letters.rotate_left(k % self.len());
        Word { letters }
    }

    /// Same word with every duration replaced.
    pub fn with_durations(&self, durations: &[R]) -> Result<Word<R>> {
        if durations.len() != self.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} durations, got {}",
                self.len(),
                durations.len()
            )));
        }
        Word::new(self.signs().into_iter().zip(durations.iter().cloned()).collect())
    }
}

/// A 2x2 complex matrix; words and letters are in SU(2), diagonalizers are
/// unitary.
#[derive(Clone, Debug, PartialEq)]
pub struct UnitaryMatrix2<R> {
    pub m: [[Complex<R>; 2]; 2],
}

impl<R: Real> UnitaryMatrix2<R> {
    pub fn new(m: [[Complex<R>; 2]; 2]) -> Self {
        UnitaryMatrix2 { m }
    }

    pub fn identity(p: Precision) -> Self {
        UnitaryMatrix2::new([
            [Complex::one(p), Complex::zero(p)],
            [Complex::zero(p), Complex::one(p)],
        ])
    }

    pub fn precision(&self) -> Precision {
        self.m[0][0].re.precision()
    }

    pub fn mul(&self, other: &Self) -> Self {
        let e = |i: usize, j: usize| &(&self.m[i][0] * &other.m[0][j]) + &(&self.m[i][1] * &other.m[1][j]);
        UnitaryMatrix2::new([[e(0, 0), e(0, 1)], [e(1, 0), e(1, 1)]])
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        UnitaryMatrix2::new([
            [self.m[0][0].conj(), self.m[1][0].conj()],
            [self.m[0][1].conj(), self.m[1][1].conj()],
        ])
    }

    /// Entrywise complex conjugate.
    pub fn conj(&self) -> Self {
        UnitaryMatrix2::new([
            [self.m[0][0].conj(), self.m[0][1].conj()],
            [self.m[1][0].conj(), self.m[1][1].conj()],
        ])
    }

    pub fn trace(&self) -> Complex<R> {
        &self.m[0][0] + &self.m[1][1]
    }

    /// `Tr(U) / 2`.
    pub fn half_trace(&self) -> Complex<R> {
        self.trace().scale(&R::from_ratio(1, 2, self.precision()))
    }

    pub fn det(&self) -> Complex<R> {
        &(&self.m[0][0] * &self.m[1][1]) - &(&self.m[0][1] * &self.m[1][0])
    }

    /// Largest entry modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..2 {
            for j in 0..2 {
                worst = worst.max((&self.m[i][j] - &other.m[i][j]).abs().to_f64());
            }
        }
        worst
    }

    /// Frobenius norm of `U U* - I`.
    pub fn unitarity_defect(&self) -> f64 {
        let p = self.precision();
        let g = self.mul(&self.adjoint());
        let d = UnitaryMatrix2::identity(p);
        let mut sum = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                sum += (&g.m[i][j] - &d.m[i][j]).norm_sqr().to_f64();
            }
        }
        sum.sqrt()
    }

    /// `|det U - 1|`.
    pub fn det_defect(&self) -> f64 {
        (&self.det() - &Complex::one(self.precision())).abs().to_f64()
    }

    pub fn to_f64(&self) -> UnitaryMatrix2<f64> {
        UnitaryMatrix2::new([
            [self.m[0][0].to_f64(), self.m[0][1].to_f64()],
            [self.m[1][0].to_f64(), self.m[1][1].to_f64()],
        ])
    }
}

/// Closed-form letter `g_sign(t, xi)`.
pub fn letter_at<R: Real>(sign: Sign, t: &R, xi: &R) -> UnitaryMatrix2<R> {
    let p = t.precision().max_bits(xi.precision());
    let w = (R::one(p) + xi.clone() * xi).sqrt();
    let (s, c) = (w.clone() * t).sin_cos();
    let sw = s / &w;
    let s_sign = R::from_f64(sign.value() as f64, p) * &sw;
    let diag_im = sw * xi;
    UnitaryMatrix2::new([
        [Complex::new(c.clone(), diag_im.clone()), Complex::new(R::zero(p), s_sign.clone())],
        [Complex::new(R::zero(p), s_sign), Complex::new(c, -diag_im)],
    ])
}

/// Monodromy `M(xi) = g_m ... g_1`.
pub fn word_at<R: Real>(word: &Word<R>, xi: &R) -> UnitaryMatrix2<R> {
    let p = word.precision().max_bits(xi.precision());
    word.letters()
        .iter()
        .fold(UnitaryMatrix2::identity(p), |acc, (s, t)| letter_at(*s, t, xi).mul(&acc))
}

/// 2x2 matrix of truncated jets sharing one order.
#[derive(Clone, Debug, PartialEq)]
pub struct MatrixJet<R> {
    pub e: [[TruncatedJet<R>; 2]; 2],
}

impl<R: Real> MatrixJet<R> {
    pub fn identity(order: usize, p: Precision) -> Self {
        MatrixJet {
            e: [
                [TruncatedJet::identity(order, p), TruncatedJet::zero(order, p)],
                [TruncatedJet::zero(order, p), TruncatedJet::identity(order, p)],
            ],
        }
    }

    pub fn order(&self) -> usize {
        self.e[0][0].order()
    }

    pub fn precision(&self) -> Precision {
        self.e[0][0].precision()
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        let entry = |i: usize, j: usize| -> Result<TruncatedJet<R>> {
            self.e[i][0].mul(&other.e[0][j])?.add(&self.e[i][1].mul(&other.e[1][j])?)
        };
        Ok(MatrixJet { e: [[entry(0, 0)?, entry(0, 1)?], [entry(1, 0)?, entry(1, 1)?]] })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        let entry = |i: usize, j: usize| self.e[i][j].add(&other.e[i][j]);
        Ok(MatrixJet { e: [[entry(0, 0)?, entry(0, 1)?], [entry(1, 0)?, entry(1, 1)?]] })
    }

    /// Jet of `Tr / 2`.
    pub fn half_trace(&self) -> TruncatedJet<R> {
        let half = R::from_ratio(1, 2, self.precision());
        self.e[0][0].add(&self.e[1][1]).expect("entries share an order").scale_real(&half)
    }

    /// Constant coefficients, i.e. the matrix at `xi = 0`.
    pub fn at_zero(&self) -> UnitaryMatrix2<R> {
        self.evaluate(&R::zero(self.precision()))
    }

    pub fn evaluate(&self, xi: &R) -> UnitaryMatrix2<R> {
        UnitaryMatrix2::new([
            [self.e[0][0].evaluate(xi), self.e[0][1].evaluate(xi)],
            [self.e[1][0].evaluate(xi), self.e[1][1].evaluate(xi)],
        ])
    }

    /// Largest coefficient modulus over all entries.
    pub fn max_abs(&self) -> f64 {
        self.e.iter().flatten().map(TruncatedJet::max_abs).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        let mut worst = 0.0f64;
        for i in 0..2 {
            for j in 0..2 {
                worst = worst.max(self.e[i][j].max_abs_diff(&other.e[i][j])?);
            }
        }
        Ok(worst)
    }
}

/// Generator `a_sign(xi) = i sign sigma_1 + i xi sigma_3` as a matrix jet.
pub fn generator_jet<R: Real>(sign: Sign, order: usize, p: Precision) -> MatrixJet<R> {
    let xi = TruncatedJet::<R>::variable(order, p).mul_i();
    let off = TruncatedJet::constant(Complex::new(R::zero(p), R::from_f64(sign.value() as f64, p)), order);
    MatrixJet { e: [[xi.clone(), off.clone()], [off, xi.neg()]] }
}

/// Matrix jet of `g_sign(t, xi)` about `xi = 0`.
pub fn letter_jet<R: Real>(sign: Sign, t: &R, order: usize, p: Precision) -> MatrixJet<R> {
    let (sin_tw, cos_tw) = sin_cos_t_omega_jet(t, order, p);
    // i sin(w t) / w
    let i_s = sin_tw.mul(&inv_omega_jet(order, p)).expect("equal orders").mul_i();
    let i_s_xi = i_s.mul_xi();
    let off = i_s.scale_real(&R::from_f64(sign.value() as f64, p));
    MatrixJet {
        e: [
            [cos_tw.add(&i_s_xi).expect("equal orders"), off.clone()],
            [off, cos_tw.sub(&i_s_xi).expect("equal orders")],
        ],
    }
}

/// Matrix jet of the monodromy `M(xi)`.
pub fn word_jet<R: Real>(word: &Word<R>, order: usize, p: Precision) -> MatrixJet<R> {
    word.letters().iter().fold(MatrixJet::identity(order, p), |acc, (s, t)| {
        letter_jet(*s, t, order, p).mul(&acc).expect("equal orders")
    })
}

/// Even Taylor coefficients of `F(xi) = Tr M(xi) / 2`.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceJet<R> {
    /// `a_0, a_2, ..., a_2K`.
    pub even_coefficients: Vec<R>,
    /// Unsymmetrized half-trace jet, kept for diagnostics.
    pub raw: TruncatedJet<R>,
    /// Largest odd-degree coefficient modulus seen in `raw`.
    pub odd_residual_max: f64,
}

impl<R: Real> TraceJet<R> {
    /// `a_{degree}`; odd degrees read the raw jet.
    pub fn coefficient(&self, degree: usize) -> R {
        if degree % 2 == 0 {
            self.even_coefficients[degree / 2].clone()
        } else {
            self.raw.coeff(degree).re.clone()
        }
    }

    pub fn a0(&self) -> &R {
        &self.even_coefficients[0]
    }

    /// Real jet with the validated even coefficients and zeros in odd slots.
    pub fn even_jet(&self) -> TruncatedJet<R> {
        let p = self.raw.precision();
        let mut coeffs = vec![R::zero(p); self.raw.order() + 1];
        for (k, a) in self.even_coefficients.iter().enumerate() {
            coeffs[2 * k] = a.clone();
        }
        TruncatedJet::from_real(coeffs).expect("finite coefficients")
    }
}

/// Tolerance for parity and reality checks on jets of magnitude `scale`.
pub(crate) fn consistency_tol(p: Precision, scale: f64) -> f64 {
    1e3 * p.abs_tol() * scale.max(1.0)
}

/// Half-trace jet of a word's monodromy, validated for evenness and reality.
///
/// Odd-degree and imaginary parts are checked against `10^3 abs_tol` scaled by
/// the largest coefficient of `mj`; they are not zeroed.
pub fn trace_jet<R: Real>(mj: &MatrixJet<R>, p: Precision) -> Result<TraceJet<R>> {
    let raw = mj.half_trace();
    let tol = consistency_tol(p, mj.max_abs());
    let odd = raw.max_odd();
    if odd > tol {
        return Err(Error::InternalConsistency(format!(
            "odd trace coefficient {odd:e} exceeds {tol:e}"
        )));
    }
    let imag = raw.max_imag();
    if imag > tol {
        return Err(Error::InternalConsistency(format!(
            "imaginary trace part {imag:e} exceeds {tol:e}"
        )));
    }
    let a0 = raw.coeff(0).re.abs().to_f64();
    if a0 > 1.0 + tol {
        return Err(Error::InternalConsistency(format!("|a_0| = {a0} exceeds 1")));
    }
    let even_coefficients = raw.coeffs().iter().step_by(2).map(|c| c.re.clone()).collect();
    Ok(TraceJet { even_coefficients, raw, odd_residual_max: odd })
}

/// Jets of `dM/dt_j` for every letter `j`, by inserting the generator:
/// `dM/dt_j = g_m ... g_{j+1} a_j g_j g_{j-1} ... g_1`.
pub fn word_t_jacobian_jet<R: Real>(word: &Word<R>, order: usize, p: Precision) -> Vec<MatrixJet<R>> {
    let letters: Vec<MatrixJet<R>> =
        word.letters().iter().map(|(s, t)| letter_jet(*s, t, order, p)).collect();
    let m = letters.len();
    // prefix[j] = g_j ... g_1 (letters 0..j inclusive), suffix[j] = g_m ... g_{j+2}
    let mut prefix = Vec::with_capacity(m);
    let mut acc = MatrixJet::identity(order, p);
    for g in &letters {
        acc = g.mul(&acc).expect("equal orders");
        prefix.push(acc.clone());
    }
    let mut suffix = vec![MatrixJet::identity(order, p); m];
    for j in (0..m.saturating_sub(1)).rev() {
        suffix[j] = suffix[j + 1].mul(&letters[j + 1]).expect("equal orders");
    }
    word.letters()
        .iter()
        .enumerate()
        .map(|(j, (s, _))| {
            let inserted = generator_jet(*s, order, p).mul(&prefix[j]).expect("equal orders");
            suffix[j].mul(&inserted).expect("equal orders")
        })
        .collect()
}

/// Classical RK4 integration of `i dU/dt = (xi sigma_3 + m(t) sigma_1) U`
/// over consecutive constant-mass segments, starting from the identity.
///
/// This is the physical propagator of the Fourier-reduced Dirac system; the
/// closed-form word `word_at` equals its entrywise complex conjugate (the
/// letters are written as `exp(+t a)`), which leaves traces unchanged.
/// Steps are distributed over segments in proportion to their durations so
/// that no step straddles a switch.
pub fn ode_oracle(segments: &[(Sign, f64)], xi: f64, steps: usize) -> Result<UnitaryMatrix2<f64>> {
    if steps < 1000 {
        return Err(Error::InvalidArgument(format!("ode_oracle needs at least 1000 steps, got {steps}")));
    }
    if segments.iter().any(|(_, t)| !t.is_finite() || *t < 0.0) {
        return Err(Error::InvalidArgument("segment durations must be finite and non-negative".into()));
    }
    let p = Precision::DOUBLE;
    let total: f64 = segments.iter().map(|(_, t)| t).sum();
    let mut u = UnitaryMatrix2::<f64>::identity(p);
    if total == 0.0 {
        return Ok(u);
    }
    for (sign, t) in segments {
        if *t == 0.0 {
            continue;
        }
        let n = ((steps as f64) * t / total).round().max(1.0) as usize;
        let h = t / n as f64;
        let m = sign.value() as f64;
        // A = -i (xi sigma_3 + m sigma_1)
        let a = UnitaryMatrix2::new([
            [Complex::new(0.0, -xi), Complex::new(0.0, -m)],
            [Complex::new(0.0, -m), Complex::new(0.0, xi)],
        ]);
        let f = |v: &UnitaryMatrix2<f64>| a.mul(v);
        for _ in 0..n {
            let k1 = f(&u);
            let k2 = f(&axpy(&u, h / 2.0, &k1));
            let k3 = f(&axpy(&u, h / 2.0, &k2));
            let k4 = f(&axpy(&u, h, &k3));
            let mut next = u.clone();
            for i in 0..2 {
                for j in 0..2 {
                    let incr = &(&k1.m[i][j] + &k2.m[i][j].scale(&2.0))
                        + &(&k3.m[i][j].scale(&2.0) + &k4.m[i][j]);
                    next.m[i][j] += &incr.scale(&(h / 6.0));
                }
            }
            u = next;
        }
    }
    Ok(u)
}

fn axpy(u: &UnitaryMatrix2<f64>, h: f64, k: &UnitaryMatrix2<f64>) -> UnitaryMatrix2<f64> {
    let mut out = u.clone();
    for i in 0..2 {
        for j in 0..2 {
            out.m[i][j] += &k.m[i][j].scale(&h);
        }
    }
    out
}

trait MaxBits {
    fn max_bits(self, other: Precision) -> Precision;
}

impl MaxBits for Precision {
    fn max_bits(self, other: Precision) -> Precision {
        if other.mantissa_bits() > self.mantissa_bits() {
            other
        } else {
            self
        }
    }
}
