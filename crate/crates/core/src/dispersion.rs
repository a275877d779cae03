//! Floquet exponent, flatness order, oscillatory amplitudes and decay fits.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::quadrature::{integrate_complex, GaussLegendre};
use crate::scalar::{Complex, Precision, Real};
use crate::series::TruncatedJet;
use crate::su2::{trace_jet, word_at, word_jet, TraceJet, UnitaryMatrix2, Word};

/// Default analysis jet order.
pub const DEFAULT_ORDER: usize = 12;

/// Gauss-Legendre nodes per panel in amplitude quadrature.
const PANEL_NODES: usize = 16;

/// Relative change accepted between successive panel doublings.
pub const QUADRATURE_RTOL: f64 = 1e-6;

/// Number of panel doublings attempted before giving up.
const MAX_DOUBLINGS: usize = 8;

/// Flatness threshold used when none is configured.
pub fn default_flatness_tol(p: Precision) -> f64 {
    if p.mantissa_bits() <= 53 {
        1e-15
    } else {
        1e-40
    }
}

fn check_branch<R: Real>(a0: &R, p: Precision) -> Result<()> {
    let abs = a0.abs().to_f64();
    if abs >= 1.0 - 10.0 * p.abs_tol() {
        return Err(Error::BranchDegeneracy { abs_a0: abs });
    }
    Ok(())
}

/// Jet of `theta = arccos F` about zero, from `theta' = -F' / sqrt(1 - F^2)`.
pub fn theta_jet<R: Real>(tj: &TraceJet<R>, p: Precision) -> Result<TruncatedJet<R>> {
    check_branch(tj.a0(), p)?;
    let f = tj.even_jet();
    let order = f.order();
    if order == 0 {
        return Ok(TruncatedJet::from_real(vec![tj.a0().acos()])?);
    }
    let df = f.derivative();
    let f_low = f.truncate(order - 1)?;
    let one = TruncatedJet::constant(Complex::one(p), order - 1);
    let root = one.sub(&f_low.mul(&f_low)?)?.sqrt()?;
    let dtheta = df.div(&root)?.neg();
    Ok(dtheta.integrate(Complex::real(tj.a0().acos())))
}

/// `cos(theta_jet)` compared with the even trace jet; maximal coefficient gap.
pub fn recomposition_defect<R: Real>(theta: &TruncatedJet<R>, tj: &TraceJet<R>) -> Result<f64> {
    let (_, c) = theta.sin_cos()?;
    c.max_abs_diff(&tj.even_jet().truncate(theta.order())?)
}

/// Smallest `j >= 2` with `|theta^(j)(0)| > tol`, together with that derivative.
pub fn flatness_order<R: Real>(theta: &TruncatedJet<R>, tol: f64) -> Result<(usize, R)> {
    let order = theta.order();
    for j in 2..=order {
        let d = theta.derivative_at_zero(j).re;
        if d.abs().to_f64() > tol {
            if j + 2 > order {
                break;
            }
            return Ok((j, d));
        }
    }
    Err(Error::IndeterminateOrder { order, tol })
}

/// `(theta, F)` at one frequency, with `theta` on the principal branch.
pub fn theta_at<R: Real>(word: &Word<R>, xi: &R, p: Precision) -> Result<(R, R)> {
    let f = word_at(word, xi).half_trace().re;
    let abs = f.abs().to_f64();
    if abs > 1.0 + 10.0 * p.abs_tol() {
        return Err(Error::InternalConsistency(format!("|F| = {abs} exceeds 1 at xi = {xi}")));
    }
    let one = R::one(p);
    let clamped = if f > one {
        one
    } else if f < -one.clone() {
        -one
    } else {
        f.clone()
    };
    Ok((clamped.acos(), f))
}

/// One sample of the dispersion curve.
#[derive(Clone, Debug, PartialEq)]
pub struct ThetaSample<R> {
    pub xi: R,
    pub theta: R,
    pub f: R,
}

/// Symmetric grid `xi_i = xi_max (2i - (n-1)) / (n-1)` with `theta` unwrapped
/// by continuity from the sample nearest zero.
pub fn theta_grid<R: Real>(
    word: &Word<R>,
    xi_max: f64,
    n_points: usize,
    p: Precision,
) -> Result<Vec<ThetaSample<R>>> {
    if n_points < 2 {
        return Err(Error::InvalidArgument("grid needs at least two points".into()));
    }
    if !(xi_max > 0.0 && xi_max.is_finite()) {
        return Err(Error::InvalidArgument(format!("xi_max must be positive, got {xi_max}")));
    }
    let den = (n_points - 1) as i64;
    let xmax = R::from_f64(xi_max, p);
    let mut samples = Vec::with_capacity(n_points);
    for i in 0..n_points {
        let xi = xmax.clone() * R::from_ratio(2 * i as i64 - den, den, p);
        let (theta, f) = theta_at(word, &xi, p)?;
        samples.push(ThetaSample { xi, theta, f });
    }
    let center = (n_points - 1) / 2;
    let two_pi = R::pi(p) * R::from_f64(2.0, p);
    // candidates +-theta + 2 pi m; pick the one nearest the linear
    // extrapolation of the two previous values so reflections at 0 and pi
    // are followed through rather than bounced off
    let unwrap = |prev: &R, before: Option<&R>, principal: &R| -> Result<R> {
        let target = match before {
            Some(b) => prev.clone() * R::from_f64(2.0, p) - b,
            None => prev.clone(),
        };
        let mut best: Option<R> = None;
        for cand in [principal.clone(), -principal.clone()] {
            let m = ((target.clone() - &cand) / &two_pi).to_f64().round();
            let v = cand + R::from_f64(m, p) * &two_pi;
            let closer = match &best {
                None => true,
                Some(b) => (v.clone() - &target).abs() < (b.clone() - &target).abs(),
            };
            if closer {
                best = Some(v);
            }
        }
        let v = best.expect("two candidates");
        let jump = (v.clone() - prev).abs().to_f64();
        if jump >= PI / 2.0 {
            return Err(Error::InternalConsistency(format!(
                "branch jump {jump} not resolvable at this grid spacing"
            )));
        }
        Ok(v)
    };
    for i in center + 1..n_points {
        let before = if i >= center + 2 { Some(samples[i - 2].theta.clone()) } else { None };
        let v = unwrap(&samples[i - 1].theta, before.as_ref(), &samples[i].theta)?;
        samples[i].theta = v;
    }
    for i in (0..center).rev() {
        let before = if i + 2 <= center { Some(samples[i + 2].theta.clone()) } else { None };
        let v = unwrap(&samples[i + 1].theta, before.as_ref(), &samples[i].theta)?;
        samples[i].theta = v;
    }
    Ok(samples)
}

/// Slope of `log|theta(xi) - theta(0)|` against `log xi` over `n` log-spaced
/// frequencies in `[xi_lo, xi_hi]`.
pub fn flatness_exponent<R: Real>(
    word: &Word<R>,
    xi_lo: f64,
    xi_hi: f64,
    n: usize,
    p: Precision,
) -> Result<f64> {
    if !(0.0 < xi_lo && xi_lo < xi_hi) || n < 2 {
        return Err(Error::InvalidArgument("need 0 < xi_lo < xi_hi and n >= 2".into()));
    }
    let (theta0, _) = theta_at(word, &R::zero(p), p)?;
    let mut pts = Vec::with_capacity(n);
    for i in 0..n {
        let s = i as f64 / (n - 1) as f64;
        let xi = (xi_lo.ln() + s * (xi_hi.ln() - xi_lo.ln())).exp();
        let (theta, _) = theta_at(word, &R::from_f64(xi, p), p)?;
        let d = (theta - &theta0).abs().to_f64();
        if d <= 0.0 {
            return Err(Error::InvalidSample(format!("theta(xi) = theta(0) at xi = {xi}")));
        }
        pts.push((xi.ln(), d.ln()));
    }
    Ok(least_squares(&pts).0)
}

/// Floquet data of a word about zero frequency.
#[derive(Clone, Debug)]
pub struct DispersionProfile<R> {
    pub theta0: R,
    pub theta_jet: TruncatedJet<R>,
    pub flatness_order: usize,
    pub leading_derivative: R,
    /// `s0 = -theta'(0)`.
    pub group_velocity: R,
    pub grid: Vec<ThetaSample<R>>,
}

/// Jet, flatness order and dispersion grid of a word.
pub fn dispersion_profile<R: Real>(
    word: &Word<R>,
    order: usize,
    xi_max: f64,
    n_points: usize,
    tol: f64,
    p: Precision,
) -> Result<DispersionProfile<R>> {
    let tj = trace_jet(&word_jet(word, order, p), p)?;
    let theta = theta_jet(&tj, p)?;
    let (k, dk) = flatness_order(&theta, tol)?;
    let grid = theta_grid(word, xi_max, n_points, p)?;
    Ok(DispersionProfile {
        theta0: theta.coeff(0).re.clone(),
        group_velocity: -theta.coeff(1).re.clone(),
        theta_jet: theta,
        flatness_order: k,
        leading_derivative: dk,
        grid,
    })
}

/// Unitary `P` with `P* U P = diag(e^{i theta}, e^{-i theta})`, `theta` in `(0, pi)`.
///
/// Each column is an eigenvector whose first non-negligible entry is real
/// and positive.
pub fn diagonalizer<R: Real>(u: &UnitaryMatrix2<R>) -> Result<(UnitaryMatrix2<R>, R)> {
    let p = u.precision();
    let half = u.half_trace().re;
    let h = half.to_f64();
    if h.abs() >= 1.0 - 10.0 * p.abs_tol() {
        return Err(Error::DegenerateSpectrum { half_trace: h });
    }
    let theta = half.acos();
    let [[a, b], [c, d]] = u.m.clone();
    let tiny = R::from_f64(p.abs_tol(), p);
    let eigvec = |lambda: Complex<R>| -> [Complex<R>; 2] {
        let v1 = [b.clone(), &lambda - &a];
        let v2 = [&lambda - &d, c.clone()];
        let n1 = v1[0].norm_sqr() + v1[1].norm_sqr();
        let n2 = v2[0].norm_sqr() + v2[1].norm_sqr();
        let (v, n) = if n1 >= n2 { (v1, n1) } else { (v2, n2) };
        let inv = R::one(p) / n.sqrt();
        let v = [v[0].scale(&inv), v[1].scale(&inv)];
        let lead = if v[0].abs() > tiny { &v[0] } else { &v[1] };
        let phase = lead.conj().scale(&(R::one(p) / lead.abs()));
        [&v[0] * &phase, &v[1] * &phase]
    };
    let plus = eigvec(Complex::cis(&theta));
    let minus = eigvec(Complex::cis(&-theta.clone()));
    let pm = UnitaryMatrix2::new([[plus[0].clone(), minus[0].clone()], [plus[1].clone(), minus[1].clone()]]);
    Ok((pm, theta))
}

/// Compactly supported bump `exp(1 - 1/(1 - (xi/b)^2))` on `[-b, b]`, with
/// complex weights for the two phase components.
#[derive(Clone, Debug, PartialEq)]
pub struct BumpProfile {
    pub half_width: f64,
    pub weight_plus: Complex<f64>,
    pub weight_minus: Complex<f64>,
}

impl BumpProfile {
    pub fn new(half_width: f64) -> Result<Self> {
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::InvalidArgument(format!("bump half-width must be positive, got {half_width}")));
        }
        Ok(BumpProfile {
            half_width,
            weight_plus: Complex::new(1.0, 0.0),
            weight_minus: Complex::new(1.0, 0.0),
        })
    }

    pub fn with_weights(mut self, plus: Complex<f64>, minus: Complex<f64>) -> Self {
        self.weight_plus = plus;
        self.weight_minus = minus;
        self
    }

    pub fn value(&self, xi: f64) -> f64 {
        let u = xi / self.half_width;
        if u.abs() >= 1.0 {
            0.0
        } else {
            (1.0 - 1.0 / (1.0 - u * u)).exp()
        }
    }
}

/// `(1/2pi) int e^{+-i n theta(xi) + i xi x} phi_+-(xi) dxi` for both signs.
#[derive(Clone, Debug, PartialEq)]
pub struct AmplitudePair {
    pub plus: Complex<f64>,
    pub minus: Complex<f64>,
    pub panels: usize,
    /// Relative change at the last panel doubling.
    pub estimate: f64,
}

fn reduce_2pi<R: Real>(v: &R, two_pi: &R) -> R {
    let q = (v.clone() / two_pi).to_f64().floor();
    v.clone() - R::from_f64(q, v.precision()) * two_pi
}

/// Direct quadrature of the oscillatory integral for the two phase
/// components, by composite Gauss-Legendre panels doubled until successive
/// results agree to [`QUADRATURE_RTOL`].
pub fn oscillatory_amplitude<R: Real>(
    word: &Word<R>,
    bump: &BumpProfile,
    n: u64,
    x: f64,
    p: Precision,
) -> Result<AmplitudePair> {
    if n > 1 << 53 {
        return Err(Error::InvalidArgument(format!("period count {n} too large")));
    }
    let b = bump.half_width;
    let (theta0, f0) = theta_at(word, &R::zero(p), p)?;
    check_branch(&f0, p)?;
    let two_pi = R::pi(p) * R::from_f64(2.0, p);
    let nr = R::from_f64(n as f64, p);
    let base = reduce_2pi(&(nr.clone() * &theta0), &two_pi).to_f64();
    let phase = |xi: f64| -> Result<f64> {
        let (theta, _) = theta_at(word, &R::from_f64(xi, p), p)?;
        let delta = nr.clone() * (theta - &theta0);
        Ok(base + reduce_2pi(&delta, &two_pi).to_f64())
    };

    // principal branch must stay inside (0, pi) on the support
    let probe = 400;
    let mut max_slope = 0.0f64;
    let mut prev: Option<(f64, R)> = None;
    for i in 0..=probe {
        let xi = -b + 2.0 * b * i as f64 / probe as f64;
        let (theta, f) = theta_at(word, &R::from_f64(xi, p), p)?;
        if f.abs().to_f64() >= 1.0 - 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "bump support reaches a spectral degeneracy near xi = {xi}"
            )));
        }
        if let Some((xp, tp)) = &prev {
            let s = ((theta.clone() - tp).to_f64() / (xi - xp)).abs();
            max_slope = max_slope.max(s);
        }
        prev = Some((xi, theta));
    }

    let width = 2.0 * PI / (10.0 * n as f64 * max_slope + x.abs()).max(1e-300);
    let mut panels = ((2.0 * b / width).ceil() as usize).max(8);
    let rule = GaussLegendre::new(PANEL_NODES);
    let scale = 1.0 / (2.0 * PI);
    let eval = |panels: usize| -> Result<(Complex<f64>, Complex<f64>)> {
        let nodes = rule.composite(-b, b, panels);
        let mut phases = Vec::with_capacity(nodes.len());
        for &(xi, _) in &nodes {
            phases.push(phase(xi)?);
        }
        let mut idx = 0;
        let plus = integrate_complex(&nodes, |xi| {
            let v = Complex::cis(&(phases[idx] + xi * x)).scale(&bump.value(xi));
            idx += 1;
            v
        });
        let mut idx = 0;
        let minus = integrate_complex(&nodes, |xi| {
            let v = Complex::cis(&(-phases[idx] + xi * x)).scale(&bump.value(xi));
            idx += 1;
            v
        });
        Ok((&plus * &bump.weight_plus, &minus * &bump.weight_minus))
    };
    let mut current = eval(panels)?;
    let mut estimate = f64::INFINITY;
    for _ in 0..MAX_DOUBLINGS {
        panels *= 2;
        let next = eval(panels)?;
        let dp = (&next.0 - &current.0).abs() / next.0.abs().max(f64::MIN_POSITIVE);
        let dm = (&next.1 - &current.1).abs() / next.1.abs().max(f64::MIN_POSITIVE);
        estimate = dp.max(dm);
        current = next;
        if estimate <= QUADRATURE_RTOL {
            return Ok(AmplitudePair {
                plus: current.0.scale(&scale),
                minus: current.1.scale(&scale),
                panels,
                estimate,
            });
        }
    }
    Err(Error::Accuracy { estimate })
}

/// Hormander's constant `C_{k,0} = Gamma(1/k)/k e^{i pi/(2k)}` for the
/// half-line integral `int_0^inf e^{i t^k} dt`.
pub fn hormander_constant(k: usize) -> Result<Complex<f64>> {
    if k < 2 {
        return Err(Error::UnsupportedOrder(k));
    }
    let kf = k as f64;
    let mag = statrs::function::gamma::gamma(1.0 / kf) / kf;
    Ok(Complex::cis(&(PI / (2.0 * kf))).scale(&mag))
}

/// Leading stationary-phase term of `(1/2pi) int e^{i n theta(xi)} u(xi) dxi`
/// for a phase with `theta(xi) - theta0 ~ theta_k0 xi^k / k!` and `k` even.
///
/// Written as `e^{i n theta0} C_k (n theta_k0)^{-1/k} u0 / 2pi` with the
/// whole-line constant `C_k = 2 (k!)^{1/k} C_{k,0}`; a negative `theta_k0`
/// conjugates the phase factor of `C_{k,0}`.
pub fn stationary_phase_prediction(
    k: usize,
    theta_k0: f64,
    u0: Complex<f64>,
    theta0: f64,
    n: u64,
) -> Result<Complex<f64>> {
    if k % 2 == 1 {
        return Err(Error::UnsupportedOrder(k));
    }
    if theta_k0 == 0.0 || !theta_k0.is_finite() {
        return Err(Error::InvalidArgument("theta_k0 must be finite and nonzero".into()));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    let mut c = hormander_constant(k)?;
    if theta_k0 < 0.0 {
        c = c.conj();
    }
    let kf = k as f64;
    let fact: f64 = (1..=k).map(|j| j as f64).product();
    let mag = 2.0 * fact.powf(1.0 / kf) * (n as f64 * theta_k0.abs()).powf(-1.0 / kf) / (2.0 * PI);
    let carrier = Complex::cis(&((n as f64 * theta0) % (2.0 * PI)));
    Ok(&(&carrier * &c) * &u0.scale(&mag))
}

/// Least-squares line `y = slope x + intercept`; returns `(slope, intercept, r^2)`.
fn least_squares(pts: &[(f64, f64)]) -> (f64, f64, f64) {
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, intercept, r2)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecayFitResult {
    pub n_values: Vec<u64>,
    pub amplitudes: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Fit of `log amplitude` against `log n`.
pub fn decay_fit(samples: &[(u64, f64)]) -> Result<DecayFitResult> {
    if samples.len() < 5 {
        return Err(Error::InvalidArgument(format!("need at least 5 samples, got {}", samples.len())));
    }
    for w in samples.windows(2) {
        if w[1].0 <= w[0].0 {
            return Err(Error::InvalidArgument("n values must be strictly increasing".into()));
        }
    }
    let mut pts = Vec::with_capacity(samples.len());
    for &(n, a) in samples {
        if n == 0 {
            return Err(Error::InvalidSample("n must be positive".into()));
        }
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::InvalidSample(format!("amplitude {a} at n = {n}")));
        }
        pts.push(((n as f64).ln(), a.ln()));
    }
    let (slope, intercept, r_squared) = least_squares(&pts);
    Ok(DecayFitResult {
        n_values: samples.iter().map(|s| s.0).collect(),
        amplitudes: samples.iter().map(|s| s.1).collect(),
        slope,
        intercept,
        r_squared,
    })
}

/// Largest radius (step `step`, at most `cap`) on which `|theta^(k)(xi)|`,
/// summed from the jet, stays above half of `|theta^(k)(0)|`.
pub fn default_bump_width<R: Real>(theta: &TruncatedJet<R>, k: usize, cap: f64, step: f64) -> Result<f64> {
    if k > theta.order() {
        return Err(Error::InvalidArgument(format!("jet order {} below k = {k}", theta.order())));
    }
    let coeffs: Vec<f64> = theta.coeffs().iter().map(|c| c.re.to_f64()).collect();
    // theta^(k)(xi) / k! = sum_j c_j binom(j, k) xi^{j-k}
    let kth = |xi: f64| -> f64 {
        let mut s = 0.0;
        let mut binom = 1.0;
        let mut pow = 1.0;
        for j in k..coeffs.len() {
            if j > k {
                binom *= j as f64 / (j - k) as f64;
                pow *= xi;
            }
            s += coeffs[j] * binom * pow;
        }
        s
    };
    let at0 = kth(0.0).abs();
    if at0 == 0.0 {
        return Err(Error::InvalidArgument("theta^(k)(0) vanishes".into()));
    }
    let mut r = step;
    while r <= cap {
        if kth(r).abs() < 0.5 * at0 {
            return Ok((r - step).max(step));
        }
        r += step;
    }
    Ok(cap)
}
