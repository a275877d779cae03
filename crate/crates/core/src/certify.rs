//! Newton-Kantorovich certificate for a root of `H` near an approximate one.
//!
//! Hypotheses checked at `x0` for a ball of radius `r`:
//!
//! 1. `||DH(x0)^-1 H(x0)|| <= alpha`, with `alpha = ||DH(x0)^-1|| ||H(x0)||`
//!    inflated outward;
//! 2. `||DH(x) - DH(y)|| <= omega_bar ||x - y||` on the ball, using the
//!    un-preconditioned bound, which implies the preconditioned one when
//!    `||DH(x0)^-1|| <= 1`;
//! 3. `alpha * omega_bar <= 1/2`;
//! 4. `(1 - sqrt(1 - 2 alpha omega_bar)) / omega_bar <= r`.
//!
//! Norms are Euclidean / spectral. Every comparison is made with an outward
//! rounding factor `1 + 1e-10` and repeated at twice the mantissa width.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::linalg::{self, Vec4};
use crate::scalar::{MpFloat, Precision, Real};
use crate::solver::{gradient_diagnostics_of, residual, GradientDiagnostics, ValidityConstraints};

/// Outward rounding applied to every norm bound before comparison.
pub const OUTWARD: f64 = 1e-10;

/// Largest ball radius covered by the analytic Lipschitz bound.
pub const ANALYTIC_MAX_RADIUS: f64 = 0.5;

/// Constant of the analytic bound `omega_bar = 1e8 r`.
pub const ANALYTIC_LIPSCHITZ_SLOPE: f64 = 1e8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// The rigorous bound `omega_bar = 1e8 r` valid for `r <= 0.5`.
    Analytic,
    /// Empirical maximum over sampled pairs; diagnostic only.
    Sampled { n_pairs: usize, seed: u64 },
}

impl Strategy {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Analytic => "analytic",
            Strategy::Sampled { .. } => "sampled",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ConditionFlags {
    pub alpha_bound: bool,
    pub lipschitz_bound: bool,
    pub product_condition: bool,
    pub radius_condition: bool,
}

impl ConditionFlags {
    pub fn all(&self) -> bool {
        self.alpha_bound && self.lipschitz_bound && self.product_condition && self.radius_condition
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Certificate {
    pub x0: Vec4<MpFloat>,
    pub alpha: MpFloat,
    pub omega_bar: MpFloat,
    pub radius: MpFloat,
    /// `alpha * omega_bar`.
    pub product: MpFloat,
    /// `(1 - sqrt(1 - 2 alpha omega_bar)) / omega_bar`; `None` when the square
    /// root argument is negative.
    pub radius_lhs: Option<MpFloat>,
    pub residual_norm: MpFloat,
    pub inverse_jacobian_norm: MpFloat,
    /// `||DH(x0)^-1 H(x0)||` from a direct solve.
    pub direct_newton_step: MpFloat,
    pub conditions: ConditionFlags,
    pub strategy: Strategy,
    pub precision_bits: u32,
    /// Whether the same verdict was obtained at twice the mantissa width.
    pub recheck_agrees: bool,
    pub verdict: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AlphaBound<R> {
    pub alpha: R,
    pub direct: R,
    pub inverse_jacobian_norm: R,
    pub residual_norm: R,
}

fn inflate<R: Real>(x: R, p: Precision) -> R {
    x * R::from_f64(1.0 + OUTWARD, p)
}

/// `alpha = ||DH^-1|| * ||H||`, each factor inflated by `1 + 1e-10`, together
/// with the direct-solve value it bounds.
pub fn compute_alpha<R: Real>(x0: &Vec4<R>, p: Precision) -> Result<AlphaBound<R>> {
    let r = residual(x0, p)?;
    let step = linalg::solve(&r.jacobian, &r.residual)?;
    let inv = linalg::inverse(&r.jacobian)?;
    let inv_norm = linalg::spectral_norm(&inv);
    let alpha = inflate(inflate(inv_norm.clone(), p) * &r.norm, p);
    Ok(AlphaBound {
        alpha,
        direct: linalg::norm2(&step),
        inverse_jacobian_norm: inv_norm,
        residual_norm: r.norm,
    })
}

/// `omega_bar = 1e8 r` for `0 < r <= 0.5`.
pub fn lipschitz_bound_analytic(r: f64) -> Result<f64> {
    if !(r > 0.0 && r <= ANALYTIC_MAX_RADIUS) {
        return Err(Error::OutOfDomain(format!("radius {r}")));
    }
    Ok(ANALYTIC_LIPSCHITZ_SLOPE * r)
}

/// Uniform offset in the 4-ball of radius `r`, by rejection from the cube.
fn ball_offset(rng: &mut ChaCha8Rng, r: f64) -> [f64; 4] {
    loop {
        let u: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..=1.0));
        if u.iter().map(|x| x * x).sum::<f64>() <= 1.0 {
            return u.map(|x| r * x);
        }
    }
}

/// Largest observed `||DH(x) - DH(y)|| / ||x - y||` over `n_pairs` pairs drawn
/// uniformly from `B(x0, r)`. An empirical estimate, not a bound.
pub fn lipschitz_bound_sampled<R: Real>(
    x0: &Vec4<R>,
    r: f64,
    n_pairs: usize,
    seed: u64,
    p: Precision,
) -> Result<f64> {
    if n_pairs < 100 {
        return Err(Error::InvalidArgument(format!("need at least 100 pairs, got {n_pairs}")));
    }
    if !(r > 0.0) {
        return Err(Error::InvalidArgument(format!("radius must be positive, got {r}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..n_pairs {
        // offsets are added at full precision so the pair stays centred on x0
        let dx = ball_offset(&mut rng, r);
        let dy = ball_offset(&mut rng, r);
        let x: Vec4<R> = std::array::from_fn(|i| x0[i].clone() + R::from_f64(dx[i], p));
        let y: Vec4<R> = std::array::from_fn(|i| x0[i].clone() + R::from_f64(dy[i], p));
        let dist = linalg::norm2(&linalg::sub_vec(&x, &y)).to_f64();
        if dist == 0.0 {
            continue;
        }
        let jx = residual(&x, p)?.jacobian;
        let jy = residual(&y, p)?.jacobian;
        let ratio = linalg::spectral_norm(&linalg::sub_mat(&jx, &jy)).to_f64() / dist;
        worst = worst.max(ratio);
    }
    Ok(worst)
}

/// Smallest radius satisfying the radius condition with the analytic
/// `omega_bar = 1e8 r` for a given `alpha`, found by bisection on
/// `[1e-30, 0.5]`. The feasible set is an interval ending at 0.5.
pub fn radius_flip_boundary(alpha: f64) -> Option<f64> {
    let holds = |r: f64| {
        let w = ANALYTIC_LIPSCHITZ_SLOPE * r;
        let q = 2.0 * alpha * w;
        q <= 1.0 && (q / (1.0 + (1.0 - q).sqrt())) / w * (1.0 + OUTWARD) <= r
    };
    let (mut lo, mut hi) = (1e-30f64, ANALYTIC_MAX_RADIUS);
    if !holds(hi) {
        return None;
    }
    if holds(lo) {
        return Some(lo);
    }
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if holds(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

struct Evaluation {
    alpha: AlphaBound<MpFloat>,
    omega_bar: MpFloat,
    product: MpFloat,
    radius_lhs: Option<MpFloat>,
    flags: ConditionFlags,
}

fn evaluate(x0: &Vec4<MpFloat>, r: f64, strategy: Strategy, p: Precision) -> Result<Evaluation> {
    let x0: Vec4<MpFloat> = std::array::from_fn(|i| x0[i].round_to(p));
    let alpha = compute_alpha(&x0, p)?;
    let one = MpFloat::one(p);
    let half = MpFloat::from_ratio(1, 2, p);
    let radius = MpFloat::from_f64(r, p);

    let (omega_bar, lipschitz_ok) = match strategy {
        Strategy::Analytic => {
            lipschitz_bound_analytic(r)?;
            // the un-preconditioned bound only implies the preconditioned one
            // when ||DH(x0)^-1|| <= 1
            let ok = inflate(alpha.inverse_jacobian_norm.clone(), p) <= one;
            (MpFloat::from_f64(ANALYTIC_LIPSCHITZ_SLOPE, p) * &radius, ok)
        }
        Strategy::Sampled { n_pairs, seed } => {
            let w = lipschitz_bound_sampled(&x0, r, n_pairs, seed, p)?;
            let ok = inflate(alpha.inverse_jacobian_norm.clone(), p) <= one;
            (inflate(MpFloat::from_f64(w, p), p), ok)
        }
    };

    let alpha_ok = alpha.direct <= alpha.alpha;
    let product = alpha.alpha.clone() * &omega_bar;
    let product_ok = inflate(product.clone(), p) <= half;
    let two_q = MpFloat::from_f64(2.0, p) * &product;
    let radius_lhs = if two_q <= one {
        // 1 - sqrt(1 - q) = q / (1 + sqrt(1 - q))
        let root = (one.clone() - &two_q).sqrt();
        Some(two_q / (one.clone() + &root) / &omega_bar)
    } else {
        None
    };
    let radius_ok = radius_lhs.as_ref().is_some_and(|lhs| inflate(lhs.clone(), p) <= radius);

    Ok(Evaluation {
        alpha,
        omega_bar,
        product,
        radius_lhs,
        flags: ConditionFlags {
            alpha_bound: alpha_ok,
            lipschitz_bound: lipschitz_ok,
            product_condition: product_ok,
            radius_condition: radius_ok,
        },
    })
}

/// Checks the four hypotheses at `x0` for radius `r`.
///
/// The verdict is the conjunction of the condition flags, additionally
/// requiring the analytic strategy and agreement of the recheck at twice the
/// mantissa width.
pub fn certify(x0: &Vec4<MpFloat>, r: f64, strategy: Strategy, p: Precision) -> Result<Certificate> {
    if !(r > 0.0 && r <= ANALYTIC_MAX_RADIUS) {
        return Err(Error::OutOfDomain(format!("radius {r}")));
    }
    if !ValidityConstraints::default().accepts(x0) {
        return Err(Error::InvalidArgument("x0 violates the validity constraints".into()));
    }
    let main = evaluate(x0, r, strategy, p)?;
    let recheck = evaluate(x0, r, strategy, p.doubled())?;
    let recheck_agrees = main.flags == recheck.flags;
    let verdict = main.flags.all() && recheck_agrees && strategy == Strategy::Analytic;
    Ok(Certificate {
        x0: std::array::from_fn(|i| x0[i].round_to(p)),
        alpha: main.alpha.alpha,
        omega_bar: main.omega_bar,
        radius: MpFloat::from_f64(r, p),
        product: main.product,
        radius_lhs: main.radius_lhs,
        residual_norm: main.alpha.residual_norm,
        inverse_jacobian_norm: main.alpha.inverse_jacobian_norm,
        direct_newton_step: main.alpha.direct,
        conditions: main.flags,
        strategy,
        precision_bits: p.mantissa_bits(),
        recheck_agrees,
        verdict,
    })
}

/// Gradient norms, normalized-gradient determinant and Jacobian norms at `x0`.
pub fn gradient_diagnostics<R: Real>(x0: &Vec4<R>, p: Precision) -> Result<GradientDiagnostics> {
    gradient_diagnostics_of(&residual(x0, p)?.jacobian)
}

impl Certificate {
    /// Canonical JSON: sorted keys, every real as a full-precision decimal
    /// string, two-space indentation, trailing newline.
    pub fn to_canonical_json(&self) -> String {
        let s = |x: &MpFloat| Value::String(x.to_decimal_string());
        let mut strategy = BTreeMap::new();
        strategy.insert("kind".to_string(), json!(self.strategy.name()));
        if let Strategy::Sampled { n_pairs, seed } = self.strategy {
            strategy.insert("n_pairs".to_string(), json!(n_pairs));
            strategy.insert("seed".to_string(), json!(seed));
        }
        let doc = json!({
            "x0": self.x0.iter().map(s).collect::<Vec<_>>(),
            "alpha": s(&self.alpha),
            "omega_bar": s(&self.omega_bar),
            "radius": s(&self.radius),
            "alpha_omega_product": s(&self.product),
            "radius_lhs": self.radius_lhs.as_ref().map(s).unwrap_or(Value::Null),
            "residual_norm": s(&self.residual_norm),
            "inverse_jacobian_norm": s(&self.inverse_jacobian_norm),
            "direct_newton_step": s(&self.direct_newton_step),
            "conditions": {
                "alpha_bound": self.conditions.alpha_bound,
                "lipschitz_bound": self.conditions.lipschitz_bound,
                "product_condition": self.conditions.product_condition,
                "radius_condition": self.conditions.radius_condition,
            },
            "strategy": strategy,
            "precision_bits": self.precision_bits,
            "recheck_agrees": self.recheck_agrees,
            "verdict": self.verdict,
        });
        let mut out = serde_json::to_string_pretty(&doc).expect("serializable");
        out.push('\n');
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::published_root;

    const P: Precision = Precision::HIGH;

    #[test]
    fn analytic_bound_domain() {
        assert_eq!(lipschitz_bound_analytic(1e-3).unwrap(), 1e5);
        assert_eq!(lipschitz_bound_analytic(0.5).unwrap(), 5e7);
        assert!(matches!(lipschitz_bound_analytic(0.6), Err(Error::OutOfDomain(_))));
        assert!(lipschitz_bound_analytic(0.0).is_err());
    }

    #[test]
    fn alpha_dominates_direct_solve() {
        let a = compute_alpha(&published_root::<MpFloat>(P), P).unwrap();
        assert!(a.alpha.to_f64() <= 1e-13);
        assert!(a.direct <= a.alpha);
        let far = compute_alpha(&[MpFloat::from_f64(1.1, P), MpFloat::from_f64(0.6, P),
            MpFloat::from_f64(2.0, P), MpFloat::from_f64(0.9, P)], P).unwrap();
        assert!(far.direct <= far.alpha);
        assert!(far.alpha.to_f64() > 1e-3);
    }

    #[test]
    fn certificate_at_published_root() {
        let c = certify(&published_root(P), 1e-3, Strategy::Analytic, P).unwrap();
        assert!(c.verdict, "{c:?}");
        assert!(c.conditions.all());
        assert!(c.alpha.to_f64() <= 1e-13);
        assert!((c.omega_bar.to_f64() - 1e5).abs() < 1e-6);
        assert!(c.product.to_f64() <= 1e-7);
        assert!(c.recheck_agrees);
    }

    #[test]
    fn radius_below_alpha_fails_only_radius_condition() {
        let c = certify(&published_root(P), 1e-16, Strategy::Analytic, P).unwrap();
        assert!(!c.verdict);
        assert!(c.conditions.alpha_bound && c.conditions.lipschitz_bound && c.conditions.product_condition);
        assert!(!c.conditions.radius_condition);
    }

    #[test]
    fn flip_boundary_sits_at_alpha_scale() {
        let a = compute_alpha(&published_root::<MpFloat>(P), P).unwrap().alpha.to_f64();
        let b = radius_flip_boundary(a).unwrap();
        assert!(b > 0.9 * a && b < 1.1 * a, "boundary {b:e} vs alpha {a:e}");
        // feasible set is an interval: everything above the boundary holds
        for r in [b * 1.01, 1e-12, 1e-8, 1e-3, 0.5] {
            let c = certify(&published_root(P), r, Strategy::Analytic, P).unwrap();
            assert!(c.conditions.radius_condition, "r = {r:e}");
        }
        let c = certify(&published_root(P), b * 0.99, Strategy::Analytic, P).unwrap();
        assert!(!c.conditions.radius_condition);
    }

    #[test]
    fn non_root_fails_product_condition() {
        let x: Vec4<MpFloat> = [1.1, 0.6, 2.0, 0.9].map(|v| MpFloat::from_f64(v, P));
        let c = certify(&x, 0.4, Strategy::Analytic, P).unwrap();
        assert!(!c.verdict);
        assert!(!c.conditions.product_condition);
    }

    #[test]
    fn out_of_domain_radius() {
        assert!(matches!(certify(&published_root(P), 0.6, Strategy::Analytic, P), Err(Error::OutOfDomain(_))));
    }

    #[test]
    fn sampled_strategy_is_never_rigorous() {
        let strategy = Strategy::Sampled { n_pairs: 100, seed: 1 };
        let c = certify(&published_root(P), 1e-3, strategy, P).unwrap();
        assert!(c.conditions.all());
        assert!(!c.verdict);
    }

    #[test]
    fn canonical_json_is_sorted_and_stringly() {
        let c = certify(&published_root(P), 1e-3, Strategy::Analytic, P).unwrap();
        let text = c.to_canonical_json();
        let v: Value = serde_json::from_str(&text).unwrap();
        assert!(v["alpha"].is_string());
        assert_eq!(v["verdict"], Value::Bool(true));
        let keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        assert_eq!(text, certify(&published_root(P), 1e-3, Strategy::Analytic, P).unwrap().to_canonical_json());
    }
}
