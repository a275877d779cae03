//! Flatness residual `H = (a_2, a_4, a_6, a_8)` of the alternating 4-letter
//! word and the three-stage root search: random sampling, stochastic descent
//! with a shrinking step, and Newton refinement.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat4, Vec4};
use crate::scalar::{Precision, Real};
use crate::su2::{trace_jet, word_jet, word_t_jacobian_jet, Word};

/// Published approximate root, as decimal literals.
pub const PUBLISHED_ROOT: [&str; 4] =
    ["4.088866559569492", "3.117488248716022", "2.615221023066265", "1.762750988714514"];

/// Jet order needed to read off `a_8`.
const RESIDUAL_ORDER: usize = 8;

/// RNG stream used by [`random_search`].
pub const SEARCH_STREAM: u64 = 0;
/// RNG stream used by [`stochastic_descent`].
pub const DESCENT_STREAM: u64 = 1;

/// Descent stops once the step amplitude falls below this.
pub const ETA_FLOOR: f64 = 1e-12;

/// The published root parsed at precision `p`.
pub fn published_root<R: Real>(p: Precision) -> Vec4<R> {
    std::array::from_fn(|i| R::parse_decimal(PUBLISHED_ROOT[i], p).expect("valid literal"))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidityConstraints {
    pub min_duration: f64,
    pub min_abs_alt_sum: f64,
}

impl Default for ValidityConstraints {
    fn default() -> Self {
        ValidityConstraints { min_duration: 0.3, min_abs_alt_sum: 0.1 }
    }
}

impl ValidityConstraints {
    pub fn new(min_duration: f64, min_abs_alt_sum: f64) -> Result<Self> {
        if !(min_duration > 0.0 && min_abs_alt_sum > 0.0) {
            return Err(Error::InvalidArgument(
                "validity thresholds must both be positive".into(),
            ));
        }
        Ok(ValidityConstraints { min_duration, min_abs_alt_sum })
    }

    /// `min t_j >= min_duration` and `|t1 - t2 + t3 - t4| >= min_abs_alt_sum`.
    pub fn accepts<R: Real>(&self, t: &Vec4<R>) -> bool {
        let t: [f64; 4] = std::array::from_fn(|i| t[i].to_f64());
        let min = t.iter().cloned().fold(f64::INFINITY, f64::min);
        min >= self.min_duration && (t[0] - t[1] + t[2] - t[3]).abs() >= self.min_abs_alt_sum
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub seed: u64,
    pub samples: usize,
    /// Sampling box `[lo, hi]` applied to every coordinate.
    pub domain: (f64, f64),
    pub eta0: f64,
    pub shrink_factor: f64,
    pub stall_threshold: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            seed: 0,
            samples: 1000,
            domain: (0.0, 2.0 * std::f64::consts::PI),
            eta0: 0.5,
            shrink_factor: 0.5,
            stall_threshold: 200,
        }
    }
}

impl SearchConfig {
    pub fn with_seed(seed: u64) -> Self {
        SearchConfig { seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::InvalidArgument("samples must be at least 1".into()));
        }
        if !(self.eta0 > 0.0 && self.eta0 < 1.0) {
            return Err(Error::InvalidArgument(format!("eta0 must lie in (0, 1), got {}", self.eta0)));
        }
        if !(self.shrink_factor > 0.0 && self.shrink_factor < 1.0) {
            return Err(Error::InvalidArgument("shrink_factor must lie in (0, 1)".into()));
        }
        if self.stall_threshold == 0 {
            return Err(Error::InvalidArgument("stall_threshold must be at least 1".into()));
        }
        if !(self.domain.0 < self.domain.1) {
            return Err(Error::InvalidArgument("empty sampling domain".into()));
        }
        Ok(())
    }

    /// Generator for one stage; every stage has its own stream.
    pub fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

/// `H`, its Jacobian and `||H||` at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct FlatnessResidual<R> {
    pub point: Vec4<R>,
    /// `(a_2, a_4, a_6, a_8)`.
    pub residual: Vec4<R>,
    /// `jacobian[i][j] = d a_{2(i+1)} / d t_j`.
    pub jacobian: Mat4<R>,
    pub norm: R,
}

fn check_point<R: Real>(point: &Vec4<R>) -> Result<()> {
    let p = point[0].precision();
    if point.iter().any(|t| !t.is_finite() || *t <= R::zero(p)) {
        return Err(Error::InvalidArgument("all durations must be positive".into()));
    }
    Ok(())
}

/// `H(point)` and `||H||` without the Jacobian.
pub fn residual_vector<R: Real>(point: &Vec4<R>, p: Precision) -> Result<(Vec4<R>, R)> {
    check_point(point)?;
    let word = Word::alternating4(point)?;
    let tj = trace_jet(&word_jet(&word, RESIDUAL_ORDER, p), p)?;
    let h: Vec4<R> = std::array::from_fn(|i| tj.coefficient(2 * (i + 1)));
    let norm = linalg::norm2(&h);
    Ok((h, norm))
}

/// Full residual record with the exact Jacobian from generator insertion.
pub fn residual<R: Real>(point: &Vec4<R>, p: Precision) -> Result<FlatnessResidual<R>> {
    let (h, norm) = residual_vector(point, p)?;
    let word = Word::alternating4(point)?;
    let derivs = word_t_jacobian_jet(&word, RESIDUAL_ORDER, p);
    let traces: Vec<_> = derivs.iter().map(|d| d.half_trace()).collect();
    let jacobian: Mat4<R> =
        std::array::from_fn(|i| std::array::from_fn(|j| traces[j].coeff(2 * (i + 1)).re.clone()));
    Ok(FlatnessResidual { point: point.clone(), residual: h, jacobian, norm })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SearchOutcome {
    pub point: [f64; 4],
    pub norm: f64,
    pub valid_samples: usize,
    pub samples: usize,
}

/// Uniform sampling over the configured box; keeps the valid sample with the
/// smallest `||H||` (first one wins ties). Sample `k` consumes the `4k..4k+4`
/// uniform draws of stream [`SEARCH_STREAM`].
pub fn random_search(cfg: &SearchConfig, v: &ValidityConstraints) -> Result<SearchOutcome> {
    cfg.validate()?;
    let mut rng = cfg.rng(SEARCH_STREAM);
    let (lo, hi) = cfg.domain;
    let mut best: Option<([f64; 4], f64)> = None;
    let mut valid = 0;
    for _ in 0..cfg.samples {
        let t: [f64; 4] = std::array::from_fn(|_| rng.random_range(lo..hi));
        if !v.accepts(&t) {
            continue;
        }
        valid += 1;
        let (_, norm) = residual_vector(&t, Precision::DOUBLE)?;
        if best.as_ref().map_or(true, |(_, b)| norm < *b) {
            best = Some((t, norm));
        }
    }
    let (point, norm) = best.ok_or(Error::NoCandidate { samples: cfg.samples })?;
    Ok(SearchOutcome { point, norm, valid_samples: valid, samples: cfg.samples })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DescentOutcome {
    pub point: [f64; 4],
    pub norm: f64,
    /// `||H||` after every accepted update, starting with the initial value.
    pub accepted_norms: Vec<f64>,
    pub evaluations: usize,
    pub final_eta: f64,
}

/// Random perturbation descent: a candidate `t + gamma` with
/// `gamma ~ U[-eta, eta]^4` is kept iff it is valid and strictly lowers
/// `||H||`. After `stall_threshold` consecutive rejections `eta` is multiplied
/// by `shrink_factor`; the loop ends once `eta < 1e-12`.
pub fn stochastic_descent(
    start: &[f64; 4],
    cfg: &SearchConfig,
    v: &ValidityConstraints,
) -> Result<DescentOutcome> {
    cfg.validate()?;
    if !v.accepts(start) {
        return Err(Error::InvalidArgument("descent start violates the validity constraints".into()));
    }
    let mut rng = cfg.rng(DESCENT_STREAM);
    let (_, mut best) = residual_vector(start, Precision::DOUBLE)?;
    let mut point = *start;
    let mut accepted = vec![best];
    let mut eta = cfg.eta0;
    let mut stall = 0;
    let mut evaluations = 1;
    while eta >= ETA_FLOOR {
        let cand: [f64; 4] = std::array::from_fn(|i| point[i] + rng.random_range(-eta..=eta));
        let improved = if v.accepts(&cand) {
            evaluations += 1;
            let (_, norm) = residual_vector(&cand, Precision::DOUBLE)?;
            if norm < best {
                best = norm;
                point = cand;
                accepted.push(norm);
                true
            } else {
                false
            }
        } else {
            false
        };
        if improved {
            stall = 0;
        } else {
            stall += 1;
            if stall >= cfg.stall_threshold {
                eta *= cfg.shrink_factor;
                stall = 0;
            }
        }
    }
    Ok(DescentOutcome { point, norm: best, accepted_norms: accepted, evaluations, final_eta: eta })
}

#[derive(Clone, Debug, PartialEq)]
pub struct NewtonOutcome<R> {
    pub point: Vec4<R>,
    pub norm: R,
    /// Newton steps taken.
    pub iterations: usize,
    /// `||H||` before each step and at the end.
    pub norm_history: Vec<f64>,
}

/// Newton iteration on `H` until `||H|| <= tol`.
pub fn newton_refine<R: Real>(
    start: &Vec4<R>,
    p: Precision,
    tol: f64,
    max_iter: usize,
) -> Result<NewtonOutcome<R>> {
    let mut x = start.clone();
    let mut history = Vec::new();
    for it in 0..=max_iter {
        let r = residual(&x, p)?;
        let norm = r.norm.to_f64();
        history.push(norm);
        if norm <= tol {
            return Ok(NewtonOutcome { point: x, norm: r.norm, iterations: it, norm_history: history });
        }
        if it == max_iter {
            return Err(Error::NonConvergence { iterations: max_iter, residual: norm });
        }
        let step = linalg::solve(&r.jacobian, &r.residual)?;
        x = linalg::sub_vec(&x, &step);
        check_point(&x)?;
    }
    unreachable!("loop returns on its last iteration")
}

/// The four cyclic shifts of `(t1, t2, t3, t4)` followed by their reversals.
pub fn symmetry_orbit<R: Clone>(point: &[R; 4]) -> [[R; 4]; 8] {
    std::array::from_fn(|k| {
        let shift = k % 4;
        let mut q: [R; 4] = std::array::from_fn(|i| point[(i + shift) % 4].clone());
        if k >= 4 {
            q.reverse();
        }
        q
    })
}

/// Smallest Euclidean distance from `point` to any element of the orbit of
/// `reference`.
pub fn orbit_distance(point: &[f64; 4], reference: &[f64; 4]) -> f64 {
    symmetry_orbit(reference)
        .iter()
        .map(|q| (0..4).map(|i| (point[i] - q[i]).powi(2)).sum::<f64>().sqrt())
        .fold(f64::INFINITY, f64::min)
}

/// Gradient norms, normalized-gradient determinant and Jacobian norms.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GradientDiagnostics {
    /// `||grad a_2||, ..., ||grad a_8||`.
    pub gradient_norms: [f64; 4],
    pub normalized_determinant: f64,
    pub jacobian_norm: f64,
    pub inverse_jacobian_norm: f64,
}

pub fn gradient_diagnostics_of<R: Real>(jacobian: &Mat4<R>) -> Result<GradientDiagnostics> {
    let cond = linalg::condition_number(jacobian)?;
    if !(cond <= linalg::MAX_CONDITION) {
        return Err(Error::Conditioning { condition: cond });
    }
    let norms: Vec<R> = jacobian.iter().map(|row| linalg::norm2(row)).collect();
    let normalized: Mat4<R> = std::array::from_fn(|i| {
        std::array::from_fn(|j| jacobian[i][j].clone() / &norms[i])
    });
    let inv = linalg::inverse(jacobian)?;
    Ok(GradientDiagnostics {
        gradient_norms: std::array::from_fn(|i| norms[i].to_f64()),
        normalized_determinant: linalg::det(&normalized).to_f64(),
        jacobian_norm: linalg::spectral_norm(jacobian).to_f64(),
        inverse_jacobian_norm: linalg::spectral_norm(&inv).to_f64(),
    })
}

/// One line of the pipeline log.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StageRecord {
    pub stage: String,
    pub point: [f64; 4],
    pub residual_norm: f64,
    pub detail: String,
}

#[derive(Clone, Debug)]
pub struct PipelineOutcome<R> {
    pub search: SearchOutcome,
    pub descent: DescentOutcome,
    pub newton: Result<NewtonOutcome<R>>,
    pub stages: Vec<StageRecord>,
}

impl<R: Real> PipelineOutcome<R> {
    /// Best point reached: the Newton result if it converged, else the
    /// descent result.
    pub fn best_point(&self) -> [f64; 4] {
        match &self.newton {
            Ok(n) => std::array::from_fn(|i| n.point[i].to_f64()),
            Err(_) => self.descent.point,
        }
    }

    pub fn best_norm(&self) -> f64 {
        match &self.newton {
            Ok(n) => n.norm.to_f64(),
            Err(_) => self.descent.norm,
        }
    }
}

/// Runs search, descent (both in double precision) and Newton refinement at
/// precision `p`.
pub fn solve_pipeline<R: Real>(
    cfg: &SearchConfig,
    v: &ValidityConstraints,
    p: Precision,
    tol: f64,
    max_iter: usize,
) -> Result<PipelineOutcome<R>> {
    let search = random_search(cfg, v)?;
    let descent = stochastic_descent(&search.point, cfg, v)?;
    let mut stages = vec![
        StageRecord {
            stage: "random_search".into(),
            point: search.point,
            residual_norm: search.norm,
            detail: format!("{} valid of {} samples", search.valid_samples, search.samples),
        },
        StageRecord {
            stage: "stochastic_descent".into(),
            point: descent.point,
            residual_norm: descent.norm,
            detail: format!(
                "{} accepted updates, {} evaluations",
                descent.accepted_norms.len() - 1,
                descent.evaluations
            ),
        },
    ];
    let start: Vec4<R> = std::array::from_fn(|i| R::from_f64(descent.point[i], p));
    let newton = newton_refine(&start, p, tol, max_iter);
    stages.push(match &newton {
        Ok(n) => StageRecord {
            stage: "newton_refine".into(),
            point: std::array::from_fn(|i| n.point[i].to_f64()),
            residual_norm: n.norm.to_f64(),
            detail: format!("converged in {} iterations", n.iterations),
        },
        Err(e) => StageRecord {
            stage: "newton_refine".into(),
            point: descent.point,
            residual_norm: descent.norm,
            detail: format!("failed: {e}"),
        },
    });
    Ok(PipelineOutcome { search, descent, newton, stages })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::MpFloat;
    use approx::assert_relative_eq;

    #[test]
    fn residual_at_published_root_high_precision() {
        let p = Precision::HIGH;
        let x0 = published_root::<MpFloat>(p);
        let r = residual(&x0, p).unwrap();
        let n = r.norm.to_f64();
        // independent high-precision evaluation gives 5.0174e-15
        assert_relative_eq!(n, 5.0173987e-15, max_relative = 1e-6);
    }

    #[test]
    fn equal_times_a2() {
        let s = 0.8f64;
        let r = residual(&[s; 4], Precision::DOUBLE).unwrap();
        assert_relative_eq!(r.residual[0], 4.0 * ((2.0 * s).cos() - 1.0), max_relative = 1e-13);
    }

    #[test]
    fn gradient_norms_at_published_root() {
        let p = Precision::HIGH;
        let r = residual(&published_root::<MpFloat>(p), p).unwrap();
        let d = gradient_diagnostics_of(&r.jacobian).unwrap();
        let expected = [3.7502443, 10.333181, 19.139966, 41.820048];
        for (g, e) in d.gradient_norms.iter().zip(expected) {
            assert_relative_eq!(*g, e, max_relative = 1e-6);
        }
        assert_relative_eq!(d.normalized_determinant, 0.41393704, max_relative = 1e-6);
        assert_relative_eq!(d.jacobian_norm, 43.96702, max_relative = 1e-6);
        assert_relative_eq!(d.inverse_jacobian_norm, 1.0 / 2.8151865, max_relative = 1e-6);
    }

    #[test]
    fn orbit_contents() {
        let t = [1.0, 2.0, 3.0, 4.0];
        let orbit = symmetry_orbit(&t);
        for expected in [[2.0, 3.0, 4.0, 1.0], [3.0, 4.0, 1.0, 2.0], [4.0, 1.0, 2.0, 3.0], [1.0, 4.0, 3.0, 2.0]] {
            assert!(orbit.contains(&expected), "{expected:?}");
        }
        assert!(symmetry_orbit(&[0.7; 4]).iter().all(|q| *q == [0.7; 4]));
        assert_eq!(orbit_distance(&[3.0, 2.0, 1.0, 4.0], &t), 0.0);
    }

    #[test]
    fn validity_filter() {
        let v = ValidityConstraints::default();
        assert!(v.accepts(&[1.0, 2.0, 1.8, 0.4]));
        assert!(!v.accepts(&[0.2, 2.0, 1.5, 0.4]));
        assert!(!v.accepts(&[1.0, 1.0, 1.0, 1.0]));
        assert!(ValidityConstraints::new(0.0, 0.1).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(SearchConfig { eta0: 1.0, ..SearchConfig::default() }.validate().is_err());
        assert!(SearchConfig { samples: 0, ..SearchConfig::default() }.validate().is_err());
        assert!(SearchConfig::default().validate().is_ok());
    }

    #[test]
    fn no_candidate_error() {
        let cfg = SearchConfig { samples: 20, domain: (0.0, 0.25), ..SearchConfig::default() };
        assert_eq!(
            random_search(&cfg, &ValidityConstraints::default()),
            Err(Error::NoCandidate { samples: 20 })
        );
    }

    #[test]
    fn descent_is_monotone_and_improves() {
        let x0: [f64; 4] = published_root(Precision::DOUBLE);
        let v = ValidityConstraints::default();
        let cfg = SearchConfig { seed: 3, ..SearchConfig::default() };
        let out = stochastic_descent(&x0, &cfg, &v).unwrap();
        let (_, n0) = residual_vector(&x0, Precision::DOUBLE).unwrap();
        assert!(out.norm <= n0);
        assert!(out.accepted_norms.windows(2).all(|w| w[1] < w[0]));
        assert!(out.final_eta < ETA_FLOOR);
    }

    #[test]
    fn newton_rejects_singular_start() {
        // At equal durations the Jacobian has repeated columns.
        let x = [0.9f64; 4];
        let r = residual(&x, Precision::DOUBLE).unwrap();
        assert!(linalg::condition_number(&r.jacobian).unwrap() > 1e12);
        assert!(matches!(newton_refine(&x, Precision::DOUBLE, 1e-12, 10), Err(Error::Conditioning { .. })));
    }
}
