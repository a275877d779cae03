//! Acceptance criteria 1-9. Each test writes one `criterion N PASS|FAIL`
//! line straight to stderr (bypassing output capture) and then asserts.

use std::io::Write;
use std::path::Path;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::Value;
use slowdisp_cli::commands::{cmd_certify, cmd_decay, cmd_solve};
use slowdisp_cli::config::{RunConfig, WordSpec};
use slowdisp_core::certify::{gradient_diagnostics, Strategy};
use slowdisp_core::dispersion::{
    flatness_exponent, oscillatory_amplitude, stationary_phase_prediction, theta_jet, BumpProfile,
    flatness_order, default_bump_width,
};
use slowdisp_core::linalg::{self, Vec4};
use slowdisp_core::series::{omega_jet, inv_omega_jet};
use slowdisp_core::solver::{
    newton_refine, orbit_distance, published_root, residual, residual_vector, solve_pipeline,
    symmetry_orbit, SearchConfig, ValidityConstraints,
};
use slowdisp_core::su2::{trace_jet, word_at, word_jet, Sign, Word};
use slowdisp_core::{Complex, MpFloat, Precision, Real, TruncatedJet};

const H: Precision = Precision::HIGH;
const D: Precision = Precision::DOUBLE;
const FLAT_N: [f64; 5] = [1e3, 3162.0, 1e4, 31623.0, 1e5];

fn report(id: u32, pass: bool, elapsed: Duration, detail: &str) {
    let line = format!(
        "criterion {id} {} ({:.2} s): {detail}\n",
        if pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
}

fn x0() -> Vec4<MpFloat> {
    published_root(H)
}

fn x0_f64() -> [f64; 4] {
    let x = x0();
    std::array::from_fn(|i| x[i].to_f64())
}

fn within(x: f64, target: f64, rel: f64) -> bool {
    ((x - target) / target).abs() <= rel
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn json_f64(v: &Value, key: &str) -> f64 {
    v[key].as_str().unwrap().parse().unwrap()
}

#[test]
fn criterion_1_residual_reproduction() {
    let start = Instant::now();
    let (_, norm) = residual_vector(&x0(), H).unwrap();
    let n = norm.to_f64();
    let elapsed = start.elapsed();
    let pass = (1e-16..=1e-14).contains(&n) && elapsed < Duration::from_secs(1);
    report(1, pass, elapsed, &format!("||H(x0)|| = {n:.4e} at 256 bits (reported 5.2e-15)"));
    assert!(pass);
}

#[test]
fn criterion_2_diagnostics_reproduction() {
    let start = Instant::now();
    let g = gradient_diagnostics(&x0(), H).unwrap();
    let elapsed = start.elapsed();
    let checks = [
        ("grad a2", g.gradient_norms[0], 3.75),
        ("grad a4", g.gradient_norms[1], 10.33),
        ("grad a6", g.gradient_norms[2], 19.14),
        ("grad a8", g.gradient_norms[3], 41.82),
        ("det", g.normalized_determinant, 0.413),
        ("||DH||", g.jacobian_norm, 43.96),
        ("||DH^-1||", g.inverse_jacobian_norm, 0.35),
    ];
    let pass = checks.iter().all(|(_, x, t)| within(*x, *t, 0.02)) && elapsed < Duration::from_secs(5);
    let detail = checks.iter().map(|(n, x, _)| format!("{n}={x:.4}")).collect::<Vec<_>>().join(" ");
    report(2, pass, elapsed, &detail);
    assert!(pass);
}

#[test]
fn criterion_3_certification() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let cfg = RunConfig::default();
    let out = dir.path().join("cert.json");
    let rep = cmd_certify(&cfg, None, 1e-3, Strategy::Analytic, &out, false).unwrap();
    let c = read_json(&out);
    let alpha = json_f64(&c, "alpha");
    let omega = json_f64(&c, "omega_bar");
    let product = json_f64(&c, "alpha_omega_product");
    let ok_big = rep.status == 0
        && c["verdict"] == Value::Bool(true)
        && alpha <= 1e-13
        && within(omega, 1e5, 1e-12)
        && product <= 1e-7;

    let out_small = dir.path().join("cert_small.json");
    let rep_small = cmd_certify(&cfg, None, 1e-8, Strategy::Analytic, &out_small, false).unwrap();
    let small = read_json(&out_small);
    let radius_small = small["conditions"]["radius_condition"].as_bool().unwrap();
    let ok_small = !radius_small;
    let elapsed = start.elapsed();
    let pass = ok_big && ok_small && elapsed < Duration::from_secs(5);
    report(
        3,
        pass,
        elapsed,
        &format!(
            "r=1e-3: verdict {} alpha={alpha:.3e} omega_bar={omega:.3e} product={product:.3e}; \
             r=1e-8: radius condition {} (expected false), exit {}",
            c["verdict"], radius_small, rep_small.status
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_4_newton_convergence() {
    let start = Instant::now();
    let x = x0();
    let out = newton_refine(&x, H, 1e-30, 4);
    let elapsed = start.elapsed();
    let (pass, detail) = match out {
        Ok(n) => {
            let moved = linalg::norm2(&linalg::sub_vec(&n.point, &x)).to_f64();
            let pass = n.norm.to_f64() <= 1e-30 && n.iterations <= 4 && moved <= 1e-13 && elapsed < Duration::from_secs(5);
            (pass, format!("||H|| = {:.3e} after {} iterations, moved {moved:.3e}", n.norm.to_f64(), n.iterations))
        }
        Err(e) => (false, format!("newton failed: {e}")),
    };
    report(4, pass, elapsed, &detail);
    assert!(pass);
}

fn refined_root() -> Vec4<MpFloat> {
    newton_refine(&x0(), H, RunConfig::default().newton_tol, 20).unwrap().point
}

#[test]
fn criterion_5_flatness() {
    let start = Instant::now();
    let root = refined_root();
    let word = Word::alternating4(&root).unwrap();
    let tj = trace_jet(&word_jet(&word, 12, H), H).unwrap();
    let th = theta_jet(&tj, H).unwrap();
    let low = (2..=9).map(|j| th.derivative_at_zero(j).re.abs().to_f64()).fold(0.0, f64::max);
    let d10 = th.derivative_at_zero(10).re.to_f64();
    let exponent = flatness_exponent(&word, 1e-3, 1e-1, 41, H).unwrap();
    let elapsed = start.elapsed();
    let pass = low <= 1e-20
        && d10.abs() >= 1e6 * 1e-20
        && (9.5..=10.5).contains(&exponent)
        && elapsed < Duration::from_secs(10);
    report(
        5,
        pass,
        elapsed,
        &format!("max |theta^(j)(0)|, 2<=j<=9: {low:.3e}; theta^(10)(0) = {d10:.6e}; log-log exponent {exponent:.4}"),
    );
    assert!(pass);
}

fn single_letter_config() -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.word = WordSpec::Explicit { signs: vec![1], durations: vec!["1.0".into()] };
    cfg.set_precision(53).unwrap();
    cfg
}

fn decay_slope(cfg: &RunConfig, refine: bool, dir: &Path, name: &str) -> Value {
    let out = dir.join(format!("{name}.csv"));
    cmd_decay(cfg, None, refine, &FLAT_N, None, &out).unwrap();
    read_json(&out.with_extension("json"))
}

#[test]
fn criterion_6_decay_exponent() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let flat = decay_slope(&RunConfig::default(), true, dir.path(), "flat");
    let single = decay_slope(&single_letter_config(), false, dir.path(), "single");
    let flat_slope = json_f64(&flat, "slope");
    let single_slope = json_f64(&single, "slope");
    let elapsed = start.elapsed();
    let pass = (-0.13..=-0.08).contains(&flat_slope)
        && (-0.52..=-0.48).contains(&single_slope)
        && elapsed < Duration::from_secs(600);
    report(
        6,
        pass,
        elapsed,
        &format!(
            "flat word slope {flat_slope:.4} (k = {}, bump half-width {}), single letter slope {single_slope:.4}",
            flat["k"],
            json_f64(&flat, "bump_width")
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_7_stationary_phase_constant() {
    let start = Instant::now();
    let root = refined_root();
    let word = Word::alternating4(&root).unwrap();
    let th = theta_jet(&trace_jet(&word_jet(&word, 40, H), H).unwrap(), H).unwrap();
    let (k, dk) = flatness_order(&th, 1e-40).unwrap();
    let b = default_bump_width(&th, k, 0.2, 1e-3).unwrap();
    let n = 100_000;
    let amp = oscillatory_amplitude(&word, &BumpProfile::new(b).unwrap(), n, 0.0, H).unwrap();
    let pred = stationary_phase_prediction(k, dk.to_f64(), Complex::new(1.0, 0.0), th.coeff(0).re.to_f64(), n).unwrap();
    let ratio = amp.plus.abs() / pred.abs();
    let elapsed = start.elapsed();
    let pass = (0.85..=1.15).contains(&ratio) && elapsed < Duration::from_secs(120);
    report(7, pass, elapsed, &format!("k = {k}, b = {b}, direct/prediction at n = 1e5: {ratio:.4}"));
    assert!(pass);
}

fn random_word(rng: &mut ChaCha8Rng) -> Word<f64> {
    let m = rng.random_range(1..7);
    Word::new(
        (0..m)
            .map(|_| (if rng.random_bool(0.5) { Sign::Plus } else { Sign::Minus }, rng.random_range(0.1..3.0)))
            .collect(),
    )
    .unwrap()
}

fn random_durations(rng: &mut ChaCha8Rng) -> [f64; 4] {
    std::array::from_fn(|_| rng.random_range(0.3..4.5))
}

fn random_jet(rng: &mut ChaCha8Rng, order: usize, real_constant: bool) -> TruncatedJet<f64> {
    let c = (0..=order)
        .map(|k| {
            let im = if k == 0 && real_constant { 0.0 } else { rng.random_range(-2.0..2.0) };
            Complex::new(rng.random_range(-2.0..2.0), im)
        })
        .collect();
    TruncatedJet::new(c).unwrap()
}

#[test]
fn criterion_8_property_suites() {
    let start = Instant::now();
    let seed = SystemTime::now().duration_since(UNIX_EPOCH).unwrap().as_nanos() as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failures: Vec<String> = Vec::new();
    let mut check = |name: &str, ok: bool| {
        if !ok && !failures.iter().any(|f| f == name) {
            failures.push(name.to_string());
        }
    };
    for _ in 0..100 {
        let w = random_word(&mut rng);
        let xi = rng.random_range(-3.0..3.0);
        let m = word_at(&w, &xi);
        check("su2 closure", m.unitarity_defect() < 1e-13 && m.det_defect() < 1e-13);

        let a = word_at(&w, &xi).half_trace();
        let b = word_at(&w, &-xi).half_trace();
        check("trace evenness", (&a - &b).abs() < 1e-13 && a.im.abs() < 1e-13);

        let t = random_durations(&mut rng);
        let w4 = Word::alternating4(&t).unwrap();
        let shifted = w4.cyclic_shift(2);
        check("trace cyclicity", (&word_at(&w4, &xi).half_trace() - &word_at(&shifted, &xi).half_trace()).abs() < 1e-13);

        let order = rng.random_range(1..30);
        let om = omega_jet::<f64>(order, D);
        let iom = inv_omega_jet::<f64>(order, D);
        let unit = TruncatedJet::constant(Complex::one(D), order);
        check("omega consistency", om.mul(&iom).unwrap().max_abs_diff(&unit).unwrap() < 1e3 * D.abs_tol());

        let j = random_jet(&mut rng, 14, true);
        let (s, c) = j.sin_cos().unwrap();
        let sum = s.mul(&s).unwrap().add(&c.mul(&c).unwrap()).unwrap();
        let scale = 1.0 + j.max_abs().powi(14);
        check("cos^2 + sin^2", sum.max_abs_diff(&TruncatedJet::constant(Complex::one(D), 14)).unwrap() < 1e-12 * scale);
    }
    // Jacobian against central differences at 256 bits: error ratio ~4 under h -> h/2
    for _ in 0..100 {
        let t = random_durations(&mut rng);
        let x: Vec4<MpFloat> = t.map(|v| MpFloat::from_f64(v, H));
        let exact = residual(&x, H).unwrap().jacobian;
        let err = |h: f64| -> f64 {
            let hm = MpFloat::from_f64(h, H);
            let mut worst = 0.0f64;
            for j in 0..4 {
                let (mut xp, mut xm) = (x.clone(), x.clone());
                xp[j] += &hm;
                xm[j] -= &hm;
                let (hp, _) = residual_vector(&xp, H).unwrap();
                let (hn, _) = residual_vector(&xm, H).unwrap();
                for i in 0..4 {
                    let fd = (hp[i].clone() - &hn[i]) / (hm.clone() * MpFloat::from_f64(2.0, H));
                    worst = worst.max((fd - &exact[i][j]).abs().to_f64());
                }
            }
            worst
        };
        let ratio = err(1e-3) / err(5e-4);
        check("jacobian O(h^2)", (3.5..4.5).contains(&ratio));
    }
    let root = refined_root();
    let (_, base) = residual_vector(&root, H).unwrap();
    for q in symmetry_orbit(&root) {
        let (_, n) = residual_vector(&q, H).unwrap();
        check("orbit residuals", n.to_f64() <= 1e3 * base.to_f64());
    }
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::default();
    cfg.set_seed(7);
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    cmd_solve(&cfg, &a, None, 1).unwrap();
    cmd_solve(&cfg, &b, None, 1).unwrap();
    check("byte-identical solve reruns", std::fs::read(&a).unwrap() == std::fs::read(&b).unwrap());

    let elapsed = start.elapsed();
    let pass = failures.is_empty() && elapsed < Duration::from_secs(120);
    let detail = if failures.is_empty() {
        format!("all suites hold (seed {seed})")
    } else {
        format!("failing: {} (seed {seed})", failures.join(", "))
    };
    report(8, pass, elapsed, &detail);
    assert!(pass);
}

#[test]
fn criterion_9_search_pipeline() {
    let start = Instant::now();
    let reference = x0_f64();
    let v = ValidityConstraints::default();
    let results: Vec<(u64, f64, f64)> = (0..32u64)
        .into_par_iter()
        .map(|seed| {
            let out = solve_pipeline::<MpFloat>(&SearchConfig::with_seed(seed), &v, H, 1e-30, 30).unwrap();
            let p = out.best_point();
            (seed, out.best_norm(), orbit_distance(&p, &reference))
        })
        .collect();
    let hits: Vec<_> = results.iter().filter(|r| r.2 <= 1e-8).collect();
    let closest = results.iter().map(|r| r.2).fold(f64::INFINITY, f64::min);
    let elapsed = start.elapsed();
    let pass = !hits.is_empty() && elapsed < Duration::from_secs(1800);
    report(
        9,
        pass,
        elapsed,
        &format!(
            "{} of 32 seeds reach the orbit of x0 (seeds {:?}); closest distance {closest:.3e}",
            hits.len(),
            hits.iter().map(|h| h.0).collect::<Vec<_>>()
        ),
    );
    assert!(pass);
}
