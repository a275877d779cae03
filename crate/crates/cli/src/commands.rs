//! Subcommand definitions and their implementations.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde_json::{json, Value};
use slowdisp_core::certify::{certify, gradient_diagnostics, Strategy};
use slowdisp_core::dispersion::{
    default_bump_width, dispersion_profile, flatness_exponent, oscillatory_amplitude,
    stationary_phase_prediction, theta_jet, BumpProfile, decay_fit, flatness_order,
};
use slowdisp_core::linalg::Vec4;
use slowdisp_core::solver::{newton_refine, published_root, residual_vector, solve_pipeline, symmetry_orbit, StageRecord};
use slowdisp_core::su2::{trace_jet, word_jet, Word};
use slowdisp_core::{Complex, MpFloat, Precision, Real};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult, EXIT_MATH, EXIT_OK};
use crate::output::{canonical_json, csv, real, sidecar, write_atomic};

/// Jet order used to place the default bump width.
const BUMP_JET_ORDER: usize = 40;
const BUMP_WIDTH_CAP: f64 = 0.2;
const BUMP_WIDTH_STEP: f64 = 1e-3;

#[derive(Parser, Debug)]
#[command(name = "slowdisp", version, about = "Flat Floquet exponents of piecewise-constant Dirac forcing")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// JSON run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub precision_bits: Option<u32>,
    /// Jet order N.
    #[arg(long)]
    pub order: Option<usize>,
    /// Worker threads for restarts and amplitude grids.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Output file; falls back to the config's `outputs` entry.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Even trace coefficients a_0 .. a_2K of the configured word.
    Jet {
        #[command(flatten)]
        common: Common,
        /// Print a table against the published reference values.
        #[arg(long = "compare-paper")]
        compare: bool,
    },
    /// Random search, stochastic descent and Newton refinement.
    Solve {
        #[command(flatten)]
        common: Common,
        /// Skip the search and refine from a named start (`paper-root`).
        #[arg(long)]
        init: Option<String>,
        /// Independent seeds `seed, seed+1, ...`, run in parallel.
        #[arg(long, default_value_t = 1)]
        restarts: usize,
    },
    /// Newton-Kantorovich certificate for a root file or the configured word.
    Certify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        root: Option<PathBuf>,
        #[arg(long)]
        radius: f64,
        /// `analytic` or `sampled`.
        #[arg(long, default_value = "analytic")]
        strategy: String,
        #[arg(long, default_value_t = 1000)]
        pairs: usize,
        /// Print a table against the published reference values.
        #[arg(long = "compare-paper")]
        compare: bool,
    },
    /// theta(xi) on a symmetric grid plus a sidecar with theta0, k, theta_k0, s0.
    Dispersion {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        root: Option<PathBuf>,
        /// Newton-refine an alternating 4-letter word first.
        #[arg(long)]
        refine: bool,
        #[arg(long, default_value_t = 1.0)]
        xi_max: f64,
        #[arg(long, default_value_t = 201)]
        grid: usize,
    },
    /// Oscillatory amplitudes over a list of period counts and a decay fit.
    Decay {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        root: Option<PathBuf>,
        #[arg(long)]
        refine: bool,
        /// Comma-separated period counts, at least five, increasing.
        #[arg(long, value_delimiter = ',', required = true)]
        n_list: Vec<f64>,
        #[arg(long)]
        bump_width: Option<f64>,
    },
}

/// Exit status and text for standard output.
#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub status: i32,
    pub stdout: String,
}

impl Report {
    fn ok(stdout: String) -> Self {
        Report { status: EXIT_OK, stdout }
    }
}

pub fn run(cli: Cli) -> CliResult<Report> {
    match cli.command {
        Command::Jet { common, compare } => {
            let cfg = load_config(&common)?;
            in_pool(&common, || cmd_jet(&cfg, &out_path(&common, &cfg, "jet")?, compare))
        }
        Command::Solve { common, init, restarts } => {
            let cfg = load_config(&common)?;
            in_pool(&common, || cmd_solve(&cfg, &out_path(&common, &cfg, "solve")?, init.as_deref(), restarts))
        }
        Command::Certify { common, root, radius, strategy, pairs, compare } => {
            let cfg = load_config(&common)?;
            let strategy = match strategy.as_str() {
                "analytic" => Strategy::Analytic,
                "sampled" => Strategy::Sampled { n_pairs: pairs, seed: cfg.seed },
                other => return Err(CliError::Input(format!("unknown strategy {other:?}"))),
            };
            let out = out_path(&common, &cfg, "certify")?;
            in_pool(&common, || cmd_certify(&cfg, root.as_deref(), radius, strategy, &out, compare))
        }
        Command::Dispersion { common, root, refine, xi_max, grid } => {
            let cfg = load_config(&common)?;
            let out = out_path(&common, &cfg, "dispersion")?;
            in_pool(&common, || cmd_dispersion(&cfg, root.as_deref(), refine, xi_max, grid, &out))
        }
        Command::Decay { common, root, refine, n_list, bump_width } => {
            let cfg = load_config(&common)?;
            let out = out_path(&common, &cfg, "decay")?;
            in_pool(&common, || cmd_decay(&cfg, root.as_deref(), refine, &n_list, bump_width, &out))
        }
    }
}

fn load_config(common: &Common) -> CliResult<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(bits) = common.precision_bits {
        cfg.set_precision(bits)?;
    }
    if let Some(o) = common.order {
        cfg.order = o;
    }
    if let Some(s) = common.seed {
        cfg.set_seed(s);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn out_path(common: &Common, cfg: &RunConfig, command: &str) -> CliResult<PathBuf> {
    common
        .out
        .clone()
        .or_else(|| cfg.output_for(command))
        .ok_or_else(|| CliError::Input(format!("no output path for {command}; pass --out")))
}

fn in_pool<T: Send>(common: &Common, f: impl FnOnce() -> CliResult<T> + Send) -> CliResult<T> {
    match common.threads {
        None => f(),
        Some(0) => Err(CliError::Input("--threads must be at least 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Input(format!("thread pool: {e}")))?
            .install(f),
    }
}

fn s(x: &MpFloat) -> Value {
    Value::String(x.to_decimal_string())
}

fn point_json(x: &[MpFloat]) -> Value {
    Value::Array(x.iter().map(s).collect())
}

fn as_vec4(word: &Word<MpFloat>) -> CliResult<Vec4<MpFloat>> {
    if word.len() != 4 || !word.is_alternating() {
        return Err(CliError::Input("this command needs an alternating 4-letter word".into()));
    }
    let d = word.durations();
    Ok(std::array::from_fn(|i| d[i].clone()))
}

/// Reads the `point` array of a root file at precision `p`.
pub fn read_root(path: &Path, p: Precision) -> CliResult<Vec4<MpFloat>> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| CliError::Read { path: path.to_path_buf(), source })?;
    let doc: Value = serde_json::from_str(&text).map_err(|e| CliError::Input(format!("root file: {e}")))?;
    let arr = doc
        .get("point")
        .and_then(Value::as_array)
        .filter(|a| a.len() == 4)
        .ok_or_else(|| CliError::Input("root file needs a 4-element `point`".into()))?;
    let mut out = Vec::with_capacity(4);
    for v in arr {
        let text = match v {
            Value::String(t) => t.clone(),
            Value::Number(n) => n.to_string(),
            other => return Err(CliError::Input(format!("bad coordinate {other}"))),
        };
        out.push(MpFloat::parse_decimal(&text, p)?);
    }
    Ok(std::array::from_fn(|i| out[i].clone()))
}

fn load_word(cfg: &RunConfig, root: Option<&Path>, refine: bool) -> CliResult<Word<MpFloat>> {
    let word = match root {
        Some(path) => Word::alternating4(&read_root(path, cfg.precision)?)?,
        None => cfg.build_word()?,
    };
    if !refine {
        return Ok(word);
    }
    let x = as_vec4(&word)?;
    let refined = newton_refine(&x, cfg.precision, cfg.newton_tol, cfg.newton_max_iter)?;
    Ok(Word::alternating4(&refined.point)?)
}

fn comparison_table(rows: &[(&str, f64, f64)]) -> String {
    let mut out = format!("{:<28} {:>14} {:>14} {:>10}\n", "quantity", "computed", "reported", "rel_dev");
    for (name, computed, reported) in rows {
        let dev = (computed - reported).abs() / reported.abs();
        out.push_str(&format!("{name:<28} {computed:>14.6e} {reported:>14.6e} {dev:>10.3e}\n"));
    }
    out
}

pub fn cmd_jet(cfg: &RunConfig, out: &Path, compare: bool) -> CliResult<Report> {
    let p = cfg.precision;
    let word = cfg.build_word()?;
    let tj = trace_jet(&word_jet(&word, cfg.order, p), p)?;
    let doc = json!({
        "a": tj.even_coefficients.iter().map(s).collect::<Vec<_>>(),
        "odd_residual_max": real(tj.odd_residual_max),
        "order": cfg.order,
        "precision_bits": p.mantissa_bits(),
    });
    write_atomic(out, &canonical_json(&doc))?;
    let mut stdout = String::new();
    if compare {
        let x = as_vec4(&word)?;
        let (_, norm) = residual_vector(&x, p)?;
        stdout = comparison_table(&[("||H||", norm.to_f64(), 5.2e-15)]);
    }
    Ok(Report::ok(stdout))
}

fn stage_json(r: &StageRecord) -> Value {
    json!({
        "stage": r.stage,
        "point": r.point.iter().map(|v| real(*v)).collect::<Vec<_>>(),
        "residual_norm": real(r.residual_norm),
        "detail": r.detail,
    })
}

pub fn cmd_solve(cfg: &RunConfig, out: &Path, init: Option<&str>, restarts: usize) -> CliResult<Report> {
    let p = cfg.precision;
    let (point, norm, seed, stages): (Vec<MpFloat>, f64, u64, Vec<Value>) = match init {
        Some(name) if name == crate::config::ROOT_ALIAS => {
            let start = published_root::<MpFloat>(p);
            let (_, n0) = residual_vector(&start, p)?;
            match newton_refine(&start, p, cfg.newton_tol, cfg.newton_max_iter) {
                Ok(n) => {
                    let rec = json!({
                        "stage": "newton_refine",
                        "point": point_json(&n.point),
                        "residual_norm": s(&n.norm),
                        "detail": format!("converged in {} iterations from ||H|| = {:e}", n.iterations, n0.to_f64()),
                        "iterations": n.iterations,
                    });
                    (n.point.to_vec(), n.norm.to_f64(), cfg.seed, vec![rec])
                }
                Err(e) => {
                    let rec = json!({"stage": "newton_refine", "detail": format!("failed: {e}")});
                    (start.to_vec(), n0.to_f64(), cfg.seed, vec![rec])
                }
            }
        }
        Some(other) => return Err(CliError::Input(format!("unknown --init {other:?}"))),
        None => {
            if restarts == 0 {
                return Err(CliError::Input("--restarts must be at least 1".into()));
            }
            let runs: Vec<_> = (0..restarts as u64)
                .into_par_iter()
                .map(|k| {
                    let mut search = cfg.search.clone();
                    search.seed = cfg.seed.wrapping_add(k);
                    let outcome = solve_pipeline::<MpFloat>(&search, &cfg.validity, p, cfg.newton_tol, cfg.newton_max_iter);
                    (search.seed, outcome)
                })
                .collect();
            let mut best: Option<(u64, slowdisp_core::solver::PipelineOutcome<MpFloat>)> = None;
            for (seed, outcome) in runs {
                let outcome = outcome?;
                if best.as_ref().map_or(true, |(_, b)| outcome.best_norm() < b.best_norm()) {
                    best = Some((seed, outcome));
                }
            }
            let (seed, outcome) = best.expect("at least one restart");
            let point = match &outcome.newton {
                Ok(n) => n.point.to_vec(),
                Err(_) => outcome.descent.point.iter().map(|v| MpFloat::from_f64(*v, p)).collect(),
            };
            (point, outcome.best_norm(), seed, outcome.stages.iter().map(stage_json).collect())
        }
    };
    let x: Vec4<MpFloat> = std::array::from_fn(|i| point[i].clone());
    let doc = json!({
        "point": point_json(&point),
        "residual_norm": real(norm),
        "orbit": symmetry_orbit(&x).iter().map(|q| point_json(q)).collect::<Vec<_>>(),
        "seed": seed,
        "precision_bits": p.mantissa_bits(),
        "stage_log": stages,
    });
    write_atomic(out, &canonical_json(&doc))?;
    let status = if norm <= cfg.accept_residual { EXIT_OK } else { EXIT_MATH };
    Ok(Report { status, stdout: format!("residual_norm {norm:e}\n") })
}

pub fn cmd_certify(
    cfg: &RunConfig,
    root: Option<&Path>,
    radius: f64,
    strategy: Strategy,
    out: &Path,
    compare: bool,
) -> CliResult<Report> {
    let p = cfg.precision;
    let x0 = match root {
        Some(path) => read_root(path, p)?,
        None => as_vec4(&cfg.build_word()?)?,
    };
    let cert = certify(&x0, radius, strategy, p)?;
    write_atomic(out, &cert.to_canonical_json())?;
    let mut stdout = format!("verdict {}\n", cert.verdict);
    if compare {
        let g = gradient_diagnostics(&x0, p)?;
        stdout.push_str(&comparison_table(&[
            ("||grad a2||", g.gradient_norms[0], 3.75),
            ("||grad a4||", g.gradient_norms[1], 10.33),
            ("||grad a6||", g.gradient_norms[2], 19.14),
            ("||grad a8||", g.gradient_norms[3], 41.82),
            ("normalized determinant", g.normalized_determinant, 0.413),
            ("||DH||", g.jacobian_norm, 43.96),
            ("||DH^-1||", g.inverse_jacobian_norm, 0.35),
            ("||H||", cert.residual_norm.to_f64(), 5.2e-15),
        ]));
    }
    let status = if cert.verdict { EXIT_OK } else { EXIT_MATH };
    Ok(Report { status, stdout })
}

pub fn cmd_dispersion(
    cfg: &RunConfig,
    root: Option<&Path>,
    refine: bool,
    xi_max: f64,
    grid: usize,
    out: &Path,
) -> CliResult<Report> {
    let p = cfg.precision;
    let word = load_word(cfg, root, refine)?;
    let prof = dispersion_profile(&word, cfg.order, xi_max, grid, cfg.flatness_tol(), p)?;
    let rows: Vec<Vec<String>> = prof
        .grid
        .iter()
        .map(|g| vec![g.xi.to_decimal_string(), g.theta.to_decimal_string(), g.f.to_decimal_string()])
        .collect();
    write_atomic(out, &csv(&["xi", "theta", "F"], &rows))?;
    let exponent = flatness_exponent(&word, 1e-3, 1e-1, 41, p).ok().map(real).unwrap_or(Value::Null);
    let doc = json!({
        "theta0": s(&prof.theta0),
        "k": prof.flatness_order,
        "theta_k0": s(&prof.leading_derivative),
        "s0": s(&prof.group_velocity),
        "flatness_exponent": exponent,
        "order": cfg.order,
        "precision_bits": p.mantissa_bits(),
    });
    write_atomic(&sidecar(out), &canonical_json(&doc))?;
    Ok(Report::ok(format!("k {}\n", prof.flatness_order)))
}

/// One row of the decay table.
#[derive(Clone, Debug, PartialEq)]
pub struct DecayRow {
    pub n: u64,
    pub amplitude_plus: f64,
    pub amplitude_minus: f64,
    pub prediction: f64,
}

fn parse_n_list(n_list: &[f64]) -> CliResult<Vec<u64>> {
    if n_list.len() < 5 {
        return Err(CliError::Input(format!("--n-list needs at least 5 entries, got {}", n_list.len())));
    }
    let ns: Vec<u64> = n_list
        .iter()
        .map(|&v| {
            if v >= 1.0 && v.is_finite() && v <= 2f64.powi(53) {
                Ok(v.round() as u64)
            } else {
                Err(CliError::Input(format!("period count {v} out of range")))
            }
        })
        .collect::<CliResult<_>>()?;
    if ns.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CliError::Input("--n-list must be strictly increasing".into()));
    }
    Ok(ns)
}

pub fn cmd_decay(
    cfg: &RunConfig,
    root: Option<&Path>,
    refine: bool,
    n_list: &[f64],
    bump_width: Option<f64>,
    out: &Path,
) -> CliResult<Report> {
    let p = cfg.precision;
    let ns = parse_n_list(n_list)?;
    let word = load_word(cfg, root, refine)?;
    let tj = trace_jet(&word_jet(&word, cfg.order, p), p)?;
    let theta = theta_jet(&tj, p)?;
    let (k, dk) = flatness_order(&theta, cfg.flatness_tol())?;
    let theta0 = theta.coeff(0).re.to_f64();
    let s0 = -theta.coeff(1).re.to_f64();
    let b = match bump_width {
        Some(b) => b,
        None => {
            let long = theta_jet(&trace_jet(&word_jet(&word, BUMP_JET_ORDER.max(cfg.order), p), p)?, p)?;
            default_bump_width(&long, k, BUMP_WIDTH_CAP, BUMP_WIDTH_STEP)?
        }
    };
    let bump = BumpProfile::new(b)?;
    let rows: Vec<DecayRow> = ns
        .par_iter()
        .map(|&n| -> CliResult<DecayRow> {
            let x = n as f64 * s0;
            let at_plus = oscillatory_amplitude(&word, &bump, n, x, p)?;
            let minus = if x == 0.0 { at_plus.minus.clone() } else { oscillatory_amplitude(&word, &bump, n, -x, p)?.minus };
            let pred = stationary_phase_prediction(k, dk.to_f64(), Complex::new(1.0, 0.0), theta0, n)?;
            Ok(DecayRow { n, amplitude_plus: at_plus.plus.abs(), amplitude_minus: minus.abs(), prediction: pred.abs() })
        })
        .collect::<CliResult<_>>()?;
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![r.n.to_string(), format!("{:e}", r.amplitude_plus), format!("{:e}", r.amplitude_minus), format!("{:e}", r.prediction)])
        .collect();
    write_atomic(out, &csv(&["n", "amplitude_plus", "amplitude_minus", "prediction"], &table))?;
    let fit = decay_fit(&rows.iter().map(|r| (r.n, r.amplitude_plus)).collect::<Vec<_>>())?;
    let last = rows.last().expect("at least five rows");
    let doc = json!({
        "slope": real(fit.slope),
        "intercept": real(fit.intercept),
        "r2": real(fit.r_squared),
        "k": k,
        "theta_k0": s(&dk),
        "bump_width": real(b),
        "ratio_at_largest_n": real(last.amplitude_plus / last.prediction),
        "n_values": ns,
    });
    write_atomic(&sidecar(out), &canonical_json(&doc))?;
    Ok(Report::ok(format!("slope {:e}\n", fit.slope)))
}
