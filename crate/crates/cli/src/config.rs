//! Run configuration: JSON schema, defaults and word construction.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use serde_json::Value;
use slowdisp_core::solver::{published_root, SearchConfig, ValidityConstraints};
use slowdisp_core::su2::{Sign, Word};
use slowdisp_core::{MpFloat, Precision, Real};

use crate::error::{CliError, CliResult};

pub const ROOT_ALIAS: &str = "paper-root";

/// Word as written in a config: the alias or explicit letters. Durations may
/// be JSON numbers or decimal strings; both are parsed at full precision.
#[derive(Clone, Debug, PartialEq)]
pub enum WordSpec {
    PublishedRoot,
    Explicit { signs: Vec<i64>, durations: Vec<String> },
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    pub newton_tol: Option<f64>,
    pub newton_max_iter: Option<usize>,
    pub accept_residual: Option<f64>,
    pub flatness_tol: Option<f64>,
    pub samples: Option<usize>,
    pub eta0: Option<f64>,
    pub shrink_factor: Option<f64>,
    pub stall_threshold: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    word: Option<Value>,
    order: Option<usize>,
    precision_bits: Option<u32>,
    seed: Option<u64>,
    validity: Option<ValidityConstraints>,
    thresholds: Option<Thresholds>,
    #[serde(default)]
    outputs: BTreeMap<String, PathBuf>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub word: WordSpec,
    pub order: usize,
    pub precision: Precision,
    pub seed: u64,
    pub validity: ValidityConstraints,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub accept_residual: f64,
    pub flatness_tol: Option<f64>,
    pub search: SearchConfig,
    /// Default output path per command name.
    pub outputs: BTreeMap<String, PathBuf>,
}

/// Newton stopping tolerance `2^(-0.75 bits)`: about `1e-12` at 53 bits and
/// `1e-58` at 256 bits.
pub fn default_newton_tol(p: Precision) -> f64 {
    2f64.powf(-0.75 * p.mantissa_bits() as f64)
}

impl Default for RunConfig {
    fn default() -> Self {
        let p = Precision::HIGH;
        RunConfig {
            word: WordSpec::PublishedRoot,
            order: slowdisp_core::dispersion::DEFAULT_ORDER,
            precision: p,
            seed: 0,
            validity: ValidityConstraints::default(),
            newton_tol: default_newton_tol(p),
            newton_max_iter: 20,
            accept_residual: 1e-12,
            flatness_tol: None,
            search: SearchConfig::default(),
            outputs: BTreeMap::new(),
        }
    }
}

fn parse_word(v: &Value) -> CliResult<WordSpec> {
    match v {
        Value::String(s) if s == ROOT_ALIAS => Ok(WordSpec::PublishedRoot),
        Value::String(s) => Err(CliError::Input(format!("unknown word alias {s:?}"))),
        Value::Object(map) => {
            for key in map.keys() {
                if key != "signs" && key != "durations" {
                    return Err(CliError::Input(format!("unknown word field {key:?}")));
                }
            }
            let signs = map
                .get("signs")
                .and_then(Value::as_array)
                .ok_or_else(|| CliError::Input("word.signs must be an array".into()))?
                .iter()
                .map(|s| s.as_i64().ok_or_else(|| CliError::Input(format!("bad sign {s}"))))
                .collect::<CliResult<Vec<_>>>()?;
            let durations = map
                .get("durations")
                .and_then(Value::as_array)
                .ok_or_else(|| CliError::Input("word.durations must be an array".into()))?
                .iter()
                .map(|d| match d {
                    Value::Number(n) => Ok(n.to_string()),
                    Value::String(s) => Ok(s.clone()),
                    other => Err(CliError::Input(format!("bad duration {other}"))),
                })
                .collect::<CliResult<Vec<_>>>()?;
            if signs.len() != durations.len() {
                return Err(CliError::Input(format!(
                    "{} signs but {} durations",
                    signs.len(),
                    durations.len()
                )));
            }
            if signs.is_empty() {
                return Err(CliError::Input("word must have at least one letter".into()));
            }
            Ok(WordSpec::Explicit { signs, durations })
        }
        other => Err(CliError::Input(format!("word must be an alias or an object, got {other}"))),
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> CliResult<Self> {
        let raw: RawConfig =
            serde_json::from_str(text).map_err(|e| CliError::Input(format!("config: {e}")))?;
        let mut cfg = RunConfig::default();
        if let Some(w) = &raw.word {
            cfg.word = parse_word(w)?;
        }
        if let Some(o) = raw.order {
            cfg.order = o;
        }
        if let Some(bits) = raw.precision_bits {
            cfg.set_precision(bits)?;
        }
        if let Some(s) = raw.seed {
            cfg.seed = s;
        }
        if let Some(v) = raw.validity {
            cfg.validity = ValidityConstraints::new(v.min_duration, v.min_abs_alt_sum)?;
        }
        if let Some(t) = raw.thresholds {
            if let Some(x) = t.newton_tol {
                cfg.newton_tol = x;
            }
            if let Some(x) = t.newton_max_iter {
                cfg.newton_max_iter = x;
            }
            if let Some(x) = t.accept_residual {
                cfg.accept_residual = x;
            }
            cfg.flatness_tol = t.flatness_tol.or(cfg.flatness_tol);
            if let Some(x) = t.samples {
                cfg.search.samples = x;
            }
            if let Some(x) = t.eta0 {
                cfg.search.eta0 = x;
            }
            if let Some(x) = t.shrink_factor {
                cfg.search.shrink_factor = x;
            }
            if let Some(x) = t.stall_threshold {
                cfg.search.stall_threshold = x;
            }
        }
        cfg.outputs = raw.outputs;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| CliError::Read { path: path.to_path_buf(), source })?;
        Self::from_json(&text)
    }

    /// Changes the working precision; the Newton tolerance follows unless it
    /// was tightened explicitly below the new default.
    pub fn set_precision(&mut self, bits: u32) -> CliResult<()> {
        let p = Precision::new(bits)?;
        if self.newton_tol == default_newton_tol(self.precision) {
            self.newton_tol = default_newton_tol(p);
        }
        self.precision = p;
        Ok(())
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.search.seed = seed;
    }

    pub fn validate(&mut self) -> CliResult<()> {
        self.search.seed = self.seed;
        self.search.validate()?;
        if self.order < 2 {
            return Err(CliError::Input(format!("order must be at least 2, got {}", self.order)));
        }
        if !(self.newton_tol > 0.0 && self.accept_residual > 0.0) {
            return Err(CliError::Input("tolerances must be positive".into()));
        }
        if let Some(t) = self.flatness_tol {
            if !(t > 0.0) {
                return Err(CliError::Input("flatness_tol must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn flatness_tol(&self) -> f64 {
        self.flatness_tol
            .unwrap_or_else(|| slowdisp_core::dispersion::default_flatness_tol(self.precision))
    }

    /// The configured word at the working precision.
    pub fn build_word(&self) -> CliResult<Word<MpFloat>> {
        let p = self.precision;
        match &self.word {
            WordSpec::PublishedRoot => Ok(Word::alternating4(&published_root::<MpFloat>(p))?),
            WordSpec::Explicit { signs, durations } => {
                let mut letters = Vec::with_capacity(signs.len());
                for (s, d) in signs.iter().zip(durations) {
                    letters.push((Sign::from_value(*s)?, MpFloat::parse_decimal(d, p)?));
                }
                Ok(Word::new(letters)?)
            }
        }
    }

    pub fn output_for(&self, command: &str) -> Option<PathBuf> {
        self.outputs.get(command).cloned()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_alias() {
        let c = RunConfig::from_json(r#"{"word": "paper-root"}"#).unwrap();
        assert_eq!(c.word, WordSpec::PublishedRoot);
        assert_eq!(c.precision.mantissa_bits(), 256);
        assert_eq!(c.order, 12);
        let w = c.build_word().unwrap();
        assert_eq!(w.len(), 4);
        assert!(w.is_alternating());
    }

    #[test]
    fn explicit_word_with_mixed_durations() {
        let c = RunConfig::from_json(
            r#"{"word": {"signs": [1, -1], "durations": [1.5, "0.25"]}, "precision_bits": 53}"#,
        )
        .unwrap();
        let w = c.build_word().unwrap();
        assert_eq!(w.durations()[1].to_f64(), 0.25);
        assert_eq!(c.newton_tol, default_newton_tol(Precision::DOUBLE));
    }

    #[test]
    fn rejects_bad_configs() {
        for bad in [
            r#"{"word": "other"}"#,
            r#"{"word": {"signs": [1], "durations": []}}"#,
            r#"{"precision_bits": 20}"#,
            r#"{"unknown": 1}"#,
            r#"{"validity": {"min_duration": -1, "min_abs_alt_sum": 0.1}}"#,
        ] {
            assert!(RunConfig::from_json(bad).is_err(), "{bad}");
        }
        let c = RunConfig::from_json(r#"{"word": {"signs": [2], "durations": [1]}}"#).unwrap();
        assert!(c.build_word().is_err());
    }
}
