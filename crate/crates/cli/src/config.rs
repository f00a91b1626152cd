//! Experiment configuration: JSON schema, decimal-string rates, and the
//! conversion into core model types.
//!
//! Rates (healing rates, infection weights, feedback gains) are written
//! as decimal strings and parsed once into exact rationals. Equal-fitness
//! hypotheses are exact equalities that binary floating point would
//! silently break, so the ratio comparison δ¹/β¹ vs δ²/β² is carried out
//! on the rationals and handed to the library as an ordering; the f64
//! model is derived from the same rationals.

use std::cmp::Ordering;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Deserialize;

use bivirus_core::dynamics::{IntegratorConfig, Method};
use bivirus_core::equilibria::FixedPointConfig;
use bivirus_core::model::{BiVirusModel, SystemState, VirusParams};
use bivirus_core::netgraph::{ContactGraph, GraphArc};
use bivirus_core::verify::SuiteConfig;

use crate::error::CliError;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    #[serde(default)]
    pub initial_states: Vec<StateConfig>,
    #[serde(default)]
    pub integrator: IntegratorSection,
    #[serde(default)]
    pub fixed_point: FixedPointSection,
    #[serde(default)]
    pub sensitivity: SensitivitySection,
    #[serde(default)]
    pub control: Option<ControlSection>,
    #[serde(default)]
    pub verify: VerifySection,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_seed() -> u64 {
    42
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub n: usize,
    pub virus1: VirusConfig,
    pub virus2: VirusConfig,
}

/// One virus, given either as an arc list or a dense matrix of
/// decimal-string rates.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VirusConfig {
    pub delta: Vec<String>,
    #[serde(default)]
    pub arcs: Option<Vec<ArcConfig>>,
    #[serde(default)]
    pub matrix: Option<Vec<Vec<String>>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArcConfig {
    pub source: usize,
    pub target: usize,
    pub weight: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateConfig {
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorSection {
    /// "rk45" (adaptive, default) or "rk4" (fixed step, requires dt).
    pub method: String,
    pub dt: Option<f64>,
    pub rtol: f64,
    pub atol: f64,
    pub t_max: f64,
    pub convergence_tol: f64,
    pub record_stride: usize,
}

impl Default for IntegratorSection {
    fn default() -> Self {
        Self {
            method: "rk45".into(),
            dt: None,
            rtol: 1e-8,
            atol: 1e-10,
            t_max: 1e4,
            convergence_tol: 1e-10,
            record_stride: 1,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FixedPointSection {
    pub c_fraction: f64,
    pub epsilon_scale: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FixedPointSection {
    fn default() -> Self {
        let d = FixedPointConfig::default();
        Self {
            c_fraction: d.c_fraction,
            epsilon_scale: d.epsilon_scale,
            tol: d.tol,
            max_iter: d.max_iter,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensitivitySection {
    /// Perturbation magnitude for the monotonicity table.
    pub step: f64,
}

impl Default for SensitivitySection {
    fn default() -> Self {
        Self { step: 1e-4 }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlSection {
    /// Gains are rates: decimal strings.
    pub k1: Vec<String>,
    pub k2: Vec<String>,
    #[serde(default = "default_epsilons")]
    pub epsilons: Vec<f64>,
}

fn default_epsilons() -> Vec<f64> {
    vec![1e-6, 1e-4, 1e-2]
}

/// Optional trial-count overrides for the property suite.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VerifySection {
    pub trichotomy_trials: Option<usize>,
    pub sign_pattern_trials: Option<usize>,
    pub negative_inverse_trials: Option<usize>,
    pub perron_trials: Option<usize>,
    pub healthy_trials: Option<usize>,
    pub solver_trials: Option<usize>,
    pub uniqueness_initializers: Option<usize>,
    pub fitter_trials: Option<usize>,
    pub coexistence_trials: Option<usize>,
    pub sensitivity_trials: Option<usize>,
    pub feedback_trials: Option<usize>,
    pub invariance_trials: Option<usize>,
    pub positivity_trials: Option<usize>,
    pub lyapunov_trials: Option<usize>,
}

/// Parses a decimal string into an exact rational. Accepts an optional
/// sign, an integer part, and an optional fractional part.
pub fn parse_decimal(s: &str) -> Result<BigRational, String> {
    let t = s.trim();
    let (sign, digits) = match t.strip_prefix('-') {
        Some(rest) => (-1, rest),
        None => (1, t.strip_prefix('+').unwrap_or(t)),
    };
    let (int_part, frac_part) = match digits.split_once('.') {
        Some((i, f)) => (i, f),
        None => (digits, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(format!("'{s}' is not a decimal number"));
    }
    if !int_part.chars().all(|c| c.is_ascii_digit())
        || !frac_part.chars().all(|c| c.is_ascii_digit())
    {
        return Err(format!(
            "'{s}' is not a plain decimal (digits with an optional sign and point)"
        ));
    }
    let mut numer = BigInt::zero();
    for c in int_part.chars().chain(frac_part.chars()) {
        numer = numer * 10 + (c as u8 - b'0');
    }
    let mut denom = BigInt::one();
    for _ in 0..frac_part.len() {
        denom *= 10;
    }
    Ok(BigRational::new(numer * sign, denom))
}

fn rational_f64(r: &BigRational, field: &str) -> Result<f64, CliError> {
    r.to_f64()
        .filter(|v| v.is_finite())
        .ok_or_else(|| CliError::Parse(format!("{field}: value out of f64 range")))
}

fn parse_rate(s: &str, field: &str) -> Result<BigRational, CliError> {
    parse_decimal(s).map_err(|e| CliError::Parse(format!("{field}: {e}")))
}

/// One virus parsed to both exact rationals and the f64 model.
pub struct ParsedVirus {
    pub params: VirusParams,
    pub delta: Vec<BigRational>,
    pub weights: Vec<Vec<BigRational>>,
}

fn parse_virus(n: usize, cfg: &VirusConfig, label: &str) -> Result<ParsedVirus, CliError> {
    if cfg.delta.len() != n {
        return Err(CliError::Parse(format!(
            "{label}.delta: expected {n} entries, got {}",
            cfg.delta.len()
        )));
    }
    let delta: Vec<BigRational> = cfg
        .delta
        .iter()
        .enumerate()
        .map(|(i, s)| parse_rate(s, &format!("{label}.delta[{i}]")))
        .collect::<Result<_, _>>()?;

    let weights: Vec<Vec<BigRational>> = match (&cfg.arcs, &cfg.matrix) {
        (Some(arcs), None) => {
            // Reuse the graph validation (indices, duplicates, weights).
            let graph_arcs: Vec<GraphArc> = arcs
                .iter()
                .enumerate()
                .map(|(k, a)| {
                    let w = parse_rate(&a.weight, &format!("{label}.arcs[{k}].weight"))?;
                    Ok(GraphArc::new(
                        a.source,
                        a.target,
                        rational_f64(&w, &format!("{label}.arcs[{k}].weight"))?,
                    ))
                })
                .collect::<Result<_, CliError>>()?;
            ContactGraph::new(n, graph_arcs).map_err(CliError::Core)?;
            let mut grid = vec![vec![BigRational::zero(); n]; n];
            for (k, a) in arcs.iter().enumerate() {
                grid[a.target][a.source] =
                    parse_rate(&a.weight, &format!("{label}.arcs[{k}].weight"))?;
            }
            grid
        }
        (None, Some(rows)) => {
            if rows.len() != n || rows.iter().any(|r| r.len() != n) {
                return Err(CliError::Parse(format!(
                    "{label}.matrix: expected {n}x{n} entries"
                )));
            }
            rows.iter()
                .enumerate()
                .map(|(i, row)| {
                    row.iter()
                        .enumerate()
                        .map(|(j, s)| parse_rate(s, &format!("{label}.matrix[{i}][{j}]")))
                        .collect()
                })
                .collect::<Result<_, _>>()?
        }
        (Some(_), Some(_)) => {
            return Err(CliError::Parse(format!(
                "{label}: give either 'arcs' or 'matrix', not both"
            )))
        }
        (None, None) => {
            return Err(CliError::Parse(format!(
                "{label}: missing infection rates; give 'arcs' or 'matrix'"
            )))
        }
    };

    let delta_f = DVector::from_fn(n, |i, _| {
        rational_f64(&delta[i], "delta").unwrap_or(f64::NAN)
    });
    let b_f = DMatrix::from_fn(n, n, |i, j| {
        rational_f64(&weights[i][j], "matrix").unwrap_or(f64::NAN)
    });
    if delta_f.iter().any(|v| v.is_nan()) || b_f.iter().any(|v| v.is_nan()) {
        return Err(CliError::Parse(format!("{label}: rate out of f64 range")));
    }
    let params = VirusParams::new(delta_f, b_f).map_err(CliError::Core)?;
    Ok(ParsedVirus {
        params,
        delta,
        weights,
    })
}

/// Extracts the (δ, β) scalars of a homogeneous virus on the rationals:
/// all healing rates equal and positive, all positive weights equal.
fn homogeneous_rationals(v: &ParsedVirus) -> Option<(BigRational, BigRational, Vec<Vec<bool>>)> {
    let delta = v.delta.first()?.clone();
    if !delta.is_positive() || v.delta.iter().any(|d| *d != delta) {
        return None;
    }
    let mut beta: Option<BigRational> = None;
    let n = v.weights.len();
    let mut pattern = vec![vec![false; n]; n];
    for (row_w, row_p) in v.weights.iter().zip(pattern.iter_mut()) {
        for (w, p) in row_w.iter().zip(row_p.iter_mut()) {
            if w.is_positive() {
                *p = true;
                match &beta {
                    None => beta = Some(w.clone()),
                    Some(b) if b != w => return None,
                    Some(_) => {}
                }
            }
        }
    }
    beta.map(|b| (delta, b, pattern))
}

/// Exact fitness-ratio ordering δ¹/β¹ vs δ²/β² when the model is
/// homogeneous on one shared graph, computed on the rationals.
pub fn exact_ratio_ordering(v1: &ParsedVirus, v2: &ParsedVirus) -> Option<Ordering> {
    let (d1, b1, pat1) = homogeneous_rationals(v1)?;
    let (d2, b2, pat2) = homogeneous_rationals(v2)?;
    if pat1 != pat2 {
        return None;
    }
    Some((d1 * b2).cmp(&(d2 * b1)))
}

/// Fully parsed experiment, ready to run.
pub struct Experiment {
    pub model: BiVirusModel,
    /// Exact equal-fitness ordering from the rational rates, when the
    /// model is homogeneous on a shared graph.
    pub ratio_ordering: Option<Ordering>,
    pub initial_states: Vec<SystemState>,
    pub integrator: IntegratorConfig,
    pub fixed_point: FixedPointConfig,
    pub sensitivity_step: f64,
    pub control: Option<ControlPlan>,
    pub suite: SuiteConfig,
    pub seed: u64,
    pub output_dir: PathBuf,
}

pub struct ControlPlan {
    pub k1: DVector<f64>,
    pub k2: DVector<f64>,
    pub epsilons: Vec<f64>,
}

fn build_integrator(sec: &IntegratorSection) -> Result<IntegratorConfig, CliError> {
    let method = match sec.method.as_str() {
        "rk45" => Method::Rk45Adaptive {
            rtol: sec.rtol,
            atol: sec.atol,
        },
        "rk4" => Method::Rk4Fixed {
            dt: sec.dt.ok_or_else(|| {
                CliError::Parse("integrator.dt is required for method \"rk4\"".into())
            })?,
        },
        other => {
            return Err(CliError::Parse(format!(
                "integrator.method: unknown method '{other}' (expected \"rk45\" or \"rk4\")"
            )))
        }
    };
    let cfg = IntegratorConfig {
        method,
        t_max: sec.t_max,
        convergence_tol: sec.convergence_tol,
        record_stride: sec.record_stride,
    };
    cfg.validate().map_err(CliError::Core)?;
    Ok(cfg)
}

fn build_suite(sec: &VerifySection, seed: u64) -> SuiteConfig {
    let d = SuiteConfig::default();
    SuiteConfig {
        seed,
        trichotomy_trials: sec.trichotomy_trials.unwrap_or(d.trichotomy_trials),
        sign_pattern_trials: sec.sign_pattern_trials.unwrap_or(d.sign_pattern_trials),
        negative_inverse_trials: sec
            .negative_inverse_trials
            .unwrap_or(d.negative_inverse_trials),
        perron_trials: sec.perron_trials.unwrap_or(d.perron_trials),
        healthy_trials: sec.healthy_trials.unwrap_or(d.healthy_trials),
        solver_trials: sec.solver_trials.unwrap_or(d.solver_trials),
        uniqueness_initializers: sec
            .uniqueness_initializers
            .unwrap_or(d.uniqueness_initializers),
        fitter_trials: sec.fitter_trials.unwrap_or(d.fitter_trials),
        coexistence_trials: sec.coexistence_trials.unwrap_or(d.coexistence_trials),
        sensitivity_trials: sec.sensitivity_trials.unwrap_or(d.sensitivity_trials),
        feedback_trials: sec.feedback_trials.unwrap_or(d.feedback_trials),
        invariance_trials: sec.invariance_trials.unwrap_or(d.invariance_trials),
        positivity_trials: sec.positivity_trials.unwrap_or(d.positivity_trials),
        lyapunov_trials: sec.lyapunov_trials.unwrap_or(d.lyapunov_trials),
    }
}

fn parse_gains(raw: &[String], n: usize, field: &str) -> Result<DVector<f64>, CliError> {
    if raw.len() != n {
        return Err(CliError::Parse(format!(
            "{field}: expected {n} gains, got {}",
            raw.len()
        )));
    }
    let mut out = DVector::zeros(n);
    for (i, s) in raw.iter().enumerate() {
        let r = parse_rate(s, &format!("{field}[{i}]"))?;
        out[i] = rational_f64(&r, &format!("{field}[{i}]"))?;
    }
    Ok(out)
}

/// Loads and fully parses an experiment configuration file.
pub fn load_experiment(path: &Path) -> Result<Experiment, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Parse(format!("cannot read {}: {e}", path.display())))?;
    let mut de = serde_json::Deserializer::from_str(&text);
    let cfg: ExperimentConfig = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        CliError::Parse(format!(
            "{} at field '{}': {}",
            path.display(),
            e.path(),
            e.inner()
        ))
    })?;

    let n = cfg.model.n;
    if n == 0 {
        return Err(CliError::Parse("model.n must be positive".into()));
    }
    let v1 = parse_virus(n, &cfg.model.virus1, "model.virus1")?;
    let v2 = parse_virus(n, &cfg.model.virus2, "model.virus2")?;
    let ratio_ordering = exact_ratio_ordering(&v1, &v2);
    let model = BiVirusModel::new(v1.params, v2.params).map_err(CliError::Core)?;

    let initial_states = cfg
        .initial_states
        .iter()
        .enumerate()
        .map(|(k, s)| {
            if s.x1.len() != n || s.x2.len() != n {
                return Err(CliError::Parse(format!(
                    "initial_states[{k}]: expected {n} entries per virus"
                )));
            }
            SystemState::new(
                DVector::from_vec(s.x1.clone()),
                DVector::from_vec(s.x2.clone()),
            )
            .map_err(CliError::Core)
        })
        .collect::<Result<Vec<_>, _>>()?;

    let fixed_point = FixedPointConfig {
        c_fraction: cfg.fixed_point.c_fraction,
        epsilon_scale: cfg.fixed_point.epsilon_scale,
        tol: cfg.fixed_point.tol,
        max_iter: cfg.fixed_point.max_iter,
    };
    fixed_point.validate().map_err(CliError::Core)?;

    let control = cfg
        .control
        .as_ref()
        .map(|c| -> Result<ControlPlan, CliError> {
            Ok(ControlPlan {
                k1: parse_gains(&c.k1, n, "control.k1")?,
                k2: parse_gains(&c.k2, n, "control.k2")?,
                epsilons: c.epsilons.clone(),
            })
        })
        .transpose()?;

    Ok(Experiment {
        model,
        ratio_ordering,
        initial_states,
        integrator: build_integrator(&cfg.integrator)?,
        fixed_point,
        sensitivity_step: cfg.sensitivity.step,
        control,
        suite: build_suite(&cfg.verify, cfg.seed),
        seed: cfg.seed,
        output_dir: cfg.output_dir,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimal_parsing() {
        assert_eq!(
            parse_decimal("1.25").unwrap(),
            BigRational::new(BigInt::from(5), BigInt::from(4))
        );
        assert_eq!(
            parse_decimal("2").unwrap(),
            BigRational::from(BigInt::from(2))
        );
        assert_eq!(
            parse_decimal("-0.5").unwrap(),
            BigRational::new(BigInt::from(-1), BigInt::from(2))
        );
        assert_eq!(
            parse_decimal(" 0.10 ").unwrap(),
            BigRational::new(BigInt::from(1), BigInt::from(10))
        );
        assert!(parse_decimal("1e-3").is_err());
        assert!(parse_decimal(".").is_err());
        assert!(parse_decimal("abc").is_err());
    }

    #[test]
    fn exact_ratio_ordering_beats_floating_point() {
        // 0.1/0.3 = 0.3/0.9 exactly as rationals, but the f64 cross
        // products 0.1·0.9 and 0.3·0.3 differ in the last ulp.
        let make = |delta: &str, beta: &str| VirusConfig {
            delta: vec![delta.into(), delta.into()],
            arcs: None,
            matrix: Some(vec![
                vec!["0".into(), beta.into()],
                vec![beta.into(), "0".into()],
            ]),
        };
        let v1 = parse_virus(2, &make("0.1", "0.3"), "v1").unwrap();
        let v2 = parse_virus(2, &make("0.3", "0.9"), "v2").unwrap();
        assert_eq!(exact_ratio_ordering(&v1, &v2), Some(Ordering::Equal));
        assert_ne!(0.1 * 0.9, 0.3 * 0.3, "f64 would misreport this tie");

        let v3 = parse_virus(2, &make("0.2", "0.5"), "v3").unwrap();
        assert_eq!(exact_ratio_ordering(&v1, &v3), Some(Ordering::Less));
    }
}
