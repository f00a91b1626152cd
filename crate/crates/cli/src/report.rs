//! Report and trajectory file emission.
//!
//! Reports are pretty-printed JSON whose field order is fixed by the
//! struct definitions, so identical runs produce byte-identical files —
//! the one exception is the `generated` timestamp, always the first
//! field (one metadata line). Trajectories are delimited text with a
//! `t,x1_0,...,x1_{n-1},x2_0,...,x2_{n-1}` header and full double
//! precision (17 significant digits) per value.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use bivirus_core::dynamics::{TerminalReason, TrajectoryRecord};
use bivirus_core::equilibria::{EquilibriumKind, Fitness, RegimeLabel, StabilityVerdict};
use bivirus_core::model::SystemState;
use bivirus_core::sensitivity::MonotonicityReport;

use crate::error::CliError;

pub fn timestamp() -> String {
    chrono::Utc::now().to_rfc3339()
}

#[derive(Serialize)]
pub struct StateJson {
    pub x1: Vec<f64>,
    pub x2: Vec<f64>,
}

impl From<&SystemState> for StateJson {
    fn from(s: &SystemState) -> Self {
        Self {
            x1: s.x1().iter().copied().collect(),
            x2: s.x2().iter().copied().collect(),
        }
    }
}

#[derive(Serialize)]
pub struct CheckJson {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Serialize)]
pub struct ValidationJson {
    pub passed: bool,
    pub profile: String,
    pub checks: Vec<CheckJson>,
    pub warnings: Vec<String>,
}

#[derive(Serialize)]
pub struct RegimeJson {
    pub label: String,
    pub fitness: Option<String>,
    pub s1: f64,
    pub s2: f64,
    pub rho1: Option<f64>,
    pub rho2: Option<f64>,
}

#[derive(Serialize)]
pub struct ClassifyReport {
    pub generated: String,
    pub validation: ValidationJson,
    pub regime: Option<RegimeJson>,
}

#[derive(Serialize)]
pub struct EquilibriumJson {
    pub kind: EquilibriumKind,
    pub point: StateJson,
    pub residual: f64,
    pub jacobian_abscissa: f64,
    pub verdict: StabilityVerdict,
}

#[derive(Serialize)]
pub struct ContinuumPointJson {
    pub alpha: f64,
    pub point: StateJson,
    pub field_residual: f64,
    pub max_parallel_deviation: f64,
    pub sum_deviation: Option<f64>,
}

#[derive(Serialize)]
pub struct ContinuumJson {
    pub basis: String,
    pub ratio: Option<f64>,
    pub sum_state: Option<Vec<f64>>,
    pub points: Vec<ContinuumPointJson>,
}

#[derive(Serialize)]
pub struct EquilibriumListReport {
    pub generated: String,
    pub regime: RegimeJson,
    pub equilibria: Vec<EquilibriumJson>,
    pub continuum: Option<ContinuumJson>,
}

#[derive(Serialize)]
pub struct SimulationRunJson {
    pub index: usize,
    pub terminal_reason: String,
    pub terminal_time: f64,
    pub terminal: StateJson,
    pub max_projection_violation: f64,
    pub records: usize,
    pub trajectory_file: String,
}

#[derive(Serialize)]
pub struct SimulateReport {
    pub generated: String,
    pub runs: Vec<SimulationRunJson>,
}

#[derive(Serialize)]
pub struct SensitivityRowJson {
    pub parameter: String,
    pub d_x: Vec<f64>,
    pub verdict: String,
    pub fd_verdict: String,
    pub consistent: bool,
}

#[derive(Serialize)]
pub struct SensitivityReport {
    pub generated: String,
    pub virus: String,
    pub x_star: Vec<f64>,
    pub system_matrix_abscissa: f64,
    pub condition_estimate: f64,
    pub step: f64,
    pub all_consistent: bool,
    pub rows: Vec<SensitivityRowJson>,
    pub table_file: String,
}

#[derive(Serialize)]
pub struct ControlRunJson {
    pub epsilon: f64,
    pub direction: usize,
    pub terminal: Vec<f64>,
    pub distance_to_epidemic: f64,
    pub converged_to_epidemic: bool,
    pub escaped: bool,
}

#[derive(Serialize)]
pub struct BaselineJson {
    pub s_value: f64,
    pub terminal_norm: f64,
    pub reached_healthy: bool,
}

#[derive(Serialize)]
pub struct ControlReport {
    pub generated: String,
    pub rho: f64,
    pub x_star: Vec<f64>,
    pub all_converged_to_epidemic: bool,
    pub all_escaped: bool,
    pub baseline: BaselineJson,
    pub runs: Vec<ControlRunJson>,
    pub feedback_runs: Vec<SimulationRunJson>,
}

#[derive(Serialize)]
pub struct VerifyReport {
    pub generated: String,
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<CheckJson>,
}

pub fn regime_strings(label: &RegimeLabel) -> (String, Option<String>) {
    match label {
        RegimeLabel::BothSubcritical => ("BothSubcritical".into(), None),
        RegimeLabel::Virus1Only => ("Virus1Only".into(), None),
        RegimeLabel::Virus2Only => ("Virus2Only".into(), None),
        RegimeLabel::BothSupercritical { fitness } => (
            "BothSupercritical".into(),
            fitness.map(|f| {
                match f {
                    Fitness::Virus1Fitter => "Virus1Fitter",
                    Fitness::Virus2Fitter => "Virus2Fitter",
                    Fitness::EqualFitness => "EqualFitness",
                }
                .to_string()
            }),
        ),
    }
}

pub fn reason_string(reason: TerminalReason) -> String {
    match reason {
        TerminalReason::Converged => "Converged",
        TerminalReason::MaxTime => "MaxTime",
        TerminalReason::DomainError => "DomainError",
    }
    .into()
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Parse(format!("serialization failed: {e}")))?;
    text.push('\n');
    fs::write(&path, text)?;
    Ok(path)
}

fn push_full_precision(out: &mut String, v: f64) {
    out.push_str(&format!("{v:.16e}"));
}

/// Writes a bi-virus trajectory in the documented delimited format.
pub fn write_trajectory_csv(
    dir: &Path,
    name: &str,
    traj: &TrajectoryRecord,
) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let n = traj.states.first().map(SystemState::n).unwrap_or(0);
    let mut out = String::from("t");
    for i in 0..n {
        out.push_str(&format!(",x1_{i}"));
    }
    for i in 0..n {
        out.push_str(&format!(",x2_{i}"));
    }
    out.push('\n');
    for (t, s) in traj.times.iter().zip(&traj.states) {
        push_full_precision(&mut out, *t);
        for &v in s.x1().iter().chain(s.x2().iter()) {
            out.push(',');
            push_full_precision(&mut out, v);
        }
        out.push('\n');
    }
    fs::write(&path, out)?;
    Ok(path)
}

/// Writes the sensitivity table: one row per perturbed parameter, the
/// response entries, and the sign verdicts.
pub fn write_sensitivity_csv(
    dir: &Path,
    name: &str,
    report: &MonotonicityReport,
    n: usize,
) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let mut out = String::from("parameter");
    for i in 0..n {
        out.push_str(&format!(",dx_{i}"));
    }
    out.push_str(",verdict,fd_verdict,consistent\n");
    for row in &report.rows {
        out.push_str(&row.parameter.to_string());
        for &v in row.d_x.iter() {
            out.push(',');
            push_full_precision(&mut out, v);
        }
        out.push_str(&format!(
            ",{:?},{:?},{}\n",
            row.verdict, row.fd_verdict, row.consistent
        ));
    }
    fs::write(&path, out)?;
    Ok(path)
}
