//! Regime classification by spectral thresholds, the constructive
//! epidemic-state solver, Jacobian-based local stability verdicts, and
//! analysis of the coexistence continuum in the equal-fitness regimes.
//!
//! The solver follows the constructive existence argument for the
//! strictly positive equilibrium of the single-virus system: with
//! s(−D+B) > 0, pick a shift 0 < c < s(−D+B), set D̄ = D + cI, and
//! iterate the monotone map
//!
//! ```text
//! fᵢ(x) = (D̄⁻¹Bx)ᵢ / (1 − c/(c+δᵢ) + (D̄⁻¹Bx)ᵢ)
//! ```
//!
//! from x⁰ = ε·v, where v is the Perron vector of D̄⁻¹B, r = ρ(D̄⁻¹B) > 1,
//! and ε ≤ minᵢ (r−1)/(r·vᵢ) guarantees x⁰ ≤ f(x⁰) ≪ 1. Iterates then
//! increase monotonically to the unique fixed point x* ≫ 0.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dynamics::{simulate, IntegratorConfig, TerminalReason};
use crate::error::{Error, Result};
use crate::model::{
    bivirus_field_raw, detect_profile, ensure_virus_valid, jacobian, single_virus_field_raw,
    validate, BiVirusModel, HomogeneityProfile, SystemState, VirusParams,
};
use crate::spectral::{perron_pair, spectral_abscissa, MetzlerMatrix, DEFAULT_EPS_CRIT};

/// Residual bound a solved epidemic state must satisfy.
pub const SOLVE_RESIDUAL_TOL: f64 = 1e-10;
/// Componentwise relative tolerance for the x̃¹ = α·x̃² parallelism check.
pub const PARALLEL_TOL: f64 = 1e-6;
/// Tolerance for matching x̃¹ + x̃² against the summed-system equilibrium.
pub const SUM_TOL: f64 = 1e-6;
/// A coexistence run that exhausts its horizon still counts as settled
/// when the terminal field norm is below this. With unequal infection
/// scales the trajectory creeps along the equilibrium line and the field
/// norm decays only algebraically, while the state itself is long parked
/// on the line; the parallelism and sum checks below remain the actual
/// quality gates.
pub const CONTINUUM_RESIDUAL_CAP: f64 = 1e-8;
/// Relative tolerance for the floating-point fitness-ratio comparison
/// (exact rational comparison is available to callers that still hold
/// the rates as decimal strings).
const RATIO_REL_TOL: f64 = 1e-12;

/// Which virus has the smaller fitness ratio δ/β on a shared homogeneous
/// graph; the smaller ratio survives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Fitness {
    Virus1Fitter,
    Virus2Fitter,
    EqualFitness,
}

/// Sign pattern of the two threshold abscissas s(−Dᵏ+Bᵏ).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegimeLabel {
    BothSubcritical,
    Virus1Only,
    Virus2Only,
    BothSupercritical {
        /// Fitness comparison, populated only on a shared homogeneous
        /// graph where the ratio δ/β is well defined.
        fitness: Option<Fitness>,
    },
}

/// Regime label together with the spectral quantities behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct RegimeReport {
    pub label: RegimeLabel,
    pub s1: f64,
    pub s2: f64,
    /// ρ((Dᵏ)⁻¹Bᵏ), defined when all healing rates are strictly positive.
    pub rho1: Option<f64>,
    pub rho2: Option<f64>,
}

/// Local stability classification of an equilibrium from the spectral
/// abscissa of its Jacobian.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StabilityVerdict {
    LocallyStable,
    Unstable,
    Marginal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EquilibriumKind {
    Healthy,
    Virus1Epidemic,
    Virus2Epidemic,
    Coexisting,
}

/// One equilibrium with its residual, Jacobian abscissa, and verdict.
#[derive(Debug, Clone)]
pub struct EquilibriumReport {
    pub kind: EquilibriumKind,
    pub point: SystemState,
    pub residual: f64,
    pub jacobian_spectral_abscissa: f64,
    pub verdict: StabilityVerdict,
}

/// Tuning of the constructive fixed-point solver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointConfig {
    /// Fraction of s(−D+B) used for the shift c; any value in (0, 1)
    /// satisfies s(−D+B) − c > 0.
    pub c_fraction: f64,
    /// Safety factor on the initializer bound ε ≤ minᵢ (r−1)/(r·vᵢ),
    /// keeping x⁰ strictly inside the invariant region.
    pub epsilon_scale: f64,
    /// ℓ∞ tolerance on successive iterates.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FixedPointConfig {
    fn default() -> Self {
        Self {
            c_fraction: 0.5,
            epsilon_scale: 0.9,
            tol: 1e-12,
            max_iter: 100_000,
        }
    }
}

impl FixedPointConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c_fraction > 0.0 && self.c_fraction < 1.0)
            || !(self.epsilon_scale > 0.0 && self.epsilon_scale <= 1.0)
            || !(self.tol > 0.0)
            || self.max_iter == 0
        {
            return Err(Error::Precondition(
                "fixed-point configuration requires 0 < c_fraction < 1, \
                 0 < epsilon_scale ≤ 1, tol > 0, max_iter ≥ 1"
                    .into(),
            ));
        }
        Ok(())
    }
}

/// Epidemic state together with the solve diagnostics.
#[derive(Debug, Clone)]
pub struct EpidemicSolve {
    pub x_star: DVector<f64>,
    pub iterations: usize,
    /// ℓ∞ norm of the single-virus field at the returned state.
    pub residual: f64,
    /// Shift c = c_fraction · s(−D+B).
    pub c: f64,
    /// r = ρ(D̄⁻¹B) > 1.
    pub r: f64,
    pub initializer: DVector<f64>,
}

fn ensure_model_valid(m: &BiVirusModel) -> Result<()> {
    let report = validate(m);
    if !report.passed() {
        let failed: Vec<&str> = report
            .checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.as_str())
            .collect();
        return Err(Error::Precondition(format!(
            "model validation failed: {}",
            failed.join(", ")
        )));
    }
    Ok(())
}

/// Spectral abscissa s(−D+B) of one virus, via its Perron pair.
pub fn threshold_abscissa(p: &VirusParams) -> Result<f64> {
    Ok(perron_pair(&MetzlerMatrix::new(p.threshold_matrix())?)?.value)
}

/// Compares the fitness ratios δ¹/β¹ and δ²/β² by cross-multiplication
/// with a relative tolerance, the fallback when exact rational rates are
/// not available.
fn compare_ratios_f64(d1: f64, b1: f64, d2: f64, b2: f64) -> Ordering {
    let lhs = d1 * b2;
    let rhs = d2 * b1;
    if (lhs - rhs).abs() <= RATIO_REL_TOL * lhs.abs().max(rhs.abs()) {
        Ordering::Equal
    } else if lhs < rhs {
        Ordering::Less
    } else {
        Ordering::Greater
    }
}

fn fitness_from_ordering(ord: Ordering) -> Fitness {
    match ord {
        Ordering::Less => Fitness::Virus1Fitter,
        Ordering::Greater => Fitness::Virus2Fitter,
        Ordering::Equal => Fitness::EqualFitness,
    }
}

/// Classifies the regime from the signs of s(−Dᵏ+Bᵏ).
pub fn classify(m: &BiVirusModel) -> Result<RegimeLabel> {
    Ok(regime_report(m)?.label)
}

/// Full regime report; `ratio_ordering`, when provided, is an exact
/// comparison of δ¹/β¹ vs δ²/β² computed by the caller (e.g. from
/// decimal-string rates) and overrides the floating-point comparison.
pub fn regime_report_with(
    m: &BiVirusModel,
    ratio_ordering: Option<Ordering>,
) -> Result<RegimeReport> {
    ensure_model_valid(m)?;
    let s1 = threshold_abscissa(m.virus1())?;
    let s2 = threshold_abscissa(m.virus2())?;
    let rho = |p: &VirusParams| -> Result<Option<f64>> {
        if p.delta().iter().all(|&d| d > 0.0) {
            let n = p.n();
            let ratio = DMatrix::from_fn(n, n, |i, j| p.b()[(i, j)] / p.delta()[i]);
            Ok(Some(perron_pair(&MetzlerMatrix::new(ratio)?)?.value))
        } else {
            Ok(None)
        }
    };
    let label = match (s1 > DEFAULT_EPS_CRIT, s2 > DEFAULT_EPS_CRIT) {
        (false, false) => RegimeLabel::BothSubcritical,
        (true, false) => RegimeLabel::Virus1Only,
        (false, true) => RegimeLabel::Virus2Only,
        (true, true) => {
            let fitness = match detect_profile(m) {
                HomogeneityProfile::HomogeneousSameGraph {
                    delta1,
                    beta1,
                    delta2,
                    beta2,
                    ..
                } => Some(fitness_from_ordering(ratio_ordering.unwrap_or_else(|| {
                    compare_ratios_f64(delta1, beta1, delta2, beta2)
                }))),
                _ => None,
            };
            RegimeLabel::BothSupercritical { fitness }
        }
    };
    Ok(RegimeReport {
        label,
        s1,
        s2,
        rho1: rho(m.virus1())?,
        rho2: rho(m.virus2())?,
    })
}

/// As [`regime_report_with`] without an exact ratio comparison.
pub fn regime_report(m: &BiVirusModel) -> Result<RegimeReport> {
    regime_report_with(m, None)
}

/// One application of the monotone fixed-point map
/// fᵢ(x) = wᵢ / (δᵢ/(δᵢ+c) + wᵢ) with w = D̄⁻¹Bx and D̄ = D + cI.
pub fn epidemic_map(p: &VirusParams, c: f64, x: &DVector<f64>) -> DVector<f64> {
    let bx = p.b() * x;
    DVector::from_fn(p.n(), |i, _| {
        let di = p.delta()[i];
        let w = bx[i] / (di + c);
        w / (di / (di + c) + w)
    })
}

fn run_fixed_point(
    p: &VirusParams,
    c: f64,
    r: f64,
    x0: DVector<f64>,
    cfg: &FixedPointConfig,
) -> Result<EpidemicSolve> {
    let initializer = x0.clone();
    let mut x = x0;
    let mut iterations = 0;
    loop {
        iterations += 1;
        if iterations > cfg.max_iter {
            return Err(Error::Numerical(format!(
                "fixed-point iteration did not converge within {} iterations",
                cfg.max_iter
            )));
        }
        let next = epidemic_map(p, c, &x);
        let diff = (&next - &x).amax();
        x = next;
        if diff < cfg.tol {
            break;
        }
    }
    let residual = single_virus_field_raw(p, &x).amax();
    if residual > SOLVE_RESIDUAL_TOL {
        return Err(Error::Numerical(format!(
            "fixed point failed residual verification: ‖(−D+B−X*B)x*‖∞ = {residual:.3e}"
        )));
    }
    // x* ≫ 0 always; x*ᵢ < 1 wherever the group heals at all. A group
    // with δᵢ = 0 saturates at exactly 1.
    for i in 0..p.n() {
        let v = x[i];
        let admissible = v > 0.0 && (v < 1.0 || (p.delta()[i] == 0.0 && v <= 1.0));
        if !admissible {
            return Err(Error::Numerical(format!(
                "fixed point coordinate {i} = {v} is outside the admissible region"
            )));
        }
    }
    Ok(EpidemicSolve {
        x_star: x,
        iterations,
        residual,
        c,
        r,
        initializer,
    })
}

fn solve_setup(p: &VirusParams, cfg: &FixedPointConfig) -> Result<(f64, f64, DVector<f64>)> {
    cfg.validate()?;
    ensure_virus_valid(p)?;
    let s = threshold_abscissa(p)?;
    if s <= DEFAULT_EPS_CRIT {
        return Err(Error::Precondition(format!(
            "no epidemic state: s(−D+B) = {s:.6e} ≤ 0"
        )));
    }
    let c = cfg.c_fraction * s;
    let n = p.n();
    let ratio = DMatrix::from_fn(n, n, |i, j| p.b()[(i, j)] / (p.delta()[i] + c));
    let pp = perron_pair(&MetzlerMatrix::new(ratio)?)?;
    let r = pp.value;
    if r <= 1.0 {
        return Err(Error::InternalConsistency(format!(
            "ρ(D̄⁻¹B) = {r} should exceed 1 when s(−D+B) − c > 0"
        )));
    }
    Ok((c, r, pp.right))
}

/// Solves for the strictly positive epidemic state of a supercritical
/// single-virus system via the monotone fixed-point iteration, starting
/// from the Perron-vector initializer ε·v.
pub fn solve_epidemic_detailed(p: &VirusParams, cfg: &FixedPointConfig) -> Result<EpidemicSolve> {
    let (c, r, v) = solve_setup(p, cfg)?;
    let eps = cfg.epsilon_scale * (r - 1.0) / (r * v.max());
    run_fixed_point(p, c, r, v * eps, cfg)
}

/// The epidemic state x* ≫ 0 of a supercritical single-virus system.
pub fn solve_epidemic(p: &VirusParams, cfg: &FixedPointConfig) -> Result<DVector<f64>> {
    Ok(solve_epidemic_detailed(p, cfg)?.x_star)
}

/// As [`solve_epidemic_detailed`] from a caller-chosen strictly positive
/// initializer in (0, 1]ⁿ; used to cross-check uniqueness.
pub fn solve_epidemic_from(
    p: &VirusParams,
    cfg: &FixedPointConfig,
    x0: &DVector<f64>,
) -> Result<EpidemicSolve> {
    if x0.len() != p.n() || x0.iter().any(|&v| !(v > 0.0 && v <= 1.0)) {
        return Err(Error::Precondition(
            "initializer must lie in (0, 1]^n".into(),
        ));
    }
    let (c, r, _) = solve_setup(p, cfg)?;
    run_fixed_point(p, c, r, x0.clone(), cfg)
}

/// Verdict from the spectral abscissa of a Jacobian: stable below the
/// critical band, unstable above, marginal inside.
pub fn stability_verdict(j: &DMatrix<f64>) -> Result<StabilityVerdict> {
    stability_verdict_with_band(j, DEFAULT_EPS_CRIT)
}

pub fn stability_verdict_with_band(j: &DMatrix<f64>, eps_crit: f64) -> Result<StabilityVerdict> {
    let s = spectral_abscissa(j)?;
    Ok(verdict_from_abscissa(s, eps_crit))
}

fn verdict_from_abscissa(s: f64, eps_crit: f64) -> StabilityVerdict {
    if s < -eps_crit {
        StabilityVerdict::LocallyStable
    } else if s > eps_crit {
        StabilityVerdict::Unstable
    } else {
        StabilityVerdict::Marginal
    }
}

/// Why a coexistence continuum exists for a model.
#[derive(Debug, Clone, PartialEq)]
pub enum CoexistenceBasis {
    /// Shared homogeneous graph with δ¹/β¹ = δ²/β² < s(A).
    HomogeneousEqualRatio { ratio: f64 },
    /// D¹ = D², B¹ = B² with s(−D+B) > 0.
    IdenticalParams,
}

/// Descriptor of the one-parameter family x̃¹ = α·x̃² of coexisting
/// equilibria. No exhaustive enumeration is claimed; the family is
/// explored by simulation from initial conditions.
#[derive(Debug, Clone)]
pub struct CoexistenceLine {
    pub basis: CoexistenceBasis,
    /// The unique sum x̃¹ + x̃² when both viruses share identical
    /// parameters (the sum then follows the single-virus system).
    pub sum_state: Option<DVector<f64>>,
}

/// Equilibrium reports plus, in the equal-fitness regimes, the
/// coexistence-line descriptor.
#[derive(Debug, Clone)]
pub struct EquilibriaSummary {
    pub reports: Vec<EquilibriumReport>,
    pub continuum: Option<CoexistenceLine>,
}

fn report_for(
    m: &BiVirusModel,
    kind: EquilibriumKind,
    point: SystemState,
) -> Result<EquilibriumReport> {
    let (dx1, dx2) = bivirus_field_raw(m, point.x1(), point.x2());
    let residual = dx1.amax().max(dx2.amax());
    let j = jacobian(m, &point);
    let s = spectral_abscissa(&j)?;
    Ok(EquilibriumReport {
        kind,
        point,
        residual,
        jacobian_spectral_abscissa: s,
        verdict: verdict_from_abscissa(s, DEFAULT_EPS_CRIT),
    })
}

fn identical_params(m: &BiVirusModel) -> bool {
    m.virus1().delta() == m.virus2().delta() && m.virus1().b() == m.virus2().b()
}

/// Enumerates the known equilibria: the healthy state always, each
/// single-virus epidemic state when that virus is supercritical, and — in
/// the equal-fitness regimes — the coexistence-line descriptor in place
/// of any single coexisting point.
pub fn enumerate_equilibria(
    m: &BiVirusModel,
    fp_cfg: &FixedPointConfig,
) -> Result<EquilibriaSummary> {
    enumerate_equilibria_with(m, fp_cfg, None)
}

/// As [`enumerate_equilibria`] with an optional exact fitness-ratio
/// comparison from the caller.
pub fn enumerate_equilibria_with(
    m: &BiVirusModel,
    fp_cfg: &FixedPointConfig,
    ratio_ordering: Option<Ordering>,
) -> Result<EquilibriaSummary> {
    ensure_model_valid(m)?;
    let n = m.n();
    let s1 = threshold_abscissa(m.virus1())?;
    let s2 = threshold_abscissa(m.virus2())?;

    let mut reports = vec![report_for(
        m,
        EquilibriumKind::Healthy,
        SystemState::zeros(n),
    )?];
    if s1 > DEFAULT_EPS_CRIT {
        let x1 = solve_epidemic(m.virus1(), fp_cfg)?;
        let point = SystemState::new(x1, DVector::zeros(n))?;
        reports.push(report_for(m, EquilibriumKind::Virus1Epidemic, point)?);
    }
    if s2 > DEFAULT_EPS_CRIT {
        let x2 = solve_epidemic(m.virus2(), fp_cfg)?;
        let point = SystemState::new(DVector::zeros(n), x2)?;
        reports.push(report_for(m, EquilibriumKind::Virus2Epidemic, point)?);
    }

    let mut continuum = None;
    if s1 > DEFAULT_EPS_CRIT && s2 > DEFAULT_EPS_CRIT {
        match detect_profile(m) {
            HomogeneityProfile::HomogeneousSameGraph {
                delta1,
                beta1,
                delta2,
                beta2,
                ..
            } => {
                let ord = ratio_ordering
                    .unwrap_or_else(|| compare_ratios_f64(delta1, beta1, delta2, beta2));
                if ord == Ordering::Equal {
                    let sum_state = identical_params(m)
                        .then(|| solve_epidemic(m.virus1(), fp_cfg))
                        .transpose()?;
                    continuum = Some(CoexistenceLine {
                        basis: CoexistenceBasis::HomogeneousEqualRatio {
                            ratio: delta1 / beta1,
                        },
                        sum_state,
                    });
                }
            }
            HomogeneityProfile::IdenticalParams => {
                continuum = Some(CoexistenceLine {
                    basis: CoexistenceBasis::IdenticalParams,
                    sum_state: Some(solve_epidemic(m.virus1(), fp_cfg)?),
                });
            }
            HomogeneityProfile::General => {}
        }
    }
    Ok(EquilibriaSummary { reports, continuum })
}

/// One simulated point on the coexistence line.
#[derive(Debug, Clone)]
pub struct ContinuumPoint {
    /// Fitted proportionality constant in x̃¹ = α·x̃².
    pub alpha: f64,
    pub point: SystemState,
    /// ℓ∞ norm of the field at the terminal state.
    pub field_residual: f64,
    /// Worst componentwise relative deviation from exact parallelism.
    pub max_parallel_deviation: f64,
    /// ‖(x̃¹+x̃²) − x*_sum‖∞ against the summed-system equilibrium, when
    /// the identical-parameters result applies.
    pub sum_deviation: Option<f64>,
}

/// Simulates each initial condition to convergence and verifies that the
/// terminal states lie on the coexistence line x̃¹ = α·x̃², fitting α per
/// initial condition. Requires one of the equal-fitness regimes; both
/// halves of every initial condition must be nonzero.
pub fn coexistence_continuum(
    m: &BiVirusModel,
    ics: &[SystemState],
    int_cfg: &IntegratorConfig,
    fp_cfg: &FixedPointConfig,
) -> Result<Vec<ContinuumPoint>> {
    ensure_model_valid(m)?;
    let s1 = threshold_abscissa(m.virus1())?;
    let s2 = threshold_abscissa(m.virus2())?;
    let equal_fitness = match detect_profile(m) {
        HomogeneityProfile::HomogeneousSameGraph {
            delta1,
            beta1,
            delta2,
            beta2,
            ..
        } => compare_ratios_f64(delta1, beta1, delta2, beta2) == Ordering::Equal,
        HomogeneityProfile::IdenticalParams => true,
        HomogeneityProfile::General => false,
    };
    if !equal_fitness || s1 <= DEFAULT_EPS_CRIT || s2 <= DEFAULT_EPS_CRIT {
        return Err(Error::Precondition(
            "coexistence analysis requires an equal-fitness regime with both viruses \
             supercritical: a shared homogeneous graph with δ¹/β¹ = δ²/β² < s(A), or \
             identical parameters with s(−D+B) > 0"
                .into(),
        ));
    }
    let sum_ref = identical_params(m)
        .then(|| solve_epidemic(m.virus1(), fp_cfg))
        .transpose()?;

    // The Jacobian on the continuum has a zero eigenvalue, so the
    // adaptive integrator's error floor (≈ rtol·‖x‖ per step) never
    // decays away and can sit just above the field-norm convergence
    // threshold. Tighten the tolerances for this sweep so the threshold
    // is reachable.
    let mut run_cfg = *int_cfg;
    if let crate::dynamics::Method::Rk45Adaptive { rtol, atol } = run_cfg.method {
        run_cfg.method = crate::dynamics::Method::Rk45Adaptive {
            rtol: rtol.min(1e-10),
            atol: atol.min(1e-12),
        };
    }

    let mut points = Vec::with_capacity(ics.len());
    for (idx, ic) in ics.iter().enumerate() {
        if ic.x1().amax() == 0.0 || ic.x2().amax() == 0.0 {
            return Err(Error::Precondition(format!(
                "initial condition {idx} must seed both viruses"
            )));
        }
        let traj = simulate(m, ic, &run_cfg)?;
        let terminal = traj.terminal().clone();
        let (dx1, dx2) = bivirus_field_raw(m, terminal.x1(), terminal.x2());
        let field_residual = dx1.amax().max(dx2.amax());
        let settled = traj.terminal_reason == TerminalReason::Converged
            || (traj.terminal_reason == TerminalReason::MaxTime
                && field_residual <= CONTINUUM_RESIDUAL_CAP);
        if !settled {
            return Err(Error::Numerical(format!(
                "initial condition {idx} did not settle within t_max (reason {:?}, \
                 field norm {field_residual:.3e})",
                traj.terminal_reason
            )));
        }
        let (x1, x2) = (terminal.x1(), terminal.x2());
        if x1.min() <= 0.0 || x2.min() <= 0.0 {
            return Err(Error::InternalConsistency(format!(
                "initial condition {idx} lost a virus; terminal state is not coexisting"
            )));
        }
        // Coexisting equilibria are strictly interior: x̃¹ + x̃² ≪ 1.
        if (0..m.n()).any(|i| x1[i] + x2[i] >= 1.0) {
            return Err(Error::InternalConsistency(format!(
                "initial condition {idx} settled on the boundary x̃¹ᵢ + x̃²ᵢ = 1, \
                 which cannot be an equilibrium"
            )));
        }
        let alpha = x1.dot(x2) / x2.dot(x2);
        let max_parallel_deviation = (0..m.n())
            .map(|i| (x1[i] - alpha * x2[i]).abs() / (alpha * x2[i]))
            .fold(0.0, f64::max);
        if max_parallel_deviation > PARALLEL_TOL {
            return Err(Error::InternalConsistency(format!(
                "terminal state of initial condition {idx} deviates from x̃¹ = αx̃² by \
                 {max_parallel_deviation:.3e} (tolerance {PARALLEL_TOL:.0e})"
            )));
        }
        let sum_deviation = match &sum_ref {
            Some(x_sum) => {
                let dev = (0..m.n())
                    .map(|i| (x1[i] + x2[i] - x_sum[i]).abs())
                    .fold(0.0, f64::max);
                if dev > SUM_TOL {
                    return Err(Error::InternalConsistency(format!(
                        "terminal sum of initial condition {idx} deviates from the \
                         summed-system equilibrium by {dev:.3e}"
                    )));
                }
                Some(dev)
            }
            None => None,
        };
        points.push(ContinuumPoint {
            alpha,
            point: terminal,
            field_residual,
            max_parallel_deviation,
            sum_deviation,
        });
    }
    Ok(points)
}
