//! First-order response of the single-virus epidemic state to healing-
//! and infection-rate perturbations, via the implicit-function linear
//! system, plus entrywise monotonicity verdicts.
//!
//! At a verified epidemic state x* the system matrix
//! M = −D + B − X*B − diag(Bx*) is an irreducible Hurwitz Metzler matrix
//! with M⁻¹ ≪ 0, and to first order
//!
//! ```text
//! Δx = M⁻¹ X* Δδ + M⁻¹ (X* − I) ΔB x*.
//! ```
//!
//! Entrywise negativity of M⁻¹ makes every entry of x* strictly
//! decreasing in each δᵢ and strictly increasing in each βᵢⱼ.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::equilibria::{solve_epidemic, threshold_abscissa, FixedPointConfig};
use crate::error::{Error, Result};
use crate::model::{ensure_virus_valid, single_virus_field_raw, VirusParams};
use crate::spectral::{negative_inverse_check, perron_pair, MetzlerMatrix, DEFAULT_EPS_CRIT};

/// Residual bound for accepting a caller-supplied equilibrium.
const EQUILIBRIUM_RESIDUAL_TOL: f64 = 1e-8;
/// Condition numbers above this trigger a warning: the linear system
/// degrades as the model approaches the epidemic threshold.
const CONDITION_WARN: f64 = 1e12;

/// Joint perturbation (Δδ, ΔB) of the rates.
#[derive(Debug, Clone, PartialEq)]
pub struct Perturbation {
    pub d_delta: DVector<f64>,
    pub d_b: DMatrix<f64>,
}

impl Perturbation {
    pub fn zero(n: usize) -> Self {
        Self {
            d_delta: DVector::zeros(n),
            d_b: DMatrix::zeros(n, n),
        }
    }

    /// Perturbs a single healing rate by `step`.
    pub fn delta_step(n: usize, i: usize, step: f64) -> Self {
        let mut p = Self::zero(n);
        p.d_delta[i] = step;
        p
    }

    /// Perturbs a single infection rate by `step`.
    pub fn beta_step(n: usize, i: usize, j: usize, step: f64) -> Self {
        let mut p = Self::zero(n);
        p.d_b[(i, j)] = step;
        p
    }
}

/// First-order change of the epidemic state and the diagnostics of the
/// linear solve behind it.
#[derive(Debug, Clone)]
pub struct SensitivityResult {
    pub d_x: DVector<f64>,
    /// s(−D+B−X*B−diag(Bx*)); always strictly negative at a verified
    /// epidemic state.
    pub system_matrix_abscissa: f64,
    /// Whether every entry of the system matrix inverse was verified
    /// strictly negative (it must be; kept as an explicit certificate).
    pub raw_inverse_negative: bool,
    /// ‖M‖∞·‖M⁻¹‖∞ of the system matrix.
    pub condition_estimate: f64,
}

fn inf_norm(m: &DMatrix<f64>) -> f64 {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Builds M = −D + B − X*B − diag(Bx*).
fn system_matrix(p: &VirusParams, x_star: &DVector<f64>) -> DMatrix<f64> {
    let n = p.n();
    let bx = p.b() * x_star;
    let mut m = DMatrix::from_fn(n, n, |i, j| (1.0 - x_star[i]) * p.b()[(i, j)]);
    for i in 0..n {
        m[(i, i)] -= p.delta()[i] + bx[i];
    }
    m
}

fn verify_inputs(p: &VirusParams, x_star: &DVector<f64>) -> Result<()> {
    ensure_virus_valid(p)?;
    if p.delta().iter().any(|&d| d <= 0.0) {
        return Err(Error::Precondition(
            "sensitivity analysis requires strictly positive healing rates".into(),
        ));
    }
    let s = threshold_abscissa(p)?;
    if s <= DEFAULT_EPS_CRIT {
        return Err(Error::Precondition(format!(
            "sensitivity is defined at an epidemic state, but s(−D+B) = {s:.6e} ≤ 0"
        )));
    }
    if x_star.len() != p.n() || x_star.iter().any(|&v| v <= 0.0 || v >= 1.0) {
        return Err(Error::Precondition(
            "x* must be strictly interior to (0,1)^n".into(),
        ));
    }
    let residual = single_virus_field_raw(p, x_star).amax();
    if residual > EQUILIBRIUM_RESIDUAL_TOL {
        return Err(Error::Precondition(format!(
            "x* is not a verified equilibrium (residual {residual:.3e})"
        )));
    }
    Ok(())
}

/// Solves the first-order sensitivity system at a verified epidemic
/// state.
pub fn sensitivity_solve(
    p: &VirusParams,
    x_star: &DVector<f64>,
    pert: &Perturbation,
) -> Result<SensitivityResult> {
    verify_inputs(p, x_star)?;
    let n = p.n();
    if pert.d_delta.len() != n || pert.d_b.nrows() != n || pert.d_b.ncols() != n {
        return Err(Error::Shape(
            "perturbation dimensions do not match the model".into(),
        ));
    }

    let m = MetzlerMatrix::new(system_matrix(p, x_star))?;
    let abscissa = perron_pair(&m)?.value;
    if abscissa >= -DEFAULT_EPS_CRIT {
        return Err(Error::InternalConsistency(format!(
            "system matrix must be Hurwitz at an epidemic state, got s = {abscissa:.6e}"
        )));
    }
    // Hurwitzness is established, so any precondition failure left in the
    // inverse check is singularity.
    let inverse = negative_inverse_check(&m).map_err(|e| match e {
        Error::Precondition(msg) => Error::Numerical(format!("system matrix solve failed: {msg}")),
        other => other,
    })?;

    let condition_estimate = inf_norm(m.entries()) * inf_norm(&inverse);
    if condition_estimate > CONDITION_WARN {
        log::warn!(
            "sensitivity system is ill-conditioned (estimate {condition_estimate:.3e}); \
             the model is close to the epidemic threshold"
        );
    }

    let rhs = DVector::from_fn(n, |i, _| x_star[i] * pert.d_delta[i])
        + DVector::from_fn(n, |i, _| {
            (x_star[i] - 1.0) * pert.d_b.row(i).transpose().dot(x_star)
        });
    Ok(SensitivityResult {
        d_x: &inverse * rhs,
        system_matrix_abscissa: abscissa,
        raw_inverse_negative: true,
        condition_estimate,
    })
}

/// Identifies one perturbed rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParamId {
    Delta(usize),
    Beta(usize, usize),
}

impl std::fmt::Display for ParamId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ParamId::Delta(i) => write!(f, "delta[{i}]"),
            ParamId::Beta(i, j) => write!(f, "beta[{i},{j}]"),
        }
    }
}

/// Entrywise sign of a response vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SignVerdict {
    StrictlyNegative,
    StrictlyPositive,
    Neutral,
    Mixed,
}

fn sign_verdict(v: &DVector<f64>) -> SignVerdict {
    if v.iter().all(|&x| x == 0.0) {
        SignVerdict::Neutral
    } else if v.iter().all(|&x| x < 0.0) {
        SignVerdict::StrictlyNegative
    } else if v.iter().all(|&x| x > 0.0) {
        SignVerdict::StrictlyPositive
    } else {
        SignVerdict::Mixed
    }
}

/// One row of the monotonicity table: the analytic response to bumping
/// one rate by `step`, the re-solve (finite-difference) verdict, and
/// whether both match the guaranteed sign.
#[derive(Debug, Clone)]
pub struct MonotonicityRow {
    pub parameter: ParamId,
    pub d_x: DVector<f64>,
    pub verdict: SignVerdict,
    pub fd_verdict: SignVerdict,
    pub consistent: bool,
}

/// Sign table over every healing rate and every existing arc.
#[derive(Debug, Clone)]
pub struct MonotonicityReport {
    pub step: f64,
    pub rows: Vec<MonotonicityRow>,
    pub all_consistent: bool,
}

/// Bumps each δᵢ and each βᵢⱼ on an existing arc by `+step`, computing
/// the analytic sign verdict and cross-validating it by re-solving the
/// perturbed equilibrium. Every δ row must come out strictly negative and
/// every β row strictly positive; a violation is a counterexample and is
/// surfaced through `consistent`/`all_consistent`.
pub fn monotonicity_report(
    p: &VirusParams,
    x_star: &DVector<f64>,
    step: f64,
    fp_cfg: &FixedPointConfig,
) -> Result<MonotonicityReport> {
    verify_inputs(p, x_star)?;
    if !(step >= 0.0) {
        return Err(Error::Precondition(
            "perturbation step must be nonnegative".into(),
        ));
    }
    let n = p.n();
    let mut params: Vec<ParamId> = (0..n).map(ParamId::Delta).collect();
    for i in 0..n {
        for j in 0..n {
            if p.b()[(i, j)] > 0.0 {
                params.push(ParamId::Beta(i, j));
            }
        }
    }

    let mut rows = Vec::with_capacity(params.len());
    for param in params {
        let pert = match param {
            ParamId::Delta(i) => Perturbation::delta_step(n, i, step),
            ParamId::Beta(i, j) => Perturbation::beta_step(n, i, j, step),
        };
        let d_x = sensitivity_solve(p, x_star, &pert)?.d_x;
        let verdict = sign_verdict(&d_x);

        let fd_verdict = if step == 0.0 {
            SignVerdict::Neutral
        } else {
            let perturbed = VirusParams::new(p.delta() + &pert.d_delta, p.b() + &pert.d_b)?;
            let x_new = solve_epidemic(&perturbed, fp_cfg)?;
            sign_verdict(&(x_new - x_star))
        };

        let expected = if step == 0.0 {
            SignVerdict::Neutral
        } else {
            match param {
                ParamId::Delta(_) => SignVerdict::StrictlyNegative,
                ParamId::Beta(_, _) => SignVerdict::StrictlyPositive,
            }
        };
        let consistent = verdict == expected && fd_verdict == expected;
        rows.push(MonotonicityRow {
            parameter: param,
            d_x,
            verdict,
            fd_verdict,
            consistent,
        });
    }
    let all_consistent = rows.iter().all(|r| r.consistent);
    Ok(MonotonicityReport {
        step,
        rows,
        all_consistent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn scalar_params() -> (VirusParams, DVector<f64>) {
        let p = VirusParams::new(
            DVector::from_element(1, 0.5),
            DMatrix::from_element(1, 1, 1.0),
        )
        .unwrap();
        (p, DVector::from_element(1, 0.5))
    }

    fn two_cycle_params(delta: f64) -> (VirusParams, DVector<f64>) {
        let p = VirusParams::new(
            DVector::from_element(2, delta),
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]),
        )
        .unwrap();
        let x = DVector::from_element(2, 1.0 - delta);
        (p, x)
    }

    #[test]
    fn scalar_healing_sensitivity_is_minus_one_over_beta() {
        // x* = 1 − δ/β gives dx*/dδ = −1/β exactly.
        let (p, x_star) = scalar_params();
        let pert = Perturbation::delta_step(1, 0, 0.01);
        let r = sensitivity_solve(&p, &x_star, &pert).unwrap();
        assert_relative_eq!(r.d_x[0], -0.01, epsilon = 1e-12);
        assert!(r.system_matrix_abscissa < 0.0);
        assert!(r.raw_inverse_negative);
    }

    #[test]
    fn zero_perturbation_gives_zero_response() {
        let (p, x_star) = scalar_params();
        let r = sensitivity_solve(&p, &x_star, &Perturbation::zero(1)).unwrap();
        assert_eq!(r.d_x[0], 0.0);
    }

    #[test]
    fn analytic_matches_resolve_oracle_on_two_cycle() {
        let (p, x_star) = two_cycle_params(0.5);
        let h = 1e-6;
        let pert = Perturbation::delta_step(2, 0, h);
        let analytic = sensitivity_solve(&p, &x_star, &pert).unwrap().d_x;

        let perturbed = VirusParams::new(p.delta() + &pert.d_delta, p.b().clone()).unwrap();
        let x_new = solve_epidemic(&perturbed, &FixedPointConfig::default()).unwrap();
        let fd = x_new - &x_star;
        let rel = (&analytic - &fd).amax() / fd.amax();
        assert!(rel < 1e-3, "relative error {rel}");
    }

    #[test]
    fn monotonicity_signs_on_two_cycle() {
        let (p, x_star) = two_cycle_params(0.5);
        let report = monotonicity_report(&p, &x_star, 1e-4, &FixedPointConfig::default()).unwrap();
        assert!(report.all_consistent);
        // 2 healing rates + 2 arcs.
        assert_eq!(report.rows.len(), 4);
        for row in &report.rows {
            match row.parameter {
                ParamId::Delta(_) => {
                    assert_eq!(row.verdict, SignVerdict::StrictlyNegative);
                    assert_eq!(row.fd_verdict, SignVerdict::StrictlyNegative);
                }
                ParamId::Beta(_, _) => {
                    assert_eq!(row.verdict, SignVerdict::StrictlyPositive);
                    assert_eq!(row.fd_verdict, SignVerdict::StrictlyPositive);
                }
            }
        }
    }

    #[test]
    fn zero_step_reports_neutral() {
        let (p, x_star) = two_cycle_params(0.5);
        let report = monotonicity_report(&p, &x_star, 0.0, &FixedPointConfig::default()).unwrap();
        assert!(report.all_consistent);
        assert!(report
            .rows
            .iter()
            .all(|r| r.verdict == SignVerdict::Neutral && r.fd_verdict == SignVerdict::Neutral));
    }

    #[test]
    fn rejects_zero_healing_and_subcritical_models() {
        let p = VirusParams::new(
            DVector::from_vec(vec![0.0, 0.5]),
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]),
        )
        .unwrap();
        let x = DVector::from_element(2, 0.5);
        assert!(matches!(
            sensitivity_solve(&p, &x, &Perturbation::zero(2)),
            Err(Error::Precondition(_))
        ));

        let (p_sub, _) = two_cycle_params(1.5);
        assert!(matches!(
            sensitivity_solve(&p_sub, &x, &Perturbation::zero(2)),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn rejects_unverified_equilibrium() {
        let (p, _) = two_cycle_params(0.5);
        let bogus = DVector::from_element(2, 0.3);
        assert!(matches!(
            sensitivity_solve(&p, &bogus, &Perturbation::zero(2)),
            Err(Error::Precondition(_))
        ));
    }
}
