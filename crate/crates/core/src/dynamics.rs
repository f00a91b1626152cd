//! Time integration of the SIS vector fields with invariant-set
//! enforcement, convergence detection on the field norm, and trajectory
//! recording.
//!
//! The exact flow preserves the invariant set, so any excursion is
//! integrator roundoff: after every accepted step the state is clamped
//! back (componentwise to [0, 1], then proportional rescaling of pairs
//! with x¹ᵢ + x²ᵢ > 1) and the pre-projection violation is tracked. A
//! violation beyond [`crate::model::DOMAIN_TOL`] terminates the run with
//! [`TerminalReason::DomainError`] — that indicates integration error,
//! not model behavior.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::model::{
    bivirus_field_raw, project_into_box, project_into_domain, single_virus_field_raw, BiVirusModel,
    SystemState, VirusParams, DOMAIN_TOL,
};

/// Strict-positivity floor used by [`positivity_time`].
pub const POSITIVITY_FLOOR: f64 = 1e-12;

/// Integration scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Rk4Fixed { dt: f64 },
    Rk45Adaptive { rtol: f64, atol: f64 },
}

/// Integration horizon, convergence detection, and recording cadence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub method: Method,
    pub t_max: f64,
    /// A trajectory counts as converged once ‖field‖∞ drops below this.
    pub convergence_tol: f64,
    /// Record every k-th accepted step (the initial and terminal states
    /// are always recorded).
    pub record_stride: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            method: Method::Rk45Adaptive {
                rtol: 1e-8,
                atol: 1e-10,
            },
            t_max: 1e4,
            convergence_tol: 1e-10,
            record_stride: 1,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = match self.method {
            Method::Rk4Fixed { dt } => dt > 0.0,
            Method::Rk45Adaptive { rtol, atol } => rtol > 0.0 && atol > 0.0,
        };
        if !ok || !(self.t_max > 0.0) || !(self.convergence_tol > 0.0) || self.record_stride == 0 {
            return Err(Error::Precondition(
                "integrator configuration requires positive steps, tolerances, horizon, \
                 and a nonzero record stride"
                    .into(),
            ));
        }
        Ok(())
    }
}

/// Why a trajectory ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerminalReason {
    Converged,
    MaxTime,
    DomainError,
}

/// Bi-virus trajectory; every recorded state is in 𝒟 (post-projection)
/// and times are strictly increasing.
#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub states: Vec<SystemState>,
    pub terminal_reason: TerminalReason,
    /// Largest invariant-set violation observed before projection.
    pub max_projection_violation: f64,
}

impl TrajectoryRecord {
    pub fn terminal(&self) -> &SystemState {
        self.states.last().expect("trajectory records at least t=0")
    }

    pub fn terminal_time(&self) -> f64 {
        *self.times.last().expect("trajectory records at least t=0")
    }
}

/// Single-virus trajectory over [0, 1]ⁿ.
#[derive(Debug, Clone)]
pub struct SingleTrajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    pub terminal_reason: TerminalReason,
    pub max_projection_violation: f64,
}

impl SingleTrajectory {
    pub fn terminal(&self) -> &DVector<f64> {
        self.states.last().expect("trajectory records at least t=0")
    }

    pub fn terminal_time(&self) -> f64 {
        *self.times.last().expect("trajectory records at least t=0")
    }
}

struct RawTrajectory {
    times: Vec<f64>,
    states: Vec<DVector<f64>>,
    terminal_reason: TerminalReason,
    max_violation: f64,
}

// Dormand–Prince 5(4) tableau.
const A2: [f64; 1] = [1.0 / 5.0];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [
    19372.0 / 6561.0,
    -25360.0 / 2187.0,
    64448.0 / 6561.0,
    -212.0 / 729.0,
];
const A6: [f64; 5] = [
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
];
const B5: [f64; 6] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

fn combine(y: &DVector<f64>, h: f64, ks: &[&DVector<f64>], coeffs: &[f64]) -> DVector<f64> {
    let mut out = y.clone();
    for (k, &c) in ks.iter().zip(coeffs) {
        if c != 0.0 {
            out.axpy(h * c, k, 1.0);
        }
    }
    out
}

fn scaled_error_norm(
    err: &DVector<f64>,
    y: &DVector<f64>,
    ynew: &DVector<f64>,
    rtol: f64,
    atol: f64,
) -> f64 {
    let n = err.len() as f64;
    let sum: f64 = err
        .iter()
        .zip(y.iter().zip(ynew.iter()))
        .map(|(&e, (&a, &b))| {
            let sc = atol + rtol * a.abs().max(b.abs());
            (e / sc) * (e / sc)
        })
        .sum();
    (sum / n).sqrt()
}

/// Integrates an autonomous field with per-step projection. `project`
/// returns the pre-projection violation; exceeding [`DOMAIN_TOL`] ends
/// the run with a domain-error verdict.
fn integrate<F, P>(
    field: F,
    project: P,
    y0: DVector<f64>,
    cfg: &IntegratorConfig,
) -> Result<RawTrajectory>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
    P: Fn(&mut DVector<f64>) -> f64,
{
    cfg.validate()?;
    let mut y = y0;
    let mut t = 0.0;
    let mut f_cur = field(&y);
    let mut times = vec![0.0];
    let mut states = vec![y.clone()];
    let mut max_violation: f64 = 0.0;
    let mut steps_since_record = 0usize;

    if f_cur.amax() < cfg.convergence_tol {
        return Ok(RawTrajectory {
            times,
            states,
            terminal_reason: TerminalReason::Converged,
            max_violation,
        });
    }

    let mut h = match cfg.method {
        Method::Rk4Fixed { dt } => dt,
        Method::Rk45Adaptive { rtol, atol } => {
            // Crude but serviceable first guess; the controller fixes it.
            let d0 = scaled_error_norm(&y, &y, &y, rtol, atol);
            let d1 = scaled_error_norm(&f_cur, &y, &y, rtol, atol);
            if d0 < 1e-5 || d1 < 1e-5 {
                1e-6
            } else {
                (0.01 * d0 / d1).min(cfg.t_max)
            }
        }
    };

    loop {
        if t >= cfg.t_max {
            return Ok(RawTrajectory {
                times,
                states,
                terminal_reason: TerminalReason::MaxTime,
                max_violation,
            });
        }
        if h < 1e-14 * t.abs().max(1.0) {
            return Err(Error::Numerical(format!(
                "step size underflow (h = {h:.3e} at t = {t:.6e})"
            )));
        }
        let h_step = h.min(cfg.t_max - t);

        let (mut y_new, accepted, h_next) = match cfg.method {
            Method::Rk4Fixed { .. } => {
                let k1 = &f_cur;
                let k2 = field(&combine(&y, h_step, &[k1], &[0.5]));
                let k3 = field(&combine(&y, h_step, &[&k2], &[0.5]));
                let k4 = field(&combine(&y, h_step, &[&k3], &[1.0]));
                let y_new = combine(
                    &y,
                    h_step / 6.0,
                    &[k1, &k2, &k3, &k4],
                    &[1.0, 2.0, 2.0, 1.0],
                );
                (y_new, true, h)
            }
            Method::Rk45Adaptive { rtol, atol } => {
                let k1 = f_cur.clone();
                let k2 = field(&combine(&y, h_step, &[&k1], &A2));
                let k3 = field(&combine(&y, h_step, &[&k1, &k2], &A3));
                let k4 = field(&combine(&y, h_step, &[&k1, &k2, &k3], &A4));
                let k5 = field(&combine(&y, h_step, &[&k1, &k2, &k3, &k4], &A5));
                let k6 = field(&combine(&y, h_step, &[&k1, &k2, &k3, &k4, &k5], &A6));
                let y5 = combine(&y, h_step, &[&k1, &k2, &k3, &k4, &k5, &k6], &B5);
                let k7 = field(&y5);
                let y4 = combine(&y, h_step, &[&k1, &k2, &k3, &k4, &k5, &k6, &k7], &B4);
                let err = scaled_error_norm(&(&y5 - &y4), &y, &y5, rtol, atol);
                let factor = if err == 0.0 {
                    5.0
                } else {
                    (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
                };
                if err <= 1.0 {
                    (y5, true, h_step * factor)
                } else {
                    (y, false, h_step * factor.min(0.9))
                }
            }
        };

        if !accepted {
            h = h_next;
            // y_new is the unchanged y; move it back and retry.
            y = y_new;
            continue;
        }

        let violation = project(&mut y_new);
        max_violation = max_violation.max(violation);
        t += h_step;
        h = h_next;
        y = y_new;
        f_cur = field(&y);

        if violation > DOMAIN_TOL {
            times.push(t);
            states.push(y);
            return Ok(RawTrajectory {
                times,
                states,
                terminal_reason: TerminalReason::DomainError,
                max_violation,
            });
        }

        steps_since_record += 1;
        let converged = f_cur.amax() < cfg.convergence_tol;
        let at_horizon = t >= cfg.t_max;
        if steps_since_record >= cfg.record_stride || converged || at_horizon {
            times.push(t);
            states.push(y.clone());
            steps_since_record = 0;
        }
        if converged {
            return Ok(RawTrajectory {
                times,
                states,
                terminal_reason: TerminalReason::Converged,
                max_violation,
            });
        }
    }
}

/// Integrates the bi-virus system from a state in 𝒟 until the field norm
/// drops below `convergence_tol` or `t_max` is reached.
pub fn simulate(
    m: &BiVirusModel,
    s0: &SystemState,
    cfg: &IntegratorConfig,
) -> Result<TrajectoryRecord> {
    let n = m.n();
    simulate_bivirus_field(n, s0, cfg, |v| {
        let x1 = v.rows(0, n).into_owned();
        let x2 = v.rows(n, n).into_owned();
        let (dx1, dx2) = bivirus_field_raw(m, &x1, &x2);
        DVector::from_fn(2 * n, |i, _| if i < n { dx1[i] } else { dx2[i - n] })
    })
}

/// Integrates an arbitrary bi-virus-shaped field over stacked (x¹; x²)
/// vectors with the same projection policy as [`simulate`]. Used for
/// closed-loop (state-dependent healing) experiments.
pub fn simulate_bivirus_field<F>(
    n: usize,
    s0: &SystemState,
    cfg: &IntegratorConfig,
    field: F,
) -> Result<TrajectoryRecord>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    if s0.n() != n {
        return Err(Error::Shape(format!(
            "initial state has {} groups, expected {n}",
            s0.n()
        )));
    }
    let project = |v: &mut DVector<f64>| {
        let mut x1 = v.rows(0, n).into_owned();
        let mut x2 = v.rows(n, n).into_owned();
        let violation = project_into_domain(&mut x1, &mut x2);
        for i in 0..n {
            v[i] = x1[i];
            v[n + i] = x2[i];
        }
        violation
    };
    let raw = integrate(field, project, s0.stacked(), cfg)?;
    let states = raw
        .states
        .iter()
        .map(SystemState::from_stacked)
        .collect::<Result<Vec<_>>>()?;
    Ok(TrajectoryRecord {
        times: raw.times,
        states,
        terminal_reason: raw.terminal_reason,
        max_projection_violation: raw.max_violation,
    })
}

/// Integrates the single-virus system from z₀ ∈ [0, 1]ⁿ.
pub fn simulate_single(
    p: &VirusParams,
    z0: &DVector<f64>,
    cfg: &IntegratorConfig,
) -> Result<SingleTrajectory> {
    simulate_field(p.n(), z0, cfg, |z| single_virus_field_raw(p, z))
}

/// Integrates an arbitrary single-virus-shaped field over [0, 1]ⁿ with
/// the same projection policy as [`simulate_single`]. Used for
/// closed-loop (state-dependent healing) experiments.
pub fn simulate_field<F>(
    n: usize,
    z0: &DVector<f64>,
    cfg: &IntegratorConfig,
    field: F,
) -> Result<SingleTrajectory>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    if z0.len() != n {
        return Err(Error::Shape(format!(
            "initial state has {} groups, expected {n}",
            z0.len()
        )));
    }
    let mut z0 = z0.clone();
    let violation = project_into_box(&mut z0);
    if violation > DOMAIN_TOL {
        return Err(Error::Precondition(format!(
            "initial state violates [0,1]^n by {violation:.3e}"
        )));
    }
    let raw = integrate(field, project_into_box, z0, cfg)?;
    Ok(SingleTrajectory {
        times: raw.times,
        states: raw.states,
        terminal_reason: raw.terminal_reason,
        max_projection_violation: raw.max_violation,
    })
}

/// First recorded time at which every coordinate exceeds the
/// strict-positivity floor, starting from a nonzero z₀ ≥ 0. Never
/// reaching it before `t_max` contradicts the reachability guarantee for
/// irreducible infection matrices and is reported as an error.
pub fn positivity_time(p: &VirusParams, z0: &DVector<f64>, cfg: &IntegratorConfig) -> Result<f64> {
    if z0.iter().any(|&v| v < 0.0) || z0.iter().all(|&v| v == 0.0) {
        return Err(Error::Precondition(
            "initial state must be nonnegative and nonzero".into(),
        ));
    }
    let mut cfg = *cfg;
    cfg.record_stride = 1;
    let traj = simulate_single(p, z0, &cfg)?;
    for (t, z) in traj.times.iter().zip(&traj.states) {
        if z.iter().all(|&v| v > POSITIVITY_FLOOR) {
            return Ok(*t);
        }
    }
    Err(Error::InternalConsistency(format!(
        "state never became strictly positive within t_max = {}; this contradicts the \
         reachability guarantee for irreducible infection matrices",
        cfg.t_max
    )))
}

/// Weighted-infinity-norm distance to an epidemic state along a
/// trajectory, V(z) = maxₖ |zₖ − x*ₖ| / x*ₖ, recorded per step.
#[derive(Debug, Clone)]
pub struct LyapunovTrace {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

/// Evaluates V along the single-virus trajectory from z₀. The reference
/// `x_star` must be a verified strictly positive equilibrium.
pub fn lyapunov_trace(
    p: &VirusParams,
    z0: &DVector<f64>,
    x_star: &DVector<f64>,
    cfg: &IntegratorConfig,
) -> Result<LyapunovTrace> {
    if x_star.len() != p.n() || x_star.iter().any(|&v| v <= 0.0) {
        return Err(Error::Precondition(
            "reference state must be strictly positive with matching dimension".into(),
        ));
    }
    let residual = single_virus_field_raw(p, x_star).amax();
    if residual > 1e-8 {
        return Err(Error::Precondition(format!(
            "reference state is not an equilibrium (residual {residual:.3e})"
        )));
    }
    let traj = simulate_single(p, z0, cfg)?;
    let values = traj
        .states
        .iter()
        .map(|z| {
            (0..p.n())
                .map(|k| (z[k] - x_star[k]).abs() / x_star[k])
                .fold(0.0, f64::max)
        })
        .collect();
    Ok(LyapunovTrace {
        times: traj.times,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    fn two_cycle_params(delta: f64) -> VirusParams {
        VirusParams::new(
            DVector::from_element(2, delta),
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]),
        )
        .unwrap()
    }

    fn model(delta1: f64, delta2: f64) -> BiVirusModel {
        BiVirusModel::new(two_cycle_params(delta1), two_cycle_params(delta2)).unwrap()
    }

    #[test]
    fn both_subcritical_converges_to_healthy_state() {
        // δ = 1.5, β = 1 on the 2-cycle: s(−D+B) = −0.5 for both viruses.
        let m = model(1.5, 1.5);
        let s0 = SystemState::new(
            DVector::from_vec(vec![0.4, 0.3]),
            DVector::from_vec(vec![0.3, 0.25]),
        )
        .unwrap();
        let traj = simulate(&m, &s0, &IntegratorConfig::default()).unwrap();
        assert_eq!(traj.terminal_reason, TerminalReason::Converged);
        assert!(traj.terminal().x1().amax() < 1e-6);
        assert!(traj.terminal().x2().amax() < 1e-6);
    }

    #[test]
    fn single_survivor_regime_reaches_its_epidemic_state() {
        // s¹ = 0.5 > 0, s² = −0.5: virus 1 settles at 1 − δ/β = 0.5.
        let m = model(0.5, 1.5);
        let s0 = SystemState::new(
            DVector::from_vec(vec![0.2, 0.1]),
            DVector::from_vec(vec![0.3, 0.2]),
        )
        .unwrap();
        let traj = simulate(&m, &s0, &IntegratorConfig::default()).unwrap();
        assert_eq!(traj.terminal_reason, TerminalReason::Converged);
        let terminal = traj.terminal();
        assert_relative_eq!(terminal.x1()[0], 0.5, epsilon = 1e-6);
        assert_relative_eq!(terminal.x1()[1], 0.5, epsilon = 1e-6);
        assert!(terminal.x2().amax() < 1e-6);
    }

    #[test]
    fn extinct_virus_subspace_is_invariant() {
        let m = model(0.5, 0.5);
        let s0 = SystemState::new(DVector::zeros(2), DVector::from_vec(vec![0.3, 0.2])).unwrap();
        let traj = simulate(&m, &s0, &IntegratorConfig::default()).unwrap();
        for s in &traj.states {
            assert_eq!(s.x1().amax(), 0.0);
        }
    }

    #[test]
    fn single_virus_examples() {
        let cfg = IntegratorConfig::default();
        let sub = two_cycle_params(1.5);
        let traj = simulate_single(&sub, &DVector::from_vec(vec![0.9, 0.1]), &cfg).unwrap();
        assert!(traj.terminal().amax() < 1e-6);

        let sup = two_cycle_params(0.25);
        let traj = simulate_single(&sup, &DVector::from_vec(vec![0.9, 0.1]), &cfg).unwrap();
        assert_relative_eq!(traj.terminal()[0], 0.75, epsilon = 1e-6);
        assert_relative_eq!(traj.terminal()[1], 0.75, epsilon = 1e-6);

        let traj = simulate_single(&sup, &DVector::zeros(2), &cfg).unwrap();
        assert_eq!(traj.terminal_reason, TerminalReason::Converged);
        assert_eq!(traj.terminal().amax(), 0.0);
        assert_eq!(traj.terminal_time(), 0.0);
    }

    #[test]
    fn projection_violations_stay_tiny() {
        let m = model(0.5, 0.4);
        let s0 = SystemState::new(
            DVector::from_vec(vec![0.5, 0.3]),
            DVector::from_vec(vec![0.5, 0.4]),
        )
        .unwrap();
        let cfg = IntegratorConfig {
            method: Method::Rk45Adaptive {
                rtol: 1e-10,
                atol: 1e-12,
            },
            ..IntegratorConfig::default()
        };
        let traj = simulate(&m, &s0, &cfg).unwrap();
        assert!(traj.max_projection_violation < 1e-9);
        assert_eq!(traj.terminal_reason, TerminalReason::Converged);
    }

    #[test]
    fn fixed_step_matches_adaptive_endpoint() {
        let m = model(1.5, 1.5);
        let s0 = SystemState::new(
            DVector::from_vec(vec![0.4, 0.4]),
            DVector::from_vec(vec![0.2, 0.2]),
        )
        .unwrap();
        let cfg = IntegratorConfig {
            method: Method::Rk4Fixed { dt: 0.01 },
            ..IntegratorConfig::default()
        };
        let traj = simulate(&m, &s0, &cfg).unwrap();
        assert_eq!(traj.terminal_reason, TerminalReason::Converged);
        assert!(traj.terminal().x1().amax() < 1e-6);
    }

    #[test]
    fn oversized_fixed_steps_end_in_a_domain_error() {
        // Fast infection rates under a coarse fixed step overshoot the
        // invariant set beyond the tolerance; the run stops with the
        // domain-error verdict and every recorded state is still the
        // projected, in-set one.
        let b = DMatrix::from_row_slice(2, 2, &[0.0, 40.0, 40.0, 0.0]);
        let v = VirusParams::new(DVector::from_element(2, 0.1), b).unwrap();
        let m = BiVirusModel::new(v.clone(), v).unwrap();
        let s0 = SystemState::new(
            DVector::from_vec(vec![0.45, 0.02]),
            DVector::from_vec(vec![0.45, 0.02]),
        )
        .unwrap();
        let cfg = IntegratorConfig {
            method: Method::Rk4Fixed { dt: 0.1 },
            t_max: 10.0,
            ..IntegratorConfig::default()
        };
        let traj = simulate(&m, &s0, &cfg).unwrap();
        assert_eq!(traj.terminal_reason, TerminalReason::DomainError);
        assert!(traj.max_projection_violation > 1e-9);
        for s in &traj.states {
            for i in 0..2 {
                assert!(s.x1()[i] >= 0.0 && s.x2()[i] >= 0.0);
                assert!(s.x1()[i] + s.x2()[i] <= 1.0);
            }
        }
    }

    #[test]
    fn record_stride_thins_but_keeps_endpoints() {
        let m = model(1.5, 1.5);
        let s0 = SystemState::new(
            DVector::from_vec(vec![0.4, 0.4]),
            DVector::from_vec(vec![0.2, 0.2]),
        )
        .unwrap();
        let dense = simulate(&m, &s0, &IntegratorConfig::default()).unwrap();
        let cfg = IntegratorConfig {
            record_stride: 10,
            ..IntegratorConfig::default()
        };
        let thin = simulate(&m, &s0, &cfg).unwrap();
        assert!(thin.times.len() < dense.times.len());
        assert_eq!(thin.times[0], 0.0);
        assert_relative_eq!(
            thin.terminal_time(),
            dense.terminal_time(),
            max_relative = 1e-9
        );
        for w in thin.times.windows(2) {
            assert!(w[1] > w[0]);
        }
    }

    #[test]
    fn positivity_time_examples() {
        let cfg = IntegratorConfig::default();
        let p = two_cycle_params(0.5);
        let tau = positivity_time(&p, &DVector::from_vec(vec![1.0, 0.0]), &cfg).unwrap();
        assert!(tau > 0.0 && tau.is_finite());

        let tau = positivity_time(&p, &DVector::from_vec(vec![0.5, 0.5]), &cfg).unwrap();
        assert_eq!(tau, 0.0);

        let mut ring = DMatrix::zeros(5, 5);
        for i in 0..5 {
            ring[((i + 1) % 5, i)] = 1.0;
        }
        let p5 = VirusParams::new(DVector::from_element(5, 0.5), ring).unwrap();
        let mut e0 = DVector::zeros(5);
        e0[0] = 1.0;
        let tau = positivity_time(&p5, &e0, &cfg).unwrap();
        assert!(tau > 0.0 && tau.is_finite());

        assert!(positivity_time(&p, &DVector::zeros(2), &cfg).is_err());
    }

    #[test]
    fn lyapunov_trace_examples() {
        let cfg = IntegratorConfig::default();
        let p = two_cycle_params(0.5);
        let x_star = DVector::from_element(2, 0.5);

        let at_eq = lyapunov_trace(&p, &x_star, &x_star, &cfg).unwrap();
        assert!(at_eq.values.iter().all(|&v| v == 0.0));

        let at_zero = lyapunov_trace(&p, &DVector::zeros(2), &x_star, &cfg).unwrap();
        assert!(at_zero.values.iter().all(|&v| v == 1.0));

        // Strict decrease is checked at tight tolerances and only while
        // the state is numerically distinct from x* (V above 1e-9);
        // below that the trace sits at the integrator noise floor.
        let tight = IntegratorConfig {
            method: Method::Rk45Adaptive {
                rtol: 1e-10,
                atol: 1e-12,
            },
            ..cfg
        };
        let trace =
            lyapunov_trace(&p, &DVector::from_vec(vec![0.9, 0.8]), &x_star, &tight).unwrap();
        assert!(trace.values.len() > 2);
        for w in trace.values.windows(2) {
            if w[0] > 1e-9 {
                assert!(w[1] < w[0] + 1e-12, "V increased: {} -> {}", w[0], w[1]);
            }
        }

        // A non-equilibrium reference is rejected.
        assert!(lyapunov_trace(&p, &x_star, &DVector::from_element(2, 0.4), &cfg).is_err());
    }
}
