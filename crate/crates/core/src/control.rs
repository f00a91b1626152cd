//! Closed-loop dynamics under proportional healing control
//! δᵢ(t) = kᵢxᵢ(t), and the experiments demonstrating that this feedback
//! can never stabilize the healthy state: commuting the diagonal factors
//! turns the closed loop into an open-loop system with D ← K and
//! B ← K + B, whose threshold ρ(I + K⁻¹B) exceeds one for every positive
//! gain vector, so the healthy state is a repeller.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dynamics::{
    simulate_bivirus_field, simulate_field, IntegratorConfig, SingleTrajectory, TrajectoryRecord,
};
use crate::equilibria::{solve_epidemic, threshold_abscissa, FixedPointConfig};
use crate::error::{Error, Result};
use crate::model::{ensure_virus_valid, BiVirusModel, SystemState, VirusParams};
use crate::spectral::{perron_pair, MetzlerMatrix};

/// A closed-loop run counts as having reached the epidemic state when its
/// terminal state is within this distance of x*.
pub const REPELLER_MATCH_TOL: f64 = 1e-6;
/// Terminal norm below which the constant-healing baseline counts as
/// having reached the healthy state. At its threshold s(−D+B) = 0 the
/// decay is algebraic (≈ 1/t), so the bound is coarser than for
/// exponentially stable runs.
pub const BASELINE_HEALTHY_TOL: f64 = 1e-3;

/// Positive proportional gains for both viruses.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackGains {
    pub k1: DVector<f64>,
    pub k2: DVector<f64>,
}

impl FeedbackGains {
    pub fn new(k1: DVector<f64>, k2: DVector<f64>) -> Result<Self> {
        if k1.len() != k2.len() {
            return Err(Error::Shape(format!(
                "gain vectors have lengths {} and {}",
                k1.len(),
                k2.len()
            )));
        }
        for k in [&k1, &k2] {
            validate_gains(k)?;
        }
        Ok(Self { k1, k2 })
    }
}

fn validate_gains(k: &DVector<f64>) -> Result<()> {
    if k.iter().any(|&v| !v.is_finite() || v <= 0.0) {
        return Err(Error::Precondition(
            "feedback gains must be finite and strictly positive".into(),
        ));
    }
    Ok(())
}

/// Equivalent open-loop parameters of the closed loop, with the verified
/// threshold ρ(I + K⁻¹B).
#[derive(Debug, Clone)]
pub struct ClosedLoopTransform {
    /// D ← K and B ← K + B.
    pub params: VirusParams,
    /// ρ(I + K⁻¹B); strictly greater than one for every valid input.
    pub rho: f64,
}

/// Rewrites the closed-loop single-virus system ż = (−KX + B − XB)z as an
/// open-loop system with healing K and infection K + B, and asserts that
/// its reproduction threshold ρ(I + K⁻¹B) exceeds one.
pub fn closed_loop_transform(p: &VirusParams, k: &DVector<f64>) -> Result<ClosedLoopTransform> {
    ensure_virus_valid(p)?;
    validate_gains(k)?;
    let n = p.n();
    if k.len() != n {
        return Err(Error::Shape(format!(
            "gain vector has length {}, model has {n} groups",
            k.len()
        )));
    }
    let mut b = p.b().clone();
    for i in 0..n {
        b[(i, i)] += k[i];
    }
    let params = VirusParams::new(k.clone(), b)?;

    let ratio = DMatrix::from_fn(n, n, |i, j| {
        p.b()[(i, j)] / k[i] + f64::from(u8::from(i == j))
    });
    let rho = perron_pair(&MetzlerMatrix::new(ratio)?)?.value;
    if rho <= 1.0 {
        return Err(Error::InternalConsistency(format!(
            "ρ(I + K⁻¹B) = {rho} must exceed 1 for positive gains and an irreducible B"
        )));
    }
    Ok(ClosedLoopTransform { params, rho })
}

/// Closed-loop single-virus field żᵢ = −kᵢzᵢ² + (1−zᵢ)·Σⱼ βᵢⱼzⱼ.
pub fn closed_loop_field(p: &VirusParams, k: &DVector<f64>, z: &DVector<f64>) -> DVector<f64> {
    let w = p.b() * z;
    DVector::from_fn(p.n(), |i, _| -k[i] * z[i] * z[i] + (1.0 - z[i]) * w[i])
}

/// One perturbation run of the repeller experiment.
#[derive(Debug, Clone)]
pub struct RepellerRun {
    pub epsilon: f64,
    /// Index into [`RepellerReport::directions`].
    pub direction: usize,
    pub terminal: DVector<f64>,
    pub distance_to_epidemic: f64,
    pub converged_to_epidemic: bool,
    /// Whether ‖z(t)‖∞ is nondecreasing from its minimum onward — the
    /// perturbation is pushed away from the healthy state.
    pub escaped: bool,
}

/// The constant-healing comparison run with δᵢ = Σⱼ βᵢⱼ, which places the
/// system exactly on the epidemic threshold and does stabilize the
/// healthy state.
#[derive(Debug, Clone)]
pub struct BaselineRun {
    /// s(−D+B) of the baseline; zero up to numerical error.
    pub s_value: f64,
    pub terminal_norm: f64,
    pub reached_healthy: bool,
}

/// Outcome of perturbing the closed loop away from the healthy state in
/// many directions and magnitudes.
#[derive(Debug, Clone)]
pub struct RepellerReport {
    pub rho: f64,
    /// Epidemic state of the transformed open-loop system.
    pub x_star: DVector<f64>,
    pub directions: Vec<DVector<f64>>,
    pub runs: Vec<RepellerRun>,
    pub all_converged_to_epidemic: bool,
    pub all_escaped: bool,
    pub baseline: BaselineRun,
}

fn escape_profile(traj: &SingleTrajectory) -> bool {
    let norms: Vec<f64> = traj.states.iter().map(|z| z.amax()).collect();
    let (argmin, _) =
        norms.iter().enumerate().fold(
            (0, f64::INFINITY),
            |(ai, av), (i, &v)| {
                if v < av {
                    (i, v)
                } else {
                    (ai, av)
                }
            },
        );
    // Recorded norms carry adaptive-integrator noise near the attractor;
    // the slack is far below the escape itself (orders of magnitude) but
    // above that noise.
    let slack = 1e-6 * norms.iter().fold(0.0_f64, |a, &b| a.max(b));
    norms.windows(2).skip(argmin).all(|w| w[1] >= w[0] - slack)
        && norms.last().unwrap() > norms.first().unwrap()
}

/// Simulates the closed-loop single-virus system from ε-perturbations of
/// the healthy state along the axes plus ten seeded random positive
/// directions, for each magnitude in `epsilons`. Every run must land on
/// the epidemic state of the transformed system; a run reaching the
/// healthy state instead would contradict the repeller property and is
/// an error.
pub fn repeller_experiment(
    p: &VirusParams,
    k: &DVector<f64>,
    epsilons: &[f64],
    seed: u64,
    int_cfg: &IntegratorConfig,
    fp_cfg: &FixedPointConfig,
) -> Result<RepellerReport> {
    let transform = closed_loop_transform(p, k)?;
    let x_star = solve_epidemic(&transform.params, fp_cfg)?;
    let n = p.n();
    if epsilons.iter().any(|&e| !(e > 0.0 && e <= 1.0)) {
        return Err(Error::Precondition(
            "perturbation magnitudes must lie in (0, 1]".into(),
        ));
    }

    let mut directions: Vec<DVector<f64>> = (0..n)
        .map(|i| DVector::from_fn(n, |j, _| f64::from(u8::from(i == j))))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..10 {
        let mut d = DVector::from_fn(n, |_, _| rng.random_range(0.05..1.0));
        let max = d.max();
        d /= max;
        directions.push(d);
    }

    // Dense recording so the escape profile sees every accepted step.
    let mut run_cfg = *int_cfg;
    run_cfg.record_stride = 1;

    let mut runs = Vec::with_capacity(directions.len() * epsilons.len());
    for &eps in epsilons {
        for (di, dir) in directions.iter().enumerate() {
            let z0 = dir * eps;
            let traj = simulate_field(n, &z0, &run_cfg, |z| closed_loop_field(p, k, z))?;
            let terminal = traj.terminal().clone();
            let distance = (&terminal - &x_star).amax();
            if terminal.amax() < REPELLER_MATCH_TOL {
                return Err(Error::InternalConsistency(format!(
                    "closed-loop run (ε = {eps}, direction {di}) converged to the healthy \
                     state; positive proportional gains cannot stabilize it"
                )));
            }
            runs.push(RepellerRun {
                epsilon: eps,
                direction: di,
                escaped: escape_profile(&traj),
                converged_to_epidemic: distance < REPELLER_MATCH_TOL,
                distance_to_epidemic: distance,
                terminal,
            });
        }
    }

    let baseline = constant_healing_baseline(p, int_cfg)?;
    let all_converged_to_epidemic = runs.iter().all(|r| r.converged_to_epidemic);
    let all_escaped = runs.iter().all(|r| r.escaped);
    Ok(RepellerReport {
        rho: transform.rho,
        x_star,
        directions,
        runs,
        all_converged_to_epidemic,
        all_escaped,
        baseline,
    })
}

/// Runs the constant-healing comparison: δᵢ = Σⱼ βᵢⱼ makes every row sum
/// of D⁻¹B equal one, hence s(−D+B) = 0, and the healthy state attracts.
/// Decay at the threshold is algebraic, so the horizon is stretched to at
/// least 1e6.
fn constant_healing_baseline(p: &VirusParams, int_cfg: &IntegratorConfig) -> Result<BaselineRun> {
    let n = p.n();
    let delta = DVector::from_fn(n, |i, _| p.b().row(i).sum());
    let baseline = VirusParams::new(delta, p.b().clone())?;
    let s_value = threshold_abscissa(&baseline)?;
    let mut cfg = *int_cfg;
    cfg.t_max = cfg.t_max.max(1e6);
    let traj = crate::dynamics::simulate_single(&baseline, &DVector::from_element(n, 0.3), &cfg)?;
    let terminal_norm = traj.terminal().amax();
    Ok(BaselineRun {
        s_value,
        terminal_norm,
        reached_healthy: terminal_norm < BASELINE_HEALTHY_TOL,
    })
}

/// Integrates the bi-virus system with both healing rates replaced by the
/// proportional laws δᵏᵢ(t) = kᵏᵢxᵏᵢ(t).
pub fn bivirus_feedback_simulate(
    m: &BiVirusModel,
    gains: &FeedbackGains,
    s0: &SystemState,
    cfg: &IntegratorConfig,
) -> Result<TrajectoryRecord> {
    let n = m.n();
    if gains.k1.len() != n {
        return Err(Error::Shape(format!(
            "gain vectors have length {}, model has {n} groups",
            gains.k1.len()
        )));
    }
    simulate_bivirus_field(n, s0, cfg, |v| {
        let x1 = v.rows(0, n).into_owned();
        let x2 = v.rows(n, n).into_owned();
        let w1 = m.virus1().b() * &x1;
        let w2 = m.virus2().b() * &x2;
        DVector::from_fn(2 * n, |i, _| {
            if i < n {
                -gains.k1[i] * x1[i] * x1[i] + (1.0 - x1[i] - x2[i]) * w1[i]
            } else {
                let i = i - n;
                -gains.k2[i] * x2[i] * x2[i] + (1.0 - x2[i] - x1[i]) * w2[i]
            }
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::single_virus_field_raw;
    use approx::assert_relative_eq;

    fn two_cycle(beta: f64) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[0.0, beta, beta, 0.0])
    }

    fn scalar_virus() -> VirusParams {
        VirusParams::new(
            DVector::from_element(1, 0.5),
            DMatrix::from_element(1, 1, 1.0),
        )
        .unwrap()
    }

    #[test]
    fn scalar_transform() {
        // k = 1, β = 1: equivalent δ = 1, B = [2], ρ = 2.
        let t = closed_loop_transform(&scalar_virus(), &DVector::from_element(1, 1.0)).unwrap();
        assert_eq!(t.params.delta()[0], 1.0);
        assert_eq!(t.params.b()[(0, 0)], 2.0);
        assert_relative_eq!(t.rho, 2.0, epsilon = 1e-9);
    }

    #[test]
    fn two_cycle_transform() {
        let p = VirusParams::new(DVector::from_element(2, 0.5), two_cycle(1.0)).unwrap();
        let t = closed_loop_transform(&p, &DVector::from_element(2, 1.0)).unwrap();
        assert_relative_eq!(t.rho, 2.0, epsilon = 1e-9);
        assert!(matches!(
            closed_loop_transform(&p, &DVector::from_vec(vec![1.0, 0.0])),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn closed_loop_field_matches_transformed_system() {
        let p = VirusParams::new(DVector::from_vec(vec![0.4, 0.7]), two_cycle(1.3)).unwrap();
        let k = DVector::from_vec(vec![0.8, 1.4]);
        let t = closed_loop_transform(&p, &k).unwrap();
        for z in [
            DVector::from_vec(vec![0.3, 0.6]),
            DVector::from_vec(vec![0.05, 0.9]),
        ] {
            let direct = closed_loop_field(&p, &k, &z);
            let via_transform = single_virus_field_raw(&t.params, &z);
            assert_relative_eq!((direct - via_transform).amax(), 0.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn closed_loop_healthy_state_is_an_equilibrium() {
        // The repeller claim is about perturbations; the unperturbed
        // healthy state itself never moves.
        let p = VirusParams::new(DVector::from_element(2, 0.5), two_cycle(1.0)).unwrap();
        let k = DVector::from_element(2, 1.0);
        let traj = crate::dynamics::simulate_field(
            2,
            &DVector::zeros(2),
            &IntegratorConfig::default(),
            |z| closed_loop_field(&p, &k, z),
        )
        .unwrap();
        assert_eq!(traj.terminal_time(), 0.0);
        assert_eq!(traj.terminal().amax(), 0.0);
    }

    #[test]
    fn scalar_repeller_lands_on_half() {
        // ż = z − 2z²: every perturbation ends at 0.5.
        let report = repeller_experiment(
            &scalar_virus(),
            &DVector::from_element(1, 1.0),
            &[0.01],
            7,
            &IntegratorConfig::default(),
            &FixedPointConfig::default(),
        )
        .unwrap();
        assert_relative_eq!(report.x_star[0], 0.5, epsilon = 1e-10);
        assert!(report.all_converged_to_epidemic);
        assert!(report.all_escaped);
        for run in &report.runs {
            assert_relative_eq!(run.terminal[0], 0.5, epsilon = 1e-6);
        }
    }

    #[test]
    fn two_cycle_repeller_with_standard_magnitudes() {
        let p = VirusParams::new(DVector::from_element(2, 0.5), two_cycle(1.0)).unwrap();
        let report = repeller_experiment(
            &p,
            &DVector::from_element(2, 1.0),
            &[1e-6, 1e-4, 1e-2],
            42,
            &IntegratorConfig::default(),
            &FixedPointConfig::default(),
        )
        .unwrap();
        // Transformed system: δ = 1, B = C + I; symmetric fixed point
        // solves −x² + (1−x)x = 0, i.e. x = 0.5.
        assert_relative_eq!(report.x_star[0], 0.5, epsilon = 1e-10);
        assert_relative_eq!(report.x_star[1], 0.5, epsilon = 1e-10);
        assert!(report.all_converged_to_epidemic);
        assert!(report.all_escaped);
        // 2 axes + 10 random directions, 3 magnitudes.
        assert_eq!(report.runs.len(), 36);
        // Baseline sits on the threshold and drains to the healthy state.
        assert!(report.baseline.s_value.abs() < 1e-9);
        assert!(report.baseline.reached_healthy);
    }

    #[test]
    fn feedback_field_is_the_original_field_with_state_scaled_healing() {
        // The closed loop equals the open-loop bi-virus field evaluated
        // with δᵏᵢ set to kᵏᵢxᵏᵢ at the same state.
        let p1 = VirusParams::new(DVector::from_vec(vec![9.0, 9.0]), two_cycle(1.25)).unwrap();
        let p2 = VirusParams::new(DVector::from_vec(vec![9.0, 9.0]), two_cycle(0.75)).unwrap();
        let m = BiVirusModel::new(p1, p2).unwrap();
        let k1 = DVector::from_vec(vec![0.9, 1.3]);
        let k2 = DVector::from_vec(vec![1.1, 0.7]);
        let x1 = DVector::from_vec(vec![0.23, 0.41]);
        let x2 = DVector::from_vec(vec![0.17, 0.08]);

        let substituted = BiVirusModel::new(
            VirusParams::new(k1.component_mul(&x1), m.virus1().b().clone()).unwrap(),
            VirusParams::new(k2.component_mul(&x2), m.virus2().b().clone()).unwrap(),
        )
        .unwrap();
        let (want1, want2) = crate::model::bivirus_field_raw(&substituted, &x1, &x2);

        let w1 = m.virus1().b() * &x1;
        let w2 = m.virus2().b() * &x2;
        for i in 0..2 {
            let got1 = -k1[i] * x1[i] * x1[i] + (1.0 - x1[i] - x2[i]) * w1[i];
            let got2 = -k2[i] * x2[i] * x2[i] + (1.0 - x2[i] - x1[i]) * w2[i];
            assert_relative_eq!(got1, want1[i], epsilon = 1e-15);
            assert_relative_eq!(got2, want2[i], epsilon = 1e-15);
        }
    }

    #[test]
    fn feedback_bivirus_keeps_healthy_state_and_invariant_subspace() {
        let p = VirusParams::new(DVector::from_element(2, 0.5), two_cycle(1.0)).unwrap();
        let m = BiVirusModel::new(p.clone(), p).unwrap();
        let gains =
            FeedbackGains::new(DVector::from_element(2, 1.0), DVector::from_element(2, 2.0))
                .unwrap();

        let cfg = IntegratorConfig::default();
        let stay = bivirus_feedback_simulate(&m, &gains, &SystemState::zeros(2), &cfg).unwrap();
        assert_eq!(stay.terminal_time(), 0.0);
        assert_eq!(stay.terminal().x1().amax(), 0.0);

        // x² ≡ 0 is invariant and x¹ follows the single-virus closed loop.
        let s0 = SystemState::new(DVector::from_element(2, 1e-3), DVector::zeros(2)).unwrap();
        let traj = bivirus_feedback_simulate(&m, &gains, &s0, &cfg).unwrap();
        for s in &traj.states {
            assert_eq!(s.x2().amax(), 0.0);
        }
        assert_relative_eq!(traj.terminal().x1()[0], 0.5, epsilon = 1e-6);
    }

    #[test]
    fn generic_small_start_escapes_the_healthy_state() {
        let p = VirusParams::new(DVector::from_element(2, 0.5), two_cycle(1.0)).unwrap();
        let m = BiVirusModel::new(p.clone(), p).unwrap();
        let gains =
            FeedbackGains::new(DVector::from_element(2, 1.0), DVector::from_element(2, 1.5))
                .unwrap();
        let s0 = SystemState::new(
            DVector::from_element(2, 1e-3),
            DVector::from_element(2, 2e-3),
        )
        .unwrap();
        let traj =
            bivirus_feedback_simulate(&m, &gains, &s0, &IntegratorConfig::default()).unwrap();
        let terminal = traj.terminal();
        let terminal_norm = terminal.x1().amax().max(terminal.x2().amax());
        let initial_norm = 2e-3;
        assert!(terminal_norm > 10.0 * initial_norm);
    }
}
