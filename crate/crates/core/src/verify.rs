//! Seeded random instance generators and the runtime property suite.
//!
//! The suite replays the guarantees every module makes — threshold
//! trichotomy signs, sign-pattern indices, negative inverses, Perron
//! pairs against the dense eigensolver, convergence regimes, solver
//! uniqueness, coexistence parallelism, sensitivity signs, repeller
//! behavior, invariant-set respect — on freshly drawn random instances,
//! and reports one pass/fail line per property with the first
//! counterexample on failure. All randomness is ChaCha-seeded, so a
//! given seed reproduces the exact instances.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::control::repeller_experiment;
use crate::dynamics::{
    lyapunov_trace, positivity_time, simulate, simulate_single, IntegratorConfig, Method,
};
use crate::equilibria::{
    coexistence_continuum, enumerate_equilibria, solve_epidemic, solve_epidemic_from,
    EquilibriumKind, FixedPointConfig, StabilityVerdict,
};
use crate::model::{jacobian, validate, BiVirusModel, SystemState, VirusParams};
use crate::sensitivity::{monotonicity_report, sensitivity_solve, Perturbation};
use crate::spectral::{
    perron_pair, sign_pattern_violation, spectral_abscissa, spectral_radius, MetzlerMatrix,
    ThresholdVerdict,
};

// ---------------------------------------------------------------------
// Random instance generators
// ---------------------------------------------------------------------

/// Random strongly connected 0/1 pattern: a Hamiltonian cycle through a
/// shuffled node order plus extra arcs (including self-arcs) with the
/// given probability.
pub fn random_strongly_connected_pattern(
    rng: &mut ChaCha8Rng,
    n: usize,
    extra_arc_prob: f64,
) -> DMatrix<f64> {
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
    let mut a = DMatrix::zeros(n, n);
    for k in 0..n {
        let from = order[k];
        let to = order[(k + 1) % n];
        a[(to, from)] = 1.0;
    }
    for i in 0..n {
        for j in 0..n {
            if a[(i, j)] == 0.0 && rng.random_bool(extra_arc_prob) {
                a[(i, j)] = 1.0;
            }
        }
    }
    a
}

/// Random irreducible nonnegative matrix with weights in [0.2, 1.5].
pub fn random_irreducible_nonnegative(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let pattern = random_strongly_connected_pattern(rng, n, 0.35);
    DMatrix::from_fn(n, n, |i, j| {
        if pattern[(i, j)] > 0.0 {
            rng.random_range(0.2..1.5)
        } else {
            0.0
        }
    })
}

/// Random irreducible Metzler matrix (diagonal of either sign).
pub fn random_irreducible_metzler(rng: &mut ChaCha8Rng, n: usize) -> MetzlerMatrix {
    let mut m = random_irreducible_nonnegative(rng, n);
    for i in 0..n {
        m[(i, i)] += rng.random_range(-1.5..0.5);
    }
    MetzlerMatrix::new(m).expect("generator produces Metzler matrices")
}

/// Random irreducible Hurwitz Metzler matrix, M = N − (ρ(N) + margin)·I.
pub fn random_hurwitz_metzler(rng: &mut ChaCha8Rng, n: usize) -> MetzlerMatrix {
    let nonneg = random_irreducible_nonnegative(rng, n);
    let rho = perron_pair(&MetzlerMatrix::new(nonneg.clone()).unwrap())
        .expect("irreducible by construction")
        .value;
    let margin = rng.random_range(0.05..1.0);
    let m = nonneg - DMatrix::identity(n, n) * (rho + margin);
    MetzlerMatrix::new(m).expect("shifted matrix stays Metzler")
}

/// Random virus with s(−D+B) placed at `target_s` (exactly, up to the
/// Perron solve): B is scaled to ρ(B) ∈ [1.2, 2), a heterogeneous base
/// healing vector in [0, 0.3) is drawn, and a uniform shift moves the
/// abscissa onto the target. Healing rates stay strictly positive for
/// any target ≤ 0.6.
pub fn random_virus_with_abscissa(rng: &mut ChaCha8Rng, n: usize, target_s: f64) -> VirusParams {
    let mut b = random_irreducible_nonnegative(rng, n);
    let rho = perron_pair(&MetzlerMatrix::new(b.clone()).unwrap())
        .expect("irreducible by construction")
        .value;
    b *= rng.random_range(1.2..2.0) / rho;
    let d0 = DVector::from_fn(n, |_, _| rng.random_range(0.0..0.3));
    let mut m0 = b.clone();
    for i in 0..n {
        m0[(i, i)] -= d0[i];
    }
    let s0 = perron_pair(&MetzlerMatrix::new(m0).unwrap())
        .expect("irreducible by construction")
        .value;
    let shift = s0 - target_s;
    let delta = DVector::from_fn(n, |i, _| d0[i] + shift);
    VirusParams::new(delta, b).expect("dimensions agree by construction")
}

/// Random subcritical virus, s(−D+B) ∈ [−0.8, −0.1].
pub fn random_subcritical_virus(rng: &mut ChaCha8Rng, n: usize) -> VirusParams {
    let target = rng.random_range(-0.8..-0.1);
    random_virus_with_abscissa(rng, n, target)
}

/// Random supercritical virus, s(−D+B) ∈ [0.1, 0.6].
pub fn random_supercritical_virus(rng: &mut ChaCha8Rng, n: usize) -> VirusParams {
    let target = rng.random_range(0.1..0.6);
    random_virus_with_abscissa(rng, n, target)
}

/// Random strictly interior state: x¹ᵢ, x²ᵢ > 0 with x¹ᵢ + x²ᵢ < 1.
pub fn random_interior_state(rng: &mut ChaCha8Rng, n: usize) -> SystemState {
    let x1 = DVector::from_fn(n, |_, _| {
        rng.random_range(0.02..0.9) * rng.random_range(0.05..0.95)
    });
    let x2 = DVector::from_fn(n, |i, _| (1.0 - x1[i]) * rng.random_range(0.02..0.9));
    SystemState::new(x1, x2).expect("interior by construction")
}

/// Random nonzero nonnegative vector with at least one exact zero.
pub fn random_boundary_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    loop {
        let mut v = DVector::from_fn(n, |_, _| rng.random_range(0.1..0.9));
        let zeros = rng.random_range(1..n.max(2));
        for _ in 0..zeros {
            let i = rng.random_range(0..n);
            v[i] = 0.0;
        }
        if v.iter().any(|&x| x > 0.0) && v.iter().any(|&x| x == 0.0) {
            return v;
        }
    }
}

// Dyadic rate tables: products of these values are exact in binary
// floating point, so equal-fitness instances have exactly equal ratios.
const DYADIC_BETAS: [f64; 6] = [0.5, 0.75, 1.0, 1.25, 1.5, 2.0];
const DYADIC_RATIOS: [f64; 3] = [0.25, 0.375, 0.5];
const DYADIC_RATIOS_LOW: [f64; 3] = [0.125, 0.25, 0.3125];
const DYADIC_RATIOS_HIGH: [f64; 3] = [0.5, 0.625, 0.75];

fn homogeneous_virus(a: &DMatrix<f64>, delta: f64, beta: f64) -> VirusParams {
    VirusParams::new(DVector::from_element(a.nrows(), delta), a * beta).expect("dimensions agree")
}

/// Shared homogeneous graph with s(A) > δ¹/β¹ > δ²/β²: virus 2 is the
/// fitter and survives.
pub fn random_fitter_instance(rng: &mut ChaCha8Rng, n: usize) -> BiVirusModel {
    let a = random_strongly_connected_pattern(rng, n, 0.35);
    let beta1 = DYADIC_BETAS[rng.random_range(0..DYADIC_BETAS.len())];
    let beta2 = DYADIC_BETAS[rng.random_range(0..DYADIC_BETAS.len())];
    let ratio1 = DYADIC_RATIOS_HIGH[rng.random_range(0..DYADIC_RATIOS_HIGH.len())];
    let ratio2 = DYADIC_RATIOS_LOW[rng.random_range(0..DYADIC_RATIOS_LOW.len())];
    BiVirusModel::new(
        homogeneous_virus(&a, ratio1 * beta1, beta1),
        homogeneous_virus(&a, ratio2 * beta2, beta2),
    )
    .expect("same node set")
}

/// Shared homogeneous graph with exactly equal fitness ratios
/// δ¹/β¹ = δ²/β² < s(A). With `identical`, both viruses get the same β
/// so the parameters coincide entirely and the summed system follows the
/// single-virus model.
pub fn random_equal_ratio_instance(
    rng: &mut ChaCha8Rng,
    n: usize,
    identical: bool,
) -> BiVirusModel {
    let a = random_strongly_connected_pattern(rng, n, 0.35);
    let ratio = DYADIC_RATIOS[rng.random_range(0..DYADIC_RATIOS.len())];
    let beta1 = DYADIC_BETAS[rng.random_range(0..DYADIC_BETAS.len())];
    let beta2 = if identical {
        beta1
    } else {
        DYADIC_BETAS[rng.random_range(0..DYADIC_BETAS.len())]
    };
    BiVirusModel::new(
        homogeneous_virus(&a, ratio * beta1, beta1),
        homogeneous_virus(&a, ratio * beta2, beta2),
    )
    .expect("same node set")
}

// ---------------------------------------------------------------------
// Property suite
// ---------------------------------------------------------------------

/// One property with its verdict.
#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Results of the full suite.
#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub seed: u64,
    pub checks: Vec<CheckResult>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Trial counts per property; defaults match the documented gate sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SuiteConfig {
    pub seed: u64,
    pub trichotomy_trials: usize,
    pub sign_pattern_trials: usize,
    pub negative_inverse_trials: usize,
    pub perron_trials: usize,
    pub healthy_trials: usize,
    pub solver_trials: usize,
    pub uniqueness_initializers: usize,
    pub fitter_trials: usize,
    pub coexistence_trials: usize,
    pub sensitivity_trials: usize,
    pub feedback_trials: usize,
    pub invariance_trials: usize,
    pub positivity_trials: usize,
    pub lyapunov_trials: usize,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            trichotomy_trials: 500,
            sign_pattern_trials: 200,
            negative_inverse_trials: 100,
            perron_trials: 100,
            healthy_trials: 50,
            solver_trials: 50,
            uniqueness_initializers: 10,
            fitter_trials: 10,
            coexistence_trials: 6,
            sensitivity_trials: 50,
            feedback_trials: 20,
            invariance_trials: 10,
            positivity_trials: 50,
            lyapunov_trials: 20,
        }
    }
}

type TrialResult = std::result::Result<(), String>;

fn run_check<F>(name: &str, trials: usize, mut body: F) -> CheckResult
where
    F: FnMut(usize) -> TrialResult,
{
    let mut failures = 0;
    let mut first = String::new();
    for t in 0..trials {
        if let Err(msg) = body(t) {
            failures += 1;
            if first.is_empty() {
                first = format!("trial {t}: {msg}");
            }
        }
    }
    CheckResult {
        name: name.into(),
        passed: failures == 0,
        detail: if failures == 0 {
            format!("{trials} trials")
        } else {
            format!("{failures}/{trials} trials failed; first counterexample: {first}")
        },
    }
}

fn seeded(cfg: &SuiteConfig, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(
        cfg.seed
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(stream),
    )
}

fn sign_band(v: f64, band: f64) -> i8 {
    if v > band {
        1
    } else if v < -band {
        -1
    } else {
        0
    }
}

fn tight_integrator() -> IntegratorConfig {
    IntegratorConfig {
        method: Method::Rk45Adaptive {
            rtol: 1e-10,
            atol: 1e-12,
        },
        ..IntegratorConfig::default()
    }
}

fn check_trichotomy(cfg: &SuiteConfig) -> CheckResult {
    let mut rng = seeded(cfg, 1);
    run_check("threshold_trichotomy_signs", cfg.trichotomy_trials, |_| {
        let n = rng.random_range(2..=8);
        let lambda = DVector::from_fn(n, |_, _| -rng.random_range(0.2..2.0));
        let nonneg = random_irreducible_nonnegative(&mut rng, n);
        let verdict =
            crate::spectral::threshold_trichotomy(&lambda, &nonneg).map_err(|e| e.to_string())?;

        // Independent confirmation by dense eigensolve on both routes.
        let mut m = nonneg.clone();
        for i in 0..n {
            m[(i, i)] += lambda[i];
        }
        let s = spectral_abscissa(&m).map_err(|e| e.to_string())?;
        let ratio = DMatrix::from_fn(n, n, |i, j| nonneg[(i, j)] / -lambda[i]);
        let rho = spectral_radius(&ratio).map_err(|e| e.to_string())?;
        let (ss, sr) = (sign_band(s, 1e-9), sign_band(rho - 1.0, 1e-9));
        if ss * sr == -1 {
            return Err(format!(
                "sign disagreement: s = {s:.3e}, ρ−1 = {:.3e}",
                rho - 1.0
            ));
        }
        let expected = match ss {
            1 => ThresholdVerdict::Above,
            -1 => ThresholdVerdict::Below,
            _ => ThresholdVerdict::Critical,
        };
        if verdict != expected {
            return Err(format!("verdict {verdict:?} but dense abscissa {s:.3e}"));
        }
        Ok(())
    })
}

fn check_sign_pattern(cfg: &SuiteConfig) -> CheckResult {
    let mut rng = seeded(cfg, 2);
    run_check("sign_pattern_index_exists", cfg.sign_pattern_trials, |_| {
        let n = rng.random_range(2..=8);
        let m = random_irreducible_nonnegative(&mut rng, n);
        let x = random_boundary_vector(&mut rng, n);
        let i = sign_pattern_violation(&m, &x).map_err(|e| e.to_string())?;
        let y = &m * &x;
        if x[i] != 0.0 || y[i] <= 0.0 {
            return Err(format!("index {i} has x = {}, (Mx) = {}", x[i], y[i]));
        }
        Ok(())
    })
}

fn check_negative_inverse(cfg: &SuiteConfig) -> CheckResult {
    let mut rng = seeded(cfg, 3);
    run_check(
        "hurwitz_metzler_inverse_negative",
        cfg.negative_inverse_trials,
        |_| {
            let n = rng.random_range(2..=8);
            let m = random_hurwitz_metzler(&mut rng, n);
            let inv = crate::spectral::negative_inverse_check(&m).map_err(|e| e.to_string())?;
            if inv.iter().any(|&v| v >= 0.0) {
                return Err("inverse has a nonnegative entry".into());
            }
            Ok(())
        },
    )
}

fn check_perron(cfg: &SuiteConfig) -> CheckResult {
    let mut rng = seeded(cfg, 4);
    run_check("perron_pair_vs_dense_eigensolve", cfg.perron_trials, |_| {
        let n = rng.random_range(2..=8);
        let m = random_irreducible_metzler(&mut rng, n);
        let pp = perron_pair(&m).map_err(|e| e.to_string())?;
        let dense = spectral_abscissa(m.entries()).map_err(|e| e.to_string())?;
        if (pp.value - dense).abs() > 1e-8 {
            return Err(format!("power {} vs dense {dense}", pp.value));
        }
        let eig_residual = (m.entries() * &pp.right - &pp.right * pp.value).amax();
        if eig_residual > 1e-8 {
            return Err(format!("right eigen residual {eig_residual:.3e}"));
        }
        // Comparison bound: Mx < λx for x ≫ 0 forces s(M) < λ.
        let x = DVector::from_fn(n, |_, _| rng.random_range(0.1..1.0));
        let y = m.entries() * &x;
        let lambda = (0..n)
            .map(|i| y[i] / x[i])
            .fold(f64::NEG_INFINITY, f64::max)
            + rng.random_range(0.01..0.5);
        if pp.value >= lambda {
            return Err(format!(
                "s(M) = {} not below comparison bound {lambda}",
                pp.value
            ));
        }
        Ok(())
    })
}

fn check_healthy_convergence(cfg: &SuiteConfig) -> CheckResult {
    let mut rng = seeded(cfg, 5);
    run_check(
        "healthy_state_attracts_when_subcritical",
        cfg.healthy_trials,
        |_| {
            let n = rng.random_range(2..=6);
            let m = BiVirusModel::new(
                random_subcritical_virus(&mut rng, n),
                random_subcritical_virus(&mut rng, n),
            )
            .map_err(|e| e.to_string())?;
            let s0 = random_interior_state(&mut rng, n);
            let traj =
                simulate(&m, &s0, &IntegratorConfig::default()).map_err(|e| e.to_string())?;
            let norm = traj.terminal().x1().amax().max(traj.terminal().x2().amax());
            if norm >= 1e-6 {
                return Err(format!(
                    "terminal norm {norm:.3e} (reason {:?})",
                    traj.terminal_reason
                ));
            }
            Ok(())
        },
    )
}

fn check_epidemic_solver(cfg: &SuiteConfig) -> CheckResult {
    let mut rng = seeded(cfg, 6);
    let fp = FixedPointConfig::default();
    run_check(
        "epidemic_solver_ode_agreement_and_uniqueness",
        cfg.solver_trials,
        |_| {
            let n = rng.random_range(2..=6);
            let p = random_supercritical_virus(&mut rng, n);
            let solve =
                crate::equilibria::solve_epidemic_detailed(&p, &fp).map_err(|e| e.to_string())?;
            let x_star = &solve.x_star;
            if solve.residual > 1e-10 {
                return Err(format!("residual {:.3e}", solve.residual));
            }
            if x_star.iter().any(|&v| v <= 0.0 || v >= 1.0) {
                return Err("equilibrium not interior".into());
            }
            // ODE route.
            let z0 = DVector::from_fn(n, |_, _| rng.random_range(0.05..0.95));
            let traj = simulate_single(&p, &z0, &IntegratorConfig::default())
                .map_err(|e| e.to_string())?;
            let gap = (traj.terminal() - x_star).amax();
            if gap >= 1e-6 {
                return Err(format!(
                    "ODE terminal differs from fixed point by {gap:.3e}"
                ));
            }
            // Uniqueness across initializers.
            for _ in 0..cfg.uniqueness_initializers {
                let x0 = DVector::from_fn(n, |_, _| rng.random_range(0.02..1.0));
                let other = solve_epidemic_from(&p, &fp, &x0).map_err(|e| e.to_string())?;
                let dev = (&other.x_star - x_star).amax();
                if dev >= 1e-9 {
                    return Err(format!("initializer-dependent result, deviation {dev:.3e}"));
                }
            }
            Ok(())
        },
    )
}

fn check_solver_closed_forms(_cfg: &SuiteConfig) -> CheckResult {
    let fp = FixedPointConfig::default();
    // Homogeneous regular graphs admit x* = (1 − δ/(β·d))·1 with d the
    // common in-degree; also s((I − X̃)A) = δ/β at the equilibrium.
    let mut cases: Vec<(DMatrix<f64>, f64, f64, f64)> = Vec::new();
    for n in [3usize, 5] {
        let mut ring = DMatrix::zeros(n, n);
        for i in 0..n {
            ring[((i + 1) % n, i)] = 1.0;
        }
        cases.push((ring, 0.3, 1.0, 1.0)); // d = 1
    }
    for n in [3usize, 4] {
        let complete = DMatrix::from_fn(n, n, |i, j| f64::from(u8::from(i != j)));
        cases.push((complete, 1.0, 1.0, (n - 1) as f64));
        let complete_self = DMatrix::from_fn(n, n, |_, _| 1.0);
        cases.push((complete_self, 1.5, 0.75, n as f64));
    }
    run_check("epidemic_solver_closed_forms", cases.len(), |t| {
        let (a, delta, beta, degree) = &cases[t];
        let expected = 1.0 - delta / (beta * degree);
        let p = homogeneous_virus(a, *delta, *beta);
        let x = solve_epidemic(&p, &fp).map_err(|e| e.to_string())?;
        let dev = (0..p.n())
            .map(|i| (x[i] - expected).abs())
            .fold(0.0, f64::max);
        if dev >= 1e-10 {
            return Err(format!("closed form deviation {dev:.3e}"));
        }
        // Spectral identity at the homogeneous equilibrium.
        let shrunk = DMatrix::from_fn(p.n(), p.n(), |i, j| (1.0 - x[i]) * a[(i, j)]);
        let s = spectral_abscissa(&shrunk).map_err(|e| e.to_string())?;
        if (s - delta / beta).abs() >= 1e-8 {
            return Err(format!("s((I−X̃)A) = {s} but δ/β = {}", delta / beta));
        }
        Ok(())
    })
}

fn check_survival_of_the_fitter(cfg: &SuiteConfig) -> CheckResult {
    let mut rng = seeded(cfg, 7);
    let fp = FixedPointConfig::default();
    run_check("fitter_virus_survives", cfg.fitter_trials, |_| {
        let n = rng.random_range(2..=5);
        let m = random_fitter_instance(&mut rng, n);
        let summary = enumerate_equilibria(&m, &fp).map_err(|e| e.to_string())?;
        if summary.reports.len() != 3 {
            return Err(format!("{} equilibria, expected 3", summary.reports.len()));
        }
        for r in &summary.reports {
            let expected = match r.kind {
                EquilibriumKind::Virus2Epidemic => StabilityVerdict::LocallyStable,
                _ => StabilityVerdict::Unstable,
            };
            if r.verdict != expected {
                return Err(format!("{:?} verdict {:?}", r.kind, r.verdict));
            }
        }
        let x2 = summary
            .reports
            .iter()
            .find(|r| r.kind == EquilibriumKind::Virus2Epidemic)
            .unwrap()
            .point
            .clone();
        let s0 = random_interior_state(&mut rng, n);
        let traj = simulate(&m, &s0, &IntegratorConfig::default()).map_err(|e| e.to_string())?;
        let dev = (traj.terminal().x1() - x2.x1())
            .amax()
            .max((traj.terminal().x2() - x2.x2()).amax());
        if dev >= 1e-6 {
            return Err(format!("terminal off (0, x̃²) by {dev:.3e}"));
        }
        Ok(())
    })
}

fn check_coexistence(cfg: &SuiteConfig) -> CheckResult {
    let mut rng = seeded(cfg, 8);
    let fp = FixedPointConfig::default();
    run_check(
        "coexistence_line_parallelism",
        cfg.coexistence_trials,
        |t| {
            let n = rng.random_range(2..=4);
            let identical = t % 2 == 0;
            let m = random_equal_ratio_instance(&mut rng, n, identical);
            let ics = vec![
                SystemState::new(
                    DVector::from_element(n, 0.35),
                    DVector::from_element(n, 0.05),
                )
                .unwrap(),
                SystemState::new(
                    DVector::from_element(n, 0.05),
                    DVector::from_element(n, 0.35),
                )
                .unwrap(),
            ];
            let points = coexistence_continuum(&m, &ics, &IntegratorConfig::default(), &fp)
                .map_err(|e| e.to_string())?;
            if identical && (points[0].alpha - points[1].alpha).abs() <= 0.1 {
                return Err(format!(
                    "α values {} and {} do not separate",
                    points[0].alpha, points[1].alpha
                ));
            }
            for pt in &points {
                // Remark-grade check: the Jacobian annihilates (x̃¹, −x̃¹).
                let j = jacobian(&m, &pt.point);
                let u = DVector::from_fn(2 * n, |i, _| {
                    if i < n {
                        pt.point.x1()[i]
                    } else {
                        -pt.point.x1()[i - n]
                    }
                });
                let res = (&j * &u).amax() / u.amax();
                if res >= 1e-6 {
                    return Err(format!("J(x̃¹,−x̃¹) residual {res:.3e}"));
                }
            }
            Ok(())
        },
    )
}

fn check_sensitivity(cfg: &SuiteConfig) -> CheckResult {
    let mut rng = seeded(cfg, 9);
    let fp = FixedPointConfig::default();
    run_check(
        "sensitivity_matches_fd_and_signs",
        cfg.sensitivity_trials,
        |_| {
            let n = rng.random_range(2..=6);
            let p = random_supercritical_virus(&mut rng, n);
            let x_star = solve_epidemic(&p, &fp).map_err(|e| e.to_string())?;

            // Central-difference oracle on one healing rate.
            let h = 1e-6;
            let i = rng.random_range(0..n);
            let pert = Perturbation::delta_step(n, i, h);
            let analytic = sensitivity_solve(&p, &x_star, &pert)
                .map_err(|e| e.to_string())?
                .d_x;
            let bump = |sign: f64| -> std::result::Result<DVector<f64>, String> {
                let mut delta = p.delta().clone();
                delta[i] += sign * h;
                let q = VirusParams::new(delta, p.b().clone()).map_err(|e| e.to_string())?;
                solve_epidemic(&q, &fp).map_err(|e| e.to_string())
            };
            let fd = (bump(1.0)? - bump(-1.0)?) / 2.0;
            let rel = (&analytic - &fd).amax() / fd.amax();
            if rel >= 1e-3 {
                return Err(format!("finite-difference disagreement {rel:.3e}"));
            }

            let report = monotonicity_report(&p, &x_star, 1e-4, &fp).map_err(|e| e.to_string())?;
            if !report.all_consistent {
                let bad = report.rows.iter().find(|r| !r.consistent).unwrap();
                return Err(format!(
                    "sign violation at {} ({:?}/{:?})",
                    bad.parameter, bad.verdict, bad.fd_verdict
                ));
            }
            Ok(())
        },
    )
}

fn check_feedback(cfg: &SuiteConfig) -> CheckResult {
    let mut rng = seeded(cfg, 10);
    let fp = FixedPointConfig::default();
    run_check("proportional_feedback_repeller", cfg.feedback_trials, |t| {
        let n = rng.random_range(2..=5);
        let p = random_supercritical_virus(&mut rng, n);
        let k = DVector::from_fn(n, |_, _| rng.random_range(0.3..2.0));
        let report = repeller_experiment(
            &p,
            &k,
            &[1e-6, 1e-4, 1e-2],
            cfg.seed.wrapping_add(t as u64),
            &IntegratorConfig::default(),
            &fp,
        )
        .map_err(|e| e.to_string())?;
        if report.rho <= 1.0 {
            return Err(format!("ρ(I+K⁻¹B) = {}", report.rho));
        }
        if !report.all_converged_to_epidemic {
            let bad = report
                .runs
                .iter()
                .find(|r| !r.converged_to_epidemic)
                .unwrap();
            return Err(format!(
                "run (ε={}, dir {}) missed x* by {:.3e}",
                bad.epsilon, bad.direction, bad.distance_to_epidemic
            ));
        }
        if !report.all_escaped {
            return Err("a perturbation was not pushed away from the healthy state".into());
        }
        if report.baseline.s_value.abs() > 1e-9 {
            return Err(format!("baseline abscissa {}", report.baseline.s_value));
        }
        if !report.baseline.reached_healthy {
            return Err(format!(
                "baseline terminal norm {:.3e}",
                report.baseline.terminal_norm
            ));
        }
        Ok(())
    })
}

fn check_domain_invariance(cfg: &SuiteConfig) -> CheckResult {
    let mut rng = seeded(cfg, 11);
    run_check(
        "invariant_set_violations_stay_tiny",
        cfg.invariance_trials,
        |t| {
            let n = rng.random_range(2..=5);
            let v1 = if t % 2 == 0 {
                random_supercritical_virus(&mut rng, n)
            } else {
                random_subcritical_virus(&mut rng, n)
            };
            let v2 = random_supercritical_virus(&mut rng, n);
            let m = BiVirusModel::new(v1, v2).map_err(|e| e.to_string())?;
            let s0 = random_interior_state(&mut rng, n);
            let traj = simulate(&m, &s0, &tight_integrator()).map_err(|e| e.to_string())?;
            if traj.max_projection_violation >= 1e-9 {
                return Err(format!(
                    "pre-projection violation {:.3e}",
                    traj.max_projection_violation
                ));
            }
            Ok(())
        },
    )
}

fn check_positivity(cfg: &SuiteConfig) -> CheckResult {
    let mut rng = seeded(cfg, 12);
    run_check(
        "boundary_states_become_positive",
        cfg.positivity_trials,
        |_| {
            let n = rng.random_range(2..=6);
            let p = random_supercritical_virus(&mut rng, n);
            let z0 = random_boundary_vector(&mut rng, n);
            let tau = positivity_time(&p, &z0, &IntegratorConfig::default())
                .map_err(|e| e.to_string())?;
            if !tau.is_finite() {
                return Err("no finite positivity time".into());
            }
            Ok(())
        },
    )
}

fn check_lyapunov(cfg: &SuiteConfig) -> CheckResult {
    let mut rng = seeded(cfg, 13);
    let fp = FixedPointConfig::default();
    run_check("lyapunov_trace_decreases", cfg.lyapunov_trials, |_| {
        let n = rng.random_range(2..=5);
        let p = random_supercritical_virus(&mut rng, n);
        let x_star = solve_epidemic(&p, &fp).map_err(|e| e.to_string())?;
        let z0 = DVector::from_fn(n, |_, _| rng.random_range(0.05..0.95));
        let trace =
            lyapunov_trace(&p, &z0, &x_star, &tight_integrator()).map_err(|e| e.to_string())?;
        for w in trace.values.windows(2) {
            // Strict decrease while numerically distinct from x*.
            if w[0] > 1e-9 && w[1] >= w[0] + 1e-12 {
                return Err(format!("V increased: {} -> {}", w[0], w[1]));
            }
        }
        Ok(())
    })
}

/// Runs every property; when a model is supplied its validation is the
/// first check, so a deliberately broken configuration fails the suite.
/// An invalid model fails fast: the random-instance checks do not depend
/// on it and are skipped.
pub fn run_property_suite(model: Option<&BiVirusModel>, cfg: &SuiteConfig) -> SuiteReport {
    let mut checks = Vec::new();
    if let Some(m) = model {
        let report = validate(m);
        let failed: Vec<&str> = report
            .checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.as_str())
            .collect();
        let mut detail = if failed.is_empty() {
            format!(
                "all conditions hold; profile {:?}",
                profile_name(&report.profile)
            )
        } else {
            format!("failed conditions: {}", failed.join(", "))
        };
        for w in &report.warnings {
            detail.push_str("; warning: ");
            detail.push_str(w);
        }
        let passed = report.passed();
        checks.push(CheckResult {
            name: "model_validation".into(),
            passed,
            detail,
        });
        if !passed {
            return SuiteReport {
                seed: cfg.seed,
                checks,
            };
        }
        if let Ok(r) = crate::equilibria::regime_report(m) {
            checks.push(CheckResult {
                name: "model_regime".into(),
                passed: true,
                detail: format!("label {:?}, s1 = {:.6e}, s2 = {:.6e}", r.label, r.s1, r.s2),
            });
        }
    }
    checks.push(check_trichotomy(cfg));
    checks.push(check_sign_pattern(cfg));
    checks.push(check_negative_inverse(cfg));
    checks.push(check_perron(cfg));
    checks.push(check_healthy_convergence(cfg));
    checks.push(check_epidemic_solver(cfg));
    checks.push(check_solver_closed_forms(cfg));
    checks.push(check_survival_of_the_fitter(cfg));
    checks.push(check_coexistence(cfg));
    checks.push(check_sensitivity(cfg));
    checks.push(check_feedback(cfg));
    checks.push(check_domain_invariance(cfg));
    checks.push(check_positivity(cfg));
    checks.push(check_lyapunov(cfg));
    SuiteReport {
        seed: cfg.seed,
        checks,
    }
}

fn profile_name(p: &crate::model::HomogeneityProfile) -> &'static str {
    match p {
        crate::model::HomogeneityProfile::General => "General",
        crate::model::HomogeneityProfile::HomogeneousSameGraph { .. } => "HomogeneousSameGraph",
        crate::model::HomogeneityProfile::IdenticalParams => "IdenticalParams",
    }
}
