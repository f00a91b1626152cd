//! The six experiment commands. Each consumes a parsed experiment,
//! writes its report files under the output directory, prints a short
//! summary, and maps failures onto the documented exit codes.

use std::path::Path;

use bivirus_core::control::{bivirus_feedback_simulate, repeller_experiment, FeedbackGains};
use bivirus_core::dynamics::simulate;
use bivirus_core::equilibria::{
    coexistence_continuum, enumerate_equilibria_with, regime_report_with, solve_epidemic,
    CoexistenceBasis,
};
use bivirus_core::model::{validate, HomogeneityProfile};
use bivirus_core::sensitivity::{monotonicity_report, sensitivity_solve, Perturbation};
use bivirus_core::verify::run_property_suite;

use crate::config::Experiment;
use crate::error::CliError;
use crate::report::*;

fn validation_json(exp: &Experiment) -> ValidationJson {
    let report = validate(&exp.model);
    ValidationJson {
        passed: report.passed(),
        profile: match report.profile {
            HomogeneityProfile::General => "General".into(),
            HomogeneityProfile::HomogeneousSameGraph { .. } => "HomogeneousSameGraph".into(),
            HomogeneityProfile::IdenticalParams => "IdenticalParams".into(),
        },
        checks: report
            .checks
            .iter()
            .map(|c| CheckJson {
                name: c.name.clone(),
                passed: c.passed,
                detail: c.detail.clone().unwrap_or_default(),
            })
            .collect(),
        warnings: report.warnings.clone(),
    }
}

fn regime_json(exp: &Experiment) -> Result<RegimeJson, CliError> {
    let r = regime_report_with(&exp.model, exp.ratio_ordering)?;
    let (label, fitness) = regime_strings(&r.label);
    Ok(RegimeJson {
        label,
        fitness,
        s1: r.s1,
        s2: r.s2,
        rho1: r.rho1,
        rho2: r.rho2,
    })
}

pub fn cmd_classify(exp: &Experiment, out: &Path) -> Result<(), CliError> {
    let validation = validation_json(exp);
    if !validation.passed {
        let failed: Vec<&str> = validation
            .checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.as_str())
            .collect();
        let msg = format!("model validation failed: {}", failed.join(", "));
        let report = ClassifyReport {
            generated: timestamp(),
            validation,
            regime: None,
        };
        let path = write_json(out, "classify.json", &report)?;
        println!("validation failed; report: {}", path.display());
        return Err(CliError::Core(bivirus_core::Error::Precondition(msg)));
    }
    let regime = regime_json(exp)?;
    println!(
        "regime: {}{} (s1 = {:.6e}, s2 = {:.6e})",
        regime.label,
        regime
            .fitness
            .as_ref()
            .map(|f| format!("/{f}"))
            .unwrap_or_default(),
        regime.s1,
        regime.s2
    );
    let report = ClassifyReport {
        generated: timestamp(),
        validation,
        regime: Some(regime),
    };
    let path = write_json(out, "classify.json", &report)?;
    println!("report: {}", path.display());
    Ok(())
}

fn run_and_record(
    out: &Path,
    prefix: &str,
    index: usize,
    traj: bivirus_core::dynamics::TrajectoryRecord,
) -> Result<SimulationRunJson, CliError> {
    let file = format!("{prefix}_{index:03}.csv");
    write_trajectory_csv(out, &file, &traj)?;
    if traj.terminal_reason == bivirus_core::dynamics::TerminalReason::DomainError {
        log::warn!("run {index} terminated with a domain error; inspect {file}");
    }
    Ok(SimulationRunJson {
        index,
        terminal_reason: reason_string(traj.terminal_reason),
        terminal_time: traj.terminal_time(),
        terminal: StateJson::from(traj.terminal()),
        max_projection_violation: traj.max_projection_violation,
        records: traj.times.len(),
        trajectory_file: file,
    })
}

pub fn cmd_simulate(exp: &Experiment, out: &Path) -> Result<(), CliError> {
    if exp.initial_states.is_empty() {
        return Err(CliError::Parse(
            "simulate needs at least one entry in initial_states".into(),
        ));
    }
    let mut runs = Vec::new();
    for (i, s0) in exp.initial_states.iter().enumerate() {
        let traj = simulate(&exp.model, s0, &exp.integrator)?;
        let run = run_and_record(out, "trajectory", i, traj)?;
        println!(
            "run {i}: {} at t = {:.6e} ({} records) -> {}",
            run.terminal_reason, run.terminal_time, run.records, run.trajectory_file
        );
        runs.push(run);
    }
    let report = SimulateReport {
        generated: timestamp(),
        runs,
    };
    let path = write_json(out, "simulate.json", &report)?;
    println!("report: {}", path.display());
    Ok(())
}

pub fn cmd_equilibrium(exp: &Experiment, out: &Path) -> Result<(), CliError> {
    let summary = enumerate_equilibria_with(&exp.model, &exp.fixed_point, exp.ratio_ordering)?;
    let equilibria: Vec<EquilibriumJson> = summary
        .reports
        .iter()
        .map(|r| EquilibriumJson {
            kind: r.kind,
            point: StateJson::from(&r.point),
            residual: r.residual,
            jacobian_abscissa: r.jacobian_spectral_abscissa,
            verdict: r.verdict,
        })
        .collect();

    let continuum = match &summary.continuum {
        Some(line) => {
            let points = if exp.initial_states.is_empty() {
                Vec::new()
            } else {
                coexistence_continuum(
                    &exp.model,
                    &exp.initial_states,
                    &exp.integrator,
                    &exp.fixed_point,
                )?
                .iter()
                .map(|p| ContinuumPointJson {
                    alpha: p.alpha,
                    point: StateJson::from(&p.point),
                    field_residual: p.field_residual,
                    max_parallel_deviation: p.max_parallel_deviation,
                    sum_deviation: p.sum_deviation,
                })
                .collect()
            };
            let (basis, ratio) = match &line.basis {
                CoexistenceBasis::HomogeneousEqualRatio { ratio } => {
                    ("HomogeneousEqualRatio".to_string(), Some(*ratio))
                }
                CoexistenceBasis::IdenticalParams => ("IdenticalParams".to_string(), None),
            };
            Some(ContinuumJson {
                basis,
                ratio,
                sum_state: line.sum_state.as_ref().map(|v| v.iter().copied().collect()),
                points,
            })
        }
        None => None,
    };

    for e in &equilibria {
        println!(
            "{:?}: verdict {:?}, jacobian abscissa {:.6e}, residual {:.3e}",
            e.kind, e.verdict, e.jacobian_abscissa, e.residual
        );
    }
    if let Some(c) = &continuum {
        println!(
            "coexistence line ({}) with {} simulated points",
            c.basis,
            c.points.len()
        );
    }
    let report = EquilibriumListReport {
        generated: timestamp(),
        regime: regime_json(exp)?,
        equilibria,
        continuum,
    };
    let path = write_json(out, "equilibrium.json", &report)?;
    println!("report: {}", path.display());
    Ok(())
}

pub fn cmd_sensitivity(exp: &Experiment, out: &Path) -> Result<(), CliError> {
    // The epidemic state of the surviving virus is independent of the
    // other virus's parameters; the analysis targets virus 1.
    let p = exp.model.virus1();
    let x_star = solve_epidemic(p, &exp.fixed_point)?;
    let diagnostics = sensitivity_solve(p, &x_star, &Perturbation::zero(p.n()))?;
    let table = monotonicity_report(p, &x_star, exp.sensitivity_step, &exp.fixed_point)?;

    let csv = write_sensitivity_csv(out, "sensitivity.csv", &table, p.n())?;
    let report = SensitivityReport {
        generated: timestamp(),
        virus: "virus1".into(),
        x_star: x_star.iter().copied().collect(),
        system_matrix_abscissa: diagnostics.system_matrix_abscissa,
        condition_estimate: diagnostics.condition_estimate,
        step: table.step,
        all_consistent: table.all_consistent,
        rows: table
            .rows
            .iter()
            .map(|r| SensitivityRowJson {
                parameter: r.parameter.to_string(),
                d_x: r.d_x.iter().copied().collect(),
                verdict: format!("{:?}", r.verdict),
                fd_verdict: format!("{:?}", r.fd_verdict),
                consistent: r.consistent,
            })
            .collect(),
        table_file: csv
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default(),
    };
    let path = write_json(out, "sensitivity.json", &report)?;
    println!(
        "{} parameters perturbed by {:.1e}; all signs consistent: {}",
        report.rows.len(),
        report.step,
        report.all_consistent
    );
    println!("report: {}", path.display());
    if !report.all_consistent {
        return Err(CliError::SuiteFailure(
            "monotonicity sign violation; see sensitivity.json for the counterexample rows".into(),
        ));
    }
    Ok(())
}

pub fn cmd_control(exp: &Experiment, out: &Path) -> Result<(), CliError> {
    let plan = exp.control.as_ref().ok_or_else(|| {
        CliError::Parse("control command needs a 'control' section (k1, k2, epsilons)".into())
    })?;
    let report = repeller_experiment(
        exp.model.virus1(),
        &plan.k1,
        &plan.epsilons,
        exp.seed,
        &exp.integrator,
        &exp.fixed_point,
    )?;

    let gains = FeedbackGains::new(plan.k1.clone(), plan.k2.clone())?;
    let mut feedback_runs = Vec::new();
    for (i, s0) in exp.initial_states.iter().enumerate() {
        let traj = bivirus_feedback_simulate(&exp.model, &gains, s0, &exp.integrator)?;
        feedback_runs.push(run_and_record(out, "feedback", i, traj)?);
    }

    let json = ControlReport {
        generated: timestamp(),
        rho: report.rho,
        x_star: report.x_star.iter().copied().collect(),
        all_converged_to_epidemic: report.all_converged_to_epidemic,
        all_escaped: report.all_escaped,
        baseline: BaselineJson {
            s_value: report.baseline.s_value,
            terminal_norm: report.baseline.terminal_norm,
            reached_healthy: report.baseline.reached_healthy,
        },
        runs: report
            .runs
            .iter()
            .map(|r| ControlRunJson {
                epsilon: r.epsilon,
                direction: r.direction,
                terminal: r.terminal.iter().copied().collect(),
                distance_to_epidemic: r.distance_to_epidemic,
                converged_to_epidemic: r.converged_to_epidemic,
                escaped: r.escaped,
            })
            .collect(),
        feedback_runs,
    };
    println!(
        "ρ(I+K⁻¹B) = {:.6} > 1; {} perturbed runs, all repelled to x*: {}",
        json.rho,
        json.runs.len(),
        json.all_converged_to_epidemic && json.all_escaped
    );
    println!(
        "constant-healing baseline: s(−D+B) = {:.3e}, terminal norm {:.3e}",
        json.baseline.s_value, json.baseline.terminal_norm
    );
    let path = write_json(out, "control.json", &json)?;
    println!("report: {}", path.display());
    Ok(())
}

pub fn cmd_verify(exp: &Experiment, out: &Path) -> Result<(), CliError> {
    let report = run_property_suite(Some(&exp.model), &exp.suite);
    for c in &report.checks {
        println!(
            "{} {} — {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
    }
    let json = VerifyReport {
        generated: timestamp(),
        seed: report.seed,
        passed: report.passed(),
        checks: report
            .checks
            .iter()
            .map(|c| CheckJson {
                name: c.name.clone(),
                passed: c.passed,
                detail: c.detail.clone(),
            })
            .collect(),
    };
    let path = write_json(out, "verify.json", &json)?;
    println!("report: {}", path.display());
    if !json.passed {
        let model_broken = json
            .checks
            .iter()
            .any(|c| c.name == "model_validation" && !c.passed);
        return Err(if model_broken {
            CliError::Core(bivirus_core::Error::Precondition(
                "model validation failed; see verify.json".into(),
            ))
        } else {
            CliError::SuiteFailure(
                "a property check failed; see verify.json for the counterexample".into(),
            )
        });
    }
    Ok(())
}
