//! Continuous-time competing-virus (bi-virus) SIS dynamics over directed
//! contact graphs.
//!
//! The crate covers the full analysis pipeline for two viruses spreading
//! on strongly connected directed graphs with group-level healing rates
//! δᵢ and infection rates βᵢⱼ:
//!
//! - [`netgraph`] — contact graphs and the strong-connectivity
//!   (irreducibility) check.
//! - [`spectral`] — Metzler/nonnegative matrix machinery: spectral
//!   abscissa and radius, Perron pairs, the threshold trichotomy,
//!   diagonal Lyapunov certificates, sign-pattern and negative-inverse
//!   checks.
//! - [`model`] — parameter containers, validation, vector fields, and
//!   the 2n×2n Jacobian.
//! - [`dynamics`] — trajectory integration with invariant-set
//!   enforcement, positivity times, and Lyapunov traces.
//! - [`equilibria`] — regime classification, the constructive epidemic
//!   state solver, Jacobian stability verdicts, and coexistence-line
//!   analysis.
//! - [`sensitivity`] — first-order response of the epidemic state to
//!   rate perturbations, with monotonicity verdicts.
//! - [`control`] — proportional-feedback healing δᵢ(t) = kᵢxᵢ(t) and the
//!   repeller experiments showing the healthy state is unreachable.
//! - [`verify`] — seeded random instance generators and the runtime
//!   property suite.
//!
//! # Example
//!
//! Classify a two-group model and solve the surviving virus's epidemic
//! state:
//!
//! ```
//! use bivirus_core::{
//!     classify, solve_epidemic, BiVirusModel, FixedPointConfig, RegimeLabel, VirusParams,
//! };
//! use nalgebra::{DMatrix, DVector};
//!
//! // Two groups infecting each other at rate 1; virus 1 heals at 0.5
//! // (supercritical), virus 2 at 1.5 (subcritical).
//! let contact = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
//! let virus1 = VirusParams::new(DVector::from_element(2, 0.5), contact.clone())?;
//! let virus2 = VirusParams::new(DVector::from_element(2, 1.5), contact)?;
//! let model = BiVirusModel::new(virus1, virus2)?;
//!
//! assert_eq!(classify(&model)?, RegimeLabel::Virus1Only);
//! let x_star = solve_epidemic(model.virus1(), &FixedPointConfig::default())?;
//! assert!((x_star[0] - 0.5).abs() < 1e-10);
//! # Ok::<(), bivirus_core::Error>(())
//! ```

pub mod control;
pub mod dynamics;
pub mod equilibria;
pub mod error;
pub mod model;
pub mod netgraph;
pub mod sensitivity;
pub mod spectral;
pub mod verify;

pub use control::{
    bivirus_feedback_simulate, closed_loop_transform, repeller_experiment, FeedbackGains,
    RepellerReport,
};
pub use dynamics::{
    lyapunov_trace, positivity_time, simulate, simulate_single, IntegratorConfig, Method,
    SingleTrajectory, TerminalReason, TrajectoryRecord,
};
pub use equilibria::{
    classify, coexistence_continuum, enumerate_equilibria, regime_report, solve_epidemic,
    stability_verdict, EquilibriaSummary, EquilibriumKind, EquilibriumReport, FixedPointConfig,
    RegimeLabel, StabilityVerdict,
};
pub use error::{Error, ErrorCategory, Result};
pub use model::{
    bivirus_field, jacobian, single_virus_field, validate, BiVirusModel, HomogeneityProfile,
    SystemState, ValidationReport, VirusParams,
};
pub use netgraph::{check_irreducible, ContactGraph, GraphArc};
pub use sensitivity::{
    monotonicity_report, sensitivity_solve, MonotonicityReport, Perturbation, SensitivityResult,
};
pub use spectral::{
    diagonal_lyapunov, negative_inverse_check, perron_pair, sign_pattern_violation,
    spectral_abscissa, spectral_radius, threshold_trichotomy, MetzlerMatrix, PerronPair,
    ThresholdVerdict,
};
