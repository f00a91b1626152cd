//! Parameter containers, validation, and the vector fields of the
//! competing-virus SIS model over a directed contact graph.
//!
//! The state of the bi-virus system is a pair (x¹, x²) of per-group
//! infection probabilities constrained to
//! 𝒟 = {x¹ ≥ 0, x² ≥ 0, x¹ + x² ≤ 1}, which the exact flow preserves.
//! Each virus has healing rates δᵢ and an infection matrix B with entry
//! (i, j) the rate βᵢⱼ at which group j infects group i.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::netgraph::check_irreducible;

/// A state may stray this far outside the invariant set before being
/// rejected; violations within the tolerance are projected back. Keeps
/// integrator roundoff from aborting runs.
pub const DOMAIN_TOL: f64 = 1e-9;

/// Healing rates δ and infection matrix B for one virus.
#[derive(Debug, Clone, PartialEq)]
pub struct VirusParams {
    delta: DVector<f64>,
    b: DMatrix<f64>,
}

impl VirusParams {
    /// Shape-checks only; semantic conditions (nonnegativity,
    /// irreducibility) are reported by [`validate`].
    pub fn new(delta: DVector<f64>, b: DMatrix<f64>) -> Result<Self> {
        if b.nrows() != b.ncols() {
            return Err(Error::Shape(format!(
                "infection matrix must be square, got {}x{}",
                b.nrows(),
                b.ncols()
            )));
        }
        if delta.len() != b.nrows() {
            return Err(Error::Shape(format!(
                "healing vector has length {}, infection matrix is {}x{}",
                delta.len(),
                b.nrows(),
                b.ncols()
            )));
        }
        if delta.is_empty() {
            return Err(Error::Shape("model needs at least one group".into()));
        }
        Ok(Self { delta, b })
    }

    pub fn n(&self) -> usize {
        self.delta.len()
    }

    pub fn delta(&self) -> &DVector<f64> {
        &self.delta
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    /// −D + B, the linearization of the single-virus field at the healthy
    /// state; the sign of its abscissa decides epidemic persistence.
    pub fn threshold_matrix(&self) -> DMatrix<f64> {
        let mut m = self.b.clone();
        for i in 0..self.n() {
            m[(i, i)] -= self.delta[i];
        }
        m
    }
}

/// Two viruses competing on one node set.
#[derive(Debug, Clone, PartialEq)]
pub struct BiVirusModel {
    virus1: VirusParams,
    virus2: VirusParams,
}

impl BiVirusModel {
    pub fn new(virus1: VirusParams, virus2: VirusParams) -> Result<Self> {
        if virus1.n() != virus2.n() {
            return Err(Error::Shape(format!(
                "virus 1 has {} groups, virus 2 has {}",
                virus1.n(),
                virus2.n()
            )));
        }
        Ok(Self { virus1, virus2 })
    }

    pub fn n(&self) -> usize {
        self.virus1.n()
    }

    pub fn virus1(&self) -> &VirusParams {
        &self.virus1
    }

    pub fn virus2(&self) -> &VirusParams {
        &self.virus2
    }
}

/// Pair (x¹, x²) constrained to the invariant set 𝒟. Construction
/// projects violations within [`DOMAIN_TOL`] (clamping to the box, then
/// proportionally rescaling any pair with x¹ᵢ + x²ᵢ > 1) and rejects
/// anything farther out.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    x1: DVector<f64>,
    x2: DVector<f64>,
}

impl SystemState {
    pub fn new(x1: DVector<f64>, x2: DVector<f64>) -> Result<Self> {
        if x1.len() != x2.len() {
            return Err(Error::Shape(format!(
                "state halves have lengths {} and {}",
                x1.len(),
                x2.len()
            )));
        }
        let mut s = Self { x1, x2 };
        let violation = project_into_domain(&mut s.x1, &mut s.x2);
        if violation > DOMAIN_TOL {
            return Err(Error::Domain(format!(
                "state violates the invariant set by {violation:.3e} (tolerance {DOMAIN_TOL:.0e})"
            )));
        }
        Ok(s)
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            x1: DVector::zeros(n),
            x2: DVector::zeros(n),
        }
    }

    pub fn n(&self) -> usize {
        self.x1.len()
    }

    pub fn x1(&self) -> &DVector<f64> {
        &self.x1
    }

    pub fn x2(&self) -> &DVector<f64> {
        &self.x2
    }

    /// Concatenation (x¹; x²) used by the integrator.
    pub fn stacked(&self) -> DVector<f64> {
        let n = self.n();
        DVector::from_fn(
            2 * n,
            |i, _| if i < n { self.x1[i] } else { self.x2[i - n] },
        )
    }

    pub fn from_stacked(v: &DVector<f64>) -> Result<Self> {
        if v.len() % 2 != 0 {
            return Err(Error::Shape("stacked state must have even length".into()));
        }
        let n = v.len() / 2;
        Self::new(v.rows(0, n).into_owned(), v.rows(n, n).into_owned())
    }
}

/// Clamps both halves to [0, 1] and rescales pairs whose sum exceeds one;
/// returns the largest violation seen before projection. NaN is reported
/// as an infinite violation.
pub(crate) fn project_into_domain(x1: &mut DVector<f64>, x2: &mut DVector<f64>) -> f64 {
    let mut violation: f64 = 0.0;
    for x in [&mut *x1, &mut *x2] {
        for v in x.iter_mut() {
            if v.is_nan() {
                return f64::INFINITY;
            }
            if *v < 0.0 {
                violation = violation.max(-*v);
                *v = 0.0;
            } else if *v > 1.0 {
                violation = violation.max(*v - 1.0);
                *v = 1.0;
            }
        }
    }
    for i in 0..x1.len() {
        let sum = x1[i] + x2[i];
        if sum > 1.0 {
            violation = violation.max(sum - 1.0);
            x1[i] /= sum;
            x2[i] /= sum;
        }
    }
    violation
}

/// Clamps a single-virus state to [0, 1]ⁿ, returning the pre-projection
/// violation.
pub(crate) fn project_into_box(z: &mut DVector<f64>) -> f64 {
    let mut violation: f64 = 0.0;
    for v in z.iter_mut() {
        if v.is_nan() {
            return f64::INFINITY;
        }
        if *v < 0.0 {
            violation = violation.max(-*v);
            *v = 0.0;
        } else if *v > 1.0 {
            violation = violation.max(*v - 1.0);
            *v = 1.0;
        }
    }
    violation
}

/// Which of the special parameter regimes a model falls into. The
/// special-case results are stated for exact parameter ties, so detection
/// uses exact equality of the stored rates.
#[derive(Debug, Clone, PartialEq)]
pub enum HomogeneityProfile {
    General,
    /// Both viruses homogeneous (one δ, one β each) on one shared graph.
    HomogeneousSameGraph {
        delta1: f64,
        beta1: f64,
        delta2: f64,
        beta2: f64,
        /// 0/1 adjacency of the shared spreading graph.
        adjacency: DMatrix<f64>,
    },
    /// D¹ = D² and B¹ = B² with strictly positive healing rates.
    IdenticalParams,
}

/// One pass/fail condition of model validation.
#[derive(Debug, Clone)]
pub struct ValidationCheck {
    pub name: String,
    pub passed: bool,
    pub detail: Option<String>,
}

/// Outcome of validating a model against the standing assumptions:
/// per-condition results, the detected homogeneity profile, and warnings
/// (zero healing rates make sensitivity analysis inapplicable).
#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub checks: Vec<ValidationCheck>,
    pub profile: HomogeneityProfile,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn check_virus(prefix: &str, p: &VirusParams, checks: &mut Vec<ValidationCheck>) {
    let delta_ok = p.delta().iter().all(|&v| v.is_finite() && v >= 0.0);
    checks.push(ValidationCheck {
        name: format!("{prefix}.delta_nonnegative"),
        passed: delta_ok,
        detail: (!delta_ok).then(|| "healing rates must be finite and ≥ 0".into()),
    });
    let b_ok = p.b().iter().all(|&v| v.is_finite() && v >= 0.0);
    checks.push(ValidationCheck {
        name: format!("{prefix}.b_nonnegative"),
        passed: b_ok,
        detail: (!b_ok).then(|| "infection rates must be finite and ≥ 0".into()),
    });
    let (irr_ok, detail) = if b_ok {
        match check_irreducible(p.b()) {
            Ok(true) => (true, None),
            Ok(false) => (
                false,
                Some("spreading graph is not strongly connected".into()),
            ),
            Err(e) => (false, Some(e.to_string())),
        }
    } else {
        (false, Some("not evaluated: nonnegativity failed".into()))
    };
    checks.push(ValidationCheck {
        name: format!("{prefix}.b_irreducible"),
        passed: irr_ok,
        detail,
    });
}

fn homogeneous_rates(p: &VirusParams) -> Option<(f64, f64, DMatrix<f64>)> {
    let delta = p.delta()[0];
    if delta <= 0.0 || p.delta().iter().any(|&v| v != delta) {
        return None;
    }
    let mut beta = None;
    for &v in p.b().iter() {
        if v > 0.0 {
            match beta {
                None => beta = Some(v),
                Some(b) if b != v => return None,
                Some(_) => {}
            }
        }
    }
    let beta = beta?;
    let n = p.n();
    let pattern = DMatrix::from_fn(n, n, |i, j| f64::from(u8::from(p.b()[(i, j)] > 0.0)));
    Some((delta, beta, pattern))
}

/// Hard-errors on semantic violations of the standing assumptions for
/// one virus; solvers call this before relying on irreducibility.
pub(crate) fn ensure_virus_valid(p: &VirusParams) -> Result<()> {
    if p.delta().iter().any(|&v| !v.is_finite() || v < 0.0) {
        return Err(Error::Precondition(
            "healing rates must be finite and nonnegative".into(),
        ));
    }
    if p.b().iter().any(|&v| !v.is_finite() || v < 0.0) {
        return Err(Error::Precondition(
            "infection rates must be finite and nonnegative".into(),
        ));
    }
    if !check_irreducible(p.b())? {
        return Err(Error::Precondition(
            "infection matrix must be irreducible".into(),
        ));
    }
    Ok(())
}

/// Detects the homogeneity profile. A model satisfying both special
/// regimes reports the homogeneous one, which is the stronger statement.
pub fn detect_profile(m: &BiVirusModel) -> HomogeneityProfile {
    if let (Some((d1, b1, pat1)), Some((d2, b2, pat2))) =
        (homogeneous_rates(m.virus1()), homogeneous_rates(m.virus2()))
    {
        if pat1 == pat2 {
            return HomogeneityProfile::HomogeneousSameGraph {
                delta1: d1,
                beta1: b1,
                delta2: d2,
                beta2: b2,
                adjacency: pat1,
            };
        }
    }
    if m.virus1().delta() == m.virus2().delta()
        && m.virus1().b() == m.virus2().b()
        && m.virus1().delta().iter().all(|&v| v > 0.0)
    {
        return HomogeneityProfile::IdenticalParams;
    }
    HomogeneityProfile::General
}

/// Checks nonnegativity, irreducibility, and dimension agreement for both
/// viruses and detects the homogeneity profile.
pub fn validate(m: &BiVirusModel) -> ValidationReport {
    let mut checks = Vec::new();
    check_virus("virus1", m.virus1(), &mut checks);
    check_virus("virus2", m.virus2(), &mut checks);
    // Construction already guarantees this; recorded so the report lists
    // every standing condition.
    checks.push(ValidationCheck {
        name: "dimension_agreement".into(),
        passed: m.virus1().n() == m.virus2().n(),
        detail: None,
    });
    let mut warnings = Vec::new();
    for (label, p) in [("virus1", m.virus1()), ("virus2", m.virus2())] {
        let zeros: Vec<usize> = (0..p.n()).filter(|&i| p.delta()[i] == 0.0).collect();
        if !zeros.is_empty() {
            warnings.push(format!(
                "{label} has zero healing rates at groups {zeros:?}; sensitivity analysis \
                 requires strictly positive healing rates"
            ));
        }
    }
    ValidationReport {
        checks,
        profile: detect_profile(m),
        warnings,
    }
}

/// Bi-virus field without domain checks; used by integrator stages and
/// finite-difference probes that may sit slightly outside 𝒟.
pub fn bivirus_field_raw(
    m: &BiVirusModel,
    x1: &DVector<f64>,
    x2: &DVector<f64>,
) -> (DVector<f64>, DVector<f64>) {
    let w1 = m.virus1().b() * x1;
    let w2 = m.virus2().b() * x2;
    let n = m.n();
    let dx1 = DVector::from_fn(n, |i, _| {
        -m.virus1().delta()[i] * x1[i] + (1.0 - x1[i] - x2[i]) * w1[i]
    });
    let dx2 = DVector::from_fn(n, |i, _| {
        -m.virus2().delta()[i] * x2[i] + (1.0 - x2[i] - x1[i]) * w2[i]
    });
    (dx1, dx2)
}

/// Time derivative (ẋ¹, ẋ²) of the bi-virus system at a state in 𝒟:
/// ẋᵏᵢ = −δᵏᵢxᵏᵢ + (1 − x¹ᵢ − x²ᵢ)·Σⱼ βᵏᵢⱼxᵏⱼ.
pub fn bivirus_field(m: &BiVirusModel, s: &SystemState) -> Result<(DVector<f64>, DVector<f64>)> {
    if s.n() != m.n() {
        return Err(Error::Shape(format!(
            "state has {} groups, model has {}",
            s.n(),
            m.n()
        )));
    }
    Ok(bivirus_field_raw(m, s.x1(), s.x2()))
}

/// Single-virus field without domain checks.
pub fn single_virus_field_raw(p: &VirusParams, z: &DVector<f64>) -> DVector<f64> {
    let w = p.b() * z;
    DVector::from_fn(p.n(), |i, _| -p.delta()[i] * z[i] + (1.0 - z[i]) * w[i])
}

/// Time derivative ż of the single-virus system at z ∈ [0, 1]ⁿ:
/// żᵢ = −δᵢzᵢ + (1 − zᵢ)·Σⱼ βᵢⱼzⱼ.
pub fn single_virus_field(p: &VirusParams, z: &DVector<f64>) -> Result<DVector<f64>> {
    if z.len() != p.n() {
        return Err(Error::Shape(format!(
            "state has {} groups, model has {}",
            z.len(),
            p.n()
        )));
    }
    if z.iter()
        .any(|&v| !(-DOMAIN_TOL..=1.0 + DOMAIN_TOL).contains(&v))
    {
        return Err(Error::Domain(format!(
            "state outside [0,1]^n beyond tolerance {DOMAIN_TOL:.0e}"
        )));
    }
    Ok(single_virus_field_raw(p, z))
}

/// The 2n×2n Jacobian of the bi-virus field at a state, in block form
///
/// ```text
/// [ (I − X¹ − X²)B¹ − D¹ − diag(B¹x¹)            −diag(B¹x¹)          ]
/// [          −diag(B²x²)            (I − X¹ − X²)B² − D² − diag(B²x²) ]
/// ```
pub fn jacobian(m: &BiVirusModel, s: &SystemState) -> DMatrix<f64> {
    let n = m.n();
    let w1 = m.virus1().b() * s.x1();
    let w2 = m.virus2().b() * s.x2();
    let mut j = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        let healthy = 1.0 - s.x1()[i] - s.x2()[i];
        for k in 0..n {
            j[(i, k)] = healthy * m.virus1().b()[(i, k)];
            j[(n + i, n + k)] = healthy * m.virus2().b()[(i, k)];
        }
        j[(i, i)] += -m.virus1().delta()[i] - w1[i];
        j[(i, n + i)] = -w1[i];
        j[(n + i, i)] = -w2[i];
        j[(n + i, n + i)] += -m.virus2().delta()[i] - w2[i];
    }
    j
}
