//! Metzler and nonnegative matrix machinery: spectral abscissa and radius,
//! Perron pairs by shifted power iteration, the spectral-threshold
//! trichotomy, diagonal Lyapunov certificates, and the sign-pattern and
//! negative-inverse checks.
//!
//! A Metzler matrix has nonnegative off-diagonal entries. For an
//! irreducible Metzler matrix M the abscissa s(M) is a simple eigenvalue
//! with strictly positive left and right eigenvectors, which is what makes
//! the shifted power iteration below sound: M + σI with
//! σ = 1 + max|Mᵢᵢ| is nonnegative, irreducible, and has positive
//! diagonal, hence primitive, and ρ(M + σI) = s(M) + σ.

use nalgebra::linalg::{Schur, SymmetricEigen};
use nalgebra::{Complex, DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netgraph::check_irreducible;

/// Half-width of the band around zero inside which a spectral abscissa is
/// reported as critical. Exact zeros are measure-zero in floating point;
/// the band makes the `Critical` verdict reachable.
pub const DEFAULT_EPS_CRIT: f64 = 1e-9;

/// ℓ∞ tolerance on successive power-method iterates.
const POWER_TOL: f64 = 1e-12;
/// Iteration cap for the power method.
const POWER_MAX_ITER: usize = 100_000;
/// Residual tolerance for accepting a computed Perron pair.
const PERRON_RESIDUAL_TOL: f64 = 1e-8;

/// Square real matrix with exactly nonnegative off-diagonal entries.
/// Carries the irreducibility certificate of its positive sparsity
/// pattern (self-arcs do not affect strong connectivity).
#[derive(Debug, Clone, PartialEq)]
pub struct MetzlerMatrix {
    entries: DMatrix<f64>,
    irreducible: bool,
}

impl MetzlerMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        let n = entries.nrows();
        if n != entries.ncols() {
            return Err(Error::Shape(format!(
                "Metzler matrix must be square, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        if n == 0 {
            return Err(Error::Shape("empty matrix".into()));
        }
        for i in 0..n {
            for j in 0..n {
                let v = entries[(i, j)];
                if !v.is_finite() {
                    return Err(Error::Precondition(format!(
                        "entry ({i}, {j}) = {v} is not finite"
                    )));
                }
                if i != j && v < 0.0 {
                    return Err(Error::Precondition(format!(
                        "off-diagonal entry ({i}, {j}) = {v} is negative"
                    )));
                }
            }
        }
        let pattern = DMatrix::from_fn(n, n, |i, j| f64::from(u8::from(entries[(i, j)] > 0.0)));
        let irreducible = check_irreducible(&pattern)?;
        Ok(Self {
            entries,
            irreducible,
        })
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn is_irreducible(&self) -> bool {
        self.irreducible
    }
}

/// Dominant eigenvalue of an irreducible Metzler matrix together with its
/// strictly positive, ℓ₁-normalized right and left eigenvectors.
#[derive(Debug, Clone)]
pub struct PerronPair {
    /// The spectral abscissa s(M), a simple real eigenvalue.
    pub value: f64,
    pub right: DVector<f64>,
    pub left: DVector<f64>,
}

/// Three-way classification of a spectral threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ThresholdVerdict {
    Below,
    Critical,
    Above,
}

fn ensure_square_finite(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::Shape(format!(
            "expected a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.is_empty() {
        return Err(Error::Shape("empty matrix".into()));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Precondition("matrix has non-finite entries".into()));
    }
    Ok(())
}

fn dense_eigenvalues(m: &DMatrix<f64>) -> Result<Vec<Complex<f64>>> {
    ensure_square_finite(m)?;
    let schur = Schur::try_new(m.clone(), f64::EPSILON, 100_000)
        .ok_or_else(|| Error::Numerical(format!("dense eigensolver failed to converge on\n{m}")))?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

/// Largest real part among the eigenvalues, by dense eigensolve.
pub fn spectral_abscissa(m: &DMatrix<f64>) -> Result<f64> {
    let eigs = dense_eigenvalues(m)?;
    Ok(eigs.iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max))
}

/// Largest eigenvalue modulus, by dense eigensolve.
pub fn spectral_radius(m: &DMatrix<f64>) -> Result<f64> {
    let eigs = dense_eigenvalues(m)?;
    Ok(eigs.iter().map(|l| l.norm()).fold(0.0, f64::max))
}

/// Power iteration for the Perron root of a primitive nonnegative matrix.
/// Iterates are kept strictly positive and ℓ₁-normalized; the eigenvalue
/// estimate is the ℓ₁ norm of the un-normalized product.
fn power_dominant(a: &DMatrix<f64>) -> Result<(f64, DVector<f64>)> {
    let n = a.nrows();
    let mut x = DVector::from_element(n, 1.0 / n as f64);
    for _ in 0..POWER_MAX_ITER {
        let y = a * &x;
        let lambda: f64 = y.sum();
        if !(lambda > 0.0) {
            return Err(Error::Numerical(format!(
                "power iteration collapsed (estimate {lambda}) on\n{a}"
            )));
        }
        let y = y / lambda;
        let diff = (&y - &x).amax();
        x = y;
        if diff < POWER_TOL {
            return Ok((lambda, x));
        }
    }
    Err(Error::Numerical(format!(
        "power iteration exceeded {POWER_MAX_ITER} iterations on\n{a}"
    )))
}

/// Dominant eigenvalue s(M) of an irreducible Metzler matrix with its
/// strictly positive right and left eigenvectors, each ℓ₁-normalized.
///
/// Shifts by σ = 1 + max|Mᵢᵢ| so the shifted matrix is primitive
/// nonnegative, power-iterates it and its transpose, and maps the Perron
/// root back via s(M) = ρ(M + σI) − σ.
pub fn perron_pair(m: &MetzlerMatrix) -> Result<PerronPair> {
    if !m.is_irreducible() {
        return Err(Error::Precondition(
            "Perron pair requires an irreducible matrix".into(),
        ));
    }
    let n = m.dim();
    if n == 1 {
        return Ok(PerronPair {
            value: m.entries()[(0, 0)],
            right: DVector::from_element(1, 1.0),
            left: DVector::from_element(1, 1.0),
        });
    }
    let sigma = 1.0
        + (0..n)
            .map(|i| m.entries()[(i, i)].abs())
            .fold(0.0, f64::max);
    let shifted = m.entries() + DMatrix::identity(n, n) * sigma;
    let (rho_r, right) = power_dominant(&shifted)?;
    let (rho_l, left) = power_dominant(&shifted.transpose())?;
    let value = rho_r - sigma;
    let scale = f64::max(1.0, value.abs());
    if (rho_r - rho_l).abs() > PERRON_RESIDUAL_TOL * scale {
        return Err(Error::Numerical(format!(
            "left/right Perron estimates disagree: {rho_r} vs {rho_l} on\n{}",
            m.entries()
        )));
    }
    let right_res = (m.entries() * &right - &right * value).amax();
    let left_res = (m.entries().transpose() * &left - &left * value).amax();
    if right_res > PERRON_RESIDUAL_TOL * scale || left_res > PERRON_RESIDUAL_TOL * scale {
        return Err(Error::Numerical(format!(
            "Perron residuals too large ({right_res:.3e}, {left_res:.3e}) on\n{}",
            m.entries()
        )));
    }
    if right.iter().any(|&v| v <= 0.0) || left.iter().any(|&v| v <= 0.0) {
        return Err(Error::Numerical(
            "Perron vectors lost strict positivity".into(),
        ));
    }
    Ok(PerronPair { value, right, left })
}

/// Classifies s(Λ + N) against zero for a strictly negative diagonal Λ and
/// an irreducible nonnegative N, cross-checking the equivalent condition
/// on ρ(−Λ⁻¹N) against one. The two signs must agree outside the critical
/// band; disagreement indicates numerical trouble and is an error.
pub fn threshold_trichotomy(
    lambda_diag: &DVector<f64>,
    n_mat: &DMatrix<f64>,
) -> Result<ThresholdVerdict> {
    threshold_trichotomy_with_band(lambda_diag, n_mat, DEFAULT_EPS_CRIT)
}

/// As [`threshold_trichotomy`] with an explicit critical band half-width.
pub fn threshold_trichotomy_with_band(
    lambda_diag: &DVector<f64>,
    n_mat: &DMatrix<f64>,
    eps_crit: f64,
) -> Result<ThresholdVerdict> {
    ensure_square_finite(n_mat)?;
    let n = n_mat.nrows();
    if lambda_diag.len() != n {
        return Err(Error::Shape(format!(
            "diagonal has length {}, matrix is {n}x{n}",
            lambda_diag.len()
        )));
    }
    if lambda_diag.iter().any(|&v| !(v < 0.0)) {
        return Err(Error::Precondition(
            "Λ must be a strictly negative diagonal".into(),
        ));
    }
    if n_mat.iter().any(|&v| v < 0.0) {
        return Err(Error::Precondition("N must be nonnegative".into()));
    }
    if !check_irreducible(n_mat)? {
        return Err(Error::Precondition("N must be irreducible".into()));
    }

    let mut metzler = n_mat.clone();
    for i in 0..n {
        metzler[(i, i)] += lambda_diag[i];
    }
    let s = perron_pair(&MetzlerMatrix::new(metzler)?)?.value;

    let ratio = DMatrix::from_fn(n, n, |i, j| n_mat[(i, j)] / -lambda_diag[i]);
    let rho = perron_pair(&MetzlerMatrix::new(ratio)?)?.value;

    let t = rho - 1.0;
    if (s > eps_crit && t < -eps_crit) || (s < -eps_crit && t > eps_crit) {
        return Err(Error::InternalConsistency(format!(
            "threshold signs disagree: s(Λ+N) = {s:.6e} but ρ(−Λ⁻¹N) − 1 = {t:.6e}"
        )));
    }
    Ok(if s > eps_crit {
        ThresholdVerdict::Above
    } else if s < -eps_crit {
        ThresholdVerdict::Below
    } else {
        ThresholdVerdict::Critical
    })
}

/// Diagonal Lyapunov certificate for an irreducible Metzler matrix with
/// s(M) ≤ 0, returned as the diagonal of P.
///
/// P is built from the Perron quotients Pᵢ = leftᵢ/rightᵢ. With that P,
/// (MᵀP + PM)·right = 2 s(M)·left, so MᵀP + PM is negative definite when
/// s(M) < 0 and negative semidefinite with a simple zero eigenvalue when
/// s(M) = 0. Both claims are verified here by a symmetric eigensolve and
/// the certificate is only returned if verification passes.
pub fn diagonal_lyapunov(m: &MetzlerMatrix) -> Result<DVector<f64>> {
    let pp = perron_pair(m)?;
    if pp.value > DEFAULT_EPS_CRIT {
        return Err(Error::Precondition(format!(
            "diagonal Lyapunov certificate requires s(M) ≤ 0, got {}",
            pp.value
        )));
    }
    let n = m.dim();
    let p = DVector::from_fn(n, |i, _| pp.left[i] / pp.right[i]);
    let pm = DMatrix::from_fn(n, n, |i, j| p[i] * m.entries()[(i, j)]);
    let mut sym = pm.transpose() + pm;
    // Symmetrize away roundoff so the symmetric eigensolver sees an
    // exactly symmetric matrix.
    sym = (&sym + sym.transpose()) * 0.5;
    let scale = f64::max(1.0, sym.amax());
    let mut eigs: Vec<f64> = SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .copied()
        .collect();
    eigs.sort_by(|a, b| b.partial_cmp(a).unwrap());

    if pp.value < -DEFAULT_EPS_CRIT {
        if eigs[0] >= 0.0 {
            return Err(Error::Numerical(format!(
                "negative-definiteness verification failed: largest eigenvalue {} ≥ 0",
                eigs[0]
            )));
        }
    } else {
        let zero_tol = 1e-8 * scale;
        let near_zero = eigs.iter().filter(|&&l| l.abs() <= zero_tol).count();
        if eigs[0] > zero_tol || near_zero != 1 {
            return Err(Error::Numerical(format!(
                "semidefiniteness verification failed: eigenvalues {eigs:?}"
            )));
        }
    }
    Ok(p)
}

/// For an irreducible nonnegative M and a nonzero x ≥ 0 with at least one
/// zero entry, returns an index i with xᵢ = 0 and (Mx)ᵢ > 0. Such an
/// index always exists: x and Mx cannot share a sign pattern.
pub fn sign_pattern_violation(m: &DMatrix<f64>, x: &DVector<f64>) -> Result<usize> {
    ensure_square_finite(m)?;
    let n = m.nrows();
    if x.len() != n {
        return Err(Error::Shape(format!(
            "vector has length {}, matrix is {n}x{n}",
            x.len()
        )));
    }
    if m.iter().any(|&v| v < 0.0) {
        return Err(Error::Precondition("M must be nonnegative".into()));
    }
    if !check_irreducible(m)? {
        return Err(Error::Precondition("M must be irreducible".into()));
    }
    if x.iter().any(|&v| v < 0.0) {
        return Err(Error::Precondition("x must be nonnegative".into()));
    }
    if x.iter().all(|&v| v == 0.0) {
        return Err(Error::Precondition("x must be nonzero".into()));
    }
    if x.iter().all(|&v| v > 0.0) {
        return Err(Error::Precondition(
            "x must have at least one zero entry".into(),
        ));
    }
    let y = m * x;
    (0..n).find(|&i| x[i] == 0.0 && y[i] > 0.0).ok_or_else(|| {
        Error::InternalConsistency(
            "no index with x_i = 0 and (Mx)_i > 0; sign-pattern guarantee violated".into(),
        )
    })
}

/// Inverse of an irreducible Hurwitz Metzler matrix, with the guarantee
/// that every entry is strictly negative checked entrywise.
pub fn negative_inverse_check(m: &MetzlerMatrix) -> Result<DMatrix<f64>> {
    let s = perron_pair(m)?.value;
    if s >= -DEFAULT_EPS_CRIT {
        return Err(Error::Precondition(format!(
            "matrix is not verifiably Hurwitz: s(M) = {s}"
        )));
    }
    let inverse = m
        .entries()
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Precondition("matrix is singular".into()))?;
    for i in 0..m.dim() {
        for j in 0..m.dim() {
            if inverse[(i, j)] >= 0.0 {
                return Err(Error::InternalConsistency(format!(
                    "inverse entry ({i}, {j}) = {} is nonnegative for a Hurwitz \
                     irreducible Metzler matrix",
                    inverse[(i, j)]
                )));
            }
        }
    }
    Ok(inverse)
}
