//! Affine-invariant geometry of the cone of symmetric positive definite
//! matrices.
//!
//! The metric at `P` is `g_P(Y1, Y2) = tr(P^-1 Y1 P^-1 Y2)` and the induced
//! distance is `d(P, Q) = (sum_i log^2 lambda_i)^(1/2)` over the eigenvalues of
//! `P Q^-1`. The distance is invariant under congruence `P -> A P A'` for any
//! invertible `A` and under inversion `P -> P^-1`.
//!
//! Every spectral quantity (square roots, powers, logs) goes through a
//! symmetric eigendecomposition. Cholesky is only used as a cheap validity
//! check for integrator iterates.

use nalgebra::Cholesky;

use crate::error::{ensure_shape, shape, Error, Result};
use crate::linalg::{asymmetry, max_abs, singular_values, symmetrize, Mat, SymEig};

/// Relative floor on the smallest eigenvalue: `lambda_min > SPD_REL_TOL * lambda_max`.
pub const SPD_REL_TOL: f64 = 1e-12;
/// Relative symmetry tolerance: `max|P - P'| <= SYM_TOL * (1 + max|P|)`.
pub const SYM_TOL: f64 = 1e-12;

fn check_symmetric(context: &str, m: &Mat) -> Result<()> {
    if !m.is_square() {
        return Err(Error::InvalidInput(format!(
            "{context}: expected a square matrix, found {}",
            shape(m.nrows(), m.ncols())
        )));
    }
    let skew = asymmetry(m);
    if skew > SYM_TOL * (1.0 + max_abs(m)) {
        return Err(Error::InvalidInput(format!("{context}: not symmetric (max skew {skew:e})")));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("{context}: non-finite entry")));
    }
    Ok(())
}

/// A symmetric positive definite matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SpdMatrix(Mat);

impl SpdMatrix {
    /// Validates symmetry and positive definiteness, then stores the exactly
    /// symmetrized matrix.
    pub fn new(m: Mat) -> Result<Self> {
        check_symmetric("SpdMatrix", &m)?;
        let m = symmetrize(&m);
        let eig = SymEig::new(&m);
        let (lo, hi) = (eig.min(), eig.max());
        if !(lo > 0.0 && lo > SPD_REL_TOL * hi) {
            return Err(Error::InvalidInput(format!(
                "matrix is not positive definite (eigenvalues in [{lo:e}, {hi:e}])"
            )));
        }
        Ok(SpdMatrix(m))
    }

    /// Symmetrizes `m` and accepts it if a Cholesky factorization exists.
    /// Used for integrator iterates, where a full spectral check per step is
    /// too expensive at large `n`.
    pub fn from_iterate(m: Mat) -> Option<Self> {
        if !m.is_square() || m.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let m = symmetrize(&m);
        Cholesky::new(m.clone()).map(|_| SpdMatrix(m))
    }

    pub fn identity(n: usize) -> Self {
        SpdMatrix(Mat::identity(n, n))
    }

    pub fn scaled_identity(n: usize, c: f64) -> Result<Self> {
        Self::new(Mat::identity(n, n) * c)
    }

    pub fn from_diagonal(d: &[f64]) -> Result<Self> {
        Self::new(Mat::from_diagonal(&nalgebra::DVector::from_row_slice(d)))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &Mat {
        &self.0
    }

    pub fn into_matrix(self) -> Mat {
        self.0
    }

    pub fn eigen(&self) -> SymEig {
        SymEig::new(&self.0)
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigen().max()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigen().min()
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn inverse(&self) -> SpdMatrix {
        SpdMatrix(self.eigen().map(|l| 1.0 / l))
    }

    /// `P^s` through the eigendecomposition.
    pub fn power(&self, s: f64) -> SpdMatrix {
        SpdMatrix(self.eigen().map(|l| l.powf(s)))
    }

    /// `c P` for `c > 0`.
    pub fn scale(&self, c: f64) -> Result<SpdMatrix> {
        if !(c > 0.0) {
            return Err(Error::OutOfRange { name: "scale", value: c, range: "(0, inf)" });
        }
        Ok(SpdMatrix(&self.0 * c))
    }
}

/// A symmetric matrix viewed as a tangent vector to the cone.
#[derive(Clone, Debug, PartialEq)]
pub struct SpdTangent(Mat);

impl SpdTangent {
    pub fn new(m: Mat) -> Result<Self> {
        check_symmetric("SpdTangent", &m)?;
        Ok(SpdTangent(symmetrize(&m)))
    }

    /// Symmetric part of an arbitrary square matrix.
    pub fn symmetric_part(m: &Mat) -> Self {
        SpdTangent(symmetrize(m))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &Mat {
        &self.0
    }

    pub fn into_matrix(self) -> Mat {
        self.0
    }
}

/// `tr(P^-1 Y1 P^-1 Y2)`, evaluated as the Frobenius product of the tangents
/// transported to the identity by `P^-1/2`.
pub fn metric_spd(p: &SpdMatrix, y1: &SpdTangent, y2: &SpdTangent) -> Result<f64> {
    let n = p.dim();
    ensure_shape("metric_spd Y1", &y1.0, n, n)?;
    ensure_shape("metric_spd Y2", &y2.0, n, n)?;
    let inv_sqrt = p.eigen().map(|l| 1.0 / l.sqrt());
    let z1 = &inv_sqrt * &y1.0 * &inv_sqrt;
    let z2 = &inv_sqrt * &y2.0 * &inv_sqrt;
    Ok(z1.dot(&z2))
}

/// Eigenvalues of `Q^-1/2 P Q^-1/2`, which are those of `P Q^-1`.
pub fn relative_eigenvalues(p: &SpdMatrix, q: &SpdMatrix) -> Result<Vec<f64>> {
    let n = q.dim();
    ensure_shape("distance_spd", &p.0, n, n)?;
    let q_inv_sqrt = q.eigen().map(|l| 1.0 / l.sqrt());
    let m = symmetrize(&(&q_inv_sqrt * &p.0 * &q_inv_sqrt));
    let values: Vec<f64> = SymEig::new(&m).values.iter().copied().collect();
    if let Some(bad) = values.iter().find(|l| !(**l > 0.0)) {
        return Err(Error::InvalidInput(format!(
            "relative eigenvalue {bad:e} is not positive; inputs are not SPD to working precision"
        )));
    }
    Ok(values)
}

/// Natural (affine-invariant) Riemannian distance.
pub fn distance_spd(p: &SpdMatrix, q: &SpdMatrix) -> Result<f64> {
    if p == q {
        return Ok(0.0);
    }
    let values = relative_eigenvalues(p, q)?;
    Ok(values.iter().map(|l| l.ln().powi(2)).sum::<f64>().sqrt())
}

/// Group action `P -> A P A'`.
pub fn congruence(a: &Mat, p: &SpdMatrix) -> Result<SpdMatrix> {
    let n = p.dim();
    ensure_shape("congruence", a, n, n)?;
    let sv = singular_values(a);
    let (hi, lo) = (sv[0], sv[n - 1]);
    if !(lo > f64::EPSILON * hi * n as f64) {
        return Err(Error::InvalidInput(format!(
            "congruence matrix is singular (singular values in [{lo:e}, {hi:e}])"
        )));
    }
    let cond = hi / lo;
    if cond > 1e12 {
        log::warn!("congruence matrix is ill-conditioned (condition number {cond:e})");
    }
    SpdMatrix::new(symmetrize(&(a * &p.0 * a.transpose())))
}

/// The unique SPD square root.
pub fn sqrt_spd(p: &SpdMatrix) -> SpdMatrix {
    p.power(0.5)
}

/// Point at parameter `s` on the geodesic from `P` to `Q`:
/// `P^1/2 (P^-1/2 Q P^-1/2)^s P^1/2`.
pub fn geodesic_spd(p: &SpdMatrix, q: &SpdMatrix, s: f64) -> Result<SpdMatrix> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::OutOfRange { name: "s", value: s, range: "[0, 1]" });
    }
    let n = p.dim();
    ensure_shape("geodesic_spd", &q.0, n, n)?;
    let eig = p.eigen();
    let half = eig.map(f64::sqrt);
    let inv_half = eig.map(|l| 1.0 / l.sqrt());
    let inner = SymEig::new(&(&inv_half * &q.0 * &inv_half));
    if inner.min() <= 0.0 {
        return Err(Error::InvalidInput("geodesic endpoint is not SPD to working precision".into()));
    }
    let powered = inner.map(|l| l.powf(s));
    SpdMatrix::new(symmetrize(&(&half * powered * &half)))
}
