//! Quotient geometry of rank-`r` positive semidefinite `n x n` matrices.
//!
//! A point is represented by a pair `(U, S)` with `U` an `n x r` frame with
//! orthonormal columns and `S` an `r x r` SPD matrix, standing for
//! `P = U S U'`. The representation is defined up to the gauge action
//! `(U, S) -> (U O, O' S O)` for orthogonal `O`.
//!
//! Tangent vectors are taken in the horizontal space: `(Delta, D)` with
//! `U' Delta = 0` and `D` symmetric. The metric is
//!
//! ```text
//! g((Delta1, D1), (Delta2, D2)) = tr(Delta1' Delta2) + tr(S^-1 D1 S^-1 D2)
//! ```
//!
//! The factor is stored un-squared: for `S = R^2` and `D = R D0 R` the cone
//! term `tr(R^-1 D1 R^-2 D2 R^-1)` equals `tr(S^-1 D1 S^-1 D2)`. The flows in
//! [`crate::lowrank`] act on the same `S`.
//!
//! No closed form is known for the geodesic distance of this metric.
//! [`approx_distance`] combines the Grassmann distance between the spans with
//! the cone distance between the aligned factors; it is exact in each factor
//! separately but only an approximation of the true distance.

use crate::error::{ensure_shape, Error, Result};
use crate::linalg::{max_abs, orthogonality_defect, orthonormal_complement, qf, symmetrize, Mat};
use crate::spd::{distance_spd, SpdMatrix};

/// Tolerance on `|U'U - I|` and on horizontality `|U' Delta|`.
pub const FRAME_TOL: f64 = 1e-10;
/// Singular values of `U1'U2` below this make alignment degenerate.
pub const ALIGN_TOL: f64 = 1e-10;

/// An `n x r` matrix with orthonormal columns, `0 < r < n`.
#[derive(Clone, Debug, PartialEq)]
pub struct StiefelFrame(Mat);

impl StiefelFrame {
    pub fn new(u: Mat) -> Result<Self> {
        let (n, r) = u.shape();
        if r == 0 || r >= n {
            return Err(Error::InvalidInput(format!("frame must satisfy 0 < r < n, got n = {n}, r = {r}")));
        }
        let defect = orthogonality_defect(&u);
        if !(defect <= FRAME_TOL) {
            return Err(Error::InvalidInput(format!("columns are not orthonormal (|U'U - I| = {defect:e})")));
        }
        Ok(StiefelFrame(u))
    }

    /// Orthonormalizes the columns of `m` with the sign-fixed QR factor.
    pub fn orthonormalize(m: &Mat) -> Result<Self> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("frame has non-finite entries".into()));
        }
        Self::new(qf(m))
    }

    /// First `r` columns of the identity.
    pub fn leading(n: usize, r: usize) -> Result<Self> {
        Self::new(Mat::identity(n, r))
    }

    pub fn n(&self) -> usize {
        self.0.nrows()
    }

    pub fn r(&self) -> usize {
        self.0.ncols()
    }

    pub fn as_matrix(&self) -> &Mat {
        &self.0
    }

    pub fn into_matrix(self) -> Mat {
        self.0
    }

    /// An orthonormal basis of the orthogonal complement.
    pub fn complement(&self) -> Mat {
        orthonormal_complement(&self.0)
    }

    /// `(I - U U') M`.
    pub fn project_out(&self, m: &Mat) -> Mat {
        m - &self.0 * (self.0.transpose() * m)
    }

    pub fn rotate(&self, o: &Mat) -> Result<Self> {
        ensure_shape("StiefelFrame::rotate", o, self.r(), self.r())?;
        Self::new(&self.0 * o)
    }
}

/// Factored rank-`r` PSD matrix `U S U'`.
#[derive(Clone, Debug, PartialEq)]
pub struct FixedRankPsd {
    u: StiefelFrame,
    s: SpdMatrix,
}

impl FixedRankPsd {
    pub fn new(u: StiefelFrame, s: SpdMatrix) -> Result<Self> {
        if s.dim() != u.r() {
            return Err(Error::DimensionMismatch {
                context: "FixedRankPsd",
                expected: format!("S of size {}", u.r()),
                found: format!("S of size {}", s.dim()),
            });
        }
        Ok(FixedRankPsd { u, s })
    }

    pub fn u(&self) -> &StiefelFrame {
        &self.u
    }

    pub fn s(&self) -> &SpdMatrix {
        &self.s
    }

    pub fn n(&self) -> usize {
        self.u.n()
    }

    pub fn r(&self) -> usize {
        self.u.r()
    }

    /// Representative `(U O, O' S O)` of the same matrix.
    pub fn gauge(&self, o: &Mat) -> Result<Self> {
        let u = self.u.rotate(o)?;
        let s = SpdMatrix::new(symmetrize(&(o.transpose() * self.s.as_matrix() * o)))?;
        Ok(FixedRankPsd { u, s })
    }

    pub fn with_s(&self, s: SpdMatrix) -> Result<Self> {
        Self::new(self.u.clone(), s)
    }

    pub fn into_parts(self) -> (StiefelFrame, SpdMatrix) {
        (self.u, self.s)
    }
}

/// Horizontal tangent vector `(Delta, D)` at a point `(U, S)`.
#[derive(Clone, Debug, PartialEq)]
pub struct HorizontalTangent {
    delta: Mat,
    d: Mat,
}

impl HorizontalTangent {
    /// Checks `U' Delta = 0` and symmetry of `D` at base point `x`.
    pub fn new(x: &FixedRankPsd, delta: Mat, d: Mat) -> Result<Self> {
        ensure_shape("HorizontalTangent Delta", &delta, x.n(), x.r())?;
        ensure_shape("HorizontalTangent D", &d, x.r(), x.r())?;
        check_horizontal(x, &delta)?;
        let skew = crate::linalg::asymmetry(&d);
        if skew > 1e-12 * (1.0 + max_abs(&d)) {
            return Err(Error::InvalidInput(format!("D is not symmetric (max skew {skew:e})")));
        }
        Ok(HorizontalTangent { delta, d: symmetrize(&d) })
    }

    pub fn delta(&self) -> &Mat {
        &self.delta
    }

    pub fn d(&self) -> &Mat {
        &self.d
    }

    /// Coordinates `B = U_perp' Delta`.
    pub fn subspace_coordinates(&self, x: &FixedRankPsd) -> Mat {
        x.u().complement().transpose() * &self.delta
    }

    /// Coordinates `D0 = S^-1/2 D S^-1/2`.
    pub fn cone_coordinates(&self, x: &FixedRankPsd) -> Mat {
        let w = x.s().eigen().map(|l| 1.0 / l.sqrt());
        symmetrize(&(&w * &self.d * &w))
    }
}

fn check_horizontal(x: &FixedRankPsd, delta: &Mat) -> Result<()> {
    let vertical = max_abs(&(x.u().as_matrix().transpose() * delta));
    if vertical > FRAME_TOL * (1.0 + max_abs(delta)) {
        return Err(Error::InvalidInput(format!(
            "tangent is not horizontal at this base point (|U' Delta| = {vertical:e})"
        )));
    }
    Ok(())
}

/// `U S U'`.
pub fn to_matrix(x: &FixedRankPsd) -> Mat {
    let u = x.u().as_matrix();
    symmetrize(&(u * x.s().as_matrix() * u.transpose()))
}

/// Removes the vertical part of `(Udot, Sdot)`:
/// `Delta = (I - U U') Udot`, `D = (Sdot + Sdot') / 2`.
pub fn horizontal_project(x: &FixedRankPsd, udot: &Mat, sdot: &Mat) -> Result<HorizontalTangent> {
    ensure_shape("horizontal_project Udot", udot, x.n(), x.r())?;
    ensure_shape("horizontal_project Sdot", sdot, x.r(), x.r())?;
    Ok(HorizontalTangent { delta: x.u().project_out(udot), d: symmetrize(sdot) })
}

/// Invariant metric `tr(Delta1' Delta2) + tr(S^-1 D1 S^-1 D2)`.
pub fn metric_fixed_rank(x: &FixedRankPsd, t1: &HorizontalTangent, t2: &HorizontalTangent) -> Result<f64> {
    for t in [t1, t2] {
        ensure_shape("metric_fixed_rank Delta", &t.delta, x.n(), x.r())?;
        ensure_shape("metric_fixed_rank D", &t.d, x.r(), x.r())?;
        check_horizontal(x, &t.delta)?;
    }
    let w = x.s().eigen().map(|l| 1.0 / l.sqrt());
    let z1 = &w * &t1.d * &w;
    let z2 = &w * &t2.d * &w;
    Ok(t1.delta.dot(&t2.delta) + z1.dot(&z2))
}

fn ensure_same_frame_dims(u1: &StiefelFrame, u2: &StiefelFrame) -> Result<()> {
    ensure_shape("frame pair", u2.as_matrix(), u1.n(), u1.r())
}

/// Orthogonal `O*` maximizing `tr(O' U1' U2)`: the polar factor of `U1' U2`.
/// Rotating the second representative by `O*'` brings it closest to the
/// first, `U2 O*' ~ U1`.
pub fn align(x1: &FixedRankPsd, x2: &FixedRankPsd) -> Result<Mat> {
    align_frames(x1.u(), x2.u())
}

pub fn align_frames(u1: &StiefelFrame, u2: &StiefelFrame) -> Result<Mat> {
    ensure_same_frame_dims(u1, u2)?;
    let m = u1.as_matrix().transpose() * u2.as_matrix();
    let sigma_min = crate::linalg::singular_values(&m).last().copied().unwrap_or(0.0);
    if !(sigma_min > ALIGN_TOL) {
        return Err(Error::DegenerateAlignment { sigma_min });
    }
    crate::linalg::polar_factor(&m).ok_or(Error::DegenerateAlignment { sigma_min })
}

/// Principal angles between `span(U1)` and `span(U2)`, ascending.
///
/// Cosines come from the singular values of `U1'U2` (clamped into `[0, 1]`)
/// and sines from those of `(I - U1 U1') U2`; each angle is taken from
/// whichever is better conditioned.
pub fn principal_angles(u1: &StiefelFrame, u2: &StiefelFrame) -> Result<Vec<f64>> {
    ensure_same_frame_dims(u1, u2)?;
    let mut cos = crate::linalg::singular_values(&(u1.as_matrix().transpose() * u2.as_matrix()));
    for c in cos.iter_mut() {
        *c = c.clamp(0.0, 1.0);
    }
    let mut sin = crate::linalg::singular_values(&u1.project_out(u2.as_matrix()));
    sin.reverse();
    for s in sin.iter_mut() {
        *s = s.clamp(0.0, 1.0);
    }
    Ok(cos
        .iter()
        .zip(sin.iter())
        .map(|(&c, &s)| if c * c >= 0.5 { s.asin() } else { c.acos() })
        .collect())
}

/// Grassmann distance `||theta||_2` over the principal angles.
pub fn grassmann_distance(u1: &StiefelFrame, u2: &StiefelFrame) -> Result<f64> {
    if u1 == u2 {
        return Ok(0.0);
    }
    Ok(principal_angles(u1, u2)?.iter().map(|t| t * t).sum::<f64>().sqrt())
}

/// Components of [`approx_distance`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ApproxDistance {
    pub total: f64,
    pub grassmann: f64,
    pub cone: f64,
}

/// Approximate distance between rank-`r` PSD matrices:
/// `sqrt(d_Gr(U1, U2)^2 + d_P(S1, O* S2 O*')^2)` with `O* = align(X1, X2)`.
///
/// This is not the geodesic distance of the invariant metric (which has no
/// known closed form) and no triangle inequality is claimed. It is gauge
/// invariant, symmetric, and invariant to orthogonal transformations,
/// dilations and pseudo-inversion.
pub fn approx_distance(x1: &FixedRankPsd, x2: &FixedRankPsd) -> Result<f64> {
    approx_distance_parts(x1, x2).map(|d| d.total)
}

pub fn approx_distance_parts(x1: &FixedRankPsd, x2: &FixedRankPsd) -> Result<ApproxDistance> {
    if x1 == x2 {
        return Ok(ApproxDistance { total: 0.0, grassmann: 0.0, cone: 0.0 });
    }
    let o = align(x1, x2)?;
    let grassmann = grassmann_distance(x1.u(), x2.u())?;
    let cone = aligned_cone_distance(x1, x2, &o)?;
    Ok(ApproxDistance { total: grassmann.hypot(cone), grassmann, cone })
}

/// `d_P(S1, O S2 O')`.
pub fn aligned_cone_distance(x1: &FixedRankPsd, x2: &FixedRankPsd, o: &Mat) -> Result<f64> {
    let s2 = SpdMatrix::new(symmetrize(&(o * x2.s().as_matrix() * o.transpose())))?;
    distance_spd(x1.s(), &s2)
}
