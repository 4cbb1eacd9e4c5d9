//! Rank-preserving low-rank Kalman filter.
//!
//! The covariance is kept as `U S U'` with `U` on the Stiefel manifold. The
//! rank-preserving flow replaces the process noise by `mu^2 U U'` and splits
//! into a triangular pair:
//!
//! ```text
//! dU/dt = (I - U U') A U                                  (Oja subspace flow)
//! dS/dt = A_U S + S A_U' + mu^2 I - S C_U' (HH')^-1 C_U S  (projected Riccati)
//! ```
//!
//! with `A_U = U'AU` and `C_U = CU`. The subspace equation does not depend on
//! `S`.

use crate::error::{ensure_shape, Error, Result};
use crate::fixed_rank::{FixedRankPsd, StiefelFrame};
use crate::linalg::{qf, symmetrize, Mat, SymEig, Vector};
use crate::riccati::{time_grid, LtiSystem, MeasurementRecord};
use crate::spd::SpdMatrix;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LowRankConfig {
    /// Isotropic process-noise scale.
    pub mu: f64,
    pub dt: f64,
    pub r: usize,
}

impl LowRankConfig {
    pub fn new(mu: f64, dt: f64, r: usize) -> Result<Self> {
        if !(mu >= 0.0) || !mu.is_finite() {
            return Err(Error::OutOfRange { name: "mu", value: mu, range: "[0, inf)" });
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::OutOfRange { name: "dt", value: dt, range: "(0, inf)" });
        }
        if r == 0 {
            return Err(Error::InvalidInput("rank must be positive".into()));
        }
        Ok(LowRankConfig { mu, dt, r })
    }

    fn check_against(&self, n: usize) -> Result<()> {
        if self.r >= n {
            return Err(Error::InvalidInput(format!("rank {} must be below the state dimension {n}", self.r)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LowRankFilterState {
    pub x: FixedRankPsd,
    pub x_hat: Vector,
    pub t: f64,
}

pub(crate) fn oja_matrix(a: &Mat, u: &Mat) -> Mat {
    let au = a * u;
    &au - u * (u.transpose() * &au)
}

/// Subspace vector field `(I - U U') A U`.
pub fn oja_rhs(a: &Mat, u: &StiefelFrame) -> Result<Mat> {
    ensure_shape("oja_rhs A", a, u.n(), u.n())?;
    Ok(oja_matrix(a, u.as_matrix()))
}

pub(crate) fn projected_riccati_matrix(sys: &LtiSystem, u: &Mat, s: &Mat, mu: f64) -> Mat {
    let a_u = u.transpose() * sys.a() * u;
    let c_u = sys.c() * u;
    let info_u = c_u.transpose() * sys.measurement_precision() * &c_u;
    let a_s = &a_u * s;
    let r = s.nrows();
    symmetrize(&(&a_s + a_s.transpose() + Mat::identity(r, r) * (mu * mu) - s * info_u * s))
}

/// Projected Riccati field `A_U S + S A_U' + mu^2 I - S C_U'(HH')^-1 C_U S`.
pub fn lowrank_riccati_rhs(sys: &LtiSystem, x: &FixedRankPsd, mu: f64) -> Result<Mat> {
    ensure_shape("lowrank_riccati_rhs A", sys.a(), x.n(), x.n())?;
    Ok(projected_riccati_matrix(sys, x.u().as_matrix(), x.s().as_matrix(), mu))
}

fn ambient_common(sys: &LtiSystem, x: &FixedRankPsd) -> (Mat, Mat) {
    let p = crate::fixed_rank::to_matrix(x);
    let ap = sys.a() * &p;
    let drift = &ap + ap.transpose() - &p * sys.information() * &p;
    (p, drift)
}

/// Ambient `n x n` velocity of `U S U'` under the rank-preserving flow:
/// `AP + PA' + mu^2 UU' - P C'(HH')^-1 C P`.
pub fn rank_preserving_ambient_rhs(sys: &LtiSystem, x: &FixedRankPsd, mu: f64) -> Mat {
    let (_, drift) = ambient_common(sys, x);
    let u = x.u().as_matrix();
    symmetrize(&(drift + u * u.transpose() * (mu * mu)))
}

/// Ambient velocity with the full process noise `GG'`. It is not tangent to
/// the fixed-rank manifold and is only used to measure what the projection
/// discards; it is never integrated.
pub fn full_noise_ambient_rhs(sys: &LtiSystem, x: &FixedRankPsd) -> Mat {
    let (_, drift) = ambient_common(sys, x);
    symmetrize(&(drift + sys.process_noise()))
}

/// Component of an ambient symmetric velocity that leaves the manifold:
/// `(I - UU') Z (I - UU')`.
pub fn normal_component(x: &FixedRankPsd, z: &Mat) -> Mat {
    let left = x.u().project_out(z);
    x.u().project_out(&left.transpose()).transpose()
}

fn retract(u: &Mat, s: &Mat, t: f64) -> Result<FixedRankPsd> {
    if u.iter().chain(s.iter()).any(|v| !v.is_finite()) {
        return Err(Error::IntegrationFailure { t, reason: "low-rank state overflowed".into() });
    }
    let frame = StiefelFrame::new(qf(u)).map_err(|e| Error::IntegrationFailure { t, reason: e.to_string() })?;
    let factor = SpdMatrix::from_iterate(s.clone()).ok_or_else(|| Error::IntegrationFailure {
        t,
        reason: "low-rank factor S lost positive definiteness".into(),
    })?;
    FixedRankPsd::new(frame, factor)
}

/// One RK4 step on the coupled `(U, S)` system followed by QR retraction of
/// `U` and symmetrization of `S`.
pub fn lowrank_rk4_step(sys: &LtiSystem, x: &FixedRankPsd, mu: f64, t: f64, dt: f64) -> Result<FixedRankPsd> {
    let f = |u: &Mat, s: &Mat| (oja_matrix(sys.a(), u), projected_riccati_matrix(sys, u, s, mu));
    let (u, s) = (x.u().as_matrix(), x.s().as_matrix());
    let (k1, l1) = f(u, s);
    let (k2, l2) = f(&(u + &k1 * (0.5 * dt)), &(s + &l1 * (0.5 * dt)));
    let (k3, l3) = f(&(u + &k2 * (0.5 * dt)), &(s + &l2 * (0.5 * dt)));
    let (k4, l4) = f(&(u + &k3 * dt), &(s + &l3 * dt));
    let u_next = u + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
    let s_next = s + (l1 + l2 * 2.0 + l3 * 2.0 + l4) * (dt / 6.0);
    retract(&u_next, &s_next, t + dt)
}

/// RK4 trajectory of the coupled flow, sampled at every step.
pub fn integrate_lowrank(
    sys: &LtiSystem,
    x0: &FixedRankPsd,
    cfg: &LowRankConfig,
    t_end: f64,
) -> Result<Vec<(f64, FixedRankPsd)>> {
    ensure_shape("integrate_lowrank A", sys.a(), x0.n(), x0.n())?;
    cfg.check_against(x0.n())?;
    if cfg.r != x0.r() {
        return Err(Error::DimensionMismatch {
            context: "integrate_lowrank rank",
            expected: cfg.r.to_string(),
            found: x0.r().to_string(),
        });
    }
    let times = time_grid(t_end, cfg.dt)?;
    let mut out: Vec<(f64, FixedRankPsd)> = Vec::with_capacity(times.len());
    out.push((0.0, x0.clone()));
    for w in times.windows(2) {
        let next = lowrank_rk4_step(sys, &out[out.len() - 1].1, cfg.mu, w[0], w[1] - w[0])?;
        out.push((w[1], next));
    }
    Ok(out)
}

/// RK4 trajectory of the subspace flow alone, with QR retraction each step.
pub fn integrate_oja(a: &Mat, u0: &StiefelFrame, t_end: f64, dt: f64) -> Result<Vec<(f64, StiefelFrame)>> {
    ensure_shape("integrate_oja A", a, u0.n(), u0.n())?;
    let times = time_grid(t_end, dt)?;
    let mut out: Vec<(f64, StiefelFrame)> = Vec::with_capacity(times.len());
    out.push((0.0, u0.clone()));
    for w in times.windows(2) {
        let h = w[1] - w[0];
        let u = out[out.len() - 1].1.as_matrix();
        let k1 = oja_matrix(a, u);
        let k2 = oja_matrix(a, &(u + &k1 * (0.5 * h)));
        let k3 = oja_matrix(a, &(u + &k2 * (0.5 * h)));
        let k4 = oja_matrix(a, &(u + &k3 * h));
        let next = u + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::IntegrationFailure { t: w[1], reason: "frame overflowed".into() });
        }
        let frame = StiefelFrame::new(qf(&next))
            .map_err(|e| Error::IntegrationFailure { t: w[1], reason: e.to_string() })?;
        out.push((w[1], frame));
    }
    Ok(out)
}

/// RK4 trajectory of the projected Riccati equation with the span frozen at `u`.
pub fn integrate_projected_riccati(
    sys: &LtiSystem,
    u: &StiefelFrame,
    s0: &SpdMatrix,
    mu: f64,
    t_end: f64,
    dt: f64,
) -> Result<Vec<(f64, SpdMatrix)>> {
    ensure_shape("integrate_projected_riccati A", sys.a(), u.n(), u.n())?;
    ensure_shape("integrate_projected_riccati S0", s0.as_matrix(), u.r(), u.r())?;
    let times = time_grid(t_end, dt)?;
    let frame = u.as_matrix();
    let f = |s: &Mat| projected_riccati_matrix(sys, frame, s, mu);
    let mut out: Vec<(f64, SpdMatrix)> = Vec::with_capacity(times.len());
    out.push((0.0, s0.clone()));
    for w in times.windows(2) {
        let h = w[1] - w[0];
        let s = out[out.len() - 1].1.as_matrix();
        let k1 = f(s);
        let k2 = f(&(s + &k1 * (0.5 * h)));
        let k3 = f(&(s + &k2 * (0.5 * h)));
        let k4 = f(&(s + &k3 * h));
        let next = SpdMatrix::from_iterate(s + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)).ok_or_else(|| {
            Error::IntegrationFailure { t: w[1], reason: "factor S lost positive definiteness".into() }
        })?;
        out.push((w[1], next));
    }
    Ok(out)
}

/// One step of the discrete-time low-rank filter.
///
/// ```text
/// U+ = qf(U + dt (I - UU') A U)
/// S+ = At S At' - dt At S C_U' (dt C_U S C_U' + HH')^-1 C_U S At' + dt mu^2 I
/// x+ = x + dt ((A - K C) x + K y),   K = U S U' C' (HH')^-1
/// ```
///
/// with `At = I + dt A_U`. The correction is the Kalman update for a
/// measurement averaged over the step, with noise covariance `HH'/dt`.
/// Without a measurement the estimate is left untouched.
pub fn discrete_step(
    sys: &LtiSystem,
    state: &LowRankFilterState,
    cfg: &LowRankConfig,
    y: Option<&MeasurementRecord>,
) -> Result<LowRankFilterState> {
    let x = &state.x;
    let (n, r) = (x.n(), x.r());
    ensure_shape("discrete_step A", sys.a(), n, n)?;
    cfg.check_against(n)?;
    if state.x_hat.len() != n {
        return Err(Error::DimensionMismatch {
            context: "discrete_step x_hat",
            expected: n.to_string(),
            found: state.x_hat.len().to_string(),
        });
    }
    let dt = cfg.dt;
    let t_next = state.t + dt;
    let u = x.u().as_matrix();
    let s = x.s().as_matrix();

    let au = sys.a() * u;
    let a_u = u.transpose() * &au;
    let u_plus = qf(&(u + (&au - u * &a_u) * dt));

    let a_tilde = Mat::identity(r, r) + &a_u * dt;
    let c_u = sys.c() * u;
    let hh = sys.h() * sys.h().transpose();
    let innovation = symmetrize(&(&c_u * s * c_u.transpose() * dt + hh));
    let chol = innovation.cholesky().ok_or(Error::SingularSolve { t: state.t })?;
    let as_ct = &a_tilde * s * c_u.transpose();
    let correction = &as_ct * chol.solve(&as_ct.transpose()) * dt;
    let s_plus = &a_tilde * s * a_tilde.transpose() - correction + Mat::identity(r, r) * (dt * cfg.mu * cfg.mu);

    let x_hat = match y {
        Some(record) => {
            if record.y.len() != sys.p() {
                return Err(Error::DimensionMismatch {
                    context: "discrete_step y",
                    expected: sys.p().to_string(),
                    found: record.y.len().to_string(),
                });
            }
            let innovation = &record.y - sys.c() * &state.x_hat;
            let gain_times = u * (s * (u.transpose() * (sys.gain_factor() * innovation)));
            &state.x_hat + (sys.a() * &state.x_hat + gain_times) * dt
        }
        None => state.x_hat.clone(),
    };
    if x_hat.iter().any(|v| !v.is_finite()) {
        return Err(Error::IntegrationFailure { t: t_next, reason: "state estimate overflowed".into() });
    }
    Ok(LowRankFilterState { x: retract(&u_plus, &s_plus, t_next)?, x_hat, t: t_next })
}

/// Eigen-gap `lambda_r - lambda_{r+1}` of the symmetric part of `A`, with the
/// two eigenvalues.
pub fn eigen_gap(a: &Mat, r: usize) -> Result<(f64, f64, f64)> {
    let n = a.nrows();
    ensure_shape("eigen_gap A", a, n, n)?;
    if r == 0 || r >= n {
        return Err(Error::InvalidInput(format!("rank must satisfy 0 < r < n, got n = {n}, r = {r}")));
    }
    let eig = SymEig::new(&((a + a.transpose()) * 0.5));
    let (hi, lo) = (eig.values[r - 1], eig.values[r]);
    Ok((hi - lo, hi, lo))
}

/// Orthonormal eigenbasis of the top-`r` eigenspace of `(A + A')/2`,
/// columns ordered by descending eigenvalue, each with its first non-negligible
/// component positive.
pub fn dominant_subspace(a: &Mat, r: usize) -> Result<StiefelFrame> {
    let (gap, hi, lo) = eigen_gap(a, r)?;
    let sym = (a + a.transpose()) * 0.5;
    let eig = SymEig::new(&sym);
    let scale = eig.values.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    if !(gap > 1e-12 * scale) {
        return Err(Error::DegenerateGap { lambda_r: hi, lambda_next: lo });
    }
    let mut u = eig.vectors.columns(0, r).into_owned();
    for mut col in u.column_iter_mut() {
        if let Some(first) = col.iter().copied().find(|v| v.abs() > 1e-12) {
            if first < 0.0 {
                col.neg_mut();
            }
        }
    }
    StiefelFrame::new(u)
}
