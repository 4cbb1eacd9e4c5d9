//! Continuous-time Kalman-Bucy filter on the full covariance.
//!
//! The covariance obeys `dP/dt = A P + P A' + G G' - P C' (H H')^-1 C P` and
//! the estimate `dx/dt = (A - K C) x + K y` with gain `K = P C' (H H')^-1`.
//! Integration is classical fixed-step RK4; every stored iterate is
//! symmetrized and checked for positive definiteness.

use std::borrow::Cow;

use nalgebra::Cholesky;

use crate::error::{ensure_shape, shape, Error, Result};
use crate::linalg::{max_abs, singular_values, symmetrize, Mat, SymEig, Vector};
use crate::spd::{SpdMatrix, SpdTangent};

/// Constant system matrices with the derived products the flows need.
#[derive(Clone, Debug)]
pub struct LtiSystem {
    a: Mat,
    c: Mat,
    g: Mat,
    h: Mat,
    process_noise: Mat,
    measurement_precision: Mat,
    gain_factor: Mat,
    information: Mat,
}

impl LtiSystem {
    /// `A` is n×n, `C` is p×n, `G` is n×m and `H` is p×p with `H H'` invertible.
    pub fn new(a: Mat, c: Mat, g: Mat, h: Mat) -> Result<Self> {
        let n = a.nrows();
        if n == 0 {
            return Err(Error::InvalidInput("state dimension must be positive".into()));
        }
        ensure_shape("LtiSystem A", &a, n, n)?;
        let p = c.nrows();
        if p == 0 {
            return Err(Error::InvalidInput("output dimension must be positive".into()));
        }
        ensure_shape("LtiSystem C", &c, p, n)?;
        if g.nrows() != n || g.ncols() == 0 {
            return Err(Error::DimensionMismatch {
                context: "LtiSystem G",
                expected: format!("{n}xm"),
                found: shape(g.nrows(), g.ncols()),
            });
        }
        ensure_shape("LtiSystem H", &h, p, p)?;
        for (name, m) in [("A", &a), ("C", &c), ("G", &g), ("H", &h)] {
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!("{name} has non-finite entries")));
            }
        }
        let hh = symmetrize(&(&h * h.transpose()));
        let eig = SymEig::new(&hh);
        if !(eig.min() > 1e-12 * eig.max()) {
            return Err(Error::InvalidInput(format!(
                "HH' is not invertible (eigenvalues in [{:e}, {:e}])",
                eig.min(),
                eig.max()
            )));
        }
        let measurement_precision = eig.map(|l| 1.0 / l);
        let gain_factor = c.transpose() * &measurement_precision;
        let information = symmetrize(&(&gain_factor * &c));
        let process_noise = symmetrize(&(&g * g.transpose()));
        Ok(LtiSystem { a, c, g, h, process_noise, measurement_precision, gain_factor, information })
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.g.ncols()
    }

    pub fn p(&self) -> usize {
        self.c.nrows()
    }

    pub fn a(&self) -> &Mat {
        &self.a
    }

    pub fn c(&self) -> &Mat {
        &self.c
    }

    pub fn g(&self) -> &Mat {
        &self.g
    }

    pub fn h(&self) -> &Mat {
        &self.h
    }

    /// `G G'`.
    pub fn process_noise(&self) -> &Mat {
        &self.process_noise
    }

    /// `(H H')^-1`.
    pub fn measurement_precision(&self) -> &Mat {
        &self.measurement_precision
    }

    /// `C' (H H')^-1`.
    pub fn gain_factor(&self) -> &Mat {
        &self.gain_factor
    }

    /// `C' (H H')^-1 C`.
    pub fn information(&self) -> &Mat {
        &self.information
    }

    /// Smallest eigenvalue of `G G'`.
    pub fn process_noise_floor(&self) -> f64 {
        SymEig::new(&self.process_noise).min()
    }

    /// Numerical rank of the observability matrix `[C; CA; ...; CA^(n-1)]`,
    /// counting singular values above `tol * sigma_max`.
    pub fn observability_rank(&self, tol: f64) -> usize {
        observability_rank(&self.a, &self.c, tol)
    }
}

/// Rank of `[C; CA; ...; CA^(n-1)]` relative to its largest singular value.
pub fn observability_rank(a: &Mat, c: &Mat, tol: f64) -> usize {
    let n = a.nrows();
    let p = c.nrows();
    let mut stacked = Mat::zeros(n * p, n);
    let mut block = c.clone();
    for k in 0..n {
        stacked.view_mut((k * p, 0), (p, n)).copy_from(&block);
        block = &block * a;
    }
    let sv = singular_values(&stacked);
    let hi = sv.first().copied().unwrap_or(0.0);
    sv.iter().filter(|s| **s > tol * hi).count()
}

/// Source of system matrices at a given time. Constant systems return
/// themselves; time-varying coefficients implement this trait.
pub trait SystemModel: Sync {
    fn state_dim(&self) -> usize;
    fn at(&self, t: f64) -> Cow<'_, LtiSystem>;
}

impl SystemModel for LtiSystem {
    fn state_dim(&self) -> usize {
        self.n()
    }

    fn at(&self, _t: f64) -> Cow<'_, LtiSystem> {
        Cow::Borrowed(self)
    }
}

/// Time-varying system built on demand from a closure.
pub struct TimeVaryingSystem<F> {
    n: usize,
    build: F,
}

impl<F> TimeVaryingSystem<F>
where
    F: Fn(f64) -> LtiSystem + Sync,
{
    pub fn new(n: usize, build: F) -> Self {
        TimeVaryingSystem { n, build }
    }
}

impl<F> SystemModel for TimeVaryingSystem<F>
where
    F: Fn(f64) -> LtiSystem + Sync,
{
    fn state_dim(&self) -> usize {
        self.n
    }

    fn at(&self, t: f64) -> Cow<'_, LtiSystem> {
        Cow::Owned((self.build)(t))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FilterState {
    pub x_hat: Vector,
    pub p: SpdMatrix,
    pub t: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementRecord {
    pub t: f64,
    pub y: Vector,
}

impl MeasurementRecord {
    pub fn new(t: f64, y: Vector) -> Result<Self> {
        if !t.is_finite() || y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite measurement at t = {t}")));
        }
        Ok(MeasurementRecord { t, y })
    }
}

pub(crate) fn rhs_matrix(sys: &LtiSystem, p: &Mat) -> Mat {
    let ap = sys.a() * p;
    let pmp = p * sys.information() * p;
    symmetrize(&(&ap + ap.transpose() + sys.process_noise() - pmp))
}

/// Riccati vector field `AP + PA' + GG' - PC'(HH')^-1 CP`.
pub fn riccati_rhs<M: SystemModel + ?Sized>(sys: &M, p: &SpdMatrix, t: f64) -> Result<SpdTangent> {
    let sys = sys.at(t);
    ensure_shape("riccati_rhs P", p.as_matrix(), sys.n(), sys.n())?;
    Ok(SpdTangent::symmetric_part(&rhs_matrix(&sys, p.as_matrix())))
}

/// Linearization of the Riccati field at `P` applied to `dP`:
/// `A dP + dP A' - dP M P - P M dP` with `M = C'(HH')^-1 C`.
pub fn riccati_linearized(sys: &LtiSystem, p: &Mat, dp: &Mat) -> Mat {
    let mp = sys.information() * p;
    let a_dp = sys.a() * dp;
    let dp_mp = dp * &mp;
    symmetrize(&(&a_dp + a_dp.transpose() - &dp_mp - dp_mp.transpose()))
}

fn checked_iterate(m: Mat, t: f64) -> Result<SpdMatrix> {
    SpdMatrix::from_iterate(m).ok_or_else(|| Error::IntegrationFailure {
        t,
        reason: "covariance lost positive definiteness".into(),
    })
}

fn rk4_combine(p: &Mat, k1: &Mat, k2: &Mat, k3: &Mat, k4: &Mat, dt: f64) -> Mat {
    p + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)
}

fn rk4_raw<M: SystemModel + ?Sized>(sys: &M, p: &Mat, k1: Mat, t: f64, dt: f64) -> Mat {
    let mid = sys.at(t + 0.5 * dt);
    let k2 = rhs_matrix(&mid, &(p + &k1 * (0.5 * dt)));
    let k3 = rhs_matrix(&mid, &(p + &k2 * (0.5 * dt)));
    let k4 = rhs_matrix(&sys.at(t + dt), &(p + &k3 * dt));
    rk4_combine(p, &k1, &k2, &k3, &k4, dt)
}

/// One RK4 step of the Riccati flow from `(t, P)`.
pub fn riccati_step<M: SystemModel + ?Sized>(sys: &M, p: &SpdMatrix, t: f64, dt: f64) -> Result<SpdMatrix> {
    let k1 = rhs_matrix(&sys.at(t), p.as_matrix());
    checked_iterate(rk4_raw(sys, p.as_matrix(), k1, t, dt), t + dt)
}

/// Sample times `0, dt, 2dt, ..., t_end`; the last step is shortened when
/// `t_end` is not a multiple of `dt`.
pub fn time_grid(t_end: f64, dt: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::OutOfRange { name: "dt", value: dt, range: "(0, inf)" });
    }
    if !(t_end >= 0.0) || !t_end.is_finite() {
        return Err(Error::OutOfRange { name: "t_end", value: t_end, range: "[0, inf)" });
    }
    let steps = ((t_end / dt) - 1e-9).ceil().max(0.0) as usize;
    let mut times: Vec<f64> = (0..=steps).map(|k| k as f64 * dt).collect();
    if let Some(last) = times.last_mut() {
        *last = last.min(t_end);
    }
    if steps > 0 {
        times[steps] = t_end;
    }
    Ok(times)
}

/// Fixed-step RK4 trajectory of the Riccati flow, sampled at every step.
pub fn integrate_riccati<M: SystemModel + ?Sized>(
    sys: &M,
    p0: &SpdMatrix,
    t_end: f64,
    dt: f64,
) -> Result<Vec<(f64, SpdMatrix)>> {
    ensure_shape("integrate_riccati P0", p0.as_matrix(), sys.state_dim(), sys.state_dim())?;
    let times = time_grid(t_end, dt)?;
    let mut out = Vec::with_capacity(times.len());
    out.push((0.0, p0.clone()));
    for w in times.windows(2) {
        let (t, next) = (w[0], w[1]);
        let current = &out.last().expect("seeded with P0").1;
        let p = riccati_step(sys, current, t, next - t)?;
        out.push((next, p));
    }
    Ok(out)
}

/// Covariance together with a tangent perturbation propagated by the
/// linearized flow, integrated with the same RK4 step.
pub fn integrate_variation(
    sys: &LtiSystem,
    p0: &SpdMatrix,
    dp0: &SpdTangent,
    t_end: f64,
    dt: f64,
) -> Result<Vec<(f64, SpdMatrix, SpdTangent)>> {
    let n = sys.n();
    ensure_shape("integrate_variation P0", p0.as_matrix(), n, n)?;
    ensure_shape("integrate_variation dP0", dp0.as_matrix(), n, n)?;
    let times = time_grid(t_end, dt)?;
    let mut out = Vec::with_capacity(times.len());
    let mut p = p0.as_matrix().clone();
    let mut dp = dp0.as_matrix().clone();
    out.push((0.0, p0.clone(), dp0.clone()));
    for w in times.windows(2) {
        let h = w[1] - w[0];
        let f = |p: &Mat, dp: &Mat| (rhs_matrix(sys, p), riccati_linearized(sys, p, dp));
        let (k1, l1) = f(&p, &dp);
        let (k2, l2) = f(&(&p + &k1 * (0.5 * h)), &(&dp + &l1 * (0.5 * h)));
        let (k3, l3) = f(&(&p + &k2 * (0.5 * h)), &(&dp + &l2 * (0.5 * h)));
        let (k4, l4) = f(&(&p + &k3 * h), &(&dp + &l3 * h));
        let next_p = checked_iterate(rk4_combine(&p, &k1, &k2, &k3, &k4, h), w[1])?;
        dp = symmetrize(&rk4_combine(&dp, &l1, &l2, &l3, &l4, h));
        p = next_p.as_matrix().clone();
        out.push((w[1], next_p, SpdTangent::symmetric_part(&dp)));
    }
    Ok(out)
}

/// Options for [`solve_are_with`].
#[derive(Clone, Debug)]
pub struct AreOptions {
    /// Stop once `||Phi(P)||_F <= tol`.
    pub tol: f64,
    /// Fixed step; `None` picks a step from the stiffness of the current
    /// iterate (see [`stiffness_step`]).
    pub dt: Option<f64>,
    pub max_steps: usize,
}

impl Default for AreOptions {
    fn default() -> Self {
        AreOptions { tol: 1e-10, dt: None, max_steps: 2_000_000 }
    }
}

#[derive(Clone, Debug)]
pub struct AreSolution {
    pub q: SpdMatrix,
    pub residual: f64,
    pub steps: usize,
    /// Time reached by the flow.
    pub t: f64,
    /// `||Phi(P_k)||_F` before each step, ending with the final residual.
    pub residual_history: Vec<f64>,
}

/// Step size `min(0.1, 1 / (2(||A||_F + ||M||_F ||P||_F)))`.
pub fn stiffness_step(sys: &LtiSystem, p: &Mat) -> f64 {
    let scale = 2.0 * (sys.a().norm() + sys.information().norm() * p.norm());
    (1.0 / scale.max(1e-12)).min(0.1)
}

/// Stationary covariance obtained by following the Riccati flow from the
/// identity until the residual drops below `tol`.
pub fn solve_are(sys: &LtiSystem, tol: f64) -> Result<SpdMatrix> {
    solve_are_with(sys, &AreOptions { tol, ..AreOptions::default() }).map(|s| s.q)
}

pub fn solve_are_with(sys: &LtiSystem, opts: &AreOptions) -> Result<AreSolution> {
    if !(opts.tol > 0.0) {
        return Err(Error::OutOfRange { name: "tol", value: opts.tol, range: "(0, inf)" });
    }
    let n = sys.n();
    if sys.observability_rank(1e-10) < n {
        log::warn!("(A, C) is not numerically observable; the ARE solution may not be unique");
    }
    let g_sv = singular_values(sys.g());
    if g_sv.len() < n || g_sv[n - 1] <= 1e-10 * g_sv[0] {
        log::warn!("G is not numerically full rank; convergence may be slow or fail");
    }
    let mut p = Mat::identity(n, n);
    let mut t = 0.0;
    let mut history = Vec::new();
    for step in 0..=opts.max_steps {
        let k1 = rhs_matrix(sys, &p);
        let residual = k1.norm();
        history.push(residual);
        if !residual.is_finite() {
            return Err(Error::IntegrationFailure { t, reason: "residual overflowed".into() });
        }
        if residual <= opts.tol {
            let q = SpdMatrix::new(p).map_err(|e| Error::IntegrationFailure { t, reason: e.to_string() })?;
            return Ok(AreSolution { q, residual, steps: step, t, residual_history: history });
        }
        if step == opts.max_steps {
            return Err(Error::NoConvergence { steps: step, residual });
        }
        let dt = opts.dt.unwrap_or_else(|| stiffness_step(sys, &p));
        p = checked_iterate(rk4_raw(sys, &p, k1, t, dt), t + dt)?.into_matrix();
        t += dt;
    }
    unreachable!("loop returns on its final iteration")
}

/// Kalman gain `P C' (H H')^-1`.
pub fn kalman_gain(sys: &LtiSystem, p: &Mat) -> Mat {
    p * sys.gain_factor()
}

/// Advances the estimate and covariance by one step of length `dt`.
///
/// The estimate takes an RK4 step of `dx/dt = (A - K C) x + K y` with the
/// gain frozen at the covariance from the start of the step; the covariance
/// takes an RK4 step of the Riccati flow. Without a measurement the estimate
/// only follows the dynamics `dx/dt = A x`.
pub fn filter_step<M: SystemModel + ?Sized>(
    sys: &M,
    state: &FilterState,
    y: Option<&MeasurementRecord>,
    dt: f64,
) -> Result<FilterState> {
    if !(dt > 0.0) {
        return Err(Error::OutOfRange { name: "dt", value: dt, range: "(0, inf)" });
    }
    let t = state.t;
    let here = sys.at(t);
    let n = here.n();
    if state.x_hat.len() != n {
        return Err(Error::DimensionMismatch {
            context: "filter_step x_hat",
            expected: n.to_string(),
            found: state.x_hat.len().to_string(),
        });
    }
    ensure_shape("filter_step P", state.p.as_matrix(), n, n)?;
    let correction = match y {
        Some(record) => {
            if record.y.len() != here.p() {
                return Err(Error::DimensionMismatch {
                    context: "filter_step y",
                    expected: here.p().to_string(),
                    found: record.y.len().to_string(),
                });
            }
            Some((kalman_gain(&here, state.p.as_matrix()), here.c().clone(), &record.y))
        }
        None => None,
    };
    let mid = sys.at(t + 0.5 * dt);
    let end = sys.at(t + dt);
    let field = |a: &Mat, x: &Vector| -> Vector {
        let mut v = a * x;
        if let Some((k, c, y)) = &correction {
            v += k * (*y - c * x);
        }
        v
    };
    let x = &state.x_hat;
    let k1 = field(here.a(), x);
    let k2 = field(mid.a(), &(x + &k1 * (0.5 * dt)));
    let k3 = field(mid.a(), &(x + &k2 * (0.5 * dt)));
    let k4 = field(end.a(), &(x + &k3 * dt));
    let x_next = x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
    if x_next.iter().any(|v| !v.is_finite()) {
        return Err(Error::IntegrationFailure { t: t + dt, reason: "state estimate overflowed".into() });
    }
    let p_next = riccati_step(sys, &state.p, t, dt)?;
    Ok(FilterState { x_hat: x_next, p: p_next, t: t + dt })
}

/// `max |P - P'|` relative to `1 + max |P|`.
pub fn relative_asymmetry(p: &Mat) -> f64 {
    crate::linalg::asymmetry(p) / (1.0 + max_abs(p))
}

/// Whether a Cholesky factorization exists; a cheap positive-definiteness probe.
pub fn is_positive_definite(p: &Mat) -> bool {
    Cholesky::new(symmetrize(p)).is_some()
}
