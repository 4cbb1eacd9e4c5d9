//! Contraction experiments: propagate pairs of solutions, record their
//! distance over time, fit exponential rates, and compare against analytic
//! bounds.

use crate::error::{Error, Result};
use crate::fixed_rank::{approx_distance_parts, grassmann_distance, FixedRankPsd, StiefelFrame};
use crate::linalg::{asymmetry, max_abs, qf, Mat, SymEig};
use crate::lowrank::{
    dominant_subspace, eigen_gap, integrate_lowrank, integrate_oja, lowrank_riccati_rhs, LowRankConfig,
};
use crate::par;
use crate::random;
use crate::riccati::{integrate_riccati, observability_rank, LtiSystem, SystemModel};
use crate::spd::{distance_spd, SpdMatrix};

/// Distances between two trajectories sampled on a common time grid.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceSeries {
    pub metric_name: String,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// Subspace part of a low-rank distance, when applicable.
    pub grassmann_component: Option<Vec<f64>>,
    /// Cone part of a low-rank distance, when applicable.
    pub cone_component: Option<Vec<f64>>,
}

impl DistanceSeries {
    pub fn new(metric_name: impl Into<String>, times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::InvalidInput(format!(
                "series has {} times but {} values",
                times.len(),
                values.len()
            )));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput("series times must be strictly increasing".into()));
        }
        if values.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidInput("series values must be finite and non-negative".into()));
        }
        Ok(DistanceSeries {
            metric_name: metric_name.into(),
            times,
            values,
            grassmann_component: None,
            cone_component: None,
        })
    }

    pub fn with_components(mut self, grassmann: Vec<f64>, cone: Vec<f64>) -> Result<Self> {
        if grassmann.len() != self.len() || cone.len() != self.len() {
            return Err(Error::InvalidInput("component lengths differ from the series".into()));
        }
        self.grassmann_component = Some(grassmann);
        self.cone_component = Some(cone);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn initial(&self) -> f64 {
        self.values[0]
    }

    pub fn last(&self) -> f64 {
        self.values[self.len() - 1]
    }

    pub fn max_deviation_from_initial(&self) -> f64 {
        let d0 = self.initial();
        self.values.iter().fold(0.0_f64, |m, v| m.max((v - d0).abs()))
    }

    /// Window covering the last `fraction` of the samples.
    pub fn tail_window(&self, fraction: f64) -> (f64, f64) {
        tail_of(&self.times, self.len(), fraction)
    }

    /// Like [`Self::tail_window`], restricted to the prefix of samples that
    /// stay above `floor`.
    pub fn tail_window_above(&self, fraction: f64, floor: f64) -> (f64, f64) {
        let prefix = self.values.iter().rposition(|v| *v > floor).map_or(0, |i| i + 1);
        tail_of(&self.times, prefix.max(1), fraction)
    }

    pub fn is_identically_zero(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }

    /// Copy of the series with `values` replaced by the cone component.
    pub fn cone_series(&self) -> Option<DistanceSeries> {
        self.cone_component.as_ref().map(|c| DistanceSeries {
            metric_name: format!("{}-cone", self.metric_name),
            times: self.times.clone(),
            values: c.clone(),
            grassmann_component: None,
            cone_component: None,
        })
    }
}

fn tail_of(times: &[f64], prefix: usize, fraction: f64) -> (f64, f64) {
    let fraction = fraction.clamp(0.0, 1.0);
    let start = ((prefix as f64) * (1.0 - fraction)).floor() as usize;
    let start = start.min(prefix - 1);
    (times[start], times[prefix - 1])
}

/// Least-squares fit of `log d(t) = intercept - rate * t` over a window.
#[derive(Clone, Debug, PartialEq)]
pub struct DecayFit {
    pub rate: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub window: (f64, f64),
    pub samples: usize,
}

pub const MIN_FIT_SAMPLES: usize = 5;

/// Ordinary least squares of `log(values)` on `times` inside `window`; the
/// rate is the negated slope. A series with no variation in the window has
/// `r_squared = 1`.
pub fn fit_exponential_rate(series: &DistanceSeries, window: (f64, f64)) -> Result<DecayFit> {
    let (t0, t1) = window;
    if series.is_empty() {
        return Err(Error::Fit("empty series".into()));
    }
    let slack = 1e-9 * (1.0 + series.times[series.len() - 1].abs());
    if !(t0 < t1) || t0 < series.times[0] - slack || t1 > series.times[series.len() - 1] + slack {
        return Err(Error::Fit(format!(
            "window ({t0}, {t1}) is not inside the series range ({}, {})",
            series.times[0],
            series.times[series.len() - 1]
        )));
    }
    let points: Vec<(f64, f64)> = series
        .times
        .iter()
        .zip(series.values.iter())
        .filter(|(t, _)| **t >= t0 - slack && **t <= t1 + slack)
        .map(|(t, v)| (*t, *v))
        .collect();
    if points.len() < MIN_FIT_SAMPLES {
        return Err(Error::Fit(format!(
            "{} samples in window, need at least {MIN_FIT_SAMPLES}",
            points.len()
        )));
    }
    if let Some((t, v)) = points.iter().find(|(_, v)| !(*v > 0.0) || *v < 1e-300) {
        return Err(Error::Fit(format!("non-positive value {v:e} at t = {t}")));
    }
    let count = points.len() as f64;
    let mean_t = points.iter().map(|p| p.0).sum::<f64>() / count;
    let mean_y = points.iter().map(|p| p.1.ln()).sum::<f64>() / count;
    let (mut stt, mut sty, mut syy) = (0.0, 0.0, 0.0);
    for (t, v) in &points {
        let (dt, dy) = (t - mean_t, v.ln() - mean_y);
        stt += dt * dt;
        sty += dt * dy;
        syy += dy * dy;
    }
    let slope = sty / stt;
    let intercept = mean_y - slope * mean_t;
    let ss_res: f64 = points
        .iter()
        .map(|(t, v)| (v.ln() - (intercept + slope * t)).powi(2))
        .sum();
    let r_squared = if syy <= f64::MIN_POSITIVE { 1.0 } else { (1.0 - ss_res / syy).clamp(0.0, 1.0) };
    Ok(DecayFit { rate: -slope, intercept, r_squared, window, samples: points.len() })
}

/// The flow under which a pair of solutions is propagated.
#[derive(Clone, Copy)]
pub enum Flow<'a> {
    /// Full Riccati flow on the SPD cone.
    FullRiccati(&'a dyn SystemModel),
    /// Coupled subspace / projected Riccati flow on fixed-rank PSD matrices.
    LowRank { sys: &'a LtiSystem, mu: f64 },
    /// Subspace flow alone on the Stiefel manifold.
    Subspace { a: &'a Mat },
}

#[derive(Clone, Debug, PartialEq)]
pub enum FlowState {
    Full(SpdMatrix),
    LowRank(FixedRankPsd),
    Subspace(StiefelFrame),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Metric {
    /// Natural distance of the SPD cone.
    Spd,
    /// Approximate fixed-rank distance (Grassmann plus aligned cone).
    Approx,
    /// Grassmann distance between spans.
    Grassmann,
}

impl Metric {
    pub fn name(&self) -> &'static str {
        match self {
            Metric::Spd => "spd",
            Metric::Approx => "approx-fixed-rank",
            Metric::Grassmann => "grassmann",
        }
    }
}

enum Trajectory {
    Full(Vec<(f64, SpdMatrix)>),
    LowRank(Vec<(f64, FixedRankPsd)>),
    Subspace(Vec<(f64, StiefelFrame)>),
}

fn propagate(flow: Flow<'_>, start: &FlowState, t_end: f64, dt: f64) -> Result<Trajectory> {
    match (flow, start) {
        (Flow::FullRiccati(sys), FlowState::Full(p)) => integrate_riccati(sys, p, t_end, dt).map(Trajectory::Full),
        (Flow::LowRank { sys, mu }, FlowState::LowRank(x)) => {
            let cfg = LowRankConfig::new(mu, dt, x.r())?;
            integrate_lowrank(sys, x, &cfg, t_end).map(Trajectory::LowRank)
        }
        (Flow::Subspace { a }, FlowState::Subspace(u)) => integrate_oja(a, u, t_end, dt).map(Trajectory::Subspace),
        _ => Err(Error::InvalidInput("start state does not live on the flow's state space".into())),
    }
}

/// Integrates both starts with identical steppers and records `metric`
/// between them at every sample.
pub fn pairwise_distance_series(
    flow: Flow<'_>,
    start1: &FlowState,
    start2: &FlowState,
    metric: Metric,
    t_end: f64,
    dt: f64,
) -> Result<DistanceSeries> {
    let compatible = matches!(
        (flow, metric),
        (Flow::FullRiccati(_), Metric::Spd)
            | (Flow::LowRank { .. }, Metric::Approx | Metric::Grassmann)
            | (Flow::Subspace { .. }, Metric::Grassmann)
    );
    if !compatible {
        return Err(Error::InvalidInput(format!("metric {} does not fit this flow", metric.name())));
    }
    let (first, second) = par::join(
        || propagate(flow, start1, t_end, dt),
        || propagate(flow, start2, t_end, dt),
    );
    match (first?, second?) {
        (Trajectory::Full(a), Trajectory::Full(b)) => {
            let values = par::map_indices(a.len(), |i| distance_spd(&a[i].1, &b[i].1));
            let values = values.into_iter().collect::<Result<Vec<_>>>()?;
            DistanceSeries::new(metric.name(), a.iter().map(|s| s.0).collect(), values)
        }
        (Trajectory::LowRank(a), Trajectory::LowRank(b)) => {
            let times = a.iter().map(|s| s.0).collect();
            if metric == Metric::Grassmann {
                let values = par::map_indices(a.len(), |i| grassmann_distance(a[i].1.u(), b[i].1.u()));
                return DistanceSeries::new(metric.name(), times, values.into_iter().collect::<Result<_>>()?);
            }
            let parts = par::map_indices(a.len(), |i| approx_distance_parts(&a[i].1, &b[i].1));
            let parts = parts.into_iter().collect::<Result<Vec<_>>>()?;
            DistanceSeries::new(metric.name(), times, parts.iter().map(|p| p.total).collect())?.with_components(
                parts.iter().map(|p| p.grassmann).collect(),
                parts.iter().map(|p| p.cone).collect(),
            )
        }
        (Trajectory::Subspace(a), Trajectory::Subspace(b)) => {
            let values = par::map_indices(a.len(), |i| grassmann_distance(&a[i].1, &b[i].1));
            let values = values.into_iter().collect::<Result<Vec<_>>>()?;
            DistanceSeries::new(metric.name(), a.iter().map(|s| s.0).collect(), values)
        }
        _ => unreachable!("both trajectories come from the same flow"),
    }
}

/// Settings for [`check_riccati_contraction`].
#[derive(Clone, Debug)]
pub struct RiccatiContractionOptions {
    /// Relative slack on the bound, absorbing discretization error.
    pub slack: f64,
    /// Distances below this are at the round-off level of the distance
    /// evaluation and are not compared.
    pub round_off_floor: f64,
}

impl Default for RiccatiContractionOptions {
    fn default() -> Self {
        RiccatiContractionOptions { slack: 0.05, round_off_floor: 1e-12 }
    }
}

#[derive(Clone, Debug)]
pub struct RiccatiContractionReport {
    pub series: DistanceSeries,
    /// Lower bound on the eigenvalues of `GG'`.
    pub mu: f64,
    /// Largest eigenvalue over both covariances at each sample.
    pub p_max: Vec<f64>,
    /// `d(0) exp(-int_0^t mu / p_max(s) ds)`.
    pub bound: Vec<f64>,
    /// `max_t d(t) / B(t)` over samples above the round-off floor.
    pub worst_ratio: f64,
    pub slack: f64,
    pub passed: bool,
}

/// Checks `d(t) <= d(0) exp(-int mu/p_max) (1 + slack)` along two Riccati
/// trajectories, with `mu` the smallest eigenvalue of `GG'`.
pub fn check_riccati_contraction(
    sys: &LtiSystem,
    p1: &SpdMatrix,
    p2: &SpdMatrix,
    t_end: f64,
    dt: f64,
    opts: &RiccatiContractionOptions,
) -> Result<RiccatiContractionReport> {
    let mu = sys.process_noise_floor();
    let scale = max_abs(sys.process_noise()).max(1.0);
    if !(mu > 1e-14 * scale) {
        return Err(Error::Precondition(format!(
            "process noise GG' must be positive definite (smallest eigenvalue {mu:e})"
        )));
    }
    let (a, b) = par::join(|| integrate_riccati(sys, p1, t_end, dt), || integrate_riccati(sys, p2, t_end, dt));
    let (a, b) = (a?, b?);
    let per_sample = par::map_indices(a.len(), |i| -> Result<(f64, f64)> {
        let d = distance_spd(&a[i].1, &b[i].1)?;
        Ok((d, a[i].1.max_eigenvalue().max(b[i].1.max_eigenvalue())))
    });
    let per_sample = per_sample.into_iter().collect::<Result<Vec<_>>>()?;
    let times: Vec<f64> = a.iter().map(|s| s.0).collect();
    let values: Vec<f64> = per_sample.iter().map(|s| s.0).collect();
    let p_max: Vec<f64> = per_sample.iter().map(|s| s.1).collect();

    let d0 = values[0];
    let mut bound = Vec::with_capacity(values.len());
    let mut exponent = 0.0;
    bound.push(d0);
    for i in 1..times.len() {
        exponent += 0.5 * (times[i] - times[i - 1]) * (mu / p_max[i] + mu / p_max[i - 1]);
        bound.push(d0 * (-exponent).exp());
    }
    let mut worst_ratio = 0.0_f64;
    let mut passed = true;
    for (d, b) in values.iter().zip(bound.iter()) {
        if *d <= opts.round_off_floor {
            continue;
        }
        worst_ratio = worst_ratio.max(d / b);
        if *d > b * (1.0 + opts.slack) {
            passed = false;
        }
    }
    let series = DistanceSeries::new(Metric::Spd.name(), times, values)?;
    Ok(RiccatiContractionReport { series, mu, p_max, bound, worst_ratio, slack: opts.slack, passed })
}

/// Settings for [`check_subspace_rate`].
#[derive(Clone, Debug)]
pub struct SubspaceRateOptions {
    /// Pass when `measured rate / gap >= ratio_threshold`.
    pub ratio_threshold: f64,
    /// Gaps below `min_relative_gap * max|lambda|` are rejected as degenerate.
    pub min_relative_gap: f64,
    pub tail_fraction: f64,
    pub floor: f64,
    pub seed: u64,
}

impl Default for SubspaceRateOptions {
    fn default() -> Self {
        SubspaceRateOptions {
            ratio_threshold: 0.9,
            min_relative_gap: 1e-6,
            tail_fraction: 0.5,
            floor: 1e-11,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SubspaceRateReport {
    /// Eigen-gap of the symmetric part, the predicted local rate.
    pub gap: f64,
    pub lambda_r: f64,
    pub lambda_next: f64,
    /// Grassmann distance to the dominant subspace over time.
    pub series: DistanceSeries,
    pub fit: DecayFit,
    /// Measured rate divided by the gap.
    pub ratio: f64,
    pub passed: bool,
}

/// Perturbs the dominant subspace of `A` by a random horizontal direction of
/// Frobenius norm `delta`, follows the subspace flow, and compares the fitted
/// decay rate of the Grassmann distance with the eigen-gap.
pub fn check_subspace_rate(
    a: &Mat,
    r: usize,
    delta: f64,
    t_end: f64,
    dt: f64,
    opts: &SubspaceRateOptions,
) -> Result<SubspaceRateReport> {
    let (gap, lambda_r, lambda_next) = eigen_gap(a, r)?;
    let scale = SymEig::new(&((a + a.transpose()) * 0.5)).values.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if !(gap > opts.min_relative_gap * scale.max(f64::MIN_POSITIVE)) {
        return Err(Error::DegenerateGap { lambda_r, lambda_next });
    }
    if !(delta > 0.0) {
        return Err(Error::OutOfRange { name: "delta", value: delta, range: "(0, inf)" });
    }
    let target = dominant_subspace(a, r)?;
    let mut rng = random::rng(opts.seed);
    let direction = target.project_out(&random::gaussian_matrix(&mut rng, a.nrows(), r));
    let norm = direction.norm();
    if !(norm > 0.0) {
        return Err(Error::InvalidInput("perturbation direction vanished".into()));
    }
    let start = StiefelFrame::new(qf(&(target.as_matrix() + direction * (delta / norm))))?;
    let trajectory = integrate_oja(a, &start, t_end, dt)?;
    let values = par::map_indices(trajectory.len(), |i| grassmann_distance(&trajectory[i].1, &target));
    let values = values.into_iter().collect::<Result<Vec<_>>>()?;
    let series = DistanceSeries::new("grassmann-to-dominant", trajectory.iter().map(|s| s.0).collect(), values)?;
    let fit = fit_exponential_rate(&series, series.tail_window_above(opts.tail_fraction, opts.floor))?;
    let ratio = fit.rate / gap;
    Ok(SubspaceRateReport {
        gap,
        lambda_r,
        lambda_next,
        series,
        fit,
        ratio,
        passed: ratio >= opts.ratio_threshold,
    })
}

#[derive(Clone, Debug)]
pub struct ConstantDistanceReport {
    pub series: DistanceSeries,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Follows two frames under the subspace flow and checks that their
/// Grassmann distance never moves more than `tolerance` from its initial
/// value. Skew-symmetric `A` gives a rigid rotation with this property.
pub fn check_constant_distance(
    a: &Mat,
    u1: &StiefelFrame,
    u2: &StiefelFrame,
    t_end: f64,
    dt: f64,
    tolerance: f64,
) -> Result<ConstantDistanceReport> {
    let series = pairwise_distance_series(
        Flow::Subspace { a },
        &FlowState::Subspace(u1.clone()),
        &FlowState::Subspace(u2.clone()),
        Metric::Grassmann,
        t_end,
        dt,
    )?;
    let max_deviation = series.max_deviation_from_initial();
    Ok(ConstantDistanceReport { series, max_deviation, tolerance, passed: max_deviation < tolerance })
}

/// Settings for [`check_eventual_contraction`].
#[derive(Clone, Debug)]
pub struct EventualContractionOptions {
    /// Required Grassmann distance to the dominant subspace at `t_end`.
    pub angle_tol: f64,
    /// Required fit quality of the aligned cone distance on the tail window.
    pub min_r_squared: f64,
    /// Required Frobenius norm of the projected Riccati field at `t_end`.
    pub residual_tol: f64,
    pub tail_fraction: f64,
    /// Cone distances below this are treated as converged to round-off.
    pub floor: f64,
}

impl Default for EventualContractionOptions {
    fn default() -> Self {
        EventualContractionOptions {
            angle_tol: 1e-6,
            min_r_squared: 0.99,
            residual_tol: 1e-6,
            tail_fraction: 0.5,
            floor: 1e-10,
        }
    }
}

#[derive(Clone, Debug)]
pub struct EventualContractionReport {
    /// Approximate distance between the two trajectories, with components.
    pub pair_series: DistanceSeries,
    /// Grassmann distance from the first trajectory's span to the dominant subspace.
    pub subspace_series: DistanceSeries,
    /// Largest distance to the dominant subspace at `t_end` over both trajectories.
    pub final_angle: f64,
    /// Fit of the aligned cone distance; `None` when the two runs coincide.
    pub cone_fit: Option<DecayFit>,
    /// Largest projected Riccati residual at `t_end` over both trajectories.
    pub residual: f64,
    /// Whether `(A_U, C_U)` is observable at the limit frame.
    pub observable: bool,
    pub passed: bool,
}

/// Runs the coupled low-rank flow from two starts for symmetric `A` and
/// checks that the spans reach the dominant subspace, the aligned factors
/// converge to each other log-linearly, and the limit solves the projected
/// algebraic Riccati equation.
pub fn check_eventual_contraction(
    sys: &LtiSystem,
    mu: f64,
    x1: &FixedRankPsd,
    x2: &FixedRankPsd,
    t_end: f64,
    dt: f64,
    opts: &EventualContractionOptions,
) -> Result<EventualContractionReport> {
    let a = sys.a();
    if asymmetry(a) > 1e-12 * (1.0 + max_abs(a)) {
        return Err(Error::Precondition("A must be symmetric".into()));
    }
    let eig = SymEig::new(a);
    let scale = eig.values.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let min_split = eig.values.as_slice().windows(2).map(|w| w[0] - w[1]).fold(f64::INFINITY, f64::min);
    if !(min_split > 1e-9 * scale) {
        return Err(Error::Precondition(format!(
            "A must have distinct eigenvalues (closest pair {min_split:e} apart)"
        )));
    }
    if x1.r() != x2.r() || x1.n() != x2.n() {
        return Err(Error::DimensionMismatch {
            context: "check_eventual_contraction starts",
            expected: format!("n = {}, r = {}", x1.n(), x1.r()),
            found: format!("n = {}, r = {}", x2.n(), x2.r()),
        });
    }
    let r = x1.r();
    let target = dominant_subspace(a, r)?;
    let cfg = LowRankConfig::new(mu, dt, r)?;
    let (first, second) = par::join(
        || integrate_lowrank(sys, x1, &cfg, t_end),
        || integrate_lowrank(sys, x2, &cfg, t_end),
    );
    let (first, second) = (first?, second?);
    let times: Vec<f64> = first.iter().map(|s| s.0).collect();

    let parts = par::map_indices(first.len(), |i| approx_distance_parts(&first[i].1, &second[i].1));
    let parts = parts.into_iter().collect::<Result<Vec<_>>>()?;
    let pair_series = DistanceSeries::new(Metric::Approx.name(), times.clone(), parts.iter().map(|p| p.total).collect())?
        .with_components(parts.iter().map(|p| p.grassmann).collect(), parts.iter().map(|p| p.cone).collect())?;

    let to_target = par::map_indices(first.len(), |i| grassmann_distance(first[i].1.u(), &target));
    let subspace_series = DistanceSeries::new("grassmann-to-dominant", times, to_target.into_iter().collect::<Result<_>>()?)?;

    let (end1, end2) = (&first[first.len() - 1].1, &second[second.len() - 1].1);
    let final_angle = grassmann_distance(end1.u(), &target)?.max(grassmann_distance(end2.u(), &target)?);
    let residual = lowrank_riccati_rhs(sys, end1, mu)?.norm().max(lowrank_riccati_rhs(sys, end2, mu)?.norm());
    let u_inf = end1.u().as_matrix();
    let observable = observability_rank(&(u_inf.transpose() * a * u_inf), &(sys.c() * u_inf), 1e-10) == r;

    let cone = pair_series.cone_series().expect("components were attached");
    let cone_fit = if cone.values.iter().all(|v| *v <= opts.floor) {
        None
    } else {
        Some(fit_exponential_rate(&cone, cone.tail_window_above(opts.tail_fraction, opts.floor))?)
    };
    let cone_ok = cone_fit
        .as_ref()
        .is_none_or(|f| f.rate > 0.0 && f.r_squared >= opts.min_r_squared);
    let passed = final_angle < opts.angle_tol && cone_ok && residual < opts.residual_tol && observable;
    Ok(EventualContractionReport {
        pair_series,
        subspace_series,
        final_angle,
        cone_fit,
        residual,
        observable,
        passed,
    })
}
