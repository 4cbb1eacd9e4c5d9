mod common;

use common::{mat, scalar_system};
use nalgebra::DVector;
use riccati_geo::contraction::{
    check_constant_distance, check_eventual_contraction, check_riccati_contraction, check_subspace_rate,
    fit_exponential_rate, pairwise_distance_series, DistanceSeries, EventualContractionOptions, Flow, FlowState,
    Metric, RiccatiContractionOptions, SubspaceRateOptions,
};
use riccati_geo::fixed_rank::{FixedRankPsd, StiefelFrame};
use riccati_geo::linalg::Mat;
use riccati_geo::random;
use riccati_geo::riccati::{integrate_riccati, LtiSystem};
use riccati_geo::spd::SpdMatrix;
use riccati_geo::Error;

fn synthetic(rate: f64, amplitude: f64) -> DistanceSeries {
    let times: Vec<f64> = (0..=200).map(|i| i as f64 * 0.05).collect();
    let values = times.iter().map(|t| amplitude * (-rate * t).exp()).collect();
    DistanceSeries::new("synthetic", times, values).unwrap()
}

fn diag(values: &[f64]) -> Mat {
    Mat::from_diagonal(&DVector::from_row_slice(values))
}

fn coordinate_sensors(n: usize, k: usize) -> Mat {
    Mat::from_fn(k, n, |i, j| if i == j { 1.0 } else { 0.0 })
}

fn observable_system(seed: u64, n: usize) -> LtiSystem {
    let mut rng = random::rng(seed);
    let spectrum: Vec<f64> = (0..n).map(|i| 0.5 - i as f64 * 0.4).collect();
    let a = random::with_symmetric_spectrum(&mut rng, &spectrum, 0.5);
    let c = random::gaussian_matrix(&mut rng, 2, n);
    let sys = LtiSystem::new(a, c, Mat::identity(n, n), Mat::identity(2, 2)).unwrap();
    assert_eq!(sys.observability_rank(1e-10), n);
    sys
}

#[test]
fn fit_recovers_planted_rates() {
    for rate in [0.3, 2.0, 7.5] {
        let series = synthetic(rate, 4.0);
        let fit = fit_exponential_rate(&series, series.tail_window(0.5)).unwrap();
        assert!((fit.rate - rate).abs() < 1e-10 * rate, "{fit:?}");
        assert!((fit.intercept - 4.0_f64.ln()).abs() < 1e-9);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        assert_eq!(fit.samples, 101);
    }
    let constant = synthetic(0.0, 1.5);
    let fit = fit_exponential_rate(&constant, (0.0, 10.0)).unwrap();
    assert!(fit.rate.abs() < 1e-15);
    assert_eq!(fit.r_squared, 1.0);
}

#[test]
fn fit_rejects_bad_windows_and_values() {
    let series = synthetic(1.0, 1.0);
    assert!(matches!(fit_exponential_rate(&series, (9.9, 10.0)), Err(Error::Fit(_))));
    assert!(matches!(fit_exponential_rate(&series, (-1.0, 5.0)), Err(Error::Fit(_))));
    assert!(matches!(fit_exponential_rate(&series, (5.0, 2.0)), Err(Error::Fit(_))));
    let zeros = DistanceSeries::new("z", vec![0.0, 1.0, 2.0, 3.0, 4.0], vec![1.0, 0.5, 0.0, 0.1, 0.1]).unwrap();
    assert!(matches!(fit_exponential_rate(&zeros, (0.0, 4.0)), Err(Error::Fit(_))));
}

#[test]
fn series_validation_and_windows() {
    assert!(DistanceSeries::new("x", vec![0.0, 1.0], vec![1.0]).is_err());
    assert!(DistanceSeries::new("x", vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
    assert!(DistanceSeries::new("x", vec![0.0, 1.0], vec![1.0, -1.0]).is_err());
    let series = DistanceSeries::new("x", (0..10).map(f64::from).collect(), vec![
        1.0, 0.5, 0.25, 0.1, 1e-3, 1e-5, 1e-13, 1e-15, 0.0, 1e-16,
    ])
    .unwrap();
    assert_eq!(series.tail_window(0.5), (5.0, 9.0));
    assert_eq!(series.tail_window_above(0.5, 1e-12), (3.0, 5.0));
}

#[test]
fn identical_starts_give_zero_series() {
    let sys = observable_system(1, 3);
    let start = FlowState::Full(SpdMatrix::identity(3));
    let series = pairwise_distance_series(Flow::FullRiccati(&sys), &start, &start, Metric::Spd, 1.0, 1e-2).unwrap();
    assert!(series.is_identically_zero());

    let mut rng = random::rng(2);
    let x = random::fixed_rank(&mut rng, 5, 2, 0.5);
    let low = observable_system(3, 5);
    let flow = Flow::LowRank { sys: &low, mu: 1.0 };
    let start = FlowState::LowRank(x);
    let series = pairwise_distance_series(flow, &start, &start, Metric::Approx, 1.0, 1e-2).unwrap();
    assert!(series.is_identically_zero());
    assert!(series.grassmann_component.unwrap().iter().all(|v| *v == 0.0));
}

#[test]
fn scaled_identity_pair_matches_closed_form() {
    let n = 3;
    let sys = LtiSystem::new(Mat::zeros(n, n), Mat::zeros(1, n), Mat::identity(n, n), mat(1, 1, &[1.0])).unwrap();
    let series = pairwise_distance_series(
        Flow::FullRiccati(&sys),
        &FlowState::Full(SpdMatrix::identity(n)),
        &FlowState::Full(SpdMatrix::scaled_identity(n, 2.0).unwrap()),
        Metric::Spd,
        5.0,
        1e-2,
    )
    .unwrap();
    for (t, d) in series.times.iter().zip(series.values.iter()) {
        let exact = (n as f64).sqrt() * ((2.0 + t) / (1.0 + t)).ln();
        assert!((d - exact).abs() < 1e-12, "t = {t}");
    }
    assert!(series.values.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn metric_must_match_flow() {
    let sys = observable_system(4, 3);
    let start = FlowState::Full(SpdMatrix::identity(3));
    assert!(pairwise_distance_series(Flow::FullRiccati(&sys), &start, &start, Metric::Grassmann, 1.0, 0.1).is_err());
    let a = Mat::identity(3, 3);
    let u = FlowState::Subspace(StiefelFrame::leading(3, 1).unwrap());
    assert!(pairwise_distance_series(Flow::Subspace { a: &a }, &start, &u, Metric::Grassmann, 1.0, 0.1).is_err());
}

#[test]
fn scalar_pair_decays_at_least_at_the_bound_rate() {
    let sys = scalar_system(0.0, 1.0, 1.0, 1.0);
    let (p1, p2) = (SpdMatrix::from_diagonal(&[3.0]).unwrap(), SpdMatrix::from_diagonal(&[0.5]).unwrap());
    let series = pairwise_distance_series(
        Flow::FullRiccati(&sys),
        &FlowState::Full(p1.clone()),
        &FlowState::Full(p2.clone()),
        Metric::Spd,
        5.0,
        1e-3,
    )
    .unwrap();
    let window = series.tail_window(0.5);
    let fit = fit_exponential_rate(&series, window).unwrap();
    let p_max = integrate_riccati(&sys, &p1, 5.0, 1e-3)
        .unwrap()
        .iter()
        .chain(integrate_riccati(&sys, &p2, 5.0, 1e-3).unwrap().iter())
        .filter(|(t, _)| *t >= window.0 - 1e-9)
        .map(|(_, p)| p.max_eigenvalue())
        .fold(0.0_f64, f64::max);
    assert!(fit.rate >= 1.0 / p_max, "{} vs {}", fit.rate, 1.0 / p_max);
}

#[test]
fn riccati_contraction_bound_holds() {
    let sys = scalar_system(0.0, 1.0, 1.0, 1.0);
    let report = check_riccati_contraction(
        &sys,
        &SpdMatrix::from_diagonal(&[3.0]).unwrap(),
        &SpdMatrix::from_diagonal(&[0.5]).unwrap(),
        20.0,
        1e-3,
        &RiccatiContractionOptions::default(),
    )
    .unwrap();
    assert!(report.passed, "worst ratio {}", report.worst_ratio);
    assert_eq!(report.mu, 1.0);
    assert!(report.bound.windows(2).all(|w| w[1] <= w[0]));
    assert_eq!(report.bound.len(), report.series.len());

    let sys = observable_system(5, 4);
    let mut rng = random::rng(6);
    let report = check_riccati_contraction(
        &sys,
        &random::spd(&mut rng, 4, 1.0),
        &random::spd(&mut rng, 4, 1.0),
        20.0,
        1e-3,
        &RiccatiContractionOptions::default(),
    )
    .unwrap();
    assert!(report.passed, "worst ratio {}", report.worst_ratio);
    assert!(report.bound.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn riccati_contraction_requires_process_noise() {
    let sys = LtiSystem::new(Mat::zeros(2, 2), coordinate_sensors(2, 1), Mat::zeros(2, 1), mat(1, 1, &[1.0])).unwrap();
    let p = SpdMatrix::identity(2);
    let err = check_riccati_contraction(&sys, &p, &p, 1.0, 1e-2, &RiccatiContractionOptions::default());
    assert!(matches!(err, Err(Error::Precondition(_))));
}

#[test]
fn subspace_rate_matches_gap() {
    let report = check_subspace_rate(&diag(&[4.0, 2.0, 1.0]), 1, 1e-3, 10.0, 1e-3, &SubspaceRateOptions::default())
        .unwrap();
    assert_eq!(report.gap, 2.0);
    assert!((report.ratio - 1.0).abs() < 0.1, "{:?}", report.fit);
    assert!(report.passed);
    assert!(report.fit.r_squared > 0.999);
}

#[test]
fn subspace_rate_rejects_degenerate_gaps() {
    let opts = SubspaceRateOptions::default();
    let near = check_subspace_rate(&diag(&[3.0, 3.0 - 1e-9, 1.0]), 1, 1e-3, 1.0, 1e-2, &opts);
    assert!(matches!(near, Err(Error::DegenerateGap { .. })));
    let skew = mat(3, 3, &[0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    assert!(matches!(check_subspace_rate(&skew, 1, 1e-3, 1.0, 1e-2, &opts), Err(Error::DegenerateGap { .. })));
}

#[test]
fn skew_flow_keeps_grassmann_distance_constant() {
    let a = mat(3, 3, &[0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
    let u1 = StiefelFrame::orthonormalize(&mat(3, 1, &[1.0, 0.0, 0.5])).unwrap();
    let u2 = StiefelFrame::orthonormalize(&mat(3, 1, &[0.0, 1.0, 0.1])).unwrap();
    let report = check_constant_distance(&a, &u1, &u2, 10.0, 1e-3, 1e-9).unwrap();
    assert!(report.passed, "{:e}", report.max_deviation);
    assert!(report.series.initial() > 0.5);
}

fn eventual_system() -> LtiSystem {
    LtiSystem::new(diag(&[5.0, 4.0, 3.0, 2.0, 1.0]), coordinate_sensors(5, 2), Mat::identity(5, 5), Mat::identity(2, 2))
        .unwrap()
}

#[test]
fn eventual_contraction_on_diagonal_system() {
    let sys = eventual_system();
    let mut rng = random::rng(7);
    let x1 = random::fixed_rank(&mut rng, 5, 2, 0.5);
    let x2 = random::fixed_rank(&mut rng, 5, 2, 0.5);
    let report = check_eventual_contraction(&sys, 1.0, &x1, &x2, 30.0, 1e-2, &EventualContractionOptions::default())
        .unwrap();
    let fit = report.cone_fit.clone().unwrap();
    assert!(report.passed, "angle {:e} residual {:e} fit {fit:?}", report.final_angle, report.residual);
    assert!(fit.r_squared >= 0.99 && fit.rate > 0.0);
    assert!(report.final_angle < 1e-6 && report.residual < 1e-6 && report.observable);
}

#[test]
fn eventual_contraction_trivial_for_identical_starts() {
    let sys = eventual_system();
    let mut rng = random::rng(8);
    let x = random::fixed_rank(&mut rng, 5, 2, 0.5);
    let report = check_eventual_contraction(&sys, 1.0, &x, &x, 30.0, 1e-2, &EventualContractionOptions::default())
        .unwrap();
    assert!(report.pair_series.is_identically_zero());
    assert!(report.cone_fit.is_none());
    assert!(report.passed);
}

#[test]
fn eventual_contraction_preconditions() {
    let mut rng = random::rng(9);
    let x = random::fixed_rank(&mut rng, 3, 1, 0.5);
    let opts = EventualContractionOptions::default();
    let skewed = LtiSystem::new(mat(3, 3, &[1.0, 2.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.5]), coordinate_sensors(3, 1), Mat::identity(3, 3), mat(1, 1, &[1.0])).unwrap();
    assert!(matches!(check_eventual_contraction(&skewed, 1.0, &x, &x, 1.0, 0.1, &opts), Err(Error::Precondition(_))));
    let repeated = LtiSystem::new(diag(&[2.0, 2.0, 1.0]), coordinate_sensors(3, 1), Mat::identity(3, 3), mat(1, 1, &[1.0])).unwrap();
    assert!(matches!(check_eventual_contraction(&repeated, 1.0, &x, &x, 1.0, 0.1, &opts), Err(Error::Precondition(_))));
    let y = random::fixed_rank(&mut rng, 3, 2, 0.5);
    assert!(check_eventual_contraction(&eventual_system(), 1.0, &x, &y, 1.0, 0.1, &opts).is_err());
}

#[test]
fn checks_are_deterministic() {
    let run = || {
        check_subspace_rate(&diag(&[4.0, 2.0, 1.0, 0.5]), 2, 1e-3, 5.0, 1e-3, &SubspaceRateOptions { seed: 11, ..Default::default() })
            .unwrap()
    };
    let (a, b) = (run(), run());
    assert_eq!(a.series, b.series);
    assert_eq!(a.fit, b.fit);

    let sys = observable_system(12, 3);
    let mut rng = random::rng(13);
    let x1 = FixedRankPsd::new(random::stiefel(&mut rng, 3, 1), random::spd(&mut rng, 1, 0.5)).unwrap();
    let x2 = random::fixed_rank(&mut rng, 3, 1, 0.5);
    let flow = Flow::LowRank { sys: &sys, mu: 0.5 };
    let s1 = pairwise_distance_series(flow, &FlowState::LowRank(x1.clone()), &FlowState::LowRank(x2.clone()), Metric::Approx, 2.0, 1e-2);
    let s2 = pairwise_distance_series(flow, &FlowState::LowRank(x1), &FlowState::LowRank(x2), Metric::Approx, 2.0, 1e-2);
    assert_eq!(s1.unwrap(), s2.unwrap());
}
