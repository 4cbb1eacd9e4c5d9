use std::path::Path;

use rand::Rng;
use riccati_geo::contraction::{
    check_constant_distance, check_eventual_contraction, check_riccati_contraction, check_subspace_rate,
    pairwise_distance_series, DistanceSeries, EventualContractionOptions, Flow, FlowState, Metric,
    RiccatiContractionOptions, SubspaceRateOptions,
};
use riccati_geo::fixed_rank::{FixedRankPsd, StiefelFrame};
use riccati_geo::linalg::Mat;
use riccati_geo::random::{self, SeededRng};
use riccati_geo::LtiSystem;

use super::init_rng;
use crate::config::{
    matrix_from_rows, CheckSpec, ConstantDistanceCheck, EventualContractionCheck, FrameInit, MetricChoice,
    PairwiseDistanceCheck, RiccatiContractionCheck, ScenarioConfig, SubspaceRateCheck,
};
use crate::error::{CliError, CliResult};
use crate::generators::generate_scenario;
use crate::output::{fmt_value, write_csv, Summary, SERIES_HEADER};
use crate::svg;

/// Rows of a contraction CSV; columns not produced by a check stay empty.
pub fn series_rows(series: &DistanceSeries, bound: Option<&[f64]>) -> Vec<Vec<String>> {
    (0..series.len())
        .map(|i| {
            vec![
                fmt_value(Some(series.times[i])),
                fmt_value(Some(series.values[i])),
                fmt_value(series.grassmann_component.as_ref().map(|g| g[i])),
                fmt_value(series.cone_component.as_ref().map(|c| c[i])),
                fmt_value(bound.map(|b| b[i])),
            ]
        })
        .collect()
}

/// Unit vector orthogonal to `u`, drawn at random.
fn orthogonal_direction(rng: &mut SeededRng, u: &Mat) -> CliResult<Mat> {
    let frame = StiefelFrame::new(u.clone())?;
    let w = frame.project_out(&random::gaussian_matrix(rng, u.nrows(), 1));
    let norm = w.norm();
    if !(norm > 1e-12) {
        return Err(CliError::config("checks", "could not draw a direction orthogonal to the first start"));
    }
    Ok(w / norm)
}

fn frame(init: FrameInit, sys: &LtiSystem, r: usize, rng: &mut SeededRng) -> CliResult<StiefelFrame> {
    Ok(match init {
        FrameInit::Random => random::stiefel(rng, sys.n(), r),
        FrameInit::Leading => StiefelFrame::leading(sys.n(), r)?,
        FrameInit::Dominant => riccati_geo::dominant_subspace(sys.a(), r)?,
    })
}

struct Outcome {
    series: DistanceSeries,
    bound: Option<Vec<f64>>,
    passed: Option<bool>,
}

fn run_check(
    check: &CheckSpec,
    sys: &LtiSystem,
    config: &ScenarioConfig,
    rng: &mut SeededRng,
    key: &str,
    summary: &mut Summary,
) -> CliResult<Outcome> {
    let (t_end, dt) = check.horizon();
    let (t_end, dt) = (t_end.unwrap_or(config.t_end), dt.unwrap_or(config.dt));
    let n = sys.n();
    Ok(match check {
        CheckSpec::RiccatiContraction(RiccatiContractionCheck { p1, p2, slack, .. }) => {
            let p1 = p1.build(n, rng, &format!("{key}.p1"))?;
            let p2 = p2.build(n, rng, &format!("{key}.p2"))?;
            let mut opts = RiccatiContractionOptions::default();
            if let Some(s) = slack {
                opts.slack = *s;
            }
            let report = check_riccati_contraction(sys, &p1, &p2, t_end, dt, &opts)?;
            summary.number(format!("{key}.mu"), report.mu);
            summary.number(format!("{key}.worst_ratio"), report.worst_ratio);
            Outcome { series: report.series, bound: Some(report.bound), passed: Some(report.passed) }
        }
        CheckSpec::SubspaceRate(SubspaceRateCheck { a, r, delta, ratio_threshold, tail_fraction, .. }) => {
            let a = match a {
                Some(rows) => matrix_from_rows(rows, &format!("{key}.a"))?,
                None => sys.a().clone(),
            };
            let r = match r.or(config.r) {
                Some(r) => r,
                None => return Err(CliError::config(&format!("{key}.r"), "subspace-rate needs a rank")),
            };
            let mut opts = SubspaceRateOptions { seed: rng.random(), ..SubspaceRateOptions::default() };
            if let Some(v) = ratio_threshold {
                opts.ratio_threshold = *v;
            }
            if let Some(v) = tail_fraction {
                opts.tail_fraction = *v;
            }
            let report = check_subspace_rate(&a, r, *delta, t_end, dt, &opts)?;
            summary.number(format!("{key}.gap"), report.gap);
            summary.number(format!("{key}.rate"), report.fit.rate);
            summary.number(format!("{key}.ratio"), report.ratio);
            summary.number(format!("{key}.r_squared"), report.fit.r_squared);
            Outcome { series: report.series, bound: None, passed: Some(report.passed) }
        }
        CheckSpec::ConstantDistance(ConstantDistanceCheck { angle, tolerance, .. }) => {
            let u1 = random::stiefel(rng, n, 1).into_matrix();
            let w = orthogonal_direction(rng, &u1)?;
            let u2 = &u1 * angle.cos() + w * angle.sin();
            let report =
                check_constant_distance(sys.a(), &StiefelFrame::new(u1)?, &StiefelFrame::new(u2)?, t_end, dt, *tolerance)?;
            summary.number(format!("{key}.initial"), report.series.initial());
            summary.number(format!("{key}.max_deviation"), report.max_deviation);
            Outcome { series: report.series, bound: None, passed: Some(report.passed) }
        }
        CheckSpec::EventualContraction(EventualContractionCheck {
            spread, angle_tol, residual_tol, min_r_squared, tail_fraction, ..
        }) => {
            let r = config.require_rank()?;
            let x1 = random::fixed_rank(rng, n, r, *spread);
            let x2 = random::fixed_rank(rng, n, r, *spread);
            let mut opts = EventualContractionOptions::default();
            if let Some(v) = angle_tol {
                opts.angle_tol = *v;
            }
            if let Some(v) = residual_tol {
                opts.residual_tol = *v;
            }
            if let Some(v) = min_r_squared {
                opts.min_r_squared = *v;
            }
            if let Some(v) = tail_fraction {
                opts.tail_fraction = *v;
            }
            let report = check_eventual_contraction(sys, config.mu, &x1, &x2, t_end, dt, &opts)?;
            summary.number(format!("{key}.final_angle"), report.final_angle);
            summary.number(format!("{key}.residual"), report.residual);
            summary.value(format!("{key}.observable"), report.observable);
            if let Some(fit) = &report.cone_fit {
                summary.number(format!("{key}.cone_rate"), fit.rate);
                summary.number(format!("{key}.cone_r_squared"), fit.r_squared);
            }
            Outcome { series: report.pair_series, bound: None, passed: Some(report.passed) }
        }
        CheckSpec::PairwiseDistance(PairwiseDistanceCheck { start1, start2, .. }) => {
            let series = match (config.metric, config.r) {
                (MetricChoice::Spd, _) => {
                    let p1 = start1.build(n, rng, &format!("{key}.start1"))?;
                    let p2 = start2.build(n, rng, &format!("{key}.start2"))?;
                    pairwise_distance_series(
                        Flow::FullRiccati(sys),
                        &FlowState::Full(p1),
                        &FlowState::Full(p2),
                        Metric::Spd,
                        t_end,
                        dt,
                    )?
                }
                (_, None) => return Err(CliError::config("r", "low-rank metrics need a rank")),
                (choice, Some(r)) => {
                    let x1 = FixedRankPsd::new(
                        frame(config.initial.u0, sys, r, rng)?,
                        start1.build(r, rng, &format!("{key}.start1"))?,
                    )?;
                    let x2 = FixedRankPsd::new(random::stiefel(rng, n, r), start2.build(r, rng, &format!("{key}.start2"))?)?;
                    let metric = if choice == MetricChoice::Grassmann { Metric::Grassmann } else { Metric::Approx };
                    pairwise_distance_series(
                        Flow::LowRank { sys, mu: config.mu },
                        &FlowState::LowRank(x1),
                        &FlowState::LowRank(x2),
                        metric,
                        t_end,
                        dt,
                    )?
                }
            };
            summary.number(format!("{key}.initial"), series.initial());
            summary.number(format!("{key}.final"), series.last());
            Outcome { series, bound: None, passed: None }
        }
    })
}

pub fn run(config: &ScenarioConfig, out: &Path) -> CliResult<Summary> {
    if config.checks.is_empty() {
        return Err(CliError::config("checks", "the contraction subcommand needs at least one check"));
    }
    let sys = generate_scenario(&config.system, config.seed)?;
    let mut rng = init_rng(config.seed);
    let mut summary = Summary::default();
    for (i, check) in config.checks.iter().enumerate() {
        let name = check.name();
        if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
            return Err(CliError::config(&format!("checks[{i}].name"), "use letters, digits, '-' and '_'"));
        }
        log::info!("running {} check {name}", check.kind());
        let outcome = run_check(check, &sys, config, &mut rng, &name, &mut summary)?;
        let path = out.join(format!("contraction_{name}.csv"));
        write_csv(&path, &SERIES_HEADER, &series_rows(&outcome.series, outcome.bound.as_deref()))?;
        if config.outputs.svg {
            let mut lines = vec![svg::Line { label: "distance", x: &outcome.series.times, y: &outcome.series.values }];
            if let Some(b) = &outcome.bound {
                lines.push(svg::Line { label: "bound", x: &outcome.series.times, y: b });
            }
            svg::write(&out.join(format!("contraction_{name}.svg")), &name, &lines, true)?;
        }
        if let Some(passed) = outcome.passed {
            summary.check(&name, passed);
        }
    }
    Ok(summary)
}
