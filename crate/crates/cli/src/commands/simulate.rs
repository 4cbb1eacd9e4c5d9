use std::path::Path;
use std::time::Instant;

use riccati_geo::fixed_rank::{grassmann_distance, FixedRankPsd, StiefelFrame};
use riccati_geo::linalg::{orthogonality_defect, Vector};
use riccati_geo::lowrank::{discrete_step, dominant_subspace, LowRankConfig, LowRankFilterState};
use riccati_geo::random;
use riccati_geo::riccati::{filter_step, FilterState, MeasurementRecord};
use riccati_geo::spd::SpdMatrix;
use riccati_geo::LtiSystem;

use super::init_rng;
use crate::config::{vector_or_zero, FrameInit, ScenarioConfig};
use crate::error::{CliError, CliResult};
use crate::generators::generate_scenario;
use crate::output::{fmt_value, write_csv, Summary, FILTER_HEADER};
use crate::svg;
use crate::truth::{simulate_truth, TruthTrace};

/// Per-sample record of a filter run over a truth trace.
#[derive(Clone, Debug)]
pub struct FilterTrack {
    pub times: Vec<f64>,
    pub estimates: Vec<Vector>,
    /// `tr(P)` or `tr(S)`.
    pub trace_cov: Vec<f64>,
    /// Frame the filter carries at each sample: `U` for the low-rank filter,
    /// the top-`r` eigenvectors of `P` for the full one.
    pub frames: Vec<Option<StiefelFrame>>,
    /// Grassmann distance from `frames` to the reference subspace.
    pub angles: Vec<Option<f64>>,
    /// Wall-clock seconds of each filter step, excluding diagnostics.
    pub step_seconds: Vec<f64>,
}

impl FilterTrack {
    fn with_capacity(len: usize) -> Self {
        FilterTrack {
            times: Vec::with_capacity(len),
            estimates: Vec::with_capacity(len),
            trace_cov: Vec::with_capacity(len),
            frames: Vec::with_capacity(len),
            angles: Vec::with_capacity(len),
            step_seconds: Vec::with_capacity(len),
        }
    }

    fn record(&mut self, t: f64, x_hat: &Vector, trace: f64, frame: Option<StiefelFrame>, reference: Option<&StiefelFrame>) -> CliResult<()> {
        let angle = match (&frame, reference) {
            (Some(u), Some(target)) => Some(grassmann_distance(u, target)?),
            _ => None,
        };
        self.times.push(t);
        self.estimates.push(x_hat.clone());
        self.trace_cov.push(trace);
        self.frames.push(frame);
        self.angles.push(angle);
        Ok(())
    }

    /// Median step time.
    pub fn median_step_seconds(&self) -> f64 {
        let mut s = self.step_seconds.clone();
        s.sort_by(f64::total_cmp);
        match s.len() {
            0 => 0.0,
            len if len % 2 == 1 => s[len / 2],
            len => 0.5 * (s[len / 2 - 1] + s[len / 2]),
        }
    }
}

/// Projection used for the `rmse_projected` column.
pub enum Projection<'a> {
    /// The frame the filter carried at each sample.
    Running,
    Fixed(&'a StiefelFrame),
    None,
}

/// Rows of the filter-run CSV.
pub fn filter_rows(track: &FilterTrack, truth: &TruthTrace, projection: Projection<'_>) -> Vec<Vec<String>> {
    (0..track.times.len())
        .map(|k| {
            let err = &track.estimates[k] - &truth.states[k];
            let n = err.len() as f64;
            let frame = match &projection {
                Projection::Running => track.frames[k].as_ref(),
                Projection::Fixed(u) => Some(*u),
                Projection::None => None,
            };
            let projected = frame.map(|u| (u.as_matrix().transpose() * &err).norm() / (u.r() as f64).sqrt());
            vec![
                fmt_value(Some(track.times[k])),
                fmt_value(Some(err.norm() / n.sqrt())),
                fmt_value(projected),
                fmt_value(Some(track.trace_cov[k])),
                fmt_value(track.angles[k]),
            ]
        })
        .collect()
}

fn top_eigenframe(p: &SpdMatrix, r: Option<usize>) -> Option<StiefelFrame> {
    let r = r.filter(|r| *r > 0 && *r < p.dim())?;
    StiefelFrame::new(p.eigen().vectors.columns(0, r).into_owned()).ok()
}

fn measurement(truth: &TruthTrace, k: usize) -> CliResult<MeasurementRecord> {
    Ok(MeasurementRecord::new(truth.times[k], truth.measurements[k].clone())?)
}

/// Full Kalman-Bucy filter driven by the measurements of `truth`.
pub fn full_track(
    sys: &LtiSystem,
    truth: &TruthTrace,
    p0: SpdMatrix,
    x_hat0: Vector,
    r: Option<usize>,
    reference: Option<&StiefelFrame>,
) -> CliResult<FilterTrack> {
    let mut track = FilterTrack::with_capacity(truth.len());
    let mut state = FilterState { x_hat: x_hat0, p: p0, t: truth.times[0] };
    track.record(state.t, &state.x_hat, state.p.trace(), top_eigenframe(&state.p, r), reference)?;
    for k in 0..truth.len() - 1 {
        let y = measurement(truth, k)?;
        let h = truth.times[k + 1] - truth.times[k];
        let start = Instant::now();
        state = filter_step(sys, &state, Some(&y), h)?;
        track.step_seconds.push(start.elapsed().as_secs_f64());
        state.t = truth.times[k + 1];
        track.record(state.t, &state.x_hat, state.p.trace(), top_eigenframe(&state.p, r), reference)?;
    }
    Ok(track)
}

/// Rank-preservation statistics of a low-rank run.
#[derive(Clone, Copy, Debug)]
pub struct RankStats {
    pub max_orthogonality_defect: f64,
    pub min_factor_eigenvalue: f64,
}

/// Discrete-time low-rank filter driven by the measurements of `truth`.
pub fn lowrank_track(
    sys: &LtiSystem,
    truth: &TruthTrace,
    x0: FixedRankPsd,
    x_hat0: Vector,
    mu: f64,
    reference: Option<&StiefelFrame>,
) -> CliResult<(FilterTrack, RankStats)> {
    let r = x0.r();
    let mut track = FilterTrack::with_capacity(truth.len());
    let mut stats = RankStats {
        max_orthogonality_defect: orthogonality_defect(x0.u().as_matrix()),
        min_factor_eigenvalue: x0.s().min_eigenvalue(),
    };
    let mut state = LowRankFilterState { x: x0, x_hat: x_hat0, t: truth.times[0] };
    track.record(state.t, &state.x_hat, state.x.s().trace(), Some(state.x.u().clone()), reference)?;
    for k in 0..truth.len() - 1 {
        let y = measurement(truth, k)?;
        let cfg = LowRankConfig::new(mu, truth.times[k + 1] - truth.times[k], r)?;
        let start = Instant::now();
        state = discrete_step(sys, &state, &cfg, Some(&y))?;
        track.step_seconds.push(start.elapsed().as_secs_f64());
        state.t = truth.times[k + 1];
        stats.max_orthogonality_defect = stats.max_orthogonality_defect.max(orthogonality_defect(state.x.u().as_matrix()));
        stats.min_factor_eigenvalue = stats.min_factor_eigenvalue.min(state.x.s().min_eigenvalue());
        track.record(state.t, &state.x_hat, state.x.s().trace(), Some(state.x.u().clone()), reference)?;
    }
    Ok((track, stats))
}

fn reference_subspace(sys: &LtiSystem, r: Option<usize>) -> Option<StiefelFrame> {
    let r = r.filter(|r| *r < sys.n())?;
    match dominant_subspace(sys.a(), r) {
        Ok(u) => Some(u),
        Err(e) => {
            log::warn!("no reference subspace, subspace_angle left empty: {e}");
            None
        }
    }
}

struct Setup {
    sys: LtiSystem,
    truth: TruthTrace,
    x_hat0: Vector,
}

fn setup(config: &ScenarioConfig) -> CliResult<Setup> {
    let sys = generate_scenario(&config.system, config.seed)?;
    let x0 = vector_or_zero(&config.initial.x0, sys.n(), "initial.x0")?;
    let x_hat0 = vector_or_zero(&config.initial.x_hat0, sys.n(), "initial.x_hat0")?;
    let truth = simulate_truth((&sys).into(), &x0, config.t_end, config.dt, config.seed)?;
    Ok(Setup { sys, truth, x_hat0 })
}

fn write_estimates(path: &Path, track: &FilterTrack) -> CliResult<()> {
    let n = track.estimates.first().map_or(0, |x| x.len());
    let mut header = vec!["t".to_string()];
    header.extend((0..n).map(|i| format!("x{i}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows: Vec<Vec<String>> = track
        .times
        .iter()
        .zip(track.estimates.iter())
        .map(|(t, x)| std::iter::once(fmt_value(Some(*t))).chain(x.iter().map(|v| fmt_value(Some(*v)))).collect())
        .collect();
    crate::output::write_csv(path, &header, &rows)
}

fn summarize_errors(summary: &mut Summary, track: &FilterTrack, truth: &TruthTrace) {
    let rmse: Vec<f64> = track
        .estimates
        .iter()
        .zip(truth.states.iter())
        .map(|(e, x)| (e - x).norm() / (x.len() as f64).sqrt())
        .collect();
    summary.value("samples", rmse.len());
    summary.number("final_rmse", *rmse.last().unwrap_or(&f64::NAN));
    summary.number("mean_rmse", rmse.iter().sum::<f64>() / rmse.len().max(1) as f64);
    summary.number("final_trace_cov", *track.trace_cov.last().unwrap_or(&f64::NAN));
    if let Some(Some(angle)) = track.angles.last() {
        summary.number("final_subspace_angle", *angle);
    }
}

fn plot(out: &Path, name: &str, title: &str, track: &FilterTrack, truth: &TruthTrace) -> CliResult<()> {
    let rmse: Vec<f64> = track
        .estimates
        .iter()
        .zip(truth.states.iter())
        .map(|(e, x)| (e - x).norm() / (x.len() as f64).sqrt())
        .collect();
    svg::write(
        &out.join(name),
        title,
        &[
            svg::Line { label: "rmse", x: &track.times, y: &rmse },
            svg::Line { label: "trace_cov", x: &track.times, y: &track.trace_cov },
        ],
        true,
    )
}

pub fn run_full(config: &ScenarioConfig, out: &Path) -> CliResult<Summary> {
    let Setup { sys, truth, x_hat0 } = setup(config)?;
    let p0 = config.initial.p0.build(sys.n(), &mut init_rng(config.seed), "initial.p0")?;
    let reference = reference_subspace(&sys, config.r);
    let track = full_track(&sys, &truth, p0, x_hat0, config.r, reference.as_ref())?;
    let projection = if config.r.is_some() { Projection::Running } else { Projection::None };
    write_csv(&out.join("full_filter.csv"), &FILTER_HEADER, &filter_rows(&track, &truth, projection))?;
    write_estimates(&out.join("full_estimate.csv"), &track)?;
    if config.outputs.svg {
        plot(out, "full_filter.svg", "Full filter", &track, &truth)?;
    }
    let mut summary = Summary::default();
    summary.value("filter", "full");
    summary.value("n", sys.n());
    summarize_errors(&mut summary, &track, &truth);
    Ok(summary)
}

pub fn run_lowrank(config: &ScenarioConfig, out: &Path) -> CliResult<Summary> {
    let Setup { sys, truth, x_hat0 } = setup(config)?;
    let (n, r) = (sys.n(), config.require_rank()?);
    if r >= n {
        return Err(CliError::config("r", format!("rank {r} must be below the state dimension {n}")));
    }
    let mut rng = init_rng(config.seed);
    let u0 = match config.initial.u0 {
        FrameInit::Random => random::stiefel(&mut rng, n, r),
        FrameInit::Leading => StiefelFrame::leading(n, r)?,
        FrameInit::Dominant => dominant_subspace(sys.a(), r)?,
    };
    let s0 = config.initial.s0.build(r, &mut rng, "initial.s0")?;
    let reference = reference_subspace(&sys, Some(r));
    let (track, stats) = lowrank_track(&sys, &truth, FixedRankPsd::new(u0, s0)?, x_hat0, config.mu, reference.as_ref())?;
    write_csv(&out.join("lowrank_filter.csv"), &FILTER_HEADER, &filter_rows(&track, &truth, Projection::Running))?;
    write_estimates(&out.join("lowrank_estimate.csv"), &track)?;
    if config.outputs.svg {
        plot(out, "lowrank_filter.svg", "Low-rank filter", &track, &truth)?;
    }
    let mut summary = Summary::default();
    summary.value("filter", "lowrank");
    summary.value("n", n);
    summary.value("r", r);
    summarize_errors(&mut summary, &track, &truth);
    summary.number("max_orthogonality_defect", stats.max_orthogonality_defect);
    summary.number("min_factor_eigenvalue", stats.min_factor_eigenvalue);
    summary.check(
        "rank-preservation",
        stats.max_orthogonality_defect < 1e-10 && stats.min_factor_eigenvalue > 0.0,
    );
    Ok(summary)
}
