use std::path::Path;
use std::time::Instant;

use riccati_geo::fixed_rank::{FixedRankPsd, StiefelFrame};
use riccati_geo::random;
use riccati_geo::linalg::Vector;

use super::init_rng;
use super::simulate::{filter_rows, full_track, lowrank_track, Projection};
use crate::config::{FrameInit, Heat1dParams, ScenarioConfig, SystemSpec};
use crate::error::{CliError, CliResult};
use crate::generators::heat1d;
use crate::output::{fmt_value, write_csv, Summary, FILTER_HEADER};
use crate::svg;
use crate::truth::simulate_truth;

pub const TIMING_HEADER: [&str; 6] = ["n", "r", "steps", "full_step_seconds", "lowrank_step_seconds", "ratio"];

const SIZE_RANGE: (usize, usize) = (100, 1000);
const RANK_RANGE: (usize, usize) = (5, 20);

/// Rejects rank/size combinations outside the supported envelope.
pub fn validate(sizes: &[usize], r: usize) -> CliResult<()> {
    if sizes.is_empty() {
        return Err(CliError::config("compare.sizes", "at least one size is needed"));
    }
    for &n in sizes {
        if r >= n {
            return Err(CliError::config("compare.r", format!("rank {r} must be strictly below n = {n}")));
        }
        if 2 * r > n {
            return Err(CliError::config(
                "compare.r",
                format!("rank {r} exceeds n/2 = {} for n = {n}; the low-rank filter needs r <= n/2", n / 2),
            ));
        }
        if n < SIZE_RANGE.0 || n > SIZE_RANGE.1 {
            return Err(CliError::config(
                "compare.sizes",
                format!("n = {n} outside [{}, {}]", SIZE_RANGE.0, SIZE_RANGE.1),
            ));
        }
    }
    if r < RANK_RANGE.0 || r > RANK_RANGE.1 {
        return Err(CliError::config("compare.r", format!("r = {r} outside [{}, {}]", RANK_RANGE.0, RANK_RANGE.1)));
    }
    Ok(())
}

/// Per-step wall-clock timings at one size.
#[derive(Clone, Copy, Debug)]
pub struct Timing {
    pub n: usize,
    pub full: f64,
    pub lowrank: f64,
}

impl Timing {
    pub fn ratio(&self) -> f64 {
        self.full / self.lowrank
    }
}

/// True when the full/low-rank ratio grows strictly with `n`.
pub fn strictly_increasing(timings: &[Timing]) -> bool {
    timings.windows(2).all(|w| w[1].ratio() > w[0].ratio())
}

fn run_size(config: &ScenarioConfig, base: &Heat1dParams, n: usize, r: usize, steps: usize, out: &Path) -> CliResult<Timing> {
    let sys = heat1d(&Heat1dParams { n, ..base.clone() })?;
    let t_end = config.dt * steps as f64;
    let x0 = Vector::zeros(n);
    let started = Instant::now();
    let truth = simulate_truth((&sys).into(), &x0, t_end, config.dt, config.seed)?;
    let x_hat0 = Vector::zeros(n);

    let mut rng = init_rng(config.seed);
    let p0 = config.initial.p0.build(n, &mut rng, "initial.p0")?;
    let u0 = match config.initial.u0 {
        FrameInit::Random => random::stiefel(&mut rng, n, r),
        FrameInit::Leading => StiefelFrame::leading(n, r)?,
        FrameInit::Dominant => riccati_geo::dominant_subspace(sys.a(), r)?,
    };
    let s0 = config.initial.s0.build(r, &mut rng, "initial.s0")?;

    let full = full_track(&sys, &truth, p0, x_hat0.clone(), None, None)?;
    let (low, _) = lowrank_track(&sys, &truth, FixedRankPsd::new(u0, s0)?, x_hat0, config.mu, None)?;
    let final_frame = low.frames.last().cloned().flatten().expect("low-rank track carries frames");
    write_csv(
        &out.join(format!("compare_full_n{n}.csv")),
        &FILTER_HEADER,
        &filter_rows(&full, &truth, Projection::Fixed(&final_frame)),
    )?;
    write_csv(
        &out.join(format!("compare_lowrank_n{n}.csv")),
        &FILTER_HEADER,
        &filter_rows(&low, &truth, Projection::Fixed(&final_frame)),
    )?;
    let timing = Timing { n, full: full.median_step_seconds(), lowrank: low.median_step_seconds() };
    log::info!(
        "n = {n}: full {:.3e} s/step, low-rank {:.3e} s/step, total {:.1} s",
        timing.full,
        timing.lowrank,
        started.elapsed().as_secs_f64()
    );
    Ok(timing)
}

pub fn run(config: &ScenarioConfig, out: &Path) -> CliResult<Summary> {
    let base = match &config.system {
        SystemSpec::Heat1d(p) => p,
        _ => return Err(CliError::config("system.generator", "compare runs on the heat1d generator")),
    };
    let spec = config.compare.clone().unwrap_or_default();
    let r = match spec.r.or(config.r) {
        Some(r) => r,
        None => return Err(CliError::config("compare.r", "compare needs a rank")),
    };
    validate(&spec.sizes, r)?;
    if spec.steps == 0 {
        return Err(CliError::config("compare.steps", "must be positive"));
    }

    let timings = spec
        .sizes
        .iter()
        .map(|&n| run_size(config, base, n, r, spec.steps, out))
        .collect::<CliResult<Vec<_>>>()?;
    let rows: Vec<Vec<String>> = timings
        .iter()
        .map(|t| {
            vec![
                t.n.to_string(),
                r.to_string(),
                spec.steps.to_string(),
                fmt_value(Some(t.full)),
                fmt_value(Some(t.lowrank)),
                fmt_value(Some(t.ratio())),
            ]
        })
        .collect();
    write_csv(&out.join("compare_timings.csv"), &TIMING_HEADER, &rows)?;
    if config.outputs.svg {
        let ns: Vec<f64> = timings.iter().map(|t| t.n as f64).collect();
        let full: Vec<f64> = timings.iter().map(|t| t.full).collect();
        let low: Vec<f64> = timings.iter().map(|t| t.lowrank).collect();
        svg::write(
            &out.join("compare_timings.svg"),
            "Seconds per filter step",
            &[svg::Line { label: "full", x: &ns, y: &full }, svg::Line { label: "low-rank", x: &ns, y: &low }],
            true,
        )?;
    }

    let mut summary = Summary::default();
    summary.value("r", r);
    for t in &timings {
        summary.number(format!("ratio_n{}", t.n), t.ratio());
    }
    summary.check("compare-scaling", strictly_increasing(&timings));
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation_order() {
        let msg = validate(&[100], 60).unwrap_err().to_string();
        assert!(msg.contains("n/2"), "{msg}");
        assert!(validate(&[100], 100).unwrap_err().to_string().contains("strictly below"));
        assert!(validate(&[50], 10).unwrap_err().to_string().contains("outside"));
        assert!(validate(&[100], 4).unwrap_err().to_string().contains("outside"));
        assert!(validate(&[100, 200, 400], 10).is_ok());
    }

    #[test]
    fn ratio_trend() {
        let t = |n, full, lowrank| Timing { n, full, lowrank };
        assert!(strictly_increasing(&[t(100, 2.0, 1.0), t(200, 6.0, 2.0)]));
        assert!(!strictly_increasing(&[t(100, 2.0, 1.0), t(200, 4.0, 2.0)]));
    }
}
