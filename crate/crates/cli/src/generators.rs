//! Built-in scenario generators.

use riccati_geo::linalg::Mat;
use riccati_geo::random;
use riccati_geo::riccati::observability_rank;
use riccati_geo::LtiSystem;

use crate::config::{matrix_from_rows, ExplicitMatrices, Heat1dParams, RandomObservableParams, SkewParams, SystemSpec};
use crate::error::{CliError, CliResult};

const OBSERVABILITY_TOL: f64 = 1e-9;
const MAX_DRAWS: usize = 16;

pub fn generate_scenario(spec: &SystemSpec, seed: u64) -> CliResult<LtiSystem> {
    match spec {
        SystemSpec::Heat1d(p) => heat1d(p),
        SystemSpec::RandomObservable(p) => random_observable(p, seed),
        SystemSpec::Skew(p) => skew(p),
        SystemSpec::Explicit(m) => explicit(m),
    }
}

/// Second-difference Laplacian on `n` interior points of the unit interval,
/// scaled by `kappa (n+1)^2`, plus `source` on the diagonal, observed by
/// `sensors` evenly spaced point sensors.
pub fn heat1d(p: &Heat1dParams) -> CliResult<LtiSystem> {
    let n = p.n;
    if n < 2 {
        return Err(CliError::config("system.n", "heat1d needs at least 2 grid points"));
    }
    if !(p.kappa > 0.0) || !p.kappa.is_finite() {
        return Err(CliError::config("system.kappa", "diffusivity must be positive"));
    }
    if p.sensors == 0 || p.sensors > n {
        return Err(CliError::config("system.sensors", format!("must be in 1..={n}")));
    }
    if !(p.sigma > 0.0) || !p.sigma.is_finite() {
        return Err(CliError::config("system.sigma", "sensor noise must be positive"));
    }
    if !p.source.is_finite() {
        return Err(CliError::config("system.source", "must be finite"));
    }
    let scale = p.kappa * ((n + 1) * (n + 1)) as f64;
    let a = Mat::from_fn(n, n, |i, j| match i.abs_diff(j) {
        0 => -2.0 * scale + p.source,
        1 => scale,
        _ => 0.0,
    });
    let mut c = Mat::zeros(p.sensors, n);
    for (row, col) in sensor_positions(n, p.sensors).into_iter().enumerate() {
        c[(row, col)] = 1.0;
    }
    let h = Mat::identity(p.sensors, p.sensors) * p.sigma;
    Ok(LtiSystem::new(a, c, Mat::identity(n, n), h)?)
}

/// Grid indices `floor(i n / k)`; the first sensor sits on the boundary node.
pub fn sensor_positions(n: usize, k: usize) -> Vec<usize> {
    (0..k).map(|i| i * n / k).collect()
}

pub fn random_observable(p: &RandomObservableParams, seed: u64) -> CliResult<LtiSystem> {
    let n = p.n;
    if n == 0 {
        return Err(CliError::config("system.n", "must be positive"));
    }
    if p.outputs == 0 {
        return Err(CliError::config("system.outputs", "must be positive"));
    }
    if !(p.sigma > 0.0) || !p.sigma.is_finite() {
        return Err(CliError::config("system.sigma", "must be positive"));
    }
    let spectrum = match &p.spectrum {
        Some(s) if s.len() != n => {
            return Err(CliError::config("system.spectrum", format!("expected {n} values, got {}", s.len())))
        }
        Some(s) => s.clone(),
        None if n == 1 => vec![0.0],
        None => (0..n).map(|i| 1.0 - 3.0 * i as f64 / (n - 1) as f64).collect(),
    };
    let mut rng = random::rng(seed);
    for _ in 0..MAX_DRAWS {
        let a = random::with_symmetric_spectrum(&mut rng, &spectrum, p.skew);
        let c = random::gaussian_matrix(&mut rng, p.outputs, n);
        if observability_rank(&a, &c, OBSERVABILITY_TOL) == n {
            let h = Mat::identity(p.outputs, p.outputs) * p.sigma;
            return Ok(LtiSystem::new(a, c, Mat::identity(n, n), h)?);
        }
    }
    Err(CliError::config("system", format!("no observable (A, C) pair in {MAX_DRAWS} draws")))
}

/// Block-rotation `A` with `C = 0`, `G = I`, `H = 1`.
pub fn skew(p: &SkewParams) -> CliResult<LtiSystem> {
    let n = p.n;
    if n < 2 {
        return Err(CliError::config("system.n", "skew needs n >= 2"));
    }
    let a = match (&p.omega, &p.rates) {
        (Some(_), Some(_)) => return Err(CliError::config("system", "give either omega or rates, not both")),
        (Some(w), None) => {
            if n != 3 {
                return Err(CliError::config("system.omega", "a rotation axis needs n = 3"));
            }
            Mat::from_row_slice(3, 3, &[0.0, -w[2], w[1], w[2], 0.0, -w[0], -w[1], w[0], 0.0])
        }
        (None, rates) => {
            let blocks = n / 2;
            let rates = rates.clone().unwrap_or_else(|| vec![1.0; blocks]);
            if rates.len() != blocks {
                return Err(CliError::config("system.rates", format!("expected {blocks} rates, got {}", rates.len())));
            }
            let mut a = Mat::zeros(n, n);
            for (b, w) in rates.iter().enumerate() {
                a[(2 * b, 2 * b + 1)] = -w;
                a[(2 * b + 1, 2 * b)] = *w;
            }
            a
        }
    };
    if a.iter().any(|v| !v.is_finite()) {
        return Err(CliError::config("system", "rotation rates must be finite"));
    }
    Ok(LtiSystem::new(a, Mat::zeros(1, n), Mat::identity(n, n), Mat::identity(1, 1))?)
}

pub fn explicit(m: &ExplicitMatrices) -> CliResult<LtiSystem> {
    let a = matrix_from_rows(&m.a, "system.a")?;
    let c = matrix_from_rows(&m.c, "system.c")?;
    let g = matrix_from_rows(&m.g, "system.g")?;
    let h = matrix_from_rows(&m.h, "system.h")?;
    LtiSystem::new(a, c, g, h).map_err(|e| CliError::config("system", e))
}
