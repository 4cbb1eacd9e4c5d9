//! Seeded Euler-Maruyama simulation of the true state and its measurements.

use rand::Rng;
use rand_distr::StandardNormal;
use riccati_geo::linalg::{Mat, Vector};
use riccati_geo::random;
use riccati_geo::riccati::time_grid;
use riccati_geo::LtiSystem;

use crate::error::{CliError, CliResult};

/// Matrices driving `dx = A x dt + G dw`, `y = C x + H eta`. Unlike
/// [`LtiSystem`] this allows `H = 0` for noiseless measurements.
#[derive(Clone, Copy, Debug)]
pub struct Dynamics<'a> {
    pub a: &'a Mat,
    pub c: &'a Mat,
    pub g: &'a Mat,
    pub h: &'a Mat,
}

impl<'a> From<&'a LtiSystem> for Dynamics<'a> {
    fn from(sys: &'a LtiSystem) -> Self {
        Dynamics { a: sys.a(), c: sys.c(), g: sys.g(), h: sys.h() }
    }
}

/// Times, true states and measurements, index-aligned. `measurements[k]`
/// observes `states[k]` with noise averaged over the step that starts at
/// `times[k]`; the last entry has no following step and is noiseless.
#[derive(Clone, Debug, PartialEq)]
pub struct TruthTrace {
    pub times: Vec<f64>,
    pub states: Vec<Vector>,
    pub measurements: Vec<Vector>,
}

impl TruthTrace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

fn normals<R: Rng>(rng: &mut R, n: usize) -> Vector {
    Vector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal))
}

pub fn simulate_truth(dynamics: Dynamics<'_>, x0: &Vector, t_end: f64, dt: f64, seed: u64) -> CliResult<TruthTrace> {
    let n = dynamics.a.nrows();
    if x0.len() != n {
        return Err(CliError::config("initial.x0", format!("expected {n} entries, got {}", x0.len())));
    }
    let times = time_grid(t_end, dt)?;
    let mut rng = random::rng(seed);
    let mut states = Vec::with_capacity(times.len());
    let mut measurements = Vec::with_capacity(times.len());
    let mut x = x0.clone();
    for (k, t) in times.iter().enumerate() {
        let step = times.get(k + 1).map(|next| next - t);
        let noise = match step {
            Some(h) => dynamics.h * normals(&mut rng, dynamics.h.ncols()) / h.sqrt(),
            None => Vector::zeros(dynamics.c.nrows()),
        };
        measurements.push(dynamics.c * &x + noise);
        states.push(x.clone());
        if let Some(h) = step {
            let kick = dynamics.g * normals(&mut rng, dynamics.g.ncols()) * h.sqrt();
            x = &x + dynamics.a * &x * h + kick;
            if x.iter().any(|v| !v.is_finite()) {
                return Err(riccati_geo::Error::IntegrationFailure {
                    t: t + h,
                    reason: "true state overflowed".into(),
                }
                .into());
            }
        }
    }
    Ok(TruthTrace { times, states, measurements })
}
