//! Seeded samplers for matrices used by the randomized checks and benches.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::fixed_rank::{FixedRankPsd, StiefelFrame};
use crate::linalg::{qf, Mat, SymEig};
use crate::spd::SpdMatrix;

pub type SeededRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Mat {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample::<f64, _>(StandardNormal))
}

pub fn orthogonal<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Mat {
    qf(&gaussian_matrix(rng, n, n))
}

pub fn stiefel<R: Rng + ?Sized>(rng: &mut R, n: usize, r: usize) -> StiefelFrame {
    StiefelFrame::new(qf(&gaussian_matrix(rng, n, r))).expect("QR factor is orthonormal")
}

/// SPD matrix with log-eigenvalues drawn uniformly from `[-spread, spread]`.
pub fn spd<R: Rng + ?Sized>(rng: &mut R, n: usize, spread: f64) -> SpdMatrix {
    let o = orthogonal(rng, n);
    let diag: Vec<f64> = (0..n).map(|_| rng.random_range(-spread..=spread).exp()).collect();
    let d = Mat::from_diagonal(&nalgebra::DVector::from_vec(diag));
    SpdMatrix::new(&o * d * o.transpose()).expect("well-conditioned by construction")
}

/// Invertible matrix with singular values in `[e^-spread, e^spread]`.
pub fn invertible<R: Rng + ?Sized>(rng: &mut R, n: usize, spread: f64) -> Mat {
    let left = orthogonal(rng, n);
    let right = orthogonal(rng, n);
    let sv: Vec<f64> = (0..n).map(|_| rng.random_range(-spread..=spread).exp()).collect();
    left * Mat::from_diagonal(&nalgebra::DVector::from_vec(sv)) * right
}

pub fn symmetric<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Mat {
    let g = gaussian_matrix(rng, n, n);
    (&g + g.transpose()) * 0.5
}

pub fn fixed_rank<R: Rng + ?Sized>(rng: &mut R, n: usize, r: usize, spread: f64) -> FixedRankPsd {
    FixedRankPsd::new(stiefel(rng, n, r), spd(rng, r, spread)).expect("consistent dims")
}

/// Matrix whose symmetric part has exactly the given spectrum, plus a random
/// skew part scaled by `skew`.
pub fn with_symmetric_spectrum<R: Rng + ?Sized>(rng: &mut R, spectrum: &[f64], skew: f64) -> Mat {
    let n = spectrum.len();
    let o = orthogonal(rng, n);
    let d = Mat::from_diagonal(&nalgebra::DVector::from_row_slice(spectrum));
    let g = gaussian_matrix(rng, n, n);
    let k = (&g - g.transpose()) * (0.5 * skew);
    &o * d * o.transpose() + k
}

/// Symmetric part spectrum check helper used by tests.
pub fn symmetric_part_spectrum(a: &Mat) -> Vec<f64> {
    SymEig::new(&((a + a.transpose()) * 0.5)).values.iter().copied().collect()
}
