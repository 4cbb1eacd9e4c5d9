//! Small dense linear-algebra helpers shared by the geometry and flow modules.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

pub fn symmetrize(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

pub fn max_abs(m: &Mat) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Largest entrywise deviation from symmetry.
pub fn asymmetry(m: &Mat) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// Symmetric eigendecomposition with eigenvalues in descending order.
#[derive(Clone, Debug)]
pub struct SymEig {
    pub values: Vector,
    pub vectors: Mat,
}

impl SymEig {
    pub fn new(m: &Mat) -> Self {
        let eig = SymmetricEigen::new(symmetrize(m));
        let n = eig.eigenvalues.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
        let values = Vector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
        let vectors = Mat::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
        SymEig { values, vectors }
    }

    pub fn max(&self) -> f64 {
        self.values[0]
    }

    pub fn min(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// `V diag(f(lambda)) V'`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Mat {
        let scaled = Mat::from_fn(self.vectors.nrows(), self.vectors.ncols(), |r, c| {
            self.vectors[(r, c)] * f(self.values[c])
        });
        symmetrize(&(scaled * self.vectors.transpose()))
    }
}

/// Orthogonal factor of the thin QR decomposition, with columns flipped so
/// that the triangular factor has a non-negative diagonal.
pub fn qf(m: &Mat) -> Mat {
    let qr = m.clone().qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..q.ncols() {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// `max |U'U - I|`.
pub fn orthogonality_defect(u: &Mat) -> f64 {
    let g = u.transpose() * u;
    max_abs(&(g - Mat::identity(u.ncols(), u.ncols())))
}

/// An orthonormal basis of the orthogonal complement of `span(u)`.
/// Assumes `u` has orthonormal columns.
pub fn orthonormal_complement(u: &Mat) -> Mat {
    let n = u.nrows();
    let r = u.ncols();
    let proj = Mat::identity(n, n) - u * u.transpose();
    let eig = SymEig::new(&proj);
    eig.vectors.columns(0, n - r).into_owned()
}

/// Singular values in descending order.
///
/// Computed from a QR reduction to a square triangle `R` followed by the
/// symmetric eigenvalues of `[[0, R], [R', 0]]`, which are `+-sigma`.
pub fn singular_values(m: &Mat) -> Vec<f64> {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return Vec::new();
    }
    let tri = if rows >= cols { m.clone().qr().r() } else { m.transpose().qr().r() };
    let k = tri.nrows();
    let mut jordan = Mat::zeros(2 * k, 2 * k);
    jordan.view_mut((0, k), (k, k)).copy_from(&tri);
    jordan.view_mut((k, 0), (k, k)).copy_from(&tri.transpose());
    SymEig::new(&jordan).values.iter().take(k).map(|v| v.max(0.0)).collect()
}

/// Orthogonal polar factor `W V'` of a square nonsingular `m = W S V'`, by the
/// scaled Newton iteration `X <- (g X + X^-T / g) / 2`. `None` when an iterate
/// is singular or the iteration stalls.
pub fn polar_factor(m: &Mat) -> Option<Mat> {
    let k = m.nrows();
    if m.ncols() != k {
        return None;
    }
    let mut x = m.clone();
    let mut scaled = true;
    for _ in 0..100 {
        let inv_t = x.clone().try_inverse()?.transpose();
        let g = if scaled { (inv_t.norm() / x.norm()).sqrt() } else { 1.0 };
        let next = (&x * g + inv_t / g) * 0.5;
        let change = (&next - &x).norm();
        x = next;
        if !x.iter().all(|v| v.is_finite()) {
            return None;
        }
        if change < 1e-2 {
            scaled = false;
        }
        if change <= 4.0 * f64::EPSILON * (k as f64).sqrt() {
            return Some(x);
        }
    }
    (orthogonality_defect(&x) < 1e-12).then_some(x)
}

pub fn spectral_norm(m: &Mat) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// `tr(X Y)` for square matrices without forming the product.
pub fn trace_of_product(x: &Mat, y: &Mat) -> f64 {
    let n = x.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for k in 0..x.ncols() {
            acc += x[(i, k)] * y[(k, i)];
        }
    }
    acc
}
