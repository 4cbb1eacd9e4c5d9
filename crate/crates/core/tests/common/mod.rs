#![allow(dead_code)]

use nalgebra::DMatrix;
use riccati_geo::linalg::Mat;
use riccati_geo::LtiSystem;

pub fn mat(rows: usize, cols: usize, data: &[f64]) -> Mat {
    DMatrix::from_row_slice(rows, cols, data)
}

pub fn scalar_system(a: f64, g: f64, c: f64, h: f64) -> LtiSystem {
    LtiSystem::new(mat(1, 1, &[a]), mat(1, 1, &[c]), mat(1, 1, &[g]), mat(1, 1, &[h])).unwrap()
}

pub fn double_integrator() -> LtiSystem {
    LtiSystem::new(
        mat(2, 2, &[0.0, 1.0, 0.0, 0.0]),
        mat(1, 2, &[1.0, 0.0]),
        Mat::identity(2, 2),
        mat(1, 1, &[1.0]),
    )
    .unwrap()
}

/// Closed-form solution of dP/dt = 1 - P^2 (A = 0, G = C = H = 1).
pub fn scalar_tanh_solution(p0: f64, t: f64) -> f64 {
    let th = t.tanh();
    (p0 + th) / (1.0 + p0 * th)
}

/// Stabilizing ARE solution from the matrix sign function of the
/// Hamiltonian [[A', -M], [-GG', -A]] with M = C'(HH')^-1 C. Independent
/// of the flow-based solver.
pub fn hamiltonian_are(sys: &LtiSystem) -> Mat {
    let n = sys.n();
    let mut ham = Mat::zeros(2 * n, 2 * n);
    ham.view_mut((0, 0), (n, n)).copy_from(&sys.a().transpose());
    ham.view_mut((0, n), (n, n)).copy_from(&(-sys.information()));
    ham.view_mut((n, 0), (n, n)).copy_from(&(-sys.process_noise()));
    ham.view_mut((n, n), (n, n)).copy_from(&(-sys.a()));
    let mut z = ham;
    for _ in 0..100 {
        let inv = z.clone().try_inverse().expect("Hamiltonian has no imaginary-axis eigenvalues");
        let next = (&z + inv) * 0.5;
        let change = (&next - &z).norm() / next.norm();
        z = next;
        if change < 1e-15 {
            break;
        }
    }
    // Stable invariant subspace [I; P] spans the null space of sign(H) + I.
    let w = z + Mat::identity(2 * n, 2 * n);
    let lhs = w.columns(n, n).into_owned();
    let rhs = -w.columns(0, n).into_owned();
    let qr = lhs.qr();
    let p = qr.r().solve_upper_triangular(&(qr.q().transpose() * rhs)).unwrap();
    (&p + p.transpose()) * 0.5
}
