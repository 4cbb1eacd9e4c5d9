use proptest::prelude::*;
use riccati_geo::fixed_rank::{
    approx_distance, approx_distance_parts, grassmann_distance, horizontal_project, metric_fixed_rank,
    FixedRankPsd, HorizontalTangent, StiefelFrame,
};
use riccati_geo::linalg::{Mat, SymEig};
use riccati_geo::random;
use riccati_geo::spd::{congruence, distance_spd, geodesic_spd, metric_spd, SpdMatrix, SpdTangent};

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

fn tangent(x: &FixedRankPsd, seed: u64) -> HorizontalTangent {
    let mut rng = random::rng(seed);
    let udot = random::gaussian_matrix(&mut rng, x.n(), x.r());
    let sdot = random::symmetric(&mut rng, x.r());
    horizontal_project(x, &udot, &sdot).unwrap()
}

/// Moves a horizontal tangent to the gauge-transformed base point `(UO, O'SO)`.
fn gauge_tangent(x: &FixedRankPsd, t: &HorizontalTangent, o: &Mat) -> HorizontalTangent {
    HorizontalTangent::new(&x.gauge(o).unwrap(), t.delta() * o, o.transpose() * t.d() * o).unwrap()
}

fn pair(seed: u64, n: usize, r: usize) -> (FixedRankPsd, FixedRankPsd) {
    let mut rng = random::rng(seed);
    let x1 = random::fixed_rank(&mut rng, n, r, 1.0);
    // Second span: a bounded perturbation of the first.
    let bump = x1.u().project_out(&random::gaussian_matrix(&mut rng, n, r)) * 0.3;
    let u2 = StiefelFrame::orthonormalize(&(x1.u().as_matrix() * random::orthogonal(&mut rng, r) + bump)).unwrap();
    let x2 = FixedRankPsd::new(u2, random::spd(&mut rng, r, 1.0)).unwrap();
    (x1, x2)
}

fn dims() -> impl Strategy<Value = (usize, usize)> {
    (3usize..=8).prop_flat_map(|n| (Just(n), 1usize..n))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn spd_distance_is_congruence_and_inversion_invariant(seed in any::<u64>(), n in 2usize..=6) {
        let mut rng = random::rng(seed);
        let p = random::spd(&mut rng, n, 1.0);
        let q = random::spd(&mut rng, n, 1.0);
        let a = random::invertible(&mut rng, n, 0.7);
        let d = distance_spd(&p, &q).unwrap();
        let moved = distance_spd(&congruence(&a, &p).unwrap(), &congruence(&a, &q).unwrap()).unwrap();
        prop_assert!(rel_close(d, moved, 1e-8));
        prop_assert!(rel_close(d, distance_spd(&p.inverse(), &q.inverse()).unwrap(), 1e-8));
        prop_assert!(rel_close(d, distance_spd(&q, &p).unwrap(), 1e-10));
    }

    #[test]
    fn spd_distance_satisfies_triangle_inequality(seed in any::<u64>(), n in 1usize..=5) {
        let mut rng = random::rng(seed);
        let p = random::spd(&mut rng, n, 1.5);
        let q = random::spd(&mut rng, n, 1.5);
        let w = random::spd(&mut rng, n, 1.5);
        let direct = distance_spd(&p, &q).unwrap();
        let detour = distance_spd(&p, &w).unwrap() + distance_spd(&w, &q).unwrap();
        prop_assert!(direct <= detour * (1.0 + 1e-10) + 1e-12);
    }

    #[test]
    fn spd_geodesic_has_constant_speed(seed in any::<u64>(), n in 1usize..=5, s in 0.0f64..=1.0) {
        let mut rng = random::rng(seed);
        let p = random::spd(&mut rng, n, 1.0);
        let q = random::spd(&mut rng, n, 1.0);
        let mid = geodesic_spd(&p, &q, s).unwrap();
        let d = distance_spd(&p, &q).unwrap();
        prop_assert!((distance_spd(&p, &mid).unwrap() - s * d).abs() < 1e-8 * (1.0 + d));
        prop_assert!((distance_spd(&mid, &q).unwrap() - (1.0 - s) * d).abs() < 1e-8 * (1.0 + d));
    }

    #[test]
    fn spd_metric_is_congruence_invariant(seed in any::<u64>(), n in 1usize..=5) {
        let mut rng = random::rng(seed);
        let p = random::spd(&mut rng, n, 1.0);
        let y1 = random::symmetric(&mut rng, n);
        let y2 = random::symmetric(&mut rng, n);
        let a = random::invertible(&mut rng, n, 0.5);
        let base = metric_spd(&p, &SpdTangent::new(y1.clone()).unwrap(), &SpdTangent::new(y2.clone()).unwrap()).unwrap();
        let push = |y: &Mat| SpdTangent::symmetric_part(&(&a * y * a.transpose()));
        let moved = metric_spd(&congruence(&a, &p).unwrap(), &push(&y1), &push(&y2)).unwrap();
        prop_assert!(rel_close(base, moved, 1e-8));
    }

    #[test]
    fn fixed_rank_metric_is_gauge_invariant(seed in any::<u64>(), (n, r) in dims()) {
        let mut rng = random::rng(seed);
        let x = random::fixed_rank(&mut rng, n, r, 1.0);
        let o = random::orthogonal(&mut rng, r);
        let (t1, t2) = (tangent(&x, seed ^ 1), tangent(&x, seed ^ 2));
        let base = metric_fixed_rank(&x, &t1, &t2).unwrap();
        let xo = x.gauge(&o).unwrap();
        let moved = metric_fixed_rank(&xo, &gauge_tangent(&x, &t1, &o), &gauge_tangent(&x, &t2, &o)).unwrap();
        prop_assert!(rel_close(base, moved, 1e-9));
        prop_assert!(metric_fixed_rank(&x, &t1, &t1).unwrap() >= 0.0);
    }

    #[test]
    fn approx_distance_invariances((n, r) in dims(), seed in any::<u64>(), c in 0.1f64..10.0) {
        let (x1, x2) = pair(seed, n, r);
        let mut rng = random::rng(seed.wrapping_add(7));
        let d = approx_distance(&x1, &x2).unwrap();

        let o1 = random::orthogonal(&mut rng, r);
        let o2 = random::orthogonal(&mut rng, r);
        let gauged = approx_distance(&x1.gauge(&o1).unwrap(), &x2.gauge(&o2).unwrap()).unwrap();
        prop_assert!(rel_close(d, gauged, 1e-9));

        prop_assert!(rel_close(d, approx_distance(&x2, &x1).unwrap(), 1e-9));

        let theta = random::orthogonal(&mut rng, n);
        let rotate = |x: &FixedRankPsd| {
            FixedRankPsd::new(StiefelFrame::new(&theta * x.u().as_matrix()).unwrap(), x.s().clone()).unwrap()
        };
        prop_assert!(rel_close(d, approx_distance(&rotate(&x1), &rotate(&x2)).unwrap(), 1e-9));

        let dilate = |x: &FixedRankPsd| x.with_s(x.s().scale(c).unwrap()).unwrap();
        prop_assert!(rel_close(d, approx_distance(&dilate(&x1), &dilate(&x2)).unwrap(), 1e-9));

        let pinv = |x: &FixedRankPsd| x.with_s(x.s().inverse()).unwrap();
        prop_assert!(rel_close(d, approx_distance(&pinv(&x1), &pinv(&x2)).unwrap(), 1e-9));
    }

    #[test]
    fn approx_distance_components_are_consistent((n, r) in dims(), seed in any::<u64>()) {
        let (x1, x2) = pair(seed, n, r);
        let parts = approx_distance_parts(&x1, &x2).unwrap();
        prop_assert!((parts.total - parts.grassmann.hypot(parts.cone)).abs() < 1e-14);
        prop_assert!((parts.grassmann - grassmann_distance(x1.u(), x2.u()).unwrap()).abs() < 1e-14);
        prop_assert!(parts.grassmann <= (r as f64).sqrt() * std::f64::consts::FRAC_PI_2 + 1e-12);
    }

    #[test]
    fn grassmann_distance_ignores_frame_rotation((n, r) in dims(), seed in any::<u64>()) {
        let mut rng = random::rng(seed);
        let u1 = random::stiefel(&mut rng, n, r);
        let u2 = random::stiefel(&mut rng, n, r);
        let d = grassmann_distance(&u1, &u2).unwrap();
        let o = random::orthogonal(&mut rng, r);
        prop_assert!((d - grassmann_distance(&u1.rotate(&o).unwrap(), &u2).unwrap()).abs() < 1e-9);
        prop_assert!(grassmann_distance(&u1, &u1.rotate(&o).unwrap()).unwrap() < 1e-7);
    }

    #[test]
    fn spd_sampler_respects_spread(seed in any::<u64>(), n in 1usize..=6) {
        let mut rng = random::rng(seed);
        let p = random::spd(&mut rng, n, 1.0);
        let eig = SymEig::new(p.as_matrix());
        prop_assert!(eig.min() >= (-1.0f64).exp() * (1.0 - 1e-12));
        prop_assert!(eig.max() <= 1.0f64.exp() * (1.0 + 1e-12));
        prop_assert!(SpdMatrix::new(p.as_matrix().clone()).is_ok());
    }
}
