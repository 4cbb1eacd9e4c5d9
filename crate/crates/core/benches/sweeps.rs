use std::hint::black_box;
use std::time::Duration;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use riccati_geo::linalg::Mat;
use riccati_geo::par;
use riccati_geo::random;
use riccati_geo::riccati::{integrate_riccati, LtiSystem};
use riccati_geo::spd::{congruence, distance_spd, SpdMatrix};

struct Trial {
    p: SpdMatrix,
    q: SpdMatrix,
    a: Mat,
}

fn trials(count: usize, n: usize) -> Vec<Trial> {
    let mut rng = random::rng(17);
    (0..count)
        .map(|_| Trial { p: random::spd(&mut rng, n, 1.0), q: random::spd(&mut rng, n, 1.0), a: random::invertible(&mut rng, n, 0.7) })
        .collect()
}

fn invariance_defect(t: &Trial) -> f64 {
    let d = distance_spd(&t.p, &t.q).unwrap();
    let moved = distance_spd(&congruence(&t.a, &t.p).unwrap(), &congruence(&t.a, &t.q).unwrap()).unwrap();
    let inverted = distance_spd(&t.p.inverse(), &t.q.inverse()).unwrap();
    (d - moved).abs().max((d - inverted).abs())
}

fn invariance_sweep(c: &mut Criterion) {
    let mut group = c.benchmark_group("invariance_trials");
    for n in [4, 12] {
        let batch = trials(256, n);
        group.bench_with_input(BenchmarkId::new("parallel", n), &batch, |b, batch| {
            b.iter(|| black_box(par::map(batch, invariance_defect)))
        });
        group.bench_with_input(BenchmarkId::new("sequential", n), &batch, |b, batch| {
            b.iter(|| black_box(par::map_seq(batch, invariance_defect)))
        });
    }
    group.finish();
}

fn trajectory_sweep(c: &mut Criterion) {
    let n = 8;
    let mut rng = random::rng(29);
    let sys = LtiSystem::new(
        random::gaussian_matrix(&mut rng, n, n) * 0.3,
        random::gaussian_matrix(&mut rng, 2, n),
        Mat::identity(n, n),
        Mat::identity(2, 2),
    )
    .unwrap();
    let starts: Vec<SpdMatrix> = (0..32).map(|_| random::spd(&mut rng, n, 1.0)).collect();
    let run = |i: usize| integrate_riccati(&sys, &starts[i], 2.0, 1e-2).unwrap().len();

    let mut group = c.benchmark_group("riccati_trajectories");
    group.sample_size(20).measurement_time(Duration::from_secs(5));
    group.bench_function("parallel", |b| b.iter(|| black_box(par::map_indices(starts.len(), run))));
    group.bench_function("sequential", |b| b.iter(|| black_box(par::map_indices_seq(starts.len(), run))));
    group.finish();
}

criterion_group!(benches, invariance_sweep, trajectory_sweep);
criterion_main!(benches);
