use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use twinlink::kinematics::{ur10, JointConfig, UrIkSolver};

fn configs() -> Vec<JointConfig> {
    (0..64)
        .map(|i| {
            let s = i as f64 * 0.37;
            JointConfig::new([
                s.sin(),
                -1.2 + 0.3 * s.cos(),
                1.1 + 0.2 * (2.0 * s).sin(),
                -0.5,
                1.57,
                0.3 * s,
            ])
            .unwrap()
        })
        .collect()
}

fn kinematics(c: &mut Criterion) {
    let chain = ur10();
    let qs = configs();
    c.bench_function("fk_ur10_x64", |b| {
        b.iter(|| {
            for q in &qs {
                black_box(chain.forward_kinematics(black_box(q)));
            }
        })
    });
    let solver = UrIkSolver::new(&chain).unwrap();
    let targets: Vec<_> = qs.iter().map(|q| chain.forward_kinematics(q)).collect();
    c.bench_function("ik_ur10_x64", |b| {
        b.iter(|| {
            for t in &targets {
                black_box(solver.solve(black_box(t)));
            }
        })
    });
    let w = [1.0; 6];
    c.bench_function("ik_nearest_ur10_x64", |b| {
        b.iter(|| {
            for (t, q) in targets.iter().zip(&qs) {
                black_box(solver.solve_nearest(t, q, &w));
            }
        })
    });
}

criterion_group!(benches, kinematics);
criterion_main!(benches);
