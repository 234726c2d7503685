use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nlcol::analysis::{solve_level, HorizonRule, StudyConfig};
use nlcol_bench::manufactured;

fn solve(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve");
    group.sample_size(10);
    let rules = [
        ("quarter", HorizonRule::Fixed(0.25)),
        ("ten_thirds_h", HorizonRule::Power { c: 10.0 / 3.0, beta: 1.0 }),
    ];
    for (name, rule) in rules {
        for h in [1.0 / 256.0, 1.0 / 1024.0] {
            let id = format!("{name}_h1/{}", (1.0 / h) as u32);
            for (method, cg) in [("direct", false), ("cg", true)] {
                let cfg = manufactured(rule, h, cg);
                group.bench_with_input(BenchmarkId::new(method, &id), &h, |b, &h| {
                    b.iter(|| solve_level(black_box(&cfg), h).expect("level solves"))
                });
            }
        }
    }
    let plane = StudyConfig::two_d(HorizonRule::Power { c: 1.0, beta: 0.5 }, vec![1.0 / 32.0]);
    group.bench_function("cg_2d_sqrt_h_h1/32", |b| b.iter(|| solve_level(black_box(&plane), 1.0 / 32.0).expect("level solves")));
    group.finish();
}

criterion_group!(benches, solve);
criterion_main!(benches);
