use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use nlcol::solver::{toeplitz_matvec_fft, BlockToeplitz};
use nlcol::Scheme;
use nlcol_bench::{probe_vector, system};

fn matvec(c: &mut Criterion) {
    let mut group = c.benchmark_group("matvec");
    group.sample_size(20);
    for (n, r) in [(1024, 8), (4096, 8), (4096, 128)] {
        let sys = system(n, r, Scheme::ShiftedSymmetric);
        let bt = BlockToeplitz::from_system(&sys).expect("toeplitz blocks");
        let v = probe_vector(sys.size());
        let id = format!("N{n}_r{r}");
        group.bench_with_input(BenchmarkId::new("dense", &id), &v, |b, v| b.iter(|| sys.matrix.matvec(black_box(v))));
        group.bench_with_input(BenchmarkId::new("fft", &id), &v, |b, v| b.iter(|| toeplitz_matvec_fft(&bt, black_box(v))));
    }
    group.finish();
}

criterion_group!(benches, matvec);
criterion_main!(benches);
