use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

use kgnr_bench::{grid, kg_state, profile, SIZES};
use kgnr_core::field::dealiased_cube;
use kgnr_core::kg::kg_step;
use kgnr_core::nls::nls_step;
use kgnr_core::{KgParams, NlsParams, Spectral};

fn fft(c: &mut Criterion) {
    let mut group = c.benchmark_group("fft");
    for n in SIZES {
        let g = grid(n);
        let values = profile(n).values().to_vec();
        group.throughput(Throughput::Elements((n * n) as u64));
        group.bench_with_input(BenchmarkId::new("roundtrip", n), &values, |b, v| {
            b.iter(|| g.inverse(&g.forward(black_box(v))))
        });
    }
    group.finish();
}

fn cube(c: &mut Criterion) {
    let mut group = c.benchmark_group("dealiased_cube");
    for n in SIZES {
        let f = profile(n);
        group.throughput(Throughput::Elements((n * n) as u64));
        group.bench_with_input(BenchmarkId::from_parameter(n), &f, |b, f| {
            b.iter(|| dealiased_cube(black_box(f), f, f).unwrap())
        });
    }
    group.finish();
}

fn steps(c: &mut Criterion) {
    let mut group = c.benchmark_group("step");
    for n in SIZES {
        let s = kg_state(n, 0.1);
        let p = KgParams::new(0.1, 1.0, s.grid(), 1.0).unwrap();
        group.bench_with_input(BenchmarkId::new("kg", n), &s, |b, s| {
            b.iter(|| kg_step(black_box(s), &p, p.dt).unwrap())
        });
        let g = profile(n);
        let np = NlsParams::new(1.0, g.grid(), 1e-2, 1.0).unwrap();
        group.bench_with_input(BenchmarkId::new("nls", n), &g, |b, g| {
            b.iter(|| nls_step(black_box(g), &np, np.dt).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, fft, cube, steps);
criterion_main!(benches);
