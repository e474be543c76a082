use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use rde_core::types::sample_iid;
use rde_core::{rde, DecoderMode, ProtocolConfig, Scenario};

fn genie(c: &mut Criterion) {
    let d = Scenario::builtin("ex1", 0.2).unwrap().distribution().unwrap();
    let mut g = c.benchmark_group("rde_genie_ex1");
    for n in [64usize, 256, 1024] {
        let x = sample_iid(&d, n, 1).unwrap();
        let cfg = ProtocolConfig::new(1.0 / (n as f64).sqrt(), DecoderMode::Genie);
        g.bench_with_input(BenchmarkId::from_parameter(n), &x, |b, x| {
            b.iter(|| rde(black_box(x), &cfg, 7).unwrap())
        });
    }
    g.finish();
}

fn exact(c: &mut Criterion) {
    let d = Scenario::builtin("ex1", 0.2).unwrap().distribution().unwrap();
    let mut g = c.benchmark_group("rde_exact_ex1");
    g.sample_size(10);
    for n in [16usize, 32] {
        let x = sample_iid(&d, n, 1).unwrap();
        let cfg = ProtocolConfig::new(0.25, DecoderMode::Exact);
        g.bench_with_input(BenchmarkId::from_parameter(n), &x, |b, x| {
            b.iter(|| rde(black_box(x), &cfg, 7).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, genie, exact);
criterion_main!(benches);
