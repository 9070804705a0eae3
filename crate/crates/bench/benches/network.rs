use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use delimiter_bench::mixture;
use delimiter_core::net::{build_model, stack, NetConfig};

fn forward_backward(c: &mut Criterion) {
    let config = NetConfig {
        sample_rate: 8000,
        ..NetConfig::default()
    };
    let model = build_model(&config).unwrap();
    let clip = mixture(1.0, 8000);
    let mut g = c.benchmark_group("network");
    g.sample_size(10);
    for batch in [1usize, 8] {
        let half = clip.slice(0, 4000).unwrap();
        let items: Vec<_> = (0..batch).map(|_| &half).collect();
        let x = stack(&items).unwrap();
        g.bench_with_input(BenchmarkId::new("forward 0.5 s", batch), &x, |b, x| {
            b.iter(|| model.forward(black_box(x)).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("forward+backward 0.5 s", batch), &x, |b, x| {
            b.iter(|| {
                let mut traced = model.trace(black_box(x), true).unwrap();
                let reference = traced.graph.constant(x.clone());
                let loss = traced.graph.neg_si_sdr(traced.output, reference).unwrap();
                traced.graph.backward(loss).unwrap();
            })
        });
    }
    g.finish();
}

criterion_group!(benches, forward_backward);
criterion_main!(benches);
