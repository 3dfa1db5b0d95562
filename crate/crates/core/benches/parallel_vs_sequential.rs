//! Parallel map against the sequential fallback on a propagator scan, the
//! workload the CLI parallelizes. Points avoid the light-cone guard band.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use fieldport_core::conventions::Conventions;
use fieldport_core::par;
use fieldport_core::propagator::{dplus_closed_form, FourVector};

fn scan_points(n: usize) -> Vec<(f64, f64)> {
    let mut pts = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let t = 0.05 + 3.0 * i as f64 / n as f64;
            let r = 0.05 + 3.0 * j as f64 / n as f64;
            // skip the immediate cone neighborhood
            if (t * t - r * r).abs() > 1e-2 {
                pts.push((t, r));
            }
        }
    }
    pts
}

fn bench_scan(c: &mut Criterion) {
    let conv = Conventions::new(1.0, 3).unwrap();
    let pts = scan_points(96);
    let eval = |&(t, r): &(f64, f64)| {
        dplus_closed_form(&FourVector::radial(t, r, 3), &conv)
            .map(|v| v.value)
            .unwrap_or_default()
    };

    let mut group = c.benchmark_group("propagator_scan");
    group.bench_with_input(BenchmarkId::new("parallel", pts.len()), &pts, |b, pts| {
        b.iter(|| par::map_slice(pts, eval))
    });
    group.bench_with_input(BenchmarkId::new("sequential", pts.len()), &pts, |b, pts| {
        b.iter(|| par::map_slice_seq(pts, eval))
    });
    group.finish();
}

criterion_group!(benches, bench_scan);
criterion_main!(benches);
