use criterion::{criterion_group, criterion_main, Criterion};
use ncgft::exec::Execution;
use ncgft::lift::{build_lifted_basis, default_source_bases};
use ncgft::presets::case_spec;
use ncgft::ssbm::{scan_path, PathSpec, ScanOptions};

fn bench_scan(c: &mut Criterion) {
    let spec = case_spec("case1").unwrap();
    let basis = build_lifted_basis(&spec, &default_source_bases(&spec).unwrap()).unwrap();
    let path = PathSpec::Diagonal {
        from: 0.0,
        to: 1.0,
        samples: 11,
    };
    let mut group = c.benchmark_group("case1-scan");
    group.sample_size(10);
    for (name, execution) in [
        ("sequential", Execution::Sequential),
        ("parallel", Execution::Parallel),
    ] {
        let opts = ScanOptions {
            restarts: 8,
            bidirectional: false,
            execution,
            ..Default::default()
        };
        group.bench_function(name, |b| {
            b.iter(|| scan_path(&basis, &path, &opts).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_scan);
criterion_main!(benches);
