use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use dmimo::precoders::{build_precoding_matrix, mrt, orthogonalize, zf, InfoAccess, NoiseReference, PrecoderEntry};
use dmimo_bench::{gaussian_channel, los_drop};
use std::hint::black_box;

fn matrix_precoders(c: &mut Criterion) {
    let mut group = c.benchmark_group("zero_forcing");
    for k in [5, 10, 32] {
        let h = gaussian_channel(64, k, 1);
        group.bench_with_input(BenchmarkId::from_parameter(k), &h, |b, h| b.iter(|| zf(black_box(h)).unwrap()));
    }
    group.finish();

    let h = gaussian_channel(64, 10, 2);
    let v = h.as_matrix().columns(1, 9).into_owned();
    c.bench_function("orthogonalize_64x9", |b| {
        b.iter(|| orthogonalize(&mrt(&h.column(0)).unwrap(), black_box(&v)).unwrap())
    });
}

fn named_precoders(c: &mut Criterion) {
    let (geometry, positions, h) = los_drop(10, 3);
    let noise = NoiseReference {
        variance: 1e-6,
        reference_power: 1e-4,
    };
    let mut group = c.benchmark_group("build_precoding_matrix_k10");
    for name in ["MRT", "RZF", "nf_nf", "Rnf_nf", "DIS_RMRT_nf", "DIS_RZF"] {
        let entry = PrecoderEntry::named(name).unwrap();
        let access = InfoAccess::new(&geometry, entry.grants, noise)
            .with_csi(&h)
            .with_positions(&positions);
        group.bench_function(name, |b| b.iter(|| build_precoding_matrix(&entry.spec, black_box(&access)).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, matrix_precoders, named_precoders);
criterion_main!(benches);
