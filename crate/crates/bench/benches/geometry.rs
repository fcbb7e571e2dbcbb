use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use panosga::{
    accumulate, compose, rotate_labels, sdpe_loss, ImageDims, LabelMap, OffsetField, PatchGrid,
    RotationAngles, SourceMap,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;

fn random_labels(dims: ImageDims, classes: u8, rng: &mut ChaCha8Rng) -> LabelMap {
    let data = (0..dims.pixel_count())
        .map(|_| rng.gen_range(0..classes))
        .collect();
    LabelMap::new(dims, data, 255).unwrap()
}

fn rotation(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let dims = ImageDims::new(512, 1024).unwrap();
    let lbl = random_labels(dims, 13, &mut rng);
    let r = compose(RotationAngles::new(90.0, 5.0, 5.0));
    c.bench_function("rotate_labels_512x1024", |b| {
        b.iter(|| rotate_labels(black_box(&lbl), black_box(&r)))
    });
    c.bench_function("source_map_512x1024", |b| {
        b.iter(|| SourceMap::new(black_box(dims), black_box(&r)))
    });
}

fn offsets(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let grid = PatchGrid::new(32, 64, 3, 4.0).unwrap();
    let data = (0..grid.field_len())
        .map(|_| rng.gen_range(-4.0..4.0))
        .collect();
    let field = OffsetField::new(grid, data).unwrap();
    c.bench_function("sdpe_loss_32x64x3", |b| {
        b.iter(|| sdpe_loss(black_box(&field)))
    });
}

fn metrics(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let dims = ImageDims::new(512, 1024).unwrap();
    let gt = random_labels(dims, 13, &mut rng);
    c.bench_function("accumulate_512x1024", |b| {
        b.iter_batched(
            || random_labels(dims, 13, &mut ChaCha8Rng::seed_from_u64(4)),
            |pred| accumulate(&pred, black_box(&gt), 13),
            BatchSize::LargeInput,
        )
    });
}

criterion_group!(benches, rotation, offsets, metrics);
criterion_main!(benches);
