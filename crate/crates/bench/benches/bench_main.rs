use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use glyphsearch_bench::{noise_image, random_index, unit_vectors, TITLE};
use glyphsearch_core::encoders::{ReferenceImageEncoder, ReferenceTextEncoder};
use glyphsearch_core::knn::{decode_index, encode_index, Parallelism};
use glyphsearch_core::typograph::get_max_font_size;
use glyphsearch_core::{render_text, RenderSpec, Typeface};

fn typograph(c: &mut Criterion) {
    let face = Typeface::builtin();
    let mut g = c.benchmark_group("typograph");
    for side in [224u32, 512] {
        let img = noise_image(side, side, 1);
        g.bench_with_input(BenchmarkId::new("max_font_size", side), &side, |b, &w| {
            b.iter(|| get_max_font_size(&face, w, w, black_box(TITLE)).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("render_text", side), &img, |b, img| {
            let spec = RenderSpec::default();
            b.iter(|| render_text(img, black_box(TITLE), &spec, &face).unwrap())
        });
    }
    g.finish();
}

fn encoders(c: &mut Criterion) {
    let image_enc = ReferenceImageEncoder::new("ref-image-v1", 256, 16, 7).unwrap();
    let text_enc = ReferenceTextEncoder::new("ref-text-v1", 256, 7).unwrap();
    let img = noise_image(224, 224, 2);
    let mut g = c.benchmark_group("encoders");
    g.bench_function("reference_image_224", |b| b.iter(|| image_enc.embed(black_box(&img)).unwrap()));
    g.bench_function("reference_text", |b| b.iter(|| text_enc.embed(black_box(TITLE)).unwrap()));
    g.finish();
}

fn knn(c: &mut Criterion) {
    let mut g = c.benchmark_group("knn_search");
    let query = unit_vectors(1, 256, 99).pop().unwrap();
    for n in [10_000usize, 100_000] {
        let idx = random_index(n, 256, 5);
        g.throughput(Throughput::Elements(n as u64));
        for (name, mode) in [("sequential", Parallelism::Sequential), ("parallel", Parallelism::Parallel)] {
            g.bench_with_input(BenchmarkId::new(name, n), &idx, |b, idx| {
                b.iter(|| idx.search_with(black_box(&query), 10, mode).unwrap())
            });
        }
    }
    g.finish();
}

fn store(c: &mut Criterion) {
    let idx = random_index(20_000, 256, 6);
    let bytes = encode_index(&idx);
    let mut g = c.benchmark_group("store");
    g.throughput(Throughput::Bytes(bytes.len() as u64));
    g.bench_function("encode", |b| b.iter(|| encode_index(black_box(&idx))));
    g.bench_function("decode", |b| b.iter(|| decode_index(black_box(&bytes)).unwrap()));
    g.finish();
}

criterion_group!(benches, typograph, encoders, knn, store);
criterion_main!(benches);
