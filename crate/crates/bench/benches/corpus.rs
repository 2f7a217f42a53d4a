use absakit::corpus::{convert, parse, serialize, validate};
use absakit::{Corpus, EncodingKind};
use absakit_bench::examples;
use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

fn round_trip(c: &mut Criterion) {
    let corpus = Corpus::Examples(examples(2000, 7));
    let mut group = c.benchmark_group("parse");
    for kind in [EncodingKind::AtescColumns, EncodingKind::SpanTagInline, EncodingKind::AscTriples] {
        let doc = serialize(&corpus, kind).unwrap();
        group.throughput(Throughput::Bytes(doc.len() as u64));
        group.bench_with_input(BenchmarkId::from_parameter(kind), &doc, |b, doc| {
            b.iter(|| parse(black_box(doc), kind).unwrap())
        });
    }
    group.finish();

    let atesc = serialize(&corpus, EncodingKind::AtescColumns).unwrap();
    c.bench_function("convert/atesc-to-asc", |b| {
        b.iter(|| convert(black_box(&atesc), EncodingKind::AtescColumns, EncodingKind::AscTriples).unwrap())
    });
    c.bench_function("validate/atesc", |b| b.iter(|| validate(black_box(&atesc), EncodingKind::AtescColumns)));
}

criterion_group!(benches, round_trip);
criterion_main!(benches);
