use absakit::config::defaults;
use absakit::dataset::LoadedDataset;
use absakit::training::train;
use absakit::{Corpus, Predictor, TaskKind};
use absakit_bench::examples;
use criterion::{black_box, criterion_group, criterion_main, Criterion};

fn data(task: TaskKind, n: usize) -> LoadedDataset {
    let ex = examples(n, 3);
    let (train, valid) = ex.split_at(n * 9 / 10);
    let wrap = |e: &[absakit::AbsaExample]| match task {
        TaskKind::Asc => Corpus::Triples(absakit::corpus::examples_to_triples(e)),
        TaskKind::Atesc => Corpus::Examples(e.to_vec()),
    };
    LoadedDataset { name: "bench".into(), task, train: wrap(train), valid: wrap(valid), test: wrap(&[]) }
}

fn training(c: &mut Criterion) {
    let mut group = c.benchmark_group("train");
    group.sample_size(10);
    for task in [TaskKind::Asc, TaskKind::Atesc] {
        let d = data(task, 500);
        let cfg = defaults(task).set("epochs", "3").unwrap();
        group.bench_function(task.as_str(), |b| b.iter(|| train(black_box(&cfg), &d).unwrap()));
    }
    group.finish();

    let d = data(TaskKind::Atesc, 500);
    let model = train(&defaults(TaskKind::Atesc), &d).unwrap().model;
    let inputs = examples(200, 11);
    c.bench_function("infer/atesc-200", |b| {
        b.iter(|| inputs.iter().map(|e| model.infer(black_box(e)).unwrap().spans.len()).sum::<usize>())
    });
}

criterion_group!(benches, training);
criterion_main!(benches);
