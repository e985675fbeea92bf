use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use esar_bench::{keypoints, names, perturbed, procedure_log, rng, rows};
use esar_core::anomaly::{fit_forest_rows, shapley_attribution, ForestParams};
use esar_core::features::{extract_matrix, WindowSpec};
use esar_core::metrics::score_logs;
use esar_core::model::{ActivityClass, LogSource, ProcedureModel};
use esar_core::parser::{parse_log, render_log, Continuity, LogFormat, ParseOptions};
use esar_core::sequence::validate;

fn logs(c: &mut Criterion) {
    let mut r = rng(1);
    let gt = procedure_log(&mut r, 2, LogSource::GroundTruth);
    let pred = perturbed(&mut r, &gt);
    let text = render_log(&pred, LogFormat::A);
    let opts = ParseOptions::new("B01T1", LogFormat::A, Continuity::Stitch);
    c.bench_function("parse_log", |b| b.iter(|| parse_log(black_box(&text), &opts).unwrap()));
    let model = ProcedureModel::default();
    c.bench_function("validate", |b| b.iter(|| validate(black_box(&gt), &model)));
    c.bench_function("score_logs", |b| {
        b.iter(|| score_logs(black_box(&gt), &pred, 1.0, None, &ActivityClass::ALL).unwrap())
    });
}

fn motion(c: &mut Criterion) {
    let mut r = rng(2);
    let series = keypoints(&mut r, 17, 30.0, 60.0);
    let spec = WindowSpec::new(4.0, 2.0).unwrap();
    c.bench_function("extract_matrix_60s", |b| b.iter(|| extract_matrix(black_box(&series), spec).unwrap()));

    let train = rows(&mut r, 1000, 340);
    let params = ForestParams { n_trees: 100, subsample_size: 256, seed: 0 };
    c.bench_function("fit_forest_1000x340", |b| b.iter(|| fit_forest_rows(black_box(&train), &names(340), params).unwrap()));

    let model = fit_forest_rows(&train, &names(340), params).unwrap();
    let background: Vec<Vec<f64>> = train.iter().step_by(50).cloned().collect();
    let mut g = c.benchmark_group("shapley");
    g.sample_size(10);
    g.bench_function("permutation_shapley_340x20", |b| {
        b.iter(|| shapley_attribution(&model, black_box(&train[0]), &background, 20, 7).unwrap())
    });
    g.finish();
}

criterion_group!(benches, logs, motion);
criterion_main!(benches);
