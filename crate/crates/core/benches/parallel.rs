use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use csi_har::dsp::{DspConfig, Preprocessor};
use csi_har::gru::{batch_gradients, Example, GruConfig, GruNetwork};
use csi_har::synth::{build_dataset, SynthConfig};
use csi_har::{ClassLabel, Exec, Matrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn modes() -> [(&'static str, Exec); 2] {
    [
        ("sequential", Exec::Sequential),
        ("parallel", Exec::Parallel),
    ]
}

fn preprocessing(c: &mut Criterion) {
    let pre = Preprocessor::new(DspConfig::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let data = (0..200 * 52)
        .map(|_| rng.random_range(100.0..400.0))
        .collect();
    let amps = Matrix::from_vec(200, 52, data).unwrap();
    let mut g = c.benchmark_group("preprocess_window");
    for (name, exec) in modes() {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| pre.process(black_box(&amps), exec).unwrap())
        });
    }
    g.finish();
}

fn gradients(c: &mut Criterion) {
    let net = GruNetwork::<f32>::init(GruConfig::default(), 0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let windows: Vec<Matrix<f32>> = (0..8)
        .map(|_| {
            Matrix::from_vec(
                200,
                49,
                (0..200 * 49).map(|_| rng.random_range(0.0..1.0)).collect(),
            )
            .unwrap()
        })
        .collect();
    let batch: Vec<Example<f32>> = windows
        .iter()
        .zip(ClassLabel::ALL)
        .map(|(w, label)| Example { features: w, label })
        .collect();
    let mut g = c.benchmark_group("batch_gradients_8");
    g.sample_size(10);
    for (name, exec) in modes() {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| batch_gradients(&net, black_box(&batch), exec).unwrap())
        });
    }
    g.finish();
}

fn dataset(c: &mut Criterion) {
    let cfg = SynthConfig {
        frames_per_class: 400,
        ..SynthConfig::default()
    };
    let mut g = c.benchmark_group("build_dataset");
    g.sample_size(10);
    for (name, exec) in modes() {
        g.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| build_dataset(black_box(&cfg), &DspConfig::default(), exec).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, preprocessing, gradients, dataset);
criterion_main!(benches);
