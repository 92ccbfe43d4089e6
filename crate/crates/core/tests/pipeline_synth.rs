use csi_har::csi::amplitude_matrix;
use csi_har::dsp::DspConfig;
use csi_har::gru::{GruConfig, GruNetwork};
use csi_har::pipeline::{
    format_results, run_stream, window_count, DropPolicy, PipelineConfig, StreamMode,
};
use csi_har::synth::{
    build_dataset, generate_capture, generate_labeled_capture, ActivityProfile, SynthConfig,
};
use csi_har::{ClassLabel, Exec};

fn small_synth() -> SynthConfig {
    SynthConfig {
        seed: 3,
        frames_per_class: 600,
        ..SynthConfig::default()
    }
}

fn masked(results: &str) -> String {
    // Latency is wall-clock; everything before it must be reproducible.
    results
        .lines()
        .map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head).to_string())
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn replay_emits_one_result_per_window_and_is_reproducible() {
    let (capture, _) = generate_labeled_capture(&small_synth(), Exec::Parallel).unwrap();
    let net = GruNetwork::<f32>::init(GruConfig::default(), 1).unwrap();
    let cfg = PipelineConfig::default();
    let a = run_stream(capture.frames(), &net, &cfg, StreamMode::Threaded).unwrap();
    let b = run_stream(capture.frames(), &net, &cfg, StreamMode::Threaded).unwrap();
    let c = run_stream(capture.frames(), &net, &cfg, StreamMode::SingleThreaded).unwrap();
    assert_eq!(a.results.len(), window_count(capture.len(), 200, 200));
    assert_eq!(a.results.len(), 24);
    assert_eq!(
        masked(&format_results(&a.results)),
        masked(&format_results(&b.results))
    );
    assert_eq!(
        masked(&format_results(&a.results)),
        masked(&format_results(&c.results))
    );
    assert_eq!(a.dropped, 0);
    for r in &a.results {
        assert!((0.0..=1.0).contains(&r.presence_prob));
        assert!((r.activity_probs.iter().sum::<f64>() - 1.0).abs() < 1e-6);
    }
}

#[test]
fn overlapping_windows_and_drop_policy() {
    let (capture, _) = generate_labeled_capture(&small_synth(), Exec::Parallel).unwrap();
    let net = GruNetwork::<f32>::init(GruConfig::default(), 1).unwrap();
    let cfg = PipelineConfig {
        stride: 100,
        drop_policy: DropPolicy::DropOldest,
        ..PipelineConfig::default()
    };
    let out = run_stream(capture.frames(), &net, &cfg, StreamMode::Threaded).unwrap();
    assert_eq!(
        out.results.len() + out.dropped as usize,
        window_count(capture.len(), 200, 100)
    );
    let ts: Vec<u64> = out.results.iter().map(|r| r.start_timestamp_us).collect();
    assert!(ts.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn empty_room_has_the_lowest_common_mode_variance() {
    // Per window: variance over time of the subcarrier-averaged feature.
    // Motion moves all subcarriers together; the empty room's independent
    // per-subcarrier noise averages out.
    let cfg = SynthConfig {
        seed: 7,
        frames_per_class: 4000,
        ..SynthConfig::default()
    };
    let d = build_dataset(&cfg, &DspConfig::default(), Exec::Parallel).unwrap();
    let common_mode_var = |w: &csi_har::pipeline::Window| {
        let f = &w.features;
        let means: Vec<f64> = (0..f.rows())
            .map(|t| f.row(t).iter().map(|&v| v as f64).sum::<f64>() / f.cols() as f64)
            .collect();
        let m = means.iter().sum::<f64>() / means.len() as f64;
        means.iter().map(|v| (v - m).powi(2)).sum::<f64>() / means.len() as f64
    };
    let mut empty_max = 0.0f64;
    let mut active_min = f64::INFINITY;
    for w in d.train.iter().chain(&d.test) {
        let v = common_mode_var(w);
        if w.label == Some(ClassLabel::NoPerson) {
            empty_max = empty_max.max(v);
        } else {
            active_min = active_min.min(v);
        }
    }
    assert!(
        empty_max < active_min,
        "empty room {empty_max} vs activity {active_min}"
    );
}

#[test]
fn dataset_is_deterministic_and_balanced() {
    let cfg = SynthConfig {
        frames_per_class: 1000,
        ..small_synth()
    };
    let a = build_dataset(&cfg, &DspConfig::default(), Exec::Parallel).unwrap();
    let b = build_dataset(&cfg, &DspConfig::default(), Exec::Sequential).unwrap();
    assert_eq!(a.train.len(), b.train.len());
    for (x, y) in a
        .train
        .iter()
        .zip(&b.train)
        .chain(a.test.iter().zip(&b.test))
    {
        assert_eq!(x.features, y.features);
        assert_eq!(x.label, y.label);
    }
    for class in ClassLabel::ALL {
        assert_eq!(a.train.iter().filter(|w| w.label == Some(class)).count(), 4);
        assert_eq!(a.test.iter().filter(|w| w.label == Some(class)).count(), 1);
    }
}

/// Hann-tapered spectral centroid in Hz of the subcarrier-averaged amplitude.
fn centroid_hz(rows: &[f64], fs: f64) -> f64 {
    let n = rows.len();
    let m = rows.iter().sum::<f64>() / n as f64;
    let x: Vec<f64> = rows
        .iter()
        .enumerate()
        .map(|(t, v)| {
            (v - m) * (0.5 - 0.5 * (2.0 * std::f64::consts::PI * t as f64 / (n - 1) as f64).cos())
        })
        .collect();
    let (mut num, mut den) = (0.0, 0.0);
    for k in 1..=n / 2 {
        let (mut re, mut im) = (0.0, 0.0);
        for (t, v) in x.iter().enumerate() {
            let ang = -2.0 * std::f64::consts::PI * (k * t) as f64 / n as f64;
            re += v * ang.cos();
            im += v * ang.sin();
        }
        let p = re * re + im * im;
        num += p * k as f64 * fs / n as f64;
        den += p;
    }
    num / den
}

#[test]
fn activity_centroids_are_pairwise_separated() {
    const MARGIN_HZ: f64 = 0.05;
    let fs = DspConfig::default().sample_rate_hz;
    let mut centroids = Vec::new();
    for c in ClassLabel::ALL
        .into_iter()
        .filter(|c| *c != ClassLabel::NoPerson)
    {
        let p = ActivityProfile {
            noise_std: 0.0,
            ..ActivityProfile::for_class(c)
        };
        let cap = generate_capture(&p, 2000, 1).unwrap();
        let a = amplitude_matrix(cap.frames());
        let segs: Vec<f64> = (0..10)
            .map(|s| {
                let x: Vec<f64> = (s * 200..s * 200 + 200)
                    .map(|t| a.row(t).iter().sum::<f64>() / a.cols() as f64)
                    .collect();
                centroid_hz(&x, fs)
            })
            .collect();
        centroids.push((c, segs.iter().sum::<f64>() / segs.len() as f64));
    }
    for (i, (a, ca)) in centroids.iter().enumerate() {
        for (b, cb) in &centroids[i + 1..] {
            assert!(
                (ca - cb).abs() >= MARGIN_HZ,
                "{a:?} {ca:.3} Hz vs {b:?} {cb:.3} Hz"
            );
        }
    }
}
