use std::fs;
use std::io::Write as _;
use std::path::Path;
use std::time::{Duration, Instant};

use csi_har::csi::{read_capture, write_capture, CsiFrame};
use csi_har::dsp::{design_butterworth, Preprocessor};
use csi_har::gru::io::save_network;
use csi_har::gru::{fit, Example, GruNetwork};
use csi_har::pipeline::{
    benchmark, featurize, format_results, format_windows, run_stream, write_windows, DropPolicy,
    StreamMode, Window, Windower,
};
use csi_har::quant::{
    accuracy_report, agreement_report, fp16_roundtrip, quantize_network, CalibrationSet, Model,
    QuantGruNetwork,
};
use csi_har::synth::{
    generate_labeled_capture, labelled_windows, read_labels, split_stratified, write_labels,
};
use csi_har::Exec;
use log::info;

use crate::config::{DatasetManifest, FileConfig};
use crate::error::CliError;
use crate::{
    BenchArgs, Cli, Command, EvalArgs, FilterDesignArgs, PreprocessArgs, QuantizeArgs, ReplayArgs,
};
use crate::{SynthArgs, TrainArgs};

struct Ctx {
    cfg: FileConfig,
    seed: u64,
    exec: Exec,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = FileConfig::load(cli.config.as_deref())?;
    let seed = cli.seed.or(cfg.seed).unwrap_or(0);
    let exec = if cli.sequential {
        Exec::Sequential
    } else {
        Exec::Parallel
    };
    let ctx = Ctx { cfg, seed, exec };
    match cli.command {
        Command::Synth(a) => synth(ctx, a),
        Command::Preprocess(a) => preprocess(ctx, a),
        Command::FilterDesign(a) => filter_design(ctx, a),
        Command::Train(a) => train(ctx, a),
        Command::Eval(a) => eval(ctx, a),
        Command::Quantize(a) => quantize(ctx, a),
        Command::Replay(a) => replay(ctx, a),
        Command::Bench(a) => bench(ctx, a),
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => write_file(p, text),
        None => {
            let mut stdout = std::io::stdout().lock();
            match stdout.write_all(text.as_bytes()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
                    Err(CliError::io(Path::new("<stdout>"), e))
                }
                _ => Ok(()),
            }
        }
    }
}

fn synth(ctx: Ctx, a: SynthArgs) -> Result<(), CliError> {
    let mut s = ctx.cfg.synth;
    s.seed = ctx.seed;
    s.frames_per_class = a.frames_per_class.unwrap_or(s.frames_per_class);
    s.split_ratio = a.split.unwrap_or(s.split_ratio);
    s.noise_std = a.noise.unwrap_or(s.noise_std);
    s.window_len = a.window_len.unwrap_or(s.window_len);
    let (capture, spans) = generate_labeled_capture(&s, ctx.exec)?;
    fs::create_dir_all(&a.out).map_err(|e| CliError::io(&a.out, e))?;
    let manifest = DatasetManifest {
        capture: "capture.csv".into(),
        labels: "labels.csv".into(),
        synth: s,
    };
    write_capture(a.out.join(&manifest.capture), &capture)?;
    write_labels(a.out.join(&manifest.labels), &spans)?;
    manifest.write(&a.out)?;
    println!(
        "{} frames, {} classes -> {}",
        capture.len(),
        spans.len(),
        a.out.display()
    );
    Ok(())
}

/// Windows of a dataset directory, split as recorded in its manifest.
fn load_dataset(ctx: &Ctx, dir: &Path) -> Result<(Vec<Window>, Vec<Window>), CliError> {
    let m = DatasetManifest::read(dir)?;
    let capture = read_capture(dir.join(&m.capture))?;
    let spans = read_labels(dir.join(&m.labels))?;
    let windows = labelled_windows(&capture, &spans, m.synth.window_len, &ctx.cfg.dsp, ctx.exec)?;
    let (train, test) = split_stratified(windows, m.synth.split_ratio)?;
    info!(
        "{}: {} train / {} test windows",
        dir.display(),
        train.len(),
        test.len()
    );
    Ok((train, test))
}

/// Consecutive windows of an unlabelled capture.
fn stream_windows(
    ctx: &Ctx,
    frames: &[CsiFrame],
    len: usize,
    stride: usize,
) -> Result<Vec<Window>, CliError> {
    let mut windower = Windower::new(len, stride)?;
    let mut raws = Vec::new();
    for f in frames {
        if let Some(w) = windower.push(f)? {
            raws.push(w);
        }
    }
    let pre = Preprocessor::new(ctx.cfg.dsp.clone())?;
    ctx.exec
        .map(&raws, |r| -> Result<Window, CliError> {
            Ok(Window {
                features: featurize(&pre, &r.amplitudes, Exec::Sequential)?,
                start_timestamp_us: r.start_timestamp_us,
                label: None,
            })
        })
        .into_iter()
        .collect()
}

fn preprocess(ctx: Ctx, a: PreprocessArgs) -> Result<(), CliError> {
    let capture = read_capture(&a.capture)?;
    let len = a.window_len.unwrap_or(ctx.cfg.pipeline.window_len);
    let windows = match &a.labels {
        Some(labels) => {
            labelled_windows(&capture, &read_labels(labels)?, len, &ctx.cfg.dsp, ctx.exec)?
        }
        None => stream_windows(
            &ctx,
            capture.frames(),
            len,
            a.stride.unwrap_or(ctx.cfg.pipeline.stride),
        )?,
    };
    info!("{} windows", windows.len());
    match &a.out {
        Some(p) => write_windows(p, &windows)?,
        None => emit(None, &format_windows(&windows))?,
    }
    Ok(())
}

fn filter_design(ctx: Ctx, a: FilterDesignArgs) -> Result<(), CliError> {
    let d = &ctx.cfg.dsp;
    let f = design_butterworth(
        a.order.unwrap_or(d.filter_order),
        a.cutoff.unwrap_or(d.cutoff_hz),
        a.fs.unwrap_or(d.sample_rate_hz),
    )?;
    print!("{}", f.report());
    Ok(())
}

fn train(ctx: Ctx, a: TrainArgs) -> Result<(), CliError> {
    let (train, test) = load_dataset(&ctx, &a.data)?;
    let mut model_cfg = ctx.cfg.model;
    model_cfg.hidden_size = a.hidden.unwrap_or(model_cfg.hidden_size);
    model_cfg.input_size = ctx.cfg.dsp.subcarriers_kept;
    let mut tc = ctx.cfg.train.clone();
    tc.seed = ctx.seed;
    tc.steps = a.steps.unwrap_or(tc.steps);
    tc.learning_rate = a.lr.unwrap_or(tc.learning_rate);
    tc.batch_size = a.batch_size.unwrap_or(tc.batch_size);
    let mut net = GruNetwork::<f32>::init(model_cfg, ctx.seed)?;
    let examples: Vec<Example<f32>> = train
        .iter()
        .filter_map(|w| {
            w.label.map(|label| Example {
                features: &w.features,
                label,
            })
        })
        .collect();
    let started = Instant::now();
    let report = fit(&mut net, &examples, &tc, ctx.exec, |step, loss| {
        if step % 20 == 0 || step + 1 == tc.steps {
            info!("step {step:>4}  loss {loss:.4}");
        }
    })?;
    save_network(&a.out, &net)?;
    let acc = accuracy_report(&net, &test, ctx.cfg.pipeline.presence_threshold, ctx.exec)?;
    let pct = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{:.2}%", 100.0 * v));
    println!(
        "trained {} parameters, {} steps in {:.1} s, final loss {:.4}; test mean {} presence {} -> {}",
        net.count_params(),
        tc.steps,
        started.elapsed().as_secs_f64(),
        report.losses.last().copied().unwrap_or(f64::NAN),
        pct(acc.mean_activity),
        pct(acc.presence.accuracy),
        a.out.display()
    );
    Ok(())
}

fn eval(ctx: Ctx, a: EvalArgs) -> Result<(), CliError> {
    let model = Model::load(&a.model)?;
    let (_, test) = load_dataset(&ctx, &a.data)?;
    let threshold = a.threshold.unwrap_or(ctx.cfg.pipeline.presence_threshold);
    let report = accuracy_report(&model, &test, threshold, ctx.exec)?;
    print!("{}", report.to_text());
    if let Some(p) = &a.json {
        write_file(p, &report.to_json())?;
    }
    Ok(())
}

fn load_fp32(path: &Path) -> Result<GruNetwork<f32>, CliError> {
    match Model::load(path)? {
        Model::Fp32(net) => Ok(net),
        Model::Int8(_) => Err(CliError::Config(format!(
            "{} is already an INT8 model",
            path.display()
        ))),
    }
}

fn calibrated(net: &GruNetwork<f32>, windows: &[Window]) -> Result<QuantGruNetwork, CliError> {
    let features: Vec<_> = windows.iter().map(|w| w.features.clone()).collect();
    let mut q = quantize_network(net)?;
    q.calibrate(net, &CalibrationSet::new(&features)?)?;
    Ok(q)
}

fn quantize(ctx: Ctx, a: QuantizeArgs) -> Result<(), CliError> {
    let net = load_fp32(&a.model)?;
    let (train, test) = load_dataset(&ctx, &a.data)?;
    let q = calibrated(&net, &train)?;
    q.save(&a.out)?;
    let threshold = a.threshold.unwrap_or(ctx.cfg.pipeline.presence_threshold);
    let int8 = agreement_report(&net, &q, "int8", &test, threshold, ctx.exec)?;
    let half = fp16_roundtrip(&net)?;
    let fp16 = agreement_report(&net, &half, "fp16", &test, threshold, ctx.exec)?;
    print!("{}\n{}", int8.to_text(), fp16.to_text());
    if let Some(p) = &a.report {
        let json = serde_json::json!({ "int8": int8, "fp16": fp16 });
        write_file(p, &serde_json::to_string_pretty(&json).expect("serializes"))?;
    }
    Ok(())
}

fn replay(ctx: Ctx, a: ReplayArgs) -> Result<(), CliError> {
    let model = Model::load(&a.model)?;
    let capture = read_capture(&a.capture)?;
    let mut pc = ctx.cfg.pipeline.clone();
    pc.dsp = ctx.cfg.dsp.clone();
    pc.stride = a.stride.unwrap_or(pc.stride);
    pc.presence_threshold = a.threshold.unwrap_or(pc.presence_threshold);
    if a.drop_oldest {
        pc.drop_policy = DropPolicy::DropOldest;
    }
    let mode = if a.single_threaded {
        StreamMode::SingleThreaded
    } else {
        StreamMode::Threaded
    };
    let out = run_stream(capture.frames(), &model, &pc, mode)?;
    info!(
        "{} frames -> {} results in {:.3} s, {} dropped",
        out.frames,
        out.results.len(),
        out.elapsed.as_secs_f64(),
        out.dropped
    );
    emit(a.out.as_deref(), &format_results(&out.results))
}

fn bench(ctx: Ctx, a: BenchArgs) -> Result<(), CliError> {
    let net = load_fp32(&a.model)?;
    let capture = read_capture(&a.capture)?;
    let mut pc = ctx.cfg.pipeline.clone();
    pc.dsp = ctx.cfg.dsp.clone();
    let q = match &a.int8_model {
        Some(p) => QuantGruNetwork::load(p)?,
        None => {
            let windows = stream_windows(&ctx, capture.frames(), pc.window_len, pc.window_len)?;
            calibrated(&net, &windows)?
        }
    };
    if !(a.duration.is_finite() && a.duration >= 0.0) {
        return Err(CliError::Config(format!(
            "duration {} is not a number of seconds",
            a.duration
        )));
    }
    let report = benchmark(
        capture.frames(),
        &net,
        &q,
        &pc,
        Duration::from_secs_f64(a.duration),
    )?;
    print!("{}", report.to_text());
    if let Some(p) = &a.json {
        write_file(p, &report.to_json())?;
    }
    Ok(())
}
