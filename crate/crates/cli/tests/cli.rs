use std::process::{Command, Output};

fn star(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_star"))
        .args(args)
        .output()
        .expect("runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn subcommand_help_lists_flags() {
    let o = star(&["replay", "--help"]);
    assert!(o.status.success());
    let text = String::from_utf8_lossy(&o.stdout);
    for flag in [
        "--capture",
        "--model",
        "--stride",
        "--drop-oldest",
        "--single-threaded",
        "--seed",
    ] {
        assert!(text.contains(flag), "missing {flag}");
    }
}

#[test]
fn usage_errors_exit_two() {
    let o = star(&["train", "--no-such-flag"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_model_reports_its_class() {
    let dir = tempfile::tempdir().unwrap();
    let capture = dir.path().join("c.csv");
    let model = dir.path().join("absent.model");
    let o = star(&[
        "synth",
        "--out",
        dir.path().to_str().unwrap(),
        "--frames-per-class",
        "300",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    std::fs::rename(dir.path().join("capture.csv"), &capture).unwrap();
    let o = star(&[
        "replay",
        "--capture",
        capture.to_str().unwrap(),
        "--model",
        model.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(
        stderr(&o).starts_with("error: model-not-found:"),
        "{}",
        stderr(&o)
    );
}

#[test]
fn bad_config_file_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("star.toml");
    std::fs::write(&cfg, "sed = 1\n").unwrap();
    let o = star(&["--config", cfg.to_str().unwrap(), "filter-design"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error: config:"), "{}", stderr(&o));
}

#[test]
fn filter_design_prints_stable_poles() {
    let o = star(&[
        "filter-design",
        "--order",
        "8",
        "--cutoff",
        "5",
        "--fs",
        "100",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = String::from_utf8_lossy(&o.stdout);
    let poles: Vec<f64> = text
        .lines()
        .skip_while(|l| !l.starts_with("pole magnitudes"))
        .skip(1)
        .take_while(|l| !l.starts_with('|'))
        .map(|l| l.split_whitespace().nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(poles.len(), 8, "{text}");
    assert!(poles.iter().all(|&m| m < 1.0), "{poles:?}");
    assert!(text.contains("|H(fc)| = 0.707106"), "{text}");
}
