use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn saddle(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_saddle"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn lists_presets() {
    let o = saddle(&["list-presets"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8(o.stdout).unwrap();
    for name in ["bilinear", "quadratic", "consensus5", "consensus-random", "allocation3", "logistic", "corrupted"] {
        assert!(text.contains(name), "{name} missing from\n{text}");
    }
}

#[test]
fn solve_writes_traces_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let o = saddle(&["solve", "--preset", "bilinear", "--iters", "200", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for f in ["trace_gda.csv", "trace_ogda.csv", "trace_eg.csv", "summary.toml", "instance.toml", "reference.toml"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let summary: toml::Value = toml::from_str(&fs::read_to_string(out.join("summary.toml")).unwrap()).unwrap();
    assert_eq!(summary["preset"].as_str(), Some("bilinear"));
}

#[test]
fn network_solve_writes_progress_and_agents() {
    let dir = tempfile::tempdir().unwrap();
    let o = saddle(&[
        "solve",
        "--preset",
        "allocation3",
        "--method",
        "ogda,eg",
        "--iters",
        "2000",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for m in ["ogda", "eg"] {
        let progress = fs::read_to_string(dir.path().join(format!("progress_{m}.csv"))).unwrap();
        assert!(progress.starts_with("iter,grad_calls,"));
        assert!(dir.path().join(format!("agents_{m}.csv")).is_file());
    }
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("exp.toml");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn config_errors_are_located() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), "[instance]\npreset = \"bilinear\"\n\n[solver]\nalpha = -1.0\n");
    let o = saddle(&["solve", "--config", &path]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains(&format!("{path}:5:")), "{}", stderr(&o));

    let path = write_config(dir.path(), "[instance]\npreset = \"nope\"\n");
    let o = saddle(&["solve", "--config", &path]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains(&format!("{path}:2:")), "{}", stderr(&o));

    let path = write_config(dir.path(), "[instance]\npreset = \"consensus5\"\n[solver]\nmethods = [\"gda\"]\n");
    assert_eq!(saddle(&["solve", "--config", &path]).status.code(), Some(1));

    let path = write_config(dir.path(), "[instance]\npreset = \"bilinear\"\ncolour = 3\n");
    assert_eq!(saddle(&["solve", "--config", &path]).status.code(), Some(1));
}

#[test]
fn unsafe_step_is_rejected() {
    let o = saddle(&["solve", "--preset", "bilinear", "--method", "ogda", "--alpha", "1.0", "--iters", "10"]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

#[test]
fn corrupted_preset_fails_verification() {
    let dir = tempfile::tempdir().unwrap();
    let o = saddle(&["verify", "--preset", "corrupted", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let report: toml::Value = toml::from_str(&fs::read_to_string(dir.path().join("verify.toml")).unwrap()).unwrap();
    assert_eq!(report["passed"].as_bool(), Some(false));
}

#[test]
fn quadratic_preset_passes_verification() {
    let o = saddle(&["verify", "--preset", "quadratic"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}
