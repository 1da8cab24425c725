use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn geotomo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_geotomo"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = geotomo(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn gen_recon_metrics_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("gen");
    let r = dir.path().join("recon");
    ok(&["gen", "--phantom", "1", "--schedule", "S140_10", "--sigma", "50", "--seed", "3", "--out", s(&g)]);
    for f in ["sinogram.csv", "truth.pgm", "truth_polygon.csv"] {
        assert!(g.join(f).exists(), "{f}");
    }
    let sino = g.join("sinogram.csv");
    let text = ok(&["recon", "--input", s(&sino), "--algo", "2n-gon", "--out", s(&r)]);
    assert!(text.contains("vertices 6"), "{text}");
    let m1 = ok(&["metrics", "--recon", s(&r.join("recon.pgm")), "--phantom", "1"]);
    let m2 = ok(&["metrics", "--recon", s(&r.join("recon_polygon.csv")), "--truth", s(&g.join("truth.pgm"))]);
    assert_eq!(m1, m2);
    let ds: usize = m1.split_whitespace().nth(1).unwrap().parse().unwrap();
    assert!(ds < 1000, "{m1}");
    let m3 = ok(&["metrics", "--recon", s(&g.join("truth.pgm")), "--phantom", "1", "--sinogram", s(&sino)]);
    assert!(m3.starts_with("delta_s 0 delta_h 0"), "{m3}");
}

#[test]
fn recon_from_phantom_reports_errors() {
    let dir = tempfile::tempdir().unwrap();
    let text = ok(&["recon", "--phantom", "2", "--algo", "mpw", "--schedule", "S180_10", "--out", s(dir.path())]);
    assert!(text.contains("delta_s"), "{text}");
    assert!(dir.path().join("recon_polygon.csv").exists());
}

#[test]
fn bench_writes_deterministic_csvs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = |out: &Path| {
        vec![
            "bench".to_string(),
            "--phantom".into(),
            "1,2".into(),
            "--algo".into(),
            "ufbp,mpw".into(),
            "--schedule".into(),
            "S140_10;S180_10".into(),
            "--sigma".into(),
            "0,50".into(),
            "--trials".into(),
            "2".into(),
            "--seed".into(),
            "9".into(),
            "--out".into(),
            out.to_str().unwrap().into(),
        ]
    };
    let a_args = args(a.path());
    ok(&a_args.iter().map(String::as_str).collect::<Vec<_>>());
    let mut b_args = args(b.path());
    b_args.extend(["--workers".into(), "1".into()]);
    ok(&b_args.iter().map(String::as_str).collect::<Vec<_>>());
    for f in ["trials.csv", "summary.csv"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap());
    }
    let trials = fs::read_to_string(a.path().join("trials.csv")).unwrap();
    assert_eq!(trials.lines().count(), 1 + 2 * 2 * 2 * 2 * 2);
    let summary = fs::read_to_string(a.path().join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 2 * 2 * 2 * 2);
    assert!(a.path().join("timings.csv").exists());
}

#[test]
fn bench_reads_json_config_and_saves_images() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.json");
    fs::write(
        &cfg,
        r#"{"phantoms": [4], "algorithms": ["2n-gon"], "schedules": ["S140_1"], "sigmas": [0], "trials": 1}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    ok(&["bench", "--config", s(&cfg), "--out", s(&out), "--save-images"]);
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert!(summary.lines().nth(1).unwrap().starts_with("4,2n-gon,S140_1,0,1,1,0,0,"), "{summary}");
    let images: Vec<_> = fs::read_dir(out.join("images")).unwrap().collect();
    assert_eq!(images.len(), 2);
}

#[test]
fn stack_reconstructs_generated_slices() {
    let dir = tempfile::tempdir().unwrap();
    let st = dir.path().join("stack");
    let out = dir.path().join("out");
    ok(&["gen", "--phantom", "1", "--slices", "4", "--out", s(&st)]);
    let text = ok(&["stack", "--input", s(&st), "--algo", "ufbp", "--out", s(&out)]);
    assert!(text.starts_with("4/4"), "{text}");
    let manifest = fs::read_to_string(out.join("stack.csv")).unwrap();
    assert_eq!(manifest.lines().count(), 5);
    assert!(out.join("recon_0003.pgm").exists());
}

#[test]
fn bad_input_fails_cleanly() {
    assert!(!geotomo(&["recon", "--algo", "fbp", "--phantom", "1", "--out", "x"]).status.success());
    assert!(!geotomo(&["gen", "--phantom", "9", "--out", "x"]).status.success());
    assert!(!geotomo(&["bench", "--trials", "0", "--algo", "mpw"]).status.success());
    let dir = tempfile::tempdir().unwrap();
    let out = geotomo(&["stack", "--input", s(dir.path()), "--out", s(&dir.path().join("o"))]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("slice_NNNN"));
}
