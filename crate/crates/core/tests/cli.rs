mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use splat_purify::ply::save_ply;
use splat_purify::{GaussianPrimitive, SplatCloud};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_splat-purify"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn read_json(path: impl AsRef<Path>) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn synth(root: &Path, seed: &str) {
    ok(&["synth", "--out-dir", p(&root.join("scene")), "--seed", seed]);
}

fn purify_args<'a>(root: &'a Path, out: &'a str) -> Vec<String> {
    let s = root.join("scene");
    vec![
        "purify".into(),
        "--input".into(),
        s.join("scene.ply").to_string_lossy().into(),
        "--views".into(),
        s.join("views_train.json").to_string_lossy().into(),
        "--hidden-views".into(),
        s.join("views_hidden.json").to_string_lossy().into(),
        "--labels".into(),
        s.join("labels.json").to_string_lossy().into(),
        "--out-dir".into(),
        root.join(out).to_string_lossy().into(),
    ]
}

#[test]
fn synth_then_purify_reports_recall_and_follows_the_rule() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    synth(root, "0");
    for f in ["scene.ply", "views_train.json", "views_hidden.json", "labels.json", "report.json"] {
        assert!(root.join("scene").join(f).exists(), "missing {f}");
    }
    let args = purify_args(root, "purified");
    ok(&args.iter().map(String::as_str).collect::<Vec<_>>());

    let report = read_json(root.join("purified/report.json"));
    assert_eq!(report["schema"], 1);
    assert_eq!(report["command"], "purify");
    assert!(report["input_hash"].as_str().unwrap().starts_with("sha256:"));
    let eval = &report["evaluation"];
    assert!(eval["watermark_recall"].as_f64().unwrap() >= 0.9);
    assert!(eval["scene_retention"].as_f64().unwrap() >= 0.98);

    let contribution = fs::read_to_string(root.join("purified/contribution.json")).unwrap();
    let clusters = fs::read_to_string(root.join("purified/clusters.json")).unwrap();
    let pruned: Vec<usize> = serde_json::from_value(report["purification"]["pruned_indices"].clone()).unwrap();
    assert_eq!(common::prune_from_artifacts(&contribution, &clusters, 4.0, 4.0), pruned);
    let kept = splat_purify::ply::load_ply(root.join("purified/purified.ply")).unwrap();
    assert_eq!(kept.len() + pruned.len(), report["primitives"].as_u64().unwrap() as usize);
}

#[test]
fn missing_views_is_a_usage_error_naming_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let cloud = SplatCloud::new(vec![GaussianPrimitive::isotropic([0.0; 3], 0.3, 0.8, [0.6; 3])], 0).unwrap();
    let ply = dir.path().join("one.ply");
    save_ply(&cloud, &ply).unwrap();
    let missing = dir.path().join("no_such_views.json");
    let out = run(&["analyze", "--input", p(&ply), "--views", p(&missing), "--out-dir", p(&dir.path().join("o"))]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("no_such_views.json"), "stderr: {err}");
}

#[test]
fn bad_arguments_exit_with_two() {
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["purify", "--tau-c", "abc"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["synth", "--out-dir", p(dir.path()), "--n-scene", "10"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn purify_output_is_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    synth(root, "5");
    let mut outputs = Vec::new();
    for threads in ["1", "4", "8"] {
        let name = format!("t{threads}");
        let mut args = purify_args(root, &name);
        args.extend(["--threads".into(), threads.into()]);
        ok(&args.iter().map(String::as_str).collect::<Vec<_>>());
        let files: Vec<Vec<u8>> = ["report.json", "contribution.json", "clusters.json", "purified.ply"]
            .iter()
            .map(|f| fs::read(root.join(&name).join(f)).unwrap())
            .collect();
        outputs.push(files);
    }
    assert!(outputs.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn render_writes_one_png_per_view() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    synth(root, "1");
    let cloud = SplatCloud::new(vec![GaussianPrimitive::isotropic([0.0; 3], 0.5, 0.9, [0.8, 0.2, 0.4])], 0).unwrap();
    let ply = root.join("one.ply");
    save_ply(&cloud, &ply).unwrap();
    let views = root.join("scene/views_train.json");
    let n = read_json(&views)["views"].as_array().unwrap().len();
    ok(&["render", "--input", p(&ply), "--views", p(&views), "--out-dir", p(&root.join("r")), "--save-npy"]);
    let pngs = fs::read_dir(root.join("r"))
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "png"))
        .count();
    assert_eq!(pngs, n);
    assert!(root.join("r/render_000.npy").exists());
}

#[test]
fn metrics_on_identical_renders_hit_the_cap_and_baselines_fall_below_it() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    synth(root, "2");
    let scene = root.join("scene");
    let views = scene.join("views_train.json");
    ok(&["render", "--input", p(&scene.join("scene.ply")), "--views", p(&views), "--out-dir", p(&root.join("a"))]);
    ok(&["metrics", "--reference", p(&root.join("a")), "--candidate", p(&root.join("a")), "--out-dir", p(&root.join("m0"))]);
    let same = read_json(root.join("m0/metrics.json"));
    assert_eq!(same["schema"], 1);
    assert_eq!(same["mean_psnr"].as_f64(), Some(100.0));
    assert!((same["mean_ssim"].as_f64().unwrap() - 1.0).abs() <= 1e-9);
    assert_eq!(same["per_view"].as_array().unwrap().len(), 16);

    ok(&[
        "baseline",
        "--input",
        p(&scene.join("scene.ply")),
        "--views",
        p(&views),
        "--baseline",
        "random",
        "--ratio",
        "0.25",
        "--out-dir",
        p(&root.join("b")),
    ]);
    let report = read_json(root.join("b/report.json"));
    assert_eq!(report["removed_count"].as_u64(), Some(825));
    ok(&["render", "--input", p(&root.join("b/baseline.ply")), "--views", p(&views), "--out-dir", p(&root.join("br"))]);
    ok(&["metrics", "--reference", p(&root.join("a")), "--candidate", p(&root.join("br")), "--out-dir", p(&root.join("m1"))]);
    let degraded = read_json(root.join("m1/metrics.json"));
    assert!(degraded["mean_psnr"].as_f64().unwrap() < 100.0);
}

#[test]
fn config_file_values_yield_to_flags() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    synth(root, "3");
    let s = root.join("scene");
    let config = root.join("run.toml");
    fs::write(
        &config,
        format!(
            "input = {:?}\nviews = {:?}\nout_dir = {:?}\ntau_c = 2.0\ntau_n = 3.0\nthreads = 2\n",
            p(&s.join("scene.ply")),
            p(&s.join("views_train.json")),
            p(&root.join("from_file")),
        ),
    )
    .unwrap();
    ok(&["purify", "--config", p(&config)]);
    let from_file = read_json(root.join("from_file/report.json"));
    assert_eq!(from_file["config"]["tau_c"].as_f64(), Some(2.0));
    assert_eq!(from_file["config"]["tau_n"].as_f64(), Some(3.0));
    assert!(from_file["config"].get("threads").is_none());

    ok(&["purify", "--config", p(&config), "--tau-c", "5", "--out-dir", p(&root.join("flagged"))]);
    let flagged = read_json(root.join("flagged/report.json"));
    assert_eq!(flagged["config"]["tau_c"].as_f64(), Some(5.0));
    assert_eq!(flagged["config"]["tau_n"].as_f64(), Some(3.0));

    fs::write(root.join("bad.toml"), "tau_c = 2.0\nunknown_key = 1\n").unwrap();
    assert_eq!(run(&["purify", "--config", p(&root.join("bad.toml"))]).status.code(), Some(2));
}
