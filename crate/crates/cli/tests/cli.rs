use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use snn_core::baselines::{failure_index_value, FiParams};
use snn_core::dataset::write_csv;
use snn_core::synthetic::gen_raster_scene;

fn snn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_snn"))
        .args(args)
        .env_remove("SNN_THREADS")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn ok(args: &[&str]) -> Output {
    let out = snn(args);
    assert_eq!(
        code(&out),
        0,
        "snn {args:?}\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn read(p: impl AsRef<Path>) -> String {
    std::fs::read_to_string(p.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", p.as_ref().display()))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Small raster-scene dataset with grid positions.
fn scene_csv(dir: &Path) -> PathBuf {
    let scene = gen_raster_scene(40, 40, 30.0, 5).unwrap();
    let path = dir.join("scene.csv");
    write_csv(&scene.dataset, &path).unwrap();
    path
}

const FAST_TRAIN: [&str; 10] = [
    "--groups",
    "16",
    "--teacher-epochs",
    "20",
    "--epochs",
    "30",
    "--forward-epochs",
    "20",
    "--group-epochs",
    "20",
];

#[test]
fn expand_counts_and_config_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    ok(&["expand", "--n", "15", "--level", "2", "--out", s(&a)]);
    let manifest = read(a.join("manifest.csv"));
    assert_eq!(manifest.lines().count(), 121);
    assert!(manifest.starts_with("index,label,level\n0,x1,1\n"));
    let cfg = read(a.join("config.txt"));
    assert!(cfg.contains("subcommand = expand\n") && cfg.contains("n = 15\n"));

    let b = dir.path().join("b");
    ok(&["expand", "--config", s(&a.join("config.txt")), "--out", s(&b)]);
    assert_eq!(read(b.join("manifest.csv")), manifest);

    let c = dir.path().join("c");
    ok(&["expand", "--n", "3", "--level", "3", "--out", s(&c)]);
    assert_eq!(read(c.join("manifest.csv")).lines().count(), 14);
}

#[test]
fn usage_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&snn(&["expand", "--n", "3"])), 1, "missing --out");
    assert_eq!(code(&snn(&["no-such-command"])), 1);
    assert_eq!(code(&snn(&["expand", "--n", "x", "--out", "o"])), 1);
    let cfg = dir.path().join("bad.txt");
    std::fs::write(&cfg, "n = 3\nmystery = 1\n").unwrap();
    let out = snn(&["expand", "--config", s(&cfg), "--out", s(&dir.path().join("o"))]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("mystery"));
    std::fs::write(&cfg, "subcommand = train\n").unwrap();
    assert_eq!(code(&snn(&["expand", "--n", "2", "--config", s(&cfg), "--out", s(&dir.path().join("o"))])), 1);
    assert_eq!(code(&snn(&["--help"])), 0);
    assert_eq!(code(&snn(&["--version"])), 0);
}

#[test]
fn data_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let missing = snn(&["rank", "--data", "/nonexistent/x.csv", "--out", s(&out)]);
    assert_eq!(code(&missing), 2);
    assert!(String::from_utf8_lossy(&missing.stderr).contains("/nonexistent/x.csv"));
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "a,b\n1,2\n").unwrap();
    let e = snn(&["baseline", "lr", "--data", s(&bad), "--out", s(&out)]);
    assert_eq!(code(&e), 2);
    assert!(String::from_utf8_lossy(&e.stderr).contains("target"));
    let m = snn(&["eval", "--model", s(&bad), "--data", s(&bad), "--out", s(&out)]);
    assert_eq!(code(&m), 2);
}

#[test]
fn train_eval_explain_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let data = scene_csv(dir.path());
    let t1 = dir.path().join("t1");
    let t2 = dir.path().join("t2");
    for t in [&t1, &t2] {
        let mut args = vec!["train", "--data", s(&data), "--out", s(t), "--seed", "3", "--block", "8"];
        args.extend(FAST_TRAIN);
        ok(&args);
    }
    for f in ["model.json", "ranking.csv", "selection.csv", "distill_trace.csv", "config.txt"] {
        let a = read(t1.join(f));
        assert_eq!(a.replace(s(&t1), ""), read(t2.join(f)).replace(s(&t2), ""), "{f} differs between runs");
    }

    // The split defaults come from the model file; thread count must not matter.
    let model = t1.join("model.json");
    let e1 = dir.path().join("e1");
    let e2 = dir.path().join("e2");
    ok(&["eval", "--model", s(&model), "--data", s(&data), "--out", s(&e1), "--threads", "1"]);
    ok(&["eval", "--model", s(&model), "--data", s(&data), "--out", s(&e2), "--threads", "3"]);
    for f in ["metrics.csv", "roc.csv", "success.csv", "scores.csv", "roc.svg", "success.svg"] {
        assert_eq!(read(e1.join(f)), read(e2.join(f)), "{f} differs between runs");
    }
    let cfg = read(e1.join("config.txt"));
    assert!(cfg.contains("block = 8\n") && cfg.contains("seed = 3\n"), "{cfg}");
    let metrics = read(e1.join("metrics.csv"));
    let auroc: f64 = metrics
        .lines()
        .find_map(|l| l.strip_prefix("auroc,"))
        .unwrap()
        .parse()
        .unwrap();
    assert!(auroc > 0.5 && auroc <= 1.0, "{auroc}");

    let x = dir.path().join("x");
    ok(&["explain", "--model", s(&model), "--data", s(&data), "--out", s(&x), "--window-cells", "20"]);
    let index = read(x.join("curves/index.csv"));
    assert!(index.lines().count() >= 2, "{index}");
    for f in ["legend.csv", "windows_modeled.csv", "dominant_mapped.asc", "normalized_mapped.csv", "normalized_modeled.svg"] {
        assert!(x.join(f).exists(), "{f} missing");
    }
    let grid = read(x.join("dominant_modeled.asc"));
    assert!(grid.starts_with("ncols 2\nnrows 2\n"), "{grid}");
}

#[test]
fn tabular_baselines_write_scores_and_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let data = scene_csv(dir.path());
    for (kind, extra) in [
        ("lr", vec![]),
        ("logr", vec!["--features", "Slope,MAP,Asp"]),
        ("mlp", vec!["--hidden", "16,16", "--max-epochs", "3"]),
    ] {
        let out = dir.path().join(kind);
        let mut args = vec!["baseline", kind, "--data", s(&data), "--out", s(&out), "--block", "8"];
        args.extend(extra);
        ok(&args);
        for f in ["scores.csv", "metrics.csv", "roc.csv", "roc.svg", "config.txt"] {
            assert!(out.join(f).exists(), "{kind}: {f} missing");
        }
        assert!(read(out.join("config.txt")).contains(&format!("subcommand = baseline-{kind}\n")));
    }
    assert!(dir.path().join("lr/lr_model.json").exists());
    assert!(read(dir.path().join("logr/collinearity.csv")).starts_with("feature_a,feature_b,r\n"));
    assert!(read(dir.path().join("mlp/mlp_history.csv")).lines().count() >= 2);
}

#[test]
fn failure_index_from_rasters() {
    let dir = tempfile::tempdir().unwrap();
    let scene = gen_raster_scene(20, 20, 10.0, 2).unwrap();
    let write = |name: &str, g: &snn_core::raster::RasterGrid| {
        let p = dir.path().join(name);
        snn_core::raster::write_ascii_grid(g, &p).unwrap();
        p
    };
    let slope_grid = &scene.features.iter().find(|f| f.0 == "Slope").unwrap().1;
    let slope = write("slope.asc", slope_grid);
    let precip = write("precip.asc", &scene.storm_precip);
    let area = write("area.asc", &scene.drainage_area);
    let inv = write("inv.asc", &scene.inventory);
    let out = dir.path().join("fi");
    ok(&[
        "baseline", "fi", "--slope", s(&slope), "--precip", s(&precip), "--area", s(&area), "--inventory", s(&inv),
        "--out", s(&out),
    ]);
    let fi = snn_core::raster::read_ascii_grid(out.join("fi.asc")).unwrap();
    let w = snn_core::raster::read_ascii_grid(out.join("wetness.asc")).unwrap();
    assert_eq!((fi.nrows, fi.ncols), (20, 20));
    for i in 0..fi.values.len() {
        if !fi.is_nodata(fi.values[i]) {
            let expect = failure_index_value(slope_grid.values[i], w.values[i], &FiParams::default());
            assert!((fi.values[i] - expect).abs() <= 1e-9 * expect.abs().max(1.0));
        }
    }
    assert!(read(out.join("metrics.csv")).contains("\nthreshold,1\n"));

    let misaligned = write("small.asc", &snn_core::raster::RasterGrid::new(5, 5, 10.0));
    let e = snn(&["baseline", "fi", "--slope", s(&misaligned), "--precip", s(&precip), "--area", s(&area), "--out", s(&out)]);
    assert_eq!(code(&e), 2);
}

#[test]
fn toy_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("toy");
    let run = ok(&["toy", "--out", s(&out), "--groups", "60", "--samples", "400", "--noisy-eval", "200"]);
    let report = read(out.join("report.txt"));
    assert!(report.lines().all(|l| l.starts_with("[PASS] ") || l.starts_with("[FAIL] ")));
    assert!(report.contains("x1*x2*x3*x4 ranks first"));
    for f in ["truth_table.csv", "steps.csv", "model.json", "model_noisy.json", "ranking.csv", "curves/index.csv"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    assert_eq!(read(out.join("truth_table.csv")).lines().count(), 17);
    assert!(String::from_utf8_lossy(&run.stdout).contains("toy: "));
}
