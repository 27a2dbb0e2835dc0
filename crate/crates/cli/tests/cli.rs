use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use polyedge::io::{encode_pgm, encode_pgm_ascii};
use polyedge::scenes::quadrant_scene;
use polyedge::Image64;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_polyedge"))
}

fn scene_file(dir: &Path, ascii: bool) -> PathBuf {
    let img: Image64 = quadrant_scene(24, 20).image.mapv(f64::round);
    let path = dir.join(if ascii {
        "scene_ascii.pgm"
    } else {
        "scene.pgm"
    });
    if ascii {
        fs::write(&path, encode_pgm_ascii(&img)).unwrap();
    } else {
        fs::write(&path, encode_pgm(&img)).unwrap();
    }
    path
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "status {:?}\nstderr: {}",
        out.status,
        String::from_utf8_lossy(&out.stderr)
    );
}

fn error_line(out: &Output) -> serde_json::Value {
    let err = String::from_utf8(out.stderr.clone()).unwrap();
    let lines: Vec<&str> = err.lines().collect();
    assert_eq!(lines.len(), 1, "stderr: {err}");
    serde_json::from_str(lines[0]).unwrap()
}

#[test]
fn run_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let input = scene_file(dir.path(), false);
    let out_dir = dir.path().join("out");
    let out = run(&[
        "run",
        "--input",
        input.to_str().unwrap(),
        "--out-dir",
        out_dir.to_str().unwrap(),
        "--iters",
        "30",
        "--delta",
        "300",
    ]);
    assert_ok(&out);
    for name in [
        "noisy.pgm",
        "denoised.pgm",
        "mosaic.pgm",
        "grad_truth.pgm",
        "grad_sobel.pgm",
        "grad_synth.pgm",
        "grad_parmap.pgm",
        "edges_truth.pgm",
        "edges_sobel.pgm",
        "edges_synth.pgm",
        "edges_parmap.pgm",
        "scores.csv",
        "history.csv",
    ] {
        assert!(out_dir.join(name).is_file(), "missing {name}");
    }
    let scores = fs::read_to_string(out_dir.join("scores.csv")).unwrap();
    let lines: Vec<&str> = scores.lines().collect();
    assert_eq!(
        lines[0],
        "method,sigma,delta,threshold,precision,recall,f1,tolerance_px,seed"
    );
    let methods: Vec<&str> = lines[1..]
        .iter()
        .map(|l| l.split(',').next().unwrap())
        .collect();
    assert_eq!(methods, ["sobel", "synth", "parmap"]);
    let history = fs::read_to_string(out_dir.join("history.csv")).unwrap();
    assert_eq!(history.lines().count(), 31);

    let noisy = polyedge::io::read_image::<f64>(&out_dir.join("noisy.pgm")).unwrap();
    assert_eq!(noisy.dim(), (24, 20));
    // mosaic tiles the nine quadratic maps in a 3 x 3 grid
    let mosaic = polyedge::io::read_image::<f64>(&out_dir.join("mosaic.pgm")).unwrap();
    assert_eq!(mosaic.dim(), (72, 60));
}

#[test]
fn emit_limits_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let input = scene_file(dir.path(), false);
    let out_dir = dir.path().join("out");
    let out = run(&[
        "run",
        "--input",
        input.to_str().unwrap(),
        "--out-dir",
        out_dir.to_str().unwrap(),
        "--iters",
        "5",
        "--emit",
        "edges,csv",
    ]);
    assert_ok(&out);
    assert!(out_dir.join("edges_parmap.pgm").is_file());
    assert!(out_dir.join("scores.csv").is_file());
    assert!(!out_dir.join("mosaic.pgm").exists());
    assert!(!out_dir.join("denoised.pgm").exists());
}

#[test]
fn sweep_scores_the_full_grid() {
    let dir = tempfile::tempdir().unwrap();
    let input = scene_file(dir.path(), true);
    let out_dir = dir.path().join("out");
    let out = run(&[
        "sweep",
        "--input",
        input.to_str().unwrap(),
        "--out-dir",
        out_dir.to_str().unwrap(),
        "--iters",
        "20",
        "--delta",
        "300",
    ]);
    assert_ok(&out);
    let csv = fs::read_to_string(out_dir.join("sweep.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "method,sigma,delta,threshold,precision,recall,f1,tolerance_px,seed,best"
    );
    let rows: Vec<Vec<String>> = lines
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect();
    for method in ["sobel", "synth", "parmap"] {
        let mine: Vec<&Vec<String>> = rows.iter().filter(|r| r[0] == method).collect();
        assert_eq!(mine.len(), 101, "{method}");
        let best: Vec<&&Vec<String>> = mine.iter().filter(|r| r[9] == "1").collect();
        assert_eq!(best.len(), 1);
        let top = mine
            .iter()
            .map(|r| r[6].parse::<f64>().unwrap())
            .fold(0.0, f64::max);
        assert_eq!(best[0][6].parse::<f64>().unwrap(), top);
    }
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let input = scene_file(dir.path(), false);
    let out_dir = dir.path().join("out");
    let cfg = dir.path().join("run.cfg");
    fs::write(
        &cfg,
        format!(
            "# small test run\ninput = {}\nout-dir = {}\niters = 7\nsigma = 5\ndelta = 200\n",
            input.display(),
            out_dir.display()
        ),
    )
    .unwrap();
    let out = run(&["run", "--config", cfg.to_str().unwrap(), "--iters", "3"]);
    assert_ok(&out);
    let history = fs::read_to_string(out_dir.join("history.csv")).unwrap();
    assert_eq!(history.lines().count(), 4);
    let scores = fs::read_to_string(out_dir.join("scores.csv")).unwrap();
    let row: Vec<&str> = scores.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[1], "5");
    assert_eq!(row[2], "200");
}

#[test]
fn failures_exit_nonzero_with_one_json_line() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.pgm");
    let out = run(&["run", "--input", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_line(&out)["error"], "config");

    let out = run(&["run", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_line(&out)["error"], "usage");

    let bad = dir.path().join("bad.pgm");
    fs::write(&bad, b"P5\n4 4\n255\nxx").unwrap();
    let out = run(&[
        "run",
        "--input",
        bad.to_str().unwrap(),
        "--out-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_line(&out)["error"], "format");

    let input = scene_file(dir.path(), false);
    let out = run(&[
        "run",
        "--input",
        input.to_str().unwrap(),
        "--thresh-sobel",
        "1.5",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(error_line(&out)["error"], "config");
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let input = scene_file(dir.path(), false);
    let outs: Vec<PathBuf> = (0..2).map(|i| dir.path().join(format!("out{i}"))).collect();
    for out_dir in &outs {
        let out = run(&[
            "run",
            "--input",
            input.to_str().unwrap(),
            "--out-dir",
            out_dir.to_str().unwrap(),
            "--iters",
            "15",
            "--seed",
            "9",
        ]);
        assert_ok(&out);
    }
    for name in [
        "scores.csv",
        "history.csv",
        "edges_sobel.pgm",
        "edges_synth.pgm",
        "edges_parmap.pgm",
        "noisy.pgm",
    ] {
        let a = fs::read(outs[0].join(name)).unwrap();
        let b = fs::read(outs[1].join(name)).unwrap();
        assert_eq!(a, b, "{name} differs");
    }
}
