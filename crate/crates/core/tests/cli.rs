//! End-to-end runs of the `appearloc` binary on small configurations.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use appearloc::appearance::io::read_dataset;
use appearloc::cli::RunConfig;
use appearloc::evalx::split_dataset;
use appearloc::pipeline::Pipeline;
use appearloc::pose::Pose;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

/// 8×8 positions × 3 headings with 32 features: trains in a few seconds.
const SMALL: &str = "grid_nx = 8\ngrid_ny = 8\ngrid_headings = 3\nm = 32\n";

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_appearloc"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn small_dir() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("small.toml"), SMALL).unwrap();
    dir
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn generate_counts_rows_and_reruns_byte_identically() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["generate", "--set", "grid_nx=5", "--set", "grid_ny=5", "--set", "grid_headings=4"];
    let stdout = ok(&run(dir.path(), &args));
    assert!(stdout.starts_with("generated n=100 p=1024 m=64 seed=7"), "{stdout}");
    let data = dir.path().join("out/dataset");
    let poses = fs::read_to_string(data.join("poses.csv")).unwrap();
    assert_eq!(poses.lines().count(), 101);
    assert_eq!(poses.lines().next(), Some("id,x,y,heading"));
    assert_eq!(fs::metadata(data.join("images.f32")).unwrap().len(), 100 * 1024 * 4);
    assert_eq!(fs::metadata(data.join("features.f32")).unwrap().len(), 100 * 64 * 4);

    let names = ["manifest.json", "images.f32", "features.f32", "poses.csv"];
    let before: Vec<Vec<u8>> = names.iter().map(|n| fs::read(data.join(n)).unwrap()).collect();
    ok(&run(dir.path(), &args));
    let after: Vec<Vec<u8>> = names.iter().map(|n| fs::read(data.join(n)).unwrap()).collect();
    assert!(before == after, "rerun changed the dataset");
}

#[test]
fn truncated_binary_is_a_format_error_naming_the_file() {
    let dir = small_dir();
    ok(&run(dir.path(), &["generate", "--config", "small.toml"]));
    let features = dir.path().join("out/dataset/features.f32");
    let bytes = fs::read(&features).unwrap();
    fs::write(&features, &bytes[..bytes.len() - 4]).unwrap();
    let out = run(dir.path(), &["dimest", "--config", "small.toml"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("features"), "{}", stderr(&out));
}

#[test]
fn dimest_all_matches_single_methods() {
    let dir = small_dir();
    ok(&run(dir.path(), &["generate", "--config", "small.toml"]));
    let all: Value = serde_json::from_str(&ok(&run(dir.path(), &["dimest", "--config", "small.toml"]))).unwrap();
    let all = all.as_array().unwrap();
    assert_eq!(all.len(), 3);
    for (entry, method) in all.iter().zip(["global", "local", "pointwise"]) {
        let set = format!("dimest_method=\"{method}\"");
        let one: Value = serde_json::from_str(&ok(&run(dir.path(), &["dimest", "--config", "small.toml", "--set", &set]))).unwrap();
        assert_eq!(one.as_array().unwrap(), &vec![entry.clone()]);
        assert_eq!(entry["method"], method);
    }
    assert_eq!(json(&dir.path().join("out/dimest.json"))[0]["method"], "pointwise");
}

#[test]
fn trained_model_round_trips_bitwise() {
    let dir = small_dir();
    ok(&run(dir.path(), &["generate", "--config", "small.toml"]));
    let stdout = ok(&run(dir.path(), &["train", "--config", "small.toml"]));
    assert!(stdout.starts_with("trained n=134 "), "{stdout}");
    let loaded = Pipeline::load(&dir.path().join("out/model.bin")).unwrap();

    let config = RunConfig::from_toml(SMALL).unwrap();
    let b = config.settings().unwrap().benchmark;
    let ds = read_dataset(&dir.path().join("out/dataset")).unwrap();
    let (train, _) = split_dataset(&ds, b.train_fraction, b.split_seed).unwrap();
    let fresh = Pipeline::train(&train, &b.fit, &b.regressor).unwrap();
    assert!(fresh.to_bytes().unwrap() == loaded.to_bytes().unwrap());

    let oracle = fresh.oracle().unwrap();
    let space = oracle.pose_space;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let pose = Pose::new(
            rng.random_range(0.5..4.5),
            rng.random_range(0.5..4.5),
            rng.random_range(-0.4..0.4),
        );
        assert!(space.contains(&pose));
        let image = oracle.render(&pose).unwrap();
        let a = fresh.localization().estimate_pose(&image).unwrap();
        let c = loaded.localization().estimate_pose(&image).unwrap();
        assert_eq!(a.to_vector().map(f64::to_bits), c.to_vector().map(f64::to_bits));
        let fa = fresh.feature_model().predict_features(&pose).unwrap();
        let fc = loaded.feature_model().predict_features(&pose).unwrap();
        assert_eq!(fa.values().map(f64::to_bits), fc.values().map(f64::to_bits));
    }
}

#[test]
fn too_few_training_samples_is_a_precondition_error() {
    let dir = tempfile::tempdir().unwrap();
    let set = ["--set", "grid_nx=3", "--set", "grid_ny=3", "--set", "grid_headings=2"];
    ok(&run(dir.path(), &[&["generate"], &set[..]].concat()));
    let out = run(dir.path(), &[&["train"], &set[..]].concat());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("insufficient sample: 12 entries, need at least 13"), "{}", stderr(&out));
    assert!(!dir.path().join("out/model.bin").exists());
}

#[test]
fn eval_writes_both_methods() {
    let dir = small_dir();
    for cmd in ["generate", "train"] {
        ok(&run(dir.path(), &[cmd, "--config", "small.toml"]));
    }
    let stdout = ok(&run(dir.path(), &["eval", "--config", "small.toml"]));
    let csv = fs::read_to_string(dir.path().join("out/report.csv")).unwrap();
    assert_eq!(stdout, csv);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "method,sensor,rrmse,heading_rmse");
    assert!(lines[1].starts_with("gse,") && lines[2].starts_with("knr,"));

    let report = json(&dir.path().join("out/report.json"));
    assert_eq!(report["n_train"], 134);
    assert_eq!(report["n_test"], 58);
    let methods = report["methods"].as_array().unwrap();
    let names: Vec<&str> = methods.iter().map(|m| m["method"].as_str().unwrap()).collect();
    assert_eq!(names, ["gse", "knr"]);
    for m in methods {
        assert!(m["rrmse"].as_f64().unwrap() > 0.0);
    }
    for key in ["reconstruction", "tangent_angle_deg"] {
        for stat in ["median", "p90", "max"] {
            assert!(report[key][stat].is_number(), "{key}.{stat}");
        }
    }
}

#[test]
fn zero_noise_tracking_stays_on_the_truth() {
    let dir = small_dir();
    for cmd in ["generate", "train"] {
        ok(&run(dir.path(), &[cmd, "--config", "small.toml"]));
    }
    let scenario = "start = [1.0, 2.0, 0.0]\ncontrols = \"10:0.3:0.06,10:0.3:-0.06,10:-0.3:0.06,10:-0.3:-0.06\"\n\
                    steps = 80\ndt = 0.5\nsigma_v = 0.0\nsigma_omega = 0.0\ninitial_sigma = [0.0, 0.0, 0.0]\nseed = 0\n";
    fs::write(dir.path().join("still.toml"), scenario).unwrap();
    let out = run(dir.path(), &["track", "--config", "small.toml", "--set", "scenario=\"still.toml\""]);
    // exact start and exact odometry: the gain stays at the covariance floor
    // exit 0 iff filtered ≤ dead reckoning, and dead reckoning is exact here
    assert!(matches!(out.status.code(), Some(0 | 1)), "{}", stderr(&out));
    let summary = json(&dir.path().join("out/track_summary.json"));
    assert_eq!(summary["median_rmse_dead_reckoning"].as_f64(), Some(0.0));
    let filtered = summary["median_rmse_filtered"].as_f64().unwrap();
    assert!(filtered < 1e-6, "filtered RMSE {filtered}");
    let csv = fs::read_to_string(dir.path().join("out/track_seed0.csv")).unwrap();
    assert_eq!(csv.lines().count(), 82);
}

#[test]
fn malformed_scenario_names_the_line() {
    let dir = small_dir();
    for cmd in ["generate", "train"] {
        ok(&run(dir.path(), &[cmd, "--config", "small.toml"]));
    }
    fs::write(dir.path().join("bad.toml"), "start = [1.0, 2.0, 0.0]\nsteps = 10\ndt = = 0.5\n").unwrap();
    let out = run(dir.path(), &["track", "--config", "small.toml", "--set", "scenario=\"bad.toml\""]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("bad.toml") && err.contains("line 3"), "{err}");
}

#[test]
fn validation_happens_before_side_effects() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["generate", "--set", "grid_nx=5", "--set", "bogus=1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("bogus"));
    let out = run(dir.path(), &["generate", "--set", "extractor=\"fourier\""]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("out").exists());

    let out = run(dir.path(), &["eval"]);
    assert_eq!(out.status.code(), Some(4), "{}", stderr(&out));
    let out = run(dir.path(), &["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn help_lists_config_keys() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = ok(&run(dir.path(), &["train", "--help"]));
    for key in ["world_seed", "grid_nx", "bandwidth_scale", "filter_variant", "track_seeds"] {
        assert!(stdout.contains(key), "{key} missing from help");
    }
}
