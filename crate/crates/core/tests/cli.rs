use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qresid::datagen::{Dataset, Split};
use qresid::experiment::{load_ensemble, load_test_split, RunManifest};
use qresid::training::mse;

const SMALL_TRAIN: &[&str] = &[
    "--n_total",
    "200",
    "--n_qubits",
    "2",
    "--n_layers",
    "1",
    "--epochs_per_stage",
    "2",
    "--stages",
    "3",
    "--batch_size",
    "16",
    "--grid_points",
    "100",
];

fn qresid(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qresid"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_ok(sub: &str, out: &Path, run_id: &str, extra: &[&str]) -> PathBuf {
    let out_str = out.to_str().unwrap();
    let mut args = vec![sub, "--output_dir", out_str, "--run_id", run_id];
    args.extend_from_slice(extra);
    let o = qresid(&args);
    assert!(
        o.status.success(),
        "{sub} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    out.join(run_id)
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn listed_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let manifest = RunManifest::verify(dir).unwrap();
    manifest
        .files
        .iter()
        .map(|f| (f.path.clone(), fs::read(dir.join(&f.path)).unwrap()))
        .collect()
}

#[test]
fn gen_data_defaults() {
    let tmp = tempfile::tempdir().unwrap();
    let a = run_ok("gen-data", tmp.path(), "a", &[]);
    let b = run_ok("gen-data", tmp.path(), "b", &[]);
    let data = Dataset::read_csv(a.join("dataset.csv")).unwrap();
    assert_eq!(data.len(), 5000);
    assert_eq!(
        [Split::Train, Split::Val, Split::Test].map(|s| data.count(s)),
        [3500, 750, 750]
    );
    assert_eq!(fs::read(a.join("dataset.csv")).unwrap(), fs::read(b.join("dataset.csv")).unwrap());
    let m = RunManifest::verify(&a).unwrap();
    assert_eq!(m.command, "gen-data");
    assert_eq!(m.files.iter().map(|f| f.path.as_str()).collect::<Vec<_>>(), ["config.toml", "dataset.csv"]);
}

#[test]
fn noise_override_is_recorded() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = run_ok("gen-data", tmp.path(), "n", &["--noise_sigma", "0.25", "--n_total", "50"]);
    assert_eq!(RunManifest::verify(&dir).unwrap().config.noise_sigma, 0.25);
    assert!(fs::read_to_string(dir.join("config.toml")).unwrap().contains("noise_sigma = 0.25"));
}

#[test]
fn train_outputs_and_recomputation() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = run_ok("train", tmp.path(), "t", SMALL_TRAIN);
    let manifest = RunManifest::verify(&dir).unwrap();
    for name in [
        "stage_log.csv",
        "stage_summary.csv",
        "spectrum.csv",
        "freq_bars.csv",
        "grid_predictions.csv",
        "checkpoints/stage_1.json",
        "checkpoints/stage_3.json",
    ] {
        assert!(manifest.files.iter().any(|f| f.path == name), "{name} missing from manifest");
    }

    let summary = csv_rows(&dir.join("stage_summary.csv"));
    assert_eq!(summary.len(), 3);
    assert_eq!(csv_rows(&dir.join("stage_log.csv")).len(), 6);
    let ensemble = load_ensemble(&dir).unwrap();
    let (xs, ys) = load_test_split(&dir).unwrap();
    let cumulative = ensemble.cumulative_predictions(&xs).unwrap();
    for (row, pred) in summary.iter().zip(&cumulative) {
        assert_eq!(row[1].parse::<f64>().unwrap(), mse(pred, &ys).unwrap());
    }

    let header = |f: &str| fs::read_to_string(dir.join(f)).unwrap().lines().next().unwrap().to_string();
    assert_eq!(
        header("spectrum.csv"),
        "freq_hz,amp_true,amp_pred_s1,amp_pred_s2,amp_pred_s3,amp_resid_s1,amp_resid_s2,amp_resid_s3"
    );
    assert_eq!(header("grid_predictions.csv"), "x,y_true,pred_s1,pred_s2,pred_s3");
    assert_eq!(csv_rows(&dir.join("spectrum.csv")).len(), 51);
    assert_eq!(csv_rows(&dir.join("grid_predictions.csv")).len(), 100);
    assert_eq!(csv_rows(&dir.join("freq_bars.csv")).len(), 5 * 3);
}

#[test]
fn reruns_and_snapshots_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let a = run_ok("train", tmp.path(), "a", SMALL_TRAIN);
    let b = run_ok("train", tmp.path(), "b", SMALL_TRAIN);
    let snapshot = a.join("config.toml");
    let c = run_ok("train", tmp.path(), "c", &["--config", snapshot.to_str().unwrap()]);
    let strip = |files: Vec<(String, Vec<u8>)>| -> Vec<(String, Vec<u8>)> {
        files.into_iter().filter(|(p, _)| p != "config.toml").collect()
    };
    let fa = strip(listed_files(&a));
    assert_eq!(fa, strip(listed_files(&b)));
    assert_eq!(fa, strip(listed_files(&c)));
}

#[test]
fn single_stage_train() {
    let tmp = tempfile::tempdir().unwrap();
    let mut args = SMALL_TRAIN.to_vec();
    args.extend(["--stages", "1"]);
    let dir = run_ok("train", tmp.path(), "s1", &args);
    assert_eq!(csv_rows(&dir.join("stage_summary.csv")).len(), 1);
    assert_eq!(load_ensemble(&dir).unwrap().len(), 1);
}

#[test]
fn baseline_log_and_recomputation() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = run_ok("baseline", tmp.path(), "b", SMALL_TRAIN);
    let log = csv_rows(&dir.join("stage_log.csv"));
    assert_eq!(log.len(), 6);
    assert!(log.iter().all(|r| r[0] == "1"));
    assert_eq!(log.last().unwrap()[1], "6");
    let ensemble = load_ensemble(&dir).unwrap();
    assert_eq!(ensemble.len(), 1);
    let (xs, ys) = load_test_split(&dir).unwrap();
    let summary = csv_rows(&dir.join("stage_summary.csv"));
    assert_eq!(summary[0][1].parse::<f64>().unwrap(), mse(&ensemble.predict(&xs).unwrap(), &ys).unwrap());
    let again = run_ok("baseline", tmp.path(), "b2", SMALL_TRAIN);
    assert_eq!(
        fs::read(dir.join("stage_log.csv")).unwrap(),
        fs::read(again.join("stage_log.csv")).unwrap()
    );
}

#[test]
fn sweep_grid_and_relative_improvement() {
    let tmp = tempfile::tempdir().unwrap();
    let mut args = SMALL_TRAIN.to_vec();
    args.extend(["--sweep_qubits", "1,2", "--sweep_seeds", "0,1", "--stages", "2"]);
    let dir = run_ok("sweep-qubits", tmp.path(), "sw", &args);
    let rows = csv_rows(&dir.join("sweep.csv"));
    assert_eq!(rows.len(), 2 * 2 * 2);
    for r in &rows {
        if r[2] == "1" {
            assert_eq!(r[5], "0.0");
        }
        let (s1, s, rel): (f64, f64, f64) = (
            rows.iter().find(|q| q[0] == r[0] && q[1] == r[1] && q[2] == "1").unwrap()[3].parse().unwrap(),
            r[3].parse().unwrap(),
            r[5].parse().unwrap(),
        );
        assert_eq!(rel, (s1 - s) / s1);
    }
    assert_eq!(csv_rows(&dir.join("sweep_failures.csv")).len(), 0);
}

#[test]
fn barren_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let args = [
        "--barren_qubits",
        "2,3,4",
        "--barren_layers",
        "1,2",
        "--barren_inits",
        "4",
        "--probe_batch",
        "3",
    ];
    let a = run_ok("barren", tmp.path(), "a", &args);
    let b = run_ok("barren", tmp.path(), "b", &args);
    assert_eq!(csv_rows(&a.join("barren.csv")).len(), 6);
    let refs = csv_rows(&a.join("barren_reference.csv"));
    assert_eq!(refs.iter().map(|r| r[0].as_str()).collect::<Vec<_>>(), ["2", "3", "4"]);
    for f in ["barren.csv", "barren_reference.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap());
    }
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();

    let o = qresid(&["train", "--output_dir", out, "--stages", "0"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("`stages`"));
    assert_eq!(qresid(&["gen-data", "--no_such_key", "1"]).status.code(), Some(1));
    assert_eq!(qresid(&["gen-data", "--x_min", "3"]).status.code(), Some(1));

    let missing = tmp.path().join("missing.csv");
    let o = qresid(&["train", "--output_dir", out, "--data_file", missing.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));

    let blocker = tmp.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let o = qresid(&["gen-data", "--output_dir", blocker.to_str().unwrap(), "--n_total", "10"]);
    assert_eq!(o.status.code(), Some(2));

    // a dataset without validation rows makes every sweep cell fail
    let no_val = tmp.path().join("no_val.csv");
    fs::write(&no_val, "x,y,split,dominant\n0.1,0.2,train,0\n0.5,0.1,test,0\n").unwrap();
    let mut args = vec!["sweep-qubits", "--output_dir", out, "--run_id", "partial"];
    args.extend(["--data_file", no_val.to_str().unwrap(), "--sweep_qubits", "1,2", "--sweep_seeds", "0"]);
    let o = qresid(&args);
    assert_eq!(o.status.code(), Some(3));
    let dir = tmp.path().join("partial");
    RunManifest::verify(&dir).unwrap();
    assert_eq!(csv_rows(&dir.join("sweep_failures.csv")).len(), 2);
}

#[test]
fn tampered_files_fail_verification() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = run_ok("gen-data", tmp.path(), "g", &["--n_total", "20"]);
    RunManifest::verify(&dir).unwrap();
    fs::write(dir.join("dataset.csv"), "x,y,split,dominant\n").unwrap();
    assert!(RunManifest::verify(&dir).is_err());
}
