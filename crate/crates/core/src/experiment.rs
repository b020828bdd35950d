//! Experiment drivers behind the `qresid` subcommands.
//!
//! Every driver writes into `<output_dir>/<run_id>/`, records each emitted
//! file with its SHA-256 checksum, and writes `manifest.json` last.
//! Floats are written with [`fmt_f64`], the shortest decimal string that
//! parses back to the same `f64`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::datagen::{generate_dataset, target_function, Dataset, Split};
use crate::diagnostics::run_barren_sweep;
use crate::error::{Error, Result};
use crate::fmt_f64;
use crate::model::QuantumModule;
use crate::spectral::{amplitude_spectrum, dense_grid, spectra_from_predictions};
use crate::training::{train_baseline, train_residual, ResidualEnsemble, StageLog};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const CONFIG_SNAPSHOT_FILE: &str = "config.toml";
pub const DATASET_FILE: &str = "dataset.csv";
pub const STAGE_LOG_FILE: &str = "stage_log.csv";
pub const STAGE_SUMMARY_FILE: &str = "stage_summary.csv";
pub const SPECTRUM_FILE: &str = "spectrum.csv";
pub const FREQ_BARS_FILE: &str = "freq_bars.csv";
pub const GRID_PREDICTIONS_FILE: &str = "grid_predictions.csv";
pub const SWEEP_FILE: &str = "sweep.csv";
pub const SWEEP_FAILURES_FILE: &str = "sweep_failures.csv";
pub const BARREN_FILE: &str = "barren.csv";
pub const BARREN_REFERENCE_FILE: &str = "barren_reference.csv";

/// Checkpoint path of stage `stage` (1-based), relative to the run directory.
pub fn checkpoint_path(stage: usize) -> PathBuf {
    PathBuf::from("checkpoints").join(format!("stage_{stage}.json"))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRecord {
    /// Path relative to the run directory, `/`-separated.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub command: String,
    pub tool_version: String,
    pub seed: u64,
    pub started_at: String,
    pub finished_at: String,
    pub config: RunConfig,
    pub files: Vec<FileRecord>,
}

impl RunManifest {
    pub fn read(run_dir: impl AsRef<Path>) -> Result<Self> {
        let path = run_dir.as_ref().join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), e))
    }

    /// Reads the manifest and checks that every listed file exists with the recorded checksum.
    pub fn verify(run_dir: impl AsRef<Path>) -> Result<Self> {
        let run_dir = run_dir.as_ref();
        let manifest = Self::read(run_dir)?;
        for record in &manifest.files {
            let path = run_dir.join(&record.path);
            let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
            let digest = sha256_hex(&bytes);
            if digest != record.sha256 || bytes.len() as u64 != record.bytes {
                return Err(Error::Structural(format!(
                    "{} does not match its manifest checksum",
                    record.path
                )));
            }
        }
        Ok(manifest)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// A qubit-sweep cell that failed and was skipped.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CellFailure {
    pub n_qubits: usize,
    pub seed: u64,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunReport {
    pub run_dir: PathBuf,
    pub manifest: RunManifest,
    pub failures: Vec<CellFailure>,
}

/// Collects the files of one run so the manifest can list them.
struct Artifacts {
    dir: PathBuf,
    files: Vec<FileRecord>,
    command: &'static str,
    started_at: String,
}

impl Artifacts {
    fn create(config: &RunConfig, command: &'static str) -> Result<Self> {
        let dir = config.run_dir();
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let mut artifacts = Self {
            dir,
            files: Vec::new(),
            command,
            started_at: timestamp(),
        };
        artifacts.write(CONFIG_SNAPSHOT_FILE, config.to_toml_string())?;
        Ok(artifacts)
    }

    fn write(&mut self, relative: impl AsRef<Path>, contents: impl AsRef<[u8]>) -> Result<()> {
        let relative = relative.as_ref();
        let path = self.dir.join(relative);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        let bytes = contents.as_ref();
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        let name = relative
            .components()
            .map(|c| c.as_os_str().to_string_lossy())
            .collect::<Vec<_>>()
            .join("/");
        self.files.retain(|f| f.path != name);
        self.files.push(FileRecord {
            path: name,
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }

    fn finish(self, config: &RunConfig, failures: Vec<CellFailure>) -> Result<RunReport> {
        let manifest = RunManifest {
            run_id: config.run_id.clone(),
            command: self.command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seed: config.seed,
            started_at: self.started_at,
            finished_at: timestamp(),
            config: config.clone(),
            files: self.files,
        };
        let path = self.dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
        Ok(RunReport {
            run_dir: self.dir,
            manifest,
            failures,
        })
    }
}

fn timestamp() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

fn csv<I, R>(header: &str, rows: I) -> String
where
    I: IntoIterator<Item = R>,
    R: AsRef<str>,
{
    let mut out = String::from(header);
    out.push('\n');
    for row in rows {
        out.push_str(row.as_ref());
        out.push('\n');
    }
    out
}

fn join_floats(values: impl IntoIterator<Item = f64>) -> String {
    values.into_iter().map(fmt_f64).collect::<Vec<_>>().join(",")
}

/// The configured dataset: read from `data_file` when set, otherwise generated.
pub fn load_dataset(config: &RunConfig) -> Result<Dataset> {
    if config.data_file.is_empty() {
        generate_dataset(&config.dataset_spec())
    } else {
        Dataset::read_csv(&config.data_file)
    }
}

pub fn run_gen_data(config: &RunConfig) -> Result<RunReport> {
    config.validate()?;
    let dataset = generate_dataset(&config.dataset_spec())?;
    let mut artifacts = Artifacts::create(config, "gen-data")?;
    artifacts.write(DATASET_FILE, dataset.to_csv())?;
    artifacts.finish(config, Vec::new())
}

pub fn run_train(config: &RunConfig) -> Result<RunReport> {
    config.validate()?;
    let dataset = load_dataset(config)?;
    let (ensemble, logs) = train_residual(&dataset, &config.train_config(), &config.circuit_config()?)?;
    let mut artifacts = Artifacts::create(config, "train")?;
    artifacts.write(DATASET_FILE, dataset.to_csv())?;
    write_model_artifacts(&mut artifacts, config, &ensemble, &logs)?;
    artifacts.finish(config, Vec::new())
}

pub fn run_baseline(config: &RunConfig) -> Result<RunReport> {
    config.validate()?;
    let dataset = load_dataset(config)?;
    let (module, log) = train_baseline(&dataset, &config.train_config(), &config.circuit_config()?)?;
    let ensemble = ResidualEnsemble::new(vec![module])?;
    let mut artifacts = Artifacts::create(config, "baseline")?;
    artifacts.write(DATASET_FILE, dataset.to_csv())?;
    write_model_artifacts(&mut artifacts, config, &ensemble, &[log])?;
    artifacts.finish(config, Vec::new())
}

fn write_model_artifacts(
    artifacts: &mut Artifacts,
    config: &RunConfig,
    ensemble: &ResidualEnsemble,
    logs: &[StageLog],
) -> Result<()> {
    artifacts.write(STAGE_LOG_FILE, stage_log_csv(logs))?;
    artifacts.write(
        STAGE_SUMMARY_FILE,
        csv(
            "stage,test_mse",
            logs.iter().map(|l| format!("{},{}", l.stage, fmt_f64(l.test_mse))),
        ),
    )?;
    for (s, module) in ensemble.modules.iter().enumerate() {
        artifacts.write(checkpoint_path(s + 1), module.to_checkpoint_string())?;
    }

    let grid = config.grid_spec();
    let xs = dense_grid(&grid)?;
    let components = config.components();
    let y_true: Vec<f64> = xs.iter().map(|x| target_function(&components, *x)).collect();
    let cumulative = ensemble.cumulative_predictions(&xs)?;
    let target_freqs = config.effective_target_freqs();
    let spectra = spectra_from_predictions(&cumulative, &y_true, &grid, &target_freqs)?;
    let truth = amplitude_spectrum(&y_true, &grid)?;
    let n_stages = cumulative.len();

    let stage_cols = |prefix: &str| (1..=n_stages).map(|s| format!(",{prefix}{s}")).collect::<String>();
    artifacts.write(
        GRID_PREDICTIONS_FILE,
        csv(
            &format!("x,y_true{}", stage_cols("pred_s")),
            xs.iter().enumerate().map(|(i, x)| {
                join_floats([*x, y_true[i]].into_iter().chain(cumulative.iter().map(|c| c[i])))
            }),
        ),
    )?;
    artifacts.write(
        SPECTRUM_FILE,
        csv(
            &format!("freq_hz,amp_true{}{}", stage_cols("amp_pred_s"), stage_cols("amp_resid_s")),
            truth.frequencies.iter().enumerate().map(|(k, f)| {
                join_floats(
                    [*f, truth.amplitudes[k]]
                        .into_iter()
                        .chain(spectra.iter().map(|s| s.prediction.amplitudes[k]))
                        .chain(spectra.iter().map(|s| s.residual.amplitudes[k])),
                )
            }),
        ),
    )?;
    let mut bars = Vec::new();
    for (i, f) in target_freqs.iter().enumerate() {
        let true_amp = truth.amplitude_at(*f)?;
        for s in &spectra {
            bars.push(format!(
                "{},{},{},{}",
                fmt_f64(*f),
                fmt_f64(true_amp),
                s.stage,
                fmt_f64(s.target_amplitudes[i].1)
            ));
        }
    }
    artifacts.write(FREQ_BARS_FILE, csv("target_freq,true_amp,stage,pred_amp", bars))
}

fn stage_log_csv(logs: &[StageLog]) -> String {
    let mut rows = Vec::new();
    for log in logs {
        for (e, (train, val)) in log.epochs.train_mse.iter().zip(&log.epochs.val_mse).enumerate() {
            rows.push(format!("{},{},{},{}", log.stage, e + 1, fmt_f64(*train), fmt_f64(*val)));
        }
    }
    csv("stage,epoch,train_mse,val_mse", rows)
}

/// One row of the qubit sweep.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepRow {
    pub n_qubits: usize,
    pub seed: u64,
    pub stage: usize,
    pub test_mse: f64,
    pub baseline_mse: f64,
    pub rel_improvement: f64,
}

/// Residual and baseline run for one `(n_qubits, seed)` cell.
pub fn sweep_cell(config: &RunConfig, dataset: &Dataset, n_qubits: usize, seed: u64) -> Result<Vec<SweepRow>> {
    let cell = RunConfig {
        n_qubits,
        seed,
        ..config.clone()
    };
    cell.validate()?;
    let circuit = cell.circuit_config()?;
    let train = cell.train_config();
    let (_, logs) = train_residual(dataset, &train, &circuit)?;
    let (_, baseline) = train_baseline(dataset, &train, &circuit)?;
    let first = logs[0].test_mse;
    Ok(logs
        .iter()
        .map(|l| SweepRow {
            n_qubits,
            seed,
            stage: l.stage,
            test_mse: l.test_mse,
            baseline_mse: baseline.test_mse,
            rel_improvement: (first - l.test_mse) / first,
        })
        .collect())
}

pub fn run_sweep_qubits(config: &RunConfig) -> Result<RunReport> {
    config.validate()?;
    let dataset = load_dataset(config)?;
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for &n in &config.sweep_qubits {
        for &seed in &config.sweep_seeds {
            match sweep_cell(config, &dataset, n, seed) {
                Ok(cell) => rows.extend(cell),
                Err(e) => failures.push(CellFailure {
                    n_qubits: n,
                    seed,
                    error: e.to_string(),
                }),
            }
        }
    }
    let mut artifacts = Artifacts::create(config, "sweep-qubits")?;
    artifacts.write(DATASET_FILE, dataset.to_csv())?;
    artifacts.write(
        SWEEP_FILE,
        csv(
            "n_qubits,seed,stage,test_mse,baseline_mse,rel_improvement",
            rows.iter().map(|r| {
                format!(
                    "{},{},{},{},{},{}",
                    r.n_qubits,
                    r.seed,
                    r.stage,
                    fmt_f64(r.test_mse),
                    fmt_f64(r.baseline_mse),
                    fmt_f64(r.rel_improvement)
                )
            }),
        ),
    )?;
    artifacts.write(
        SWEEP_FAILURES_FILE,
        csv(
            "n_qubits,seed,error",
            failures
                .iter()
                .map(|f| format!("{},{},\"{}\"", f.n_qubits, f.seed, f.error.replace('"', "\"\""))),
        ),
    )?;
    artifacts.finish(config, failures)
}

pub fn run_barren(config: &RunConfig) -> Result<RunReport> {
    config.validate()?;
    let sweep = run_barren_sweep(&config.barren_config())?;
    let mut artifacts = Artifacts::create(config, "barren")?;
    artifacts.write(
        BARREN_FILE,
        csv(
            "n_qubits,n_layers,grad_variance,n_inits",
            sweep.records.iter().map(|r| {
                format!("{},{},{},{}", r.n_qubits, r.n_layers, fmt_f64(r.grad_variance), r.n_inits)
            }),
        ),
    )?;
    artifacts.write(
        BARREN_REFERENCE_FILE,
        csv(
            "n_qubits,poly_ref,exp_ref",
            sweep
                .references
                .iter()
                .map(|r| format!("{},{},{}", r.n_qubits, fmt_f64(r.poly_ref), fmt_f64(r.exp_ref))),
        ),
    )?;
    artifacts.finish(config, Vec::new())
}

/// Loads the stage checkpoints of a `train` or `baseline` run directory.
pub fn load_ensemble(run_dir: impl AsRef<Path>) -> Result<ResidualEnsemble> {
    let run_dir = run_dir.as_ref();
    let mut modules = Vec::new();
    for stage in 1.. {
        let path = run_dir.join(checkpoint_path(stage));
        if !path.exists() {
            break;
        }
        modules.push(QuantumModule::load_checkpoint(&path)?);
    }
    if modules.is_empty() {
        return Err(Error::Input(format!("no checkpoints under {}", run_dir.display())));
    }
    ResidualEnsemble::new(modules)
}

/// Test-split `(x, y)` of the dataset saved in a run directory.
pub fn load_test_split(run_dir: impl AsRef<Path>) -> Result<(Vec<f64>, Vec<f64>)> {
    Ok(Dataset::read_csv(run_dir.as_ref().join(DATASET_FILE))?.split(Split::Test))
}
