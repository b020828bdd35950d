//! Python bindings for the `qresid` residual quantum learner.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use qresid::circuit::{CircuitConfig, EncodingMode};
use qresid::config::RunConfig;
use qresid::datagen::{Dataset, DatasetSpec, Split};
use qresid::diagnostics::{gradient_variance as variance_cell, BarrenConfig};
use qresid::experiment;
use qresid::model::QuantumModule;
use qresid::spectral::{amplitude_spectrum as spectrum, GridSpec};
use qresid::training::{self, ResidualEnsemble, StageLog, TrainConfig};
use qresid::Error;

fn to_py(err: Error) -> PyErr {
    match err {
        Error::Io { .. } => PyIOError::new_err(err.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn encoding(name: &str) -> PyResult<EncodingMode> {
    name.parse().map_err(to_py)
}

/// Circuit shape: qubits, variational layers, input features, encoding.
#[pyclass(name = "CircuitConfig", module = "pyqresid", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyCircuitConfig {
    inner: CircuitConfig,
}

#[pymethods]
impl PyCircuitConfig {
    #[new]
    #[pyo3(signature = (n_qubits, n_layers, input_dim = 1, encoding = "full"))]
    fn new(n_qubits: usize, n_layers: usize, input_dim: usize, encoding: &str) -> PyResult<Self> {
        let inner = CircuitConfig::new(n_qubits, n_layers, input_dim, self::encoding(encoding)?).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[getter]
    fn n_qubits(&self) -> usize {
        self.inner.n_qubits
    }

    #[getter]
    fn n_layers(&self) -> usize {
        self.inner.n_layers
    }

    #[getter]
    fn input_dim(&self) -> usize {
        self.inner.input_dim
    }

    #[getter]
    fn encoding(&self) -> String {
        self.inner.encoding.to_string()
    }

    /// Number of trainable circuit angles.
    fn parameter_count(&self) -> usize {
        self.inner.layout().total_count()
    }

    fn __repr__(&self) -> String {
        format!(
            "CircuitConfig(n_qubits={}, n_layers={}, input_dim={}, encoding='{}')",
            self.inner.n_qubits, self.inner.n_layers, self.inner.input_dim, self.inner.encoding
        )
    }
}

/// One trainable circuit stage with its linear readout.
#[pyclass(name = "QuantumModule", module = "pyqresid", skip_from_py_object)]
#[derive(Clone)]
struct PyQuantumModule {
    inner: QuantumModule,
}

#[pymethods]
impl PyQuantumModule {
    /// Randomly initialized module (seeded).
    #[staticmethod]
    #[pyo3(signature = (config, seed = 0))]
    fn random(config: PyRef<'_, PyCircuitConfig>, seed: u64) -> PyResult<Self> {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let inner = QuantumModule::random(config.inner, &mut rng).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn zeros(config: PyRef<'_, PyCircuitConfig>) -> PyResult<Self> {
        Ok(Self {
            inner: QuantumModule::zeros(config.inner).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn from_checkpoint(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: QuantumModule::from_checkpoint_str(text).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: QuantumModule::load_checkpoint(path).map_err(to_py)?,
        })
    }

    fn to_checkpoint(&self) -> String {
        self.inner.to_checkpoint_string()
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save_checkpoint(path).map_err(to_py)
    }

    #[getter]
    fn config(&self) -> PyCircuitConfig {
        PyCircuitConfig { inner: self.inner.config }
    }

    #[getter]
    fn raw_params(&self) -> Vec<f64> {
        self.inner.raw_params.clone()
    }

    #[getter]
    fn readout_weights(&self) -> Vec<f64> {
        self.inner.readout_weights.clone()
    }

    #[getter]
    fn readout_bias(&self) -> f64 {
        self.inner.readout_bias
    }

    /// All trainable values: raw angles, readout weights, bias.
    fn to_flat(&self) -> Vec<f64> {
        self.inner.to_flat()
    }

    fn set_flat(&mut self, values: Vec<f64>) -> PyResult<()> {
        self.inner.set_flat(&values).map_err(to_py)
    }

    fn forward(&self, features: Vec<f64>) -> PyResult<f64> {
        self.inner.forward(&features).map_err(to_py)
    }

    /// Batch predictions for rows of features.
    fn predict(&self, rows: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        let eval = self.inner.evaluator().map_err(to_py)?;
        rows.iter().map(|r| eval.predict(r).map_err(to_py)).collect()
    }

    /// Squared error `(ŷ − y)²` and its gradient in `to_flat` order.
    fn forward_backward(&self, features: Vec<f64>, target: f64) -> PyResult<(f64, Vec<f64>)> {
        let (loss, grad) = self.inner.forward_backward(&features, target).map_err(to_py)?;
        Ok((loss, grad.to_flat()))
    }

    fn __repr__(&self) -> String {
        format!("QuantumModule({})", PyCircuitConfig { inner: self.inner.config }.__repr__())
    }
}

/// Labeled samples with train/val/test tags.
#[pyclass(name = "Dataset", module = "pyqresid", frozen)]
struct PyDataset {
    inner: Dataset,
}

#[pymethods]
impl PyDataset {
    #[staticmethod]
    fn read_csv(path: PathBuf) -> PyResult<Self> {
        Ok(Self {
            inner: Dataset::read_csv(path).map_err(to_py)?,
        })
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv()
    }

    /// `(x, y)` lists of one split: "train", "val" or "test".
    fn split(&self, name: &str) -> PyResult<(Vec<f64>, Vec<f64>)> {
        let split: Split = name.parse().map_err(to_py)?;
        Ok(self.inner.split(split))
    }

    #[getter]
    fn x(&self) -> Vec<f64> {
        self.inner.samples.iter().map(|s| s.x).collect()
    }

    #[getter]
    fn y(&self) -> Vec<f64> {
        self.inner.samples.iter().map(|s| s.y).collect()
    }

    #[getter]
    fn dominant(&self) -> Vec<usize> {
        self.inner.samples.iter().map(|s| s.dominant).collect()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

#[pyfunction]
#[pyo3(signature = (n_total = 5000, noise_sigma = 0.0, seed = 0, x_min = 0.0, x_max = 2.0))]
fn generate_dataset(n_total: usize, noise_sigma: f64, seed: u64, x_min: f64, x_max: f64) -> PyResult<PyDataset> {
    let spec = DatasetSpec {
        n_total,
        noise_sigma,
        seed,
        x_min,
        x_max,
        ..Default::default()
    };
    Ok(PyDataset {
        inner: qresid::datagen::generate_dataset(&spec).map_err(to_py)?,
    })
}

/// Frozen modules of a residual run.
#[pyclass(name = "ResidualEnsemble", module = "pyqresid", frozen)]
struct PyEnsemble {
    inner: ResidualEnsemble,
}

#[pymethods]
impl PyEnsemble {
    #[getter]
    fn modules(&self) -> Vec<PyQuantumModule> {
        self.inner
            .modules
            .iter()
            .map(|m| PyQuantumModule { inner: m.clone() })
            .collect()
    }

    /// Cumulative prediction of all stages.
    fn predict(&self, xs: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.predict(&xs).map_err(to_py)
    }

    /// `F_1 … F_S` evaluated at `xs`.
    fn cumulative_predictions(&self, xs: Vec<f64>) -> PyResult<Vec<Vec<f64>>> {
        self.inner.cumulative_predictions(&xs).map_err(to_py)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }
}

fn log_dict<'py>(py: Python<'py>, log: &StageLog) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("stage", log.stage)?;
    d.set_item("train_mse", log.epochs.train_mse.clone())?;
    d.set_item("val_mse", log.epochs.val_mse.clone())?;
    d.set_item("initial_train_mse", log.epochs.initial_train_mse)?;
    d.set_item("optimizer_steps", log.epochs.optimizer_steps)?;
    d.set_item("residual_mse", log.residual_mse)?;
    d.set_item("test_mse", log.test_mse)?;
    Ok(d)
}

fn train_config(stages: usize, epochs_per_stage: usize, batch_size: usize, learning_rate: f64, seed: u64) -> TrainConfig {
    TrainConfig {
        n_stages: stages,
        epochs_per_stage,
        batch_size,
        learning_rate,
        seed,
        ..Default::default()
    }
}

/// Multi-stage residual training; returns the ensemble and one log dict per stage.
#[pyfunction]
#[pyo3(signature = (dataset, config, stages = 4, epochs_per_stage = 25, batch_size = 64, learning_rate = 0.005, seed = 0))]
#[allow(clippy::too_many_arguments)]
fn train_residual<'py>(
    py: Python<'py>,
    dataset: PyRef<'_, PyDataset>,
    config: PyRef<'_, PyCircuitConfig>,
    stages: usize,
    epochs_per_stage: usize,
    batch_size: usize,
    learning_rate: f64,
    seed: u64,
) -> PyResult<(PyEnsemble, Vec<Bound<'py, PyDict>>)> {
    let cfg = train_config(stages, epochs_per_stage, batch_size, learning_rate, seed);
    let (data, circuit) = (&dataset.inner, config.inner);
    let (ensemble, logs) = py
        .detach(|| training::train_residual(data, &cfg, &circuit))
        .map_err(to_py)?;
    let logs = logs.iter().map(|l| log_dict(py, l)).collect::<PyResult<_>>()?;
    Ok((PyEnsemble { inner: ensemble }, logs))
}

/// Single module trained for `stages × epochs_per_stage` epochs.
#[pyfunction]
#[pyo3(signature = (dataset, config, stages = 4, epochs_per_stage = 25, batch_size = 64, learning_rate = 0.005, seed = 0))]
#[allow(clippy::too_many_arguments)]
fn train_baseline<'py>(
    py: Python<'py>,
    dataset: PyRef<'_, PyDataset>,
    config: PyRef<'_, PyCircuitConfig>,
    stages: usize,
    epochs_per_stage: usize,
    batch_size: usize,
    learning_rate: f64,
    seed: u64,
) -> PyResult<(PyQuantumModule, Bound<'py, PyDict>)> {
    let cfg = train_config(stages, epochs_per_stage, batch_size, learning_rate, seed);
    let (data, circuit) = (&dataset.inner, config.inner);
    let (module, log) = py
        .detach(|| training::train_baseline(data, &cfg, &circuit))
        .map_err(to_py)?;
    Ok((PyQuantumModule { inner: module }, log_dict(py, &log)?))
}

/// One-sided amplitude spectrum of samples on `[x_min, x_max)`; returns `(freqs, amps)`.
#[pyfunction]
#[pyo3(signature = (values, x_min = 0.0, x_max = 2.0))]
fn amplitude_spectrum(values: Vec<f64>, x_min: f64, x_max: f64) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let grid = GridSpec {
        x_min,
        x_max,
        n_points: values.len(),
    };
    let report = spectrum(&values, &grid).map_err(to_py)?;
    Ok((report.frequencies, report.amplitudes))
}

/// Variance over random initializations of the first circuit-parameter gradient.
#[pyfunction]
#[pyo3(signature = (n_qubits, n_layers, n_inits = 100, probe_batch = 32, seed = 0, encoding = "full"))]
fn gradient_variance(
    py: Python<'_>,
    n_qubits: usize,
    n_layers: usize,
    n_inits: usize,
    probe_batch: usize,
    seed: u64,
    encoding: &str,
) -> PyResult<f64> {
    let cfg = BarrenConfig {
        qubit_values: vec![n_qubits],
        layer_values: vec![n_layers],
        n_inits,
        probe_batch,
        encoding: self::encoding(encoding)?,
        seed,
    };
    cfg.validate().map_err(to_py)?;
    let record = py.detach(|| variance_cell(n_qubits, n_layers, &cfg)).map_err(to_py)?;
    Ok(record.grad_variance)
}

/// Runs a CLI subcommand in-process and returns the run directory.
///
/// `overrides` maps config keys to values; lists may be given as Python lists.
#[pyfunction]
#[pyo3(signature = (command, overrides = None, config_file = None))]
fn run(
    py: Python<'_>,
    command: &str,
    overrides: Option<Bound<'_, PyDict>>,
    config_file: Option<PathBuf>,
) -> PyResult<String> {
    let driver: fn(&RunConfig) -> qresid::Result<experiment::RunReport> = match command {
        "gen-data" => experiment::run_gen_data,
        "train" => experiment::run_train,
        "baseline" => experiment::run_baseline,
        "sweep-qubits" => experiment::run_sweep_qubits,
        "barren" => experiment::run_barren,
        other => return Err(PyValueError::new_err(format!("unknown command `{other}`"))),
    };
    let mut pairs = Vec::new();
    if let Some(map) = overrides {
        for (k, v) in map.iter() {
            pairs.push((k.extract::<String>()?, v.str()?.to_string()));
        }
    }
    let config = RunConfig::load(config_file.as_deref(), &pairs).map_err(to_py)?;
    let report = py.detach(|| driver(&config)).map_err(to_py)?;
    if !report.failures.is_empty() {
        return Err(PyValueError::new_err(format!(
            "{} sweep cells failed; see {}",
            report.failures.len(),
            report.run_dir.join(experiment::SWEEP_FAILURES_FILE).display()
        )));
    }
    Ok(report.run_dir.display().to_string())
}

#[pymodule]
fn pyqresid(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCircuitConfig>()?;
    m.add_class::<PyQuantumModule>()?;
    m.add_class::<PyDataset>()?;
    m.add_class::<PyEnsemble>()?;
    m.add_function(wrap_pyfunction!(generate_dataset, m)?)?;
    m.add_function(wrap_pyfunction!(train_residual, m)?)?;
    m.add_function(wrap_pyfunction!(train_baseline, m)?)?;
    m.add_function(wrap_pyfunction!(amplitude_spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(gradient_variance, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
