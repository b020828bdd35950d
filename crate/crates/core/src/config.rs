//! Flat key–value run configuration.
//!
//! A config file is a TOML document whose top-level keys are the fields of
//! [`RunConfig`]; nothing is nested. Every key can also be given on the
//! command line as `--key value` (or `--key=value`), which takes precedence
//! over the file. Dashes in flag names are read as underscores. List-valued
//! keys accept either TOML arrays (`[2, 4]`) or comma-separated values
//! (`2,4`). Unknown keys are rejected.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::circuit::{CircuitConfig, EncodingMode};
use crate::datagen::{default_components, DatasetSpec, Envelope, FrequencyComponent};
use crate::diagnostics::BarrenConfig;
use crate::error::{Error, Result};
use crate::simulator::MAX_QUBITS;
use crate::spectral::GridSpec;
use crate::training::TrainConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub run_id: String,
    pub output_dir: PathBuf,

    // dataset
    pub n_total: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub noise_sigma: f64,
    pub train_fraction: f64,
    pub val_fraction: f64,
    pub test_fraction: f64,
    pub data_seed: u64,
    pub component_freqs: Vec<f64>,
    pub component_centers: Vec<f64>,
    pub component_widths: Vec<f64>,
    pub component_amplitudes: Vec<f64>,
    pub component_envelopes: Vec<Envelope>,
    /// Existing dataset CSV to train on instead of generating one. Empty means generate.
    pub data_file: String,

    // circuit
    pub n_qubits: usize,
    pub n_layers: usize,
    pub encoding: EncodingMode,

    // training
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs_per_stage: usize,
    pub stages: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub seed: u64,

    // spectral analysis
    pub grid_points: usize,
    /// Frequencies read out per stage. Empty means the component frequencies.
    pub target_freqs: Vec<f64>,

    // barren-plateau sweep
    pub barren_qubits: Vec<usize>,
    pub barren_layers: Vec<usize>,
    pub barren_inits: usize,
    pub probe_batch: usize,

    // qubit sweep
    pub sweep_qubits: Vec<usize>,
    pub sweep_seeds: Vec<u64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let components = default_components();
        let dataset = DatasetSpec::default();
        let train = TrainConfig::default();
        let barren = BarrenConfig::default();
        Self {
            run_id: "run".into(),
            output_dir: PathBuf::from("runs"),
            n_total: dataset.n_total,
            x_min: dataset.x_min,
            x_max: dataset.x_max,
            noise_sigma: dataset.noise_sigma,
            train_fraction: dataset.split_fractions.0,
            val_fraction: dataset.split_fractions.1,
            test_fraction: dataset.split_fractions.2,
            data_seed: dataset.seed,
            component_freqs: components.iter().map(|c| c.omega).collect(),
            component_centers: components.iter().map(|c| c.center).collect(),
            component_widths: components.iter().map(|c| c.width).collect(),
            component_amplitudes: components.iter().map(|c| c.amplitude).collect(),
            component_envelopes: components.iter().map(|c| c.envelope).collect(),
            data_file: String::new(),
            n_qubits: 6,
            n_layers: 2,
            encoding: EncodingMode::Full,
            batch_size: train.batch_size,
            learning_rate: train.learning_rate,
            epochs_per_stage: train.epochs_per_stage,
            stages: train.n_stages,
            adam_beta1: train.adam_beta1,
            adam_beta2: train.adam_beta2,
            adam_epsilon: train.adam_epsilon,
            seed: train.seed,
            grid_points: GridSpec::default().n_points,
            target_freqs: Vec::new(),
            barren_qubits: barren.qubit_values,
            barren_layers: barren.layer_values,
            barren_inits: barren.n_inits,
            probe_batch: barren.probe_batch,
            sweep_qubits: (2..=10).collect(),
            sweep_seeds: vec![0, 1, 2],
        }
    }
}

fn default_table() -> Table {
    Table::try_from(RunConfig::default()).expect("defaults serialize")
}

/// Parses a command-line value for `key`, using the default's TOML type as a hint.
fn parse_override(key: &str, raw: &str, hint: &Value) -> Result<Value> {
    let parse_scalar = |s: &str| -> Value {
        let s = s.trim();
        match toml::from_str::<Table>(&format!("v = {s}")) {
            Ok(mut t) => t.remove("v").expect("parsed key"),
            Err(_) => Value::String(s.to_string()),
        }
    };
    let value = match hint {
        Value::Array(_) if raw.trim().starts_with('[') => parse_scalar(raw),
        Value::Array(_) if raw.trim().is_empty() => Value::Array(Vec::new()),
        Value::Array(_) => Value::Array(raw.split(',').map(parse_scalar).collect()),
        // keep path-like and free-text values verbatim
        Value::String(_) => Value::String(raw.to_string()),
        _ => parse_scalar(raw),
    };
    // integers where floats are expected, e.g. `--x_max 2`
    let value = match (hint, value) {
        (Value::Float(_), Value::Integer(i)) => Value::Float(i as f64),
        (Value::Array(_), Value::Array(items)) => Value::Array(
            items
                .into_iter()
                .map(|v| match (v, first_float(hint)) {
                    (Value::Integer(i), true) => Value::Float(i as f64),
                    (v, _) => v,
                })
                .collect(),
        ),
        (_, v) => v,
    };
    if matches!(value, Value::String(_)) && !matches!(hint, Value::String(_)) && !hint_is_enum(key) {
        return Err(Error::config(key, format!("cannot parse `{raw}`")));
    }
    Ok(value)
}

fn first_float(hint: &Value) -> bool {
    matches!(hint, Value::Array(a) if matches!(a.first(), Some(Value::Float(_))))
}

fn hint_is_enum(key: &str) -> bool {
    matches!(key, "encoding" | "component_envelopes")
}

/// Splits `--key value` / `--key=value` pairs.
pub fn parse_flag_pairs(args: &[String]) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        let Some(flag) = arg.strip_prefix("--") else {
            return Err(Error::config(arg.clone(), "expected a `--key value` flag"));
        };
        let (key, value) = match flag.split_once('=') {
            Some((k, v)) => (k.to_string(), v.to_string()),
            None => {
                let v = it
                    .next()
                    .ok_or_else(|| Error::config(flag, "flag is missing its value"))?;
                (flag.to_string(), v.clone())
            }
        };
        pairs.push((key.replace('-', "_"), value));
    }
    Ok(pairs)
}

impl RunConfig {
    /// Reads an optional config file, applies flag overrides, and validates.
    pub fn load(file: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let mut table = match file {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                toml::from_str::<Table>(&text).map_err(|e| Error::parse(path.display().to_string(), e))?
            }
            None => Table::new(),
        };
        let defaults = default_table();
        for key in table.keys() {
            if !defaults.contains_key(key) {
                return Err(Error::config(key.clone(), "unknown key"));
            }
        }
        for (key, raw) in overrides {
            let hint = defaults
                .get(key)
                .ok_or_else(|| Error::config(key.clone(), "unknown key"))?;
            table.insert(key.clone(), parse_override(key, raw, hint)?);
        }
        Self::from_table(table)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table = toml::from_str::<Table>(text).map_err(|e| Error::parse("config", e))?;
        Self::from_table(table)
    }

    fn from_table(table: Table) -> Result<Self> {
        let defaults = default_table();
        // report the offending key when a value has the wrong type
        for (key, value) in &table {
            let Some(hint) = defaults.get(key) else {
                return Err(Error::config(key.clone(), "unknown key"));
            };
            let mut probe = Table::new();
            probe.insert(key.clone(), value.clone());
            if let Err(e) = probe.try_into::<RunConfig>() {
                let _ = hint;
                return Err(Error::config(key.clone(), e.message().to_string()));
            }
        }
        let config: RunConfig = table
            .try_into()
            .map_err(|e: toml::de::Error| Error::config("config", e.message().to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.run_id.is_empty() || self.run_id.contains(['/', '\\']) || self.run_id.starts_with('.') {
            return Err(Error::config("run_id", "must be a plain, non-empty name"));
        }
        let finite = |key: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(key, "must be finite"))
            }
        };
        finite("x_min", self.x_min)?;
        finite("x_max", self.x_max)?;
        if self.x_min >= self.x_max {
            return Err(Error::config("x_max", "must exceed x_min"));
        }
        if self.n_total == 0 {
            return Err(Error::config("n_total", "must be positive"));
        }
        if !self.noise_sigma.is_finite() || self.noise_sigma < 0.0 {
            return Err(Error::config("noise_sigma", "must be a non-negative number"));
        }
        for (key, v) in [
            ("train_fraction", self.train_fraction),
            ("val_fraction", self.val_fraction),
            ("test_fraction", self.test_fraction),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::config(key, format!("{v} is not in (0, 1)")));
            }
        }
        let sum = self.train_fraction + self.val_fraction + self.test_fraction;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::config("train_fraction", format!("split fractions sum to {sum}, not 1")));
        }
        let k = self.component_freqs.len();
        if k == 0 {
            return Err(Error::config("component_freqs", "needs at least one component"));
        }
        for (key, len) in [
            ("component_centers", self.component_centers.len()),
            ("component_widths", self.component_widths.len()),
            ("component_amplitudes", self.component_amplitudes.len()),
            ("component_envelopes", self.component_envelopes.len()),
        ] {
            if len != k {
                return Err(Error::config(key, format!("has {len} entries, component_freqs has {k}")));
            }
        }
        if let Some(w) = self.component_widths.iter().find(|w| !w.is_finite() || **w <= 0.0) {
            return Err(Error::config("component_widths", format!("{w} is not positive")));
        }
        if let Some(f) = self.component_freqs.iter().find(|f| !f.is_finite() || **f < 0.0) {
            return Err(Error::config("component_freqs", format!("{f} is negative")));
        }
        for (key, list) in [("component_centers", &self.component_centers), ("component_amplitudes", &self.component_amplitudes)] {
            if list.iter().any(|v| !v.is_finite()) {
                return Err(Error::config(key, "entries must be finite"));
            }
        }

        for (key, n) in [("n_qubits", self.n_qubits)] {
            if n == 0 || n > MAX_QUBITS {
                return Err(Error::config(key, format!("{n} is outside 1..={MAX_QUBITS}")));
            }
        }
        if self.n_layers == 0 {
            return Err(Error::config("n_layers", "must be at least 1"));
        }
        self.train_config().validate()?;

        if self.grid_points < 2 {
            return Err(Error::config("grid_points", "must be at least 2"));
        }
        let nyquist = 0.5 * self.grid_points as f64 / (self.x_max - self.x_min);
        if let Some(f) = self.effective_target_freqs().iter().find(|f| !f.is_finite() || **f < 0.0 || **f > nyquist) {
            return Err(Error::config("target_freqs", format!("{f} Hz is outside [0, {nyquist}] Hz")));
        }

        for (key, list) in [
            ("barren_qubits", &self.barren_qubits),
            ("sweep_qubits", &self.sweep_qubits),
        ] {
            if list.is_empty() {
                return Err(Error::config(key, "empty list"));
            }
            if let Some(n) = list.iter().find(|n| **n == 0 || **n > MAX_QUBITS) {
                return Err(Error::config(key, format!("{n} is outside 1..={MAX_QUBITS}")));
            }
        }
        if self.barren_layers.is_empty() || self.barren_layers.contains(&0) {
            return Err(Error::config("barren_layers", "needs positive layer counts"));
        }
        if self.barren_inits < 2 {
            return Err(Error::config("barren_inits", "need at least 2 initializations"));
        }
        if self.probe_batch == 0 {
            return Err(Error::config("probe_batch", "must be positive"));
        }
        if self.sweep_seeds.is_empty() {
            return Err(Error::config("sweep_seeds", "empty list"));
        }
        Ok(())
    }

    pub fn components(&self) -> Vec<FrequencyComponent> {
        (0..self.component_freqs.len())
            .map(|k| FrequencyComponent {
                omega: self.component_freqs[k],
                center: self.component_centers[k],
                width: self.component_widths[k],
                amplitude: self.component_amplitudes[k],
                envelope: self.component_envelopes[k],
            })
            .collect()
    }

    pub fn dataset_spec(&self) -> DatasetSpec {
        DatasetSpec {
            components: self.components(),
            n_total: self.n_total,
            x_min: self.x_min,
            x_max: self.x_max,
            noise_sigma: self.noise_sigma,
            split_fractions: (self.train_fraction, self.val_fraction, self.test_fraction),
            seed: self.data_seed,
        }
    }

    pub fn circuit_config(&self) -> Result<CircuitConfig> {
        CircuitConfig::new(self.n_qubits, self.n_layers, 1, self.encoding)
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            epochs_per_stage: self.epochs_per_stage,
            n_stages: self.stages,
            adam_beta1: self.adam_beta1,
            adam_beta2: self.adam_beta2,
            adam_epsilon: self.adam_epsilon,
            seed: self.seed,
        }
    }

    pub fn grid_spec(&self) -> GridSpec {
        GridSpec {
            x_min: self.x_min,
            x_max: self.x_max,
            n_points: self.grid_points,
        }
    }

    pub fn barren_config(&self) -> BarrenConfig {
        BarrenConfig {
            qubit_values: self.barren_qubits.clone(),
            layer_values: self.barren_layers.clone(),
            n_inits: self.barren_inits,
            probe_batch: self.probe_batch,
            encoding: self.encoding,
            seed: self.seed,
        }
    }

    pub fn effective_target_freqs(&self) -> Vec<f64> {
        if self.target_freqs.is_empty() {
            self.component_freqs.clone()
        } else {
            self.target_freqs.clone()
        }
    }

    pub fn run_dir(&self) -> PathBuf {
        self.output_dir.join(&self.run_id)
    }
}
