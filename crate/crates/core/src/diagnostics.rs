//! Barren-plateau probe: variance, over random initializations, of the
//! batch-MSE gradient with respect to raw circuit parameter 0 (the first
//! `RY` of layer 1 on qubit 0).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::{CircuitConfig, EncodingMode};
use crate::datagen::{default_components, target_function};
use crate::error::{Error, Result};
use crate::model::QuantumModule;
use crate::training::derive_seed;

const PROBE_DATA_STREAM: u64 = 0xDA7A;
const PROBE_INIT_STREAM: u64 = 0x1217;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BarrenConfig {
    pub qubit_values: Vec<usize>,
    pub layer_values: Vec<usize>,
    pub n_inits: usize,
    pub probe_batch: usize,
    pub encoding: EncodingMode,
    pub seed: u64,
}

impl Default for BarrenConfig {
    fn default() -> Self {
        Self {
            qubit_values: (2..=10).collect(),
            layer_values: (1..=4).collect(),
            n_inits: 100,
            probe_batch: 32,
            encoding: EncodingMode::Full,
            seed: 0,
        }
    }
}

impl BarrenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.qubit_values.is_empty() {
            return Err(Error::config("barren_qubits", "empty list"));
        }
        if self.layer_values.is_empty() {
            return Err(Error::config("barren_layers", "empty list"));
        }
        if self.n_inits < 2 {
            return Err(Error::config("barren_inits", "need at least 2 initializations"));
        }
        if self.probe_batch == 0 {
            return Err(Error::config("probe_batch", "must be positive"));
        }
        for &n in &self.qubit_values {
            for &l in &self.layer_values {
                CircuitConfig::new(n, l, 1, self.encoding)?;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VarianceRecord {
    pub n_qubits: usize,
    pub n_layers: usize,
    pub grad_variance: f64,
    pub n_inits: usize,
}

/// Dashed guide curves `c₁/n` and `c₂·e^{−n/2}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferencePoint {
    pub n_qubits: usize,
    pub poly_ref: f64,
    pub exp_ref: f64,
}

/// Fixed inputs and clean targets shared by every cell of a sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbeSet {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl ProbeSet {
    /// `probe_batch` inputs on `[0, 2]` with targets from the default component table.
    pub fn new(config: &BarrenConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &[PROBE_DATA_STREAM]));
        let components = default_components();
        let x: Vec<f64> = (0..config.probe_batch)
            .map(|_| rng.random_range(0.0..=2.0))
            .collect();
        let y = x.iter().map(|x| target_function(&components, *x)).collect();
        Self { x, y }
    }
}

/// Module whose effective circuit angles are i.i.d. uniform on `(−π, π)`,
/// with readout weights 1 and bias 0.
pub fn sample_probe_init(config: &CircuitConfig, seed: u64) -> Result<QuantumModule> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw_params = (0..config.layout().total_count())
        .map(|_| {
            let u = loop {
                let u: f64 = rng.random_range(-1.0..1.0);
                if u > -1.0 {
                    break u;
                }
            };
            u.atanh()
        })
        .collect();
    QuantumModule::new(*config, raw_params, vec![1.0; config.n_qubits], 0.0)
}

/// `∂(batch MSE)/∂raw₀` for one module on the probe set.
pub fn probe_gradient(module: &QuantumModule, probe: &ProbeSet) -> Result<f64> {
    let eval = module.evaluator()?;
    let mut total = 0.0;
    for (x, y) in probe.x.iter().zip(&probe.y) {
        let (_, g) = eval.forward_backward(&[*x], *y)?;
        total += g.raw_params[0];
    }
    Ok(total / probe.x.len() as f64)
}

/// Unbiased sample variance; NaN for fewer than two values.
pub fn sample_variance(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return f64::NAN;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64
}

/// Seed of initialization `init` in cell `(n_qubits, n_layers)`.
pub fn probe_init_seed(seed: u64, n_qubits: usize, n_layers: usize, init: usize) -> u64 {
    derive_seed(seed, &[PROBE_INIT_STREAM, n_qubits as u64, n_layers as u64, init as u64])
}

/// Slot-0 gradients of every initialization in one cell, in init order.
pub fn cell_gradients(n_qubits: usize, n_layers: usize, config: &BarrenConfig, probe: &ProbeSet) -> Result<Vec<f64>> {
    let circuit = CircuitConfig::new(n_qubits, n_layers, 1, config.encoding)?;
    (0..config.n_inits)
        .map(|i| {
            let module = sample_probe_init(&circuit, probe_init_seed(config.seed, n_qubits, n_layers, i))?;
            probe_gradient(&module, probe)
        })
        .collect()
}

pub fn gradient_variance(n_qubits: usize, n_layers: usize, config: &BarrenConfig) -> Result<VarianceRecord> {
    if config.n_inits < 2 {
        return Err(Error::config("barren_inits", "need at least 2 initializations"));
    }
    let probe = ProbeSet::new(config);
    let grads = cell_gradients(n_qubits, n_layers, config, &probe)?;
    Ok(VarianceRecord {
        n_qubits,
        n_layers,
        grad_variance: sample_variance(&grads),
        n_inits: config.n_inits,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct BarrenSweep {
    /// Qubit-major, layers inner, in configuration order.
    pub records: Vec<VarianceRecord>,
    /// One point per configured qubit count.
    pub references: Vec<ReferencePoint>,
}

pub fn run_barren_sweep(config: &BarrenConfig) -> Result<BarrenSweep> {
    config.validate()?;
    let mut records = Vec::with_capacity(config.qubit_values.len() * config.layer_values.len());
    for &n in &config.qubit_values {
        for &l in &config.layer_values {
            records.push(gradient_variance(n, l, config)?);
        }
    }
    let references = reference_curves(&records, &config.qubit_values, &config.layer_values);
    Ok(BarrenSweep {
        records,
        references,
    })
}

/// Anchors both guides at the smallest qubit count of the deepest layer setting.
pub fn reference_curves(records: &[VarianceRecord], qubit_values: &[usize], layer_values: &[usize]) -> Vec<ReferencePoint> {
    let n0 = *qubit_values.iter().min().expect("non-empty");
    let l_max = *layer_values.iter().max().expect("non-empty");
    let v0 = records
        .iter()
        .find(|r| r.n_qubits == n0 && r.n_layers == l_max)
        .map_or(0.0, |r| r.grad_variance);
    let c1 = v0 * n0 as f64;
    let c2 = v0 * (0.5 * n0 as f64).exp();
    qubit_values
        .iter()
        .map(|&n| ReferencePoint {
            n_qubits: n,
            poly_ref: c1 / n as f64,
            exp_ref: c2 * (-0.5 * n as f64).exp(),
        })
        .collect()
}
