//! One trainable stage: squashed circuit angles, Pauli-Z readout and a linear
//! layer mapping the `n_qubits` expectations to a scalar.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::circuit::{build_variational_layers, encode_into, CircuitConfig};
use crate::error::{Error, Result};
use crate::simulator::{backward_sweep, GateOp, StateVector, ZSumObservable};

/// Circuit angles actually used by the gates: `π·tanh(raw)`, strictly inside `(−π, π)`.
pub fn effective_params(raw_params: &[f64]) -> Vec<f64> {
    raw_params.iter().map(|r| PI * r.tanh()).collect()
}

/// `d(π·tanh(r))/dr`.
fn squash_derivative(raw: f64) -> f64 {
    let t = raw.tanh();
    PI * (1.0 - t * t)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantumModule {
    pub config: CircuitConfig,
    /// Unconstrained circuit parameters, squashed by [`effective_params`] before use.
    pub raw_params: Vec<f64>,
    pub readout_weights: Vec<f64>,
    pub readout_bias: f64,
}

/// Gradient with the same shape as the trainable fields of a [`QuantumModule`].
#[derive(Clone, Debug, PartialEq)]
pub struct ModuleGradient {
    pub raw_params: Vec<f64>,
    pub readout_weights: Vec<f64>,
    pub readout_bias: f64,
}

impl ModuleGradient {
    pub fn zeros_like(module: &QuantumModule) -> Self {
        Self {
            raw_params: vec![0.0; module.raw_params.len()],
            readout_weights: vec![0.0; module.readout_weights.len()],
            readout_bias: 0.0,
        }
    }

    /// Flattened as `raw_params ++ readout_weights ++ [readout_bias]`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(self.raw_params.len() + self.readout_weights.len() + 1);
        flat.extend_from_slice(&self.raw_params);
        flat.extend_from_slice(&self.readout_weights);
        flat.push(self.readout_bias);
        flat
    }

    pub(crate) fn add_assign(&mut self, other: &ModuleGradient) {
        for (a, b) in self.raw_params.iter_mut().zip(&other.raw_params) {
            *a += b;
        }
        for (a, b) in self.readout_weights.iter_mut().zip(&other.readout_weights) {
            *a += b;
        }
        self.readout_bias += other.readout_bias;
    }

    pub(crate) fn scale(&mut self, factor: f64) {
        self.raw_params.iter_mut().for_each(|g| *g *= factor);
        self.readout_weights.iter_mut().for_each(|g| *g *= factor);
        self.readout_bias *= factor;
    }
}

const CHECKPOINT_FORMAT: &str = "qresid-module";
const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Checkpoint {
    format: String,
    version: u32,
    #[serde(flatten)]
    module: QuantumModule,
}

impl QuantumModule {
    pub fn new(
        config: CircuitConfig,
        raw_params: Vec<f64>,
        readout_weights: Vec<f64>,
        readout_bias: f64,
    ) -> Result<Self> {
        let module = Self {
            config,
            raw_params,
            readout_weights,
            readout_bias,
        };
        module.validate()?;
        Ok(module)
    }

    /// All parameters zero: the module predicts 0 everywhere.
    pub fn zeros(config: CircuitConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            raw_params: vec![0.0; config.layout().total_count()],
            readout_weights: vec![0.0; config.n_qubits],
            readout_bias: 0.0,
            config,
        })
    }

    /// Training initialization: raw circuit parameters `N(0, 1)`, readout
    /// weights `U[−0.1, 0.1]`, bias 0.
    pub fn random<R: Rng + ?Sized>(config: CircuitConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let raw_params = (0..config.layout().total_count())
            .map(|_| StandardNormal.sample(rng))
            .collect();
        let readout = Uniform::new_inclusive(-0.1, 0.1).expect("valid range");
        let readout_weights = (0..config.n_qubits).map(|_| readout.sample(rng)).collect();
        Ok(Self {
            config,
            raw_params,
            readout_weights,
            readout_bias: 0.0,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        let expected = self.config.layout().total_count();
        if self.raw_params.len() != expected {
            return Err(Error::Structural(format!(
                "{} raw parameters, layout needs {expected}",
                self.raw_params.len()
            )));
        }
        if self.readout_weights.len() != self.config.n_qubits {
            return Err(Error::Structural(format!(
                "{} readout weights for {} qubits",
                self.readout_weights.len(),
                self.config.n_qubits
            )));
        }
        let finite = self
            .raw_params
            .iter()
            .chain(&self.readout_weights)
            .chain(std::iter::once(&self.readout_bias))
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Input("module parameters must be finite".into()));
        }
        Ok(())
    }

    pub fn n_trainable(&self) -> usize {
        self.raw_params.len() + self.readout_weights.len() + 1
    }

    /// Flattened as `raw_params ++ readout_weights ++ [readout_bias]`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut flat = Vec::with_capacity(self.n_trainable());
        flat.extend_from_slice(&self.raw_params);
        flat.extend_from_slice(&self.readout_weights);
        flat.push(self.readout_bias);
        flat
    }

    pub fn set_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.n_trainable() {
            return Err(Error::Structural(format!(
                "{} values for {} trainable parameters",
                flat.len(),
                self.n_trainable()
            )));
        }
        let (raw, rest) = flat.split_at(self.raw_params.len());
        let (weights, bias) = rest.split_at(self.readout_weights.len());
        self.raw_params.copy_from_slice(raw);
        self.readout_weights.copy_from_slice(weights);
        self.readout_bias = bias[0];
        Ok(())
    }

    /// Precomputes the variational gates so repeated evaluations only rebuild
    /// the encoding block.
    pub fn evaluator(&self) -> Result<Evaluator<'_>> {
        self.validate()?;
        let variational = build_variational_layers(&effective_params(&self.raw_params), &self.config)?;
        Ok(Evaluator {
            module: self,
            variational,
        })
    }

    /// `bias + Σ_q w_q ⟨Z_q⟩`.
    pub fn forward(&self, features: &[f64]) -> Result<f64> {
        self.evaluator()?.predict(features)
    }

    /// Squared error and its gradient with respect to every trainable field.
    pub fn forward_backward(&self, features: &[f64], target: f64) -> Result<(f64, ModuleGradient)> {
        self.evaluator()?.forward_backward(features, target)
    }

    pub fn to_checkpoint_string(&self) -> String {
        let checkpoint = Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            module: self.clone(),
        };
        let mut s = serde_json::to_string_pretty(&checkpoint).expect("module serializes");
        s.push('\n');
        s
    }

    pub fn from_checkpoint_str(s: &str) -> Result<Self> {
        let checkpoint: Checkpoint = serde_json::from_str(s).map_err(|e| Error::parse("checkpoint", e))?;
        if checkpoint.format != CHECKPOINT_FORMAT || checkpoint.version != CHECKPOINT_VERSION {
            return Err(Error::parse(
                "checkpoint",
                format!("unsupported format {} v{}", checkpoint.format, checkpoint.version),
            ));
        }
        checkpoint.module.validate()?;
        Ok(checkpoint.module)
    }

    pub fn save_checkpoint(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_checkpoint_string()).map_err(|e| Error::io(path, e))
    }

    pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_checkpoint_str(&s)
    }
}

/// A module with its variational gates compiled for a fixed parameter vector.
pub struct Evaluator<'a> {
    module: &'a QuantumModule,
    variational: Vec<GateOp>,
}

impl Evaluator<'_> {
    fn circuit(&self, features: &[f64]) -> Result<Vec<GateOp>> {
        let config = &self.module.config;
        let mut gates = Vec::with_capacity(config.encoding_gate_count() + self.variational.len());
        encode_into(&mut gates, features, config)?;
        gates.extend_from_slice(&self.variational);
        Ok(gates)
    }

    fn run(&self, gates: &[GateOp]) -> Result<StateVector> {
        let mut psi = StateVector::zero(self.module.config.n_qubits)?;
        psi.apply_all_unchecked(gates);
        Ok(psi)
    }

    fn readout(&self, z: &[f64]) -> f64 {
        self.module.readout_bias
            + self
                .module
                .readout_weights
                .iter()
                .zip(z)
                .map(|(w, e)| w * e)
                .sum::<f64>()
    }

    /// Per-qubit `⟨Z_q⟩` for one input.
    pub fn expectations(&self, features: &[f64]) -> Result<Vec<f64>> {
        Ok(self.run(&self.circuit(features)?)?.expectations_z())
    }

    pub fn predict(&self, features: &[f64]) -> Result<f64> {
        Ok(self.readout(&self.expectations(features)?))
    }

    pub fn forward_backward(&self, features: &[f64], target: f64) -> Result<(f64, ModuleGradient)> {
        let module = self.module;
        let gates = self.circuit(features)?;
        let psi = self.run(&gates)?;
        let z = psi.expectations_z();
        let prediction = self.readout(&z);
        let residual = prediction - target;
        let factor = 2.0 * residual;

        let mut grad = ModuleGradient::zeros_like(module);
        grad.readout_bias = factor;
        for (g, e) in grad.readout_weights.iter_mut().zip(&z) {
            *g = factor * e;
        }
        if factor != 0.0 {
            let observable = ZSumObservable::new(module.readout_weights.iter().map(|w| factor * w).collect())?;
            let adjoint = backward_sweep(psi, &gates, &observable)?;
            for ((g, a), raw) in grad
                .raw_params
                .iter_mut()
                .zip(&adjoint.gradient)
                .zip(&module.raw_params)
            {
                *g = a * squash_derivative(*raw);
            }
        }
        Ok((residual * residual, grad))
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::circuit::EncodingMode;

    fn config(n: usize, l: usize, d: usize) -> CircuitConfig {
        CircuitConfig::new(n, l, d, EncodingMode::Full).unwrap()
    }

    #[test]
    fn squash_values() {
        assert_eq!(effective_params(&[0.0]), vec![0.0]);
        let big = effective_params(&[1e3, -1e3]);
        assert!(big[0] <= PI && big[1] >= -PI);
        let tanh1 = 0.761_594_155_955_764_9_f64;
        assert!((effective_params(&[1.0])[0] - PI * tanh1).abs() < 1e-12);
    }

    #[test]
    fn zero_module_returns_bias() {
        let mut m = QuantumModule::zeros(config(3, 2, 1)).unwrap();
        m.readout_bias = 0.7;
        for x in [-1.0, 0.0, 0.4, 2.0] {
            assert_eq!(m.forward(&[x]).unwrap(), 0.7);
        }
    }

    #[test]
    fn single_qubit_analytic() {
        let cfg = CircuitConfig::new(1, 1, 1, EncodingMode::RyOnly).unwrap();
        let mut m = QuantumModule::zeros(cfg).unwrap();
        m.readout_weights = vec![1.0];
        assert!(m.forward(&[0.5]).unwrap().abs() < 1e-15);
        assert!((m.forward(&[0.2]).unwrap() - (PI * 0.2).cos()).abs() < 1e-14);
    }

    #[test]
    fn prediction_bounded_by_readout() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut m = QuantumModule::random(config(3, 2, 2), &mut rng).unwrap();
        m.readout_weights = vec![0.5, -1.5, 2.0];
        m.readout_bias = -0.25;
        let bound = 0.25 + 4.0;
        for i in 0..20 {
            let x = -2.0 + 0.2 * i as f64;
            assert!(m.forward(&[x, 1.0 - x]).unwrap().abs() <= bound + 1e-12);
        }
    }

    #[test]
    fn exact_fit_has_zero_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = QuantumModule::random(config(2, 1, 1), &mut rng).unwrap();
        let y = m.forward(&[0.3]).unwrap();
        let (loss, g) = m.forward_backward(&[0.3], y).unwrap();
        assert_eq!(loss, 0.0);
        assert!(g.to_flat().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn zero_readout_blocks_circuit_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut m = QuantumModule::random(config(3, 1, 1), &mut rng).unwrap();
        m.readout_weights = vec![0.0; 3];
        let (_, g) = m.forward_backward(&[0.8], 1.0).unwrap();
        assert!(g.raw_params.iter().all(|v| *v == 0.0));
        assert!(g.readout_weights.iter().any(|v| *v != 0.0));
        assert_eq!(g.readout_bias, -2.0);
    }

    #[test]
    fn flat_roundtrip_and_validation() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = QuantumModule::random(config(2, 1, 2), &mut rng).unwrap();
        let mut other = QuantumModule::zeros(m.config).unwrap();
        other.set_flat(&m.to_flat()).unwrap();
        assert_eq!(other, m);
        assert!(other.set_flat(&[0.0; 3]).is_err());
        assert!(QuantumModule::new(m.config, vec![0.0; 5], vec![0.0; 2], 0.0).is_err());
        assert!(QuantumModule::new(m.config, vec![f64::NAN; 12], vec![0.0; 2], 0.0).is_err());
    }

    #[test]
    fn random_init_ranges() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let m = QuantumModule::random(config(5, 2, 1), &mut rng).unwrap();
        assert!(m.readout_weights.iter().all(|w| w.abs() <= 0.1));
        assert_eq!(m.readout_bias, 0.0);
        let mean = m.raw_params.iter().sum::<f64>() / m.raw_params.len() as f64;
        assert!(mean.abs() < 0.2, "raw mean {mean}");
    }

    #[test]
    fn checkpoint_text_roundtrip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let m = QuantumModule::random(config(3, 2, 2), &mut rng).unwrap();
        let text = m.to_checkpoint_string();
        assert!(text.contains("\"format\": \"qresid-module\""));
        let back = QuantumModule::from_checkpoint_str(&text).unwrap();
        assert_eq!(back.to_flat(), m.to_flat());
        assert_eq!(back.config, m.config);
        assert!(QuantumModule::from_checkpoint_str("{}").is_err());
    }
}
