//! Gate sequences for the data-encoding block and the variational layers.
//!
//! Trainable slots are laid out layer by layer. Within a layer the first
//! `3·n` slots are the single-qubit rotations, qubit-major in `(RY, RZ, RX)`
//! order; the remaining `3·n·(n−1)` slots are the controlled rotations over
//! every ordered `(control, target)` pair with `control ≠ target`, pairs in
//! lexicographic order and `(CRY, CRZ, CRX)` within a pair.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulator::{GateKind, GateOp, MAX_QUBITS};

/// Which rotations the encoding block applies per qubit.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncodingMode {
    /// `RY(πx)`, `RZ(πx³)`, `RX(π√|1−x²|)`.
    #[default]
    Full,
    /// `RY(πx)` only.
    RyOnly,
}

impl fmt::Display for EncodingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EncodingMode::Full => "full",
            EncodingMode::RyOnly => "ry_only",
        })
    }
}

impl FromStr for EncodingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(EncodingMode::Full),
            "ry_only" => Ok(EncodingMode::RyOnly),
            other => Err(Error::config(
                "encoding",
                format!("`{other}` is not one of full, ry_only"),
            )),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CircuitConfig {
    pub n_qubits: usize,
    pub n_layers: usize,
    pub input_dim: usize,
    pub encoding: EncodingMode,
}

impl CircuitConfig {
    pub fn new(n_qubits: usize, n_layers: usize, input_dim: usize, encoding: EncodingMode) -> Result<Self> {
        let config = Self {
            n_qubits,
            n_layers,
            input_dim,
            encoding,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_qubits == 0 || self.n_qubits > MAX_QUBITS {
            return Err(Error::config(
                "n_qubits",
                format!("{} is outside 1..={MAX_QUBITS}", self.n_qubits),
            ));
        }
        if self.n_layers == 0 {
            return Err(Error::config("n_layers", "must be at least 1"));
        }
        if !(1..=2).contains(&self.input_dim) {
            return Err(Error::config(
                "input_dim",
                format!("{} is not 1 or 2", self.input_dim),
            ));
        }
        Ok(())
    }

    pub fn with_input_dim(self, input_dim: usize) -> Self {
        Self { input_dim, ..self }
    }

    pub fn layout(&self) -> ParameterLayout {
        ParameterLayout {
            n_qubits: self.n_qubits,
            n_layers: self.n_layers,
        }
    }

    /// Number of gates emitted by [`build_encoding`].
    pub fn encoding_gate_count(&self) -> usize {
        match self.encoding {
            EncodingMode::Full => 3 * self.n_qubits,
            EncodingMode::RyOnly => self.n_qubits,
        }
    }
}

/// Slot arithmetic for the variational parameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ParameterLayout {
    pub n_qubits: usize,
    pub n_layers: usize,
}

impl ParameterLayout {
    pub fn single_qubit_per_layer(&self) -> usize {
        3 * self.n_qubits
    }

    pub fn entangling_per_layer(&self) -> usize {
        3 * self.n_qubits * (self.n_qubits - 1)
    }

    pub fn per_layer(&self) -> usize {
        self.single_qubit_per_layer() + self.entangling_per_layer()
    }

    pub fn total_count(&self) -> usize {
        self.n_layers * self.per_layer()
    }

    /// Slot of the single-qubit rotation `axis_index` (0 = RY, 1 = RZ, 2 = RX).
    pub fn single_qubit_slot(&self, layer: usize, qubit: usize, axis_index: usize) -> usize {
        layer * self.per_layer() + 3 * qubit + axis_index
    }

    /// Slot of the controlled rotation `axis_index` (0 = CRY, 1 = CRZ, 2 = CRX)
    /// on the ordered pair `(control, target)`.
    pub fn entangling_slot(&self, layer: usize, control: usize, target: usize, axis_index: usize) -> usize {
        assert_ne!(control, target);
        let pair = control * (self.n_qubits - 1) + if target > control { target - 1 } else { target };
        layer * self.per_layer() + self.single_qubit_per_layer() + 3 * pair + axis_index
    }
}

const SINGLE_KINDS: [GateKind; 3] = [GateKind::RY, GateKind::RZ, GateKind::RX];
const CONTROLLED_KINDS: [GateKind; 3] = [GateKind::CRY, GateKind::CRZ, GateKind::CRX];

/// Encoding block. Qubit `q` encodes `features[q % input_dim]`.
pub fn build_encoding(features: &[f64], config: &CircuitConfig) -> Result<Vec<GateOp>> {
    let mut gates = Vec::with_capacity(config.encoding_gate_count());
    encode_into(&mut gates, features, config)?;
    Ok(gates)
}

pub(crate) fn encode_into(gates: &mut Vec<GateOp>, features: &[f64], config: &CircuitConfig) -> Result<()> {
    if features.len() != config.input_dim {
        return Err(Error::Input(format!(
            "expected {} features, got {}",
            config.input_dim,
            features.len()
        )));
    }
    if let Some(i) = features.iter().position(|x| !x.is_finite()) {
        return Err(Error::Input(format!("feature {i} is not finite")));
    }
    for q in 0..config.n_qubits {
        let x = features[q % config.input_dim];
        gates.push(GateOp::rotation(GateKind::RY, q, PI * x));
        if config.encoding == EncodingMode::Full {
            gates.push(GateOp::rotation(GateKind::RZ, q, PI * x * x * x));
            gates.push(GateOp::rotation(GateKind::RX, q, PI * (1.0 - x * x).abs().sqrt()));
        }
    }
    Ok(())
}

/// Variational layers for already-squashed angles.
pub fn build_variational_layers(effective_params: &[f64], config: &CircuitConfig) -> Result<Vec<GateOp>> {
    let layout = config.layout();
    if effective_params.len() != layout.total_count() {
        return Err(Error::Structural(format!(
            "{} parameters supplied, layout needs {}",
            effective_params.len(),
            layout.total_count()
        )));
    }
    let n = config.n_qubits;
    let mut gates = Vec::with_capacity(layout.total_count());
    let mut slot = 0;
    for _ in 0..config.n_layers {
        for q in 0..n {
            for kind in SINGLE_KINDS {
                gates.push(GateOp::rotation(kind, q, effective_params[slot]).with_slot(slot));
                slot += 1;
            }
        }
        for control in 0..n {
            for target in (0..n).filter(|t| *t != control) {
                for kind in CONTROLLED_KINDS {
                    gates.push(
                        GateOp::controlled(kind, control, target, effective_params[slot]).with_slot(slot),
                    );
                    slot += 1;
                }
            }
        }
    }
    Ok(gates)
}

/// Encoding followed by the variational layers.
pub fn build_full_circuit(
    features: &[f64],
    effective_params: &[f64],
    config: &CircuitConfig,
) -> Result<Vec<GateOp>> {
    let mut gates = build_encoding(features, config)?;
    gates.extend(build_variational_layers(effective_params, config)?);
    Ok(gates)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(n: usize, l: usize, d: usize, e: EncodingMode) -> CircuitConfig {
        CircuitConfig::new(n, l, d, e).unwrap()
    }

    #[test]
    fn encoding_at_zero() {
        let gates = build_encoding(&[0.0], &cfg(2, 1, 1, EncodingMode::Full)).unwrap();
        let got: Vec<_> = gates.iter().map(|g| (g.kind, g.target, g.angle)).collect();
        assert_eq!(
            got,
            vec![
                (GateKind::RY, 0, 0.0),
                (GateKind::RZ, 0, 0.0),
                (GateKind::RX, 0, PI),
                (GateKind::RY, 1, 0.0),
                (GateKind::RZ, 1, 0.0),
                (GateKind::RX, 1, PI),
            ]
        );
        assert!(gates.iter().all(|g| g.trainable_slot.is_none()));
    }

    #[test]
    fn cyclic_feature_assignment() {
        let (a, b) = (0.25, -0.6);
        let gates = build_encoding(&[a, b], &cfg(3, 1, 2, EncodingMode::RyOnly)).unwrap();
        let angles: Vec<_> = gates.iter().map(|g| g.angle).collect();
        assert_eq!(angles, vec![PI * a, PI * b, PI * a]);
    }

    #[test]
    fn rx_angle_vanishes_at_one_and_is_total() {
        let gates = build_encoding(&[1.0], &cfg(1, 1, 1, EncodingMode::Full)).unwrap();
        assert_eq!(gates[2].angle, 0.0);
        let gates = build_encoding(&[2.5], &cfg(1, 1, 1, EncodingMode::Full)).unwrap();
        assert!((gates[2].angle - PI * (5.25f64).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn encoding_rejects_bad_features() {
        let c = cfg(2, 1, 1, EncodingMode::Full);
        assert!(matches!(build_encoding(&[f64::NAN], &c), Err(Error::Input(_))));
        assert!(matches!(build_encoding(&[0.1, 0.2], &c), Err(Error::Input(_))));
    }

    #[test]
    fn parameter_counts() {
        assert_eq!(cfg(2, 1, 1, EncodingMode::Full).layout().total_count(), 12);
        assert_eq!(cfg(10, 2, 1, EncodingMode::Full).layout().total_count(), 600);
        assert_eq!(cfg(1, 3, 1, EncodingMode::Full).layout().total_count(), 9);
    }

    #[test]
    fn full_circuit_gate_counts() {
        let c = cfg(2, 1, 1, EncodingMode::Full);
        assert_eq!(build_full_circuit(&[0.3], &[0.0; 12], &c).unwrap().len(), 18);
        let c = cfg(2, 1, 1, EncodingMode::RyOnly);
        assert_eq!(build_full_circuit(&[0.3], &[0.0; 12], &c).unwrap().len(), 14);
    }

    #[test]
    fn length_mismatch_is_structural() {
        let c = cfg(2, 1, 1, EncodingMode::Full);
        assert!(matches!(
            build_variational_layers(&[0.0; 11], &c),
            Err(Error::Structural(_))
        ));
    }

    #[test]
    fn config_bounds() {
        assert!(CircuitConfig::new(0, 1, 1, EncodingMode::Full).is_err());
        assert!(CircuitConfig::new(13, 1, 1, EncodingMode::Full).is_err());
        assert!(CircuitConfig::new(2, 0, 1, EncodingMode::Full).is_err());
        assert!(CircuitConfig::new(2, 1, 3, EncodingMode::Full).is_err());
        assert_eq!("ry_only".parse::<EncodingMode>().unwrap(), EncodingMode::RyOnly);
        assert!("rx".parse::<EncodingMode>().is_err());
    }

    #[test]
    fn layout_slots_match_emitted_gates() {
        let c = cfg(4, 2, 1, EncodingMode::Full);
        let layout = c.layout();
        let params: Vec<f64> = (0..layout.total_count()).map(|i| i as f64).collect();
        let gates = build_variational_layers(&params, &c).unwrap();
        for layer in 0..2 {
            for q in 0..4 {
                for a in 0..3 {
                    let g = gates[layout.single_qubit_slot(layer, q, a)];
                    assert_eq!(g.kind, SINGLE_KINDS[a]);
                    assert_eq!(g.target, q);
                }
            }
            for ctl in 0..4 {
                for tgt in (0..4).filter(|t| *t != ctl) {
                    for (a, kind) in CONTROLLED_KINDS.iter().enumerate() {
                        let slot = layout.entangling_slot(layer, ctl, tgt, a);
                        let g = gates[slot];
                        assert_eq!((g.kind, g.control, g.target), (*kind, Some(ctl), tgt));
                        assert_eq!(g.trainable_slot, Some(slot));
                    }
                }
            }
        }
    }
}
