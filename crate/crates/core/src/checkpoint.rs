//! Checkpoint files: JSON documents carrying the architecture metadata,
//! per-layer wiring, full-precision gate logits, and (for discretized
//! models) the assigned gate indices. Floats round-trip via shortest
//! decimal representation, so save -> load -> save is byte-identical.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cells::{GateKind, GATE_COUNT};
use crate::model::{HardLayer, HardNetwork, Layer, ModelError, Network};

pub const CHECKPOINT_FORMAT: &str = "dlgn-checkpoint-v1";

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("cannot access checkpoint {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed checkpoint: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported checkpoint format `{0}`")]
    BadFormat(String),
    #[error("checkpoint is inconsistent: {0}")]
    Inconsistent(String),
    #[error("checkpoint carries no gate assignments; discretize it first")]
    NotDiscretized,
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub wiring_seed: u64,
    pub input_width: usize,
    pub layer_widths: Vec<usize>,
    pub num_classes: usize,
    pub tau: f64,
    pub delta: f64,
    pub library: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WiringLayer {
    pub in_a: Vec<u32>,
    pub in_b: Vec<u32>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub meta: CheckpointMeta,
    pub wiring: Vec<WiringLayer>,
    /// Per layer, per neuron: 16 logits.
    pub logits: Vec<Vec<Vec<f64>>>,
    /// Per layer, per neuron: argmax gate index. Present once discretized.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gates: Option<Vec<Vec<u8>>>,
}

impl Checkpoint {
    pub fn from_network(net: &Network, delta: f64, library: &str) -> Checkpoint {
        let wiring = net
            .layers()
            .iter()
            .map(|l| {
                let (a, b) = l.wiring();
                WiringLayer {
                    in_a: a.to_vec(),
                    in_b: b.to_vec(),
                }
            })
            .collect();
        let logits = net
            .layers()
            .iter()
            .map(|l| (0..l.width()).map(|n| l.neuron_logits(n).to_vec()).collect())
            .collect();
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            meta: CheckpointMeta {
                wiring_seed: net.wiring_seed(),
                input_width: net.input_width(),
                layer_widths: net.layer_widths(),
                num_classes: net.num_classes(),
                tau: net.tau(),
                delta,
                library: library.to_string(),
            },
            wiring,
            logits,
            gates: None,
        }
    }

    /// Attaches argmax gate assignments, marking the checkpoint as
    /// discretized.
    pub fn with_gates(mut self, hard: &HardNetwork) -> Checkpoint {
        self.gates = Some(
            hard.layers()
                .iter()
                .map(|l| l.gates.iter().map(|g| g.index() as u8).collect())
                .collect(),
        );
        self
    }

    pub fn is_discretized(&self) -> bool {
        self.gates.is_some()
    }

    pub fn to_network(&self) -> Result<Network, CheckpointError> {
        self.check_shape()?;
        let layers = self
            .wiring
            .iter()
            .zip(&self.logits)
            .map(|(w, z)| {
                let mut logits = Vec::with_capacity(z.len() * GATE_COUNT);
                for neuron in z {
                    logits.extend_from_slice(neuron);
                }
                Layer {
                    in_a: w.in_a.clone(),
                    in_b: w.in_b.clone(),
                    logits,
                }
            })
            .collect();
        Ok(Network::from_parts(
            self.meta.input_width,
            layers,
            self.meta.num_classes,
            self.meta.tau,
            self.meta.wiring_seed,
        )?)
    }

    pub fn to_hard(&self) -> Result<HardNetwork, CheckpointError> {
        self.check_shape()?;
        let gates = self.gates.as_ref().ok_or(CheckpointError::NotDiscretized)?;
        if gates.len() != self.wiring.len()
            || gates.iter().zip(&self.wiring).any(|(g, w)| g.len() != w.in_a.len())
        {
            return Err(CheckpointError::Inconsistent(
                "gate arrays do not match the wiring shape".into(),
            ));
        }
        let layers = self
            .wiring
            .iter()
            .zip(gates)
            .map(|(w, g)| {
                let gates = g
                    .iter()
                    .map(|&i| {
                        GateKind::from_index(i as usize).ok_or_else(|| {
                            CheckpointError::Inconsistent(format!("gate index {i} out of range"))
                        })
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(HardLayer {
                    in_a: w.in_a.clone(),
                    in_b: w.in_b.clone(),
                    gates,
                })
            })
            .collect::<Result<Vec<_>, CheckpointError>>()?;
        Ok(HardNetwork::new(
            self.meta.input_width,
            layers,
            self.meta.num_classes,
        )?)
    }

    fn check_shape(&self) -> Result<(), CheckpointError> {
        if self.format != CHECKPOINT_FORMAT {
            return Err(CheckpointError::BadFormat(self.format.clone()));
        }
        if self.wiring.len() != self.meta.layer_widths.len()
            || self.logits.len() != self.meta.layer_widths.len()
        {
            return Err(CheckpointError::Inconsistent(
                "layer count does not match layer_widths".into(),
            ));
        }
        for (i, ((w, z), &width)) in self
            .wiring
            .iter()
            .zip(&self.logits)
            .zip(&self.meta.layer_widths)
            .enumerate()
        {
            if w.in_a.len() != width || w.in_b.len() != width || z.len() != width {
                return Err(CheckpointError::Inconsistent(format!(
                    "layer {i} arrays do not match width {width}"
                )));
            }
            if z.iter().any(|n| n.len() != GATE_COUNT) {
                return Err(CheckpointError::Inconsistent(format!(
                    "layer {i} has a logit vector not of length {GATE_COUNT}"
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("checkpoint serializes");
        s.push('\n');
        s
    }

    pub fn save(&self, path: &Path) -> Result<(), CheckpointError> {
        fs::write(path, self.to_json()).map_err(|source| CheckpointError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Checkpoint, CheckpointError> {
        let text = fs::read_to_string(path).map_err(|source| CheckpointError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let ckpt: Checkpoint = serde_json::from_str(&text)?;
        ckpt.check_shape()?;
        Ok(ckpt)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_preserves_network_and_bytes() {
        let net = Network::new(6, &[8, 4], 2, None, 42).unwrap();
        let ckpt = Checkpoint::from_network(&net, 0.01, "sky130_cadence");
        let json = ckpt.to_json();
        let back: Checkpoint = serde_json::from_str(&json).unwrap();
        assert_eq!(back.to_json(), json, "reserialization is byte-identical");

        let net2 = back.to_network().unwrap();
        assert_eq!(net2.layer_widths(), net.layer_widths());
        assert_eq!(net2.tau(), net.tau());
        for (l1, l2) in net.layers().iter().zip(net2.layers()) {
            assert_eq!(l1.wiring(), l2.wiring());
            assert_eq!(l1.logits(), l2.logits());
        }
    }

    #[test]
    fn hard_requires_gates() {
        let net = Network::new(4, &[4], 2, None, 1).unwrap();
        let ckpt = Checkpoint::from_network(&net, 0.0, "lib");
        assert!(matches!(ckpt.to_hard(), Err(CheckpointError::NotDiscretized)));

        let hard = net.discretize();
        let ckpt = ckpt.with_gates(&hard);
        assert!(ckpt.is_discretized());
        assert_eq!(ckpt.to_hard().unwrap(), hard);
    }

    #[test]
    fn gate_histogram_recomputable_from_logits() {
        let net = Network::new(10, &[16], 2, None, 7).unwrap();
        let hard = net.discretize();
        let ckpt = Checkpoint::from_network(&net, 0.0, "lib").with_gates(&hard);

        // Recompute argmax from the stored logit arrays and compare.
        let mut hist = [0usize; GATE_COUNT];
        for layer in &ckpt.logits {
            for z in layer {
                let mut best = 0;
                for i in 1..GATE_COUNT {
                    if z[i] > z[best] {
                        best = i;
                    }
                }
                hist[best] += 1;
            }
        }
        assert_eq!(hist, hard.gate_histogram());
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let net = Network::new(4, &[4], 2, None, 1).unwrap();
        let mut ckpt = Checkpoint::from_network(&net, 0.0, "lib");
        ckpt.logits[0].pop();
        assert!(matches!(
            ckpt.to_network(),
            Err(CheckpointError::Inconsistent(_))
        ));
    }
}
