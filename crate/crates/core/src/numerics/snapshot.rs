//! Weight checkpoints.
//!
//! A snapshot is a JSON document:
//!
//! ```text
//! {
//!   "format": "mcaccess-mlp/1",
//!   "input_dim": 256,
//!   "layers": [
//!     { "rows": 200, "cols": 256, "activation": "relu",
//!       "weights": [...rows*cols values, row-major, row = output unit...],
//!       "bias": [...rows values...] },
//!     ...
//!   ]
//! }
//! ```
//!
//! Floats are written in shortest round-trip form, so loading a snapshot
//! restores every parameter bit for bit.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Activation, Layer, Mlp, NnError, Result};

pub const SNAPSHOT_FORMAT: &str = "mcaccess-mlp/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSnapshot {
    pub rows: usize,
    pub cols: usize,
    pub activation: Activation,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpSnapshot {
    pub format: String,
    pub input_dim: usize,
    pub layers: Vec<LayerSnapshot>,
}

impl From<&Mlp> for MlpSnapshot {
    fn from(net: &Mlp) -> Self {
        let layers = net
            .layers
            .iter()
            .map(|l| {
                let mut weights = Vec::with_capacity(l.weights.len());
                for o in 0..l.out_dim {
                    weights.extend((0..l.in_dim).map(|i| l.weight(o, i)));
                }
                LayerSnapshot {
                    rows: l.out_dim,
                    cols: l.in_dim,
                    activation: l.activation,
                    weights,
                    bias: l.bias.clone(),
                }
            })
            .collect();
        MlpSnapshot {
            format: SNAPSHOT_FORMAT.to_string(),
            input_dim: net.input_dim,
            layers,
        }
    }
}

impl TryFrom<MlpSnapshot> for Mlp {
    type Error = NnError;

    fn try_from(snap: MlpSnapshot) -> Result<Mlp> {
        if snap.format != SNAPSHOT_FORMAT {
            return Err(NnError::Snapshot(format!("unknown format {:?}", snap.format)));
        }
        let mut dims = vec![snap.input_dim];
        for (idx, l) in snap.layers.iter().enumerate() {
            if l.cols != *dims.last().unwrap() {
                return Err(NnError::BadDims(format!(
                    "layer {idx} has {} inputs, previous layer produces {}",
                    l.cols,
                    dims.last().unwrap()
                )));
            }
            if l.weights.len() != l.rows * l.cols || l.bias.len() != l.rows {
                return Err(NnError::Snapshot(format!("layer {idx} array lengths do not match its shape")));
            }
            dims.push(l.rows);
        }
        let activations: Vec<Activation> = snap.layers.iter().map(|l| l.activation).collect();
        Mlp::validate_shape(&dims, &activations)?;
        let layers = snap
            .layers
            .into_iter()
            .map(|l| {
                let mut layer = Layer {
                    in_dim: l.cols,
                    out_dim: l.rows,
                    weights: vec![0.0; l.rows * l.cols],
                    bias: l.bias,
                    activation: l.activation,
                };
                for o in 0..l.rows {
                    for i in 0..l.cols {
                        layer.set_weight(o, i, l.weights[o * l.cols + i]);
                    }
                }
                layer
            })
            .collect();
        let net = Mlp {
            input_dim: snap.input_dim,
            layers,
        };
        if !net.all_finite() {
            return Err(NnError::NonFinite("snapshot weights"));
        }
        Ok(net)
    }
}

impl Mlp {
    pub fn to_json(&self) -> String {
        serde_json::to_string(&MlpSnapshot::from(self)).expect("snapshot serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let snap: MlpSnapshot = serde_json::from_str(text).map_err(|e| NnError::Snapshot(e.to_string()))?;
        Mlp::try_from(snap)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())
            .map_err(|e| NnError::Snapshot(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| NnError::Snapshot(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}
