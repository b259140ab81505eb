//! JSON schema shared by sensitivity models and feedback controllers.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Activation, Dense, Mlp};
use crate::data::{Normalization, RecordKind};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerFile {
    /// Row-major, one row per output unit.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub system: String,
    pub kind: RecordKind,
    pub h: f64,
    /// State dimension `n`; the network maps `2n + 1` inputs to `n` outputs.
    pub dim: usize,
}

fn identity() -> Activation {
    Activation::Identity
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkFile {
    pub layers: Vec<LayerFile>,
    /// Hidden-layer activation.
    pub activation: Activation,
    #[serde(default = "identity")]
    pub output_activation: Activation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalization: Option<Normalization>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<ModelMeta>,
}

impl NetworkFile {
    pub fn from_mlp(m: &Mlp) -> Self {
        let layers = m
            .layers()
            .iter()
            .map(|l| LayerFile {
                weights: (0..l.outputs()).map(|i| l.row(i).to_vec()).collect(),
                bias: l.bias().to_vec(),
            })
            .collect();
        Self {
            layers,
            activation: m.hidden_activation(),
            output_activation: m.output_activation(),
            normalization: None,
            meta: None,
        }
    }

    pub fn to_mlp(&self) -> Result<Mlp> {
        if self.layers.is_empty() {
            return Err(Error::Parse("`layers` is empty".into()));
        }
        let mut dense = Vec::with_capacity(self.layers.len());
        for (idx, layer) in self.layers.iter().enumerate() {
            let outputs = layer.weights.len();
            let inputs = layer.weights.first().map_or(0, Vec::len);
            if outputs == 0 || inputs == 0 {
                return Err(Error::Parse(format!("layer {idx}: empty weight matrix")));
            }
            if let Some(bad) = layer.weights.iter().position(|r| r.len() != inputs) {
                return Err(Error::Parse(format!(
                    "layer {idx}: weight row {bad} has {} entries, expected {inputs}",
                    layer.weights[bad].len()
                )));
            }
            let flat = layer.weights.iter().flatten().copied().collect();
            dense.push(Dense::new(inputs, outputs, flat, layer.bias.clone())?);
        }
        Mlp::from_layers(dense, self.activation, self.output_activation)
    }

    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("network file serializes")
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }
}
