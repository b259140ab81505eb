use std::path::{Path, PathBuf};

use crate::net::{Activation, Mlp, NetworkFile};
use crate::Result;

/// A feedforward state-feedback law `u = g(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerSpec {
    net: Mlp,
    source: Option<PathBuf>,
}

impl ControllerSpec {
    pub fn new(net: Mlp) -> Self {
        Self { net, source: None }
    }

    /// Parses the JSON layer format (`layers`, `activation`, optional
    /// `output_activation`).
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(Self::new(NetworkFile::parse(text)?.to_mlp()?))
    }

    pub fn input_width(&self) -> usize {
        self.net.input_width()
    }

    pub fn output_width(&self) -> usize {
        self.net.output_width()
    }

    pub fn layer_count(&self) -> usize {
        self.net.layers().len()
    }

    pub fn activation(&self) -> Activation {
        self.net.hidden_activation()
    }

    pub fn network(&self) -> &Mlp {
        &self.net
    }

    pub fn source(&self) -> Option<&Path> {
        self.source.as_deref()
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.net.forward(x)
    }
}

pub fn load_controller(path: impl AsRef<Path>) -> Result<ControllerSpec> {
    let path = path.as_ref();
    let net = NetworkFile::read(path)?.to_mlp()?;
    Ok(ControllerSpec {
        net,
        source: Some(path.to_path_buf()),
    })
}
