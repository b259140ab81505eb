use std::path::Path;

use super::{Mlp, NetworkFile, ModelMeta};
use crate::data::{Normalization, RecordKind};
use crate::{Error, Result};

/// Anything that maps `(x0, v, t)` to a state-space displacement.
pub trait SensitivityModel: Sync {
    fn dim(&self) -> usize;
    fn eval(&self, x0: &[f64], v: &[f64], t: f64) -> Result<Vec<f64>>;
}

/// A trained network together with the feature scaling it was trained under.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityNet {
    mlp: Mlp,
    normalization: Normalization,
    meta: ModelMeta,
}

impl SensitivityNet {
    pub fn new(mlp: Mlp, normalization: Normalization, meta: ModelMeta) -> Result<Self> {
        let n = meta.dim;
        if mlp.input_width() != 2 * n + 1 {
            return Err(Error::dim("network input", 2 * n + 1, mlp.input_width()));
        }
        if mlp.output_width() != n {
            return Err(Error::dim("network output", n, mlp.output_width()));
        }
        if normalization.input_width() != 2 * n + 1 || normalization.output_width() != n {
            return Err(Error::dim("normalization", 2 * n + 1, normalization.input_width()));
        }
        Ok(Self { mlp, normalization, meta })
    }

    pub fn mlp(&self) -> &Mlp {
        &self.mlp
    }

    pub fn normalization(&self) -> &Normalization {
        &self.normalization
    }

    pub fn meta(&self) -> &ModelMeta {
        &self.meta
    }

    pub fn kind(&self) -> RecordKind {
        self.meta.kind
    }

    /// Prediction on raw features; `input` is `(x0, v, t)`.
    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.mlp.input_width() {
            return Err(Error::dim("model input", self.mlp.input_width(), input.len()));
        }
        let y = self.mlp.forward(&self.normalization.normalize_input(input))?;
        Ok(self.normalization.denormalize_output(&y))
    }

    pub fn to_file(&self) -> NetworkFile {
        let mut f = NetworkFile::from_mlp(&self.mlp);
        f.normalization = Some(self.normalization.clone());
        f.meta = Some(self.meta.clone());
        f
    }

    pub fn from_file(f: &NetworkFile) -> Result<Self> {
        let norm = f
            .normalization
            .clone()
            .ok_or_else(|| Error::Parse("model file has no `normalization`".into()))?;
        let meta = f
            .meta
            .clone()
            .ok_or_else(|| Error::Parse("model file has no `meta`".into()))?;
        Self::new(f.to_mlp()?, norm, meta)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_file().write(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_file(&NetworkFile::read(path)?)
    }
}

impl SensitivityModel for SensitivityNet {
    fn dim(&self) -> usize {
        self.meta.dim
    }

    fn eval(&self, x0: &[f64], v: &[f64], t: f64) -> Result<Vec<f64>> {
        let n = self.meta.dim;
        if x0.len() != n {
            return Err(Error::dim("x0", n, x0.len()));
        }
        if v.len() != n {
            return Err(Error::dim("v", n, v.len()));
        }
        let mut input = Vec::with_capacity(2 * n + 1);
        input.extend_from_slice(x0);
        input.extend_from_slice(v);
        input.push(t);
        self.predict(&input)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{Activation, Dense};

    fn tiny() -> SensitivityNet {
        // 3 -> 1 affine: y = v (the middle input)
        let layer = Dense::new(3, 1, vec![0.0, 1.0, 0.0], vec![0.0]).unwrap();
        let mlp = Mlp::from_layers(vec![layer], Activation::Relu, Activation::Identity).unwrap();
        let norm = Normalization {
            input_min: vec![0.0, -2.0, 0.0],
            input_max: vec![1.0, 2.0, 1.0],
            output_min: vec![-2.0],
            output_max: vec![2.0],
        };
        let meta = ModelMeta { system: "toy".into(), kind: RecordKind::Forward, h: 0.1, dim: 1 };
        SensitivityNet::new(mlp, norm, meta).unwrap()
    }

    #[test]
    fn normalization_round_trips_through_prediction() {
        let net = tiny();
        let y = net.eval(&[0.3], &[1.5], 0.2).unwrap();
        assert!((y[0] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn wrong_state_width_is_a_dimension_error() {
        let net = tiny();
        assert!(matches!(net.eval(&[0.3, 0.1], &[1.5], 0.2), Err(Error::Dimension { .. })));
        assert!(matches!(net.predict(&[0.0; 4]), Err(Error::Dimension { .. })));
    }

    #[test]
    fn file_round_trip() {
        let net = tiny();
        let back = SensitivityNet::from_file(&NetworkFile::parse(&net.to_file().to_json()).unwrap()).unwrap();
        assert_eq!(back, net);
    }

    #[test]
    fn file_without_normalization_is_rejected() {
        let mut f = tiny().to_file();
        f.normalization = None;
        assert!(matches!(SensitivityNet::from_file(&f), Err(Error::Parse(_))));
    }
}
