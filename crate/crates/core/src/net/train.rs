use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Dense, Gradients, Mlp};
use crate::data::Dataset;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Loss {
    Mae,
    Mse,
}

impl Loss {
    #[inline]
    pub(crate) fn value(self, e: f64) -> f64 {
        match self {
            Loss::Mae => e.abs(),
            Loss::Mse => e * e,
        }
    }

    /// Subgradient of [`Loss::value`]; `sign(0) = 0` for mae.
    #[inline]
    pub(crate) fn derivative(self, e: f64) -> f64 {
        match self {
            Loss::Mae => {
                if e > 0.0 {
                    1.0
                } else if e < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
            Loss::Mse => 2.0 * e,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Init {
    /// Rows of uniform(−½, ½) weights rescaled to norm `0.7·H^{1/in}`,
    /// biases uniform in `±0.7·H^{1/in}`.
    NguyenWidrow,
    /// Weights uniform in `±√(6/in)`, zero biases.
    UniformHe,
}

impl Init {
    pub(crate) fn layer<R: Rng + ?Sized>(
        self,
        inputs: usize,
        outputs: usize,
        is_output: bool,
        rng: &mut R,
    ) -> Dense {
        let mut weights = vec![0.0; inputs * outputs];
        let mut bias = vec![0.0; outputs];
        match self {
            Init::NguyenWidrow if !is_output => {
                let beta = 0.7 * (outputs as f64).powf(1.0 / inputs as f64);
                for row in weights.chunks_mut(inputs) {
                    for w in row.iter_mut() {
                        *w = rng.random_range(-0.5..0.5);
                    }
                    let norm = row.iter().map(|w| w * w).sum::<f64>().sqrt().max(1e-12);
                    for w in row.iter_mut() {
                        *w *= beta / norm;
                    }
                }
                for b in &mut bias {
                    *b = rng.random_range(-beta..beta);
                }
            }
            Init::NguyenWidrow => {
                // output layer: plain small uniform weights
                let r = 1.0 / (inputs as f64).sqrt();
                for w in &mut weights {
                    *w = rng.random_range(-r..r);
                }
            }
            Init::UniformHe => {
                let r = (6.0 / inputs as f64).sqrt();
                for w in &mut weights {
                    *w = rng.random_range(-r..r);
                }
            }
        }
        Dense {
            inputs,
            outputs,
            weights,
            bias,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    /// Multiplies the learning rate after every epoch.
    pub lr_decay: f64,
    pub seed: u64,
    pub loss: Loss,
    pub init: Init,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 60,
            batch_size: 32,
            learning_rate: 0.01,
            momentum: 0.9,
            lr_decay: 0.97,
            seed: 0,
            loss: Loss::Mae,
            init: Init::NguyenWidrow,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("train.epochs must be ≥ 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("train.batch_size must be ≥ 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("train.learning_rate must be > 0".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config("train.momentum must be in [0, 1)".into()));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(Error::Config("train.lr_decay must be in (0, 1]".into()));
        }
        Ok(())
    }
}

/// Row-major input and target matrices for training.
#[derive(Debug, Clone, Default)]
pub struct Samples {
    pub input_width: usize,
    pub target_width: usize,
    pub inputs: Vec<f64>,
    pub targets: Vec<f64>,
}

impl Samples {
    pub fn len(&self) -> usize {
        if self.input_width == 0 {
            0
        } else {
            self.inputs.len() / self.input_width
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn push(&mut self, input: &[f64], target: &[f64]) {
        self.inputs.extend_from_slice(input);
        self.targets.extend_from_slice(target);
    }

    pub fn input(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.input_width..(i + 1) * self.input_width]
    }

    pub fn target(&self, i: usize) -> &[f64] {
        &self.targets[i * self.target_width..(i + 1) * self.target_width]
    }
}

/// Trains on the normalized features of `data`.
pub fn train(m: Mlp, data: &Dataset, cfg: &TrainConfig) -> Result<(Mlp, Vec<f64>)> {
    let samples = data.normalized_samples()?;
    train_samples(m, &samples, cfg)
}

/// Minibatch SGD with momentum. Returns the trained network and the mean
/// training loss of every epoch.
pub fn train_samples(mut m: Mlp, data: &Samples, cfg: &TrainConfig) -> Result<(Mlp, Vec<f64>)> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::Config("training set is empty".into()));
    }
    if data.input_width != m.input_width() {
        return Err(Error::dim("training inputs", m.input_width(), data.input_width));
    }
    if data.target_width != m.output_width() {
        return Err(Error::dim("training targets", m.output_width(), data.target_width));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut grads = Gradients::zeros_like(&m);
    let mut velocity = Gradients::zeros_like(&m);
    let mut trace = m.new_trace();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut lr = cfg.learning_rate;
    let mut batch: Vec<(&[f64], &[f64])> = Vec::with_capacity(cfg.batch_size);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| (data.input(i), data.target(i))));
            for g in grads.weights.iter_mut().chain(grads.bias.iter_mut()) {
                g.fill(0.0);
            }
            let loss = m.accumulate(&batch, cfg.loss, &mut grads, &mut trace)?;
            epoch_loss += loss * chunk.len() as f64;

            for (v, g) in velocity
                .weights
                .iter_mut()
                .chain(velocity.bias.iter_mut())
                .zip(grads.weights.iter().chain(grads.bias.iter()))
            {
                for (vi, gi) in v.iter_mut().zip(g) {
                    *vi = cfg.momentum * *vi - lr * gi;
                }
            }
            m.apply_update(&velocity);
        }
        let mean = epoch_loss / data.len() as f64;
        if !mean.is_finite() || !m.is_finite() {
            return Err(Error::Training { epoch, loss: mean });
        }
        log::info!("epoch {epoch}: loss {mean:.6}");
        history.push(mean);
        lr *= cfg.lr_decay;
    }
    Ok((m, history))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::Activation;

    fn constant_samples() -> Samples {
        let mut s = Samples {
            input_width: 3,
            target_width: 2,
            ..Default::default()
        };
        for _ in 0..64 {
            s.push(&[0.2, 0.4, 0.6], &[0.3, 0.7]);
        }
        s
    }

    #[test]
    fn memorizes_a_constant_record() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = Mlp::new(&[3, 16, 16, 2], Activation::Relu, Init::UniformHe, &mut rng).unwrap();
        let cfg = TrainConfig {
            epochs: 200,
            batch_size: 8,
            learning_rate: 0.02,
            momentum: 0.0,
            loss: Loss::Mse,
            lr_decay: 1.0,
            ..Default::default()
        };
        let (_, hist) = train_samples(m, &constant_samples(), &cfg).unwrap();
        assert!(hist[hist.len() - 1] < 1e-6, "final loss {}", hist[hist.len() - 1]);
        for w in hist[5..].windows(2) {
            assert!(w[1] <= w[0] * 1.0001 + 1e-12, "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn same_seed_gives_identical_parameters() {
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(4);
            let m = Mlp::new(&[3, 8, 2], Activation::Tanh, Init::NguyenWidrow, &mut rng).unwrap();
            let mut s = constant_samples();
            s.push(&[0.9, 0.1, 0.0], &[0.0, 1.0]);
            train_samples(m, &s, &TrainConfig { epochs: 3, seed: 77, ..Default::default() })
                .unwrap()
        };
        let (a, ha) = run();
        let (b, hb) = run();
        assert_eq!(a.params(), b.params());
        assert_eq!(ha, hb);
    }

    #[test]
    fn divergence_reports_epoch() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = Mlp::new(&[3, 8, 2], Activation::Relu, Init::UniformHe, &mut rng).unwrap();
        let mut s = constant_samples();
        s.targets.iter_mut().for_each(|t| *t = 1e200);
        let cfg = TrainConfig {
            epochs: 5,
            learning_rate: 1e3,
            loss: Loss::Mse,
            ..Default::default()
        };
        assert!(matches!(train_samples(m, &s, &cfg), Err(Error::Training { .. })));
    }

    #[test]
    fn nguyen_widrow_rows_have_scaled_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let layer = Init::NguyenWidrow.layer(5, 16, false, &mut rng);
        let beta = 0.7 * 16f64.powf(1.0 / 5.0);
        for i in 0..16 {
            let n = layer.row(i).iter().map(|w| w * w).sum::<f64>().sqrt();
            assert!((n - beta).abs() < 1e-12);
            assert!(layer.bias()[i].abs() <= beta);
        }
    }

    #[test]
    fn invalid_config_is_rejected() {
        let bad = TrainConfig { epochs: 0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = TrainConfig { learning_rate: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
    }
}
