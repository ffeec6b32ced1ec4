use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{accumulate_gradients, sample_mask, Gradients, NetError, NetworkParams, NetworkSpec};
use crate::rng;
use crate::voxelgrid::VoxelGrid;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub dropout_rate: f64,
    pub adam: AdamConfig,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 32,
            epochs: 181,
            dropout_rate: 0.2,
            adam: AdamConfig::default(),
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NetError> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(NetError::InvalidConfig("learning rate must be > 0".into()));
        }
        if self.batch_size == 0 {
            return Err(NetError::InvalidConfig("batch size must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(NetError::InvalidConfig("dropout rate must be in [0, 1)".into()));
        }
        let a = &self.adam;
        if !(0.0..1.0).contains(&a.beta1) || !(0.0..1.0).contains(&a.beta2) || a.epsilon <= 0.0 {
            return Err(NetError::InvalidConfig("Adam hyper-parameters out of range".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub params: NetworkParams,
    /// Mean training loss of each epoch.
    pub epoch_losses: Vec<f64>,
}

struct Adam {
    cfg: AdamConfig,
    lr: f64,
    step: i32,
    m: Gradients,
    v: Gradients,
}

impl Adam {
    fn new(params: &NetworkParams, lr: f64, cfg: AdamConfig) -> Self {
        Self {
            cfg,
            lr,
            step: 0,
            m: Gradients::zeros_like(params),
            v: Gradients::zeros_like(params),
        }
    }

    fn update(&mut self, params: &mut NetworkParams, grads: &Gradients) {
        self.step += 1;
        let AdamConfig { beta1, beta2, epsilon } = self.cfg;
        let c1 = 1.0 - beta1.powi(self.step);
        let c2 = 1.0 - beta2.powi(self.step);
        let tensors = params.layers.iter_mut().zip(&grads.layers).zip(self.m.layers.iter_mut().zip(self.v.layers.iter_mut()));
        for ((p, g), (m, v)) in tensors {
            let pairs = [
                (&mut p.weights, &g.weights, &mut m.weights, &mut v.weights),
                (&mut p.bias, &g.bias, &mut m.bias, &mut v.bias),
            ];
            for (p, g, m, v) in pairs {
                for i in 0..p.len() {
                    m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
                    v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
                    let mh = m[i] / c1;
                    let vh = v[i] / c2;
                    p[i] -= self.lr * mh / (vh.sqrt() + epsilon);
                }
            }
        }
    }
}

fn check_dataset(dataset: &[(VoxelGrid, VoxelGrid)], spec: &NetworkSpec) -> Result<(), NetError> {
    if dataset.is_empty() {
        return Err(NetError::EmptyDataset);
    }
    for (i, (x, y)) in dataset.iter().enumerate() {
        if x.dims() != spec.input_dims || y.dims() != spec.input_dims {
            return Err(NetError::ShapeMismatch(format!(
                "example {i}: grids {:?} / {:?}, network expects {:?}",
                x.dims(),
                y.dims(),
                spec.input_dims
            )));
        }
    }
    Ok(())
}

/// Mini-batch Adam on mean cross-entropy, starting from a seeded
/// initialization. Every training example gets a freshly sampled dropout
/// mask; the returned parameters carry `config.dropout_rate` in their spec.
pub fn train(
    dataset: &[(VoxelGrid, VoxelGrid)],
    spec: &NetworkSpec,
    config: &TrainConfig,
) -> Result<TrainReport, NetError> {
    config.validate()?;
    let mut spec = spec.clone();
    spec.dropout_rate = config.dropout_rate;
    let init = NetworkParams::init(&spec, config.seed)?;
    train_from(dataset, init, config)
}

/// Continue training from existing parameters.
pub fn train_from(
    dataset: &[(VoxelGrid, VoxelGrid)],
    mut params: NetworkParams,
    config: &TrainConfig,
) -> Result<TrainReport, NetError> {
    config.validate()?;
    params.spec.dropout_rate = config.dropout_rate;
    params.validate()?;
    check_dataset(dataset, &params.spec)?;

    let mut adam = Adam::new(&params, config.learning_rate, config.adam);
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut shuffle_rng = rng::stream(config.seed, "shuffle", 0);
    let mut mask_rng = rng::stream(config.seed, "train-dropout", 0);
    let mut epoch_losses = Vec::with_capacity(config.epochs);

    for _ in 0..config.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            let mut grads = Gradients::zeros_like(&params);
            let w = 1.0 / batch.len() as f64;
            for &i in batch {
                let (x, y) = &dataset[i];
                let mask = sample_mask(&params.spec, &mut mask_rng)?;
                let active = (params.spec.dropout_rate > 0.0).then_some(&mask);
                total += accumulate_gradients(&params, x.values(), y.values(), active, w, &mut grads);
            }
            adam.update(&mut params, &grads);
        }
        epoch_losses.push(total / dataset.len() as f64);
    }
    Ok(TrainReport { params, epoch_losses })
}
