//! Occupancy-completion network with Monte-Carlo dropout.
//!
//! The network maps a binary partial-view grid to per-cell occupancy
//! probabilities. Dropout is inverted (kept units are scaled by
//! `1 / (1 - p)` when a mask is applied), so running without a mask is the
//! deterministic point estimate and needs no weight rescaling.

mod checkpoint;
mod layers;
mod spec;
mod train;

pub use checkpoint::{read_checkpoint, write_checkpoint, write_loss_log};
pub use spec::{sigmoid, Activation, LayerKind, LayerSpec, NetworkSpec, OUTPUT_MARGIN};
pub use train::{train, train_from, AdamConfig, TrainConfig, TrainReport};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng;
use crate::voxelgrid::VoxelGrid;

/// Probabilities are clamped to `[LOSS_CLAMP, 1 - LOSS_CLAMP]` inside the loss.
pub const LOSS_CLAMP: f64 = 1e-7;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum NetError {
    #[error("invalid network spec: {0}")]
    InvalidSpec(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("grid dimensions differ: {0:?} vs {1:?}")]
    DimMismatch([usize; 3], [usize; 3]),
    #[error("training dataset is empty")]
    EmptyDataset,
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("non-finite parameter in layer {0}")]
    NonFinite(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Weights of the network together with the architecture they belong to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    pub spec: NetworkSpec,
    pub layers: Vec<LayerParams>,
}

impl NetworkParams {
    /// Uniform initialization in `+-sqrt(1 / fan_in)` for weights and biases.
    pub fn init(spec: &NetworkSpec, seed: u64) -> Result<Self, NetError> {
        spec.validate()?;
        let mut r = rng::stream(seed, "init", 0);
        let layers = spec
            .layers
            .iter()
            .map(|l| {
                let bound = (1.0 / l.fan_in() as f64).sqrt();
                let mut draw = || r.gen_range(-bound..=bound);
                LayerParams {
                    weights: (0..l.weight_len()).map(|_| draw()).collect(),
                    bias: (0..l.out_channels).map(|_| draw()).collect(),
                }
            })
            .collect();
        Ok(Self { spec: spec.clone(), layers })
    }

    pub fn zeros(spec: &NetworkSpec) -> Result<Self, NetError> {
        spec.validate()?;
        let layers = spec
            .layers
            .iter()
            .map(|l| LayerParams {
                weights: vec![0.0; l.weight_len()],
                bias: vec![0.0; l.out_channels],
            })
            .collect();
        Ok(Self { spec: spec.clone(), layers })
    }

    pub fn validate(&self) -> Result<(), NetError> {
        self.spec.validate()?;
        if self.layers.len() != self.spec.layers.len() {
            return Err(NetError::ShapeMismatch(format!(
                "{} parameter blocks for {} layers",
                self.layers.len(),
                self.spec.layers.len()
            )));
        }
        for (i, (p, l)) in self.layers.iter().zip(&self.spec.layers).enumerate() {
            if p.weights.len() != l.weight_len() || p.bias.len() != l.out_channels {
                return Err(NetError::ShapeMismatch(format!("layer {i} tensor sizes")));
            }
            if !p.weights.iter().chain(&p.bias).all(|v| v.is_finite()) {
                return Err(NetError::NonFinite(i));
            }
        }
        Ok(())
    }

    /// Same weights with a different test-time dropout rate.
    pub fn with_dropout_rate(&self, p: f64) -> Result<Self, NetError> {
        let mut out = self.clone();
        out.spec.dropout_rate = p;
        out.spec.validate()?;
        Ok(out)
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }
}

/// Keep-masks for every layer that applies dropout (`None` elsewhere).
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMask {
    pub rate: f64,
    pub layers: Vec<Option<Vec<bool>>>,
}

impl DropoutMask {
    /// Mask that keeps every unit.
    pub fn all_ones(spec: &NetworkSpec) -> Result<Self, NetError> {
        let shapes = spec.shapes()?;
        Ok(Self {
            rate: spec.dropout_rate,
            layers: spec
                .layers
                .iter()
                .zip(shapes)
                .map(|(l, (c, d))| l.dropout.then(|| vec![true; c * d[0] * d[1] * d[2]]))
                .collect(),
        })
    }

    pub fn kept_fraction(&self) -> f64 {
        let (kept, total) = self
            .layers
            .iter()
            .flatten()
            .fold((0usize, 0usize), |(k, t), m| {
                (k + m.iter().filter(|&&b| b).count(), t + m.len())
            });
        if total == 0 {
            1.0
        } else {
            kept as f64 / total as f64
        }
    }
}

/// Draw a mask keeping each unit independently with probability `1 - p`.
pub fn sample_mask(spec: &NetworkSpec, rng: &mut impl Rng) -> Result<DropoutMask, NetError> {
    let mut mask = DropoutMask::all_ones(spec)?;
    let p = spec.dropout_rate;
    for m in mask.layers.iter_mut().flatten() {
        for keep in m.iter_mut() {
            *keep = rng.gen::<f64>() >= p;
        }
    }
    Ok(mask)
}

/// Intermediate values kept for backpropagation.
struct Trace {
    /// Input to each layer (index 0 is the network input).
    inputs: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
    post: Vec<Vec<f64>>,
    output: Vec<f64>,
}

fn check_input(params: &NetworkParams, input: &VoxelGrid) -> Result<(), NetError> {
    if input.dims() != params.spec.input_dims {
        return Err(NetError::ShapeMismatch(format!(
            "input grid {:?}, network expects {:?}",
            input.dims(),
            params.spec.input_dims
        )));
    }
    Ok(())
}

fn check_mask(params: &NetworkParams, mask: Option<&DropoutMask>) -> Result<(), NetError> {
    let Some(mask) = mask else { return Ok(()) };
    let shapes = params.spec.shapes()?;
    if mask.layers.len() != shapes.len() {
        return Err(NetError::ShapeMismatch("mask layer count".into()));
    }
    for (i, ((m, l), (c, d))) in mask.layers.iter().zip(&params.spec.layers).zip(shapes).enumerate() {
        let ok = match m {
            Some(m) => l.dropout && m.len() == c * d[0] * d[1] * d[2],
            None => !l.dropout,
        };
        if !ok {
            return Err(NetError::ShapeMismatch(format!("mask for layer {i}")));
        }
    }
    Ok(())
}

fn run(params: &NetworkParams, input: &[f64], mask: Option<&DropoutMask>, keep_trace: bool) -> Trace {
    let spec = &params.spec;
    let scale = mask.map(|m| 1.0 / (1.0 - m.rate)).unwrap_or(1.0);
    let mut dims = spec.input_dims;
    let mut x = input.to_vec();
    let mut trace = Trace { inputs: vec![], pre: vec![], post: vec![], output: vec![] };
    for (li, (l, p)) in spec.layers.iter().zip(&params.layers).enumerate() {
        let out_dims = l.output_dims(dims).expect("validated spec");
        let z = layers::forward(l, dims, out_dims, &x, &p.weights, &p.bias);
        let mut a: Vec<f64> = z.iter().map(|&v| l.activation.apply(v)).collect();
        if let Some(Some(keep)) = mask.map(|m| &m.layers[li]) {
            for (v, &k) in a.iter_mut().zip(keep) {
                *v = if k { *v * scale } else { 0.0 };
            }
        }
        if keep_trace {
            trace.inputs.push(std::mem::take(&mut x));
            trace.pre.push(z);
            trace.post.push(a.clone());
        }
        x = a;
        dims = out_dims;
    }
    trace.output = x;
    trace
}

/// One pass through the network. `mask = None` disables dropout.
pub fn forward(
    params: &NetworkParams,
    input: &VoxelGrid,
    mask: Option<&DropoutMask>,
) -> Result<VoxelGrid, NetError> {
    check_input(params, input)?;
    check_mask(params, mask)?;
    let out = run(params, input.values(), mask, false).output;
    VoxelGrid::from_values(*input.frame(), out).map_err(|e| NetError::ShapeMismatch(e.to_string()))
}

/// Mean binary cross-entropy over cells, with `output` the predicted
/// probabilities and `target` the binary ground truth.
pub fn cross_entropy(output: &VoxelGrid, target: &VoxelGrid) -> Result<f64, NetError> {
    if output.dims() != target.dims() {
        return Err(NetError::DimMismatch(output.dims(), target.dims()));
    }
    Ok(bce(output.values(), target.values()))
}

fn bce(output: &[f64], target: &[f64]) -> f64 {
    let sum: f64 = output
        .iter()
        .zip(target)
        .map(|(&o, &t)| {
            let o = o.clamp(LOSS_CLAMP, 1.0 - LOSS_CLAMP);
            -(t * o.ln() + (1.0 - t) * (1.0 - o).ln())
        })
        .sum();
    sum / output.len() as f64
}

/// Parameter gradients, laid out like [`NetworkParams::layers`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerParams>,
}

impl Gradients {
    pub fn zeros_like(params: &NetworkParams) -> Self {
        Self {
            layers: params
                .layers
                .iter()
                .map(|l| LayerParams {
                    weights: vec![0.0; l.weights.len()],
                    bias: vec![0.0; l.bias.len()],
                })
                .collect(),
        }
    }
}

/// Loss of one example and its gradient, accumulated into `grads` after
/// scaling by `weight` (used for batch averaging).
pub(crate) fn accumulate_gradients(
    params: &NetworkParams,
    input: &[f64],
    target: &[f64],
    mask: Option<&DropoutMask>,
    weight: f64,
    grads: &mut Gradients,
) -> f64 {
    let spec = &params.spec;
    let trace = run(params, input, mask, true);
    let loss = bce(&trace.output, target);
    let n = target.len() as f64;
    let scale = mask.map(|m| 1.0 / (1.0 - m.rate)).unwrap_or(1.0);
    let shapes = spec.shapes().expect("validated spec");

    // d(loss)/d(output activation)
    let mut grad: Vec<f64> = trace
        .output
        .iter()
        .zip(target)
        .map(|(&o, &t)| {
            let oc = o.clamp(LOSS_CLAMP, 1.0 - LOSS_CLAMP);
            if o != oc {
                0.0
            } else {
                weight * (o - t) / (o * (1.0 - o)) / n
            }
        })
        .collect();

    for li in (0..spec.layers.len()).rev() {
        let l = &spec.layers[li];
        if let Some(Some(keep)) = mask.map(|m| &m.layers[li]) {
            for (g, &k) in grad.iter_mut().zip(keep) {
                *g = if k { *g * scale } else { 0.0 };
            }
        }
        let z = &trace.pre[li];
        let a = &trace.post[li];
        // Post-dropout values were overwritten in `a` for dropped units; the
        // sigmoid derivative needs the raw activation, so recompute it.
        for ((g, &zv), _) in grad.iter_mut().zip(z).zip(a) {
            let raw = l.activation.apply(zv);
            *g *= l.activation.derivative(zv, raw);
        }
        let in_dims = if li == 0 { spec.input_dims } else { shapes[li - 1].1 };
        let out_dims = shapes[li].1;
        let gl = &mut grads.layers[li];
        let next = layers::backward(
            l,
            in_dims,
            out_dims,
            &trace.inputs[li],
            &params.layers[li].weights,
            &grad,
            &mut gl.weights,
            &mut gl.bias,
            li > 0,
        );
        match next {
            Some(g) => grad = g,
            None => break,
        }
    }
    loss
}

/// Loss and exact gradient for a single example.
pub fn loss_and_gradients(
    params: &NetworkParams,
    input: &VoxelGrid,
    target: &VoxelGrid,
    mask: Option<&DropoutMask>,
) -> Result<(f64, Gradients), NetError> {
    check_input(params, input)?;
    check_input(params, target)?;
    check_mask(params, mask)?;
    let mut grads = Gradients::zeros_like(params);
    let loss = accumulate_gradients(params, input.values(), target.values(), mask, 1.0, &mut grads);
    Ok((loss, grads))
}

/// `count` stochastic passes, each with a fresh mask drawn from the stream
/// `(seed, "dropout", i)`. Sample order and content do not depend on the
/// thread schedule.
pub fn mc_samples(
    params: &NetworkParams,
    input: &VoxelGrid,
    count: usize,
    seed: u64,
) -> Result<Vec<VoxelGrid>, NetError> {
    check_input(params, input)?;
    (0..count)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::stream(seed, "dropout", i as u64);
            let mask = sample_mask(&params.spec, &mut r)?;
            forward(params, input, Some(&mask))
        })
        .collect()
}
