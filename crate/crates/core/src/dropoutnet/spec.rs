use serde::{Deserialize, Serialize};

use super::NetError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Conv,
    TransposedConv,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum Activation {
    Relu,
    LeakyRelu { slope: f64 },
    Sigmoid,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::LeakyRelu { slope } => {
                if z > 0.0 {
                    z
                } else {
                    slope * z
                }
            }
            Activation::Sigmoid => sigmoid(z),
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `a`.
    #[inline]
    pub fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu { slope } => {
                if z > 0.0 {
                    1.0
                } else {
                    slope
                }
            }
            Activation::Sigmoid => a * (1.0 - a),
        }
    }
}

/// Output probabilities are kept strictly inside (0, 1).
pub const OUTPUT_MARGIN: f64 = 1e-12;

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    let s = if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    };
    s.clamp(OUTPUT_MARGIN, 1.0 - OUTPUT_MARGIN)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub padding: usize,
    pub activation: Activation,
    pub dropout: bool,
}

impl LayerSpec {
    pub fn output_dims(&self, input: [usize; 3]) -> Option<[usize; 3]> {
        let mut out = [0; 3];
        for a in 0..3 {
            let n = input[a];
            out[a] = match self.kind {
                LayerKind::Conv => {
                    let span = (n + 2 * self.padding).checked_sub(self.kernel)?;
                    span / self.stride + 1
                }
                LayerKind::TransposedConv => {
                    ((n.checked_sub(1)?) * self.stride + self.kernel).checked_sub(2 * self.padding)?
                }
            };
            if out[a] == 0 {
                return None;
            }
        }
        Some(out)
    }

    pub fn weight_len(&self) -> usize {
        self.in_channels * self.out_channels * self.kernel.pow(3)
    }

    pub fn fan_in(&self) -> usize {
        self.in_channels * self.kernel.pow(3)
    }
}

/// Architecture of the completion network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input_dims: [usize; 3],
    pub layers: Vec<LayerSpec>,
    pub dropout_rate: f64,
}

impl NetworkSpec {
    /// Hourglass used by default: two stride-2 convolutions down to a
    /// quarter resolution, two stride-2 transposed convolutions back up,
    /// LeakyReLU(0.01) hidden units each followed by dropout, sigmoid output.
    pub fn hourglass(n: usize, dropout_rate: f64) -> Self {
        let hidden = Activation::LeakyRelu { slope: 0.01 };
        let layer = |kind, in_channels, out_channels, activation, dropout| LayerSpec {
            kind,
            in_channels,
            out_channels,
            kernel: 4,
            stride: 2,
            padding: 1,
            activation,
            dropout,
        };
        Self {
            input_dims: [n, n, n],
            layers: vec![
                layer(LayerKind::Conv, 1, 8, hidden, true),
                layer(LayerKind::Conv, 8, 16, hidden, true),
                layer(LayerKind::TransposedConv, 16, 8, hidden, true),
                layer(LayerKind::TransposedConv, 8, 1, Activation::Sigmoid, false),
            ],
            dropout_rate,
        }
    }

    /// Per-layer `(channels, dims)` of each layer's output.
    pub fn shapes(&self) -> Result<Vec<(usize, [usize; 3])>, NetError> {
        let mut dims = self.input_dims;
        let mut channels = 1;
        let mut out = Vec::with_capacity(self.layers.len());
        for (i, l) in self.layers.iter().enumerate() {
            if l.in_channels != channels {
                return Err(NetError::InvalidSpec(format!(
                    "layer {i}: expects {} input channels, previous layer gives {channels}",
                    l.in_channels
                )));
            }
            if l.kernel == 0 || l.stride == 0 || l.out_channels == 0 {
                return Err(NetError::InvalidSpec(format!("layer {i}: zero-sized parameter")));
            }
            dims = l
                .output_dims(dims)
                .ok_or_else(|| NetError::InvalidSpec(format!("layer {i}: empty output")))?;
            channels = l.out_channels;
            out.push((channels, dims));
        }
        Ok(out)
    }

    pub fn validate(&self) -> Result<(), NetError> {
        if self.input_dims.iter().any(|&d| d == 0) {
            return Err(NetError::InvalidSpec("input dims must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(NetError::InvalidSpec(format!(
                "dropout rate {} outside [0, 1)",
                self.dropout_rate
            )));
        }
        let shapes = self.shapes()?;
        let Some(&(channels, dims)) = shapes.last() else {
            return Err(NetError::InvalidSpec("no layers".into()));
        };
        if channels != 1 || dims != self.input_dims {
            return Err(NetError::InvalidSpec(format!(
                "network maps {:?} to {channels} x {dims:?}, expected 1 x {:?}",
                self.input_dims, self.input_dims
            )));
        }
        if self.layers.last().map(|l| l.activation) != Some(Activation::Sigmoid) {
            return Err(NetError::InvalidSpec("final activation must be sigmoid".into()));
        }
        if self.dropout_rate > 0.0 && !self.layers.iter().any(|l| l.dropout) {
            return Err(NetError::InvalidSpec(
                "dropout rate > 0 but no layer applies dropout".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hourglass_is_valid_and_round_trips_dims() {
        for n in [8, 16, 40] {
            let spec = NetworkSpec::hourglass(n, 0.2);
            spec.validate().unwrap();
            let shapes = spec.shapes().unwrap();
            assert_eq!(shapes[1], (16, [n / 4; 3]));
        }
    }

    #[test]
    fn invalid_specs_rejected() {
        let mut s = NetworkSpec::hourglass(16, 0.2);
        s.layers[3].activation = Activation::Relu;
        assert!(s.validate().is_err());

        let mut s = NetworkSpec::hourglass(16, 0.2);
        s.layers.iter_mut().for_each(|l| l.dropout = false);
        assert!(s.validate().is_err());
        s.dropout_rate = 0.0;
        assert!(s.validate().is_ok());

        let mut s = NetworkSpec::hourglass(16, 0.2);
        s.layers.pop();
        assert!(s.validate().is_err());
    }

    #[test]
    fn sigmoid_stays_open() {
        assert!(sigmoid(1e4) < 1.0);
        assert!(sigmoid(-1e4) > 0.0);
        assert_eq!(sigmoid(0.0), 0.5);
    }
}
