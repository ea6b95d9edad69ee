//! Dense feed-forward networks with exact reverse-mode gradients, an Adam
//! optimizer, and a versioned binary format. Everything is 64-bit and
//! deterministic given a seeded RNG.

#![allow(clippy::needless_range_loop)]

use std::path::Path;

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("bad magic bytes; not a model file")]
    BadMagic,
    #[error("unsupported format version {0} (this build reads version {CURRENT_VERSION})")]
    BadVersion(u16),
    #[error("model file truncated or trailing bytes present")]
    Truncated,
    #[error("unknown activation tag {0}")]
    BadActivation(u8),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub const CURRENT_VERSION: u16 = 1;
const MAGIC: &[u8; 4] = b"VVNN";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
    Sigmoid,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
        }
    }

    /// Derivative expressed through the activation output.
    fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
            Activation::Sigmoid => a * (1.0 - a),
        }
    }

    fn tag(self) -> u8 {
        match self {
            Activation::Identity => 0,
            Activation::Relu => 1,
            Activation::Tanh => 2,
            Activation::Sigmoid => 3,
        }
    }

    fn from_tag(tag: u8) -> Result<Self, NnError> {
        Ok(match tag {
            0 => Activation::Identity,
            1 => Activation::Relu,
            2 => Activation::Tanh,
            3 => Activation::Sigmoid,
            other => return Err(NnError::BadActivation(other)),
        })
    }
}

/// One affine layer: `a = act(W x + b)` with W stored row-major (out x in).
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
    pub activation: Activation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseNet {
    layers: Vec<Layer>,
}

/// Per-parameter partials of a scalar objective, plus the gradient with
/// respect to the input vector.
#[derive(Debug, Clone)]
pub struct GradientSet {
    pub d_weights: Vec<Vec<f64>>,
    pub d_biases: Vec<Vec<f64>>,
    pub d_input: Vec<f64>,
}

impl GradientSet {
    pub fn zeros_like(net: &DenseNet) -> GradientSet {
        GradientSet {
            d_weights: net.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            d_biases: net.layers.iter().map(|l| vec![0.0; l.biases.len()]).collect(),
            d_input: vec![0.0; net.input_dim()],
        }
    }

    /// Accumulates `other * scale` into self.
    pub fn add_scaled(&mut self, other: &GradientSet, scale: f64) {
        for (acc, src) in self.d_weights.iter_mut().zip(&other.d_weights) {
            for (a, s) in acc.iter_mut().zip(src) {
                *a += s * scale;
            }
        }
        for (acc, src) in self.d_biases.iter_mut().zip(&other.d_biases) {
            for (a, s) in acc.iter_mut().zip(src) {
                *a += s * scale;
            }
        }
        for (a, s) in self.d_input.iter_mut().zip(&other.d_input) {
            *a += s * scale;
        }
    }

    pub fn scale(&mut self, k: f64) {
        for w in &mut self.d_weights {
            for v in w {
                *v *= k;
            }
        }
        for b in &mut self.d_biases {
            for v in b {
                *v *= k;
            }
        }
        for v in &mut self.d_input {
            *v *= k;
        }
    }
}

impl DenseNet {
    /// Builds a net with uniform Glorot initialization: each layer drawn
    /// from +-sqrt(6 / (fan_in + fan_out)).
    pub fn init<R: Rng>(dims: &[usize], activations: &[Activation], rng: &mut R) -> DenseNet {
        assert!(dims.len() >= 2, "need at least input and output dims");
        assert_eq!(dims.len() - 1, activations.len());
        let layers = dims
            .windows(2)
            .zip(activations)
            .map(|(pair, &activation)| {
                let (fan_in, fan_out) = (pair[0], pair[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let weights = (0..fan_in * fan_out)
                    .map(|_| rng.gen_range(-limit..limit))
                    .collect();
                Layer {
                    in_dim: fan_in,
                    out_dim: fan_out,
                    weights,
                    biases: vec![0.0; fan_out],
                    activation,
                }
            })
            .collect();
        DenseNet { layers }
    }

    pub fn from_layers(layers: Vec<Layer>) -> DenseNet {
        for pair in layers.windows(2) {
            assert_eq!(pair[0].out_dim, pair[1].in_dim, "layer dims incompatible");
        }
        DenseNet { layers }
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map(|l| l.in_dim).unwrap_or(0)
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map(|l| l.out_dim).unwrap_or(0)
    }

    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        assert_eq!(input.len(), self.input_dim(), "input length mismatch");
        let mut a = input.to_vec();
        for layer in &self.layers {
            a = layer_forward(layer, &a);
        }
        a
    }

    /// Exact reverse-mode gradients of `upstream . output` with respect to
    /// every parameter and the input.
    pub fn backward(&self, input: &[f64], upstream: &[f64]) -> GradientSet {
        assert_eq!(input.len(), self.input_dim(), "input length mismatch");
        assert_eq!(upstream.len(), self.output_dim(), "upstream length mismatch");

        // Forward pass keeping each layer's input and activation output.
        let mut inputs: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        let mut a = input.to_vec();
        for layer in &self.layers {
            inputs.push(a.clone());
            a = layer_forward(layer, &a);
        }
        let mut outputs = inputs.clone();
        outputs.remove(0);
        outputs.push(a);

        let mut d_weights = vec![Vec::new(); self.layers.len()];
        let mut d_biases = vec![Vec::new(); self.layers.len()];
        let mut delta = upstream.to_vec();
        for (k, layer) in self.layers.iter().enumerate().rev() {
            let x = &inputs[k];
            let out = &outputs[k];
            // d/dz through the activation.
            let dz: Vec<f64> = delta
                .iter()
                .zip(out)
                .map(|(d, &a)| d * layer.activation.derivative_from_output(a))
                .collect();
            let mut dw = vec![0.0; layer.weights.len()];
            for r in 0..layer.out_dim {
                for c in 0..layer.in_dim {
                    dw[r * layer.in_dim + c] = dz[r] * x[c];
                }
            }
            d_weights[k] = dw;
            d_biases[k] = dz.clone();
            // Input gradient: W^T dz.
            let mut dx = vec![0.0; layer.in_dim];
            for r in 0..layer.out_dim {
                let row = &layer.weights[r * layer.in_dim..(r + 1) * layer.in_dim];
                for (c, w) in row.iter().enumerate() {
                    dx[c] += w * dz[r];
                }
            }
            delta = dx;
        }
        GradientSet {
            d_weights,
            d_biases,
            d_input: delta,
        }
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    /// All parameters in a flat vector: per layer, weights then biases.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for layer in &self.layers {
            out.extend_from_slice(&layer.weights);
            out.extend_from_slice(&layer.biases);
        }
        out
    }

    pub fn load_flat(&mut self, params: &[f64]) -> Result<(), NnError> {
        if params.len() != self.param_count() {
            return Err(NnError::DimMismatch {
                expected: self.param_count(),
                got: params.len(),
            });
        }
        let mut cursor = 0;
        for layer in &mut self.layers {
            let nw = layer.weights.len();
            layer.weights.copy_from_slice(&params[cursor..cursor + nw]);
            cursor += nw;
            let nb = layer.biases.len();
            layer.biases.copy_from_slice(&params[cursor..cursor + nb]);
            cursor += nb;
        }
        Ok(())
    }

    // -- serialization ------------------------------------------------------
    //
    // Byte layout, little-endian throughout:
    //   magic "VVNN" | version u16 | layer_count u16
    //   per layer: in_dim u32 | out_dim u32 | activation u8
    //              | biases out_dim x f64 | weights (out_dim*in_dim) x f64
    // Weights are row-major: weight(row=output, col=input).

    pub fn serialize(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&CURRENT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.layers.len() as u16).to_le_bytes());
        for layer in &self.layers {
            out.extend_from_slice(&(layer.in_dim as u32).to_le_bytes());
            out.extend_from_slice(&(layer.out_dim as u32).to_le_bytes());
            out.push(layer.activation.tag());
            for b in &layer.biases {
                out.extend_from_slice(&b.to_le_bytes());
            }
            for w in &layer.weights {
                out.extend_from_slice(&w.to_le_bytes());
            }
        }
        out
    }

    pub fn deserialize(bytes: &[u8]) -> Result<DenseNet, NnError> {
        let mut cursor = Cursor { bytes, pos: 0 };
        if cursor.take(4)? != MAGIC.as_slice() {
            return Err(NnError::BadMagic);
        }
        let version = u16::from_le_bytes(cursor.take(2)?.try_into().unwrap());
        if version != CURRENT_VERSION {
            return Err(NnError::BadVersion(version));
        }
        let layer_count = u16::from_le_bytes(cursor.take(2)?.try_into().unwrap());
        let mut layers = Vec::with_capacity(layer_count as usize);
        for _ in 0..layer_count {
            let in_dim = u32::from_le_bytes(cursor.take(4)?.try_into().unwrap()) as usize;
            let out_dim = u32::from_le_bytes(cursor.take(4)?.try_into().unwrap()) as usize;
            let activation = Activation::from_tag(cursor.take(1)?[0])?;
            let mut biases = Vec::with_capacity(out_dim);
            for _ in 0..out_dim {
                biases.push(f64::from_le_bytes(cursor.take(8)?.try_into().unwrap()));
            }
            let mut weights = Vec::with_capacity(out_dim * in_dim);
            for _ in 0..out_dim * in_dim {
                weights.push(f64::from_le_bytes(cursor.take(8)?.try_into().unwrap()));
            }
            layers.push(Layer {
                in_dim,
                out_dim,
                weights,
                biases,
                activation,
            });
        }
        if cursor.pos != bytes.len() {
            return Err(NnError::Truncated);
        }
        for pair in layers.windows(2) {
            if pair[0].out_dim != pair[1].in_dim {
                return Err(NnError::DimMismatch {
                    expected: pair[0].out_dim,
                    got: pair[1].in_dim,
                });
            }
        }
        Ok(DenseNet { layers })
    }

    pub fn save<P: AsRef<Path>>(&self, path: P) -> Result<(), NnError> {
        std::fs::write(&path, self.serialize()).map_err(|source| NnError::Io {
            path: path.as_ref().display().to_string(),
            source,
        })
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<DenseNet, NnError> {
        let bytes = std::fs::read(&path).map_err(|source| NnError::Io {
            path: path.as_ref().display().to_string(),
            source,
        })?;
        DenseNet::deserialize(&bytes)
    }
}

fn layer_forward(layer: &Layer, x: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(layer.out_dim);
    for r in 0..layer.out_dim {
        let row = &layer.weights[r * layer.in_dim..(r + 1) * layer.in_dim];
        let z = layer.biases[r] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        out.push(layer.activation.apply(z));
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], NnError> {
        if self.pos + n > self.bytes.len() {
            return Err(NnError::Truncated);
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }
}

/// First/second moment accumulators for Adam, beta1 = 0.9, beta2 = 0.999,
/// eps = 1e-8, with bias correction.
#[derive(Debug, Clone)]
pub struct AdamState {
    m_weights: Vec<Vec<f64>>,
    v_weights: Vec<Vec<f64>>,
    m_biases: Vec<Vec<f64>>,
    v_biases: Vec<Vec<f64>>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamState {
    pub fn new(net: &DenseNet) -> AdamState {
        AdamState {
            m_weights: net.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            v_weights: net.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            m_biases: net.layers.iter().map(|l| vec![0.0; l.biases.len()]).collect(),
            v_biases: net.layers.iter().map(|l| vec![0.0; l.biases.len()]).collect(),
            step: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// One Adam descent step. Gradient ascent is the caller negating gradients.
pub fn adam_step(net: &mut DenseNet, grads: &GradientSet, state: &mut AdamState, lr: f64) {
    state.step += 1;
    let t = state.step as i32;
    let (beta1, beta2, epsilon) = (state.beta1, state.beta2, state.epsilon);
    let bc1 = 1.0 - beta1.powi(t);
    let bc2 = 1.0 - beta2.powi(t);
    let update = |param: &mut [f64], grad: &[f64], m: &mut [f64], v: &mut [f64]| {
        for i in 0..param.len() {
            m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            param[i] -= lr * m_hat / (v_hat.sqrt() + epsilon);
        }
    };
    for (k, layer) in net.layers.iter_mut().enumerate() {
        update(
            &mut layer.weights,
            &grads.d_weights[k],
            &mut state.m_weights[k],
            &mut state.v_weights[k],
        );
        update(
            &mut layer.biases,
            &grads.d_biases[k],
            &mut state.m_biases[k],
            &mut state.v_biases[k],
        );
    }
}
