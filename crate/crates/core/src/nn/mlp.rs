use alloc::format;
use alloc::vec::Vec;

use rand::Rng;

use super::params::{ModelParams, ParamId};
use super::tape::{Tape, Var};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::math;

/// Nonlinearity between hidden layers. The output layer is always linear.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    Relu,
    Linear,
}

/// Glorot-uniform matrix: entries in `±√(6/(fan_in+fan_out))`.
pub fn glorot_uniform<R: Rng + ?Sized>(fan_in: usize, fan_out: usize, rng: &mut R) -> Matrix {
    let limit = math::sqrt(6.0 / (fan_in + fan_out) as f64);
    let data = (0..fan_in * fan_out)
        .map(|_| rng.gen_range(-limit..=limit))
        .collect();
    Matrix::from_vec(fan_in, fan_out, data).expect("sized above")
}

/// He-uniform matrix: entries in `±√(6/fan_in)`, sized for ReLU inputs.
pub fn he_uniform<R: Rng + ?Sized>(fan_in: usize, fan_out: usize, rng: &mut R) -> Matrix {
    let limit = math::sqrt(6.0 / fan_in as f64);
    let data = (0..fan_in * fan_out)
        .map(|_| rng.gen_range(-limit..=limit))
        .collect();
    Matrix::from_vec(fan_in, fan_out, data).expect("sized above")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DenseLayer {
    pub weight: ParamId,
    pub bias: ParamId,
}

/// Fully connected stack `x → L₁ → σ → … → Lₖ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<DenseLayer>,
    sizes: Vec<usize>,
    activation: Activation,
}

impl Mlp {
    /// `sizes` lists the input width, hidden widths and output width.
    /// Layers feeding a ReLU are He-uniform, the output layer Glorot-uniform;
    /// biases zero; names are `{prefix}.{l}.w/b`.
    pub fn new<R: Rng + ?Sized>(
        params: &mut ModelParams,
        prefix: &str,
        sizes: &[usize],
        activation: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::invalid(format!(
                "MLP sizes must have >= 2 positive entries, got {sizes:?}"
            )));
        }
        let mut layers = Vec::with_capacity(sizes.len() - 1);
        let last = sizes.len() - 2;
        for (l, w) in sizes.windows(2).enumerate() {
            let init = if l < last && activation == Activation::Relu {
                he_uniform(w[0], w[1], rng)
            } else {
                glorot_uniform(w[0], w[1], rng)
            };
            let weight = params.add(format!("{prefix}.{l}.w"), init)?;
            let bias = params.add(format!("{prefix}.{l}.b"), Matrix::zeros(1, w[1]))?;
            layers.push(DenseLayer { weight, bias });
        }
        Ok(Self {
            layers,
            sizes: sizes.to_vec(),
            activation,
        })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn forward<'a>(&self, tape: &mut Tape<'a>, params: &ModelParams, x: Var) -> Result<Var> {
        let mut h = x;
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let width = tape.value(h).cols();
            if width != self.sizes[l] {
                return Err(Error::shape(format!("mlp layer {l} input"), self.sizes[l], width));
            }
            let w = tape.param(params, layer.weight);
            let b = tape.param(params, layer.bias);
            let z = tape.matmul(h, w)?;
            h = tape.add_row(z, b)?;
            if l != last && self.activation == Activation::Relu {
                h = tape.relu(h);
            }
        }
        Ok(h)
    }

    /// Sets each ReLU hidden layer's bias so its pre-activations have zero
    /// mean over the rows of `sample`, layer by layer. Keeps units from
    /// starting dead when inputs are far from centred.
    pub fn center_hidden_biases(&self, params: &mut ModelParams, sample: &Matrix) -> Result<()> {
        if self.activation != Activation::Relu || sample.rows() == 0 {
            return Ok(());
        }
        let mut h = sample.clone();
        for (l, layer) in self.layers[..self.layers.len() - 1].iter().enumerate() {
            let w = params.value(layer.weight);
            if h.cols() != w.rows() {
                return Err(Error::shape(format!("mlp layer {l} input"), w.rows(), h.cols()));
            }
            let mut z = h.matmul(w)?;
            let mut bias = Matrix::zeros(1, z.cols());
            for r in 0..z.rows() {
                for (b, v) in bias.row_mut(0).iter_mut().zip(z.row(r)) {
                    *b -= v;
                }
            }
            let inv = 1.0 / z.rows() as f64;
            bias.as_mut_slice().iter_mut().for_each(|b| *b *= inv);
            for r in 0..z.rows() {
                for (v, b) in z.row_mut(r).iter_mut().zip(bias.row(0)) {
                    *v = (*v + b).max(0.0);
                }
            }
            params.set_value(layer.bias, bias)?;
            h = z;
        }
        Ok(())
    }

    /// Forward pass without recording.
    pub fn predict(&self, params: &ModelParams, x: &Matrix) -> Result<Matrix> {
        mlp_forward(params, &self.layers, x, self.activation)
    }
}

/// Plain forward evaluation of a dense stack.
pub fn mlp_forward(
    params: &ModelParams,
    layers: &[DenseLayer],
    x: &Matrix,
    activation: Activation,
) -> Result<Matrix> {
    let mut h = x.clone();
    for (l, layer) in layers.iter().enumerate() {
        let w = params.value(layer.weight);
        if h.cols() != w.rows() {
            return Err(Error::shape(format!("mlp layer {l} input"), w.rows(), h.cols()));
        }
        h = h.matmul(w)?;
        let b = params.value(layer.bias);
        for r in 0..h.rows() {
            for (v, bb) in h.row_mut(r).iter_mut().zip(b.row(0)) {
                *v += bb;
            }
        }
        if l + 1 != layers.len() && activation == Activation::Relu {
            h = h.map(|v| if v > 0.0 { v } else { 0.0 });
        }
    }
    Ok(h)
}
