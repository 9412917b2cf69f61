//! The per-subject kernel `f(x; θ)`: an MLP with nonlinear hidden layers
//! and an affine output layer.
//!
//! Batches are row-major (`n x V_org`), so layer `m` computes
//! `H_m = g(H_{m-1} W_mᵀ + 1 a_mᵀ)`. Gradients are summed over the batch.

use alloc::vec::Vec;

use rand_distr::{Distribution, StandardNormal};

use crate::data::{check_architecture, Layer, NetworkParameters};
use crate::error::{shape, Result};
use crate::matrix::{dims, Matrix};
use crate::rng::rng_from;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(rename_all = "snake_case"))]
pub enum Activation {
    #[default]
    Sigmoid,
    Tanh,
    Relu,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Sigmoid => 1.0 / (1.0 + libm::exp(-z)),
            Activation::Tanh => libm::tanh(z),
            Activation::Relu => z.max(0.0),
        }
    }

    /// Derivative `g'(z)`, given both the input `z` and the output `g(z)`.
    #[inline]
    fn derivative(self, z: f64, gz: f64) -> f64 {
        match self {
            Activation::Sigmoid => gz * (1.0 - gz),
            Activation::Tanh => 1.0 - gz * gz,
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(rename_all = "snake_case"))]
pub enum InitScheme {
    /// Every weight and bias drawn from `N(0, 1)`.
    UnitNormal,
    /// `N(0, 1 / fan_in)`; keeps sigmoid units out of saturation for wide layers.
    #[default]
    ScaledNormal,
}

/// Deterministic random parameters for `[V_org, U2, ..., V]`.
pub fn init_params(layer_sizes: &[usize], scheme: InitScheme, seed: u64) -> Result<NetworkParameters> {
    check_architecture(layer_sizes)?;
    let mut rng = rng_from(seed);
    let mut layers = Vec::with_capacity(layer_sizes.len() - 1);
    for w in layer_sizes.windows(2) {
        let (fan_in, fan_out) = (w[0], w[1]);
        let std = match scheme {
            InitScheme::UnitNormal => 1.0,
            InitScheme::ScaledNormal => 1.0 / libm::sqrt(fan_in as f64),
        };
        let mut draw = || {
            let z: f64 = StandardNormal.sample(&mut rng);
            std * z
        };
        let weights = Matrix::from_fn(fan_out, fan_in, |_, _| draw());
        let bias = (0..fan_out).map(|_| draw()).collect();
        layers.push(Layer { weights, bias });
    }
    Ok(NetworkParameters { layers, layer_sizes: layer_sizes.to_vec() })
}

/// Intermediate values of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    /// `h_1 .. h_C`; `h_1` is the input batch and `h_C` the output.
    pub activations: Vec<Matrix>,
    /// `W_m h_{m-1} + a_m` for `m = 2 .. C`.
    pub pre_activations: Vec<Matrix>,
}

impl ForwardTrace {
    pub fn output(&self) -> &Matrix {
        self.activations.last().expect("trace always holds the input")
    }
}

fn affine(input: &Matrix, layer: &Layer) -> Result<Matrix> {
    let mut z = input.matmul_t(&layer.weights)?;
    for i in 0..z.rows() {
        for (v, b) in z.row_mut(i).iter_mut().zip(&layer.bias) {
            *v += b;
        }
    }
    Ok(z)
}

fn check_input(params: &NetworkParameters, batch: &Matrix) -> Result<()> {
    if batch.cols() != params.input_size() {
        return Err(shape("kernel input width", params.input_size(), batch.cols()));
    }
    Ok(())
}

pub fn forward(params: &NetworkParameters, batch: &Matrix, activation: Activation) -> Result<(Matrix, ForwardTrace)> {
    check_input(params, batch)?;
    let last = params.layers.len() - 1;
    let mut activations = Vec::with_capacity(params.layers.len() + 1);
    let mut pre_activations = Vec::with_capacity(params.layers.len());
    activations.push(batch.clone());
    for (m, layer) in params.layers.iter().enumerate() {
        let z = affine(activations.last().expect("non-empty"), layer)?;
        let h = if m == last { z.clone() } else { z.map(|v| activation.apply(v)) };
        pre_activations.push(z);
        activations.push(h);
    }
    let output = activations.last().expect("non-empty").clone();
    Ok((output, ForwardTrace { activations, pre_activations }))
}

/// Forward pass without keeping the trace.
pub fn transform(params: &NetworkParameters, batch: &Matrix, activation: Activation) -> Result<Matrix> {
    check_input(params, batch)?;
    let last = params.layers.len() - 1;
    let mut h = batch.clone();
    for (m, layer) in params.layers.iter().enumerate() {
        let mut z = affine(&h, layer)?;
        if m != last {
            z.map_inplace(|v| activation.apply(v));
        }
        h = z;
    }
    Ok(h)
}

fn check_targets(params: &NetworkParameters, batch: &Matrix, targets: &Matrix) -> Result<()> {
    if targets.shape() != (batch.rows(), params.output_size()) {
        return Err(shape("kernel targets", dims((batch.rows(), params.output_size())), dims(targets.shape())));
    }
    Ok(())
}

/// `Σ_i ‖f(x_i; θ) − target_i‖²`.
pub fn kernel_loss(
    params: &NetworkParameters,
    batch: &Matrix,
    targets: &Matrix,
    activation: Activation,
) -> Result<f64> {
    check_targets(params, batch, targets)?;
    let out = transform(params, batch, activation)?;
    Ok(out.sub(targets)?.sum_sq())
}

/// Gradient of [`kernel_loss`], shape-congruent with the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ParameterGradients {
    pub layers: Vec<Layer>,
}

impl ParameterGradients {
    pub fn flat_iter(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.weights.as_slice().iter().chain(l.bias.iter()))
    }

    pub fn max_abs(&self) -> f64 {
        self.flat_iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

pub fn backprop(
    params: &NetworkParameters,
    batch: &Matrix,
    targets: &Matrix,
    activation: Activation,
) -> Result<ParameterGradients> {
    check_targets(params, batch, targets)?;
    let (_, trace) = forward(params, batch, activation)?;
    backprop_from_trace(params, &trace, targets, activation)
}

/// Backpropagation reusing an existing forward trace for the same parameters.
pub fn backprop_from_trace(
    params: &NetworkParameters,
    trace: &ForwardTrace,
    targets: &Matrix,
    activation: Activation,
) -> Result<ParameterGradients> {
    let output = trace.output();
    if targets.shape() != output.shape() {
        return Err(shape("kernel targets", dims(output.shape()), dims(targets.shape())));
    }
    let n_layers = params.layers.len();
    let mut grads: Vec<Option<Layer>> = (0..n_layers).map(|_| None).collect();
    // dL/dz at the affine output layer
    let mut delta = output.zip_with(targets, |o, t| 2.0 * (o - t))?;
    for m in (0..n_layers).rev() {
        let input = &trace.activations[m];
        let weights = delta.t_matmul(input)?;
        let bias = delta.column_sums();
        if m > 0 {
            let back = delta.matmul(&params.layers[m].weights)?;
            let z = &trace.pre_activations[m - 1];
            let h = &trace.activations[m];
            let mut next = back;
            for ((d, &zv), &hv) in next.as_mut_slice().iter_mut().zip(z.as_slice()).zip(h.as_slice()) {
                *d *= activation.derivative(zv, hv);
            }
            delta = next;
        }
        grads[m] = Some(Layer { weights, bias });
    }
    Ok(ParameterGradients { layers: grads.into_iter().map(|g| g.expect("every layer visited")).collect() })
}
