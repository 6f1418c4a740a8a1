//! Fully-connected model definitions with named taps.

use std::collections::BTreeMap;

use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Tanh,
    Sigmoid,
    Linear,
}

impl Activation {
    pub fn code(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Tanh => 1,
            Activation::Sigmoid => 2,
            Activation::Linear => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0 => Activation::Relu,
            1 => Activation::Tanh,
            2 => Activation::Sigmoid,
            3 => Activation::Linear,
            _ => return None,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LayerSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn new(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        LayerSpec { in_dim, out_dim, activation }
    }
}

/// Builds a chain of layers from a list of widths; `hidden` applies to every
/// layer except the last, which uses `output`.
pub fn mlp(widths: &[usize], hidden: Activation, output: Activation) -> Vec<LayerSpec> {
    let n = widths.len() - 1;
    (0..n)
        .map(|i| LayerSpec::new(widths[i], widths[i + 1], if i + 1 == n { output } else { hidden }))
        .collect()
}

pub fn weight_name(layer: usize) -> String {
    format!("layer{layer}.weight")
}

pub fn bias_name(layer: usize) -> String {
    format!("layer{layer}.bias")
}

/// One network: layer chain, parameters, and named taps on layer outputs.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelBundle {
    pub name: String,
    pub layers: Vec<LayerSpec>,
    pub params: BTreeMap<String, Tensor>,
    /// Tap name -> index of the layer whose (post-activation) output it exposes.
    pub taps: BTreeMap<String, usize>,
    /// Training noise stddev, for denoising autoencoders.
    pub noise_sigma: Option<f64>,
    /// Named tensors carried alongside the weights (training statistics).
    pub extras: BTreeMap<String, Tensor>,
}

/// Whether parameters are recorded as trainable leaves or frozen constants.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamMode {
    Trainable,
    Frozen,
}

/// A model's parameters placed on a particular tape.
#[derive(Clone, Debug)]
pub struct BoundParams {
    pub layers: Vec<(Var, Var)>,
}

#[derive(Clone, Debug)]
pub struct ForwardOutput {
    pub output: Var,
    pub taps: BTreeMap<String, Var>,
}

impl ForwardOutput {
    pub fn tap(&self, name: &str) -> Result<Var> {
        self.taps
            .get(name)
            .copied()
            .ok_or_else(|| Error::InvalidArgument(format!("unknown tap '{name}'")))
    }
}

pub(crate) fn validate_layers(name: &str, layers: &[LayerSpec]) -> Result<()> {
    let err = |reason: String| Error::Model { model: name.to_string(), reason };
    for (i, l) in layers.iter().enumerate() {
        if l.in_dim == 0 || l.out_dim == 0 {
            return Err(err(format!("layer {i} has a zero dimension")));
        }
        if i > 0 && layers[i - 1].out_dim != l.in_dim {
            return Err(err(format!(
                "layer {i} expects {} inputs but layer {} produces {}",
                l.in_dim,
                i - 1,
                layers[i - 1].out_dim
            )));
        }
    }
    Ok(())
}

impl ModelBundle {
    /// Fresh model with uniform Glorot-scaled weights and zero biases.
    pub fn init(name: &str, layers: Vec<LayerSpec>, rng: &mut RngStream) -> Result<Self> {
        validate_layers(name, &layers)?;
        let mut params = BTreeMap::new();
        for (i, l) in layers.iter().enumerate() {
            let gain = if l.activation == Activation::Relu { 2f64.sqrt() } else { 1.0 };
            let limit = gain * (6.0 / (l.in_dim + l.out_dim) as f64).sqrt();
            let w = (0..l.in_dim * l.out_dim).map(|_| rng.uniform_range(-limit, limit)).collect();
            params.insert(weight_name(i), Tensor::new(vec![l.in_dim, l.out_dim], w)?);
            params.insert(bias_name(i), Tensor::zeros(&[l.out_dim]));
        }
        Ok(ModelBundle { name: name.to_string(), layers, params, taps: BTreeMap::new(), noise_sigma: None, extras: BTreeMap::new() })
    }

    pub fn with_tap(mut self, tap: &str, layer: usize) -> Result<Self> {
        if layer >= self.layers.len() {
            return Err(Error::Model { model: self.name.clone(), reason: format!("tap '{tap}' on missing layer {layer}") });
        }
        if self.taps.insert(tap.to_string(), layer).is_some() {
            return Err(Error::Model { model: self.name.clone(), reason: format!("duplicate tap '{tap}'") });
        }
        Ok(self)
    }

    pub fn input_dim(&self) -> usize {
        self.layers.first().map_or(0, |l| l.in_dim)
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, |l| l.out_dim)
    }

    pub fn tap_width(&self, tap: &str) -> Result<usize> {
        self.taps
            .get(tap)
            .map(|&i| self.layers[i].out_dim)
            .ok_or_else(|| Error::Model { model: self.name.clone(), reason: format!("no tap '{tap}'") })
    }

    /// Checks that every layer has correctly shaped weight and bias tensors.
    pub fn validate(&self) -> Result<()> {
        validate_layers(&self.name, &self.layers)?;
        for (i, l) in self.layers.iter().enumerate() {
            for (key, shape) in [(weight_name(i), vec![l.in_dim, l.out_dim]), (bias_name(i), vec![l.out_dim])] {
                match self.params.get(&key) {
                    Some(t) if t.shape() == shape.as_slice() => {}
                    Some(t) => {
                        return Err(Error::Model {
                            model: self.name.clone(),
                            reason: format!("{key} has shape {:?}, expected {:?}", t.shape(), shape),
                        })
                    }
                    None => return Err(Error::Model { model: self.name.clone(), reason: format!("missing {key}") }),
                }
            }
        }
        for (tap, &i) in &self.taps {
            if i >= self.layers.len() {
                return Err(Error::Model { model: self.name.clone(), reason: format!("tap '{tap}' on missing layer {i}") });
            }
        }
        Ok(())
    }

    pub fn bind(&self, tape: &mut Tape, mode: ParamMode) -> BoundParams {
        let layers = (0..self.layers.len())
            .map(|i| {
                let w = self.params[&weight_name(i)].clone();
                let b = self.params[&bias_name(i)].clone();
                match mode {
                    ParamMode::Trainable => (tape.leaf(w), tape.leaf(b)),
                    ParamMode::Frozen => (tape.constant(w), tape.constant(b)),
                }
            })
            .collect();
        BoundParams { layers }
    }

    /// Parameter gradients keyed like `params`.
    pub fn collect_grads(&self, bound: &BoundParams, grads: &mut crate::autodiff::Gradients) -> BTreeMap<String, Tensor> {
        let mut out = BTreeMap::new();
        for (i, &(w, b)) in bound.layers.iter().enumerate() {
            out.insert(weight_name(i), grads.take(w));
            out.insert(bias_name(i), grads.take(b));
        }
        out
    }

    /// Runs the layer chain on a `[batch, in_dim]` input.
    pub fn forward_bound(&self, tape: &mut Tape, bound: &BoundParams, input: Var) -> Result<ForwardOutput> {
        self.forward_noisy(tape, bound, input, &BTreeMap::new())
    }

    /// Like [`forward_bound`](Self::forward_bound), adding `tap_noise[tap]` to a
    /// tapped layer output after the clean tap value has been recorded.
    pub fn forward_noisy(
        &self,
        tape: &mut Tape,
        bound: &BoundParams,
        input: Var,
        tap_noise: &BTreeMap<String, Tensor>,
    ) -> Result<ForwardOutput> {
        let in_shape = tape.value(input).shape().to_vec();
        if in_shape.len() != 2 || in_shape[1] != self.input_dim() {
            return Err(Error::Model {
                model: self.name.clone(),
                reason: format!("input shape {:?} does not match input dim {}", in_shape, self.input_dim()),
            });
        }
        let mut taps = BTreeMap::new();
        let mut h = input;
        for (i, (layer, &(w, b))) in self.layers.iter().zip(&bound.layers).enumerate() {
            let z = tape.matmul(h, w)?;
            let z = tape.add_bias(z, b)?;
            h = match layer.activation {
                Activation::Relu => tape.relu(z)?,
                Activation::Tanh => tape.tanh(z)?,
                Activation::Sigmoid => tape.sigmoid(z)?,
                Activation::Linear => z,
            };
            for (name, _) in self.taps.iter().filter(|(_, &l)| l == i) {
                taps.insert(name.clone(), h);
                if let Some(noise) = tap_noise.get(name) {
                    let n = tape.constant(noise.clone());
                    h = tape.add(h, n)?;
                }
            }
        }
        Ok(ForwardOutput { output: h, taps })
    }

    pub fn forward(&self, tape: &mut Tape, input: Var, mode: ParamMode) -> Result<(ForwardOutput, BoundParams)> {
        let bound = self.bind(tape, mode);
        let out = self.forward_bound(tape, &bound, input)?;
        Ok((out, bound))
    }

    /// Gradient-free evaluation on a `[batch, in_dim]` (or `[in_dim]`) input.
    pub fn predict(&self, x: &Tensor) -> Result<Tensor> {
        Ok(self.predict_taps(x)?.0)
    }

    /// Output plus every tap value.
    pub fn predict_taps(&self, x: &Tensor) -> Result<(Tensor, BTreeMap<String, Tensor>)> {
        let mut tape = Tape::new();
        let input = tape.constant(as_batch(x)?);
        let (out, _) = self.forward(&mut tape, input, ParamMode::Frozen)?;
        let taps = out.taps.iter().map(|(k, &v)| (k.clone(), tape.value(v).clone())).collect();
        Ok((tape.value(out.output).clone(), taps))
    }
}

/// Views a vector as a one-row batch; rank-2 tensors pass through.
pub fn as_batch(x: &Tensor) -> Result<Tensor> {
    match x.rank() {
        1 => x.reshape(vec![1, x.numel()]),
        2 => Ok(x.clone()),
        _ => Err(Error::InvalidShape { shape: x.shape().to_vec(), reason: "expected a vector or a batch".into() }),
    }
}
