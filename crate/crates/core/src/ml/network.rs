//! Dense feed-forward network with sigmoid activations on every layer.
//!
//! All parameters live in one flat vector. Layer `l` contributes its weight
//! matrix (row-major, `outputs x inputs`) followed by its bias.

use rand::Rng;
use rand::distr::{Distribution, Uniform};

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerShape {
    pub inputs: usize,
    pub outputs: usize,
}

impl LayerShape {
    pub fn parameter_count(&self) -> usize {
        self.outputs * (self.inputs + 1)
    }
}

/// Borrowed view of one layer.
#[derive(Debug, Clone, Copy)]
pub struct DenseLayer<'a> {
    pub shape: LayerShape,
    pub weights: &'a [f64],
    pub bias: &'a [f64],
}

/// Dot product with four independent partial sums.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

impl DenseLayer<'_> {
    /// `sigmoid(W x + b)` written into `out`.
    pub fn forward_into(&self, x: &[f64], out: &mut [f64]) {
        let n = self.shape.inputs;
        for (o, y) in out.iter_mut().enumerate() {
            let row = &self.weights[o * n..(o + 1) * n];
            *y = sigmoid(self.bias[o] + dot(row, x));
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    shapes: Vec<LayerShape>,
    params: Vec<f64>,
}

impl Network {
    fn shapes_for(widths: &[usize]) -> Vec<LayerShape> {
        assert!(widths.len() >= 2, "a network needs an input and an output width");
        widths
            .windows(2)
            .map(|w| LayerShape {
                inputs: w[0],
                outputs: w[1],
            })
            .collect()
    }

    pub fn zeros(widths: &[usize]) -> Self {
        let shapes = Self::shapes_for(widths);
        let n = shapes.iter().map(LayerShape::parameter_count).sum();
        Self {
            shapes,
            params: vec![0.0; n],
        }
    }

    /// Weights uniform in `[-r, r]` with `r = sqrt(6 / (inputs + outputs))`,
    /// biases zero.
    pub fn glorot_uniform<R: Rng + ?Sized>(widths: &[usize], rng: &mut R) -> Self {
        let mut net = Self::zeros(widths);
        let mut offset = 0;
        for shape in net.shapes.clone() {
            let r = (6.0 / (shape.inputs + shape.outputs) as f64).sqrt();
            let dist = Uniform::new_inclusive(-r, r).expect("finite bounds");
            let nw = shape.inputs * shape.outputs;
            for w in &mut net.params[offset..offset + nw] {
                *w = dist.sample(rng);
            }
            offset += shape.parameter_count();
        }
        net
    }

    /// Builds a network from per-layer weights and biases. `None` when the
    /// sizes do not chain.
    pub fn from_layers(layers: &[(LayerShape, Vec<f64>, Vec<f64>)]) -> Option<Self> {
        if layers.is_empty() {
            return None;
        }
        let mut shapes = Vec::with_capacity(layers.len());
        let mut params = Vec::new();
        for (i, (shape, w, b)) in layers.iter().enumerate() {
            if shape.inputs == 0
                || shape.outputs == 0
                || w.len() != shape.inputs * shape.outputs
                || b.len() != shape.outputs
                || (i > 0 && layers[i - 1].0.outputs != shape.inputs)
            {
                return None;
            }
            shapes.push(*shape);
            params.extend_from_slice(w);
            params.extend_from_slice(b);
        }
        Some(Self { shapes, params })
    }

    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.shapes[0].inputs];
        w.extend(self.shapes.iter().map(|s| s.outputs));
        w
    }

    pub fn shapes(&self) -> &[LayerShape] {
        &self.shapes
    }

    pub fn parameter_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn layers(&self) -> impl Iterator<Item = DenseLayer<'_>> {
        let mut offset = 0;
        self.shapes.iter().map(move |&shape| {
            let nw = shape.inputs * shape.outputs;
            let layer = DenseLayer {
                shape,
                weights: &self.params[offset..offset + nw],
                bias: &self.params[offset + nw..offset + shape.parameter_count()],
            };
            offset += shape.parameter_count();
            layer
        })
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        let mut acts = Activations::default();
        self.forward_all(x, &mut acts);
        acts.output().to_vec()
    }

    /// Stores the input and the activation of every layer in `acts`.
    pub fn forward_all(&self, x: &[f64], acts: &mut Activations) {
        debug_assert_eq!(x.len(), self.shapes[0].inputs);
        acts.offsets.clear();
        acts.values.clear();
        acts.offsets.push(0);
        acts.values.extend_from_slice(x);
        for layer in self.layers() {
            let start = acts.values.len();
            acts.offsets.push(start);
            acts.values.resize(start + layer.shape.outputs, 0.0);
            let (prev, out) = acts.values.split_at_mut(start);
            layer.forward_into(&prev[acts.offsets[acts.offsets.len() - 2]..], out);
        }
        acts.offsets.push(acts.values.len());
    }

    /// Adds `d(out_grad . output)/d(params)` to `grad`, given the activations
    /// of a forward pass. `scratch` is reused between calls.
    pub fn backward(&self, acts: &Activations, out_grad: &[f64], grad: &mut [f64], scratch: &mut Scratch) {
        debug_assert_eq!(acts.layer_count(), self.shapes.len() + 1);
        debug_assert_eq!(grad.len(), self.params.len());
        let Scratch { delta, prev } = scratch;
        delta.clear();
        delta.extend(out_grad.iter().zip(acts.output()).map(|(g, a)| g * a * (1.0 - a)));
        let mut end = self.params.len();
        for (l, shape) in self.shapes.iter().enumerate().rev() {
            let start = end - shape.parameter_count();
            let nw = shape.inputs * shape.outputs;
            let input = acts.layer(l);
            let (gw, gb) = grad[start..end].split_at_mut(nw);
            for (o, d) in delta.iter().enumerate() {
                gb[o] += d;
                let row = &mut gw[o * shape.inputs..(o + 1) * shape.inputs];
                for (g, a) in row.iter_mut().zip(input) {
                    *g += d * a;
                }
            }
            if l > 0 {
                let w = &self.params[start..start + nw];
                prev.clear();
                prev.resize(shape.inputs, 0.0);
                for (o, d) in delta.iter().enumerate() {
                    let row = &w[o * shape.inputs..(o + 1) * shape.inputs];
                    for (p, wi) in prev.iter_mut().zip(row) {
                        *p += wi * d;
                    }
                }
                for (p, a) in prev.iter_mut().zip(input) {
                    *p *= a * (1.0 - a);
                }
                std::mem::swap(delta, prev);
            }
            end = start;
        }
    }
}

/// Input and layer outputs of one forward pass, stored contiguously.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Activations {
    values: Vec<f64>,
    offsets: Vec<usize>,
}

impl Activations {
    /// Number of stored vectors (input included).
    pub fn layer_count(&self) -> usize {
        self.offsets.len().saturating_sub(1)
    }

    /// Vector `l`; 0 is the input.
    pub fn layer(&self, l: usize) -> &[f64] {
        &self.values[self.offsets[l]..self.offsets[l + 1]]
    }

    pub fn output(&self) -> &[f64] {
        self.layer(self.layer_count() - 1)
    }
}

/// Buffers for [`Network::backward`].
#[derive(Debug, Clone, Default)]
pub struct Scratch {
    delta: Vec<f64>,
    prev: Vec<f64>,
}
