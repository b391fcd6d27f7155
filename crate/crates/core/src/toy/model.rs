use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::task::SampleRecord;
use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};

/// Which parameters count as learnable (φ).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamScope {
    /// Only the output layer.
    #[default]
    Last,
    All,
}

impl std::str::FromStr for ParamScope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "last" => Ok(ParamScope::Last),
            "all" => Ok(ParamScope::All),
            other => Err(Error::InvalidConfig(format!(
                "unknown parameter scope {other:?}"
            ))),
        }
    }
}

/// Dense layer, weights stored row-major as `outputs × inputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub learnable: bool,
}

impl Layer {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
            learnable: false,
        }
    }

    fn affine(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            self.weights
                .chunks_exact(self.inputs)
                .zip(&self.bias)
                .map(|(row, b)| row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b),
        );
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

/// Gradient of one layer, same layout as the layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Feed-forward classifier: tanh hidden layers, softmax output, cross-entropy loss.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyModel {
    pub layers: Vec<Layer>,
    pub family: String,
}

/// Small family member: one hidden layer of 16.
pub const SMALL_HIDDEN: &[usize] = &[16];
/// Target family member: hidden layers of 64 and 32.
pub const TARGET_HIDDEN: &[usize] = &[64, 32];

impl ToyModel {
    /// Builds a model with layer widths `dims` (input first, classes last).
    /// Weights are drawn from `N(0, 1/fan_in)`, biases start at zero.
    pub fn new(dims: &[usize], family: impl Into<String>, seed: u64) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(Error::InvalidConfig(format!("bad layer dims {dims:?}")));
        }
        let mut rng = stream(seed, Purpose::Init, dims.len() as u32);
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for pair in dims.windows(2) {
            let mut layer = Layer::zeros(pair[0], pair[1]);
            let scale = (1.0 / pair[0] as f64).sqrt();
            for w in &mut layer.weights {
                let z: f64 = StandardNormal.sample(&mut rng);
                *w = z * scale;
            }
            layers.push(layer);
        }
        let mut model = Self {
            layers,
            family: family.into(),
        };
        model.set_scope(ParamScope::Last);
        Ok(model)
    }

    pub fn small(input_dim: usize, classes: usize, family: &str, seed: u64) -> Result<Self> {
        Self::new(&dims_with(input_dim, SMALL_HIDDEN, classes), family, seed)
    }

    pub fn target(input_dim: usize, classes: usize, family: &str, seed: u64) -> Result<Self> {
        Self::new(&dims_with(input_dim, TARGET_HIDDEN, classes), family, seed)
    }

    /// Rebuilds a model from already-validated parts.
    pub(crate) fn from_layers(layers: Vec<Layer>, family: String) -> Self {
        Self { layers, family }
    }

    pub fn set_scope(&mut self, scope: ParamScope) {
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter_mut().enumerate() {
            layer.learnable = scope == ParamScope::All || i == last;
        }
    }

    pub fn with_scope(mut self, scope: ParamScope) -> Self {
        self.set_scope(scope);
        self
    }

    pub fn layer_dims(&self) -> Vec<usize> {
        let mut dims = vec![self.layers[0].inputs];
        dims.extend(self.layers.iter().map(|l| l.outputs));
        dims
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn classes(&self) -> usize {
        self.layers.last().map(|l| l.outputs).unwrap_or(0)
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    pub fn learnable_param_count(&self) -> usize {
        self.layers
            .iter()
            .filter(|l| l.learnable)
            .map(Layer::param_count)
            .sum()
    }

    /// Multiply-adds in one forward pass.
    pub fn forward_flops(&self) -> usize {
        self.layers.iter().map(|l| 2 * l.inputs * l.outputs).sum()
    }

    fn check_sample(&self, sample: &SampleRecord) -> Result<()> {
        if sample.features.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                actual: sample.features.len(),
            });
        }
        if sample.label >= self.classes() {
            return Err(Error::DimensionMismatch {
                expected: self.classes(),
                actual: sample.label + 1,
            });
        }
        Ok(())
    }

    /// Activations of every layer; the last entry holds the raw logits.
    fn activations(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = Vec::with_capacity(layer.outputs);
            layer.affine(&acts[i], &mut z);
            if i != last {
                z.iter_mut().for_each(|v| *v = v.tanh());
            }
            acts.push(z);
        }
        acts
    }

    /// Class probabilities for one input.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                actual: x.len(),
            });
        }
        let logits = self.activations(x).pop().expect("at least one layer");
        Ok(softmax(&logits))
    }

    /// Cross-entropy loss of one sample.
    pub fn loss(&self, sample: &SampleRecord) -> Result<f64> {
        self.check_sample(sample)?;
        let logits = self
            .activations(&sample.features)
            .pop()
            .expect("at least one layer");
        Ok(cross_entropy(&logits, sample.label))
    }

    /// Loss and gradient for one sample. Layers outside `scope` get no entry
    /// (`None`), and backpropagation stops once no earlier layer needs it.
    pub fn loss_and_grad(
        &self,
        sample: &SampleRecord,
        only_learnable: bool,
    ) -> Result<(f64, Vec<Option<LayerGrad>>)> {
        self.check_sample(sample)?;
        let acts = self.activations(&sample.features);
        let logits = acts.last().expect("at least one layer");
        let loss = cross_entropy(logits, sample.label);

        let wanted: Vec<bool> = self
            .layers
            .iter()
            .map(|l| l.learnable || !only_learnable)
            .collect();
        let first_wanted = wanted.iter().position(|&w| w).unwrap_or(self.layers.len());

        let mut delta = softmax(logits);
        delta[sample.label] -= 1.0;

        let mut grads: Vec<Option<LayerGrad>> = vec![None; self.layers.len()];
        for li in (first_wanted..self.layers.len()).rev() {
            let layer = &self.layers[li];
            let input = &acts[li];
            if wanted[li] {
                let mut gw = Vec::with_capacity(layer.weights.len());
                for d in &delta {
                    gw.extend(input.iter().map(|a| d * a));
                }
                grads[li] = Some(LayerGrad {
                    weights: gw,
                    bias: delta.clone(),
                });
            }
            if li > first_wanted {
                // input is tanh output of the previous layer
                let mut prev = vec![0.0; layer.inputs];
                for (row, d) in layer.weights.chunks_exact(layer.inputs).zip(&delta) {
                    for (p, w) in prev.iter_mut().zip(row) {
                        *p += w * d;
                    }
                }
                for (p, a) in prev.iter_mut().zip(input) {
                    *p *= 1.0 - a * a;
                }
                delta = prev;
            }
        }
        Ok((loss, grads))
    }

    /// Flattened gradient over the learnable layers, in layer order
    /// (weights row-major, then bias).
    pub fn learnable_gradient(&self, sample: &SampleRecord) -> Result<Vec<f64>> {
        let (_, grads) = self.loss_and_grad(sample, true)?;
        Ok(flatten(grads))
    }

    /// Flattened learnable parameters, same layout as [`Self::learnable_gradient`].
    pub fn learnable_params(&self) -> Vec<f64> {
        self.layers
            .iter()
            .filter(|l| l.learnable)
            .flat_map(|l| l.weights.iter().chain(&l.bias).copied())
            .collect()
    }

    /// Overwrites the learnable parameters from a flat vector.
    pub fn set_learnable_params(&mut self, flat: &[f64]) -> Result<()> {
        let expected = self.learnable_param_count();
        if flat.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: flat.len(),
            });
        }
        let mut it = flat.iter().copied();
        for layer in self.layers.iter_mut().filter(|l| l.learnable) {
            for w in layer.weights.iter_mut().chain(layer.bias.iter_mut()) {
                *w = it.next().expect("length checked");
            }
        }
        Ok(())
    }

    /// Fraction of `samples` classified correctly and their mean loss.
    pub fn evaluate(&self, samples: &[SampleRecord]) -> Result<(f64, f64)> {
        if samples.is_empty() {
            return Ok((0.0, 0.0));
        }
        let mut correct = 0usize;
        let mut loss = 0.0;
        for s in samples {
            self.check_sample(s)?;
            let logits = self
                .activations(&s.features)
                .pop()
                .expect("at least one layer");
            loss += cross_entropy(&logits, s.label);
            let argmax = logits
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .map(|(i, _)| i)
                .unwrap_or(0);
            correct += usize::from(argmax == s.label);
        }
        let n = samples.len() as f64;
        Ok((correct as f64 / n, loss / n))
    }
}

pub(crate) fn flatten(grads: Vec<Option<LayerGrad>>) -> Vec<f64> {
    grads
        .into_iter()
        .flatten()
        .flat_map(|g| g.weights.into_iter().chain(g.bias))
        .collect()
}

fn dims_with(input: usize, hidden: &[usize], classes: usize) -> Vec<usize> {
    let mut d = vec![input];
    d.extend_from_slice(hidden);
    d.push(classes);
    d
}

/// Numerically stable softmax (max subtracted before exponentiating).
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

fn cross_entropy(logits: &[f64], label: usize) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    // lse >= logits[label] analytically; clamp rounding noise but keep NaN visible
    let loss = lse - logits[label];
    if loss < 0.0 {
        0.0
    } else {
        loss
    }
}
