//! Sector embeddings decoded into circuit weights by a small shared MLP.
//!
//! Every replica-tree sector owns an embedding of length `h`. A single decoder
//! maps an embedding to `width * max(width, leaves)` outputs; a sector of shape
//! `rows × cols` takes the first `rows * cols` of them as row-major logits and
//! normalizes each row. The top replica mixture has its own free logits.

use crate::circuit::{CircuitStructure, SectorProvider, StructureConfig, WeightStore};
use crate::math::softmax_in_place;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::borrow::Cow;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum HyperError {
    #[error("embedding dimension must be at least 1")]
    ZeroEmbedding,
    #[error("decoder width and depth must be at least 1")]
    EmptyDecoder,
    #[error("expected {expected} parameters, got {actual}")]
    Length { expected: usize, actual: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Activation {
    #[default]
    Tanh,
    Sigmoid,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => 1.0 / (1.0 + (-x).exp()),
        }
    }

    /// Derivative expressed through the activation's output.
    #[inline]
    fn slope(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Sigmoid => y * (1.0 - y),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecoderConfig {
    pub width: usize,
    /// Number of hidden layers.
    pub depth: usize,
    pub activation: Activation,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        Self {
            width: 20,
            depth: 2,
            activation: Activation::Tanh,
        }
    }
}

/// Fully connected layer, `weights` is `outputs × inputs` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    fn apply(&self, input: &[f64], out: &mut [f64]) {
        for (o, (row, b)) in out
            .iter_mut()
            .zip(self.weights.chunks_exact(self.inputs).zip(&self.bias))
        {
            *o = b + row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>();
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decoder {
    pub layers: Vec<Dense>,
    pub activation: Activation,
}

impl Decoder {
    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Dense::param_count).sum()
    }

    pub fn output_len(&self) -> usize {
        self.layers.last().map_or(0, |l| l.outputs)
    }

    /// Activations of every layer, input first and raw output last.
    fn trace(&self, input: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(input.to_vec());
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut out = vec![0.0; layer.outputs];
            layer.apply(acts.last().unwrap(), &mut out);
            if i != last {
                for v in out.iter_mut() {
                    *v = self.activation.apply(*v);
                }
            }
            acts.push(out);
        }
        acts
    }

    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        self.trace(input).pop().unwrap()
    }

    /// Accumulates parameter gradients (flat, layer by layer, weights then
    /// bias) and returns the gradient with respect to the input.
    fn backward(&self, acts: &[Vec<f64>], out_grad: &[f64], grad: &mut [f64]) -> Vec<f64> {
        let offsets: Vec<usize> = self
            .layers
            .iter()
            .scan(0, |acc, l| {
                let start = *acc;
                *acc += l.param_count();
                Some(start)
            })
            .collect();
        let mut delta = out_grad.to_vec();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let input = &acts[i];
            let (w_grad, b_grad) = grad[offsets[i]..offsets[i] + layer.param_count()]
                .split_at_mut(layer.weights.len());
            let mut prev = vec![0.0; layer.inputs];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                b_grad[o] += d;
                let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                let g_row = &mut w_grad[o * layer.inputs..(o + 1) * layer.inputs];
                for j in 0..layer.inputs {
                    g_row[j] += d * input[j];
                    prev[j] += d * row[j];
                }
            }
            if i > 0 {
                for (p, &a) in prev.iter_mut().zip(input) {
                    *p *= self.activation.slope(a);
                }
            }
            delta = prev;
        }
        delta
    }
}

/// Trainable state of a hypernetwork-parameterized circuit.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperParams {
    pub embed_dim: usize,
    /// One row of length `embed_dim` per replica-tree sector, in sector order.
    pub embeddings: Vec<f64>,
    pub decoder: Decoder,
    pub top_logits: Vec<f64>,
}

impl HyperParams {
    pub fn embedding(&self, sector: usize) -> &[f64] {
        &self.embeddings[sector * self.embed_dim..(sector + 1) * self.embed_dim]
    }

    pub fn embedding_count(&self) -> usize {
        self.embeddings.len() / self.embed_dim
    }

    pub fn decoder_config(&self) -> DecoderConfig {
        DecoderConfig {
            width: self.decoder.layers[0].outputs,
            depth: self.decoder.layers.len() - 1,
            activation: self.decoder.activation,
        }
    }

    pub fn param_count(&self) -> usize {
        self.embeddings.len() + self.decoder.param_count() + self.top_logits.len()
    }

    /// All trainables: embeddings, decoder layers (weights then bias), top logits.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        out.extend_from_slice(&self.embeddings);
        for layer in &self.decoder.layers {
            out.extend_from_slice(&layer.weights);
            out.extend_from_slice(&layer.bias);
        }
        out.extend_from_slice(&self.top_logits);
        out
    }

    /// Inverse of [`HyperParams::to_flat`].
    pub fn load_flat(&mut self, flat: &[f64]) -> Result<(), HyperError> {
        if flat.len() != self.param_count() {
            return Err(HyperError::Length {
                expected: self.param_count(),
                actual: flat.len(),
            });
        }
        let mut rest = flat;
        let mut take = |dst: &mut Vec<f64>| {
            let (head, tail) = rest.split_at(dst.len());
            dst.copy_from_slice(head);
            rest = tail;
        };
        take(&mut self.embeddings);
        for layer in &mut self.decoder.layers {
            take(&mut layer.weights);
            take(&mut layer.bias);
        }
        take(&mut self.top_logits);
        Ok(())
    }

    /// Raw (unnormalized) logits of one sector.
    pub fn sector_logits(&self, structure: &CircuitStructure, sector: usize) -> Vec<f64> {
        if sector == structure.top_sector_id() {
            return self.top_logits.clone();
        }
        let len = structure.sector(sector).len();
        let mut out = self.decoder.forward(self.embedding(sector));
        out.truncate(len);
        out
    }

    /// Logits of every sector laid out like a [`WeightStore`].
    pub fn all_logits(&self, structure: &CircuitStructure) -> Vec<f64> {
        let mut logits = Vec::with_capacity(structure.param_count());
        for id in 0..structure.sectors().len() {
            logits.extend(self.sector_logits(structure, id));
        }
        logits
    }

    /// Pulls a gradient over all sector logits back onto the trainables,
    /// returned in [`HyperParams::to_flat`] order.
    pub fn pullback(&self, structure: &CircuitStructure, logit_grad: &[f64]) -> Vec<f64> {
        let mut grad = vec![0.0; self.param_count()];
        let emb_len = self.embeddings.len();
        let dec_len = self.decoder.param_count();
        let (emb_grad, rest) = grad.split_at_mut(emb_len);
        let (dec_grad, top_grad) = rest.split_at_mut(dec_len);
        let mut out_grad = vec![0.0; self.decoder.output_len()];
        for id in 0..structure.tree_sector_count() {
            let sector = structure.sector(id);
            let g = &logit_grad[sector.range()];
            if g.iter().all(|&v| v == 0.0) {
                continue;
            }
            out_grad.fill(0.0);
            out_grad[..g.len()].copy_from_slice(g);
            let acts = self.decoder.trace(self.embedding(id));
            let input_grad = self.decoder.backward(&acts, &out_grad, dec_grad);
            for (a, b) in emb_grad[id * self.embed_dim..(id + 1) * self.embed_dim]
                .iter_mut()
                .zip(&input_grad)
            {
                *a += b;
            }
        }
        top_grad.copy_from_slice(&logit_grad[structure.top_sector().range()]);
        grad
    }
}

pub fn init_hyper(
    structure: &CircuitStructure,
    embed_dim: usize,
    config: DecoderConfig,
    seed: u64,
) -> Result<HyperParams, HyperError> {
    if embed_dim == 0 {
        return Err(HyperError::ZeroEmbedding);
    }
    if config.width == 0 || config.depth == 0 {
        return Err(HyperError::EmptyDecoder);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = |scale: f64, len: usize| -> Vec<f64> {
        let dist = Normal::new(0.0, scale).expect("positive scale");
        (0..len).map(|_| dist.sample(&mut rng)).collect()
    };

    // An embedding lookup is a layer with a one-hot input, so fan-in is 1.
    let embeddings = normal(1.0, structure.tree_sector_count() * embed_dim);
    let mut sizes = vec![embed_dim];
    sizes.extend(std::iter::repeat_n(config.width, config.depth));
    sizes.push(structure.max_sector_len());
    let layers = sizes
        .windows(2)
        .map(|pair| {
            let (inputs, outputs) = (pair[0], pair[1]);
            Dense {
                inputs,
                outputs,
                weights: normal(1.0 / (inputs as f64).sqrt(), inputs * outputs),
                bias: vec![0.0; outputs],
            }
        })
        .collect();
    Ok(HyperParams {
        embed_dim,
        embeddings,
        decoder: Decoder {
            layers,
            activation: config.activation,
        },
        top_logits: vec![0.0; structure.replicas().len()],
    })
}

/// Normalized weights of a single sector.
pub fn materialize_sector(
    hyper: &HyperParams,
    structure: &CircuitStructure,
    sector: usize,
) -> Vec<f64> {
    let cols = structure.sector(sector).cols;
    let mut weights = hyper.sector_logits(structure, sector);
    for row in weights.chunks_exact_mut(cols) {
        softmax_in_place(row);
    }
    weights
}

pub fn materialize_all(hyper: &HyperParams, structure: &CircuitStructure) -> WeightStore {
    WeightStore::from_logits(structure, &hyper.all_logits(structure))
        .expect("decoder covers every sector")
}

/// `r(2n-1)h` embedding entries plus decoder weights and biases plus `r` top logits.
pub fn hyper_param_count(
    config: &StructureConfig,
    embed_dim: usize,
    decoder: &DecoderConfig,
) -> usize {
    let sectors = config.replicas * (2 * config.vars - 1);
    let out = config.width * config.width.max(config.leaves);
    let mut sizes = vec![embed_dim];
    sizes.extend(std::iter::repeat_n(decoder.width, decoder.depth));
    sizes.push(out);
    let dense: usize = sizes.windows(2).map(|p| p[0] * p[1] + p[1]).sum();
    sectors * embed_dim + dense + config.replicas
}

impl SectorProvider for HyperParams {
    fn sector_weights(
        &self,
        structure: &CircuitStructure,
        sector: usize,
    ) -> Result<Cow<'_, [f64]>, Box<dyn std::error::Error + Send + Sync>> {
        if sector >= structure.sectors().len() {
            return Err(format!("sector {sector} out of range").into());
        }
        Ok(Cow::Owned(materialize_sector(self, structure, sector)))
    }
}
