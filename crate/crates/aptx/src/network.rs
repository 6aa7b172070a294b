//! Feedforward classifier built from the unified neuron layers plus a
//! conventional linear output layer, with softmax cross-entropy loss
//! and binary checkpointing.
//!
//! There is no separate activation between layers: each neuron layer is
//! its own non-linearity.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use num_traits::Float;

use crate::aptx::{
    aptx_backward, aptx_forward, init_aptx, trainable_count, AptxCache, AptxLayerParams,
    LayerGradients, SharingMode,
};
use crate::error::{Error, Result};
use crate::tensor::{rng_uniform, Matrix, Rng};

const CHECKPOINT_MAGIC: &[u8; 4] = b"APTX";
const CHECKPOINT_VERSION: u32 = 1;

/// Plain fully-connected layer: `y = x W^T + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearLayerParams<F: Float> {
    pub weights: Matrix<F>,
    pub bias: Matrix<F>,
}

impl<F: Float> LinearLayerParams<F> {
    pub fn trainable_count(&self) -> usize {
        let out = self.weights.rows();
        out * (self.weights.cols() + 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network<F: Float> {
    pub aptx_layers: Vec<AptxLayerParams<F>>,
    pub output_layer: LinearLayerParams<F>,
    /// Layer widths, input first, class count last.
    pub architecture: Vec<usize>,
    pub mode: SharingMode,
}

/// Per-layer state saved by [`forward`] for the backward pass.
pub struct NetworkCaches<F: Float> {
    /// Input to each layer, in order (aptx layers then output layer).
    layer_inputs: Vec<Matrix<F>>,
    aptx_caches: Vec<AptxCache<F>>,
}

pub struct NetworkGradients<F: Float> {
    pub aptx: Vec<LayerGradients<F>>,
    pub d_weights: Matrix<F>,
    pub d_bias: Matrix<F>,
}

/// Fresh network for a `widths` chain like `[784, 128, 64, 32, 10]`:
/// every adjacent pair but the last becomes a neuron layer, the last a
/// linear output layer.
pub fn init_network<F: Float>(rng: &mut Rng, widths: &[usize], mode: SharingMode) -> Result<Network<F>> {
    if widths.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "architecture needs at least input and output widths, got {widths:?}"
        )));
    }
    if widths.iter().any(|&w| w == 0) {
        return Err(Error::InvalidArgument(format!(
            "architecture widths must be positive, got {widths:?}"
        )));
    }
    let mut aptx_layers = Vec::new();
    for pair in widths[..widths.len() - 1].windows(2) {
        aptx_layers.push(init_aptx(rng, pair[0], pair[1], mode)?);
    }
    let (lin_in, lin_out) = (widths[widths.len() - 2], widths[widths.len() - 1]);
    let k = 1.0 / (lin_in as f64).sqrt();
    let output_layer = LinearLayerParams {
        weights: rng_uniform(rng, -k, k, lin_out, lin_in)?,
        bias: Matrix::zeros(lin_out, 1),
    };
    Ok(Network {
        aptx_layers,
        output_layer,
        architecture: widths.to_vec(),
        mode,
    })
}

/// Forward pass over a batch; returns logits and the caches the
/// backward pass needs.
pub fn forward<F: Float>(net: &Network<F>, batch: &Matrix<F>) -> Result<(Matrix<F>, NetworkCaches<F>)> {
    if batch.cols() != net.architecture[0] {
        return Err(Error::Shape {
            context: "network forward input",
            left_rows: batch.rows(),
            left_cols: batch.cols(),
            right_rows: 1,
            right_cols: net.architecture[0],
        });
    }
    let mut layer_inputs = Vec::with_capacity(net.aptx_layers.len() + 1);
    let mut aptx_caches = Vec::with_capacity(net.aptx_layers.len());
    let mut current = batch.clone();
    for layer in &net.aptx_layers {
        let (out, cache) = aptx_forward(layer, &current)?;
        layer_inputs.push(current);
        aptx_caches.push(cache);
        current = out;
    }
    let logits = linear_forward(&net.output_layer, &current)?;
    layer_inputs.push(current);
    Ok((
        logits,
        NetworkCaches {
            layer_inputs,
            aptx_caches,
        },
    ))
}

fn linear_forward<F: Float>(layer: &LinearLayerParams<F>, input: &Matrix<F>) -> Result<Matrix<F>> {
    let wt = layer.weights.transpose();
    let mut out = input.matmul(&wt)?;
    for r in 0..out.rows() {
        for c in 0..out.cols() {
            out.set(r, c, out.get(r, c) + layer.bias.get(c, 0));
        }
    }
    Ok(out)
}

/// Numerically-stable (max-subtracted) softmax plus mean cross-entropy.
/// Returns the loss and the logit gradient `(softmax - onehot) / batch`.
pub fn softmax_cross_entropy<F: Float>(logits: &Matrix<F>, labels: &[usize]) -> Result<(F, Matrix<F>)> {
    let batch = logits.rows();
    let classes = logits.cols();
    if labels.len() != batch {
        return Err(Error::InvalidArgument(format!(
            "{} labels for a batch of {batch}",
            labels.len()
        )));
    }
    let mut d_logits = Matrix::zeros(batch, classes);
    let inv_batch = F::one() / F::from(batch).unwrap();
    let mut loss = F::zero();
    for b in 0..batch {
        let label = labels[b];
        if label >= classes {
            return Err(Error::LabelOutOfRange {
                label,
                max: classes - 1,
            });
        }
        let row = logits.row(b);
        let max = row.iter().cloned().fold(F::neg_infinity(), F::max);
        let mut sum = F::zero();
        for c in 0..classes {
            let e = (row[c] - max).exp();
            d_logits.set(b, c, e);
            sum = sum + e;
        }
        for c in 0..classes {
            let p = d_logits.get(b, c) / sum;
            let target = if c == label { F::one() } else { F::zero() };
            d_logits.set(b, c, (p - target) * inv_batch);
        }
        // -log p[label] = max + log(sum) - logit[label]
        loss = loss + max + sum.ln() - row[label];
    }
    Ok((loss * inv_batch, d_logits))
}

/// Reverse pass through the whole network given the logit gradient.
pub fn backward<F: Float>(
    net: &Network<F>,
    caches: &NetworkCaches<F>,
    d_logits: &Matrix<F>,
) -> Result<NetworkGradients<F>> {
    if caches.layer_inputs.len() != net.aptx_layers.len() + 1 {
        return Err(Error::InvalidArgument(
            "caches do not match this network".into(),
        ));
    }
    let linear_input = caches.layer_inputs.last().unwrap();
    // d_W = upstream^T x, d_b = column sums, d_x = upstream W
    let d_weights = d_logits.transpose().matmul(linear_input)?;
    let mut d_bias = Matrix::zeros(net.output_layer.bias.rows(), 1);
    for r in 0..d_logits.rows() {
        for c in 0..d_logits.cols() {
            d_bias.set(c, 0, d_bias.get(c, 0) + d_logits.get(r, c));
        }
    }
    let mut upstream = d_logits.matmul(&net.output_layer.weights)?;

    let mut aptx = Vec::with_capacity(net.aptx_layers.len());
    for (idx, layer) in net.aptx_layers.iter().enumerate().rev() {
        let grads = aptx_backward(
            layer,
            &caches.aptx_caches[idx],
            &caches.layer_inputs[idx],
            &upstream,
        )?;
        upstream = grads.d_input.clone();
        aptx.push(grads);
    }
    aptx.reverse();
    Ok(NetworkGradients {
        aptx,
        d_weights,
        d_bias,
    })
}

/// Total trainable parameters across all layers.
pub fn total_parameters<F: Float>(net: &Network<F>) -> usize {
    net.aptx_layers
        .iter()
        .map(trainable_count)
        .sum::<usize>()
        + net.output_layer.trainable_count()
}

/// Argmax of the logits per row; ties break toward the lowest class.
pub fn predict<F: Float>(net: &Network<F>, batch: &Matrix<F>) -> Result<Vec<usize>> {
    let (logits, _) = forward(net, batch)?;
    Ok(argmax_rows(&logits))
}

pub fn argmax_rows<F: Float>(logits: &Matrix<F>) -> Vec<usize> {
    (0..logits.rows())
        .map(|r| {
            let row = logits.row(r);
            let mut best = 0;
            for (c, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = c;
                }
            }
            best
        })
        .collect()
}

fn mode_tag(mode: SharingMode) -> u8 {
    match mode {
        SharingMode::PerInput => 0,
        SharingMode::FullShared => 1,
        SharingMode::HybridAlphaFixed => 2,
    }
}

fn mode_from_tag(tag: u8) -> Result<SharingMode> {
    match tag {
        0 => Ok(SharingMode::PerInput),
        1 => Ok(SharingMode::FullShared),
        2 => Ok(SharingMode::HybridAlphaFixed),
        other => Err(Error::Checkpoint(format!("unknown sharing-mode tag {other}"))),
    }
}

/// Little-endian binary checkpoint: "APTX" magic, version, mode tag,
/// architecture widths, then every parameter block as f32 row-major in
/// declared layer order. Round-trips bit-exactly.
pub fn save_checkpoint(net: &Network<f32>, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_u32::<LittleEndian>(CHECKPOINT_VERSION)?;
    w.write_u8(mode_tag(net.mode))?;
    w.write_u32::<LittleEndian>(net.architecture.len() as u32)?;
    for &width in &net.architecture {
        w.write_u32::<LittleEndian>(width as u32)?;
    }
    for layer in &net.aptx_layers {
        for block in [&layer.alpha, &layer.beta, &layer.gamma, &layer.delta] {
            for &v in block.data() {
                w.write_f32::<LittleEndian>(v)?;
            }
        }
    }
    for block in [&net.output_layer.weights, &net.output_layer.bias] {
        for &v in block.data() {
            w.write_f32::<LittleEndian>(v)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Network<f32>> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| Error::Checkpoint("file too short for magic".into()))?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint(format!(
            "bad magic {magic:?}, expected {CHECKPOINT_MAGIC:?}"
        )));
    }
    let version = r.read_u32::<LittleEndian>()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported version {version}, expected {CHECKPOINT_VERSION}"
        )));
    }
    let mode = mode_from_tag(r.read_u8()?)?;
    let arch_len = r.read_u32::<LittleEndian>()? as usize;
    if arch_len < 2 {
        return Err(Error::Checkpoint(format!(
            "architecture must have at least 2 widths, header says {arch_len}"
        )));
    }
    let mut architecture = Vec::with_capacity(arch_len);
    for _ in 0..arch_len {
        let w = r.read_u32::<LittleEndian>()? as usize;
        if w == 0 {
            return Err(Error::Checkpoint("zero layer width in header".into()));
        }
        architecture.push(w);
    }

    // Build an empty net with the right shapes, then fill the payload.
    let mut rng = Rng::new(0);
    let mut net: Network<f32> = init_network(&mut rng, &architecture, mode)?;
    let expected: usize = net
        .aptx_layers
        .iter()
        .map(|l| {
            l.alpha.data().len() + l.beta.data().len() + l.gamma.data().len() + l.delta.data().len()
        })
        .sum::<usize>()
        + net.output_layer.weights.data().len()
        + net.output_layer.bias.data().len();

    let mut payload = Vec::new();
    r.read_to_end(&mut payload)?;
    if payload.len() != expected * 4 {
        return Err(Error::Checkpoint(format!(
            "payload is {} bytes, architecture {architecture:?} requires {}",
            payload.len(),
            expected * 4
        )));
    }
    let mut values = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]));
    for layer in &mut net.aptx_layers {
        for block in [
            &mut layer.alpha,
            &mut layer.beta,
            &mut layer.gamma,
            &mut layer.delta,
        ] {
            for v in block.data_mut() {
                *v = values.next().unwrap();
            }
        }
    }
    for block in [&mut net.output_layer.weights, &mut net.output_layer.bias] {
        for v in block.data_mut() {
            *v = values.next().unwrap();
        }
    }
    Ok(net)
}
