//! The experiment loop: shuffle, batch, forward, loss, backward, Adam,
//! step-decay schedule, per-epoch test evaluation, and CSV metrics.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::aptx::SharingMode;
use crate::error::{Error, Result};
use crate::mnist::{epoch_batches, Dataset};
use crate::network::{
    argmax_rows, backward, forward, init_network, softmax_cross_entropy, Network, NetworkGradients,
};
use crate::optim::{adam_step, lr_at_epoch, AdamState, StepLrSchedule};
use crate::tensor::Rng;

/// Everything the training experiment needs. Defaults reproduce the
/// published MNIST recipe.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub arch: Vec<usize>,
    pub mode: SharingMode,
    pub epochs: u32,
    pub base_lr: f64,
    pub step_size: u32,
    pub decay: f64,
    pub train_batch: usize,
    pub test_batch: usize,
    pub seed: u64,
    pub standardize: bool,
    pub data_dir: PathBuf,
    pub out_csv: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            arch: vec![784, 128, 64, 32, 10],
            mode: SharingMode::PerInput,
            epochs: 20,
            base_lr: 4e-3,
            step_size: 5,
            decay: 0.25,
            train_batch: 64,
            test_batch: 1000,
            seed: 42,
            standardize: false,
            data_dir: PathBuf::from("data"),
            out_csv: None,
            checkpoint: None,
        }
    }
}

/// One CSV/log row.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochMetrics {
    pub epoch: u32,
    pub train_loss: f64,
    pub test_loss: f64,
    pub train_acc: f64,
    pub test_acc: f64,
    pub lr: f64,
}

/// Adam state for every parameter block of the network, in a fixed
/// order mirroring the layer order.
struct Optimizer {
    aptx: Vec<[AdamState<f32>; 4]>,
    output: [AdamState<f32>; 2],
}

impl Optimizer {
    fn new(net: &Network<f32>) -> Self {
        let aptx = net
            .aptx_layers
            .iter()
            .map(|l| {
                [
                    AdamState::like(&l.alpha),
                    AdamState::like(&l.beta),
                    AdamState::like(&l.gamma),
                    AdamState::like(&l.delta),
                ]
            })
            .collect();
        let output = [
            AdamState::like(&net.output_layer.weights),
            AdamState::like(&net.output_layer.bias),
        ];
        Self { aptx, output }
    }

    fn step(&mut self, net: &mut Network<f32>, grads: &NetworkGradients<f32>, lr: f32) -> Result<()> {
        for (idx, layer) in net.aptx_layers.iter_mut().enumerate() {
            let g = &grads.aptx[idx];
            let s = &mut self.aptx[idx];
            if layer.mode != SharingMode::HybridAlphaFixed {
                adam_step(&mut layer.alpha, &g.d_alpha, &mut s[0], lr)?;
            }
            adam_step(&mut layer.beta, &g.d_beta, &mut s[1], lr)?;
            adam_step(&mut layer.gamma, &g.d_gamma, &mut s[2], lr)?;
            adam_step(&mut layer.delta, &g.d_delta, &mut s[3], lr)?;
        }
        adam_step(
            &mut net.output_layer.weights,
            &grads.d_weights,
            &mut self.output[0],
            lr,
        )?;
        adam_step(
            &mut net.output_layer.bias,
            &grads.d_bias,
            &mut self.output[1],
            lr,
        )?;
        Ok(())
    }
}

/// Full-dataset loss and accuracy (percent), batched in fixed order.
pub fn evaluate(net: &Network<f32>, dataset: &Dataset<f32>, batch_size: usize) -> Result<(f64, f64)> {
    let mut rng = Rng::new(0); // unused: evaluation never shuffles
    let batches = epoch_batches(dataset.num_samples(), batch_size, &mut rng, false);
    let mut loss_sum = 0.0f64;
    let mut correct = 0usize;
    for indices in &batches {
        let (batch, labels) = dataset.gather(indices);
        let (logits, _) = forward(net, &batch)?;
        let (loss, _) = softmax_cross_entropy(&logits, &labels)?;
        loss_sum += loss as f64 * indices.len() as f64;
        let preds = argmax_rows(&logits);
        correct += preds.iter().zip(&labels).filter(|(p, l)| p == l).count();
    }
    let n = dataset.num_samples() as f64;
    Ok((loss_sum / n, 100.0 * correct as f64 / n))
}

/// Run the training loop. Train loss/accuracy are running statistics
/// over the epoch's batches; test metrics come from a full pass after
/// each epoch. Returns the metrics and the trained network.
pub fn train(
    config: &TrainConfig,
    train_set: &Dataset<f32>,
    test_set: &Dataset<f32>,
    log: &mut dyn Write,
) -> Result<(Vec<EpochMetrics>, Network<f32>)> {
    let schedule = StepLrSchedule {
        base_lr: config.base_lr,
        step_size: config.step_size,
        decay: config.decay,
    };
    let mut rng = Rng::new(config.seed);
    let mut net: Network<f32> = init_network(&mut rng, &config.arch, config.mode)?;
    let mut optimizer = Optimizer::new(&net);
    let mut metrics = Vec::with_capacity(config.epochs as usize);

    for epoch in 1..=config.epochs {
        let lr = lr_at_epoch(&schedule, epoch)?;
        let batches = epoch_batches(train_set.num_samples(), config.train_batch, &mut rng, true);
        let mut loss_sum = 0.0f64;
        let mut correct = 0usize;
        for (batch_idx, indices) in batches.iter().enumerate() {
            let (batch, labels) = train_set.gather(indices);
            let (logits, caches) = forward(&net, &batch)?;
            let (loss, d_logits) = softmax_cross_entropy(&logits, &labels)?;
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!(
                    "loss at epoch {epoch}, batch {batch_idx}"
                )));
            }
            loss_sum += loss as f64 * indices.len() as f64;
            let preds = argmax_rows(&logits);
            correct += preds.iter().zip(&labels).filter(|(p, l)| p == l).count();
            let grads = backward(&net, &caches, &d_logits)?;
            optimizer.step(&mut net, &grads, lr as f32)?;
        }
        let n = train_set.num_samples() as f64;
        let (test_loss, test_acc) = evaluate(&net, test_set, config.test_batch)?;
        let row = EpochMetrics {
            epoch,
            train_loss: loss_sum / n,
            test_loss,
            train_acc: 100.0 * correct as f64 / n,
            test_acc,
            lr,
        };
        writeln!(
            log,
            "epoch {:>3}  train_loss {:.4}  test_loss {:.4}  train_acc {:.2}%  test_acc {:.2}%  lr {}",
            row.epoch, row.train_loss, row.test_loss, row.train_acc, row.test_acc, row.lr
        )?;
        metrics.push(row);
    }
    Ok((metrics, net))
}

pub const CSV_HEADER: &str = "epoch,train_loss,test_loss,train_acc,test_acc,lr";

/// Write the metrics CSV (header always present, one row per epoch).
pub fn write_metrics_csv(path: &Path, metrics: &[EpochMetrics]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{CSV_HEADER}")?;
    for m in metrics {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            m.epoch, m.train_loss, m.test_loss, m.train_acc, m.test_acc, m.lr
        )?;
    }
    w.flush()?;
    Ok(())
}
