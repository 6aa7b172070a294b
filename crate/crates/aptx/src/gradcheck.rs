//! Finite-difference validation of the analytic backward pass.
//!
//! Runs in 64-bit on a small random network for each sharing mode and
//! compares every parameter gradient against central differences. The
//! difference quotient only ever calls the forward path, so it stays
//! independent of the backward code it checks.

use crate::aptx::SharingMode;
use crate::error::Result;
use crate::network::{
    backward, forward, init_network, softmax_cross_entropy, Network, NetworkGradients,
};
use crate::tensor::{rng_uniform, Matrix, Rng};

pub const STEP: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-6;

/// Entries whose analytic/difference gap is below this are counted as
/// exact. Central differences at `STEP` carry ~1e-11 of roundoff and
/// truncation noise, so gradients smaller than ~1e-5 cannot meet the
/// relative tolerance no matter how correct they are; a genuine formula
/// error still shows up orders of magnitude above this floor.
pub const ABS_TOLERANCE: f64 = 1e-10;

const CHECK_ARCH: [usize; 4] = [6, 5, 4, 3];

/// Worst relative error seen for one parameter family under one mode.
#[derive(Debug, Clone)]
pub struct FamilyReport {
    pub mode: SharingMode,
    pub family: &'static str,
    pub max_rel_err: f64,
}

impl FamilyReport {
    pub fn passed(&self) -> bool {
        self.max_rel_err < TOLERANCE
    }
}

#[derive(Debug, Clone)]
pub struct GradcheckReport {
    pub families: Vec<FamilyReport>,
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.families.iter().all(FamilyReport::passed)
    }
}

#[derive(Clone, Copy)]
enum Block {
    Alpha(usize),
    Beta(usize),
    Gamma(usize),
    Delta(usize),
    Weights,
    Bias,
}

impl Block {
    fn family(&self) -> &'static str {
        match self {
            Block::Alpha(_) => "alpha",
            Block::Beta(_) => "beta",
            Block::Gamma(_) => "gamma",
            Block::Delta(_) => "delta",
            Block::Weights => "weights",
            Block::Bias => "bias",
        }
    }

    fn of_net<'a>(&self, net: &'a mut Network<f64>) -> &'a mut Matrix<f64> {
        match *self {
            Block::Alpha(l) => &mut net.aptx_layers[l].alpha,
            Block::Beta(l) => &mut net.aptx_layers[l].beta,
            Block::Gamma(l) => &mut net.aptx_layers[l].gamma,
            Block::Delta(l) => &mut net.aptx_layers[l].delta,
            Block::Weights => &mut net.output_layer.weights,
            Block::Bias => &mut net.output_layer.bias,
        }
    }

    fn of_grads<'a>(&self, grads: &'a NetworkGradients<f64>) -> &'a Matrix<f64> {
        match *self {
            Block::Alpha(l) => &grads.aptx[l].d_alpha,
            Block::Beta(l) => &grads.aptx[l].d_beta,
            Block::Gamma(l) => &grads.aptx[l].d_gamma,
            Block::Delta(l) => &grads.aptx[l].d_delta,
            Block::Weights => &grads.d_weights,
            Block::Bias => &grads.d_bias,
        }
    }
}

fn loss_of(net: &Network<f64>, batch: &Matrix<f64>, labels: &[usize]) -> Result<f64> {
    let (logits, _) = forward(net, batch)?;
    Ok(softmax_cross_entropy(&logits, labels)?.0)
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

/// Run the suite, optionally transforming the analytic gradients first
/// (used by tests to confirm the checker catches wrong gradients).
pub fn run_gradcheck_with(
    seed: u64,
    mutate: &dyn Fn(SharingMode, &mut NetworkGradients<f64>),
) -> Result<GradcheckReport> {
    let mut families = Vec::new();
    let mut rng = Rng::new(seed);
    for mode in [
        SharingMode::PerInput,
        SharingMode::FullShared,
        SharingMode::HybridAlphaFixed,
    ] {
        let mut net: Network<f64> = init_network(&mut rng, &CHECK_ARCH, mode)?;
        // Random O(1) parameters rather than the training init: the
        // init's tiny gamma entries make some gradients so small that
        // difference-quotient roundoff dominates the relative error.
        randomize(&mut net, &mut rng)?;
        let batch = rng_uniform(&mut rng, -1.5, 1.5, 4, CHECK_ARCH[0])?;
        let labels: Vec<usize> = (0..4)
            .map(|_| (rng.next_u64() % CHECK_ARCH[3] as u64) as usize)
            .collect();
        let (logits, caches) = forward(&net, &batch)?;
        let (_, d_logits) = softmax_cross_entropy(&logits, &labels)?;
        let mut grads = backward(&net, &caches, &d_logits)?;
        mutate(mode, &mut grads);

        let mut blocks = Vec::new();
        for l in 0..net.aptx_layers.len() {
            if mode != SharingMode::HybridAlphaFixed {
                blocks.push(Block::Alpha(l));
            }
            blocks.push(Block::Beta(l));
            blocks.push(Block::Gamma(l));
            blocks.push(Block::Delta(l));
        }
        blocks.push(Block::Weights);
        blocks.push(Block::Bias);

        for family in ["alpha", "beta", "gamma", "delta", "weights", "bias"] {
            if family == "alpha" && mode == SharingMode::HybridAlphaFixed {
                continue;
            }
            let mut worst = 0.0f64;
            for &block in blocks.iter().filter(|b| b.family() == family) {
                let len = block.of_grads(&grads).data().len();
                for idx in 0..len {
                    let mut lo = net.clone();
                    let mut hi = net.clone();
                    lo_hi(&mut lo, &mut hi, block, idx);
                    let fd = (loss_of(&hi, &batch, &labels)? - loss_of(&lo, &batch, &labels)?)
                        / (2.0 * STEP);
                    let analytic = block.of_grads(&grads).data()[idx];
                    if (analytic - fd).abs() >= ABS_TOLERANCE {
                        worst = worst.max(rel_err(analytic, fd));
                    }
                }
            }
            families.push(FamilyReport {
                mode,
                family,
                max_rel_err: worst,
            });
        }
    }
    Ok(GradcheckReport { families })
}

fn randomize(net: &mut Network<f64>, rng: &mut Rng) -> Result<()> {
    for layer in &mut net.aptx_layers {
        for block in [
            &mut layer.alpha,
            &mut layer.beta,
            &mut layer.gamma,
            &mut layer.delta,
        ] {
            for v in block.data_mut() {
                *v = rng.uniform(-1.0, 1.0);
            }
        }
    }
    for block in [&mut net.output_layer.weights, &mut net.output_layer.bias] {
        for v in block.data_mut() {
            *v = rng.uniform(-1.0, 1.0);
        }
    }
    Ok(())
}

fn lo_hi(lo: &mut Network<f64>, hi: &mut Network<f64>, block: Block, idx: usize) {
    block.of_net(lo).data_mut()[idx] -= STEP;
    block.of_net(hi).data_mut()[idx] += STEP;
}

pub fn run_gradcheck(seed: u64) -> Result<GradcheckReport> {
    run_gradcheck_with(seed, &|_, _| {})
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn analytic_gradients_pass() {
        let report = run_gradcheck(42).unwrap();
        assert!(report.passed(), "{report:?}");
        // All modes, all families present: 3 modes x 6 families - 1
        // absent alpha family for the fixed-alpha mode.
        assert_eq!(report.families.len(), 17);
    }

    #[test]
    fn negated_beta_gradient_is_caught() {
        let report = run_gradcheck_with(42, &|_, grads| {
            for lg in &mut grads.aptx {
                for v in lg.d_beta.data_mut() {
                    *v = -*v;
                }
            }
        })
        .unwrap();
        assert!(!report.passed());
        for f in &report.families {
            if f.family == "beta" {
                assert!(!f.passed(), "{f:?}");
            } else {
                assert!(f.passed(), "{f:?}");
            }
        }
    }

    #[test]
    fn same_seed_same_report() {
        let a = run_gradcheck(7).unwrap();
        let b = run_gradcheck(7).unwrap();
        for (x, y) in a.families.iter().zip(&b.families) {
            assert_eq!(x.max_rel_err, y.max_rel_err);
        }
    }
}
