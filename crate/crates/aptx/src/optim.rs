//! Adam with bias correction plus a step-decay learning-rate schedule.

use num_traits::Float;

use crate::error::{Error, Result};
use crate::tensor::Matrix;

/// Per-parameter-block Adam accumulators.
#[derive(Debug, Clone)]
pub struct AdamState<F: Float> {
    pub m: Matrix<F>,
    pub v: Matrix<F>,
    pub t: u64,
    pub beta1: F,
    pub beta2: F,
    pub eps: F,
}

impl<F: Float> AdamState<F> {
    /// Zero state with the standard beta1=0.9, beta2=0.999, eps=1e-8.
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            m: Matrix::zeros(rows, cols),
            v: Matrix::zeros(rows, cols),
            t: 0,
            beta1: F::from(0.9).unwrap(),
            beta2: F::from(0.999).unwrap(),
            eps: F::from(1e-8).unwrap(),
        }
    }

    pub fn like(block: &Matrix<F>) -> Self {
        Self::new(block.rows(), block.cols())
    }
}

/// One Adam update in place. Non-finite gradient entries abort rather
/// than being clipped.
pub fn adam_step<F: Float>(
    params: &mut Matrix<F>,
    grads: &Matrix<F>,
    state: &mut AdamState<F>,
    lr: F,
) -> Result<()> {
    if params.rows() != grads.rows() || params.cols() != grads.cols() {
        return Err(Error::Shape {
            context: "adam_step",
            left_rows: params.rows(),
            left_cols: params.cols(),
            right_rows: grads.rows(),
            right_cols: grads.cols(),
        });
    }
    if let Some(pos) = grads.data().iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFinite(format!(
            "gradient entry {pos} of a {}x{} block",
            grads.rows(),
            grads.cols()
        )));
    }
    state.t += 1;
    let one = F::one();
    let bc1 = one - state.beta1.powi(state.t as i32);
    let bc2 = one - state.beta2.powi(state.t as i32);
    let m = state.m.data_mut();
    let v = state.v.data_mut();
    let p = params.data_mut();
    for idx in 0..p.len() {
        let g = grads.data()[idx];
        m[idx] = state.beta1 * m[idx] + (one - state.beta1) * g;
        v[idx] = state.beta2 * v[idx] + (one - state.beta2) * g * g;
        let m_hat = m[idx] / bc1;
        let v_hat = v[idx] / bc2;
        p[idx] = p[idx] - lr * m_hat / (v_hat.sqrt() + state.eps);
    }
    Ok(())
}

/// Step decay: `lr(epoch) = base_lr * decay^floor((epoch-1)/step_size)`
/// with 1-indexed epochs, i.e. the schedule steps at the end of each
/// `step_size`-epoch window.
#[derive(Debug, Clone, Copy)]
pub struct StepLrSchedule {
    pub base_lr: f64,
    pub step_size: u32,
    pub decay: f64,
}

impl StepLrSchedule {
    /// Base 4e-3, step 5 epochs, decay 0.25.
    pub fn reference_default() -> Self {
        Self {
            base_lr: 4e-3,
            step_size: 5,
            decay: 0.25,
        }
    }
}

pub fn lr_at_epoch(schedule: &StepLrSchedule, epoch: u32) -> Result<f64> {
    if epoch < 1 {
        return Err(Error::InvalidArgument(
            "epochs are 1-indexed; epoch must be >= 1".into(),
        ));
    }
    let windows = (epoch - 1) / schedule.step_size;
    Ok(schedule.base_lr * schedule.decay.powi(windows as i32))
}
