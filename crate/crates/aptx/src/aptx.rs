//! The unified trainable neuron layer.
//!
//! Each neuron computes `y = sum_i (alpha_i + tanh(beta_i * x_i)) * gamma_i * x_i + delta`
//! with every parameter trainable. The forward pass caches the tanh
//! terms per (sample, neuron, input) so the backward pass never
//! recomputes them.

use num_traits::Float;

use crate::error::{Error, Result};
use crate::tensor::{rng_uniform, Matrix, Rng};

/// How alpha/beta/gamma are tied across a neuron's input dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SharingMode {
    /// Every input dimension owns its own alpha, beta, gamma:
    /// 3n + 1 trainable values per neuron.
    PerInput,
    /// One alpha, beta, gamma scalar per neuron, shared across inputs:
    /// 4 trainable values per neuron.
    FullShared,
    /// Alpha fixed at 1 (non-trainable), beta and gamma per input:
    /// 2n + 1 trainable values per neuron.
    HybridAlphaFixed,
}

impl SharingMode {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "per-input" => Ok(Self::PerInput),
            "full-shared" => Ok(Self::FullShared),
            "hybrid-alpha-fixed" => Ok(Self::HybridAlphaFixed),
            other => Err(Error::InvalidArgument(format!(
                "unknown sharing mode '{other}' (expected per-input, full-shared, or hybrid-alpha-fixed)"
            ))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::PerInput => "per-input",
            Self::FullShared => "full-shared",
            Self::HybridAlphaFixed => "hybrid-alpha-fixed",
        }
    }

    /// Columns of the alpha block for a layer with `in_dim` inputs.
    fn alpha_cols(&self, in_dim: usize) -> usize {
        match self {
            Self::PerInput => in_dim,
            Self::FullShared => 1,
            Self::HybridAlphaFixed => 0,
        }
    }

    /// Columns of the beta and gamma blocks.
    fn bg_cols(&self, in_dim: usize) -> usize {
        match self {
            Self::PerInput | Self::HybridAlphaFixed => in_dim,
            Self::FullShared => 1,
        }
    }
}

/// Parameter blocks of one layer. Shapes depend on the sharing mode:
/// per-input blocks are `out_dim x in_dim`, shared blocks `out_dim x 1`,
/// and the fixed alpha of the hybrid mode is not stored at all.
#[derive(Debug, Clone, PartialEq)]
pub struct AptxLayerParams<F: Float> {
    pub alpha: Matrix<F>,
    pub beta: Matrix<F>,
    pub gamma: Matrix<F>,
    pub delta: Matrix<F>,
    pub mode: SharingMode,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl<F: Float> AptxLayerParams<F> {
    /// Alpha for neuron `j`, input `i`, resolving sharing.
    #[inline]
    pub fn alpha_at(&self, j: usize, i: usize) -> F {
        match self.mode {
            SharingMode::PerInput => self.alpha.get(j, i),
            SharingMode::FullShared => self.alpha.get(j, 0),
            SharingMode::HybridAlphaFixed => F::one(),
        }
    }

    #[inline]
    pub fn beta_at(&self, j: usize, i: usize) -> F {
        match self.mode {
            SharingMode::FullShared => self.beta.get(j, 0),
            _ => self.beta.get(j, i),
        }
    }

    #[inline]
    pub fn gamma_at(&self, j: usize, i: usize) -> F {
        match self.mode {
            SharingMode::FullShared => self.gamma.get(j, 0),
            _ => self.gamma.get(j, i),
        }
    }

    /// Column of the gradient block that input `i` accumulates into.
    #[inline]
    fn grad_col(&self, i: usize) -> usize {
        match self.mode {
            SharingMode::FullShared => 0,
            _ => i,
        }
    }
}

/// Gradients shaped exactly like their parameter blocks, plus the
/// gradient with respect to the layer input.
#[derive(Debug, Clone)]
pub struct LayerGradients<F: Float> {
    pub d_alpha: Matrix<F>,
    pub d_beta: Matrix<F>,
    pub d_gamma: Matrix<F>,
    pub d_delta: Matrix<F>,
    pub d_input: Matrix<F>,
}

/// Tanh terms saved by the forward pass: `tanh(beta_ji * x_bi)` laid out
/// as `[batch][neuron][input]`.
#[derive(Debug, Clone)]
pub struct AptxCache<F: Float> {
    tanh: Vec<F>,
    batch: usize,
}

/// Forward pass of one layer over a batch (rows are samples).
pub fn aptx_forward<F: Float>(
    params: &AptxLayerParams<F>,
    input: &Matrix<F>,
) -> Result<(Matrix<F>, AptxCache<F>)> {
    if input.cols() != params.in_dim {
        return Err(Error::Shape {
            context: "aptx_forward input",
            left_rows: input.rows(),
            left_cols: input.cols(),
            right_rows: params.out_dim,
            right_cols: params.in_dim,
        });
    }
    let batch = input.rows();
    let (out_dim, in_dim) = (params.out_dim, params.in_dim);
    let mut tanh = vec![F::zero(); batch * out_dim * in_dim];
    let mut out = Matrix::zeros(batch, out_dim);
    for b in 0..batch {
        let x = input.row(b);
        for j in 0..out_dim {
            let t_row = &mut tanh[(b * out_dim + j) * in_dim..(b * out_dim + j + 1) * in_dim];
            let mut acc = params.delta.get(j, 0);
            for i in 0..in_dim {
                let t = (params.beta_at(j, i) * x[i]).tanh();
                t_row[i] = t;
                acc = acc + (params.alpha_at(j, i) + t) * params.gamma_at(j, i) * x[i];
            }
            out.set(b, j, acc);
        }
    }
    Ok((out, AptxCache { tanh, batch }))
}

/// Backward pass: analytic partials of the neuron expression,
/// chain-ruled with `upstream` and summed over the batch. Shared modes
/// accumulate per-input partials into their shared scalar.
pub fn aptx_backward<F: Float>(
    params: &AptxLayerParams<F>,
    cache: &AptxCache<F>,
    input: &Matrix<F>,
    upstream: &Matrix<F>,
) -> Result<LayerGradients<F>> {
    let batch = input.rows();
    let (out_dim, in_dim) = (params.out_dim, params.in_dim);
    if input.cols() != in_dim || upstream.rows() != batch || upstream.cols() != out_dim {
        return Err(Error::Shape {
            context: "aptx_backward",
            left_rows: input.rows(),
            left_cols: input.cols(),
            right_rows: upstream.rows(),
            right_cols: upstream.cols(),
        });
    }
    if cache.batch != batch {
        return Err(Error::InvalidArgument(format!(
            "cache batch {} does not match input batch {batch}",
            cache.batch
        )));
    }

    let mut d_alpha = Matrix::zeros(out_dim, params.mode.alpha_cols(in_dim));
    let mut d_beta = Matrix::zeros(out_dim, params.mode.bg_cols(in_dim));
    let mut d_gamma = Matrix::zeros(out_dim, params.mode.bg_cols(in_dim));
    let mut d_delta = Matrix::zeros(out_dim, 1);
    let mut d_input = Matrix::zeros(batch, in_dim);

    let train_alpha = params.mode != SharingMode::HybridAlphaFixed;
    for b in 0..batch {
        let x = input.row(b);
        for j in 0..out_dim {
            let up = upstream.get(b, j);
            d_delta.set(j, 0, d_delta.get(j, 0) + up);
            if up == F::zero() {
                continue;
            }
            let t_row = &cache.tanh[(b * out_dim + j) * in_dim..(b * out_dim + j + 1) * in_dim];
            for i in 0..in_dim {
                let xi = x[i];
                let t = t_row[i];
                let sech2 = F::one() - t * t;
                let alpha = params.alpha_at(j, i);
                let gamma = params.gamma_at(j, i);
                let beta = params.beta_at(j, i);
                let gate = alpha + t;
                let col = params.grad_col(i);
                if train_alpha {
                    d_alpha.set(j, col, d_alpha.get(j, col) + up * gamma * xi);
                }
                d_beta.set(j, col, d_beta.get(j, col) + up * gamma * xi * xi * sech2);
                d_gamma.set(j, col, d_gamma.get(j, col) + up * gate * xi);
                let dx = gamma * gate + gamma * xi * beta * sech2;
                d_input.set(b, i, d_input.get(b, i) + up * dx);
            }
        }
    }
    Ok(LayerGradients {
        d_alpha,
        d_beta,
        d_gamma,
        d_delta,
        d_input,
    })
}

/// Exact trainable-parameter count for one layer.
pub fn trainable_count<F: Float>(params: &AptxLayerParams<F>) -> usize {
    let n = params.in_dim;
    let per_neuron = match params.mode {
        SharingMode::PerInput => 3 * n + 1,
        SharingMode::FullShared => 4,
        SharingMode::HybridAlphaFixed => 2 * n + 1,
    };
    params.out_dim * per_neuron
}

/// Fresh layer: alpha and beta start at 1, gamma fan-in-scaled uniform,
/// delta at 0.
pub fn init_aptx<F: Float>(
    rng: &mut Rng,
    in_dim: usize,
    out_dim: usize,
    mode: SharingMode,
) -> Result<AptxLayerParams<F>> {
    if in_dim == 0 || out_dim == 0 {
        return Err(Error::InvalidArgument(format!(
            "layer dims must be positive, got {in_dim}x{out_dim}"
        )));
    }
    let k = 1.0 / (in_dim as f64).sqrt();
    let alpha = Matrix::filled(out_dim, mode.alpha_cols(in_dim), F::one());
    let beta = Matrix::filled(out_dim, mode.bg_cols(in_dim), F::one());
    let gamma = rng_uniform(rng, -k, k, out_dim, mode.bg_cols(in_dim))?;
    let delta = Matrix::zeros(out_dim, 1);
    Ok(AptxLayerParams {
        alpha,
        beta,
        gamma,
        delta,
        mode,
        in_dim,
        out_dim,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::rng_uniform;

    fn params_from<F: Float>(
        mode: SharingMode,
        in_dim: usize,
        out_dim: usize,
        alpha: F,
        beta: F,
        gamma: F,
        delta: F,
    ) -> AptxLayerParams<F> {
        AptxLayerParams {
            alpha: Matrix::filled(out_dim, mode.alpha_cols(in_dim), alpha),
            beta: Matrix::filled(out_dim, mode.bg_cols(in_dim), beta),
            gamma: Matrix::filled(out_dim, mode.bg_cols(in_dim), gamma),
            delta: Matrix::filled(out_dim, 1, delta),
            mode,
            in_dim,
            out_dim,
        }
    }

    fn random_params(rng: &mut Rng, mode: SharingMode, in_dim: usize, out_dim: usize) -> AptxLayerParams<f64> {
        AptxLayerParams {
            alpha: rng_uniform(rng, -1.0, 1.0, out_dim, mode.alpha_cols(in_dim)).unwrap(),
            beta: rng_uniform(rng, -1.0, 1.0, out_dim, mode.bg_cols(in_dim)).unwrap(),
            gamma: rng_uniform(rng, -1.0, 1.0, out_dim, mode.bg_cols(in_dim)).unwrap(),
            delta: rng_uniform(rng, -1.0, 1.0, out_dim, 1).unwrap(),
            mode,
            in_dim,
            out_dim,
        }
    }

    /// Naive per-sample, per-neuron, per-input evaluation used as the
    /// forward oracle.
    fn forward_oracle(params: &AptxLayerParams<f64>, input: &Matrix<f64>) -> Matrix<f64> {
        let mut out = Matrix::zeros(input.rows(), params.out_dim);
        for b in 0..input.rows() {
            for j in 0..params.out_dim {
                let mut acc = params.delta.get(j, 0);
                for i in 0..params.in_dim {
                    let x = input.get(b, i);
                    acc += (params.alpha_at(j, i) + (params.beta_at(j, i) * x).tanh())
                        * params.gamma_at(j, i)
                        * x;
                }
                out.set(b, j, acc);
            }
        }
        out
    }

    #[test]
    fn identity_reduction() {
        // beta = 0, alpha = 1, gamma = 1, delta = 0 sums the inputs.
        let p = params_from(SharingMode::PerInput, 4, 2, 1.0, 0.0, 1.0, 0.0);
        let x = Matrix::new(1, 4, vec![0.5, -1.0, 2.0, 3.0]).unwrap();
        let (y, _) = aptx_forward(&p, &x).unwrap();
        assert!((y.get(0, 0) - 4.5f64).abs() < 1e-15);
        assert!((y.get(0, 1) - 4.5f64).abs() < 1e-15);
    }

    #[test]
    fn swish_point_value() {
        // alpha=1, beta=1/2, gamma=1/2 is x*sigmoid(x); at x=1 that is
        // sigmoid(1) = 0.7310585786300049.
        let p = params_from(SharingMode::PerInput, 1, 1, 1.0, 0.5, 0.5, 0.0);
        let x = Matrix::new(1, 1, vec![1.0f64]).unwrap();
        let (y, _) = aptx_forward(&p, &x).unwrap();
        assert!((y.get(0, 0) - 0.7310585786300049).abs() < 1e-12);
    }

    #[test]
    fn scalar_point_value() {
        let p = params_from(SharingMode::PerInput, 1, 1, 1.0, 1.0, 0.5, 0.0);
        let x = Matrix::new(1, 1, vec![1.0f64]).unwrap();
        let (y, _) = aptx_forward(&p, &x).unwrap();
        // (1 + tanh(1)) * 0.5
        assert!((y.get(0, 0) - 0.8807970779778823).abs() < 1e-12);
    }

    #[test]
    fn swish_identity_on_grid() {
        let p = params_from(SharingMode::PerInput, 1, 1, 1.0, 0.5, 0.5, 0.0);
        let mut x = -6.0f64;
        while x <= 6.0 {
            let m = Matrix::new(1, 1, vec![x]).unwrap();
            let (y, _) = aptx_forward(&p, &m).unwrap();
            let swish = x / (1.0 + (-x).exp());
            assert!((y.get(0, 0) - swish).abs() < 1e-12, "x = {x}");
            x += 0.125;
        }
    }

    #[test]
    fn forward_matches_scalar_oracle_all_modes() {
        let mut rng = Rng::new(11);
        for mode in [
            SharingMode::PerInput,
            SharingMode::FullShared,
            SharingMode::HybridAlphaFixed,
        ] {
            for _ in 0..10 {
                let in_dim = 1 + (rng.next_u64() % 6) as usize;
                let out_dim = 1 + (rng.next_u64() % 5) as usize;
                let batch = 1 + (rng.next_u64() % 4) as usize;
                let p = random_params(&mut rng, mode, in_dim, out_dim);
                let x = rng_uniform(&mut rng, -2.0, 2.0, batch, in_dim).unwrap();
                let (y, _) = aptx_forward(&p, &x).unwrap();
                let want = forward_oracle(&p, &x);
                for (a, b) in y.data().iter().zip(want.data()) {
                    assert!((a - b).abs() < 1e-12, "mode {mode:?}");
                }
            }
        }
    }

    #[test]
    fn forward_rejects_wrong_width() {
        let p = params_from(SharingMode::PerInput, 3, 2, 1.0, 1.0, 1.0, 0.0);
        let x = Matrix::<f64>::zeros(1, 4);
        assert!(aptx_forward(&p, &x).is_err());
    }

    #[test]
    fn delta_gradient_is_batch_size() {
        let mut rng = Rng::new(5);
        let p = random_params(&mut rng, SharingMode::PerInput, 3, 2);
        let x = rng_uniform(&mut rng, -1.0, 1.0, 7, 3).unwrap();
        let (_, cache) = aptx_forward(&p, &x).unwrap();
        let up = Matrix::filled(7, 2, 1.0);
        let g = aptx_backward(&p, &cache, &x, &up).unwrap();
        for j in 0..2 {
            assert_eq!(g.d_delta.get(j, 0), 7.0);
        }
    }

    #[test]
    fn zero_input_kills_param_gradients() {
        let mut rng = Rng::new(6);
        let p = random_params(&mut rng, SharingMode::PerInput, 3, 2);
        let x = Matrix::<f64>::zeros(4, 3);
        let (_, cache) = aptx_forward(&p, &x).unwrap();
        let up = rng_uniform(&mut rng, -1.0, 1.0, 4, 2).unwrap();
        let g = aptx_backward(&p, &cache, &x, &up).unwrap();
        assert!(g.d_alpha.data().iter().all(|&v| v == 0.0));
        assert!(g.d_beta.data().iter().all(|&v| v == 0.0));
        assert!(g.d_gamma.data().iter().all(|&v| v == 0.0));
    }

    /// Scalar objective for finite-difference checks:
    /// L = sum(upstream .* forward(params, x)).
    fn loss_of(params: &AptxLayerParams<f64>, x: &Matrix<f64>, up: &Matrix<f64>) -> f64 {
        let (y, _) = aptx_forward(params, x).unwrap();
        y.data().iter().zip(up.data()).map(|(a, b)| a * b).sum()
    }

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
    }

    #[test]
    fn gradients_match_finite_differences_all_modes() {
        let h = 1e-5;
        let mut rng = Rng::new(77);
        for mode in [
            SharingMode::PerInput,
            SharingMode::FullShared,
            SharingMode::HybridAlphaFixed,
        ] {
            let p = random_params(&mut rng, mode, 4, 3);
            let x = rng_uniform(&mut rng, -1.5, 1.5, 5, 4).unwrap();
            let up = rng_uniform(&mut rng, -1.0, 1.0, 5, 3).unwrap();
            let (_, cache) = aptx_forward(&p, &x).unwrap();
            let g = aptx_backward(&p, &cache, &x, &up).unwrap();

            let blocks: [(&str, fn(&AptxLayerParams<f64>) -> &Matrix<f64>, fn(&mut AptxLayerParams<f64>) -> &mut Matrix<f64>, &Matrix<f64>); 4] = [
                ("alpha", |p| &p.alpha, |p| &mut p.alpha, &g.d_alpha),
                ("beta", |p| &p.beta, |p| &mut p.beta, &g.d_beta),
                ("gamma", |p| &p.gamma, |p| &mut p.gamma, &g.d_gamma),
                ("delta", |p| &p.delta, |p| &mut p.delta, &g.d_delta),
            ];
            for (name, get, get_mut, analytic) in blocks {
                for idx in 0..get(&p).data().len() {
                    let mut lo = p.clone();
                    let mut hi = p.clone();
                    get_mut(&mut lo).data_mut()[idx] -= h;
                    get_mut(&mut hi).data_mut()[idx] += h;
                    let fd = (loss_of(&hi, &x, &up) - loss_of(&lo, &x, &up)) / (2.0 * h);
                    let a = analytic.data()[idx];
                    assert!(
                        rel_err(a, fd) < 1e-6,
                        "{mode:?} {name}[{idx}]: analytic {a} vs fd {fd}"
                    );
                }
            }
            // d_input via perturbing x.
            for idx in 0..x.data().len() {
                let mut lo = x.clone();
                let mut hi = x.clone();
                lo.data_mut()[idx] -= h;
                hi.data_mut()[idx] += h;
                let fd = (loss_of(&p, &hi, &up) - loss_of(&p, &lo, &up)) / (2.0 * h);
                let a = g.d_input.data()[idx];
                assert!(rel_err(a, fd) < 1e-6, "{mode:?} d_input[{idx}]");
            }
        }
    }

    #[test]
    fn full_shared_gradient_sums_per_input_gradients() {
        // With all per-input parameters tied to the same values, the
        // shared-mode gradient must equal the sum over inputs of the
        // per-input gradients.
        let mut rng = Rng::new(21);
        let shared = random_params(&mut rng, SharingMode::FullShared, 5, 3);
        let mut tied = random_params(&mut rng, SharingMode::PerInput, 5, 3);
        for j in 0..3 {
            for i in 0..5 {
                tied.alpha.set(j, i, shared.alpha.get(j, 0));
                tied.beta.set(j, i, shared.beta.get(j, 0));
                tied.gamma.set(j, i, shared.gamma.get(j, 0));
            }
            tied.delta.set(j, 0, shared.delta.get(j, 0));
        }
        let x = rng_uniform(&mut rng, -1.0, 1.0, 4, 5).unwrap();
        let up = rng_uniform(&mut rng, -1.0, 1.0, 4, 3).unwrap();
        let (_, sc) = aptx_forward(&shared, &x).unwrap();
        let (_, tc) = aptx_forward(&tied, &x).unwrap();
        let gs = aptx_backward(&shared, &sc, &x, &up).unwrap();
        let gt = aptx_backward(&tied, &tc, &x, &up).unwrap();
        for j in 0..3 {
            let summed: f64 = (0..5).map(|i| gt.d_alpha.get(j, i)).sum();
            assert!((gs.d_alpha.get(j, 0) - summed).abs() < 1e-10);
            let summed: f64 = (0..5).map(|i| gt.d_beta.get(j, i)).sum();
            assert!((gs.d_beta.get(j, 0) - summed).abs() < 1e-10);
            let summed: f64 = (0..5).map(|i| gt.d_gamma.get(j, i)).sum();
            assert!((gs.d_gamma.get(j, 0) - summed).abs() < 1e-10);
        }
    }

    #[test]
    fn trainable_count_formulas() {
        let mut rng = Rng::new(1);
        let p = init_aptx::<f32>(&mut rng, 784, 128, SharingMode::PerInput).unwrap();
        assert_eq!(trainable_count(&p), 301_184);
        let p = init_aptx::<f32>(&mut rng, 9, 1, SharingMode::HybridAlphaFixed).unwrap();
        assert_eq!(trainable_count(&p), 19);
        let p = init_aptx::<f32>(&mut rng, 100, 1, SharingMode::FullShared).unwrap();
        assert_eq!(trainable_count(&p), 4);
    }

    #[test]
    fn trainable_count_matches_storage_enumeration() {
        let mut rng = Rng::new(33);
        for _ in 0..20 {
            let in_dim = 1 + (rng.next_u64() % 50) as usize;
            let out_dim = 1 + (rng.next_u64() % 20) as usize;
            let mode = match rng.next_u64() % 3 {
                0 => SharingMode::PerInput,
                1 => SharingMode::FullShared,
                _ => SharingMode::HybridAlphaFixed,
            };
            let p = init_aptx::<f64>(&mut rng, in_dim, out_dim, mode).unwrap();
            let stored = p.alpha.data().len()
                + p.beta.data().len()
                + p.gamma.data().len()
                + p.delta.data().len();
            assert_eq!(trainable_count(&p), stored, "{mode:?} {in_dim}x{out_dim}");
        }
    }

    #[test]
    fn init_values() {
        let mut rng = Rng::new(42);
        let p = init_aptx::<f32>(&mut rng, 16, 8, SharingMode::PerInput).unwrap();
        assert!(p.alpha.data().iter().all(|&v| v == 1.0));
        assert!(p.beta.data().iter().all(|&v| v == 1.0));
        assert!(p.delta.data().iter().all(|&v| v == 0.0));
        let k = 1.0 / (16.0f32).sqrt();
        assert!(p.gamma.data().iter().all(|&v| v > -k && v < k));

        let again = init_aptx::<f32>(&mut Rng::new(42), 16, 8, SharingMode::PerInput).unwrap();
        assert_eq!(p, again);
    }
}
