//! Fourier-series KAN layer: each edge carries a truncated Fourier expansion
//! with learnable sine/cosine coefficients over frequencies 1..G.

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::Rng;

use super::{Layer, Param, ParamView};

/// out_j = sum_i sum_k (A[j,i,k] cos(k x_i) + B[j,i,k] sin(k x_i)) + beta_j
/// with k running over 1..=G. Coefficients are stored flattened out x (in*G),
/// entry [j, i*G + (k-1)].
#[derive(Debug, Clone)]
pub struct FourierKanLayer {
    in_dim: usize,
    out_dim: usize,
    grid_size: usize,
    coeff_cos: Matrix,
    coeff_sin: Matrix,
    bias: Matrix,
    grad_cos: Matrix,
    grad_sin: Matrix,
    grad_bias: Matrix,
    cache: Option<Cache>,
}

#[derive(Debug, Clone)]
struct Cache {
    input: Matrix,
    cos_feat: Matrix,
    sin_feat: Matrix,
}

impl FourierKanLayer {
    /// Zero coefficients and bias; the standard output-layer start.
    pub fn new(in_dim: usize, out_dim: usize, grid_size: usize) -> FourierKanLayer {
        let width = in_dim * grid_size;
        FourierKanLayer {
            in_dim,
            out_dim,
            grid_size,
            coeff_cos: Matrix::zeros(out_dim, width),
            coeff_sin: Matrix::zeros(out_dim, width),
            bias: Matrix::zeros(1, out_dim),
            grad_cos: Matrix::zeros(out_dim, width),
            grad_sin: Matrix::zeros(out_dim, width),
            grad_bias: Matrix::zeros(1, out_dim),
            cache: None,
        }
    }

    /// Small uniform coefficients for hidden layers in a 2-layer stack.
    pub fn init_random(&mut self, rng: &mut Rng) {
        let scale = 1.0 / ((self.in_dim * self.grid_size) as f64).sqrt();
        for v in self.coeff_cos.data_mut() {
            *v = rng.uniform(-scale, scale);
        }
        for v in self.coeff_sin.data_mut() {
            *v = rng.uniform(-scale, scale);
        }
    }

    pub fn grid_size(&self) -> usize {
        self.grid_size
    }

    pub fn set_coefficients(&mut self, cos: Matrix, sin: Matrix, bias: Matrix) -> Result<()> {
        let width = self.in_dim * self.grid_size;
        if cos.shape() != (self.out_dim, width)
            || sin.shape() != (self.out_dim, width)
            || bias.shape() != (1, self.out_dim)
        {
            return Err(Error::Shape(format!(
                "fourier coefficients must be {}x{} with 1x{} bias",
                self.out_dim, width, self.out_dim
            )));
        }
        self.coeff_cos = cos;
        self.coeff_sin = sin;
        self.bias = bias;
        Ok(())
    }

    fn features(&self, input: &Matrix) -> (Matrix, Matrix) {
        let batch = input.rows();
        let width = self.in_dim * self.grid_size;
        let mut cos_feat = Matrix::zeros(batch, width);
        let mut sin_feat = Matrix::zeros(batch, width);
        for b in 0..batch {
            for i in 0..self.in_dim {
                let x = input.get(b, i);
                for k in 0..self.grid_size {
                    let angle = (k + 1) as f64 * x;
                    cos_feat.set(b, i * self.grid_size + k, angle.cos());
                    sin_feat.set(b, i * self.grid_size + k, angle.sin());
                }
            }
        }
        (cos_feat, sin_feat)
    }
}

impl Layer for FourierKanLayer {
    fn forward(&mut self, input: &Matrix) -> Result<Matrix> {
        if input.cols() != self.in_dim {
            return Err(Error::Shape(format!(
                "fourier layer expects {} columns, got {}x{}",
                self.in_dim,
                input.rows(),
                input.cols()
            )));
        }
        let (cos_feat, sin_feat) = self.features(input);
        let mut out = cos_feat.matmul_nt(&self.coeff_cos)?;
        out.add_assign(&sin_feat.matmul_nt(&self.coeff_sin)?)?;
        out.add_row_broadcast(&self.bias)?;
        self.cache = Some(Cache {
            input: input.clone(),
            cos_feat,
            sin_feat,
        });
        Ok(out)
    }

    fn backward(&mut self, grad_out: &Matrix) -> Result<Matrix> {
        let cache = self
            .cache
            .take()
            .ok_or_else(|| Error::State("fourier backward called before forward".into()))?;
        let batch = cache.input.rows();
        if grad_out.shape() != (batch, self.out_dim) {
            return Err(Error::Shape(format!(
                "fourier grad must be {}x{}, got {}x{}",
                batch,
                self.out_dim,
                grad_out.rows(),
                grad_out.cols()
            )));
        }
        self.grad_cos
            .add_assign(&grad_out.matmul_tn(&cache.cos_feat)?)?;
        self.grad_sin
            .add_assign(&grad_out.matmul_tn(&cache.sin_feat)?)?;
        self.grad_bias.add_assign(&grad_out.col_sums())?;

        // d out_j / d x_i = sum_k k * (-A sin(k x_i) + B cos(k x_i))
        let ga = grad_out.matmul(&self.coeff_cos)?;
        let gb = grad_out.matmul(&self.coeff_sin)?;
        let mut grad_in = Matrix::zeros(batch, self.in_dim);
        for b in 0..batch {
            for i in 0..self.in_dim {
                let mut acc = 0.0;
                for k in 0..self.grid_size {
                    let idx = i * self.grid_size + k;
                    let freq = (k + 1) as f64;
                    acc += freq
                        * (-cache.sin_feat.get(b, idx) * ga.get(b, idx)
                            + cache.cos_feat.get(b, idx) * gb.get(b, idx));
                }
                grad_in.set(b, i, acc);
            }
        }
        Ok(grad_in)
    }

    fn params(&mut self) -> Vec<Param<'_>> {
        vec![
            Param {
                name: "coeff_cos".into(),
                value: &mut self.coeff_cos,
                grad: &mut self.grad_cos,
                trainable: true,
            },
            Param {
                name: "coeff_sin".into(),
                value: &mut self.coeff_sin,
                grad: &mut self.grad_sin,
                trainable: true,
            },
            Param {
                name: "bias".into(),
                value: &mut self.bias,
                grad: &mut self.grad_bias,
                trainable: true,
            },
        ]
    }

    fn param_views(&self) -> Vec<ParamView<'_>> {
        vec![
            ParamView {
                name: "coeff_cos".into(),
                value: &self.coeff_cos,
                trainable: true,
            },
            ParamView {
                name: "coeff_sin".into(),
                value: &self.coeff_sin,
                trainable: true,
            },
            ParamView {
                name: "bias".into(),
                value: &self.bias,
                trainable: true,
            },
        ]
    }

    fn in_dim(&self) -> usize {
        self.in_dim
    }

    fn out_dim(&self) -> usize {
        self.out_dim
    }
}
