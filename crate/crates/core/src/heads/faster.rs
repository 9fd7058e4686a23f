//! Grid-based KAN layer using reflectional switch activation functions
//! (RSWAF): b_i(u) = 1 - tanh^2((u - u_i) * r), with learnable centers u_i
//! and learnable inverse denominator r = 1/h. The basis expansion feeds a
//! single affine map, so forward and backward reduce to standard matrix
//! multiplications.

use crate::error::{Error, Result};
use crate::matrix::{Activation, Matrix};
use crate::rng::Rng;

use super::{Layer, Param, ParamView};

/// b_i(u) = 1 - tanh^2((u - u_i) * r) for every center.
pub fn rswaf_basis(u: f64, centers: &[f64], r: f64) -> Result<Vec<f64>> {
    if r <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "rswaf inverse denominator must be positive, got {r}"
        )));
    }
    Ok(centers
        .iter()
        .map(|&c| {
            let t = ((u - c) * r).tanh();
            1.0 - t * t
        })
        .collect())
}

/// Centers spread uniformly over [-1, 1] (the midpoint for G = 1).
fn uniform_centers(grid_size: usize) -> Vec<f64> {
    if grid_size == 1 {
        return vec![0.0];
    }
    (0..grid_size)
        .map(|i| -1.0 + 2.0 * i as f64 / (grid_size - 1) as f64)
        .collect()
}

/// out = phi(x) W^T + bias, phi expanding each input into G RSWAF values;
/// optionally plus a parallel silu(x) affine path. The linear weight is
/// stored out x (in*G).
#[derive(Debug, Clone)]
pub struct FasterKanLayer {
    in_dim: usize,
    out_dim: usize,
    grid_size: usize,
    centers: Matrix,
    inv_denominator: Matrix,
    linear_weight: Matrix,
    bias: Matrix,
    base_weight: Option<Matrix>,
    base_bias: Option<Matrix>,
    grad_centers: Matrix,
    grad_inv_denominator: Matrix,
    grad_linear: Matrix,
    grad_bias: Matrix,
    grad_base_weight: Option<Matrix>,
    grad_base_bias: Option<Matrix>,
    cache: Option<Cache>,
}

#[derive(Debug, Clone)]
struct Cache {
    input: Matrix,
    basis: Matrix,
    tanh_vals: Matrix,
    silu: Option<Matrix>,
}

impl FasterKanLayer {
    /// Kaiming-uniform linear weight (PyTorch linear convention,
    /// bound 1/sqrt(fan_in)), centers uniformly spaced on [-1, 1], and
    /// r = G/2 so neighboring bumps overlap at roughly half height.
    pub fn new(
        in_dim: usize,
        out_dim: usize,
        grid_size: usize,
        use_silu_path: bool,
        rng: &mut Rng,
    ) -> Result<FasterKanLayer> {
        let width = in_dim * grid_size;
        let bound = 1.0 / (width as f64).sqrt();
        let mut linear_weight = Matrix::zeros(out_dim, width);
        for v in linear_weight.data_mut() {
            *v = rng.uniform(-bound, bound);
        }
        let mut base_weight = None;
        if use_silu_path {
            let base_bound = 1.0 / (in_dim as f64).sqrt();
            let mut w = Matrix::zeros(out_dim, in_dim);
            for v in w.data_mut() {
                *v = rng.uniform(-base_bound, base_bound);
            }
            base_weight = Some(w);
        }
        Ok(FasterKanLayer {
            in_dim,
            out_dim,
            grid_size,
            centers: Matrix::from_vec(1, grid_size, uniform_centers(grid_size))?,
            inv_denominator: Matrix::filled(1, 1, grid_size as f64 / 2.0),
            linear_weight,
            bias: Matrix::zeros(1, out_dim),
            base_weight: base_weight.clone(),
            base_bias: use_silu_path.then(|| Matrix::zeros(1, out_dim)),
            grad_centers: Matrix::zeros(1, grid_size),
            grad_inv_denominator: Matrix::zeros(1, 1),
            grad_linear: Matrix::zeros(out_dim, width),
            grad_bias: Matrix::zeros(1, out_dim),
            grad_base_weight: base_weight
                .as_ref()
                .map(|w| Matrix::zeros(w.rows(), w.cols())),
            grad_base_bias: use_silu_path.then(|| Matrix::zeros(1, out_dim)),
            cache: None,
        })
    }

    pub fn grid_size(&self) -> usize {
        self.grid_size
    }

    pub fn inv_denominator(&self) -> f64 {
        self.inv_denominator.get(0, 0)
    }

    pub fn set_linear(&mut self, weight: Matrix, bias: Matrix) -> Result<()> {
        let width = self.in_dim * self.grid_size;
        if weight.shape() != (self.out_dim, width) || bias.shape() != (1, self.out_dim) {
            return Err(Error::Shape(format!(
                "faster-kan linear must be {}x{} with 1x{} bias",
                self.out_dim, width, self.out_dim
            )));
        }
        self.linear_weight = weight;
        self.bias = bias;
        Ok(())
    }

    pub fn set_grid(&mut self, centers: Vec<f64>, r: f64) -> Result<()> {
        if centers.len() != self.grid_size {
            return Err(Error::Shape(format!(
                "faster-kan expects {} centers, got {}",
                self.grid_size,
                centers.len()
            )));
        }
        if r <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "inverse denominator must be positive, got {r}"
            )));
        }
        self.centers = Matrix::from_vec(1, self.grid_size, centers)?;
        self.inv_denominator = Matrix::filled(1, 1, r);
        Ok(())
    }

    fn expand(&self, input: &Matrix) -> Result<(Matrix, Matrix)> {
        let r = self.inv_denominator.get(0, 0);
        if r <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "rswaf inverse denominator must be positive, got {r}"
            )));
        }
        let batch = input.rows();
        let width = self.in_dim * self.grid_size;
        let mut basis = Matrix::zeros(batch, width);
        let mut tanh_vals = Matrix::zeros(batch, width);
        for b in 0..batch {
            for i in 0..self.in_dim {
                let u = input.get(b, i);
                for g in 0..self.grid_size {
                    let t = ((u - self.centers.get(0, g)) * r).tanh();
                    let idx = i * self.grid_size + g;
                    tanh_vals.set(b, idx, t);
                    basis.set(b, idx, 1.0 - t * t);
                }
            }
        }
        Ok((basis, tanh_vals))
    }
}

impl Layer for FasterKanLayer {
    fn forward(&mut self, input: &Matrix) -> Result<Matrix> {
        if input.cols() != self.in_dim {
            return Err(Error::Shape(format!(
                "faster-kan layer expects {} columns, got {}x{}",
                self.in_dim,
                input.rows(),
                input.cols()
            )));
        }
        let (basis, tanh_vals) = self.expand(input)?;
        let mut out = basis.matmul_nt(&self.linear_weight)?;
        out.add_row_broadcast(&self.bias)?;
        let mut silu = None;
        if let (Some(w), Some(b)) = (&self.base_weight, &self.base_bias) {
            let s = input.map(|x| Activation::Silu.apply(x));
            let mut base_out = s.matmul_nt(w)?;
            base_out.add_row_broadcast(b)?;
            out.add_assign(&base_out)?;
            silu = Some(s);
        }
        self.cache = Some(Cache {
            input: input.clone(),
            basis,
            tanh_vals,
            silu,
        });
        Ok(out)
    }

    fn backward(&mut self, grad_out: &Matrix) -> Result<Matrix> {
        let cache = self
            .cache
            .take()
            .ok_or_else(|| Error::State("faster-kan backward called before forward".into()))?;
        let batch = cache.input.rows();
        if grad_out.shape() != (batch, self.out_dim) {
            return Err(Error::Shape(format!(
                "faster-kan grad must be {}x{}, got {}x{}",
                batch,
                self.out_dim,
                grad_out.rows(),
                grad_out.cols()
            )));
        }
        self.grad_linear
            .add_assign(&grad_out.matmul_tn(&cache.basis)?)?;
        self.grad_bias.add_assign(&grad_out.col_sums())?;

        // d b / d v = -2 tanh(v) (1 - tanh^2(v)) with v = (u - u_i) r;
        // dv/du = r, dv/du_i = -r, dv/dr = u - u_i.
        let chained = grad_out.matmul(&self.linear_weight)?;
        let r = self.inv_denominator.get(0, 0);
        let mut grad_in = Matrix::zeros(batch, self.in_dim);
        let mut grad_r = 0.0;
        for b in 0..batch {
            for i in 0..self.in_dim {
                let u = cache.input.get(b, i);
                let mut acc = 0.0;
                for g in 0..self.grid_size {
                    let idx = i * self.grid_size + g;
                    let t = cache.tanh_vals.get(b, idx);
                    let db_dv = -2.0 * t * cache.basis.get(b, idx);
                    let upstream = chained.get(b, idx) * db_dv;
                    acc += upstream * r;
                    self.grad_centers
                        .set(0, g, self.grad_centers.get(0, g) - upstream * r);
                    grad_r += upstream * (u - self.centers.get(0, g));
                }
                grad_in.set(b, i, acc);
            }
        }
        self.grad_inv_denominator
            .set(0, 0, self.grad_inv_denominator.get(0, 0) + grad_r);

        if let (Some(w), Some(silu)) = (&self.base_weight, &cache.silu) {
            if let Some(gw) = &mut self.grad_base_weight {
                gw.add_assign(&grad_out.matmul_tn(silu)?)?;
            }
            if let Some(gb) = &mut self.grad_base_bias {
                gb.add_assign(&grad_out.col_sums())?;
            }
            let base_chain = grad_out.matmul(w)?;
            let silu_deriv = cache.input.map(|x| Activation::Silu.derivative(x));
            grad_in.add_assign(&base_chain.hadamard(&silu_deriv)?)?;
        }
        Ok(grad_in)
    }

    fn params(&mut self) -> Vec<Param<'_>> {
        let mut out = vec![
            Param {
                name: "linear_weight".into(),
                value: &mut self.linear_weight,
                grad: &mut self.grad_linear,
                trainable: true,
            },
            Param {
                name: "bias".into(),
                value: &mut self.bias,
                grad: &mut self.grad_bias,
                trainable: true,
            },
            Param {
                name: "centers".into(),
                value: &mut self.centers,
                grad: &mut self.grad_centers,
                trainable: true,
            },
            Param {
                name: "inv_denominator".into(),
                value: &mut self.inv_denominator,
                grad: &mut self.grad_inv_denominator,
                trainable: true,
            },
        ];
        if let (Some(w), Some(gw)) = (&mut self.base_weight, &mut self.grad_base_weight) {
            out.push(Param {
                name: "base_weight".into(),
                value: w,
                grad: gw,
                trainable: true,
            });
        }
        if let (Some(b), Some(gb)) = (&mut self.base_bias, &mut self.grad_base_bias) {
            out.push(Param {
                name: "base_bias".into(),
                value: b,
                grad: gb,
                trainable: true,
            });
        }
        out
    }

    fn param_views(&self) -> Vec<ParamView<'_>> {
        let mut out = vec![
            ParamView {
                name: "linear_weight".into(),
                value: &self.linear_weight,
                trainable: true,
            },
            ParamView {
                name: "bias".into(),
                value: &self.bias,
                trainable: true,
            },
            ParamView {
                name: "centers".into(),
                value: &self.centers,
                trainable: true,
            },
            ParamView {
                name: "inv_denominator".into(),
                value: &self.inv_denominator,
                trainable: true,
            },
        ];
        if let Some(w) = &self.base_weight {
            out.push(ParamView {
                name: "base_weight".into(),
                value: w,
                trainable: true,
            });
        }
        if let Some(b) = &self.base_bias {
            out.push(ParamView {
                name: "base_bias".into(),
                value: b,
                trainable: true,
            });
        }
        out
    }

    fn in_dim(&self) -> usize {
        self.in_dim
    }

    fn out_dim(&self) -> usize {
        self.out_dim
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rswaf_is_one_at_center() {
        let b = rswaf_basis(0.3, &[0.3, -0.5], 2.0).unwrap();
        assert_eq!(b[0], 1.0);
        assert!(b[1] < 1.0);
    }

    #[test]
    fn rswaf_unit_offset_value() {
        // (u - u_i) * r = 1 gives 1 - tanh^2(1)
        let b = rswaf_basis(1.0, &[0.0], 1.0).unwrap();
        assert_relative_eq!(b[0], 0.419_974_341_614_026_14, max_relative = 1e-12);
    }

    #[test]
    fn rswaf_reflectional_symmetry() {
        for delta in [0.1, 0.5, 2.0] {
            let plus = rswaf_basis(0.2 + delta, &[0.2], 1.7).unwrap();
            let minus = rswaf_basis(0.2 - delta, &[0.2], 1.7).unwrap();
            assert_relative_eq!(plus[0], minus[0], max_relative = 1e-15);
        }
    }

    #[test]
    fn rswaf_rejects_nonpositive_r() {
        assert!(rswaf_basis(0.0, &[0.0], 0.0).is_err());
        assert!(rswaf_basis(0.0, &[0.0], -1.0).is_err());
    }

    #[test]
    fn rswaf_bounded_in_unit_interval() {
        let mut rng = Rng::new(3);
        let centers = uniform_centers(8);
        for _ in 0..500 {
            let u = rng.uniform(-3.0, 3.0);
            for &v in &rswaf_basis(u, &centers, 4.0).unwrap() {
                assert!(v > 0.0 && v <= 1.0, "value {v}");
            }
        }
    }

    #[test]
    fn zero_weight_outputs_bias() {
        let mut rng = Rng::new(1);
        let mut layer = FasterKanLayer::new(3, 2, 4, false, &mut rng).unwrap();
        layer
            .set_linear(
                Matrix::zeros(2, 12),
                Matrix::from_rows(&[vec![0.5, -1.5]]).unwrap(),
            )
            .unwrap();
        let x = Matrix::from_rows(&[vec![0.1, 0.2, 0.3], vec![-0.9, 0.0, 0.4]]).unwrap();
        let y = layer.forward(&x).unwrap();
        for b in 0..2 {
            assert_eq!(y.row(b), &[0.5, -1.5]);
        }
    }

    #[test]
    fn single_cell_hand_case() {
        // in=1, G=1, center 0, r=1, weight [[2]], bias [0], x=0:
        // 2 * (1 - tanh^2(0)) = 2
        let mut rng = Rng::new(1);
        let mut layer = FasterKanLayer::new(1, 1, 1, false, &mut rng).unwrap();
        layer.set_grid(vec![0.0], 1.0).unwrap();
        layer
            .set_linear(Matrix::filled(1, 1, 2.0), Matrix::zeros(1, 1))
            .unwrap();
        let y = layer.forward(&Matrix::zeros(1, 1)).unwrap();
        assert_eq!(y.get(0, 0), 2.0);
    }

    #[test]
    fn matches_naive_per_sample_loop() {
        let mut rng = Rng::new(5);
        let (in_dim, out_dim, g) = (4, 3, 5);
        let mut layer = FasterKanLayer::new(in_dim, out_dim, g, true, &mut rng).unwrap();
        let mut x = Matrix::zeros(2, in_dim);
        for v in x.data_mut() {
            *v = rng.uniform(-1.0, 1.0);
        }
        let y = layer.forward(&x).unwrap();

        let r = layer.inv_denominator();
        for b in 0..2 {
            for j in 0..out_dim {
                let mut expected = layer.bias.get(0, j);
                for i in 0..in_dim {
                    let u = x.get(b, i);
                    let basis = rswaf_basis(u, layer.centers.row(0), r).unwrap();
                    for (gi, &bv) in basis.iter().enumerate() {
                        expected += bv * layer.linear_weight.get(j, i * g + gi);
                    }
                    expected +=
                        Activation::Silu.apply(u) * layer.base_weight.as_ref().unwrap().get(j, i);
                }
                expected += layer.base_bias.as_ref().unwrap().get(0, j);
                assert!(
                    (y.get(b, j) - expected).abs() < 1e-12,
                    "sample {b} output {j}"
                );
            }
        }
    }

    #[test]
    fn center_gradient_opposes_input_gradient() {
        // For a single bump, d b / d u_i = -d b / d u.
        let mut rng = Rng::new(2);
        let mut layer = FasterKanLayer::new(1, 1, 1, false, &mut rng).unwrap();
        layer.set_grid(vec![0.2], 1.5).unwrap();
        layer
            .set_linear(Matrix::filled(1, 1, 1.0), Matrix::zeros(1, 1))
            .unwrap();
        let x = Matrix::from_rows(&[vec![0.7]]).unwrap();
        layer.forward(&x).unwrap();
        let grad_in = layer
            .backward(&Matrix::from_rows(&[vec![1.0]]).unwrap())
            .unwrap();
        let du = grad_in.get(0, 0);
        let dc = layer.grad_centers.get(0, 0);
        assert_relative_eq!(du, -dc, max_relative = 1e-12);
        // and the sign itself: u > center, so b is decreasing in u there
        assert!(du < 0.0 && dc > 0.0);
    }
}
