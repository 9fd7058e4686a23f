//! Spline-based KAN layer in the activation-first formulation: evaluate the
//! B-spline bases per input coordinate, then take a single linear
//! combination, plus a SiLU base path. Sparsity is encouraged by an L1
//! penalty on the spline weights rather than on activations.

use crate::error::{Error, Result};
use crate::matrix::{kaiming_uniform, Activation, Matrix};
use crate::rng::Rng;

use super::bspline::{bspline_basis_and_deriv, uniform_knots};
use super::{Layer, Param, ParamView};

/// out = silu(x) base_weight^T + phi(x) W_spline^T, where phi expands each
/// input into G + k basis values and W_spline may carry a learnable
/// per-edge scaler. Spline weights are stored flattened out x (in*(G+k)).
#[derive(Debug, Clone)]
pub struct EfficientKanLayer {
    in_dim: usize,
    out_dim: usize,
    grid_size: usize,
    spline_order: usize,
    knots: Vec<f64>,
    base_weight: Matrix,
    spline_weight: Matrix,
    spline_scaler: Option<Matrix>,
    l1_strength: f64,
    grad_base: Matrix,
    grad_spline: Matrix,
    grad_scaler: Option<Matrix>,
    cache: Option<Cache>,
}

#[derive(Debug, Clone)]
struct Cache {
    input: Matrix,
    basis: Matrix,
    basis_deriv: Matrix,
    silu: Matrix,
}

impl EfficientKanLayer {
    pub fn new(
        in_dim: usize,
        out_dim: usize,
        grid_size: usize,
        spline_order: usize,
        use_scaler: bool,
        l1_strength: f64,
    ) -> EfficientKanLayer {
        let width = in_dim * (grid_size + spline_order);
        EfficientKanLayer {
            in_dim,
            out_dim,
            grid_size,
            spline_order,
            knots: uniform_knots(grid_size, spline_order),
            base_weight: Matrix::zeros(out_dim, in_dim),
            spline_weight: Matrix::zeros(out_dim, width),
            spline_scaler: use_scaler.then(|| Matrix::filled(out_dim, in_dim, 1.0)),
            l1_strength,
            grad_base: Matrix::zeros(out_dim, in_dim),
            grad_spline: Matrix::zeros(out_dim, width),
            grad_scaler: use_scaler.then(|| Matrix::zeros(out_dim, in_dim)),
            cache: None,
        }
    }

    /// Nonzero start for hidden layers in a 2-layer stack.
    pub fn init_random(&mut self, rng: &mut Rng) -> Result<()> {
        self.base_weight = kaiming_uniform(rng, self.in_dim, self.out_dim, self.in_dim)?;
        for v in self.spline_weight.data_mut() {
            *v = rng.uniform(-0.1, 0.1);
        }
        Ok(())
    }

    pub fn basis_count(&self) -> usize {
        self.grid_size + self.spline_order
    }

    pub fn l1_strength(&self) -> f64 {
        self.l1_strength
    }

    /// l1_strength times the mean absolute spline weight.
    pub fn l1_penalty(&self) -> f64 {
        if self.l1_strength == 0.0 || self.spline_weight.is_empty() {
            return 0.0;
        }
        let mean_abs = self
            .spline_weight
            .data()
            .iter()
            .map(|v| v.abs())
            .sum::<f64>()
            / self.spline_weight.len() as f64;
        self.l1_strength * mean_abs
    }

    /// Adds the penalty's subgradient (zero at exactly zero weights) to the
    /// spline gradient and returns the penalty value.
    pub fn accumulate_l1_grad(&mut self) -> f64 {
        let penalty = self.l1_penalty();
        if self.l1_strength > 0.0 {
            let scale = self.l1_strength / self.spline_weight.len() as f64;
            for (g, &w) in self
                .grad_spline
                .data_mut()
                .iter_mut()
                .zip(self.spline_weight.data())
            {
                *g += scale * w.signum() * if w == 0.0 { 0.0 } else { 1.0 };
            }
        }
        penalty
    }

    pub fn set_weights(&mut self, base: Matrix, spline: Matrix) -> Result<()> {
        let width = self.in_dim * self.basis_count();
        if base.shape() != (self.out_dim, self.in_dim) || spline.shape() != (self.out_dim, width) {
            return Err(Error::Shape(format!(
                "efficient-kan weights must be {}x{} (base) and {}x{} (spline)",
                self.out_dim, self.in_dim, self.out_dim, width
            )));
        }
        self.base_weight = base;
        self.spline_weight = spline;
        Ok(())
    }

    /// Spline weight with the scaler folded in.
    fn effective_spline_weight(&self) -> Matrix {
        let m = self.basis_count();
        match &self.spline_scaler {
            None => self.spline_weight.clone(),
            Some(scaler) => {
                let mut eff = self.spline_weight.clone();
                for j in 0..self.out_dim {
                    for i in 0..self.in_dim {
                        let s = scaler.get(j, i);
                        for b in 0..m {
                            let idx = i * m + b;
                            eff.set(j, idx, eff.get(j, idx) * s);
                        }
                    }
                }
                eff
            }
        }
    }

    fn expand(&self, input: &Matrix) -> (Matrix, Matrix) {
        let batch = input.rows();
        let m = self.basis_count();
        let mut basis = Matrix::zeros(batch, self.in_dim * m);
        let mut basis_deriv = Matrix::zeros(batch, self.in_dim * m);
        for b in 0..batch {
            for i in 0..self.in_dim {
                let (values, deriv) =
                    bspline_basis_and_deriv(input.get(b, i), &self.knots, self.spline_order);
                for (idx, (&v, &d)) in values.iter().zip(&deriv).enumerate() {
                    basis.set(b, i * m + idx, v);
                    basis_deriv.set(b, i * m + idx, d);
                }
            }
        }
        (basis, basis_deriv)
    }
}

impl Layer for EfficientKanLayer {
    fn forward(&mut self, input: &Matrix) -> Result<Matrix> {
        if input.cols() != self.in_dim {
            return Err(Error::Shape(format!(
                "efficient-kan layer expects {} columns, got {}x{}",
                self.in_dim,
                input.rows(),
                input.cols()
            )));
        }
        let (basis, basis_deriv) = self.expand(input);
        let silu = input.map(|x| Activation::Silu.apply(x));
        let mut out = silu.matmul_nt(&self.base_weight)?;
        out.add_assign(&basis.matmul_nt(&self.effective_spline_weight())?)?;
        self.cache = Some(Cache {
            input: input.clone(),
            basis,
            basis_deriv,
            silu,
        });
        Ok(out)
    }

    fn backward(&mut self, grad_out: &Matrix) -> Result<Matrix> {
        let cache = self
            .cache
            .take()
            .ok_or_else(|| Error::State("efficient-kan backward called before forward".into()))?;
        let batch = cache.input.rows();
        if grad_out.shape() != (batch, self.out_dim) {
            return Err(Error::Shape(format!(
                "efficient-kan grad must be {}x{}, got {}x{}",
                batch,
                self.out_dim,
                grad_out.rows(),
                grad_out.cols()
            )));
        }
        let m = self.basis_count();

        // Base path.
        self.grad_base
            .add_assign(&grad_out.matmul_tn(&cache.silu)?)?;
        let base_chain = grad_out.matmul(&self.base_weight)?;
        let silu_deriv = cache.input.map(|x| Activation::Silu.derivative(x));
        let mut grad_in = base_chain.hadamard(&silu_deriv)?;

        // Spline path: gradient w.r.t. the effective weight, then unfold the
        // scaler product rule.
        let grad_eff = grad_out.matmul_tn(&cache.basis)?;
        match (&self.spline_scaler, &mut self.grad_scaler) {
            (Some(scaler), Some(grad_scaler)) => {
                for j in 0..self.out_dim {
                    for i in 0..self.in_dim {
                        let s = scaler.get(j, i);
                        let mut scaler_acc = 0.0;
                        for b in 0..m {
                            let idx = i * m + b;
                            let ge = grad_eff.get(j, idx);
                            self.grad_spline
                                .set(j, idx, self.grad_spline.get(j, idx) + ge * s);
                            scaler_acc += ge * self.spline_weight.get(j, idx);
                        }
                        grad_scaler.set(j, i, grad_scaler.get(j, i) + scaler_acc);
                    }
                }
            }
            _ => {
                self.grad_spline.add_assign(&grad_eff)?;
            }
        }

        // Input gradient through the bases.
        let eff = self.effective_spline_weight();
        let chained = grad_out.matmul(&eff)?;
        for b in 0..batch {
            for i in 0..self.in_dim {
                let mut acc = 0.0;
                for idx in i * m..(i + 1) * m {
                    acc += chained.get(b, idx) * cache.basis_deriv.get(b, idx);
                }
                grad_in.set(b, i, grad_in.get(b, i) + acc);
            }
        }
        Ok(grad_in)
    }

    fn params(&mut self) -> Vec<Param<'_>> {
        let mut out = vec![
            Param {
                name: "base_weight".into(),
                value: &mut self.base_weight,
                grad: &mut self.grad_base,
                trainable: true,
            },
            Param {
                name: "spline_weight".into(),
                value: &mut self.spline_weight,
                grad: &mut self.grad_spline,
                trainable: true,
            },
        ];
        if let (Some(scaler), Some(grad)) = (&mut self.spline_scaler, &mut self.grad_scaler) {
            out.push(Param {
                name: "spline_scaler".into(),
                value: scaler,
                grad,
                trainable: true,
            });
        }
        out
    }

    fn param_views(&self) -> Vec<ParamView<'_>> {
        let mut out = vec![
            ParamView {
                name: "base_weight".into(),
                value: &self.base_weight,
                trainable: true,
            },
            ParamView {
                name: "spline_weight".into(),
                value: &self.spline_weight,
                trainable: true,
            },
        ];
        if let Some(scaler) = &self.spline_scaler {
            out.push(ParamView {
                name: "spline_scaler".into(),
                value: scaler,
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
