//! Numeric building blocks with hand-written backward passes.
//!
//! Everything is generic over [`Float`] so that the same code trains in
//! `f32` and is gradient-checked in `f64`. Batched inputs are row-major:
//! one row per instance.

mod conv;
mod dense;
mod dropout;
mod init;
mod loss;
mod lstm;
mod optim;

pub use conv::{conv1d_maxpool, CharCnn, CnnCache, ConvKernel};
pub use dense::{dense, dense_backward, dense_relu, Activation, Dense};
pub use dropout::{dropout, dropout_backward};
pub use init::{init_he, init_orthogonal};
pub use loss::{softmax_xent, softmax_xent_batch, LossOutput};
pub use lstm::{bilstm_final, BiLstm, BiLstmCache, Lstm, LstmCache};
pub use optim::{sgd_step, OptimizerConfig, OptimizerState, StepStats};

use std::fmt::{Debug, Display};
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use ndarray::{Array2, LinalgScalar, ScalarOperand};
use num_traits::FromPrimitive;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

/// Floating point types the network can be instantiated with.
pub trait Float:
    num_traits::Float
    + LinalgScalar
    + ScalarOperand
    + FromPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("representable constant")
    }
}

impl Float for f32 {}
impl Float for f64 {}

/// A trainable tensor with its gradient, momentum buffer and running average.
///
/// Vectors are stored as `1 × n` matrices.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "F: Float")]
pub struct Parameter<F> {
    pub name: String,
    pub value: Array2<F>,
    #[serde(skip)]
    grad: Array2<F>,
    pub velocity: Array2<F>,
    pub average: Array2<F>,
    pub l2_exempt: bool,
}

impl<F: Float> Parameter<F> {
    pub fn new(name: impl Into<String>, value: Array2<F>) -> Self {
        let dim = value.raw_dim();
        Parameter {
            name: name.into(),
            grad: Array2::zeros(dim),
            velocity: Array2::zeros(dim),
            average: value.clone(),
            value,
            l2_exempt: false,
        }
    }

    pub fn zeros(name: impl Into<String>, rows: usize, cols: usize) -> Self {
        Self::new(name, Array2::zeros((rows, cols)))
    }

    pub fn exempt_from_l2(mut self) -> Self {
        self.l2_exempt = true;
        self
    }

    pub fn shape(&self) -> (usize, usize) {
        self.value.dim()
    }

    pub fn grad(&self) -> &Array2<F> {
        &self.grad
    }

    /// Gradient accumulator; allocated on first use after deserialization.
    pub fn grad_mut(&mut self) -> &mut Array2<F> {
        if self.grad.dim() != self.value.dim() {
            self.grad = Array2::zeros(self.value.raw_dim());
        }
        &mut self.grad
    }

    pub fn zero_grad(&mut self) {
        self.grad_mut().fill(F::zero());
    }

    /// Copy whose values are the running averages.
    pub fn averaged(&self) -> Self {
        Parameter {
            value: self.average.clone(),
            ..self.clone()
        }
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }
}

/// Anything owning parameters.
pub trait HasParams<F> {
    fn params(&self) -> Vec<&Parameter<F>>;
    fn params_mut(&mut self) -> Vec<&mut Parameter<F>>;
}

/// Scatter-adds rows of `src` into the rows of `dst` named by `rows`.
pub(crate) fn scatter_add_rows<F: Float>(dst: &mut Array2<F>, rows: &[usize], src: ndarray::ArrayView2<F>) {
    for (&r, row) in rows.iter().zip(src.outer_iter()) {
        let mut target = dst.row_mut(r);
        target += &row;
    }
}

/// Gathers rows of `table` in the given order.
pub(crate) fn gather_rows<F: Float>(table: &Array2<F>, rows: &[usize]) -> Array2<F> {
    let mut out = Array2::zeros((rows.len(), table.ncols()));
    for (mut dst, &r) in out.outer_iter_mut().zip(rows) {
        dst.assign(&table.row(r));
    }
    out
}

#[cfg(test)]
pub(crate) mod gradcheck {
    //! Central finite differences used by the layer tests.

    /// Max relative error between analytic and numeric gradients. The floor on
    /// the denominator keeps entries that are zero up to difference noise
    /// (about 1e-11 here) from dominating.
    pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
        analytic
            .iter()
            .zip(numeric)
            .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-6))
            .fold(0.0, f64::max)
    }

    /// Numeric gradient of `f` with respect to each entry of `x`.
    pub fn numeric_gradient(x: &mut [f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
        let mut grad = Vec::with_capacity(x.len());
        for i in 0..x.len() {
            let orig = x[i];
            x[i] = orig + h;
            let plus = f(x);
            x[i] = orig - h;
            let minus = f(x);
            x[i] = orig;
            grad.push((plus - minus) / (2.0 * h));
        }
        grad
    }
}
