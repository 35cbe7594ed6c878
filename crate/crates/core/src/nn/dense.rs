use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{init_he, Float, HasParams, Parameter};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Relu,
    Identity,
}

/// `act(x · Wᵀ + b)` for a batch of rows `x`; `w` is `out × in`, `b` has `out` entries.
pub fn dense<F: Float>(
    x: ArrayView2<F>,
    w: ArrayView2<F>,
    b: ArrayView1<F>,
    activation: Activation,
) -> Result<Array2<F>> {
    if x.ncols() != w.ncols() || w.nrows() != b.len() {
        return Err(Error::Shape(format!(
            "input {:?}, weight {:?}, bias {}",
            x.dim(),
            w.dim(),
            b.len()
        )));
    }
    let mut out = x.dot(&w.t());
    out += &b;
    if activation == Activation::Relu {
        out.mapv_inplace(|v| v.max(F::zero()));
    }
    Ok(out)
}

/// Backward pass of [`dense`]. Returns `(dx, dW, db)`.
///
/// `out` is the forward output, which is enough to gate the ReLU.
pub fn dense_backward<F: Float>(
    x: ArrayView2<F>,
    w: ArrayView2<F>,
    out: ArrayView2<F>,
    mut d_out: Array2<F>,
    activation: Activation,
) -> (Array2<F>, Array2<F>, Array1<F>) {
    if activation == Activation::Relu {
        ndarray::Zip::from(&mut d_out).and(&out).for_each(|d, &o| {
            if o <= F::zero() {
                *d = F::zero();
            }
        });
    }
    let dw = d_out.t().dot(&x);
    let db = d_out.sum_axis(Axis(0));
    let dx = d_out.dot(&w);
    (dx, dw, db)
}

/// `max(0, W x + b)` for a single vector.
pub fn dense_relu<F: Float>(x: ArrayView1<F>, w: ArrayView2<F>, b: ArrayView1<F>) -> Result<Array1<F>> {
    let out = dense(x.insert_axis(Axis(0)), w, b, Activation::Relu)?;
    Ok(out.row(0).to_owned())
}

/// A fully connected layer.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "F: Float")]
pub struct Dense<F> {
    pub weight: Parameter<F>,
    pub bias: Parameter<F>,
    pub activation: Activation,
}

impl<F: Float> Dense<F> {
    /// He-initialized weights, zero bias.
    pub fn new<R: Rng + ?Sized>(
        name: &str,
        inputs: usize,
        outputs: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        Dense {
            weight: Parameter::new(format!("{}.weight", name), init_he(outputs, inputs, inputs, rng)),
            bias: Parameter::zeros(format!("{}.bias", name), 1, outputs),
            activation,
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.value.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weight.value.nrows()
    }

    pub fn forward(&self, x: ArrayView2<F>) -> Result<Array2<F>> {
        dense(x, self.weight.value.view(), self.bias.value.row(0), self.activation)
    }

    /// Accumulates parameter gradients and returns the input gradient.
    pub fn backward(&mut self, x: ArrayView2<F>, out: ArrayView2<F>, d_out: Array2<F>) -> Array2<F> {
        let (dx, dw, db) = dense_backward(x, self.weight.value.view(), out, d_out, self.activation);
        *self.weight.grad_mut() += &dw;
        let mut bias_grad = self.bias.grad_mut().row_mut(0);
        bias_grad += &db;
        dx
    }
}

impl<F: Float> HasParams<F> for Dense<F> {
    fn params(&self) -> Vec<&Parameter<F>> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Parameter<F>> {
        vec![&mut self.weight, &mut self.bias]
    }
}
