use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{init_he, Float, HasParams, Parameter};
use crate::error::{Error, Result};

/// One convolution kernel of a given width over character positions.
///
/// The weight is `channels_out × (width · channels_in)`; column `j · channels_in + c`
/// multiplies input channel `c` at offset `j` of the window.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "F: Float")]
pub struct ConvKernel<F> {
    pub width: usize,
    pub weight: Parameter<F>,
    pub bias: Parameter<F>,
}

/// Copies every window of `width` consecutive rows of each word into one row.
///
/// `x` holds `words · positions` rows of `channels` values.
fn im2col<F: Float>(x: ArrayView2<F>, positions: usize, width: usize) -> Array2<F> {
    let channels = x.ncols();
    let words = x.nrows() / positions;
    let windows = positions + 1 - width;
    let mut cols = Array2::zeros((words * windows, width * channels));
    for w in 0..words {
        for p in 0..windows {
            let mut row = cols.row_mut(w * windows + p);
            for j in 0..width {
                row.slice_mut(s![j * channels..(j + 1) * channels])
                    .assign(&x.row(w * positions + p + j));
            }
        }
    }
    cols
}

/// Saved forward state of one kernel.
#[derive(Debug)]
struct KernelCache<F> {
    cols: Array2<F>,
    /// Argmax window per (word, channel), `None` when the ReLU output is zero.
    argmax: Array2<Option<usize>>,
}

impl<F: Float> ConvKernel<F> {
    pub fn new<R: Rng + ?Sized>(name: &str, width: usize, channels_in: usize, channels_out: usize, rng: &mut R) -> Self {
        let fan_in = width * channels_in;
        ConvKernel {
            width,
            weight: Parameter::new(format!("{}.weight", name), init_he(channels_out, fan_in, fan_in, rng)),
            bias: Parameter::zeros(format!("{}.bias", name), 1, channels_out),
        }
    }

    pub fn channels_out(&self) -> usize {
        self.weight.value.nrows()
    }

    fn forward(&self, x: ArrayView2<F>, positions: usize) -> (Array2<F>, KernelCache<F>) {
        let words = x.nrows() / positions;
        let windows = positions + 1 - self.width;
        let cols = im2col(x, positions, self.width);
        let mut conv = cols.dot(&self.weight.value.t());
        conv += &self.bias.value.row(0);

        let channels = self.channels_out();
        let mut pooled = Array2::zeros((words, channels));
        let mut argmax = Array2::from_elem((words, channels), None);
        for w in 0..words {
            let block = conv.slice(s![w * windows..(w + 1) * windows, ..]);
            for o in 0..channels {
                // First maximum wins ties.
                let mut best = 0;
                for p in 1..windows {
                    if block[[p, o]] > block[[best, o]] {
                        best = p;
                    }
                }
                let value = block[[best, o]];
                if value > F::zero() {
                    pooled[[w, o]] = value;
                    argmax[[w, o]] = Some(best);
                }
            }
        }
        (pooled, KernelCache { cols, argmax })
    }

    fn backward(&mut self, cache: &KernelCache<F>, d_pooled: ArrayView2<F>, positions: usize, d_x: &mut Array2<F>) {
        let (words, channels) = d_pooled.dim();
        let windows = positions + 1 - self.width;
        let channels_in = d_x.ncols();

        let mut d_conv = Array2::zeros((words * windows, channels));
        for w in 0..words {
            for o in 0..channels {
                if let Some(p) = cache.argmax[[w, o]] {
                    d_conv[[w * windows + p, o]] = d_pooled[[w, o]];
                }
            }
        }

        *self.weight.grad_mut() += &d_conv.t().dot(&cache.cols);
        let mut db = self.bias.grad_mut().row_mut(0);
        db += &d_conv.sum_axis(Axis(0));

        let d_cols = d_conv.dot(&self.weight.value);
        for w in 0..words {
            for p in 0..windows {
                let row = d_cols.row(w * windows + p);
                for j in 0..self.width {
                    let mut target = d_x.row_mut(w * positions + p + j);
                    target += &row.slice(s![j * channels_in..(j + 1) * channels_in]);
                }
            }
        }
    }
}

/// Several kernels of different widths whose max-pooled outputs are concatenated.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "F: Float")]
pub struct CharCnn<F> {
    pub kernels: Vec<ConvKernel<F>>,
}

#[derive(Debug)]
pub struct CnnCache<F> {
    positions: usize,
    kernels: Vec<KernelCache<F>>,
}

impl<F: Float> CharCnn<F> {
    pub fn new<R: Rng + ?Sized>(widths: &[usize], channels_in: usize, channels_out: usize, rng: &mut R) -> Self {
        CharCnn {
            kernels: widths
                .iter()
                .map(|&w| ConvKernel::new(&format!("cnn.k{}", w), w, channels_in, channels_out, rng))
                .collect(),
        }
    }

    pub fn output_dim(&self) -> usize {
        self.kernels.iter().map(ConvKernel::channels_out).sum()
    }

    /// `x` stacks the `positions × channels_in` matrices of several words.
    /// Returns one row of pooled features per word, kernels in order.
    pub fn forward(&self, x: ArrayView2<F>, positions: usize) -> Result<(Array2<F>, CnnCache<F>)> {
        if positions == 0 || !x.nrows().is_multiple_of(positions) {
            return Err(Error::Shape(format!("{} rows is not a multiple of {}", x.nrows(), positions)));
        }
        if let Some(k) = self.kernels.iter().find(|k| k.width > positions) {
            return Err(Error::Shape(format!(
                "kernel width {} exceeds input length {}",
                k.width, positions
            )));
        }
        if let Some(k) = self.kernels.iter().find(|k| k.weight.value.ncols() != k.width * x.ncols()) {
            return Err(Error::Shape(format!(
                "kernel expects {} input channels, input has {}",
                k.weight.value.ncols() / k.width,
                x.ncols()
            )));
        }
        let words = x.nrows() / positions;
        let mut out = Array2::zeros((words, self.output_dim()));
        let mut caches = Vec::with_capacity(self.kernels.len());
        let mut offset = 0;
        for kernel in &self.kernels {
            let (pooled, cache) = kernel.forward(x, positions);
            out.slice_mut(s![.., offset..offset + pooled.ncols()]).assign(&pooled);
            offset += pooled.ncols();
            caches.push(cache);
        }
        Ok((out, CnnCache { positions, kernels: caches }))
    }

    /// Accumulates kernel gradients and returns the input gradient.
    pub fn backward(&mut self, cache: &CnnCache<F>, d_out: ArrayView2<F>, channels_in: usize) -> Array2<F> {
        let words = d_out.nrows();
        let mut d_x = Array2::zeros((words * cache.positions, channels_in));
        let mut offset = 0;
        for (kernel, kc) in self.kernels.iter_mut().zip(&cache.kernels) {
            let width = kernel.channels_out();
            let d = d_out.slice(s![.., offset..offset + width]);
            kernel.backward(kc, d, cache.positions, &mut d_x);
            offset += width;
        }
        d_x
    }
}

impl<F: Float> HasParams<F> for CharCnn<F> {
    fn params(&self) -> Vec<&Parameter<F>> {
        self.kernels.iter().flat_map(|k| [&k.weight, &k.bias]).collect()
    }

    fn params_mut(&mut self) -> Vec<&mut Parameter<F>> {
        self.kernels
            .iter_mut()
            .flat_map(|k| [&mut k.weight, &mut k.bias])
            .collect()
    }
}

/// Convolution with ReLU followed by max-over-time pooling for one word.
///
/// `chars` has one row per position; `kernel` is laid out as in [`ConvKernel`].
pub fn conv1d_maxpool<F: Float>(
    chars: ArrayView2<F>,
    kernel: ArrayView2<F>,
    bias: ArrayView1<F>,
    width: usize,
) -> Result<Array1<F>> {
    if chars.nrows() < width {
        return Err(Error::Shape(format!(
            "input length {} is shorter than kernel width {}",
            chars.nrows(),
            width
        )));
    }
    if kernel.ncols() != width * chars.ncols() || kernel.nrows() != bias.len() {
        return Err(Error::Shape(format!(
            "kernel {:?} does not fit width {} over {} channels",
            kernel.dim(),
            width,
            chars.ncols()
        )));
    }
    let k = ConvKernel {
        width,
        weight: Parameter::new("k", kernel.to_owned()),
        bias: Parameter::new("b", bias.to_owned().insert_axis(Axis(0))),
    };
    let (pooled, _) = k.forward(chars, chars.nrows());
    Ok(pooled.row(0).to_owned())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::{max_relative_error, numeric_gradient};
    use ndarray::{arr1, Array};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    /// One-hot rows for symbol ids over an alphabet of `size`; id `None` is a zero row.
    fn one_hot(ids: &[Option<usize>], size: usize) -> Array2<f64> {
        let mut m = Array2::zeros((ids.len(), size));
        for (p, id) in ids.iter().enumerate() {
            if let Some(i) = id {
                m[[p, *i]] = 1.0;
            }
        }
        m
    }

    #[test]
    fn trigram_detector_is_position_independent() {
        // Alphabet {0,1,2}; the kernel fires on the trigram 2-0-1.
        let mut kernel = Array2::<f64>::zeros((1, 9));
        kernel[[0, 2]] = 1.0 / 3.0; // offset 0, symbol 2
        kernel[[0, 3]] = 1.0 / 3.0; // offset 1, symbol 0
        kernel[[0, 7]] = 1.0 / 3.0; // offset 2, symbol 1
        let bias = arr1(&[0.25]);
        for start in 0..5 {
            let mut ids = vec![None; 7];
            ids[start] = Some(2);
            ids[start + 1] = Some(0);
            ids[start + 2] = Some(1);
            let out = conv1d_maxpool(one_hot(&ids, 3).view(), kernel.view(), bias.view(), 3).unwrap();
            assert!((out[0] - 1.25).abs() < 1e-12, "start {}: {}", start, out[0]);
        }
    }

    #[test]
    fn zero_kernel() {
        let chars = Array2::<f64>::ones((5, 2));
        let out = conv1d_maxpool(chars.view(), Array2::zeros((3, 6)).view(), Array1::zeros(3).view(), 3).unwrap();
        assert_eq!(out, Array1::zeros(3));
    }

    #[test]
    fn too_short() {
        let chars = Array2::<f64>::ones((2, 2));
        assert!(conv1d_maxpool(chars.view(), Array2::zeros((1, 6)).view(), Array1::zeros(1).view(), 3).is_err());
    }

    #[test]
    fn matches_brute_force_sliding_window() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x: Array2<f64> = Array::from_shape_simple_fn((8, 2), || rng.sample(StandardNormal));
        let k: Array2<f64> = Array::from_shape_simple_fn((4, 6), || rng.sample(StandardNormal));
        let b: Array1<f64> = Array::from_shape_simple_fn(4, || rng.sample(StandardNormal));
        let out = conv1d_maxpool(x.view(), k.view(), b.view(), 3).unwrap();
        for o in 0..4 {
            let mut best = f64::NEG_INFINITY;
            for p in 0..6 {
                let mut acc = b[o];
                for j in 0..3 {
                    for c in 0..2 {
                        acc += k[[o, j * 2 + c]] * x[[p + j, c]];
                    }
                }
                best = best.max(acc.max(0.0));
            }
            assert!((out[o] - best).abs() < 1e-12);
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let positions = 7;
            let mut cnn: CharCnn<f64> = CharCnn::new(&[2, 3], 3, 4, &mut rng);
            for k in cnn.kernels.iter_mut() {
                k.bias.value.mapv_inplace(|_| 0.5);
            }
            let x: Array2<f64> = Array::from_shape_simple_fn((3 * positions, 3), || rng.sample(StandardNormal));
            let probe: Array2<f64> = Array::from_shape_simple_fn((3, 8), || rng.sample(StandardNormal));

            let (_, cache) = cnn.forward(x.view(), positions).unwrap();
            let d_x = cnn.backward(&cache, probe.view(), 3);

            let mut xs: Vec<f64> = x.iter().copied().collect();
            let numeric = numeric_gradient(&mut xs, 1e-5, |v| {
                let x = Array2::from_shape_vec((3 * positions, 3), v.to_vec()).unwrap();
                (cnn.forward(x.view(), positions).unwrap().0 * &probe).sum()
            });
            let analytic: Vec<f64> = d_x.iter().copied().collect();
            assert!(max_relative_error(&analytic, &numeric) < 1e-4);

            let mut ws: Vec<f64> = cnn.kernels[1].weight.value.iter().copied().collect();
            let shape = cnn.kernels[1].weight.value.raw_dim();
            let mut probe_cnn = cnn.clone();
            let numeric = numeric_gradient(&mut ws, 1e-5, |v| {
                probe_cnn.kernels[1].weight.value = Array2::from_shape_vec(shape, v.to_vec()).unwrap();
                (probe_cnn.forward(x.view(), positions).unwrap().0 * &probe).sum()
            });
            let analytic: Vec<f64> = cnn.kernels[1].weight.grad().iter().copied().collect();
            assert!(max_relative_error(&analytic, &numeric) < 1e-4);
        }
    }
}
