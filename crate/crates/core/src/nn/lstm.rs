use ndarray::{s, Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{init_orthogonal, Float, HasParams, Parameter};
use crate::error::{Error, Result};

/// A unidirectional LSTM. Gate blocks are ordered input, forget, output, cell.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "F: Float")]
pub struct Lstm<F> {
    pub input_weight: Parameter<F>,
    pub recurrent_weight: Parameter<F>,
    pub bias: Parameter<F>,
}

#[derive(Debug)]
struct StepCache<F> {
    x: Array2<F>,
    h_prev: Array2<F>,
    c_prev: Array2<F>,
    /// Activated gates, `words × 4H`.
    gates: Array2<F>,
    tanh_c: Array2<F>,
    active: Vec<bool>,
}

#[derive(Debug)]
pub struct LstmCache<F> {
    steps: Vec<StepCache<F>>,
}

fn sigmoid<F: Float>(x: F) -> F {
    F::one() / (F::one() + (-x).exp())
}

impl<F: Float> Lstm<F> {
    /// Orthogonal initialization of every gate block, zero biases.
    /// LSTM parameters are exempt from L2 regularization.
    pub fn new<R: Rng + ?Sized>(name: &str, input: usize, hidden: usize, rng: &mut R) -> Self {
        let mut wx = Array2::zeros((4 * hidden, input));
        let mut wh = Array2::zeros((4 * hidden, hidden));
        for g in 0..4 {
            wx.slice_mut(s![g * hidden..(g + 1) * hidden, ..])
                .assign(&init_orthogonal::<F, R>(hidden, input, rng));
            wh.slice_mut(s![g * hidden..(g + 1) * hidden, ..])
                .assign(&init_orthogonal::<F, R>(hidden, hidden, rng));
        }
        Lstm {
            input_weight: Parameter::new(format!("{}.input_weight", name), wx).exempt_from_l2(),
            recurrent_weight: Parameter::new(format!("{}.recurrent_weight", name), wh).exempt_from_l2(),
            bias: Parameter::zeros(format!("{}.bias", name), 1, 4 * hidden).exempt_from_l2(),
        }
    }

    pub fn hidden(&self) -> usize {
        self.recurrent_weight.value.ncols()
    }

    pub fn input(&self) -> usize {
        self.input_weight.value.ncols()
    }

    /// Runs over time-major inputs (`xs[t]` is `words × input`). Word `u` is
    /// processed for its first `lengths[u]` steps; its state is frozen after that.
    /// Returns the final hidden state of every word.
    pub fn forward(&self, xs: &[Array2<F>], lengths: &[usize]) -> (Array2<F>, LstmCache<F>) {
        let words = lengths.len();
        let hidden = self.hidden();
        let mut h = Array2::zeros((words, hidden));
        let mut c = Array2::zeros((words, hidden));
        let mut steps = Vec::with_capacity(xs.len());

        for (t, x) in xs.iter().enumerate() {
            let active: Vec<bool> = lengths.iter().map(|&l| t < l).collect();
            let mut z = x.dot(&self.input_weight.value.t()) + h.dot(&self.recurrent_weight.value.t());
            z += &self.bias.value.row(0);
            {
                let (mut ifo, mut g) = z.view_mut().split_at(Axis(1), 3 * hidden);
                ifo.mapv_inplace(sigmoid);
                g.mapv_inplace(|v| v.tanh());
            }
            let gate = |k: usize| z.slice(s![.., k * hidden..(k + 1) * hidden]);
            let c_new = &gate(1) * &c + &gate(0) * &gate(3);
            let tanh_c = c_new.mapv(|v| v.tanh());
            let h_new = &gate(2) * &tanh_c;

            let h_prev = h.clone();
            let c_prev = c.clone();
            for (u, &a) in active.iter().enumerate() {
                if a {
                    h.row_mut(u).assign(&h_new.row(u));
                    c.row_mut(u).assign(&c_new.row(u));
                }
            }
            steps.push(StepCache {
                x: x.clone(),
                h_prev,
                c_prev,
                gates: z,
                tanh_c,
                active,
            });
        }
        (h, LstmCache { steps })
    }

    /// Backpropagates from the gradient of the final hidden states.
    pub fn backward(&mut self, cache: &LstmCache<F>, d_h_final: Array2<F>) -> Vec<Array2<F>> {
        let hidden = self.hidden();
        let mut dh = d_h_final;
        let mut dc: Array2<F> = Array2::zeros(dh.raw_dim());
        let mut d_xs = Vec::with_capacity(cache.steps.len());
        let one = F::one();

        for step in cache.steps.iter().rev() {
            let gate = |k: usize| step.gates.slice(s![.., k * hidden..(k + 1) * hidden]);
            let (i, f, o, g) = (gate(0), gate(1), gate(2), gate(3));

            let mut dz: Array2<F> = Array2::zeros(step.gates.raw_dim());
            let mut dc_prev: Array2<F> = Array2::zeros(dc.raw_dim());
            // Total cell gradient: carried plus through the output nonlinearity.
            let dct = Zip::from(&dc)
                .and(&dh)
                .and(&o)
                .and(&step.tanh_c)
                .map_collect(|&dc, &dh, &o, &tc| dc + dh * o * (one - tc * tc));
            for ((u, k), &d) in dct.indexed_iter() {
                let (gi, gf, go, gg) = (i[[u, k]], f[[u, k]], o[[u, k]], g[[u, k]]);
                let tc = step.tanh_c[[u, k]];
                dz[[u, k]] = d * gg * gi * (one - gi);
                dz[[u, hidden + k]] = d * step.c_prev[[u, k]] * gf * (one - gf);
                dz[[u, 2 * hidden + k]] = dh[[u, k]] * tc * go * (one - go);
                dz[[u, 3 * hidden + k]] = d * gi * (one - gg * gg);
                dc_prev[[u, k]] = d * gf;
            }
            // Finished words pass their gradient through unchanged.
            for (u, &a) in step.active.iter().enumerate() {
                if !a {
                    dz.row_mut(u).fill(F::zero());
                    dc_prev.row_mut(u).assign(&dc.row(u));
                }
            }

            *self.input_weight.grad_mut() += &dz.t().dot(&step.x);
            *self.recurrent_weight.grad_mut() += &dz.t().dot(&step.h_prev);
            let mut db = self.bias.grad_mut().row_mut(0);
            db += &dz.sum_axis(Axis(0));

            d_xs.push(dz.dot(&self.input_weight.value));
            let mut dh_prev = dz.dot(&self.recurrent_weight.value);
            for (u, &a) in step.active.iter().enumerate() {
                if !a {
                    dh_prev.row_mut(u).assign(&dh.row(u));
                }
            }
            dh = dh_prev;
            dc = dc_prev;
        }
        d_xs.reverse();
        d_xs
    }
}

impl<F: Float> HasParams<F> for Lstm<F> {
    fn params(&self) -> Vec<&Parameter<F>> {
        vec![&self.input_weight, &self.recurrent_weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Parameter<F>> {
        vec![&mut self.input_weight, &mut self.recurrent_weight, &mut self.bias]
    }
}

/// Forward and backward LSTMs whose final states are concatenated.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "F: Float")]
pub struct BiLstm<F> {
    pub forward: Lstm<F>,
    pub backward: Lstm<F>,
}

#[derive(Debug)]
pub struct BiLstmCache<F> {
    lengths: Vec<usize>,
    forward: LstmCache<F>,
    backward: LstmCache<F>,
}

/// Time-major stacking of sequences, optionally reversing each one.
fn time_major<F: Float>(seqs: &[ArrayView2<F>], reverse: bool) -> Vec<Array2<F>> {
    let steps = seqs.iter().map(|s| s.nrows()).max().unwrap_or(0);
    let dim = seqs.first().map(|s| s.ncols()).unwrap_or(0);
    (0..steps)
        .map(|t| {
            let mut x = Array2::zeros((seqs.len(), dim));
            for (u, seq) in seqs.iter().enumerate() {
                let len = seq.nrows();
                if t < len {
                    let pos = if reverse { len - 1 - t } else { t };
                    x.row_mut(u).assign(&seq.row(pos));
                }
            }
            x
        })
        .collect()
}

impl<F: Float> BiLstm<F> {
    pub fn new<R: Rng + ?Sized>(input: usize, hidden: usize, rng: &mut R) -> Self {
        BiLstm {
            forward: Lstm::new("lstm.forward", input, hidden, rng),
            backward: Lstm::new("lstm.backward", input, hidden, rng),
        }
    }

    pub fn output_dim(&self) -> usize {
        self.forward.hidden() + self.backward.hidden()
    }

    /// Final states `[forward; backward]` for each non-empty sequence.
    pub fn forward(&self, seqs: &[ArrayView2<F>]) -> Result<(Array2<F>, BiLstmCache<F>)> {
        if seqs.iter().any(|s| s.nrows() == 0) {
            return Err(Error::Shape("empty sequence".into()));
        }
        if let Some(s) = seqs.iter().find(|s| s.ncols() != self.forward.input()) {
            return Err(Error::Shape(format!(
                "LSTM input dimension {} but sequence has {}",
                self.forward.input(),
                s.ncols()
            )));
        }
        let lengths: Vec<usize> = seqs.iter().map(|s| s.nrows()).collect();
        let (hf, cf) = self.forward.forward(&time_major(seqs, false), &lengths);
        let (hb, cb) = self.backward.forward(&time_major(seqs, true), &lengths);
        let out = ndarray::concatenate(Axis(1), &[hf.view(), hb.view()]).expect("equal row counts");
        Ok((
            out,
            BiLstmCache {
                lengths,
                forward: cf,
                backward: cb,
            },
        ))
    }

    /// Returns the gradient of each input sequence.
    pub fn backward(&mut self, cache: &BiLstmCache<F>, d_out: ArrayView2<F>) -> Vec<Array2<F>> {
        let hidden = self.forward.hidden();
        let df = self.forward.backward(&cache.forward, d_out.slice(s![.., ..hidden]).to_owned());
        let db = self.backward.backward(&cache.backward, d_out.slice(s![.., hidden..]).to_owned());
        let dim = self.forward.input();
        cache
            .lengths
            .iter()
            .enumerate()
            .map(|(u, &len)| {
                let mut d = Array2::zeros((len, dim));
                for t in 0..len {
                    let mut row = d.row_mut(t);
                    row += &df[t].row(u);
                    // The backward LSTM saw the sequence reversed.
                    row += &db[len - 1 - t].row(u);
                }
                d
            })
            .collect()
    }
}

impl<F: Float> HasParams<F> for BiLstm<F> {
    fn params(&self) -> Vec<&Parameter<F>> {
        let mut p = self.forward.params();
        p.extend(self.backward.params());
        p
    }

    fn params_mut(&mut self) -> Vec<&mut Parameter<F>> {
        let mut p = self.forward.params_mut();
        p.extend(self.backward.params_mut());
        p
    }
}

/// Concatenated final states of both directions over one embedded sequence.
pub fn bilstm_final<F: Float>(chars: ArrayView2<F>, lstm: &BiLstm<F>) -> Result<Array1<F>> {
    let (out, _) = lstm.forward(&[chars])?;
    Ok(out.row(0).to_owned())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::gradcheck::{max_relative_error, numeric_gradient};
    use ndarray::Array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_bilstm(rng: &mut ChaCha8Rng, input: usize, hidden: usize) -> BiLstm<f64> {
        let mut lstm = BiLstm::new(input, hidden, rng);
        for p in lstm.params_mut() {
            p.value.mapv_inplace(|_| 0.5 * rng.sample::<f64, _>(StandardNormal));
        }
        lstm
    }

    #[test]
    fn zero_network_outputs_zero() {
        let mut lstm: BiLstm<f64> = BiLstm::new(3, 4, &mut ChaCha8Rng::seed_from_u64(0));
        for p in lstm.params_mut() {
            p.value.fill(0.0);
        }
        let x = Array2::ones((5, 3));
        assert_eq!(bilstm_final(x.view(), &lstm).unwrap(), Array1::zeros(8));
    }

    #[test]
    fn empty_sequence_rejected() {
        let lstm: BiLstm<f64> = BiLstm::new(3, 4, &mut ChaCha8Rng::seed_from_u64(0));
        assert!(bilstm_final(Array2::zeros((0, 3)).view(), &lstm).is_err());
    }

    #[test]
    fn tied_single_step_halves_equal() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut lstm = random_bilstm(&mut rng, 3, 4);
        lstm.backward = lstm.forward.clone();
        let x: Array2<f64> = Array::from_shape_simple_fn((1, 3), || rng.sample(StandardNormal));
        let out = bilstm_final(x.view(), &lstm).unwrap();
        assert_eq!(out.slice(s![..4]), out.slice(s![4..]));
    }

    #[test]
    fn batching_matches_single_sequences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let lstm = random_bilstm(&mut rng, 3, 4);
        let a: Array2<f64> = Array::from_shape_simple_fn((2, 3), || rng.sample(StandardNormal));
        let b: Array2<f64> = Array::from_shape_simple_fn((5, 3), || rng.sample(StandardNormal));
        let (batched, _) = lstm.forward(&[a.view(), b.view()]).unwrap();
        let sa = bilstm_final(a.view(), &lstm).unwrap();
        let sb = bilstm_final(b.view(), &lstm).unwrap();
        assert!((&batched.row(0) - &sa).iter().all(|d| d.abs() < 1e-12));
        assert!((&batched.row(1) - &sb).iter().all(|d| d.abs() < 1e-12));
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let mut lstm = random_bilstm(&mut rng, 3, 4);
            let a: Array2<f64> = Array::from_shape_simple_fn((3, 3), || rng.sample(StandardNormal));
            let b: Array2<f64> = Array::from_shape_simple_fn((2, 3), || rng.sample(StandardNormal));
            let probe: Array2<f64> = Array::from_shape_simple_fn((2, 8), || rng.sample(StandardNormal));

            let (_, cache) = lstm.forward(&[a.view(), b.view()]).unwrap();
            let d = lstm.backward(&cache, probe.view());

            let mut xs: Vec<f64> = a.iter().copied().collect();
            let numeric = numeric_gradient(&mut xs, 1e-5, |v| {
                let a = Array2::from_shape_vec((3, 3), v.to_vec()).unwrap();
                (lstm.forward(&[a.view(), b.view()]).unwrap().0 * &probe).sum()
            });
            let analytic: Vec<f64> = d[0].iter().copied().collect();
            assert!(max_relative_error(&analytic, &numeric) < 1e-4);

            for which in 0..6 {
                let analytic: Vec<f64> = lstm.params()[which].grad().iter().copied().collect();
                let shape = lstm.params()[which].value.raw_dim();
                let mut probe_lstm = lstm.clone();
                let mut ws: Vec<f64> = lstm.params()[which].value.iter().copied().collect();
                let numeric = numeric_gradient(&mut ws, 1e-5, |v| {
                    probe_lstm.params_mut()[which].value = Array2::from_shape_vec(shape, v.to_vec()).unwrap();
                    (probe_lstm.forward(&[a.view(), b.view()]).unwrap().0 * &probe).sum()
                });
                let err = max_relative_error(&analytic, &numeric);
                assert!(err < 1e-4, "parameter {}: {}", which, err);
            }
        }
    }
}
