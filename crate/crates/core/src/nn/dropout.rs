use ndarray::Array2;
use rand::Rng;

use super::Float;

/// Inverted dropout. Returns the output and the per-unit scale applied
/// (0 for dropped units, `1 / (1 - rate)` for kept ones), which the backward
/// pass reuses. At inference time the input is returned unchanged.
pub fn dropout<F: Float, R: Rng + ?Sized>(
    x: Array2<F>,
    rate: f64,
    training: bool,
    rng: &mut R,
) -> (Array2<F>, Option<Array2<F>>) {
    assert!((0.0..1.0).contains(&rate), "dropout rate must be in [0, 1)");
    if !training || rate == 0.0 {
        return (x, None);
    }
    let keep = F::of(1.0 / (1.0 - rate));
    let mask = Array2::from_shape_simple_fn(x.raw_dim(), || {
        if rng.random::<f64>() < rate {
            F::zero()
        } else {
            keep
        }
    });
    (x * &mask, Some(mask))
}

pub fn dropout_backward<F: Float>(d_out: Array2<F>, mask: Option<&Array2<F>>) -> Array2<F> {
    match mask {
        Some(m) => d_out * m,
        None => d_out,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn inference_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = Array2::from_elem((2, 3), 1.5f64);
        assert_eq!(dropout(x.clone(), 0.1, false, &mut rng).0, x);
        assert_eq!(dropout(x.clone(), 0.0, true, &mut rng).0, x);
    }

    #[test]
    fn expectation_preserved() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = Array2::from_elem((100_000, 1), 1.0f64);
        let (out, _) = dropout(x, 0.1, true, &mut rng);
        let mean = out.sum() / 100_000.0;
        assert!((mean - 1.0).abs() < 0.01, "mean {}", mean);
        let dropped = out.iter().filter(|&&v| v == 0.0).count() as f64 / 100_000.0;
        assert!((dropped - 0.1).abs() < 0.005);
    }
}
