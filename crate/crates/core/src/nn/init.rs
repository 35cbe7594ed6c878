use nalgebra::DMatrix;
use ndarray::Array2;
use rand::Rng;
use rand_distr::StandardNormal;

use super::Float;

/// Zero-mean Gaussian with standard deviation `sqrt(2 / fan_in)`.
pub fn init_he<F: Float, R: Rng + ?Sized>(rows: usize, cols: usize, fan_in: usize, rng: &mut R) -> Array2<F> {
    assert!(fan_in > 0, "fan_in must be positive");
    let std = (2.0 / fan_in as f64).sqrt();
    Array2::from_shape_simple_fn((rows, cols), || {
        let z: f64 = rng.sample(StandardNormal);
        F::of(z * std)
    })
}

/// Matrix with orthonormal rows (when `rows <= cols`) or orthonormal columns
/// (when `rows > cols`), from the QR decomposition of a Gaussian matrix.
pub fn init_orthogonal<F: Float, R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Array2<F> {
    let (tall, short) = (rows.max(cols), rows.min(cols));
    let gaussian = DMatrix::<f64>::from_fn(tall, short, |_, _| rng.sample(StandardNormal));
    let qr = gaussian.qr();
    let mut q = qr.q();
    // Fix the sign ambiguity so the distribution is uniform over orthogonal matrices.
    let r = qr.r();
    for j in 0..short {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    Array2::from_shape_fn((rows, cols), |(i, j)| {
        let v = if rows >= cols { q[(i, j)] } else { q[(j, i)] };
        F::of(v)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn he_standard_deviation() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let w: Array2<f64> = init_he(400, 300, 512, &mut rng);
        let n = w.len() as f64;
        let mean = w.sum() / n;
        let std = (w.mapv(|v| (v - mean).powi(2)).sum() / n).sqrt();
        let expected = (2.0f64 / 512.0).sqrt();
        assert!((std - expected).abs() / expected < 0.1, "std {}", std);
        assert!(mean.abs() < 0.01);
    }

    #[test]
    fn orthogonal_columns_and_rows() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let q: Array2<f64> = init_orthogonal(128, 32, &mut rng);
        let gram = q.t().dot(&q);
        let eye = Array2::<f64>::eye(32);
        assert!((gram - eye).iter().all(|d| d.abs() < 1e-5));

        let q: Array2<f64> = init_orthogonal(16, 40, &mut rng);
        let gram = q.dot(&q.t());
        assert!((gram - Array2::<f64>::eye(16)).iter().all(|d| d.abs() < 1e-5));
    }

    #[test]
    fn seeded_determinism() {
        let a: Array2<f32> = init_he(5, 5, 5, &mut ChaCha8Rng::seed_from_u64(9));
        let b: Array2<f32> = init_he(5, 5, 5, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
        let a: Array2<f32> = init_orthogonal(6, 4, &mut ChaCha8Rng::seed_from_u64(9));
        let b: Array2<f32> = init_orthogonal(6, 4, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
    }
}
