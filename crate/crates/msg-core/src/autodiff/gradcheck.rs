//! Central finite-difference verification of reverse-mode gradients.

use super::{DiffArray, Tape};
use crate::scalar::Scalar;

/// Compare the analytic gradient of a scalar-valued `f` at `x0` against
/// central finite differences with step `h`. Returns the maximum relative
/// error over all coordinates, with denominator
/// `max(|analytic|, |numeric|, 1e-8)`.
pub fn check_gradients<T: Scalar>(
    f: impl Fn(&DiffArray<T>) -> DiffArray<T>,
    x0: &[T],
    shape: &[usize],
    h: T,
) -> T {
    assert!(h > T::zero(), "finite-difference step must be positive");

    // Analytic gradient from one reverse pass.
    let tape = Tape::new();
    let x = DiffArray::watched(&tape, x0.to_vec(), shape);
    let y = f(&x);
    assert_eq!(y.numel(), 1, "check_gradients target must be scalar");
    let grads = y.backward();
    let analytic = grads.wrt_or_zeros(&x);

    // Numeric gradient, one coordinate at a time, on constant inputs.
    let floor = T::of_f64(1e-8);
    let two = T::of_f64(2.0);
    let mut max_rel = T::zero();
    for i in 0..x0.len() {
        let mut plus = x0.to_vec();
        plus[i] = plus[i] + h;
        let mut minus = x0.to_vec();
        minus[i] = minus[i] - h;
        let fp = f(&DiffArray::constant(plus, shape)).item();
        let fm = f(&DiffArray::constant(minus, shape)).item();
        let numeric = (fp - fm) / (two * h);
        let denom = analytic[i].abs().max(numeric.abs()).max(floor);
        let rel = (analytic[i] - numeric).abs() / denom;
        if rel > max_rel {
            max_rel = rel;
        }
    }
    max_rel
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn mean_square_is_tight() {
        let x = vec![0.7, -1.3, 2.1, 0.4];
        let err = check_gradients(
            |x: &DiffArray<f64>| x.square().mean_all(),
            &x,
            &[4],
            1e-5,
        );
        assert!(err < 1e-6, "rel err {err}");
    }

    #[test]
    fn linear_function_is_nearly_exact() {
        let x = vec![0.25, -0.5, 1.5];
        let err = check_gradients(
            |x: &DiffArray<f64>| x.mul_scalar(3.0).sum_all(),
            &x,
            &[3],
            1e-5,
        );
        assert!(err < 1e-9, "rel err {err}");
    }

    #[test]
    fn conv1d_composite_on_1x2x16() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x: Vec<f64> = (0..32).map(|_| rng.random_range(-1.0..1.0)).collect();
        let w: Vec<f64> = (0..2 * 2 * 3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b: Vec<f64> = vec![0.1, -0.2];
        let err = check_gradients(
            move |x: &DiffArray<f64>| {
                let kernel = DiffArray::constant(w.clone(), &[2, 2, 3]);
                let bias = DiffArray::constant(b.clone(), &[2]);
                x.conv1d(&kernel, &bias, 2, 1).square().mean_all()
            },
            &x,
            &[1, 2, 16],
            1e-5,
        );
        assert!(err < 1e-4, "rel err {err}");
    }
}
