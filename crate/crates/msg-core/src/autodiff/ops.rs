//! Elementwise ops, reductions, shape ops, and matmul.
//!
//! Derivative conventions (fixed so tests are deterministic): |x|' at 0 is 0,
//! leaky_relu' at 0 is the slope, relu' at 0 is 0, sqrt' at 0 is 0.

use std::sync::Arc;

use super::{DiffArray, GradStore};
use crate::scalar::Scalar;

impl<T: Scalar> DiffArray<T> {
    fn unary_map(
        &self,
        f: impl Fn(T) -> T,
        // dx contribution for (x, y, gout) at one element
        df: impl Fn(T, T, T) -> T + 'static,
    ) -> Self {
        let values: Vec<T> = self.values().iter().map(|&x| f(x)).collect();
        let x_vals = Arc::clone(&self.values);
        let y_vals = Arc::new(values.clone());
        let numel = self.numel();
        Self::record(&[self], values, self.shape.clone(), move |ids| {
            let input = ids[0];
            Box::new(move |gout, store: &mut GradStore<T>| {
                if let Some(id) = input {
                    let dst = store.slot(id, numel);
                    for i in 0..numel {
                        dst[i] += df(x_vals[i], y_vals[i], gout[i]);
                    }
                }
            })
        })
    }

    fn binary_map(
        &self,
        rhs: &Self,
        f: impl Fn(T, T) -> T,
        dfa: impl Fn(T, T, T) -> T + 'static,
        dfb: impl Fn(T, T, T) -> T + 'static,
        op_name: &str,
    ) -> Self {
        assert_eq!(
            self.shape, rhs.shape,
            "{op_name}: shape {:?} vs {:?}",
            self.shape, rhs.shape
        );
        let values: Vec<T> = self
            .values()
            .iter()
            .zip(rhs.values())
            .map(|(&a, &b)| f(a, b))
            .collect();
        let a_vals = Arc::clone(&self.values);
        let b_vals = Arc::clone(&rhs.values);
        let numel = self.numel();
        Self::record(&[self, rhs], values, self.shape.clone(), move |ids| {
            let (ia, ib) = (ids[0], ids[1]);
            Box::new(move |gout, store: &mut GradStore<T>| {
                if let Some(id) = ia {
                    let dst = store.slot(id, numel);
                    for i in 0..numel {
                        dst[i] += dfa(a_vals[i], b_vals[i], gout[i]);
                    }
                }
                if let Some(id) = ib {
                    let dst = store.slot(id, numel);
                    for i in 0..numel {
                        dst[i] += dfb(a_vals[i], b_vals[i], gout[i]);
                    }
                }
            })
        })
    }

    pub fn add(&self, rhs: &Self) -> Self {
        self.binary_map(rhs, |a, b| a + b, |_, _, g| g, |_, _, g| g, "add")
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        self.binary_map(rhs, |a, b| a - b, |_, _, g| g, |_, _, g| -g, "sub")
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        self.binary_map(
            rhs,
            |a, b| a * b,
            |_, b, g| g * b,
            |a, _, g| g * a,
            "mul",
        )
    }

    pub fn neg(&self) -> Self {
        self.unary_map(|x| -x, |_, _, g| -g)
    }

    pub fn abs(&self) -> Self {
        self.unary_map(
            |x| x.abs(),
            |x, _, g| {
                if x > T::zero() {
                    g
                } else if x < T::zero() {
                    -g
                } else {
                    T::zero()
                }
            },
        )
    }

    pub fn square(&self) -> Self {
        let two = T::of_f64(2.0);
        self.unary_map(|x| x * x, move |x, _, g| g * two * x)
    }

    pub fn sqrt(&self) -> Self {
        let half = T::of_f64(0.5);
        self.unary_map(
            |x| x.sqrt(),
            move |_, y, g| {
                if y > T::zero() {
                    g * half / y
                } else {
                    T::zero()
                }
            },
        )
    }

    /// Natural log. The input must be strictly positive; call sites add a
    /// floor epsilon first.
    pub fn log(&self) -> Self {
        for (i, &x) in self.values().iter().enumerate() {
            assert!(
                x > T::zero(),
                "log domain error: element {i} is {x}; add a floor epsilon at the call site"
            );
        }
        self.unary_map(|x| x.ln(), |x, _, g| g / x)
    }

    pub fn sigmoid(&self) -> Self {
        self.unary_map(sigmoid_value, |_, y, g| g * y * (T::one() - y))
    }

    pub fn relu(&self) -> Self {
        self.unary_map(
            |x| if x > T::zero() { x } else { T::zero() },
            |x, _, g| if x > T::zero() { g } else { T::zero() },
        )
    }

    pub fn leaky_relu(&self, slope: T) -> Self {
        assert!(
            slope > T::zero() && slope < T::one(),
            "leaky_relu slope must be in (0,1), got {slope}"
        );
        self.unary_map(
            move |x| if x >= T::zero() { x } else { slope * x },
            move |x, _, g| if x > T::zero() { g } else { g * slope },
        )
    }

    pub fn add_scalar(&self, c: T) -> Self {
        self.unary_map(move |x| x + c, |_, _, g| g)
    }

    pub fn mul_scalar(&self, c: T) -> Self {
        self.unary_map(move |x| x * c, move |_, _, g| g * c)
    }

    pub fn sum_all(&self) -> Self {
        let total: T = self.values().iter().copied().sum();
        let numel = self.numel();
        Self::record(&[self], vec![total], vec![1], move |ids| {
            let input = ids[0];
            Box::new(move |gout, store: &mut GradStore<T>| {
                if let Some(id) = input {
                    let g = gout[0];
                    let dst = store.slot(id, numel);
                    for d in dst.iter_mut() {
                        *d += g;
                    }
                }
            })
        })
    }

    pub fn mean_all(&self) -> Self {
        let numel = self.numel();
        assert!(numel > 0, "mean of empty array");
        let scale = T::one() / T::of_usize(numel);
        self.sum_all().mul_scalar(scale)
    }

    /// View with a new shape; element count must be preserved.
    pub fn reshape(&self, new_shape: &[usize]) -> Self {
        assert_eq!(
            new_shape.iter().product::<usize>(),
            self.numel(),
            "reshape {:?} -> {:?} changes element count",
            self.shape,
            new_shape
        );
        let numel = self.numel();
        Self::record(
            &[self],
            self.values().to_vec(),
            new_shape.to_vec(),
            move |ids| {
                let input = ids[0];
                Box::new(move |gout, store: &mut GradStore<T>| {
                    if let Some(id) = input {
                        let dst = store.slot(id, numel);
                        for i in 0..numel {
                            dst[i] += gout[i];
                        }
                    }
                })
            },
        )
    }

    /// Slice `[start, start+len)` along the last axis.
    pub fn slice_last(&self, start: usize, len: usize) -> Self {
        let last = *self.shape.last().expect("slice_last on 0-d array");
        assert!(
            start + len <= last,
            "slice_last [{start}, {}) out of bounds for axis of size {last}",
            start + len
        );
        let rows = self.numel() / last;
        let mut values = Vec::with_capacity(rows * len);
        for r in 0..rows {
            let base = r * last;
            values.extend_from_slice(&self.values()[base + start..base + start + len]);
        }
        let mut shape = self.shape.clone();
        *shape.last_mut().unwrap() = len;
        let numel_in = self.numel();
        Self::record(&[self], values, shape, move |ids| {
            let input = ids[0];
            Box::new(move |gout, store: &mut GradStore<T>| {
                if let Some(id) = input {
                    let dst = store.slot(id, numel_in);
                    for r in 0..rows {
                        let src = r * len;
                        let base = r * last + start;
                        for i in 0..len {
                            dst[base + i] += gout[src + i];
                        }
                    }
                }
            })
        })
    }

    /// Zero-pad the last axis by `left` and `right` elements.
    pub fn pad_last_zero(&self, left: usize, right: usize) -> Self {
        let last = *self.shape.last().expect("pad_last_zero on 0-d array");
        let rows = self.numel() / last;
        let out_last = last + left + right;
        let mut values = vec![T::zero(); rows * out_last];
        for r in 0..rows {
            let dst = r * out_last + left;
            values[dst..dst + last].copy_from_slice(&self.values()[r * last..(r + 1) * last]);
        }
        let mut shape = self.shape.clone();
        *shape.last_mut().unwrap() = out_last;
        let numel_in = self.numel();
        Self::record(&[self], values, shape, move |ids| {
            let input = ids[0];
            Box::new(move |gout, store: &mut GradStore<T>| {
                if let Some(id) = input {
                    let dst = store.slot(id, numel_in);
                    for r in 0..rows {
                        let src = r * out_last + left;
                        let base = r * last;
                        for i in 0..last {
                            dst[base + i] += gout[src + i];
                        }
                    }
                }
            })
        })
    }

    /// Reflect-pad the last axis on the right by `right` elements
    /// (bounced reflection, no edge repeat).
    pub fn pad_last_reflect(&self, right: usize) -> Self {
        let last = *self.shape.last().expect("pad_last_reflect on 0-d array");
        assert!(last >= 1, "pad_last_reflect on empty axis");
        let rows = self.numel() / last;
        let out_last = last + right;
        let mut values = Vec::with_capacity(rows * out_last);
        for r in 0..rows {
            let row = &self.values()[r * last..(r + 1) * last];
            values.extend_from_slice(row);
            for i in 0..right {
                values.push(row[reflect_index(last as isize + i as isize, last)]);
            }
        }
        let mut shape = self.shape.clone();
        *shape.last_mut().unwrap() = out_last;
        let numel_in = self.numel();
        Self::record(&[self], values, shape, move |ids| {
            let input = ids[0];
            Box::new(move |gout, store: &mut GradStore<T>| {
                if let Some(id) = input {
                    let dst = store.slot(id, numel_in);
                    for r in 0..rows {
                        let base = r * last;
                        let src = r * out_last;
                        for i in 0..last {
                            dst[base + i] += gout[src + i];
                        }
                        for i in 0..right {
                            let j = reflect_index(last as isize + i as isize, last);
                            dst[base + j] += gout[src + last + i];
                        }
                    }
                }
            })
        })
    }

    /// Gated linear unit over the channel axis of a `[batch, 2c, len]` array:
    /// the first half gates through `a * sigmoid(b)`.
    pub fn glu(&self) -> Self {
        assert_eq!(self.shape.len(), 3, "glu expects [batch, 2c, len], got {:?}", self.shape);
        let (batch, ch, len) = (self.shape[0], self.shape[1], self.shape[2]);
        assert!(
            ch % 2 == 0,
            "glu channel dimension must be even, got {ch}"
        );
        let half = ch / 2;
        let x = self.values();
        let mut values = vec![T::zero(); batch * half * len];
        let mut gates = vec![T::zero(); batch * half * len];
        for b in 0..batch {
            for c in 0..half {
                let a_base = (b * ch + c) * len;
                let b_base = (b * ch + half + c) * len;
                let o_base = (b * half + c) * len;
                for t in 0..len {
                    let s = sigmoid_value(x[b_base + t]);
                    gates[o_base + t] = s;
                    values[o_base + t] = x[a_base + t] * s;
                }
            }
        }
        let x_vals = Arc::clone(&self.values);
        let gates = Arc::new(gates);
        let numel_in = self.numel();
        Self::record(&[self], values, vec![batch, half, len], move |ids| {
            let input = ids[0];
            let gates = Arc::clone(&gates);
            let x_vals = Arc::clone(&x_vals);
            Box::new(move |gout, store: &mut GradStore<T>| {
                if let Some(id) = input {
                    let dst = store.slot(id, numel_in);
                    for b in 0..batch {
                        for c in 0..half {
                            let a_base = (b * ch + c) * len;
                            let b_base = (b * ch + half + c) * len;
                            let o_base = (b * half + c) * len;
                            for t in 0..len {
                                let g = gout[o_base + t];
                                let s = gates[o_base + t];
                                dst[a_base + t] += g * s;
                                dst[b_base + t] +=
                                    g * x_vals[a_base + t] * s * (T::one() - s);
                            }
                        }
                    }
                }
            })
        })
    }

    /// Matrix product of `[m, k]` by `[k, n]`.
    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.shape.len(), 2, "matmul lhs must be 2-d, got {:?}", self.shape);
        assert_eq!(rhs.shape.len(), 2, "matmul rhs must be 2-d, got {:?}", rhs.shape);
        let (m, k) = (self.shape[0], self.shape[1]);
        let (k2, n) = (rhs.shape[0], rhs.shape[1]);
        assert_eq!(
            k, k2,
            "matmul inner dimensions differ: lhs {:?} vs rhs {:?}",
            self.shape, rhs.shape
        );
        let values = matmul_raw(self.values(), rhs.values(), m, k, n);
        let a_vals = Arc::clone(&self.values);
        let b_vals = Arc::clone(&rhs.values);
        Self::record(&[self, rhs], values, vec![m, n], move |ids| {
            let (ia, ib) = (ids[0], ids[1]);
            Box::new(move |gout, store: &mut GradStore<T>| {
                if let Some(id) = ia {
                    // dA = G . B^T
                    let dst = store.slot(id, m * k);
                    for i in 0..m {
                        for j in 0..n {
                            let g = gout[i * n + j];
                            if g != T::zero() {
                                for p in 0..k {
                                    dst[i * k + p] += g * b_vals[p * n + j];
                                }
                            }
                        }
                    }
                }
                if let Some(id) = ib {
                    // dB = A^T . G
                    let dst = store.slot(id, k * n);
                    for i in 0..m {
                        for p in 0..k {
                            let a = a_vals[i * k + p];
                            if a != T::zero() {
                                for j in 0..n {
                                    dst[p * n + j] += a * gout[i * n + j];
                                }
                            }
                        }
                    }
                }
            })
        })
    }
}

/// Numerically stable logistic function.
pub(crate) fn sigmoid_value<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// Bounced reflection index (no edge repeat) for any nonnegative overshoot.
pub(crate) fn reflect_index(pos: isize, len: usize) -> usize {
    debug_assert!(len >= 1);
    if len == 1 {
        return 0;
    }
    let period = 2 * (len as isize - 1);
    let mut m = pos % period;
    if m < 0 {
        m += period;
    }
    if m < len as isize {
        m as usize
    } else {
        (period - m) as usize
    }
}

pub(crate) fn matmul_raw<T: Scalar>(a: &[T], b: &[T], m: usize, k: usize, n: usize) -> Vec<T> {
    let mut out = vec![T::zero(); m * n];
    for i in 0..m {
        let out_row = &mut out[i * n..(i + 1) * n];
        for p in 0..k {
            let av = a[i * k + p];
            if av != T::zero() {
                let b_row = &b[p * n..(p + 1) * n];
                for j in 0..n {
                    out_row[j] += av * b_row[j];
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tape;

    type A = DiffArray<f64>;

    #[test]
    fn identity_matmul_is_identity() {
        let eye = A::constant(vec![1.0, 0.0, 0.0, 1.0], &[2, 2]);
        let b = A::constant(vec![1.0, 2.0, 3.0, 4.0], &[2, 2]);
        assert_eq!(eye.matmul(&b).values(), b.values());
    }

    #[test]
    fn matmul_direct_evaluation() {
        // [[1,2]] x [[3],[4]] = [[11]]
        let a = A::constant(vec![1.0, 2.0], &[1, 2]);
        let b = A::constant(vec![3.0, 4.0], &[2, 1]);
        let c = a.matmul(&b);
        assert_eq!(c.shape(), &[1, 1]);
        assert_eq!(c.values(), &[11.0]);
    }

    #[test]
    fn zero_matmul_is_zero() {
        let z = A::constant(vec![0.0; 4], &[2, 2]);
        let b = A::constant(vec![1.0, 2.0, 3.0, 4.0], &[2, 2]);
        assert_eq!(z.matmul(&b).values(), &[0.0; 4]);
    }

    #[test]
    fn matmul_gradients() {
        let tape = Tape::new();
        let a = A::watched(&tape, vec![1.0, 2.0], &[1, 2]);
        let b = A::watched(&tape, vec![3.0, 4.0], &[2, 1]);
        let y = a.matmul(&b).mean_all();
        let grads = y.backward();
        assert_eq!(grads.wrt(&a).unwrap(), &[3.0, 4.0]);
        assert_eq!(grads.wrt(&b).unwrap(), &[1.0, 2.0]);
    }

    #[test]
    #[should_panic(expected = "inner dimensions differ")]
    fn matmul_dim_mismatch_panics() {
        let a = A::constant(vec![1.0, 2.0], &[1, 2]);
        let b = A::constant(vec![3.0], &[1, 1]);
        let _ = a.matmul(&b);
    }

    #[test]
    fn reduction_examples() {
        let x = A::constant(vec![1.0, 2.0, 3.0], &[3]);
        assert_eq!(x.mean_all().item(), 2.0);
        let y = A::constant(vec![1.0, -1.0], &[2]);
        assert_eq!(y.square().mean_all().item(), 1.0);
        let e = A::constant(vec![std::f64::consts::E], &[1]);
        assert!((e.log().item() - 1.0).abs() < 1e-15);
    }

    #[test]
    #[should_panic(expected = "log domain error")]
    fn log_nonpositive_panics() {
        let x = A::constant(vec![0.0], &[1]);
        let _ = x.log();
    }

    #[test]
    fn leaky_relu_examples() {
        let x = A::constant(vec![-1.0, 2.0, 0.0], &[3]);
        let y = x.leaky_relu(0.1);
        assert_eq!(y.values(), &[-0.1, 2.0, 0.0]);
    }

    #[test]
    fn leaky_relu_derivative_at_zero_is_slope() {
        let tape = Tape::new();
        let x = A::watched(&tape, vec![0.0], &[1]);
        let y = x.leaky_relu(0.25).sum_all();
        let grads = y.backward();
        assert_eq!(grads.wrt(&x).unwrap(), &[0.25]);
    }

    #[test]
    fn glu_zero_gate_halves() {
        // b-half all zeros -> sigmoid(0) = 0.5 -> output a/2
        let x = A::constant(vec![2.0, 4.0, 0.0, 0.0], &[1, 2, 2]);
        let y = x.glu();
        assert_eq!(y.shape(), &[1, 1, 2]);
        assert_eq!(y.values(), &[1.0, 2.0]);
    }

    #[test]
    fn glu_zero_value_half_is_zero() {
        let x = A::constant(vec![0.0, 0.0, 3.0, -2.0], &[1, 2, 2]);
        assert_eq!(x.glu().values(), &[0.0, 0.0]);
    }

    #[test]
    fn glu_saturated_gate_passes_value() {
        let x = A::constant(vec![2.0, 50.0], &[1, 2, 1]);
        let y = x.glu();
        assert!((y.values()[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    #[should_panic(expected = "must be even")]
    fn glu_odd_channels_panics() {
        let x = A::constant(vec![1.0, 2.0, 3.0], &[1, 3, 1]);
        let _ = x.glu();
    }

    #[test]
    fn slice_and_pad_round_trip() {
        let x = A::constant(vec![1.0, 2.0, 3.0, 4.0], &[1, 1, 4]);
        let padded = x.pad_last_zero(2, 1);
        assert_eq!(padded.values(), &[0.0, 0.0, 1.0, 2.0, 3.0, 4.0, 0.0]);
        let back = padded.slice_last(2, 4);
        assert_eq!(back.values(), x.values());
    }

    #[test]
    fn reflect_pad_bounces() {
        let x = A::constant(vec![1.0, 2.0, 3.0], &[3]);
        let y = x.pad_last_reflect(4);
        assert_eq!(y.values(), &[1.0, 2.0, 3.0, 2.0, 1.0, 2.0, 3.0]);
    }

    #[test]
    fn reflect_pad_single_sample_repeats() {
        let x = A::constant(vec![5.0], &[1]);
        let y = x.pad_last_reflect(3);
        assert_eq!(y.values(), &[5.0, 5.0, 5.0, 5.0]);
    }

    #[test]
    fn sigmoid_matches_closed_form() {
        let x = A::constant(vec![0.0, 2.0, -700.0], &[3]);
        let y = x.sigmoid();
        assert_eq!(y.values()[0], 0.5);
        assert!((y.values()[1] - 1.0 / (1.0 + (-2.0f64).exp())).abs() < 1e-15);
        assert!(y.values()[2] >= 0.0 && y.values()[2] < 1e-200);
    }
}
