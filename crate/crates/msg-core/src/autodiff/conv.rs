//! 1-D and 2-D convolution, and transposed 1-D convolution.
//!
//! conv1d/conv2d are cross-correlations over zero-padded input (the usual
//! deep-learning convention). conv_transpose1d scatters a scaled kernel copy
//! at every input position, which makes it the exact input-gradient of
//! conv1d with the same kernel and stride.

use std::sync::Arc;

use super::{DiffArray, GradStore};
use crate::scalar::Scalar;

/// floor((len + 2*pad - k) / stride) + 1
pub fn conv_out_len(len: usize, k: usize, stride: usize, pad: usize) -> usize {
    (len + 2 * pad - k) / stride + 1
}

/// (len - 1) * stride + k
pub fn conv_transpose_out_len(len: usize, k: usize, stride: usize) -> usize {
    (len - 1) * stride + k
}

impl<T: Scalar> DiffArray<T> {
    /// Cross-correlation of `[batch, ch_in, len]` with `[ch_out, ch_in, k]`
    /// plus a `[ch_out]` bias, over zero-padded input.
    pub fn conv1d(&self, kernel: &Self, bias: &Self, stride: usize, pad: usize) -> Self {
        assert!(stride >= 1, "conv1d stride must be >= 1, got {stride}");
        assert_eq!(self.shape().len(), 3, "conv1d input must be [batch, ch_in, len], got {:?}", self.shape());
        assert_eq!(kernel.shape().len(), 3, "conv1d kernel must be [ch_out, ch_in, k], got {:?}", kernel.shape());
        let (batch, ch_in, len) = (self.shape()[0], self.shape()[1], self.shape()[2]);
        let (ch_out, kc_in, k) = (kernel.shape()[0], kernel.shape()[1], kernel.shape()[2]);
        assert_eq!(
            kc_in, ch_in,
            "conv1d channel mismatch: input has {ch_in} channels, kernel expects {kc_in}"
        );
        assert_eq!(
            bias.shape(),
            &[ch_out],
            "conv1d bias must be [{ch_out}], got {:?}",
            bias.shape()
        );
        assert!(
            k <= len + 2 * pad,
            "conv1d kernel size {k} exceeds padded length {}",
            len + 2 * pad
        );

        let out_len = conv_out_len(len, k, stride, pad);
        let x = self.values();
        let w = kernel.values();
        let b = bias.values();
        let mut out = vec![T::zero(); batch * ch_out * out_len];
        for bi in 0..batch {
            for co in 0..ch_out {
                let o_base = (bi * ch_out + co) * out_len;
                out[o_base..o_base + out_len].fill(b[co]);
                for ci in 0..ch_in {
                    let x_base = (bi * ch_in + ci) * len;
                    let w_base = (co * ch_in + ci) * k;
                    for ol in 0..out_len {
                        let origin = (ol * stride) as isize - pad as isize;
                        let k_lo = (-origin).max(0) as usize;
                        let k_hi = k.min((len as isize - origin).max(0) as usize);
                        let mut acc = T::zero();
                        for kk in k_lo..k_hi {
                            acc += x[x_base + (origin + kk as isize) as usize] * w[w_base + kk];
                        }
                        out[o_base + ol] += acc;
                    }
                }
            }
        }

        let x_vals = Arc::clone(&self.values);
        let w_vals = Arc::clone(&kernel.values);
        Self::record(
            &[self, kernel, bias],
            out,
            vec![batch, ch_out, out_len],
            move |ids| {
                let (ix, iw, ib) = (ids[0], ids[1], ids[2]);
                Box::new(move |gout, store: &mut GradStore<T>| {
                    if let Some(id) = ix {
                        let dst = store.slot(id, batch * ch_in * len);
                        for bi in 0..batch {
                            for co in 0..ch_out {
                                let o_base = (bi * ch_out + co) * out_len;
                                for ci in 0..ch_in {
                                    let x_base = (bi * ch_in + ci) * len;
                                    let w_base = (co * ch_in + ci) * k;
                                    for ol in 0..out_len {
                                        let g = gout[o_base + ol];
                                        if g == T::zero() {
                                            continue;
                                        }
                                        let origin = (ol * stride) as isize - pad as isize;
                                        let k_lo = (-origin).max(0) as usize;
                                        let k_hi = k.min((len as isize - origin).max(0) as usize);
                                        for kk in k_lo..k_hi {
                                            dst[x_base + (origin + kk as isize) as usize] +=
                                                g * w_vals[w_base + kk];
                                        }
                                    }
                                }
                            }
                        }
                    }
                    if let Some(id) = iw {
                        let dst = store.slot(id, ch_out * ch_in * k);
                        for bi in 0..batch {
                            for co in 0..ch_out {
                                let o_base = (bi * ch_out + co) * out_len;
                                for ci in 0..ch_in {
                                    let x_base = (bi * ch_in + ci) * len;
                                    let w_base = (co * ch_in + ci) * k;
                                    for ol in 0..out_len {
                                        let g = gout[o_base + ol];
                                        if g == T::zero() {
                                            continue;
                                        }
                                        let origin = (ol * stride) as isize - pad as isize;
                                        let k_lo = (-origin).max(0) as usize;
                                        let k_hi = k.min((len as isize - origin).max(0) as usize);
                                        for kk in k_lo..k_hi {
                                            dst[w_base + kk] +=
                                                g * x_vals[x_base + (origin + kk as isize) as usize];
                                        }
                                    }
                                }
                            }
                        }
                    }
                    if let Some(id) = ib {
                        let dst = store.slot(id, ch_out);
                        for bi in 0..batch {
                            for co in 0..ch_out {
                                let o_base = (bi * ch_out + co) * out_len;
                                for ol in 0..out_len {
                                    dst[co] += gout[o_base + ol];
                                }
                            }
                        }
                    }
                })
            },
        )
    }

    /// Transposed convolution of `[batch, ch_in, len]` with a
    /// `[ch_in, ch_out, k]` kernel: every input sample scatters a scaled
    /// kernel copy at offset `i * stride`.
    pub fn conv_transpose1d(&self, kernel: &Self, bias: &Self, stride: usize) -> Self {
        assert!(stride >= 1, "conv_transpose1d stride must be >= 1, got {stride}");
        assert_eq!(self.shape().len(), 3, "conv_transpose1d input must be [batch, ch_in, len], got {:?}", self.shape());
        assert_eq!(kernel.shape().len(), 3, "conv_transpose1d kernel must be [ch_in, ch_out, k], got {:?}", kernel.shape());
        let (batch, ch_in, len) = (self.shape()[0], self.shape()[1], self.shape()[2]);
        let (kc_in, ch_out, k) = (kernel.shape()[0], kernel.shape()[1], kernel.shape()[2]);
        assert_eq!(
            kc_in, ch_in,
            "conv_transpose1d channel mismatch: input has {ch_in} channels, kernel expects {kc_in}"
        );
        assert_eq!(
            bias.shape(),
            &[ch_out],
            "conv_transpose1d bias must be [{ch_out}], got {:?}",
            bias.shape()
        );
        assert!(len >= 1, "conv_transpose1d input length must be >= 1");

        let out_len = conv_transpose_out_len(len, k, stride);
        let x = self.values();
        let w = kernel.values();
        let b = bias.values();
        let mut out = vec![T::zero(); batch * ch_out * out_len];
        for bi in 0..batch {
            for co in 0..ch_out {
                let o_base = (bi * ch_out + co) * out_len;
                out[o_base..o_base + out_len].fill(b[co]);
                for ci in 0..ch_in {
                    let x_base = (bi * ch_in + ci) * len;
                    let w_base = (ci * ch_out + co) * k;
                    for i in 0..len {
                        let v = x[x_base + i];
                        if v == T::zero() {
                            continue;
                        }
                        let o = o_base + i * stride;
                        for kk in 0..k {
                            out[o + kk] += v * w[w_base + kk];
                        }
                    }
                }
            }
        }

        let x_vals = Arc::clone(&self.values);
        let w_vals = Arc::clone(&kernel.values);
        Self::record(
            &[self, kernel, bias],
            out,
            vec![batch, ch_out, out_len],
            move |ids| {
                let (ix, iw, ib) = (ids[0], ids[1], ids[2]);
                Box::new(move |gout, store: &mut GradStore<T>| {
                    if let Some(id) = ix {
                        let dst = store.slot(id, batch * ch_in * len);
                        for bi in 0..batch {
                            for ci in 0..ch_in {
                                let x_base = (bi * ch_in + ci) * len;
                                for co in 0..ch_out {
                                    let o_base = (bi * ch_out + co) * out_len;
                                    let w_base = (ci * ch_out + co) * k;
                                    for i in 0..len {
                                        let o = o_base + i * stride;
                                        let mut acc = T::zero();
                                        for kk in 0..k {
                                            acc += gout[o + kk] * w_vals[w_base + kk];
                                        }
                                        dst[x_base + i] += acc;
                                    }
                                }
                            }
                        }
                    }
                    if let Some(id) = iw {
                        let dst = store.slot(id, ch_in * ch_out * k);
                        for bi in 0..batch {
                            for ci in 0..ch_in {
                                let x_base = (bi * ch_in + ci) * len;
                                for co in 0..ch_out {
                                    let o_base = (bi * ch_out + co) * out_len;
                                    let w_base = (ci * ch_out + co) * k;
                                    for i in 0..len {
                                        let v = x_vals[x_base + i];
                                        if v == T::zero() {
                                            continue;
                                        }
                                        let o = o_base + i * stride;
                                        for kk in 0..k {
                                            dst[w_base + kk] += v * gout[o + kk];
                                        }
                                    }
                                }
                            }
                        }
                    }
                    if let Some(id) = ib {
                        let dst = store.slot(id, ch_out);
                        for bi in 0..batch {
                            for co in 0..ch_out {
                                let o_base = (bi * ch_out + co) * out_len;
                                for ol in 0..out_len {
                                    dst[co] += gout[o_base + ol];
                                }
                            }
                        }
                    }
                })
            },
        )
    }

    /// 2-D cross-correlation of `[batch, ch_in, h, w]` with
    /// `[ch_out, ch_in, kh, kw]` plus bias, over zero-padded input.
    pub fn conv2d(
        &self,
        kernel: &Self,
        bias: &Self,
        stride: (usize, usize),
        pad: (usize, usize),
    ) -> Self {
        let (sh, sw) = stride;
        let (ph, pw) = pad;
        assert!(sh >= 1 && sw >= 1, "conv2d stride must be >= 1, got {stride:?}");
        assert_eq!(self.shape().len(), 4, "conv2d input must be [batch, ch_in, h, w], got {:?}", self.shape());
        assert_eq!(kernel.shape().len(), 4, "conv2d kernel must be [ch_out, ch_in, kh, kw], got {:?}", kernel.shape());
        let (batch, ch_in, h, w) = (
            self.shape()[0],
            self.shape()[1],
            self.shape()[2],
            self.shape()[3],
        );
        let (ch_out, kc_in, kh, kw) = (
            kernel.shape()[0],
            kernel.shape()[1],
            kernel.shape()[2],
            kernel.shape()[3],
        );
        assert_eq!(
            kc_in, ch_in,
            "conv2d channel mismatch: input has {ch_in} channels, kernel expects {kc_in}"
        );
        assert_eq!(
            bias.shape(),
            &[ch_out],
            "conv2d bias must be [{ch_out}], got {:?}",
            bias.shape()
        );
        assert!(
            kh <= h + 2 * ph && kw <= w + 2 * pw,
            "conv2d kernel ({kh},{kw}) exceeds padded input ({},{})",
            h + 2 * ph,
            w + 2 * pw
        );

        let oh = conv_out_len(h, kh, sh, ph);
        let ow = conv_out_len(w, kw, sw, pw);
        let x = self.values();
        let wv = kernel.values();
        let b = bias.values();
        let mut out = vec![T::zero(); batch * ch_out * oh * ow];
        for bi in 0..batch {
            for co in 0..ch_out {
                let o_base = (bi * ch_out + co) * oh * ow;
                out[o_base..o_base + oh * ow].fill(b[co]);
                for ci in 0..ch_in {
                    let x_base = (bi * ch_in + ci) * h * w;
                    let w_base = (co * ch_in + ci) * kh * kw;
                    for oy in 0..oh {
                        let ory = (oy * sh) as isize - ph as isize;
                        let ky_lo = (-ory).max(0) as usize;
                        let ky_hi = kh.min((h as isize - ory).max(0) as usize);
                        for ox in 0..ow {
                            let orx = (ox * sw) as isize - pw as isize;
                            let kx_lo = (-orx).max(0) as usize;
                            let kx_hi = kw.min((w as isize - orx).max(0) as usize);
                            let mut acc = T::zero();
                            for ky in ky_lo..ky_hi {
                                let xr = x_base + (ory + ky as isize) as usize * w;
                                let wr = w_base + ky * kw;
                                for kx in kx_lo..kx_hi {
                                    acc += x[xr + (orx + kx as isize) as usize] * wv[wr + kx];
                                }
                            }
                            out[o_base + oy * ow + ox] += acc;
                        }
                    }
                }
            }
        }

        let x_vals = Arc::clone(&self.values);
        let w_vals = Arc::clone(&kernel.values);
        Self::record(
            &[self, kernel, bias],
            out,
            vec![batch, ch_out, oh, ow],
            move |ids| {
                let (ix, iw, ib) = (ids[0], ids[1], ids[2]);
                Box::new(move |gout, store: &mut GradStore<T>| {
                    if let Some(id) = ix {
                        let dst = store.slot(id, batch * ch_in * h * w);
                        for bi in 0..batch {
                            for co in 0..ch_out {
                                let o_base = (bi * ch_out + co) * oh * ow;
                                for ci in 0..ch_in {
                                    let x_base = (bi * ch_in + ci) * h * w;
                                    let w_base = (co * ch_in + ci) * kh * kw;
                                    for oy in 0..oh {
                                        let ory = (oy * sh) as isize - ph as isize;
                                        let ky_lo = (-ory).max(0) as usize;
                                        let ky_hi = kh.min((h as isize - ory).max(0) as usize);
                                        for ox in 0..ow {
                                            let g = gout[o_base + oy * ow + ox];
                                            if g == T::zero() {
                                                continue;
                                            }
                                            let orx = (ox * sw) as isize - pw as isize;
                                            let kx_lo = (-orx).max(0) as usize;
                                            let kx_hi =
                                                kw.min((w as isize - orx).max(0) as usize);
                                            for ky in ky_lo..ky_hi {
                                                let xr =
                                                    x_base + (ory + ky as isize) as usize * w;
                                                let wr = w_base + ky * kw;
                                                for kx in kx_lo..kx_hi {
                                                    dst[xr + (orx + kx as isize) as usize] +=
                                                        g * w_vals[wr + kx];
                                                }
                                            }
                                        }
                                    }
                                }
                            }
                        }
                    }
                    if let Some(id) = iw {
                        let dst = store.slot(id, ch_out * ch_in * kh * kw);
                        for bi in 0..batch {
                            for co in 0..ch_out {
                                let o_base = (bi * ch_out + co) * oh * ow;
                                for ci in 0..ch_in {
                                    let x_base = (bi * ch_in + ci) * h * w;
                                    let w_base = (co * ch_in + ci) * kh * kw;
                                    for oy in 0..oh {
                                        let ory = (oy * sh) as isize - ph as isize;
                                        let ky_lo = (-ory).max(0) as usize;
                                        let ky_hi = kh.min((h as isize - ory).max(0) as usize);
                                        for ox in 0..ow {
                                            let g = gout[o_base + oy * ow + ox];
                                            if g == T::zero() {
                                                continue;
                                            }
                                            let orx = (ox * sw) as isize - pw as isize;
                                            let kx_lo = (-orx).max(0) as usize;
                                            let kx_hi =
                                                kw.min((w as isize - orx).max(0) as usize);
                                            for ky in ky_lo..ky_hi {
                                                let xr =
                                                    x_base + (ory + ky as isize) as usize * w;
                                                let wr = w_base + ky * kw;
                                                for kx in kx_lo..kx_hi {
                                                    dst[wr + kx] += g
                                                        * x_vals
                                                            [xr + (orx + kx as isize) as usize];
                                                }
                                            }
                                        }
                                    }
                                }
                            }
                        }
                    }
                    if let Some(id) = ib {
                        let dst = store.slot(id, ch_out);
                        for bi in 0..batch {
                            for co in 0..ch_out {
                                let o_base = (bi * ch_out + co) * oh * ow;
                                for o in 0..oh * ow {
                                    dst[co] += gout[o_base + o];
                                }
                            }
                        }
                    }
                })
            },
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tape;

    type A = DiffArray<f64>;

    fn arr3(values: Vec<f64>, shape: [usize; 3]) -> A {
        A::constant(values, &shape)
    }

    #[test]
    fn conv1d_direct_evaluation() {
        // input [1,2,3,4], kernel [1,0,-1] -> [-2,-2]
        let x = arr3(vec![1.0, 2.0, 3.0, 4.0], [1, 1, 4]);
        let k = arr3(vec![1.0, 0.0, -1.0], [1, 1, 3]);
        let b = A::constant(vec![0.0], &[1]);
        let y = x.conv1d(&k, &b, 1, 0);
        assert_eq!(y.shape(), &[1, 1, 2]);
        assert_eq!(y.values(), &[-2.0, -2.0]);
    }

    #[test]
    fn conv1d_identity_kernel() {
        let x = arr3(vec![0.5, -1.5, 2.5], [1, 1, 3]);
        let k = arr3(vec![1.0], [1, 1, 1]);
        let b = A::constant(vec![0.0], &[1]);
        let y = x.conv1d(&k, &b, 1, 0);
        assert_eq!(y.values(), x.values());
    }

    #[test]
    fn conv1d_length_formula() {
        // len 16, k 8, stride 4, pad 2 -> out_len 4
        let x = arr3(vec![1.0; 16], [1, 1, 16]);
        let k = arr3(vec![1.0; 8], [1, 1, 8]);
        let b = A::constant(vec![0.0], &[1]);
        let y = x.conv1d(&k, &b, 4, 2);
        assert_eq!(y.shape(), &[1, 1, 4]);
        assert_eq!(conv_out_len(16, 8, 4, 2), 4);
    }

    #[test]
    #[should_panic(expected = "channel mismatch")]
    fn conv1d_channel_mismatch_panics() {
        let x = arr3(vec![1.0; 8], [1, 2, 4]);
        let k = arr3(vec![1.0; 3], [1, 3, 1]);
        let b = A::constant(vec![0.0], &[1]);
        let _ = x.conv1d(&k, &b, 1, 0);
    }

    #[test]
    fn conv_transpose1d_scatter_add() {
        // input [1,1], kernel [1,1], stride 2 -> [1,1,1,1]
        let x = arr3(vec![1.0, 1.0], [1, 1, 2]);
        let k = arr3(vec![1.0, 1.0], [1, 1, 2]);
        let b = A::constant(vec![0.0], &[1]);
        let y = x.conv_transpose1d(&k, &b, 2);
        assert_eq!(y.shape(), &[1, 1, 4]);
        assert_eq!(y.values(), &[1.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn conv_transpose1d_identity() {
        let x = arr3(vec![3.25], [1, 1, 1]);
        let k = arr3(vec![1.0], [1, 1, 1]);
        let b = A::constant(vec![0.0], &[1]);
        let y = x.conv_transpose1d(&k, &b, 1);
        assert_eq!(y.values(), &[3.25]);
    }

    #[test]
    fn conv_transpose1d_length_formula() {
        assert_eq!(conv_transpose_out_len(4, 8, 4), 20);
        let x = arr3(vec![1.0; 4], [1, 1, 4]);
        let k = arr3(vec![1.0; 8], [1, 1, 8]);
        let b = A::constant(vec![0.0], &[1]);
        assert_eq!(x.conv_transpose1d(&k, &b, 4).shape(), &[1, 1, 20]);
    }

    #[test]
    fn conv2d_all_ones() {
        // 3x3 ones, 2x2 ones kernel -> 2x2 of 4s
        let x = A::constant(vec![1.0; 9], &[1, 1, 3, 3]);
        let k = A::constant(vec![1.0; 4], &[1, 1, 2, 2]);
        let b = A::constant(vec![0.0], &[1]);
        let y = x.conv2d(&k, &b, (1, 1), (0, 0));
        assert_eq!(y.shape(), &[1, 1, 2, 2]);
        assert_eq!(y.values(), &[4.0; 4]);
    }

    #[test]
    fn conv2d_identity_kernel() {
        let x = A::constant((0..12).map(|v| v as f64).collect(), &[1, 1, 3, 4]);
        let k = A::constant(vec![1.0], &[1, 1, 1, 1]);
        let b = A::constant(vec![0.0], &[1]);
        let y = x.conv2d(&k, &b, (1, 1), (0, 0));
        assert_eq!(y.values(), x.values());
    }

    #[test]
    fn conv2d_height_formula() {
        // h=9, kh=5, sh=3, ph=2 -> out h = 3
        assert_eq!(conv_out_len(9, 5, 3, 2), 3);
        let x = A::constant(vec![1.0; 9 * 4], &[1, 1, 9, 4]);
        let k = A::constant(vec![1.0; 5], &[1, 1, 5, 1]);
        let b = A::constant(vec![0.0], &[1]);
        let y = x.conv2d(&k, &b, (3, 1), (2, 0));
        assert_eq!(y.shape()[2], 3);
    }

    /// Brute-force check that conv_transpose1d(g, w, s) equals the input
    /// gradient of conv1d(x, w, s) for shapes up to length 32.
    #[test]
    fn conv_transpose_matches_conv1d_input_gradient() {
        use rand::prelude::*;
        use rand_chacha::ChaCha8Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for &(len, k, stride, ch_in, ch_out) in &[
            (5usize, 2usize, 1usize, 1usize, 1usize),
            (8, 3, 2, 2, 1),
            (16, 8, 4, 1, 2),
            (32, 4, 3, 2, 2),
            (9, 1, 1, 1, 3),
        ] {
            let out_len = conv_out_len(len, k, stride, 0);
            let x: Vec<f64> = (0..len * ch_in).map(|_| rng.random_range(-1.0..1.0)).collect();
            let w: Vec<f64> = (0..ch_out * ch_in * k)
                .map(|_| rng.random_range(-1.0..1.0))
                .collect();
            let g: Vec<f64> = (0..ch_out * out_len)
                .map(|_| rng.random_range(-1.0..1.0))
                .collect();

            // Route 1: autodiff input gradient of sum(conv1d(x, w) * g).
            let tape = Tape::new();
            let xa = A::watched(&tape, x.clone(), &[1, ch_in, len]);
            let wa = A::constant(w.clone(), &[ch_out, ch_in, k]);
            let ba = A::constant(vec![0.0; ch_out], &[ch_out]);
            let ga = A::constant(g.clone(), &[1, ch_out, out_len]);
            let y = xa.conv1d(&wa, &ba, stride, 0).mul(&ga).sum_all();
            let grads = y.backward();
            let via_autodiff = grads.wrt(&xa).unwrap().to_vec();

            // Route 2: conv_transpose1d of g with the same kernel buffer,
            // whose [ch_out, ch_in, k] layout reads as [in, out, k] here.
            let gt = A::constant(g, &[1, ch_out, out_len]);
            let wt = A::constant(w, &[ch_out, ch_in, k]);
            let bt = A::constant(vec![0.0; ch_in], &[ch_in]);
            let scattered = gt.conv_transpose1d(&wt, &bt, stride);

            // Trailing input samples beyond the last window get zero gradient.
            let covered = conv_transpose_out_len(out_len, k, stride);
            assert!(covered <= len);
            for ci in 0..ch_in {
                for t in 0..len {
                    let a = via_autodiff[ci * len + t];
                    let b = if t < covered {
                        scattered.values()[ci * covered + t]
                    } else {
                        0.0
                    };
                    assert!((a - b).abs() < 1e-12, "mismatch at ch {ci} t {t}: {a} vs {b}");
                }
            }
        }
    }
}
