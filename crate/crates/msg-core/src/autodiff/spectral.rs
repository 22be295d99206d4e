//! Differentiable energy spectrogram.
//!
//! Framing matches [`crate::dsp::stft`]: reflect-pad by window_size/2 so
//! frame t is centered at t*hop, periodic Hann window, windowed frame
//! zero-padded up to fft_size, one-sided bins 0..=fft_size/2, energy is the
//! squared magnitude. The backward pass is the adjoint of the windowed DFT,
//! evaluated with an inverse FFT.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::{ops::reflect_index, DiffArray, GradStore};
use crate::scalar::Scalar;

/// Periodic Hann window of length `n`.
pub fn hann_window<T: Scalar>(n: usize) -> Vec<T> {
    let two_pi = T::of_f64(std::f64::consts::TAU);
    let half = T::of_f64(0.5);
    (0..n)
        .map(|i| half * (T::one() - (two_pi * T::of_usize(i) / T::of_usize(n)).cos()))
        .collect()
}

/// Frame count for centered framing: 1 + floor(len / hop).
pub fn frame_count(len: usize, hop: usize) -> usize {
    1 + len / hop
}

impl<T: Scalar> DiffArray<T> {
    /// Energy spectrogram of a `[len]` or `[batch, len]` signal, producing
    /// `[frames, bins]` or `[batch, frames, bins]` with bins = fft_size/2 + 1.
    pub fn energy_spectrogram(&self, fft_size: usize, window_size: usize, hop: usize) -> Self {
        assert!(hop >= 1, "spectrogram hop must be >= 1, got {hop}");
        assert!(
            window_size <= fft_size,
            "window_size {window_size} exceeds fft_size {fft_size}"
        );
        let (batch, len) = match self.shape() {
            [len] => (1usize, *len),
            [batch, len] => (*batch, *len),
            other => panic!("energy_spectrogram expects [len] or [batch, len], got {other:?}"),
        };
        assert!(len >= 1, "energy_spectrogram on empty audio");

        let pad = window_size / 2;
        let frames = frame_count(len, hop);
        let bins = fft_size / 2 + 1;
        let window = hann_window::<T>(window_size);

        let mut planner = FftPlanner::<T>::new();
        let fft = planner.plan_fft_forward(fft_size);

        let x = self.values();
        // The padded buffer covers exactly what the frames read.
        let padded_len = (frames - 1) * hop + window_size;
        let mut out = vec![T::zero(); batch * frames * bins];
        // Saved one-sided spectra for the backward pass.
        let mut spectra = vec![Complex::new(T::zero(), T::zero()); batch * frames * bins];
        let mut buf = vec![Complex::new(T::zero(), T::zero()); fft_size];
        for b in 0..batch {
            let row = &x[b * len..(b + 1) * len];
            // Materialize the reflect-padded signal once per row.
            let mut padded = Vec::with_capacity(padded_len);
            for q in 0..padded_len {
                padded.push(row[reflect_index(q as isize - pad as isize, len)]);
            }
            for f in 0..frames {
                let start = f * hop;
                for t in 0..window_size {
                    buf[t] = Complex::new(padded[start + t] * window[t], T::zero());
                }
                for t in window_size..fft_size {
                    buf[t] = Complex::new(T::zero(), T::zero());
                }
                fft.process(&mut buf);
                let o_base = (b * frames + f) * bins;
                for j in 0..bins {
                    spectra[o_base + j] = buf[j];
                    out[o_base + j] = buf[j].re * buf[j].re + buf[j].im * buf[j].im;
                }
            }
        }

        let out_shape = if self.shape().len() == 1 {
            vec![frames, bins]
        } else {
            vec![batch, frames, bins]
        };
        let spectra = Arc::new(spectra);
        let window = Arc::new(window);
        let numel_in = self.numel();
        Self::record(&[self], out, out_shape, move |ids| {
            let input = ids[0];
            Box::new(move |gout, store: &mut GradStore<T>| {
                let Some(id) = input else { return };
                let mut planner = FftPlanner::<T>::new();
                let ifft = planner.plan_fft_inverse(fft_size);
                let mut buf = vec![Complex::new(T::zero(), T::zero()); fft_size];
                let two = T::of_f64(2.0);
                let dst = store.slot(id, numel_in);
                let padded_len = (frames - 1) * hop + window_size;
                for b in 0..batch {
                    let mut padded_grad = vec![T::zero(); padded_len];
                    for f in 0..frames {
                        let o_base = (b * frames + f) * bins;
                        // Adjoint of |X|^2 then of the DFT: Re part of the
                        // unnormalized inverse FFT of 2 * conj-free spectrum
                        // weighted by the upstream gradient.
                        for j in 0..bins {
                            let g = gout[o_base + j];
                            let s = spectra[o_base + j];
                            buf[j] = Complex::new(two * s.re * g, two * s.im * g);
                        }
                        for j in bins..fft_size {
                            buf[j] = Complex::new(T::zero(), T::zero());
                        }
                        ifft.process(&mut buf);
                        let start = f * hop;
                        for t in 0..window_size {
                            padded_grad[start + t] += buf[t].re * window[t];
                        }
                    }
                    // Fold the reflect padding back onto source samples.
                    let base = b * len;
                    for (q, &g) in padded_grad.iter().enumerate() {
                        if g != T::zero() {
                            dst[base + reflect_index(q as isize - pad as isize, len)] += g;
                        }
                    }
                }
            })
        })
    }
}
