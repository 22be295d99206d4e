//! Short-time Fourier transform with energy (squared-magnitude) output.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::AudioBuffer;
use crate::autodiff::{frame_count, hann_window, reflect_index};
use crate::scalar::Scalar;

/// Frames-by-bins grid of nonnegative spectral energies.
#[derive(Debug, Clone)]
pub struct SpectrogramMatrix<T> {
    energies: Vec<T>,
    frames: usize,
    bins: usize,
    pub frame_hop: usize,
    pub fft_size: usize,
    pub window_size: usize,
    pub sample_rate: u32,
}

impl<T: Scalar> SpectrogramMatrix<T> {
    /// Wrap a precomputed frames-by-bins energy grid.
    pub fn from_energies(
        energies: Vec<T>,
        bins: usize,
        frame_hop: usize,
        fft_size: usize,
        window_size: usize,
        sample_rate: u32,
    ) -> Self {
        assert_eq!(
            bins,
            fft_size / 2 + 1,
            "bins must equal fft_size/2 + 1, got {bins} for fft {fft_size}"
        );
        assert_eq!(
            energies.len() % bins,
            0,
            "energy grid of {} values is not a whole number of {bins}-bin frames",
            energies.len()
        );
        assert!(
            energies.iter().all(|&e| e >= T::zero()),
            "spectral energies must be nonnegative"
        );
        let frames = energies.len() / bins;
        SpectrogramMatrix {
            energies,
            frames,
            bins,
            frame_hop,
            fft_size,
            window_size,
            sample_rate,
        }
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn frame(&self, f: usize) -> &[T] {
        &self.energies[f * self.bins..(f + 1) * self.bins]
    }

    pub fn energies(&self) -> &[T] {
        &self.energies
    }

    /// Center frequency of bin `b` in Hz.
    pub fn bin_frequency(&self, b: usize) -> T {
        T::of_usize(b) * T::of_usize(self.sample_rate as usize) / T::of_usize(self.fft_size)
    }
}

/// Energy spectrogram over centered frames: reflect-pad by window_size/2 so
/// frame t is centered at t*hop; frames = 1 + floor(len/hop); periodic Hann
/// window, zero-padded up to fft_size.
pub fn stft<T: Scalar>(
    audio: &AudioBuffer<T>,
    fft_size: usize,
    window_size: usize,
    hop: usize,
) -> SpectrogramMatrix<T> {
    assert!(!audio.is_empty(), "stft on empty audio");
    assert!(hop >= 1, "stft hop must be >= 1, got {hop}");
    assert!(
        window_size <= fft_size,
        "window_size {window_size} exceeds fft_size {fft_size}"
    );

    let samples = audio.samples();
    let len = samples.len();
    let pad = window_size / 2;
    let frames = frame_count(len, hop);
    let bins = fft_size / 2 + 1;
    let window = hann_window::<T>(window_size);

    let padded_len = (frames - 1) * hop + window_size;
    let mut padded = Vec::with_capacity(padded_len);
    for q in 0..padded_len {
        padded.push(samples[reflect_index(q as isize - pad as isize, len)]);
    }

    let mut planner = FftPlanner::<T>::new();
    let fft = planner.plan_fft_forward(fft_size);
    let mut buf = vec![Complex::new(T::zero(), T::zero()); fft_size];
    let mut energies = vec![T::zero(); frames * bins];
    for f in 0..frames {
        let start = f * hop;
        for t in 0..window_size {
            buf[t] = Complex::new(padded[start + t] * window[t], T::zero());
        }
        for t in window_size..fft_size {
            buf[t] = Complex::new(T::zero(), T::zero());
        }
        fft.process(&mut buf);
        for j in 0..bins {
            energies[f * bins + j] = buf[j].re * buf[j].re + buf[j].im * buf[j].im;
        }
    }

    SpectrogramMatrix {
        energies,
        frames,
        bins,
        frame_hop: hop,
        fft_size,
        window_size,
        sample_rate: audio.sample_rate(),
    }
}
