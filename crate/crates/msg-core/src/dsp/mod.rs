//! Non-learned signal-analysis primitives shared by the losses and the
//! artifact metrics: STFT, mel projection, rolloff, frame RMS, onset
//! strength. All operations are pure and reentrant.

mod features;
mod mel;
mod stft;

pub use features::{
    cents_difference, frame_rms_dbfs, onset_f1, onset_strength, spectral_rolloff, OnsetCounts,
    OnsetEnvelope,
};
pub use mel::{mel_spectrogram, MelFilterbank};
pub use stft::{stft, SpectrogramMatrix};

use crate::scalar::Scalar;

/// Mono sample sequence with its sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer<T> {
    samples: Vec<T>,
    sample_rate: u32,
}

impl<T: Scalar> AudioBuffer<T> {
    pub fn new(samples: Vec<T>, sample_rate: u32) -> Self {
        assert!(sample_rate > 0, "sample_rate must be positive");
        AudioBuffer {
            samples,
            sample_rate,
        }
    }

    pub fn samples(&self) -> &[T] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [T] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<T> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Duration in seconds.
    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}
