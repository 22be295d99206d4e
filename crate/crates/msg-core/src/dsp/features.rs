//! Spectral rolloff, cents conversion, frame RMS, and onset measures.

use super::mel::mel_spectrogram;
use super::stft::SpectrogramMatrix;
use super::AudioBuffer;
use crate::autodiff::{frame_count, reflect_index};
use crate::scalar::Scalar;

/// Per-frame rolloff frequency in Hz: the center frequency of the smallest
/// bin at which cumulative energy reaches `percent` of the frame total.
/// Zero-energy frames carry a 0 Hz sentinel.
pub fn spectral_rolloff<T: Scalar>(spec: &SpectrogramMatrix<T>, percent: T) -> Vec<T> {
    assert!(
        percent > T::zero() && percent <= T::one(),
        "rolloff percent must be in (0, 1], got {percent}"
    );
    (0..spec.frames())
        .map(|f| {
            let row = spec.frame(f);
            let total: T = row.iter().copied().sum();
            if total <= T::zero() {
                return T::zero();
            }
            let target = percent * total;
            let mut cum = T::zero();
            for (b, &e) in row.iter().enumerate() {
                cum += e;
                if cum >= target {
                    return spec.bin_frequency(b);
                }
            }
            // Rounding left us short of the target; the last bin closes it.
            spec.bin_frequency(spec.bins() - 1)
        })
        .collect()
}

/// Interval between two frequencies in cents: 1200 * (log2 x - log2 y),
/// evaluated as 1200 * log2(x/y). Positive when `x` rolls off above `y`.
pub fn cents_difference<T: Scalar>(x: T, y: T) -> T {
    assert!(
        x > T::zero() && y > T::zero(),
        "cents_difference requires positive frequencies, got ({x}, {y})"
    );
    T::of_f64(1200.0) * (x / y).log2()
}

/// Per-frame RMS level in dBFS over centered frames (same framing as
/// [`super::stft`]), clamped at a -120 dBFS silence floor.
pub fn frame_rms_dbfs<T: Scalar>(audio: &AudioBuffer<T>, frame_size: usize, hop: usize) -> Vec<T> {
    assert!(frame_size >= 1, "frame_size must be >= 1");
    assert!(hop >= 1, "hop must be >= 1");
    assert!(!audio.is_empty(), "frame_rms_dbfs on empty audio");
    let samples = audio.samples();
    let len = samples.len();
    let pad = frame_size / 2;
    let frames = frame_count(len, hop);
    let floor = T::of_f64(-120.0);
    let twenty = T::of_f64(20.0);
    (0..frames)
        .map(|f| {
            let mut acc = T::zero();
            for t in 0..frame_size {
                let q = (f * hop + t) as isize - pad as isize;
                let s = samples[reflect_index(q, len)];
                acc += s * s;
            }
            let rms = (acc / T::of_usize(frame_size)).sqrt();
            if rms <= T::zero() {
                floor
            } else {
                (twenty * rms.log10()).max(floor)
            }
        })
        .collect()
}

/// Per-frame nonnegative onset strengths with their frame hop.
#[derive(Debug, Clone)]
pub struct OnsetEnvelope<T> {
    pub strengths: Vec<T>,
    pub frame_hop: usize,
}

/// Spectral-flux onset strength: mel energies to dB (reference = grid max,
/// floored at -80 dB), per-frame first difference along time, half-wave
/// rectified, averaged across mel bands. Frame 0 has strength 0.
pub fn onset_strength<T: Scalar>(
    audio: &AudioBuffer<T>,
    n_mels: usize,
    fft_size: usize,
    hop: usize,
) -> OnsetEnvelope<T> {
    let grid = mel_spectrogram(audio, fft_size, fft_size, hop, n_mels);
    let frames = grid.len();
    let db_floor = T::of_f64(-80.0);
    let ten = T::of_f64(10.0);

    let reference = grid
        .iter()
        .flatten()
        .copied()
        .fold(T::zero(), |a, b| a.max(b));
    let mut db = vec![db_floor; frames * n_mels];
    if reference > T::zero() {
        for (f, row) in grid.iter().enumerate() {
            for (m, &e) in row.iter().enumerate() {
                if e > T::zero() {
                    db[f * n_mels + m] = (ten * (e / reference).log10()).max(db_floor);
                }
            }
        }
    }

    let mut strengths = vec![T::zero(); frames];
    for f in 1..frames {
        let mut acc = T::zero();
        for m in 0..n_mels {
            let diff = db[f * n_mels + m] - db[(f - 1) * n_mels + m];
            if diff > T::zero() {
                acc += diff;
            }
        }
        strengths[f] = acc / T::of_usize(n_mels);
    }

    OnsetEnvelope {
        strengths,
        frame_hop: hop,
    }
}

/// Onset match counts and the F1 that follows from them.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct OnsetCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub f1: f64,
}

impl OnsetCounts {
    pub fn from_counts(tp: usize, fp: usize, f_n: usize) -> Self {
        let f1 = if tp + fp + f_n == 0 {
            1.0
        } else {
            tp as f64 / (tp as f64 + 0.5 * (fp + f_n) as f64)
        };
        OnsetCounts {
            tp,
            fp,
            fn_: f_n,
            f1,
        }
    }
}

/// Binarize both envelopes at `threshold` and count frame-aligned matches:
/// TP where both exceed, FP where only the estimate does, FN where only the
/// reference does. F1 = TP / (TP + (FP + FN)/2), defined as 1 when all
/// counts are zero.
pub fn onset_f1<T: Scalar>(
    est: &OnsetEnvelope<T>,
    reference: &OnsetEnvelope<T>,
    threshold: T,
) -> OnsetCounts {
    assert_eq!(
        est.strengths.len(),
        reference.strengths.len(),
        "onset envelopes differ in frame count: {} vs {}",
        est.strengths.len(),
        reference.strengths.len()
    );
    assert_eq!(
        est.frame_hop, reference.frame_hop,
        "onset envelopes differ in hop: {} vs {}",
        est.frame_hop, reference.frame_hop
    );
    let mut tp = 0;
    let mut fp = 0;
    let mut f_n = 0;
    for (&e, &r) in est.strengths.iter().zip(&reference.strengths) {
        match (e > threshold, r > threshold) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => f_n += 1,
            (false, false) => {}
        }
    }
    OnsetCounts::from_counts(tp, fp, f_n)
}
