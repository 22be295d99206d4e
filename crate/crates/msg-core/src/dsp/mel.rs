//! Mel filterbank construction and mel-energy spectrograms.

use super::stft::stft;
use super::AudioBuffer;
use crate::scalar::Scalar;

/// Hz to mel, HTK convention: 2595 * log10(1 + f/700).
pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

/// Mel to Hz, inverse of [`hz_to_mel`].
pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10.0f64.powf(mel / 2595.0) - 1.0)
}

/// Bank of triangular filters with peaks at mel-uniform centers.
#[derive(Debug, Clone)]
pub struct MelFilterbank<T> {
    /// n_mels x bins, row-major.
    weights: Vec<T>,
    n_mels: usize,
    bins: usize,
    /// Triangle support points in Hz: n_mels + 2 entries from fmin to fmax.
    points_hz: Vec<f64>,
    pub fmin: f64,
    pub fmax: f64,
}

impl<T: Scalar> MelFilterbank<T> {
    /// Build a bank of `n_mels` unit-height triangles covering
    /// `(fmin, fmax)` for spectra of `fft_size` at `sample_rate`.
    pub fn new(sample_rate: u32, fft_size: usize, n_mels: usize, fmin: f64, fmax: f64) -> Self {
        assert!(n_mels >= 2, "n_mels must be >= 2, got {n_mels}");
        let nyquist = sample_rate as f64 / 2.0;
        assert!(
            0.0 <= fmin && fmin < fmax && fmax <= nyquist,
            "invalid band edges: fmin {fmin}, fmax {fmax}, nyquist {nyquist}"
        );

        let bins = fft_size / 2 + 1;
        let mel_lo = hz_to_mel(fmin);
        let mel_hi = hz_to_mel(fmax);
        let points_hz: Vec<f64> = (0..n_mels + 2)
            .map(|i| mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (n_mels + 1) as f64))
            .collect();

        let mut weights = vec![T::zero(); n_mels * bins];
        for m in 0..n_mels {
            let (lo, mid, hi) = (points_hz[m], points_hz[m + 1], points_hz[m + 2]);
            let mut any = false;
            for b in 0..bins {
                let f = b as f64 * sample_rate as f64 / fft_size as f64;
                let w = triangle(lo, mid, hi, f);
                if w > 0.0 {
                    weights[m * bins + b] = T::of_f64(w);
                    any = true;
                }
            }
            // A triangle narrower than the bin spacing can miss every bin
            // center; give it the bin nearest its peak so no row is empty.
            if !any {
                let nearest =
                    ((mid * fft_size as f64 / sample_rate as f64).round() as usize).min(bins - 1);
                weights[m * bins + nearest] = T::one();
            }
        }

        MelFilterbank {
            weights,
            n_mels,
            bins,
            points_hz,
            fmin,
            fmax,
        }
    }

    pub fn n_mels(&self) -> usize {
        self.n_mels
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn row(&self, m: usize) -> &[T] {
        &self.weights[m * self.bins..(m + 1) * self.bins]
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    /// The continuous triangle for filter `m` evaluated at `f` Hz.
    pub fn response_at(&self, m: usize, f: f64) -> f64 {
        triangle(
            self.points_hz[m],
            self.points_hz[m + 1],
            self.points_hz[m + 2],
            f,
        )
    }

    /// Center (peak) frequency of filter `m` in Hz.
    pub fn center_hz(&self, m: usize) -> f64 {
        self.points_hz[m + 1]
    }

    /// Project a frame of `bins` energies onto the mel bands.
    pub fn project_frame(&self, energies: &[T]) -> Vec<T> {
        assert_eq!(
            energies.len(),
            self.bins,
            "expected {} bins, got {}",
            self.bins,
            energies.len()
        );
        (0..self.n_mels)
            .map(|m| {
                self.row(m)
                    .iter()
                    .zip(energies)
                    .map(|(&w, &e)| w * e)
                    .sum()
            })
            .collect()
    }
}

fn triangle(lo: f64, mid: f64, hi: f64, f: f64) -> f64 {
    if f <= lo || f >= hi {
        // A degenerate flat triangle (lo == mid == hi) never matches here
        // because mel points are strictly increasing for fmin < fmax.
        0.0
    } else if f <= mid {
        (f - lo) / (mid - lo)
    } else {
        (hi - f) / (hi - mid)
    }
}

/// Frames-by-n_mels energy grid: STFT energies projected through a mel
/// filterbank spanning 0..Nyquist.
pub fn mel_spectrogram<T: Scalar>(
    audio: &AudioBuffer<T>,
    fft_size: usize,
    window_size: usize,
    hop: usize,
    n_mels: usize,
) -> Vec<Vec<T>> {
    let spec = stft(audio, fft_size, window_size, hop);
    let bank = MelFilterbank::<T>::new(
        audio.sample_rate(),
        fft_size,
        n_mels,
        0.0,
        audio.sample_rate() as f64 / 2.0,
    );
    (0..spec.frames())
        .map(|f| bank.project_frame(spec.frame(f)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mel_scale_round_trip() {
        for f in [0.0, 100.0, 440.0, 4000.0, 8000.0] {
            assert!((mel_to_hz(hz_to_mel(f)) - f).abs() < 1e-9);
        }
        assert_eq!(hz_to_mel(0.0), 0.0);
    }

    #[test]
    fn filter_peaks_at_own_center_zero_at_neighbors() {
        let bank = MelFilterbank::<f64>::new(16000, 1024, 40, 0.0, 8000.0);
        for m in 1..39 {
            assert!((bank.response_at(m, bank.center_hz(m)) - 1.0).abs() < 1e-12);
            assert_eq!(bank.response_at(m, bank.center_hz(m - 1)), 0.0);
            assert_eq!(bank.response_at(m, bank.center_hz(m + 1)), 0.0);
        }
    }

    #[test]
    fn interior_bins_are_covered() {
        let bank = MelFilterbank::<f64>::new(16000, 1024, 64, 0.0, 8000.0);
        let bins = bank.bins();
        for b in 0..bins {
            let f = b as f64 * 16000.0 / 1024.0;
            if f > 0.0 && f < 8000.0 {
                let total: f64 = (0..bank.n_mels()).map(|m| bank.row(m)[b]).sum();
                assert!(total > 0.0, "bin {b} at {f} Hz uncovered");
            }
        }
    }

    #[test]
    fn two_mel_degenerate_case_is_valid() {
        let bank = MelFilterbank::<f64>::new(16000, 512, 2, 0.0, 8000.0);
        assert_eq!(bank.n_mels(), 2);
        for m in 0..2 {
            assert!(bank.row(m).iter().any(|&w| w > 0.0), "row {m} empty");
            assert!((bank.response_at(m, bank.center_hz(m)) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn narrow_triangles_still_get_a_bin() {
        // 128 mels over a 1024-point FFT at 16 kHz: low triangles are
        // narrower than the 15.6 Hz bin spacing.
        let bank = MelFilterbank::<f64>::new(16000, 1024, 128, 0.0, 8000.0);
        for m in 0..bank.n_mels() {
            assert!(bank.row(m).iter().any(|&w| w > 0.0), "row {m} empty");
        }
    }

    #[test]
    #[should_panic(expected = "invalid band edges")]
    fn inverted_band_edges_panic() {
        let _ = MelFilterbank::<f64>::new(16000, 512, 10, 4000.0, 1000.0);
    }

    #[test]
    fn zero_audio_gives_zero_grid() {
        let audio = AudioBuffer::new(vec![0.0; 2000], 16000);
        let grid = mel_spectrogram(&audio, 512, 512, 128, 32);
        assert!(grid.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn scaling_audio_scales_grid_quadratically() {
        let samples: Vec<f64> = (0..2000)
            .map(|i| (std::f64::consts::TAU * 500.0 * i as f64 / 16000.0).sin())
            .collect();
        let a = AudioBuffer::new(samples.clone(), 16000);
        let b = AudioBuffer::new(samples.iter().map(|s| 2.0 * s).collect(), 16000);
        let ga = mel_spectrogram(&a, 512, 512, 128, 32);
        let gb = mel_spectrogram(&b, 512, 512, 128, 32);
        for (ra, rb) in ga.iter().zip(&gb) {
            for (&ea, &eb) in ra.iter().zip(rb) {
                assert!((eb - 4.0 * ea).abs() < 1e-9 * (1.0 + ea.abs()));
            }
        }
    }

    #[test]
    fn sinusoid_lands_in_matching_mel_band() {
        let freq = 2000.0;
        let samples: Vec<f64> = (0..4000)
            .map(|i| (std::f64::consts::TAU * freq * i as f64 / 16000.0).sin())
            .collect();
        let audio = AudioBuffer::new(samples, 16000);
        let grid = mel_spectrogram(&audio, 1024, 1024, 256, 40);
        let bank = MelFilterbank::<f64>::new(16000, 1024, 40, 0.0, 8000.0);

        // Oracle: band whose continuous response at freq is maximal.
        let expected = (0..40)
            .map(|m| (m, bank.response_at(m, freq)))
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap()
            .0;
        // Interior frames (away from edge padding) peak at that band.
        for row in &grid[2..grid.len() - 2] {
            let argmax = row
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0;
            assert!(
                argmax == expected || argmax + 1 == expected || expected + 1 == argmax,
                "band {argmax} vs {expected}"
            );
        }
    }
}
