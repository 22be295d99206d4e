//! Peak normalization, track segmentation, and ground-truth swap
//! augmentation.

use rand::Rng;

use super::{SourceClass, TrainingExample, SILENCE_REJECT_DBFS};
use crate::dsp::AudioBuffer;
use crate::Sample;

/// Scale so the absolute peak is 1.0; all-zero input returns unchanged.
pub fn peak_normalize(audio: &AudioBuffer<Sample>) -> AudioBuffer<Sample> {
    assert!(!audio.is_empty(), "peak_normalize on empty audio");
    let peak = audio
        .samples()
        .iter()
        .fold(0.0f64, |acc, &s| acc.max(s.abs()));
    if peak == 0.0 {
        return audio.clone();
    }
    AudioBuffer::new(
        audio.samples().iter().map(|&s| s / peak).collect(),
        audio.sample_rate(),
    )
}

/// Clip-level RMS in dBFS (-inf-safe: silence clamps to -120).
pub fn clip_rms_dbfs(samples: &[Sample]) -> f64 {
    let ms: f64 = samples.iter().map(|&s| s * s).sum::<f64>() / samples.len() as f64;
    let rms = ms.sqrt();
    if rms <= 0.0 {
        -120.0
    } else {
        (20.0 * rms.log10()).max(-120.0)
    }
}

/// Bookkeeping for one candidate clip.
#[derive(Debug, Clone)]
pub struct ClipRecord {
    pub index: usize,
    pub offset: usize,
    pub rms_dbfs: f64,
    pub kept: bool,
    pub rejection: Option<String>,
}

/// Result of segmenting a track pair.
#[derive(Debug)]
pub struct Segmentation {
    pub examples: Vec<TrainingExample>,
    pub records: Vec<ClipRecord>,
    /// Set when the two tracks differed in length and the longer was
    /// truncated.
    pub truncated_samples: usize,
}

/// Cut an aligned estimate/truth track pair into non-overlapping clips of
/// `clip_len` samples, dropping the final partial clip and any clip whose
/// ground-truth RMS is strictly below -60 dBFS. Tracks of unequal length
/// are truncated to the shorter.
pub fn segment_dataset(
    estimate_track: &AudioBuffer<Sample>,
    truth_track: &AudioBuffer<Sample>,
    clip_len: usize,
    source_class: SourceClass,
    separator_tag: &str,
) -> Segmentation {
    assert!(clip_len >= 1, "clip_len must be >= 1");
    assert_eq!(
        estimate_track.sample_rate(),
        truth_track.sample_rate(),
        "track sample rates differ"
    );
    let common = estimate_track.len().min(truth_track.len());
    let truncated_samples = estimate_track.len().max(truth_track.len()) - common;

    let mut examples = Vec::new();
    let mut records = Vec::new();
    let n_clips = common / clip_len;
    for i in 0..n_clips {
        let offset = i * clip_len;
        let truth = &truth_track.samples()[offset..offset + clip_len];
        let estimate = &estimate_track.samples()[offset..offset + clip_len];
        let rms = clip_rms_dbfs(truth);
        // Rejection is strictly below the floor: a clip at exactly -60 stays.
        let kept = rms >= SILENCE_REJECT_DBFS;
        records.push(ClipRecord {
            index: i,
            offset,
            rms_dbfs: rms,
            kept,
            rejection: (!kept).then(|| {
                format!("ground-truth RMS {rms:.1} dBFS below {SILENCE_REJECT_DBFS} dBFS")
            }),
        });
        if kept {
            examples.push(TrainingExample {
                input: AudioBuffer::new(estimate.to_vec(), estimate_track.sample_rate()),
                target: AudioBuffer::new(truth.to_vec(), truth_track.sample_rate()),
                source_class,
                separator_tag: separator_tag.to_string(),
            });
        }
    }

    Segmentation {
        examples,
        records,
        truncated_samples,
    }
}

/// With probability `p`, replace the input with the ground truth so the
/// model sees identity pairs.
pub fn swap_augment(example: &TrainingExample, p: f64, rng: &mut impl Rng) -> TrainingExample {
    assert!((0.0..=1.0).contains(&p), "swap probability {p} outside [0, 1]");
    let mut out = example.clone();
    if p > 0.0 && rng.random::<f64>() < p {
        out.input = out.target.clone();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn buf(samples: Vec<Sample>) -> AudioBuffer<Sample> {
        AudioBuffer::new(samples, 16000)
    }

    #[test]
    fn peak_normalize_examples() {
        let a = peak_normalize(&buf(vec![0.5, -0.25]));
        assert_eq!(a.samples(), &[1.0, -0.5]);

        let already = buf(vec![1.0, -0.5]);
        assert_eq!(peak_normalize(&already).samples(), already.samples());

        let zeros = buf(vec![0.0; 4]);
        assert_eq!(peak_normalize(&zeros).samples(), zeros.samples());
    }

    #[test]
    fn segment_drops_partial_and_silent_clips() {
        // 3.5 "seconds" with clip_len 4 stands in for 1-second clips.
        let clip_len = 4;
        let mut truth = vec![0.5; 14];
        // Second clip silent in the ground truth.
        for v in truth.iter_mut().skip(4).take(4) {
            *v = 0.0;
        }
        let estimate = vec![0.25; 14];
        let seg = segment_dataset(
            &buf(estimate),
            &buf(truth),
            clip_len,
            SourceClass::Bass,
            "test",
        );
        // floor(14/4) = 3 candidate clips; the silent one is rejected.
        assert_eq!(seg.records.len(), 3);
        assert_eq!(seg.examples.len(), 2);
        assert!(!seg.records[1].kept);
        assert!(seg.records[1].rejection.as_ref().unwrap().contains("-60"));
    }

    #[test]
    fn clip_at_exactly_minus_60_is_kept() {
        let amplitude = 10f64.powf(-60.0 / 20.0);
        let truth = vec![amplitude; 8];
        let seg = segment_dataset(
            &buf(vec![0.1; 8]),
            &buf(truth),
            8,
            SourceClass::Bass,
            "test",
        );
        assert!((seg.records[0].rms_dbfs + 60.0).abs() < 1e-9);
        assert_eq!(seg.examples.len(), 1);
    }

    #[test]
    fn unequal_tracks_truncate_to_shorter() {
        let seg = segment_dataset(
            &buf(vec![0.5; 10]),
            &buf(vec![0.5; 13]),
            4,
            SourceClass::Drums,
            "test",
        );
        assert_eq!(seg.truncated_samples, 3);
        assert_eq!(seg.examples.len(), 2);
    }

    #[test]
    fn swap_probability_extremes() {
        let example = TrainingExample {
            input: buf(vec![0.1; 4]),
            target: buf(vec![0.9; 4]),
            source_class: SourceClass::Bass,
            separator_tag: "t".into(),
        };
        let mut rng = crate::rng::derive(1, 0);
        for _ in 0..50 {
            let out = swap_augment(&example, 0.0, &mut rng);
            assert_eq!(out.input.samples(), example.input.samples());
        }
        for _ in 0..50 {
            let out = swap_augment(&example, 1.0, &mut rng);
            assert_eq!(out.input.samples(), out.target.samples());
        }
    }

    #[test]
    fn swap_fraction_concentrates_around_p() {
        let example = TrainingExample {
            input: buf(vec![0.1; 4]),
            target: buf(vec![0.9; 4]),
            source_class: SourceClass::Bass,
            separator_tag: "t".into(),
        };
        let mut rng = crate::rng::derive(123, 7);
        let swaps = (0..10000)
            .filter(|_| {
                swap_augment(&example, 0.1, &mut rng).input.samples()
                    == example.target.samples()
            })
            .count();
        let fraction = swaps as f64 / 10000.0;
        assert!((0.08..=0.12).contains(&fraction), "fraction {fraction}");
    }
}
