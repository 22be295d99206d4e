//! Audio I/O, corpus preparation, augmentation, and the synthetic
//! degradation generator that stands in for pretrained separators at desk
//! scale.

mod resample;
mod segment;
mod synth;
mod wav;

pub use resample::{convolve_same, design_lowpass_fir, resample, resample_to_16k};
pub use segment::{peak_normalize, segment_dataset, swap_augment, ClipRecord, Segmentation};
pub use synth::{synthesize_corpus, synthesize_pair, write_corpus, CorpusPaths};
pub use wav::{read_wav, write_wav, WavFormat};

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dsp::AudioBuffer;
use crate::error::{Error, Result};
use crate::Sample;

/// Pipeline sample rate (Hz).
pub const PIPELINE_RATE: u32 = 16000;

/// Training clip length in samples (one second at 16 kHz).
pub const CLIP_LEN: usize = 16000;

/// Clips whose ground-truth RMS falls strictly below this are rejected.
pub const SILENCE_REJECT_DBFS: f64 = -60.0;

/// Instrument class a model is trained for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceClass {
    Bass,
    Drums,
    Vocals,
}

impl fmt::Display for SourceClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            SourceClass::Bass => "bass",
            SourceClass::Drums => "drums",
            SourceClass::Vocals => "vocals",
        };
        f.write_str(name)
    }
}

impl FromStr for SourceClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bass" => Ok(SourceClass::Bass),
            "drums" => Ok(SourceClass::Drums),
            "vocals" => Ok(SourceClass::Vocals),
            other => Err(Error::Config(format!(
                "unknown source class {other:?} (expected bass, drums, or vocals)"
            ))),
        }
    }
}

/// One training pair: the raw estimate to clean up and its ground truth.
#[derive(Debug, Clone)]
pub struct TrainingExample {
    pub input: AudioBuffer<Sample>,
    pub target: AudioBuffer<Sample>,
    pub source_class: SourceClass,
    pub separator_tag: String,
}

/// Artifact family emulated by the synthetic degradation generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DegradationKind {
    /// Band-limited noise added above a cutoff (waveform-separator-like).
    HfNoise,
    /// Sinc lowpass removing content above a cutoff
    /// (spectrogram-separator-like).
    Lowpass,
    /// Window convolution smoothing transients
    /// (spectrogram-separator-like).
    Smear,
}

impl fmt::Display for DegradationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            DegradationKind::HfNoise => "hfnoise",
            DegradationKind::Lowpass => "lowpass",
            DegradationKind::Smear => "smear",
        };
        f.write_str(name)
    }
}

impl FromStr for DegradationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hfnoise" => Ok(DegradationKind::HfNoise),
            "lowpass" => Ok(DegradationKind::Lowpass),
            "smear" => Ok(DegradationKind::Smear),
            other => Err(Error::Config(format!(
                "unknown degradation {other:?} (expected hfnoise, lowpass, or smear)"
            ))),
        }
    }
}

/// Parameters for one synthetic degradation. Deterministic given `seed`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DegradationSpec {
    pub kind: DegradationKind,
    /// hfnoise level relative to signal RMS, in dB (range [-60, 0]).
    pub noise_db: f64,
    /// hfnoise band start in Hz (range (0, 8000)).
    pub noise_cutoff_hz: f64,
    /// lowpass cutoff in Hz (range (0, 8000)).
    pub lowpass_cutoff_hz: f64,
    /// smear window width in milliseconds (range [1, 200]).
    pub smear_ms: f64,
    pub seed: u64,
}

impl DegradationSpec {
    pub fn new(kind: DegradationKind, seed: u64) -> Self {
        DegradationSpec {
            kind,
            noise_db: -20.0,
            noise_cutoff_hz: 3000.0,
            lowpass_cutoff_hz: 1000.0,
            smear_ms: 50.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let check = |name: &str, v: f64, lo: f64, hi: f64| {
            if v < lo || v > hi {
                Err(Error::Config(format!(
                    "{name} = {v} outside [{lo}, {hi}]"
                )))
            } else {
                Ok(())
            }
        };
        check("noise_db", self.noise_db, -60.0, 0.0)?;
        check("noise_cutoff_hz", self.noise_cutoff_hz, 1.0, 7999.0)?;
        check("lowpass_cutoff_hz", self.lowpass_cutoff_hz, 1.0, 7999.0)?;
        check("smear_ms", self.smear_ms, 1.0, 200.0)?;
        Ok(())
    }

    /// The instrument profile whose artifacts this degradation emulates:
    /// rolloff degradations pair with bass content, transient smearing with
    /// drums.
    pub fn source_class(&self) -> SourceClass {
        match self.kind {
            DegradationKind::HfNoise | DegradationKind::Lowpass => SourceClass::Bass,
            DegradationKind::Smear => SourceClass::Drums,
        }
    }
}

/// Dataset manifest: one entry per clip pair, with offsets, RMS, and
/// rejection reasons.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub sample_rate: u32,
    pub clip_len: usize,
    pub source_class: SourceClass,
    pub separator_tag: String,
    pub degradation: Option<DegradationSpec>,
    pub clips: Vec<ManifestClip>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestClip {
    /// Path to the ground-truth WAV, relative to the manifest.
    pub truth: String,
    /// Path to the degraded/estimated WAV, relative to the manifest.
    pub estimate: String,
    /// Sample offset within the source track (0 for synthetic clips).
    pub offset: usize,
    /// Ground-truth clip RMS in dBFS.
    pub rms_dbfs: f64,
    pub kept: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rejection: Option<String>,
}

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

impl Manifest {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Format(format!("manifest serialization: {e}")))?;
        std::fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Manifest> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    }

    /// Load all kept clips as training examples, peak-normalizing each
    /// buffer per clip. Paths resolve relative to the manifest location.
    pub fn load_examples(&self, manifest_path: impl AsRef<Path>) -> Result<Vec<TrainingExample>> {
        let base = manifest_path
            .as_ref()
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."));
        let mut examples = Vec::new();
        for clip in self.clips.iter().filter(|c| c.kept) {
            let truth = peak_normalize(&read_wav(base.join(&clip.truth))?);
            let estimate = peak_normalize(&read_wav(base.join(&clip.estimate))?);
            if truth.len() != estimate.len() {
                return Err(Error::Format(format!(
                    "{}: truth and estimate lengths differ ({} vs {})",
                    clip.truth,
                    truth.len(),
                    estimate.len()
                )));
            }
            examples.push(TrainingExample {
                input: estimate,
                target: truth,
                source_class: self.source_class,
                separator_tag: self.separator_tag.clone(),
            });
        }
        if examples.is_empty() {
            return Err(Error::Runtime("manifest contains no kept clips".into()));
        }
        Ok(examples)
    }
}
