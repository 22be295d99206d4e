//! RIFF/WAVE reader and writer for PCM16 and IEEE float32.
//!
//! Reads mono or stereo (stereo is averaged to mono); writes mono. PCM16
//! samples map to [-1, 1) by division by 32768, so -32768 reads as exactly
//! -1.0. Float32 round-trips bit-exactly.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use crate::dsp::AudioBuffer;
use crate::error::{Error, Result};
use crate::Sample;

/// Sample encoding for [`write_wav`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WavFormat {
    Pcm16,
    Float32,
}

const FORMAT_PCM: u16 = 1;
const FORMAT_IEEE_FLOAT: u16 = 3;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

/// Read a RIFF/WAVE file. PCM16 or float32, mono or stereo; stereo channels
/// are averaged to mono.
pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioBuffer<Sample>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_wav(&bytes).map_err(|msg| Error::Format(format!("{}: {msg}", path.display())))
}

fn parse_wav(bytes: &[u8]) -> std::result::Result<AudioBuffer<Sample>, String> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err("not a RIFF/WAVE file (missing RIFF/WAVE magic)".into());
    }

    let mut fmt: Option<(u16, u16, u32, u16)> = None; // (format, channels, rate, bits)
    let mut data: Option<&[u8]> = None;
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32::from_le_bytes(bytes[pos + 4..pos + 8].try_into().unwrap()) as usize;
        let body_start = pos + 8;
        let body_end = body_start + size;
        if body_end > bytes.len() {
            return Err(format!(
                "chunk {:?} claims {size} bytes but only {} remain",
                String::from_utf8_lossy(id),
                bytes.len() - body_start
            ));
        }
        let body = &bytes[body_start..body_end];
        match id {
            b"fmt " => {
                if size < 16 {
                    return Err(format!("fmt chunk too small: {size} bytes"));
                }
                let mut format = u16::from_le_bytes(body[0..2].try_into().unwrap());
                let channels = u16::from_le_bytes(body[2..4].try_into().unwrap());
                let rate = u32::from_le_bytes(body[4..8].try_into().unwrap());
                let bits = u16::from_le_bytes(body[14..16].try_into().unwrap());
                if format == FORMAT_EXTENSIBLE {
                    // Sub-format GUID starts with the ordinary format code.
                    if size < 26 {
                        return Err("extensible fmt chunk missing sub-format".into());
                    }
                    format = u16::from_le_bytes(body[24..26].try_into().unwrap());
                }
                fmt = Some((format, channels, rate, bits));
            }
            b"data" => data = Some(body),
            _ => {}
        }
        // Chunks are word-aligned; odd sizes carry a pad byte.
        pos = body_end + (size & 1);
    }

    let (format, channels, rate, bits) = fmt.ok_or("missing fmt chunk")?;
    let data = data.ok_or("missing data chunk")?;
    if rate == 0 {
        return Err("sample rate is zero".into());
    }
    if channels == 0 || channels > 2 {
        return Err(format!(
            "unsupported channel count {channels} (mono or stereo only)"
        ));
    }

    let interleaved: Vec<Sample> = match (format, bits) {
        (FORMAT_PCM, 16) => data
            .chunks_exact(2)
            .map(|c| i16::from_le_bytes(c.try_into().unwrap()) as Sample / 32768.0)
            .collect(),
        (FORMAT_IEEE_FLOAT, 32) => data
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as Sample)
            .collect(),
        _ => {
            return Err(format!(
                "unsupported codec: format {format}, {bits} bits (PCM16 or float32 only)"
            ))
        }
    };

    let samples = if channels == 2 {
        interleaved
            .chunks_exact(2)
            .map(|lr| (lr[0] + lr[1]) / 2.0)
            .collect()
    } else {
        interleaved
    };

    Ok(AudioBuffer::new(samples, rate))
}

/// Write a mono RIFF/WAVE file. Float32 writes are bit-exact round trips;
/// PCM16 scales by 32768 and saturates.
pub fn write_wav(
    path: impl AsRef<Path>,
    audio: &AudioBuffer<Sample>,
    format: WavFormat,
) -> Result<()> {
    let path = path.as_ref();
    let samples = audio.samples();
    let rate = audio.sample_rate();

    let (format_code, bits, payload): (u16, u16, Vec<u8>) = match format {
        WavFormat::Pcm16 => {
            let mut payload = Vec::with_capacity(samples.len() * 2);
            for &s in samples {
                let v = (s * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
                payload.extend_from_slice(&v.to_le_bytes());
            }
            (FORMAT_PCM, 16, payload)
        }
        WavFormat::Float32 => {
            let mut payload = Vec::with_capacity(samples.len() * 4);
            for &s in samples {
                payload.extend_from_slice(&(s as f32).to_le_bytes());
            }
            (FORMAT_IEEE_FLOAT, 32, payload)
        }
    };

    let block_align = bits / 8;
    let byte_rate = rate * block_align as u32;
    let fact = matches!(format, WavFormat::Float32);
    let fact_len = if fact { 12 } else { 0 };
    let riff_size = 4 + (8 + 16) + fact_len + 8 + payload.len();

    let mut out = Vec::with_capacity(riff_size + 8);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(riff_size as u32).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&format_code.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes()); // mono
    out.extend_from_slice(&rate.to_le_bytes());
    out.extend_from_slice(&byte_rate.to_le_bytes());
    out.extend_from_slice(&(block_align).to_le_bytes());
    out.extend_from_slice(&bits.to_le_bytes());
    if fact {
        out.extend_from_slice(b"fact");
        out.extend_from_slice(&4u32.to_le_bytes());
        out.extend_from_slice(&(samples.len() as u32).to_le_bytes());
    }
    out.extend_from_slice(b"data");
    out.extend_from_slice(&(payload.len() as u32).to_le_bytes());
    out.extend_from_slice(&payload);

    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&out).map_err(|e| Error::io(path, e))?;
    Ok(())
}
