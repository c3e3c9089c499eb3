//! Minimal RIFF/WAVE reader and writer.
//!
//! Reads PCM 16-bit and IEEE float 32-bit payloads with any channel count
//! and sample rate, including WAVE_FORMAT_EXTENSIBLE wrappers around either.
//! Unknown chunks are skipped. Everything is little-endian per RIFF.

use super::AudioClip;
use thiserror::Error;

const FORMAT_PCM: u16 = 1;
const FORMAT_IEEE_FLOAT: u16 = 3;
const FORMAT_EXTENSIBLE: u16 = 0xFFFE;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WavError {
    /// A required chunk is missing, truncated, or inconsistent.
    #[error("malformed WAV: bad '{chunk}' chunk: {detail}")]
    Malformed { chunk: &'static str, detail: String },
    /// The encoding is valid RIFF but not one we decode.
    #[error("unsupported WAV encoding: format code {format}, {bits} bits per sample")]
    UnsupportedFormat { format: u16, bits: u16 },
}

fn malformed(chunk: &'static str, detail: impl Into<String>) -> WavError {
    WavError::Malformed { chunk, detail: detail.into() }
}

fn read_u16(bytes: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([bytes[at], bytes[at + 1]])
}

fn read_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([bytes[at], bytes[at + 1], bytes[at + 2], bytes[at + 3]])
}

struct Format {
    code: u16,
    channels: u16,
    rate: u32,
    bits: u16,
}

fn parse_fmt(body: &[u8]) -> Result<Format, WavError> {
    if body.len() < 16 {
        return Err(malformed("fmt ", format!("chunk body is {} bytes, need 16", body.len())));
    }
    let mut code = read_u16(body, 0);
    let channels = read_u16(body, 2);
    let rate = read_u32(body, 4);
    let bits = read_u16(body, 14);
    if code == FORMAT_EXTENSIBLE {
        // The real format code is the first two bytes of the SubFormat GUID.
        if body.len() < 40 {
            return Err(malformed("fmt ", "extensible header shorter than 40 bytes"));
        }
        code = read_u16(body, 24);
    }
    if channels == 0 {
        return Err(malformed("fmt ", "zero channels"));
    }
    if rate == 0 {
        return Err(malformed("fmt ", "zero sample rate"));
    }
    Ok(Format { code, channels, rate, bits })
}

/// Decode a RIFF/WAVE byte stream into an [`AudioClip`].
///
/// PCM16 samples are mapped to [-1, 1) by full-scale division (value /
/// 32768); float32 samples are taken verbatim.
pub fn decode_wav(bytes: &[u8]) -> Result<AudioClip, WavError> {
    if bytes.len() < 12 {
        return Err(malformed("RIFF", format!("file is {} bytes, need at least 12", bytes.len())));
    }
    if &bytes[0..4] != b"RIFF" {
        return Err(malformed("RIFF", "missing RIFF tag"));
    }
    if &bytes[8..12] != b"WAVE" {
        return Err(malformed("WAVE", "missing WAVE tag"));
    }

    let mut fmt: Option<Format> = None;
    let mut data: Option<&[u8]> = None;
    let mut pos = 12;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = read_u32(bytes, pos + 4) as usize;
        let body_start = pos + 8;
        let body_end = body_start + size;
        if body_end > bytes.len() {
            let chunk: &'static str = match id {
                b"fmt " => "fmt ",
                b"data" => "data",
                _ => "RIFF",
            };
            return Err(malformed(chunk, format!("chunk size {size} overruns file")));
        }
        match id {
            b"fmt " => fmt = Some(parse_fmt(&bytes[body_start..body_end])?),
            b"data" => data = Some(&bytes[body_start..body_end]),
            _ => {} // fact, LIST, cue, bext, ... all skipped
        }
        // Chunk bodies are padded to even length.
        pos = body_end + (size & 1);
    }

    let fmt = fmt.ok_or_else(|| malformed("fmt ", "chunk not found"))?;
    let data = data.ok_or_else(|| malformed("data", "chunk not found"))?;

    let samples = match (fmt.code, fmt.bits) {
        (FORMAT_PCM, 16) => {
            if data.len() % 2 != 0 {
                return Err(malformed("data", "PCM16 payload has odd byte length"));
            }
            data.chunks_exact(2)
                .map(|b| i16::from_le_bytes([b[0], b[1]]) as f32 / 32768.0)
                .collect::<Vec<f32>>()
        }
        (FORMAT_IEEE_FLOAT, 32) => {
            if data.len() % 4 != 0 {
                return Err(malformed("data", "float32 payload length not a multiple of 4"));
            }
            data.chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
                .collect::<Vec<f32>>()
        }
        (code, bits) => return Err(WavError::UnsupportedFormat { format: code, bits }),
    };

    if samples.len() % fmt.channels as usize != 0 {
        return Err(malformed("data", "payload does not hold a whole number of frames"));
    }

    Ok(AudioClip { samples, rate: fmt.rate, channels: fmt.channels })
}

fn header(format: u16, bits: u16, clip: &AudioClip, data_len: u32, with_fact: bool) -> Vec<u8> {
    let fact_len = if with_fact { 12 } else { 0 };
    let riff_len = 4 + (8 + 16) + fact_len + (8 + data_len);
    let block_align = clip.channels as u32 * (bits as u32 / 8);
    let byte_rate = clip.rate * block_align;

    let mut out = Vec::with_capacity(44 + fact_len as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&riff_len.to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&format.to_le_bytes());
    out.extend_from_slice(&clip.channels.to_le_bytes());
    out.extend_from_slice(&clip.rate.to_le_bytes());
    out.extend_from_slice(&byte_rate.to_le_bytes());
    out.extend_from_slice(&(block_align as u16).to_le_bytes());
    out.extend_from_slice(&bits.to_le_bytes());
    if with_fact {
        out.extend_from_slice(b"fact");
        out.extend_from_slice(&4u32.to_le_bytes());
        out.extend_from_slice(&(clip.frames() as u32).to_le_bytes());
    }
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    out
}

/// Encode a clip as an IEEE float-32 WAV. Lossless round trip through
/// [`decode_wav`].
pub fn encode_wav_f32(clip: &AudioClip) -> Vec<u8> {
    let data_len = (clip.samples.len() * 4) as u32;
    let mut out = header(FORMAT_IEEE_FLOAT, 32, clip, data_len, true);
    for &s in &clip.samples {
        out.extend_from_slice(&s.to_le_bytes());
    }
    out
}

/// Encode a clip as 16-bit PCM. Samples are clamped to [-1, 1] and scaled by
/// 32767 so that the quantization is symmetric.
pub fn encode_wav_pcm16(clip: &AudioClip) -> Vec<u8> {
    let data_len = (clip.samples.len() * 2) as u32;
    let mut out = header(FORMAT_PCM, 16, clip, data_len, false);
    for &s in &clip.samples {
        let v = (s.clamp(-1.0, 1.0) * 32767.0).round() as i16;
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}
