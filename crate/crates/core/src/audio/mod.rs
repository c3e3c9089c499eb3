//! Raw audio handling: WAV decoding, mono mixdown, resampling, normalization.
//!
//! All operations are pure functions of their inputs; nothing here holds
//! shared mutable state.

mod resample;
mod wav;

pub use resample::resample;
pub use wav::{decode_wav, encode_wav_f32, encode_wav_pcm16, WavError};

use thiserror::Error;

/// Errors from sample-domain operations (everything past WAV parsing).
#[derive(Debug, Error)]
pub enum AudioError {
    #[error("target sample rate must be positive")]
    ZeroTargetRate,
    #[error("expected a mono clip, got {0} channels")]
    NotMono(u16),
    #[error("sample rate must be positive")]
    ZeroRate,
}

/// A decoded waveform. `samples` are interleaved when `channels > 1` and
/// hold amplitudes in [-1, 1] after decoding (and exactly peaking at 1 after
/// [`normalize`] for non-silent clips).
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub samples: Vec<f32>,
    /// Sample rate in Hz.
    pub rate: u32,
    /// Interleaved channel count; 1 after [`mixdown`].
    pub channels: u16,
}

impl AudioClip {
    pub fn mono(samples: Vec<f32>, rate: u32) -> Self {
        AudioClip { samples, rate, channels: 1 }
    }

    /// Number of sample frames (samples per channel).
    pub fn frames(&self) -> usize {
        if self.channels == 0 {
            0
        } else {
            self.samples.len() / self.channels as usize
        }
    }

    /// Duration in seconds.
    pub fn duration(&self) -> f64 {
        self.frames() as f64 / self.rate as f64
    }
}

/// Mix an interleaved multi-channel clip down to mono by averaging each
/// frame across channels. Mono input passes through unchanged.
pub fn mixdown(clip: &AudioClip) -> AudioClip {
    if clip.channels <= 1 {
        return clip.clone();
    }
    let n = clip.channels as usize;
    let samples = clip
        .samples
        .chunks_exact(n)
        .map(|frame| {
            let sum: f64 = frame.iter().map(|&s| s as f64).sum();
            (sum / n as f64) as f32
        })
        .collect();
    AudioClip { samples, rate: clip.rate, channels: 1 }
}

/// Scale a mono clip so its peak absolute amplitude is exactly 1. A silent
/// clip (all zeros) is returned unchanged so that near-silent recordings of
/// empty containers still flow through the pipeline.
pub fn normalize(clip: &AudioClip) -> AudioClip {
    let peak = clip.samples.iter().fold(0.0f32, |m, &s| m.max(s.abs()));
    if peak == 0.0 {
        return clip.clone();
    }
    let samples = clip.samples.iter().map(|&s| s / peak).collect();
    AudioClip { samples, rate: clip.rate, channels: clip.channels }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn mixdown_averages_frames() {
        let clip = AudioClip { samples: vec![0.4, 0.6, 1.0, -1.0], rate: 100, channels: 2 };
        let mono = mixdown(&clip);
        assert_eq!(mono.channels, 1);
        assert_eq!(mono.samples, vec![0.5, 0.0]);
        assert_eq!(mono.rate, 100);
    }

    #[test]
    fn mixdown_identical_channels_is_identity() {
        let frame = [0.25f32, -0.5, 0.125, 1.0];
        let mut interleaved = Vec::new();
        for &s in &frame {
            for _ in 0..8 {
                interleaved.push(s);
            }
        }
        let clip = AudioClip { samples: interleaved, rate: 44_100, channels: 8 };
        let mono = mixdown(&clip);
        assert_eq!(mono.samples, frame.to_vec());
    }

    #[test]
    fn mixdown_mono_passthrough() {
        let clip = AudioClip::mono(vec![0.1, 0.2], 22_050);
        assert_eq!(mixdown(&clip), clip);
    }

    #[test]
    fn normalize_scales_to_unit_peak() {
        let clip = AudioClip::mono(vec![0.1, -0.25, 0.2], 22_050);
        let out = normalize(&clip);
        assert_eq!(out.samples, vec![0.4, -1.0, 0.8]);
    }

    #[test]
    fn normalize_silent_clip_unchanged() {
        let clip = AudioClip::mono(vec![0.0; 16], 22_050);
        assert_eq!(normalize(&clip), clip);
    }

    #[test]
    fn normalize_already_normalized_unchanged() {
        let clip = AudioClip::mono(vec![0.5, -1.0, 0.75], 22_050);
        assert_eq!(normalize(&clip), clip);
    }

    proptest! {
        // normalize is idempotent: normalizing twice equals normalizing once.
        #[test]
        fn normalize_idempotent(samples in proptest::collection::vec(-4.0f32..4.0, 0..256)) {
            let clip = AudioClip::mono(samples, 22_050);
            let once = normalize(&clip);
            let twice = normalize(&once);
            prop_assert_eq!(once, twice);
        }

        // mixdown output never exceeds the per-frame channel extremes.
        #[test]
        fn mixdown_bounded(frames in proptest::collection::vec((-1.0f32..1.0, -1.0f32..1.0), 1..64)) {
            let mut interleaved = Vec::new();
            for &(a, b) in &frames {
                interleaved.push(a);
                interleaved.push(b);
            }
            let clip = AudioClip { samples: interleaved, rate: 48_000, channels: 2 };
            let mono = mixdown(&clip);
            for (out, &(a, b)) in mono.samples.iter().zip(&frames) {
                prop_assert!(*out <= a.max(b) + 1e-6);
                prop_assert!(*out >= a.min(b) - 1e-6);
            }
        }
    }
}
