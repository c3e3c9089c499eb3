//! The spectrogram front-end: onset detection, window extraction, and the
//! N x N log-magnitude spectrogram the classifiers consume.
//!
//! The chain for one clip is
//! `mixdown -> resample(22,050 Hz) -> normalize -> onset -> window(L) ->
//! log_spectrogram -> resize(N)`; [`featurize`] runs all of it. Every step
//! is a pure function, so identical clip bytes give bit-identical
//! spectrograms regardless of run or thread count.

pub mod cache;
mod mel;
mod stft;

use crate::audio::{self, AudioClip};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DspError {
    #[error("clip of {len} samples is shorter than one analysis frame ({fft_size})")]
    ClipTooShort { len: usize, fft_size: usize },
    #[error("window of {len} samples is shorter than the FFT size ({fft_size})")]
    WindowTooShort { len: usize, fft_size: usize },
    #[error("expected a mono clip, got {0} channels")]
    NotMono(u16),
    #[error("resize target {0} is too small (need at least 2)")]
    ResizeTooSmall(usize),
    #[error("resize input {rows}x{cols} is too small (need at least 2x2)")]
    ResizeInputTooSmall { rows: usize, cols: usize },
}

/// Peak-picking parameters for onset detection.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OnsetConfig {
    /// Peaks must exceed mean + threshold_k * std of the envelope.
    pub threshold_k: f64,
    /// Minimum time between reported peaks, in seconds.
    pub min_separation: f64,
}

impl Default for OnsetConfig {
    fn default() -> Self {
        OnsetConfig { threshold_k: 1.0, min_separation: 0.3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpectrogramScale {
    /// Linear frequency axis (FFT bins).
    Linear,
    /// Mel frequency axis.
    Mel,
}

/// Front-end parameters. Defaults: 22,050 Hz pipeline rate, L = 10 s
/// windows, FFT 2048 / hop 512 with a Hann window (about 431 frames and
/// 1025 bins for a 10 s window), resized to 96 x 96.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DspConfig {
    pub sample_rate: u32,
    /// Window length L in seconds, cut from the detected onset.
    pub window_secs: f64,
    /// Model input side N.
    pub resize_to: usize,
    pub fft_size: usize,
    pub hop: usize,
    pub scale: SpectrogramScale,
    /// Bands for the mel scale (also used by the onset detector).
    pub mel_bands: usize,
    /// Spectrogram floor in dB relative to the matrix maximum.
    pub db_floor: f32,
    pub onset: OnsetConfig,
}

impl Default for DspConfig {
    fn default() -> Self {
        DspConfig {
            sample_rate: 22_050,
            window_secs: 10.0,
            resize_to: 96,
            fft_size: 2048,
            hop: 512,
            scale: SpectrogramScale::Linear,
            mel_bands: 128,
            db_floor: -80.0,
            onset: OnsetConfig::default(),
        }
    }
}

/// Spectral-flux onset strength, one value per hop.
#[derive(Debug, Clone, PartialEq)]
pub struct OnsetEnvelope {
    pub values: Vec<f32>,
    /// Samples per envelope frame.
    pub hop: usize,
    /// Sample rate of the underlying clip.
    pub rate: u32,
}

/// A rows x cols matrix of log magnitudes in dB (row = frequency bin,
/// column = time frame), stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f32>,
}

impl Spectrogram {
    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.data[row * self.cols + col]
    }

    pub fn min_max(&self) -> (f32, f32) {
        self.data
            .iter()
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }
}

/// Spectral-flux onset envelope: per frame, the sum of positive differences
/// of log-mel magnitudes against the previous frame. The envelope has
/// `ceil(len / hop)` frames; frame 0 has strength 0 by definition.
pub fn onset_strength(clip: &AudioClip, cfg: &DspConfig) -> Result<OnsetEnvelope, DspError> {
    if clip.channels != 1 {
        return Err(DspError::NotMono(clip.channels));
    }
    let len = clip.samples.len();
    if len < cfg.fft_size {
        return Err(DspError::ClipTooShort { len, fft_size: cfg.fft_size });
    }
    let n_frames = len.div_ceil(cfg.hop);
    let power = stft::power_frames(&clip.samples, cfg.fft_size, cfg.hop, n_frames);
    let bank = mel::filterbank(cfg.mel_bands, cfg.fft_size, clip.rate);

    // log-mel frames, dB relative to the clip maximum with the same -80 dB
    // floor as the spectrogram (an absolute log would let numerically
    // irrelevant leakage at -200 dB dominate the flux)
    let mut bands = vec![0.0f64; cfg.mel_bands * n_frames];
    for (i, frame) in power.iter().enumerate() {
        mel::apply(&bank, frame, &mut bands[i * cfg.mel_bands..(i + 1) * cfg.mel_bands]);
    }
    let max = bands.iter().fold(0.0f64, |m, &p| m.max(p)).max(1e-300);
    let floor = cfg.db_floor as f64;
    for v in bands.iter_mut() {
        *v = (10.0 * (*v / max).log10()).max(floor);
    }

    let mut values = Vec::with_capacity(n_frames);
    values.push(0.0);
    for i in 1..n_frames {
        let prev = &bands[(i - 1) * cfg.mel_bands..i * cfg.mel_bands];
        let curr = &bands[i * cfg.mel_bands..(i + 1) * cfg.mel_bands];
        let flux: f64 = curr.iter().zip(prev).map(|(c, p)| (c - p).max(0.0)).sum();
        values.push(flux as f32);
    }
    Ok(OnsetEnvelope { values, hop: cfg.hop, rate: clip.rate })
}

/// All qualifying onset peaks, in seconds: local maxima above
/// mean + k * std, at least `min_separation` apart.
pub fn detect_onsets(env: &OnsetEnvelope, cfg: &OnsetConfig) -> Vec<f64> {
    let v = &env.values;
    if v.is_empty() {
        return Vec::new();
    }
    let n = v.len() as f64;
    let mean = v.iter().map(|&x| x as f64).sum::<f64>() / n;
    let var = v.iter().map(|&x| (x as f64 - mean).powi(2)).sum::<f64>() / n;
    let threshold = mean + cfg.threshold_k * var.sqrt();
    let min_sep = (cfg.min_separation * env.rate as f64 / env.hop as f64).round() as usize;

    let mut peaks = Vec::new();
    let mut last: Option<usize> = None;
    for i in 0..v.len() {
        let left = if i == 0 { f32::NEG_INFINITY } else { v[i - 1] };
        let right = if i + 1 == v.len() { f32::NEG_INFINITY } else { v[i + 1] };
        let is_peak = v[i] > left && v[i] >= right && (v[i] as f64) > threshold;
        let separated = last.map_or(true, |p| i - p >= min_sep.max(1));
        if is_peak && separated {
            peaks.push(i as f64 * env.hop as f64 / env.rate as f64);
            last = Some(i);
        }
    }
    peaks
}

/// Time of the first qualifying onset peak, or 0.0 when nothing exceeds the
/// threshold (the analysis window then starts at the beginning of the clip).
pub fn detect_first_onset(env: &OnsetEnvelope, cfg: &OnsetConfig) -> f64 {
    detect_onsets(env, cfg).first().copied().unwrap_or(0.0)
}

/// Cut exactly `round(window_secs * rate)` samples starting at `onset`
/// seconds. A shortfall is zero-padded; content past the window is dropped.
pub fn extract_window(clip: &AudioClip, onset: f64, window_secs: f64) -> AudioClip {
    let rate = clip.rate;
    let out_len = (window_secs * rate as f64).round() as usize;
    let start = (onset.max(0.0) * rate as f64).round() as usize;
    let mut samples = vec![0.0f32; out_len];
    if start < clip.samples.len() {
        let available = &clip.samples[start..];
        let n = available.len().min(out_len);
        samples[..n].copy_from_slice(&available[..n]);
    }
    AudioClip::mono(samples, rate)
}

/// Log-magnitude spectrogram of a fixed-length window: STFT power with a
/// Hann window, in dB relative to the matrix maximum, floored at
/// `cfg.db_floor`. An all-zero window maps to a constant floor plane.
pub fn log_spectrogram(window: &AudioClip, cfg: &DspConfig) -> Result<Spectrogram, DspError> {
    if window.channels != 1 {
        return Err(DspError::NotMono(window.channels));
    }
    let len = window.samples.len();
    if len < cfg.fft_size {
        return Err(DspError::WindowTooShort { len, fft_size: cfg.fft_size });
    }
    let cols = 1 + len / cfg.hop;
    let power = stft::power_frames(&window.samples, cfg.fft_size, cfg.hop, cols);

    let band_frames: Vec<Vec<f64>> = match cfg.scale {
        SpectrogramScale::Linear => power,
        SpectrogramScale::Mel => {
            let bank = mel::filterbank(cfg.mel_bands, cfg.fft_size, window.rate);
            power
                .iter()
                .map(|frame| {
                    let mut out = vec![0.0f64; cfg.mel_bands];
                    mel::apply(&bank, frame, &mut out);
                    out
                })
                .collect()
        }
    };

    let rows = band_frames[0].len();
    let max = band_frames.iter().flatten().fold(0.0f64, |m, &p| m.max(p));
    let floor = cfg.db_floor;
    let mut data = vec![floor; rows * cols];
    if max > 0.0 {
        for (col, frame) in band_frames.iter().enumerate() {
            for (row, &p) in frame.iter().enumerate() {
                let db = (10.0 * (p / max).log10()) as f32;
                data[row * cols + col] = db.max(floor);
            }
        }
    }
    Ok(Spectrogram { rows, cols, data })
}

/// Bilinear resize to n x n with corner-anchored sampling. Output values are
/// convex combinations of the input, so min/max bounds are preserved.
pub fn resize(spec: &Spectrogram, n: usize) -> Result<Spectrogram, DspError> {
    if n < 2 {
        return Err(DspError::ResizeTooSmall(n));
    }
    if spec.rows < 2 || spec.cols < 2 {
        return Err(DspError::ResizeInputTooSmall { rows: spec.rows, cols: spec.cols });
    }
    let row_step = (spec.rows - 1) as f64 / (n - 1) as f64;
    let col_step = (spec.cols - 1) as f64 / (n - 1) as f64;
    let mut data = Vec::with_capacity(n * n);
    for r in 0..n {
        let fy = r as f64 * row_step;
        let y0 = fy as usize;
        let y1 = (y0 + 1).min(spec.rows - 1);
        let ty = fy - y0 as f64;
        for c in 0..n {
            let fx = c as f64 * col_step;
            let x0 = fx as usize;
            let x1 = (x0 + 1).min(spec.cols - 1);
            let tx = fx - x0 as f64;

            let v00 = spec.get(y0, x0) as f64;
            let v01 = spec.get(y0, x1) as f64;
            let v10 = spec.get(y1, x0) as f64;
            let v11 = spec.get(y1, x1) as f64;
            let top = v00 + tx * (v01 - v00);
            let bottom = v10 + tx * (v11 - v10);
            let v = top + ty * (bottom - top);
            // guard against 1-ulp overshoot of the cell bounds
            let lo = v00.min(v01).min(v10).min(v11);
            let hi = v00.max(v01).max(v10).max(v11);
            data.push(v.clamp(lo, hi) as f32);
        }
    }
    Ok(Spectrogram { rows: n, cols: n, data })
}

/// The full front-end for one raw clip: mixdown, resample to the pipeline
/// rate, normalize, locate the onset, cut the L-second window, and produce
/// the resized N x N spectrogram.
pub fn featurize(clip: &AudioClip, cfg: &DspConfig) -> crate::Result<Spectrogram> {
    let mono = audio::mixdown(clip);
    let resampled = audio::resample(&mono, cfg.sample_rate)?;
    let normalized = audio::normalize(&resampled);
    let env = onset_strength(&normalized, cfg)?;
    let onset = detect_first_onset(&env, &cfg.onset);
    let window = extract_window(&normalized, onset, cfg.window_secs);
    let spec = log_spectrogram(&window, cfg)?;
    Ok(resize(&spec, cfg.resize_to)?)
}
