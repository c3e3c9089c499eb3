//! Short-time Fourier transform plumbing.
//!
//! Frames are centered: frame `i` covers samples `[i*hop - fft/2, i*hop + fft/2)`
//! with zero padding outside the clip. The FFT plan for the configured size
//! is cached globally; rustfft plans are safe for concurrent readers.

use rustfft::{num_complex::Complex, Fft, FftPlanner};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

fn plan(n: usize) -> Arc<dyn Fft<f64>> {
    static PLANS: OnceLock<Mutex<HashMap<usize, Arc<dyn Fft<f64>>>>> = OnceLock::new();
    let plans = PLANS.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = plans.lock().unwrap();
    guard
        .entry(n)
        .or_insert_with(|| FftPlanner::new().plan_fft_forward(n))
        .clone()
}

/// Periodic Hann window.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
        .collect()
}

/// Power spectra (|X|^2, `fft_size/2 + 1` bins) of `n_frames` centered,
/// Hann-windowed, zero-padded frames.
pub fn power_frames(samples: &[f32], fft_size: usize, hop: usize, n_frames: usize) -> Vec<Vec<f64>> {
    let window = hann(fft_size);
    let fft = plan(fft_size);
    let half = (fft_size / 2) as isize;
    let len = samples.len() as isize;
    let bins = fft_size / 2 + 1;

    let mut buf = vec![Complex::new(0.0f64, 0.0); fft_size];
    let mut scratch = vec![Complex::new(0.0f64, 0.0); fft.get_inplace_scratch_len()];
    let mut out = Vec::with_capacity(n_frames);
    for i in 0..n_frames {
        let center = (i * hop) as isize;
        let start = center - half;
        for (j, (slot, w)) in buf.iter_mut().zip(window.iter()).enumerate() {
            let k = start + j as isize;
            let x = if k >= 0 && k < len { samples[k as usize] as f64 } else { 0.0 };
            *slot = Complex::new(x * w, 0.0);
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        out.push(buf[..bins].iter().map(|c| c.re * c.re + c.im * c.im).collect());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hann_endpoints_and_symmetry() {
        let w = hann(8);
        assert!(w[0].abs() < 1e-12);
        assert!((w[4] - 1.0).abs() < 1e-12);
        for i in 1..8 {
            assert!((w[i] - w[8 - i]).abs() < 1e-12);
        }
    }

    #[test]
    fn sine_energy_lands_in_its_bin() {
        let fft_size = 256;
        let rate = 1024.0;
        // bin-center frequency: bin 32 = 128 Hz at 1024 Hz / 256 points
        let freq = 32.0 * rate / fft_size as f64;
        let samples: Vec<f32> = (0..2048)
            .map(|i| (2.0 * std::f64::consts::PI * freq * i as f64 / rate).sin() as f32)
            .collect();
        let frames = power_frames(&samples, fft_size, 64, 16);
        // interior frame: window fully inside the signal
        let frame = &frames[8];
        let peak = frame
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(peak, 32);
    }

    #[test]
    fn zero_signal_zero_power() {
        let frames = power_frames(&[0.0; 4096], 2048, 512, 8);
        assert_eq!(frames.len(), 8);
        assert!(frames.iter().flatten().all(|&p| p == 0.0));
    }
}
