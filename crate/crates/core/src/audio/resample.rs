//! Band-limited sample-rate conversion.
//!
//! Polyphase windowed-sinc interpolation: 64 taps under a Kaiser window
//! (beta = 8), one coefficient branch per output phase, each branch
//! normalized to unit DC gain. The cutoff sits slightly below the narrower
//! Nyquist so downsampling does not alias into the spectrogram band.

use super::{AudioClip, AudioError};
use crate::util::gcd;

const TAPS: usize = 64;
const HALF: isize = (TAPS / 2) as isize;
const KAISER_BETA: f64 = 8.0;
const ROLLOFF: f64 = 0.945;
/// Above this many phases the coefficient table would be larger than the
/// signal is worth; compute branches on the fly instead.
const MAX_TABLE_PHASES: u64 = 8192;

/// Zeroth-order modified Bessel function of the first kind (power series).
fn bessel_i0(x: f64) -> f64 {
    let q = x * x / 4.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut m = 1.0;
    loop {
        term *= q / (m * m);
        sum += term;
        if term < sum * 1e-17 {
            return sum;
        }
        m += 1.0;
    }
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = std::f64::consts::PI * x;
        px.sin() / px
    }
}

/// One polyphase branch: coefficients for an output sample that falls
/// `frac` input samples after input index `base`, normalized to sum 1.
fn branch(frac: f64, cutoff: f64, i0_beta: f64, out: &mut [f64; TAPS]) {
    let mut sum = 0.0;
    for (t, c) in out.iter_mut().enumerate() {
        let s = frac + (HALF - 1 - t as isize) as f64;
        let r = s / HALF as f64;
        let w = if r.abs() >= 1.0 {
            0.0
        } else {
            bessel_i0(KAISER_BETA * (1.0 - r * r).sqrt()) / i0_beta
        };
        *c = cutoff * sinc(cutoff * s) * w;
        sum += *c;
    }
    for c in out.iter_mut() {
        *c /= sum;
    }
}

fn dot(input: &[f32], base: isize, coeffs: &[f64; TAPS]) -> f32 {
    let start = base - (HALF - 1);
    let len = input.len() as isize;
    let mut acc = 0.0f64;
    if start >= 0 && start + TAPS as isize <= len {
        let window = &input[start as usize..start as usize + TAPS];
        for (x, c) in window.iter().zip(coeffs.iter()) {
            acc += *x as f64 * c;
        }
    } else {
        // Boundary: out-of-range input is zero.
        for (t, c) in coeffs.iter().enumerate() {
            let k = start + t as isize;
            if k >= 0 && k < len {
                acc += input[k as usize] as f64 * c;
            }
        }
    }
    acc as f32
}

/// Resample a mono clip to `target_rate`, preserving duration to within one
/// output sample. Equal rates pass the clip through unchanged.
pub fn resample(clip: &AudioClip, target_rate: u32) -> Result<AudioClip, AudioError> {
    if target_rate == 0 {
        return Err(AudioError::ZeroTargetRate);
    }
    if clip.rate == 0 {
        return Err(AudioError::ZeroRate);
    }
    if clip.channels != 1 {
        return Err(AudioError::NotMono(clip.channels));
    }
    if target_rate == clip.rate {
        return Ok(clip.clone());
    }

    let g = gcd(target_rate as u64, clip.rate as u64);
    let up = target_rate as u64 / g;
    let down = clip.rate as u64 / g;
    let frames = clip.samples.len() as u64;
    let out_len = ((frames * up + down / 2) / down) as usize;

    let cutoff = ROLLOFF * (up as f64 / down as f64).min(1.0);
    let i0_beta = bessel_i0(KAISER_BETA);

    let mut samples = Vec::with_capacity(out_len);
    if up <= MAX_TABLE_PHASES {
        let mut table = vec![[0.0f64; TAPS]; up as usize];
        for (p, row) in table.iter_mut().enumerate() {
            branch(p as f64 / up as f64, cutoff, i0_beta, row);
        }
        for j in 0..out_len as u64 {
            let num = j * down;
            let base = (num / up) as isize;
            let phase = (num % up) as usize;
            samples.push(dot(&clip.samples, base, &table[phase]));
        }
    } else {
        let mut coeffs = [0.0f64; TAPS];
        for j in 0..out_len as u64 {
            let num = j * down;
            let base = (num / up) as isize;
            let frac = (num % up) as f64 / up as f64;
            branch(frac, cutoff, i0_beta, &mut coeffs);
            samples.push(dot(&clip.samples, base, &coeffs));
        }
    }

    Ok(AudioClip::mono(samples, target_rate))
}
