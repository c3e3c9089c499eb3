//! Mel filterbank (Slaney scale: linear below 1 kHz, logarithmic above),
//! stored sparsely as per-band (first bin, weights) pairs.

const F_SP: f64 = 200.0 / 3.0;
const MIN_LOG_HZ: f64 = 1000.0;
const MIN_LOG_MEL: f64 = MIN_LOG_HZ / F_SP;

fn logstep() -> f64 {
    (6.4f64).ln() / 27.0
}

pub fn hz_to_mel(hz: f64) -> f64 {
    if hz >= MIN_LOG_HZ {
        MIN_LOG_MEL + (hz / MIN_LOG_HZ).ln() / logstep()
    } else {
        hz / F_SP
    }
}

pub fn mel_to_hz(mel: f64) -> f64 {
    if mel >= MIN_LOG_MEL {
        MIN_LOG_HZ * (logstep() * (mel - MIN_LOG_MEL)).exp()
    } else {
        mel * F_SP
    }
}

/// One triangular band over FFT bins `first_bin..first_bin + weights.len()`.
pub struct MelBand {
    pub first_bin: usize,
    pub weights: Vec<f64>,
}

/// Triangular filterbank over `n_fft/2 + 1` linear bins, area-normalized so
/// each triangle integrates to roughly constant energy per band.
pub fn filterbank(n_bands: usize, n_fft: usize, rate: u32) -> Vec<MelBand> {
    let n_bins = n_fft / 2 + 1;
    let fmax = rate as f64 / 2.0;
    let mel_max = hz_to_mel(fmax);
    let band_edges: Vec<f64> = (0..n_bands + 2)
        .map(|i| mel_to_hz(mel_max * i as f64 / (n_bands + 1) as f64))
        .collect();
    let bin_hz = rate as f64 / n_fft as f64;

    let mut bank = Vec::with_capacity(n_bands);
    for b in 0..n_bands {
        let (lo, mid, hi) = (band_edges[b], band_edges[b + 1], band_edges[b + 2]);
        let norm = 2.0 / (hi - lo);
        let mut first_bin = None;
        let mut weights = Vec::new();
        for bin in 0..n_bins {
            let f = bin as f64 * bin_hz;
            let w = if f <= lo || f >= hi {
                0.0
            } else if f <= mid {
                (f - lo) / (mid - lo)
            } else {
                (hi - f) / (hi - mid)
            };
            if w > 0.0 {
                if first_bin.is_none() {
                    first_bin = Some(bin);
                }
                weights.push(w * norm);
            } else if first_bin.is_some() {
                break;
            }
        }
        bank.push(MelBand { first_bin: first_bin.unwrap_or(0), weights });
    }
    bank
}

/// Project a linear power spectrum onto the filterbank.
pub fn apply(bank: &[MelBand], power: &[f64], out: &mut [f64]) {
    for (band, slot) in bank.iter().zip(out.iter_mut()) {
        let mut acc = 0.0;
        for (w, p) in band.weights.iter().zip(&power[band.first_bin..]) {
            acc += w * p;
        }
        *slot = acc;
    }
}
