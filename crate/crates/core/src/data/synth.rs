//! Seeded synthetic recordings with separable class-conditional acoustics.
//!
//! The generator caricatures the physics rather than simulating it: each
//! content class owns a distinct frequency band, levels shift the band and
//! the event density, pouring sounds are sustained (grain streams or a
//! rising noisy tone for water), shaking sounds are rhythmic burst trains,
//! and empty/unknown clips are a near-silent noise floor. That makes the
//! corpus separable by construction, which is exactly what the end-to-end
//! verification needs — the point is pipeline correctness, not realism.
//!
//! Everything derives from the recipe seed: the same recipe yields a
//! bit-identical clip.

use super::{ActionLabel, ManifestItem, Split};
use crate::audio::AudioClip;
use crate::pipeline::ClassTaxonomy;
use crate::util::derive_seed;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::path::PathBuf;

/// All synthetic audio is generated at the pipeline rate.
pub const SYNTH_RATE: u32 = 22_050;

const NOISE_FLOOR: f32 = 0.002;

/// What to synthesize: a content class (index into the taxonomy), the
/// manipulation, a clip duration in seconds, and the seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthRecipe {
    pub content: usize,
    pub action: ActionLabel,
    pub duration: f64,
    pub seed: u64,
}

struct GrainParams {
    center_hz: f64,
    decay: f64,
    pour_density: f64,
    burst_rate: f64,
    burst_density: f64,
}

/// Per-class acoustics. Indices follow the default taxonomy order.
fn grain_params(content: usize) -> Option<GrainParams> {
    match content {
        1 => Some(GrainParams { center_hz: 1150.0, decay: 0.005, pour_density: 40.0, burst_rate: 2.6, burst_density: 320.0 }),
        2 => Some(GrainParams { center_hz: 1750.0, decay: 0.004, pour_density: 100.0, burst_rate: 4.0, burst_density: 520.0 }),
        3 => Some(GrainParams { center_hz: 2700.0, decay: 0.002, pour_density: 220.0, burst_rate: 3.1, burst_density: 750.0 }),
        4 => Some(GrainParams { center_hz: 3700.0, decay: 0.0016, pour_density: 450.0, burst_rate: 4.7, burst_density: 1100.0 }),
        _ => None,
    }
}

/// Water sweep range (start, end) in Hz.
fn water_sweep(content: usize) -> Option<(f64, f64)> {
    match content {
        5 => Some((260.0, 560.0)),
        6 => Some((550.0, 1150.0)),
        _ => None,
    }
}

fn add_click(x: &mut [f32], at: usize, freq: f64, tau: f64, amp: f64, phase: f64) {
    let rate = SYNTH_RATE as f64;
    let len = (6.0 * tau * rate).ceil() as usize;
    for i in 0..len {
        let Some(s) = x.get_mut(at + i) else { break };
        let t = i as f64 / rate;
        *s += (amp * (-t / tau).exp() * (2.0 * PI * freq * t + phase).sin()) as f32;
    }
}

/// Poisson-spaced grain clicks over [start, end).
fn grain_stream(
    x: &mut [f32],
    start: usize,
    end: usize,
    density: f64,
    center_hz: f64,
    tau: f64,
    rng: &mut ChaCha8Rng,
) {
    let rate = SYNTH_RATE as f64;
    let mut t = start as f64;
    loop {
        t += -rng.gen::<f64>().max(1e-12).ln() / density * rate;
        if t >= end as f64 {
            break;
        }
        let freq = center_hz * rng.gen_range(0.94..1.06);
        let amp = rng.gen_range(0.22..0.65);
        let phase = rng.gen_range(0.0..2.0 * PI);
        add_click(x, t as usize, freq, tau, amp, phase);
    }
}

fn water_stream(
    x: &mut [f32],
    start: usize,
    end: usize,
    f_lo: f64,
    f_hi: f64,
    rng: &mut ChaCha8Rng,
) {
    let rate = SYNTH_RATE as f64;
    let span = (end - start).max(1) as f64;
    let mut phase = rng.gen_range(0.0..2.0 * PI);
    let mut phase2 = rng.gen_range(0.0..2.0 * PI);
    let mut lp = 0.0f64; // slow amplitude turbulence
    for i in start..end {
        let progress = (i - start) as f64 / span;
        let f = f_lo + (f_hi - f_lo) * progress;
        let wobble = 1.0 + 0.03 * (2.0 * PI * 3.0 * i as f64 / rate).sin();
        phase += 2.0 * PI * f * wobble / rate;
        phase2 += 2.0 * PI * f * 1.17 / rate;
        lp = 0.995 * lp + 0.005 * rng.gen_range(-1.0..1.0);
        let ramp = (progress * 25.0).min(1.0) * ((1.0 - progress) * 25.0).min(1.0);
        let env = (0.28 + 1.6 * lp.abs()) * ramp;
        x[i] += (env * (0.8 * phase.sin() + 0.35 * phase2.sin())) as f32;
    }
    // sparse bubble clicks above the sweep for texture
    let mut t = start as f64;
    loop {
        t += -rng.gen::<f64>().max(1e-12).ln() / 9.0 * rate;
        if t >= end as f64 {
            break;
        }
        let freq = (f_lo + f_hi) * rng.gen_range(0.9..1.3);
        add_click(x, t as usize, freq, 0.004, rng.gen_range(0.08..0.22), rng.gen_range(0.0..2.0 * PI));
    }
}

/// Rhythmic shaking: bursts of grains at the class band, with near-silence
/// between bursts.
fn burst_stream(
    x: &mut [f32],
    start: usize,
    end: usize,
    p: &GrainParams,
    rng: &mut ChaCha8Rng,
) {
    let rate = SYNTH_RATE as f64;
    let period = rate / p.burst_rate;
    let mut t = start as f64 + rng.gen_range(0.0..period * 0.3);
    while t < end as f64 {
        let burst_len = period * rng.gen_range(0.32..0.46);
        let burst_end = ((t + burst_len) as usize).min(end);
        grain_stream(x, t as usize, burst_end, p.burst_density, p.center_hz, p.decay, rng);
        t += period * rng.gen_range(0.92..1.08);
    }
}

/// Generate one clip at 22,050 Hz. Deterministic in the recipe.
pub fn synth_generate(recipe: &SynthRecipe) -> AudioClip {
    let mut rng = ChaCha8Rng::seed_from_u64(recipe.seed);
    let n = (recipe.duration * SYNTH_RATE as f64).round() as usize;
    let mut x = vec![0.0f32; n];
    for s in x.iter_mut() {
        *s = rng.gen_range(-NOISE_FLOOR..NOISE_FLOOR);
    }

    let is_empty = recipe.action == ActionLabel::Unknown || recipe.content == 0;
    if is_empty || n < SYNTH_RATE as usize {
        return AudioClip::mono(x, SYNTH_RATE);
    }

    // activity span: quiet lead-in, action, short tail
    let rate = SYNTH_RATE as f64;
    let lead = rng.gen_range(0.3..1.2_f64).min(recipe.duration * 0.3);
    let tail = rng.gen_range(0.1..0.4_f64);
    let start = (lead * rate) as usize;
    let end = n.saturating_sub((tail * rate) as usize).max(start + 1);
    let gain = rng.gen_range(0.55..0.95_f64);

    let before = x.clone();
    match (recipe.action, grain_params(recipe.content), water_sweep(recipe.content)) {
        (ActionLabel::Pouring, Some(p), _) => {
            let density = p.pour_density * rng.gen_range(0.85..1.15);
            let center = p.center_hz * rng.gen_range(0.93..1.07);
            grain_stream(&mut x, start, end, density, center, p.decay, &mut rng);
        }
        (ActionLabel::Pouring, _, Some((f_lo, f_hi))) => {
            let j = rng.gen_range(0.93..1.07);
            water_stream(&mut x, start, end, f_lo * j, f_hi * j, &mut rng);
        }
        (ActionLabel::Shaking, Some(p), _) => {
            burst_stream(&mut x, start, end, &p, &mut rng);
        }
        _ => {
            // inconsistent recipe (e.g. shaking water): leave the floor only
            return AudioClip::mono(before, SYNTH_RATE);
        }
    }

    // apply clip gain to the activity and keep the waveform inside [-1, 1]
    for (s, b) in x.iter_mut().zip(&before) {
        *s = *b + (*s - *b) * gain as f32;
    }
    let peak = x.iter().fold(0.0f32, |m, &s| m.max(s.abs()));
    if peak > 0.98 {
        let scale = 0.98 / peak;
        for s in x.iter_mut() {
            *s *= scale;
        }
    }
    AudioClip::mono(x, SYNTH_RATE)
}

/// One planned clip of a synthetic corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthItem {
    pub recipe: SynthRecipe,
    pub name: String,
    pub split: Split,
}

impl SynthItem {
    /// Manifest record pointing at `clips/<name>` relative to the corpus
    /// directory.
    pub fn manifest_item(&self) -> ManifestItem {
        ManifestItem {
            path: PathBuf::from("clips").join(&self.name),
            action: Some(self.recipe.action),
            content: Some(self.recipe.content),
            container_id: Some(format!("synth-{}", self.recipe.seed % 97)),
            split: self.split,
        }
    }
}

/// Requested clip counts per split.
#[derive(Debug, Clone, Copy)]
pub struct CorpusCounts {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

/// Plan a corpus: counts are distributed as evenly as possible over the
/// seven classes (earlier classes take the remainder), and classes with two
/// permitted actions alternate between pouring and shaking. Water classes
/// only pour; empty clips carry the unknown action.
pub fn corpus_items(counts: CorpusCounts, seed: u64, taxonomy: &ClassTaxonomy) -> Vec<SynthItem> {
    let n_classes = taxonomy.num_content();
    let mut items = Vec::new();
    for (split, split_code, total) in [
        (Split::Train, 0u64, counts.train),
        (Split::Val, 1, counts.val),
        (Split::Test, 2, counts.test),
    ] {
        for class in 0..n_classes {
            let count = total / n_classes + usize::from(class < total % n_classes);
            let actions = permitted_actions(taxonomy, class);
            for i in 0..count {
                let action = actions[i % actions.len()];
                let item_seed = derive_seed(seed, split_code, (class * 1_000_000 + i) as u64);
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(item_seed, 0xD, 0));
                // mostly shorter than the 10 s window (zero padding), with a
                // sprinkle of longer clips exercising truncation
                let duration = if i % 8 == 7 {
                    rng.gen_range(10.5..12.0)
                } else {
                    rng.gen_range(3.5..8.5)
                };
                items.push(SynthItem {
                    recipe: SynthRecipe { content: class, action, duration, seed: item_seed },
                    name: format!(
                        "{}_{}_{:04}.wav",
                        split.as_str(),
                        taxonomy.content_classes[class],
                        i
                    ),
                    split,
                });
            }
        }
    }
    items
}

fn permitted_actions(taxonomy: &ClassTaxonomy, class: usize) -> Vec<ActionLabel> {
    if class == taxonomy.unknown_content {
        return vec![ActionLabel::Unknown];
    }
    let mut actions = Vec::new();
    if taxonomy.pouring_mask.contains(&class) {
        actions.push(ActionLabel::Pouring);
    }
    if taxonomy.shaking_mask.contains(&class) {
        actions.push(ActionLabel::Shaking);
    }
    actions
}
