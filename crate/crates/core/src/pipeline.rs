//! The gated decision procedure: classify the action, dispatch to exactly
//! one action-specific content classifier, and fuse the one-hot outputs
//! into one of the seven content classes.
//!
//! The action gate emits `pi` over {unknown, pouring, shaking}. Each
//! specialist covers only the content classes its action can produce, so
//! its output is embedded back into the full class set through a mask; the
//! unknown case maps to a fixed content class (empty). Because `pi` is
//! one-hot, the fused sum `pi_1 * z_a + pi_2 * z_g + pi_3 * z_h` selects
//! exactly one of the three vectors.

use crate::audio::AudioClip;
use crate::dsp::{self, DspConfig, Spectrogram};
use crate::nn::{Element, Network, Tensor};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("cannot take the argmax of an empty probability vector")]
    EmptyProbs,
    #[error("one-hot dimension {z} does not match mask length {mask}")]
    MaskMismatch { z: usize, mask: usize },
    #[error("network output dimension {got} does not match expected {expected}")]
    BadOutputDim { expected: usize, got: usize },
}

/// Index of the action classes within [`ClassTaxonomy::action_classes`].
pub const ACTION_UNKNOWN: usize = 0;
pub const ACTION_POURING: usize = 1;
pub const ACTION_SHAKING: usize = 2;

/// The class sets and specialist masks of a deployment.
///
/// Content classes combine type and level; the default taxonomy is
/// {empty, pasta-half, pasta-full, rice-half, rice-full, water-half,
/// water-full} with actions {unknown, pouring, shaking}. The pouring
/// specialist covers every non-empty class, the shaking specialist the
/// non-water ones (boxes are never filled with water), and the unknown
/// action maps to `unknown_content` (empty by default — no content, no
/// manipulation sound).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassTaxonomy {
    pub content_classes: Vec<String>,
    pub action_classes: Vec<String>,
    /// Specialist output index -> content class index.
    pub pouring_mask: Vec<usize>,
    pub shaking_mask: Vec<usize>,
    /// Content class assigned to the unknown action.
    pub unknown_content: usize,
}

impl Default for ClassTaxonomy {
    fn default() -> Self {
        ClassTaxonomy {
            content_classes: [
                "empty",
                "pasta-half",
                "pasta-full",
                "rice-half",
                "rice-full",
                "water-half",
                "water-full",
            ]
            .iter()
            .map(|s| s.to_string())
            .collect(),
            action_classes: ["unknown", "pouring", "shaking"].iter().map(|s| s.to_string()).collect(),
            pouring_mask: vec![1, 2, 3, 4, 5, 6],
            shaking_mask: vec![1, 2, 3, 4],
            unknown_content: 0,
        }
    }
}

impl ClassTaxonomy {
    pub fn num_content(&self) -> usize {
        self.content_classes.len()
    }

    pub fn num_actions(&self) -> usize {
        self.action_classes.len()
    }

    pub fn content_index(&self, name: &str) -> Option<usize> {
        self.content_classes.iter().position(|c| c == name)
    }

    pub fn action_index(&self, name: &str) -> Option<usize> {
        self.action_classes.iter().position(|a| a == name)
    }

    /// Mask for a given action, if that action has a specialist.
    pub fn mask_for(&self, action: usize) -> Option<&[usize]> {
        match action {
            ACTION_POURING => Some(&self.pouring_mask),
            ACTION_SHAKING => Some(&self.shaking_mask),
            _ => None,
        }
    }
}

/// A one-hot vector: dimension plus the index of its single 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OneHot {
    pub dim: usize,
    pub hot: usize,
}

impl OneHot {
    pub fn new(dim: usize, hot: usize) -> Self {
        assert!(hot < dim, "hot index {hot} out of range for dim {dim}");
        OneHot { dim, hot }
    }

    pub fn to_dense(self) -> Vec<f32> {
        let mut v = vec![0.0; self.dim];
        v[self.hot] = 1.0;
        v
    }
}

/// Convert a probability vector to a one-hot by argmax; ties break to the
/// smallest index so the conversion is deterministic.
pub fn argmax_onehot<T: Element>(probs: &[T]) -> Result<OneHot, PipelineError> {
    if probs.is_empty() {
        return Err(PipelineError::EmptyProbs);
    }
    let mut hot = 0usize;
    let mut best = probs[0];
    for (i, &p) in probs.iter().enumerate().skip(1) {
        if p > best {
            best = p;
            hot = i;
        }
    }
    Ok(OneHot { dim: probs.len(), hot })
}

/// Embed a specialist's one-hot output into the full content class set via
/// its mask.
pub fn embed(z: OneHot, mask: &[usize], num_content: usize) -> Result<OneHot, PipelineError> {
    if z.dim != mask.len() {
        return Err(PipelineError::MaskMismatch { z: z.dim, mask: mask.len() });
    }
    Ok(OneHot::new(num_content, mask[z.hot]))
}

/// Fuse the action gate with the (already embedded) specialist outputs:
/// the argmax of `pi_1 * z_a + pi_2 * z_g + pi_3 * z_h`. Since `pi` is
/// one-hot this selects z_a, z_g or z_h outright.
pub fn fuse(taxonomy: &ClassTaxonomy, pi: OneHot, z_g: OneHot, z_h: OneHot) -> usize {
    let n = taxonomy.num_content();
    debug_assert_eq!(pi.dim, taxonomy.num_actions());
    debug_assert_eq!(z_g.dim, n);
    debug_assert_eq!(z_h.dim, n);
    let z_a = OneHot::new(n, taxonomy.unknown_content);

    let mut fused = vec![0.0f32; n];
    for (gate, z) in [(ACTION_UNKNOWN, z_a), (ACTION_POURING, z_g), (ACTION_SHAKING, z_h)] {
        let weight = if pi.hot == gate { 1.0 } else { 0.0 };
        fused[z.hot] += weight;
    }
    argmax_onehot(&fused).expect("fused vector is non-empty").hot
}

/// The three trained classifiers.
pub struct PipelineNets {
    pub action: Network<f32>,
    pub pouring: Network<f32>,
    pub shaking: Network<f32>,
}

/// Model input: spectrogram dB values mapped from [floor, 0] to [0, 1],
/// shaped n x n x 1.
pub fn spectrogram_to_input(spec: &Spectrogram, db_floor: f32) -> Tensor<f32> {
    let scale = 1.0 / -db_floor;
    let data = spec.data.iter().map(|&v| (v - db_floor) * scale).collect();
    Tensor::from_vec(&[spec.rows, spec.cols, 1], data)
}

/// Outcome of classifying one clip.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Classification {
    pub action: usize,
    pub action_probs: Vec<f32>,
    pub content: usize,
    /// Raw probabilities of the specialist that actually ran; `None` for the
    /// unknown action (no specialist is evaluated).
    pub specialist_probs: Option<Vec<f32>>,
}

/// Classify a spectrogram that already went through the front-end. Exactly
/// one specialist forward pass happens per call; the unselected specialist
/// is never evaluated.
pub fn classify_spectrogram(
    spec: &Spectrogram,
    nets: &PipelineNets,
    taxonomy: &ClassTaxonomy,
    db_floor: f32,
) -> crate::Result<Classification> {
    let input = spectrogram_to_input(spec, db_floor);
    let action_out = nets.action.infer(&input)?;
    if action_out.numel() != taxonomy.num_actions() {
        return Err(PipelineError::BadOutputDim {
            expected: taxonomy.num_actions(),
            got: action_out.numel(),
        }
        .into());
    }
    let pi = argmax_onehot(action_out.data())?;

    let (content, specialist_probs) = match pi.hot {
        ACTION_POURING => {
            let out = nets.pouring.infer(&input)?;
            let z = argmax_onehot(out.data())?;
            let embedded = embed(z, &taxonomy.pouring_mask, taxonomy.num_content())?;
            (embedded.hot, Some(out.data().to_vec()))
        }
        ACTION_SHAKING => {
            let out = nets.shaking.infer(&input)?;
            let z = argmax_onehot(out.data())?;
            let embedded = embed(z, &taxonomy.shaking_mask, taxonomy.num_content())?;
            (embedded.hot, Some(out.data().to_vec()))
        }
        _ => (taxonomy.unknown_content, None),
    };

    Ok(Classification {
        action: pi.hot,
        action_probs: action_out.data().to_vec(),
        content,
        specialist_probs,
    })
}

/// The full chain for one raw clip: front-end featurization followed by
/// gated classification.
pub fn classify(
    clip: &AudioClip,
    nets: &PipelineNets,
    taxonomy: &ClassTaxonomy,
    cfg: &DspConfig,
) -> crate::Result<Classification> {
    let spec = dsp::featurize(clip, cfg)?;
    classify_spectrogram(&spec, nets, taxonomy, cfg.db_floor)
}

/// One line of the prediction output stream (JSON per clip).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub clip_path: String,
    pub action: String,
    pub action_probs: Vec<f32>,
    pub content_class: String,
    pub specialist_probs: Option<Vec<f32>>,
    pub elapsed_ms: f64,
}

impl PredictionRecord {
    pub fn new(path: &str, c: &Classification, taxonomy: &ClassTaxonomy, elapsed_ms: f64) -> Self {
        PredictionRecord {
            clip_path: path.to_string(),
            action: taxonomy.action_classes[c.action].clone(),
            action_probs: c.action_probs.clone(),
            content_class: taxonomy.content_classes[c.content].clone(),
            specialist_probs: c.specialist_probs.clone(),
            elapsed_ms,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{build, ModelConfig};

    fn taxonomy() -> ClassTaxonomy {
        ClassTaxonomy::default()
    }

    #[test]
    fn argmax_picks_unique_max() {
        assert_eq!(argmax_onehot(&[0.1f32, 0.7, 0.2]).unwrap().hot, 1);
    }

    #[test]
    fn argmax_ties_break_low() {
        assert_eq!(argmax_onehot(&[0.5f32, 0.5]).unwrap().hot, 0);
        assert_eq!(argmax_onehot(&[1.0f32 / 7.0; 7]).unwrap().hot, 0);
    }

    #[test]
    fn argmax_rejects_empty() {
        assert!(matches!(argmax_onehot::<f32>(&[]), Err(PipelineError::EmptyProbs)));
    }

    #[test]
    fn embed_maps_through_masks() {
        let t = taxonomy();
        // pouring hot 0 -> pasta-half (content index 1)
        let z = embed(OneHot::new(6, 0), &t.pouring_mask, 7).unwrap();
        assert_eq!(z.hot, 1);
        // shaking hot 3 -> rice-full (content index 4)
        let z = embed(OneHot::new(4, 3), &t.shaking_mask, 7).unwrap();
        assert_eq!(z.hot, 4);
        // pouring hot 5 -> water-full (content index 6)
        let z = embed(OneHot::new(6, 5), &t.pouring_mask, 7).unwrap();
        assert_eq!(z.hot, 6);
    }

    #[test]
    fn embed_rejects_dimension_mismatch() {
        let t = taxonomy();
        assert!(matches!(
            embed(OneHot::new(5, 0), &t.pouring_mask, 7),
            Err(PipelineError::MaskMismatch { z: 5, mask: 6 })
        ));
    }

    #[test]
    fn fuse_selects_by_gate() {
        let t = taxonomy();
        let z_g = OneHot::new(7, 6); // water-full
        let z_h = OneHot::new(7, 2); // pasta-full
        assert_eq!(fuse(&t, OneHot::new(3, ACTION_UNKNOWN), z_g, z_h), 0);
        assert_eq!(fuse(&t, OneHot::new(3, ACTION_POURING), z_g, z_h), 6);
        assert_eq!(fuse(&t, OneHot::new(3, ACTION_SHAKING), z_g, z_h), 2);
    }

    /// Exhaustive gate fusion: all 3 x 6 x 4 combinations land in a valid
    /// class, unknown always yields empty, shaking never yields water, and
    /// pouring never yields empty.
    #[test]
    fn fuse_exhaustive_72_cases() {
        let t = taxonomy();
        let mut cases = 0;
        for action in 0..3 {
            for &g in &t.pouring_mask {
                for &h in &t.shaking_mask {
                    let c = fuse(&t, OneHot::new(3, action), OneHot::new(7, g), OneHot::new(7, h));
                    assert!(c < 7);
                    match action {
                        ACTION_UNKNOWN => assert_eq!(c, 0),
                        ACTION_POURING => {
                            assert_eq!(c, g);
                            assert_ne!(c, 0, "pouring can never yield empty");
                        }
                        ACTION_SHAKING => {
                            assert_eq!(c, h);
                            assert!(
                                !t.content_classes[c].starts_with("water"),
                                "shaking can never yield a water class"
                            );
                        }
                        _ => unreachable!(),
                    }
                    // z_a is selected iff the gate is unknown
                    assert_eq!(c == t.unknown_content && g != t.unknown_content, action == ACTION_UNKNOWN);
                    cases += 1;
                }
            }
        }
        assert_eq!(cases, 72);
    }

    fn zero_nets() -> PipelineNets {
        let config = ModelConfig::compact();
        PipelineNets {
            action: build(&config.action, 96).unwrap(),
            pouring: build(&config.pouring, 96).unwrap(),
            shaking: build(&config.shaking, 96).unwrap(),
        }
    }

    fn poisoned(mut net: Network<f32>) -> Network<f32> {
        for p in net.params_mut().iter_mut().flatten() {
            for v in p.bias.data_mut() {
                *v = f32::NAN;
            }
        }
        net
    }

    #[test]
    fn unknown_gate_skips_specialists() {
        // zero-weight action net gives a uniform softmax; argmax ties break
        // to index 0 = unknown. Both specialists are NaN-poisoned: if either
        // ran, the output would be NaN instead of a clean classification.
        let mut nets = zero_nets();
        nets.pouring = poisoned(nets.pouring);
        nets.shaking = poisoned(nets.shaking);
        let spec = Spectrogram { rows: 96, cols: 96, data: vec![-40.0; 96 * 96] };
        let c = classify_spectrogram(&spec, &nets, &taxonomy(), -80.0).unwrap();
        assert_eq!(c.action, ACTION_UNKNOWN);
        assert_eq!(c.content, 0);
        assert!(c.specialist_probs.is_none());
        assert!(c.action_probs.iter().all(|p| p.is_finite()));
    }

    #[test]
    fn silent_clip_classifies_to_some_valid_class() {
        let mut nets = zero_nets();
        nets.action.init_weights(1);
        nets.pouring.init_weights(2);
        nets.shaking.init_weights(3);
        let clip = AudioClip::mono(vec![0.0; 3 * 22_050], 22_050);
        let t = taxonomy();
        let c = classify(&clip, &nets, &t, &DspConfig::default()).unwrap();
        assert!(c.content < t.num_content());
        assert!(c.action < t.num_actions());
        let sum: f32 = c.action_probs.iter().sum();
        assert!((sum - 1.0).abs() < 1e-5);
    }

    #[test]
    fn classify_agrees_with_fuse() {
        // whatever the nets decide, the dispatched result must equal the
        // literal gated sum over the embedded one-hots
        let mut nets = zero_nets();
        nets.action.init_weights(10);
        nets.pouring.init_weights(11);
        nets.shaking.init_weights(12);
        let t = taxonomy();
        let spec = Spectrogram {
            rows: 96,
            cols: 96,
            data: (0..96 * 96).map(|i| -(i % 80) as f32).collect(),
        };
        let c = classify_spectrogram(&spec, &nets, &t, -80.0).unwrap();

        let input = spectrogram_to_input(&spec, -80.0);
        let z_g = embed(
            argmax_onehot(nets.pouring.infer(&input).unwrap().data()).unwrap(),
            &t.pouring_mask,
            7,
        )
        .unwrap();
        let z_h = embed(
            argmax_onehot(nets.shaking.infer(&input).unwrap().data()).unwrap(),
            &t.shaking_mask,
            7,
        )
        .unwrap();
        let pi = argmax_onehot(nets.action.infer(&input).unwrap().data()).unwrap();
        assert_eq!(c.content, fuse(&t, pi, z_g, z_h));
    }

    #[test]
    fn input_scaling_maps_floor_to_zero_and_peak_to_one() {
        let spec = Spectrogram { rows: 2, cols: 2, data: vec![-80.0, 0.0, -40.0, -20.0] };
        let t = spectrogram_to_input(&spec, -80.0);
        assert_eq!(t.shape(), &[2, 2, 1]);
        assert_eq!(t.data(), &[0.0, 1.0, 0.5, 0.75]);
    }
}
