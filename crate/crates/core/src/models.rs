//! The three classifier architectures as configuration-driven layer stacks.
//!
//! Layer counts are structural: the action gate has 4 conv / 2 pool / 3
//! dense layers, the pouring specialist 6 / 3 / 3 (with dropout in the conv
//! layer before each pooling stage), the shaking specialist 4 / 2 / 2.
//! Channel and dense widths are free config values; the shipped defaults
//! live in [`ModelConfig::default`] and can be overridden per model from a
//! TOML file with `[action]`, `[pouring]`, `[shaking]` sections.

use crate::nn::{Element, Layer, Network, PoolPadding};
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("{model} spec invalid: expected {expected} {what}, got {got}")]
    BadCount { model: ModelId, what: &'static str, expected: usize, got: usize },
    #[error("{model} spec invalid: {reason}")]
    BadSpec { model: ModelId, reason: String },
    #[error("input side {n} too small for the pooling chain (need at least 12)")]
    InputTooSmall { n: usize },
    #[error("could not read model config: {0}")]
    Io(#[from] std::io::Error),
    #[error("could not parse model config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error(transparent)]
    Nn(#[from] crate::nn::NnError),
}

/// Which of the three classifiers a spec describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelId {
    /// 3-way action gate: unknown / pouring / shaking.
    Action,
    /// 6-way content classifier for pouring clips.
    Pouring,
    /// 4-way content classifier for shaking clips.
    Shaking,
}

impl ModelId {
    pub fn all() -> [ModelId; 3] {
        [ModelId::Action, ModelId::Pouring, ModelId::Shaking]
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelId::Action => "action",
            ModelId::Pouring => "pouring",
            ModelId::Shaking => "shaking",
        }
    }

    /// Stable numeric id used in checkpoint headers.
    pub fn code(self) -> u32 {
        match self {
            ModelId::Action => 0,
            ModelId::Pouring => 1,
            ModelId::Shaking => 2,
        }
    }

    pub fn from_code(code: u32) -> Option<ModelId> {
        match code {
            0 => Some(ModelId::Action),
            1 => Some(ModelId::Pouring),
            2 => Some(ModelId::Shaking),
            _ => None,
        }
    }

    fn required_counts(self) -> (usize, usize, usize) {
        // (conv layers, dense layers, output classes)
        match self {
            ModelId::Action => (4, 3, 3),
            ModelId::Pouring => (6, 3, 6),
            ModelId::Shaking => (4, 2, 4),
        }
    }
}

impl std::fmt::Display for ModelId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Architecture of one classifier: out-channel counts for the conv layers
/// and widths for the dense layers (the last entry is the output layer).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub id: ModelId,
    pub conv_channels: Vec<usize>,
    pub fc_sizes: Vec<usize>,
    pub output_dim: usize,
    /// Keep probability; required for the pouring model, absent otherwise.
    pub dropout_keep: Option<f32>,
    /// Edge rule for the pooling layers (`same`: 96 -> 48 -> 24).
    #[serde(default)]
    pub pool_padding: PoolPadding,
}

impl ModelSpec {
    pub fn validate(&self) -> Result<(), ModelError> {
        let (conv, dense, out) = self.id.required_counts();
        if self.conv_channels.len() != conv {
            return Err(ModelError::BadCount {
                model: self.id,
                what: "conv layers",
                expected: conv,
                got: self.conv_channels.len(),
            });
        }
        if self.fc_sizes.len() != dense {
            return Err(ModelError::BadCount {
                model: self.id,
                what: "dense layers",
                expected: dense,
                got: self.fc_sizes.len(),
            });
        }
        if self.output_dim != out {
            return Err(ModelError::BadCount {
                model: self.id,
                what: "output classes",
                expected: out,
                got: self.output_dim,
            });
        }
        if self.fc_sizes.last() != Some(&self.output_dim) {
            return Err(ModelError::BadSpec {
                model: self.id,
                reason: format!(
                    "last dense width {:?} must equal the output dimension {}",
                    self.fc_sizes.last(),
                    self.output_dim
                ),
            });
        }
        if self.conv_channels.iter().any(|&c| c == 0) || self.fc_sizes.iter().any(|&c| c == 0) {
            return Err(ModelError::BadSpec { model: self.id, reason: "zero-width layer".into() });
        }
        match (self.id, self.dropout_keep) {
            (ModelId::Pouring, None) => {
                return Err(ModelError::BadSpec {
                    model: self.id,
                    reason: "pouring model requires a dropout keep probability".into(),
                })
            }
            (ModelId::Pouring, Some(k)) if !(k > 0.0 && k <= 1.0) => {
                return Err(ModelError::BadSpec {
                    model: self.id,
                    reason: format!("dropout keep probability {k} outside (0, 1]"),
                })
            }
            (ModelId::Action | ModelId::Shaking, Some(_)) => {
                return Err(ModelError::BadSpec {
                    model: self.id,
                    reason: "dropout is only part of the pouring model".into(),
                })
            }
            _ => {}
        }
        Ok(())
    }

    /// Number of pooling stages (one after every other conv layer).
    pub fn pool_stages(&self) -> usize {
        self.conv_channels.len() / 2
    }
}

/// Build the layer stack for `spec` with an `n x n x 1` input:
/// (conv, relu, conv, relu, [dropout,] pool) per stage, then flatten, then
/// (dense, relu) for the hidden widths and a final dense + softmax.
pub fn build<T: Element>(spec: &ModelSpec, n: usize) -> Result<Network<T>, ModelError> {
    spec.validate()?;
    if n < 12 {
        return Err(ModelError::InputTooSmall { n });
    }

    let mut layers = Vec::new();
    let mut in_ch = 1usize;
    let mut side = n;
    for (i, &out_ch) in spec.conv_channels.iter().enumerate() {
        layers.push(Layer::Conv2d { in_channels: in_ch, out_channels: out_ch });
        layers.push(Layer::Relu);
        in_ch = out_ch;
        if i % 2 == 1 {
            // dropout sits in the conv layer feeding each pooling stage
            if let Some(keep) = spec.dropout_keep {
                layers.push(Layer::Dropout { keep });
            }
            layers.push(Layer::MaxPool2d { padding: spec.pool_padding });
            side = crate::nn::pooled_extent(side, spec.pool_padding)
                .map_err(|reason| ModelError::BadSpec { model: spec.id, reason })?;
        }
    }
    layers.push(Layer::Flatten);
    let mut features = side * side * in_ch;
    for (i, &width) in spec.fc_sizes.iter().enumerate() {
        layers.push(Layer::Dense { in_features: features, out_features: width });
        if i + 1 < spec.fc_sizes.len() {
            layers.push(Layer::Relu);
        }
        features = width;
    }
    layers.push(Layer::Softmax);

    Ok(Network::new(layers, &[n, n, 1])?)
}

/// The three specs of one deployment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub action: ModelSpec,
    pub pouring: ModelSpec,
    pub shaking: ModelSpec,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            action: ModelSpec {
                id: ModelId::Action,
                conv_channels: vec![32, 32, 64, 64],
                fc_sizes: vec![256, 128, 3],
                output_dim: 3,
                dropout_keep: None,
                pool_padding: PoolPadding::Same,
            },
            pouring: ModelSpec {
                id: ModelId::Pouring,
                conv_channels: vec![32, 32, 64, 64, 128, 128],
                fc_sizes: vec![256, 128, 6],
                output_dim: 6,
                dropout_keep: Some(0.75),
                pool_padding: PoolPadding::Same,
            },
            shaking: ModelSpec {
                id: ModelId::Shaking,
                conv_channels: vec![32, 32, 64, 64],
                fc_sizes: vec![256, 4],
                output_dim: 4,
                dropout_keep: None,
                pool_padding: PoolPadding::Same,
            },
        }
    }
}

impl ModelConfig {
    pub fn get(&self, id: ModelId) -> &ModelSpec {
        match id {
            ModelId::Action => &self.action,
            ModelId::Pouring => &self.pouring,
            ModelId::Shaking => &self.shaking,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        self.action.validate()?;
        self.pouring.validate()?;
        self.shaking.validate()
    }

    /// Parse a TOML config; any missing section or field falls back to the
    /// shipped defaults.
    pub fn from_toml(text: &str) -> Result<ModelConfig, ModelError> {
        #[derive(Deserialize, Default)]
        struct Partial {
            action: Option<Section>,
            pouring: Option<Section>,
            shaking: Option<Section>,
        }
        #[derive(Deserialize, Default)]
        #[serde(deny_unknown_fields)]
        struct Section {
            conv_channels: Option<Vec<usize>>,
            fc_sizes: Option<Vec<usize>>,
            dropout_keep: Option<f32>,
            pool_padding: Option<PoolPadding>,
        }
        fn merge(spec: &mut ModelSpec, section: Option<Section>) {
            let Some(section) = section else { return };
            if let Some(c) = section.conv_channels {
                spec.conv_channels = c;
            }
            if let Some(f) = section.fc_sizes {
                spec.fc_sizes = f;
            }
            if let Some(k) = section.dropout_keep {
                spec.dropout_keep = Some(k);
            }
            if let Some(p) = section.pool_padding {
                spec.pool_padding = p;
            }
        }

        let partial: Partial = toml::from_str(text)?;
        let mut config = ModelConfig::default();
        merge(&mut config.action, partial.action);
        merge(&mut config.pouring, partial.pouring);
        merge(&mut config.shaking, partial.shaking);
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: &Path) -> Result<ModelConfig, ModelError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// A deliberately narrow configuration for desk-scale training runs and
    /// the synthetic verification suite. Same structure, small widths.
    pub fn compact() -> Self {
        let mut config = ModelConfig::default();
        config.action.conv_channels = vec![8, 8, 16, 16];
        config.action.fc_sizes = vec![48, 24, 3];
        config.pouring.conv_channels = vec![8, 8, 16, 16, 32, 32];
        config.pouring.fc_sizes = vec![48, 24, 6];
        config.shaking.conv_channels = vec![8, 8, 16, 16];
        config.shaking.fc_sizes = vec![48, 4];
        config
    }
}
