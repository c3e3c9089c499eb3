//! Dataset manifests and deterministic splits.
//!
//! A manifest is a comma-separated text file with header
//! `path,action,content_class,container_id,split`, one record per clip.
//! Paths are relative to the manifest's directory. Action and content may
//! be empty for unlabeled (prediction-only) clips. Label invariants are
//! enforced once at load time; nothing downstream re-checks them.

pub mod synth;

use crate::pipeline::ClassTaxonomy;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("could not read manifest: {0}")]
    Io(#[from] std::io::Error),
    #[error("manifest invalid:\n{}", errors.join("\n"))]
    InvalidManifest { errors: Vec<String> },
    #[error("split requires items marked split=train, found '{0}'")]
    NonTrainItem(String),
    #[error("split ratio {0} outside (0, 1)")]
    BadRatio(f64),
    #[error("stratified split needs at least 2 items of class '{class}', found {count}; use a non-stratified split")]
    ClassTooSmall { class: String, count: usize },
    #[error("cannot split unlabeled items in stratified mode")]
    Unlabeled,
    #[error("cannot split an empty item list")]
    EmptySplit,
}

/// The manipulation recorded in a clip.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionLabel {
    Unknown,
    Pouring,
    Shaking,
}

impl ActionLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            ActionLabel::Unknown => "unknown",
            ActionLabel::Pouring => "pouring",
            ActionLabel::Shaking => "shaking",
        }
    }

    pub fn parse(s: &str) -> Option<ActionLabel> {
        match s {
            "unknown" => Some(ActionLabel::Unknown),
            "pouring" => Some(ActionLabel::Pouring),
            "shaking" => Some(ActionLabel::Shaking),
            _ => None,
        }
    }

    /// Index within [`ClassTaxonomy::action_classes`].
    pub fn index(self) -> usize {
        match self {
            ActionLabel::Unknown => 0,
            ActionLabel::Pouring => 1,
            ActionLabel::Shaking => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Split> {
        match s {
            "train" => Some(Split::Train),
            "val" | "validation" => Some(Split::Val),
            "test" => Some(Split::Test),
            _ => None,
        }
    }
}

/// One manifest record. `path` is as written in the file (relative paths
/// resolve against the manifest's directory).
#[derive(Debug, Clone, PartialEq)]
pub struct ManifestItem {
    pub path: PathBuf,
    pub action: Option<ActionLabel>,
    /// Index into the taxonomy's content classes.
    pub content: Option<usize>,
    pub container_id: Option<String>,
    pub split: Split,
}

/// A loaded manifest plus non-fatal warnings.
#[derive(Debug, Clone, Default)]
pub struct Manifest {
    pub items: Vec<ManifestItem>,
    pub warnings: Vec<String>,
}

fn is_water(taxonomy: &ClassTaxonomy, content: usize) -> bool {
    taxonomy.content_classes[content].starts_with("water")
}

fn validate_item(
    taxonomy: &ClassTaxonomy,
    action: Option<ActionLabel>,
    content: Option<usize>,
) -> Result<(), String> {
    match (action, content) {
        (Some(ActionLabel::Unknown), Some(c)) if c != taxonomy.unknown_content => Err(format!(
            "action 'unknown' requires content '{}', got '{}'",
            taxonomy.content_classes[taxonomy.unknown_content], taxonomy.content_classes[c]
        )),
        (Some(ActionLabel::Shaking), Some(c)) if is_water(taxonomy, c) => Err(format!(
            "action 'shaking' cannot carry the water class '{}'",
            taxonomy.content_classes[c]
        )),
        _ => Ok(()),
    }
}

/// Parse and validate a manifest file. Every invalid line is reported with
/// its line number; an empty file loads as an empty manifest with a warning.
pub fn load_manifest(path: &Path, taxonomy: &ClassTaxonomy) -> Result<Manifest, DataError> {
    let text = std::fs::read_to_string(path)?;
    parse_manifest(&text, taxonomy)
}

pub fn parse_manifest(text: &str, taxonomy: &ClassTaxonomy) -> Result<Manifest, DataError> {
    let mut items = Vec::new();
    let mut errors = Vec::new();
    let mut warnings = Vec::new();
    let mut saw_header = false;

    for (lineno, line) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !saw_header {
            saw_header = true;
            if line.starts_with("path,") {
                continue; // header row
            }
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 5 {
            errors.push(format!("line {lineno}: expected 5 fields, got {}", fields.len()));
            continue;
        }
        let path = PathBuf::from(fields[0]);
        if fields[0].is_empty() {
            errors.push(format!("line {lineno}: empty path"));
            continue;
        }
        let action = if fields[1].is_empty() {
            None
        } else {
            match ActionLabel::parse(fields[1]) {
                Some(a) => Some(a),
                None => {
                    errors.push(format!("line {lineno}: unknown action '{}'", fields[1]));
                    continue;
                }
            }
        };
        let content = if fields[2].is_empty() {
            None
        } else {
            match taxonomy.content_index(fields[2]) {
                Some(c) => Some(c),
                None => {
                    errors.push(format!("line {lineno}: unknown content class '{}'", fields[2]));
                    continue;
                }
            }
        };
        let container_id = if fields[3].is_empty() { None } else { Some(fields[3].to_string()) };
        let split = match Split::parse(fields[4]) {
            Some(s) => s,
            None => {
                errors.push(format!("line {lineno}: unknown split '{}'", fields[4]));
                continue;
            }
        };
        if let Err(msg) = validate_item(taxonomy, action, content) {
            errors.push(format!("line {lineno}: {msg}"));
            continue;
        }
        items.push(ManifestItem { path, action, content, container_id, split });
    }

    if !errors.is_empty() {
        return Err(DataError::InvalidManifest { errors });
    }
    if items.is_empty() {
        warnings.push("manifest contains no records".to_string());
    }
    Ok(Manifest { items, warnings })
}

/// Serialize items back to manifest text.
pub fn manifest_to_string(items: &[ManifestItem], taxonomy: &ClassTaxonomy) -> String {
    let mut out = String::from("path,action,content_class,container_id,split\n");
    for item in items {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            item.path.display(),
            item.action.map(|a| a.as_str()).unwrap_or(""),
            item.content.map(|c| taxonomy.content_classes[c].as_str()).unwrap_or(""),
            item.container_id.as_deref().unwrap_or(""),
            item.split.as_str(),
        ));
    }
    out
}

pub fn save_manifest(path: &Path, items: &[ManifestItem], taxonomy: &ClassTaxonomy) -> Result<(), DataError> {
    std::fs::write(path, manifest_to_string(items, taxonomy))?;
    Ok(())
}

/// Deterministically split training items into (train, val).
///
/// Stratified mode (the default) shuffles within each content class so the
/// per-class proportions stay within one item of the ratio; every class
/// needs at least 2 items. Non-stratified mode shuffles globally. Returned
/// val items have their split field set to `Val`.
pub fn split_train_val(
    items: &[ManifestItem],
    ratio: f64,
    seed: u64,
    stratified: bool,
    taxonomy: &ClassTaxonomy,
) -> Result<(Vec<ManifestItem>, Vec<ManifestItem>), DataError> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;

    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(DataError::BadRatio(ratio));
    }
    if items.is_empty() {
        return Err(DataError::EmptySplit);
    }
    for item in items {
        if item.split != Split::Train {
            return Err(DataError::NonTrainItem(item.split.as_str().to_string()));
        }
    }

    const SPLIT_STREAM: u64 = 0x51;

    let mut train = Vec::new();
    let mut val = Vec::new();
    let mut push = |indices: Vec<usize>, n_train: usize| {
        for (rank, idx) in indices.into_iter().enumerate() {
            if rank < n_train {
                train.push(items[idx].clone());
            } else {
                let mut item = items[idx].clone();
                item.split = Split::Val;
                val.push(item);
            }
        }
    };

    if stratified {
        let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); taxonomy.num_content()];
        for (idx, item) in items.iter().enumerate() {
            let class = item.content.ok_or(DataError::Unlabeled)?;
            by_class[class].push(idx);
        }
        for (class, mut indices) in by_class.into_iter().enumerate() {
            if indices.is_empty() {
                continue;
            }
            if indices.len() < 2 {
                return Err(DataError::ClassTooSmall {
                    class: taxonomy.content_classes[class].clone(),
                    count: indices.len(),
                });
            }
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(crate::util::derive_seed(
                seed,
                class as u64,
                SPLIT_STREAM,
            ));
            indices.shuffle(&mut rng);
            let n = indices.len();
            let n_train = ((n as f64 * ratio).round() as usize).clamp(1, n - 1);
            push(indices, n_train);
        }
    } else {
        let mut indices: Vec<usize> = (0..items.len()).collect();
        let mut rng =
            rand_chacha::ChaCha8Rng::seed_from_u64(crate::util::derive_seed(seed, 0, SPLIT_STREAM));
        indices.shuffle(&mut rng);
        let n = indices.len();
        let n_train = ((n as f64 * ratio).round() as usize).clamp(1, n.saturating_sub(1).max(1));
        push(indices, n_train);
    }

    Ok((train, val))
}
