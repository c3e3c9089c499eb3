//! k-nearest-neighbours over flattened spectrograms — the sanity-floor
//! baseline. Plain linear scan: training sets at this scale are small and a
//! scan keeps the tie-breaking rules exactly reproducible.

use crate::dsp::Spectrogram;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum KnnError {
    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("k = {k} exceeds the training set size {size}")]
    KTooLarge { k: usize, size: usize },
    #[error("k must be at least 1")]
    ZeroK,
    #[error("query has {got} dimensions, training vectors have {expected}")]
    DimMismatch { expected: usize, got: usize },
    #[error("vector and label counts differ ({vectors} vs {labels})")]
    CountMismatch { vectors: usize, labels: usize },
}

/// A fitted model: the flattened training vectors verbatim plus labels.
#[derive(Debug, Clone)]
pub struct KnnModel {
    pub k: usize,
    vectors: Vec<Vec<f32>>,
    labels: Vec<usize>,
}

/// Flatten a spectrogram row-major into a feature vector.
pub fn flatten(spec: &Spectrogram) -> Vec<f32> {
    spec.data.clone()
}

/// Store the training vectors verbatim.
pub fn knn_fit(vectors: Vec<Vec<f32>>, labels: Vec<usize>, k: usize) -> Result<KnnModel, KnnError> {
    if k == 0 {
        return Err(KnnError::ZeroK);
    }
    if vectors.is_empty() {
        return Err(KnnError::EmptyTrainingSet);
    }
    if vectors.len() != labels.len() {
        return Err(KnnError::CountMismatch { vectors: vectors.len(), labels: labels.len() });
    }
    if k > vectors.len() {
        return Err(KnnError::KTooLarge { k, size: vectors.len() });
    }
    let dim = vectors[0].len();
    for v in &vectors {
        if v.len() != dim {
            return Err(KnnError::DimMismatch { expected: dim, got: v.len() });
        }
    }
    Ok(KnnModel { k, vectors, labels })
}

fn squared_distance(a: &[f32], b: &[f32]) -> f64 {
    let mut acc = 0.0f64;
    for (x, y) in a.iter().zip(b) {
        let d = *x as f64 - *y as f64;
        acc += d * d;
    }
    acc
}

impl KnnModel {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Majority vote over the k nearest training vectors by Euclidean
    /// distance. Neighbour ties at equal distance resolve to the lower
    /// training index; vote ties resolve by smaller summed distance, then
    /// by lower class index.
    pub fn predict(&self, query: &[f32]) -> Result<usize, KnnError> {
        let dim = self.vectors[0].len();
        if query.len() != dim {
            return Err(KnnError::DimMismatch { expected: dim, got: query.len() });
        }
        let mut scored: Vec<(f64, usize)> = self
            .vectors
            .iter()
            .enumerate()
            .map(|(i, v)| (squared_distance(query, v), i))
            .collect();
        scored.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));

        let max_class = self.labels.iter().copied().max().unwrap_or(0);
        let mut votes = vec![0usize; max_class + 1];
        let mut summed = vec![0.0f64; max_class + 1];
        for &(dist, idx) in &scored[..self.k] {
            let class = self.labels[idx];
            votes[class] += 1;
            summed[class] += dist;
        }
        let mut winner = None::<usize>;
        for class in 0..votes.len() {
            if votes[class] == 0 {
                continue;
            }
            winner = Some(match winner {
                None => class,
                Some(best) => {
                    if votes[class] > votes[best]
                        || (votes[class] == votes[best] && summed[class] < summed[best])
                    {
                        class
                    } else {
                        best
                    }
                }
            });
        }
        Ok(winner.expect("k >= 1 neighbours voted"))
    }
}
