//! Scoring: per-class precision/recall/F1, support-weighted average F1,
//! confusion matrices, and the three reporting axes (combined class,
//! level only, type only).

use crate::pipeline::ClassTaxonomy;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("prediction and label sequences differ in length ({preds} vs {labels})")]
    LengthMismatch { preds: usize, labels: usize },
    #[error("cannot score an empty prediction set")]
    Empty,
    #[error("class index {index} out of range (num_classes = {num_classes})")]
    OutOfRange { index: usize, num_classes: usize },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

fn check_inputs(preds: &[usize], labels: &[usize], num_classes: usize) -> Result<(), EvalError> {
    if preds.len() != labels.len() {
        return Err(EvalError::LengthMismatch { preds: preds.len(), labels: labels.len() });
    }
    if preds.is_empty() {
        return Err(EvalError::Empty);
    }
    for &v in preds.iter().chain(labels) {
        if v >= num_classes {
            return Err(EvalError::OutOfRange { index: v, num_classes });
        }
    }
    Ok(())
}

/// Count matrix: entry (i, j) counts items with true class i predicted as j.
pub fn confusion(preds: &[usize], labels: &[usize], num_classes: usize) -> Result<Vec<u64>, EvalError> {
    check_inputs(preds, labels, num_classes)?;
    let mut m = vec![0u64; num_classes * num_classes];
    for (&p, &t) in preds.iter().zip(labels) {
        m[t * num_classes + p] += 1;
    }
    Ok(m)
}

/// Support-weighted average F1 over all classes: each class contributes its
/// F1 score weighted by its number of true items. Classes with zero support
/// carry zero weight; a class with P + R = 0 scores F1 = 0.
pub fn weighted_f1(preds: &[usize], labels: &[usize], num_classes: usize) -> Result<f64, EvalError> {
    check_inputs(preds, labels, num_classes)?;
    let m = confusion(preds, labels, num_classes)?;
    let mut weighted = 0.0f64;
    let mut total = 0.0f64;
    for class in 0..num_classes {
        let (_, _, f1, support) = class_metrics(&m, num_classes, class);
        weighted += support as f64 * f1;
        total += support as f64;
    }
    Ok(if total == 0.0 { 0.0 } else { weighted / total })
}

fn class_metrics(m: &[u64], n: usize, class: usize) -> (f64, f64, f64, u64) {
    let tp = m[class * n + class];
    let mut fp = 0u64;
    let mut support = 0u64;
    for other in 0..n {
        if other != class {
            fp += m[other * n + class];
        }
        support += m[class * n + other];
    }
    let precision = if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 };
    let recall = if support == 0 { 0.0 } else { tp as f64 / support as f64 };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    (precision, recall, f1, support)
}

/// Per-class scores of one evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct PerClass {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

/// A scored prediction set over one class axis.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub class_names: Vec<String>,
    /// Row-major count matrix, rows = true class.
    pub confusion: Vec<u64>,
    pub per_class: Vec<PerClass>,
    pub weighted_f1: f64,
}

impl EvalReport {
    pub fn compute(preds: &[usize], labels: &[usize], class_names: &[String]) -> Result<Self, EvalError> {
        let n = class_names.len();
        let confusion = confusion(preds, labels, n)?;
        let per_class = (0..n)
            .map(|c| {
                let (precision, recall, f1, support) = class_metrics(&confusion, n, c);
                PerClass { precision, recall, f1, support }
            })
            .collect();
        let weighted_f1 = weighted_f1(preds, labels, n)?;
        Ok(EvalReport { class_names: class_names.to_vec(), confusion, per_class, weighted_f1 })
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn accuracy(&self) -> f64 {
        let n = self.num_classes();
        let correct: u64 = (0..n).map(|c| self.confusion[c * n + c]).sum();
        let total: u64 = self.confusion.iter().sum();
        if total == 0 {
            0.0
        } else {
            correct as f64 / total as f64
        }
    }

    /// Row-stochastic variant of the confusion matrix (rows with zero
    /// support stay zero).
    pub fn confusion_normalized(&self) -> Vec<f64> {
        let n = self.num_classes();
        let mut out = vec![0.0f64; n * n];
        for row in 0..n {
            let sum: u64 = self.confusion[row * n..(row + 1) * n].iter().sum();
            if sum > 0 {
                for col in 0..n {
                    out[row * n + col] = self.confusion[row * n + col] as f64 / sum as f64;
                }
            }
        }
        out
    }

    /// Plain numeric grid (one row per line, space-separated).
    pub fn counts_grid(&self) -> String {
        let n = self.num_classes();
        let mut s = String::new();
        for row in 0..n {
            let cells: Vec<String> =
                (0..n).map(|c| self.confusion[row * n + c].to_string()).collect();
            s.push_str(&cells.join(" "));
            s.push('\n');
        }
        s
    }

    pub fn normalized_grid(&self) -> String {
        let n = self.num_classes();
        let norm = self.confusion_normalized();
        let mut s = String::new();
        for row in 0..n {
            let cells: Vec<String> = (0..n).map(|c| format!("{:.6}", norm[row * n + c])).collect();
            s.push_str(&cells.join(" "));
            s.push('\n');
        }
        s
    }

    /// Per-class table plus the weighted F1 as a percentage.
    pub fn text_table(&self, title: &str) -> String {
        let mut s = format!("# {title}\n");
        s.push_str(&format!(
            "{:<14} {:>10} {:>10} {:>10} {:>8}\n",
            "class", "precision", "recall", "f1", "support"
        ));
        for (name, pc) in self.class_names.iter().zip(&self.per_class) {
            s.push_str(&format!(
                "{:<14} {:>10.4} {:>10.4} {:>10.4} {:>8}\n",
                name, pc.precision, pc.recall, pc.f1, pc.support
            ));
        }
        s.push_str(&format!("weighted_f1 = {:.2}%\n", self.weighted_f1 * 100.0));
        s.push_str(&format!("accuracy    = {:.2}%\n", self.accuracy() * 100.0));
        s
    }
}

/// Content-class projections onto the level and type axes, derived from the
/// class names ("<type>-<level>"; "empty" maps to none/empty).
pub fn level_axis_names() -> Vec<String> {
    ["empty", "half", "full"].iter().map(|s| s.to_string()).collect()
}

pub fn type_axis_names() -> Vec<String> {
    ["none", "pasta", "rice", "water"].iter().map(|s| s.to_string()).collect()
}

pub fn project_level(taxonomy: &ClassTaxonomy, content: usize) -> usize {
    let name = &taxonomy.content_classes[content];
    if name.ends_with("half") {
        1
    } else if name.ends_with("full") {
        2
    } else {
        0
    }
}

pub fn project_type(taxonomy: &ClassTaxonomy, content: usize) -> usize {
    let name = &taxonomy.content_classes[content];
    if name.starts_with("pasta") {
        1
    } else if name.starts_with("rice") {
        2
    } else if name.starts_with("water") {
        3
    } else {
        0
    }
}

/// The three reports of one evaluation run.
#[derive(Debug, Clone)]
pub struct AxisReports {
    pub combined: EvalReport,
    pub level: EvalReport,
    pub type_only: EvalReport,
    /// Items dropped for missing ground truth.
    pub skipped: usize,
}

/// Score (ground truth, prediction) pairs along all three axes. Items with
/// no ground truth are skipped and counted.
pub fn evaluate_pipeline(
    pairs: &[(Option<usize>, usize)],
    taxonomy: &ClassTaxonomy,
) -> Result<AxisReports, EvalError> {
    let mut labels = Vec::new();
    let mut preds = Vec::new();
    let mut skipped = 0usize;
    for &(truth, pred) in pairs {
        match truth {
            Some(t) => {
                labels.push(t);
                preds.push(pred);
            }
            None => skipped += 1,
        }
    }
    let combined = EvalReport::compute(&preds, &labels, &taxonomy.content_classes)?;
    let level = EvalReport::compute(
        &preds.iter().map(|&p| project_level(taxonomy, p)).collect::<Vec<_>>(),
        &labels.iter().map(|&t| project_level(taxonomy, t)).collect::<Vec<_>>(),
        &level_axis_names(),
    )?;
    let type_only = EvalReport::compute(
        &preds.iter().map(|&p| project_type(taxonomy, p)).collect::<Vec<_>>(),
        &labels.iter().map(|&t| project_type(taxonomy, t)).collect::<Vec<_>>(),
        &type_axis_names(),
    )?;
    Ok(AxisReports { combined, level, type_only, skipped })
}

/// Write the report files: per-axis tables, count and row-normalized
/// confusion grids, and an overall summary quoting weighted F1 as a
/// percentage.
pub fn write_reports(dir: &Path, reports: &AxisReports) -> Result<(), EvalError> {
    std::fs::create_dir_all(dir)?;
    let axes = [
        ("combined", &reports.combined),
        ("level", &reports.level),
        ("type", &reports.type_only),
    ];
    for (axis, report) in axes {
        std::fs::write(dir.join(format!("report_{axis}.txt")), report.text_table(axis))?;
        std::fs::write(dir.join(format!("confusion_{axis}.txt")), report.counts_grid())?;
        std::fs::write(dir.join(format!("confusion_{axis}_norm.txt")), report.normalized_grid())?;
    }
    let mut summary = String::new();
    summary.push_str(&format!("combined weighted_f1 = {:.2}%\n", reports.combined.weighted_f1 * 100.0));
    summary.push_str(&format!("level    weighted_f1 = {:.2}%\n", reports.level.weighted_f1 * 100.0));
    summary.push_str(&format!("type     weighted_f1 = {:.2}%\n", reports.type_only.weighted_f1 * 100.0));
    summary.push_str(&format!("skipped (no ground truth): {}\n", reports.skipped));
    std::fs::write(dir.join("summary.txt"), summary)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Independent brute-force oracle: per class, count TP/FP/FN by direct
    /// scanning, then weight by support.
    fn weighted_f1_oracle(preds: &[usize], labels: &[usize], n: usize) -> f64 {
        let mut weighted = 0.0;
        let mut total = 0.0;
        for class in 0..n {
            let mut tp = 0.0f64;
            let mut fp = 0.0f64;
            let mut fn_ = 0.0f64;
            for (&p, &t) in preds.iter().zip(labels) {
                if p == class && t == class {
                    tp += 1.0;
                } else if p == class {
                    fp += 1.0;
                } else if t == class {
                    fn_ += 1.0;
                }
            }
            let support = tp + fn_;
            let precision = if tp + fp == 0.0 { 0.0 } else { tp / (tp + fp) };
            let recall = if support == 0.0 { 0.0 } else { tp / support };
            let f1 =
                if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
            weighted += support * f1;
            total += support;
        }
        if total == 0.0 {
            0.0
        } else {
            weighted / total
        }
    }

    #[test]
    fn perfect_predictions_score_one() {
        let labels = vec![0, 1, 2, 3, 4, 5, 6, 3, 3];
        assert_eq!(weighted_f1(&labels, &labels, 7).unwrap(), 1.0);
    }

    #[test]
    fn hand_case_half() {
        // each class: P = R = F1 = 0.5, equal support
        let f1 = weighted_f1(&[0, 1, 0, 1], &[0, 0, 1, 1], 2).unwrap();
        assert!((f1 - 0.5).abs() < 1e-15);
    }

    #[test]
    fn constant_predictor_closed_form() {
        // all predictions class 0, labels uniform over 7 classes:
        // F1_0 = 2*(1/7) / (1 + 1/7) = 0.25, other classes 0
        // weighted = 0.25 / 7
        let labels: Vec<usize> = (0..7).collect();
        let preds = vec![0usize; 7];
        let f1 = weighted_f1(&preds, &labels, 7).unwrap();
        assert!((f1 - 0.25 / 7.0).abs() < 1e-12, "got {f1}");
    }

    #[test]
    fn length_mismatch_rejected() {
        assert!(matches!(
            weighted_f1(&[0, 1], &[0], 2),
            Err(EvalError::LengthMismatch { preds: 2, labels: 1 })
        ));
    }

    #[test]
    fn confusion_examples() {
        let m = confusion(&[0, 1, 2], &[0, 1, 2], 3).unwrap();
        assert_eq!(m, vec![1, 0, 0, 0, 1, 0, 0, 0, 1]);

        let m = confusion(&[5], &[2], 7).unwrap();
        assert_eq!(m[2 * 7 + 5], 1);
        assert_eq!(m.iter().sum::<u64>(), 1);
    }

    #[test]
    fn confusion_row_sums_equal_support() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let labels: Vec<usize> = (0..1000).map(|_| rng.gen_range(0..7)).collect();
        let preds: Vec<usize> = (0..1000).map(|_| rng.gen_range(0..7)).collect();
        let m = confusion(&preds, &labels, 7).unwrap();
        for class in 0..7 {
            let row_sum: u64 = m[class * 7..(class + 1) * 7].iter().sum();
            let support = labels.iter().filter(|&&l| l == class).count() as u64;
            assert_eq!(row_sum, support);
        }
    }

    #[test]
    fn projections_decompose_class_names() {
        let t = ClassTaxonomy::default();
        let water_full = t.content_index("water-full").unwrap();
        assert_eq!(project_level(&t, water_full), 2);
        assert_eq!(project_type(&t, water_full), 3);
        let empty = t.content_index("empty").unwrap();
        assert_eq!(project_level(&t, empty), 0);
        assert_eq!(project_type(&t, empty), 0);
        let pasta_half = t.content_index("pasta-half").unwrap();
        assert_eq!(project_level(&t, pasta_half), 1);
        assert_eq!(project_type(&t, pasta_half), 1);
    }

    #[test]
    fn combined_correct_implies_axis_correct() {
        use rand::{Rng, SeedableRng};
        let t = ClassTaxonomy::default();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let pairs: Vec<(Option<usize>, usize)> =
            (0..500).map(|_| (Some(rng.gen_range(0..7)), rng.gen_range(0..7))).collect();
        for &(truth, pred) in &pairs {
            let truth = truth.unwrap();
            if pred == truth {
                assert_eq!(project_level(&t, pred), project_level(&t, truth));
                assert_eq!(project_type(&t, pred), project_type(&t, truth));
            }
        }
        // aggregated: combined accuracy <= both marginal accuracies
        let reports = evaluate_pipeline(&pairs, &t).unwrap();
        assert!(reports.combined.accuracy() <= reports.level.accuracy() + 1e-12);
        assert!(reports.combined.accuracy() <= reports.type_only.accuracy() + 1e-12);
    }

    #[test]
    fn skipped_items_counted() {
        let t = ClassTaxonomy::default();
        let pairs = vec![(Some(1), 1), (None, 3), (Some(2), 2), (None, 0)];
        let reports = evaluate_pipeline(&pairs, &t).unwrap();
        assert_eq!(reports.skipped, 2);
        assert_eq!(reports.combined.confusion.iter().sum::<u64>(), 2);
    }

    #[test]
    fn report_files_written_and_deterministic() {
        let t = ClassTaxonomy::default();
        let pairs: Vec<(Option<usize>, usize)> =
            (0..50).map(|i| (Some(i % 7), (i * 3) % 7)).collect();
        let reports = evaluate_pipeline(&pairs, &t).unwrap();
        let dir1 = tempfile::tempdir().unwrap();
        let dir2 = tempfile::tempdir().unwrap();
        write_reports(dir1.path(), &reports).unwrap();
        write_reports(dir2.path(), &reports).unwrap();
        for name in [
            "report_combined.txt",
            "report_level.txt",
            "report_type.txt",
            "confusion_combined.txt",
            "confusion_combined_norm.txt",
            "summary.txt",
        ] {
            let a = std::fs::read_to_string(dir1.path().join(name)).unwrap();
            let b = std::fs::read_to_string(dir2.path().join(name)).unwrap();
            assert!(!a.is_empty());
            assert_eq!(a, b, "file {name} differs between runs");
        }
    }

    /// Recomputing the weighted F1 from the emitted confusion matrix must
    /// reproduce the reported value.
    #[test]
    fn f1_recomputable_from_confusion() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let labels: Vec<usize> = (0..300).map(|_| rng.gen_range(0..7)).collect();
        let preds: Vec<usize> = labels
            .iter()
            .map(|&l| if rng.gen_bool(0.7) { l } else { rng.gen_range(0..7) })
            .collect();
        let names: Vec<String> = (0..7).map(|i| format!("c{i}")).collect();
        let report = EvalReport::compute(&preds, &labels, &names).unwrap();

        // recompute from the count grid alone
        let n = 7;
        let mut weighted = 0.0;
        let mut total = 0.0;
        for c in 0..n {
            let tp = report.confusion[c * n + c] as f64;
            let support: f64 = (0..n).map(|j| report.confusion[c * n + j] as f64).sum();
            let predicted: f64 = (0..n).map(|i| report.confusion[i * n + c] as f64).sum();
            let p = if predicted == 0.0 { 0.0 } else { tp / predicted };
            let r = if support == 0.0 { 0.0 } else { tp / support };
            let f1 = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
            weighted += support * f1;
            total += support;
        }
        assert!((report.weighted_f1 - weighted / total).abs() < 1e-9);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        // implementation matches the brute-force oracle exactly
        #[test]
        fn matches_oracle(
            pairs in proptest::collection::vec((0usize..7, 0usize..7), 1..200),
        ) {
            let preds: Vec<usize> = pairs.iter().map(|p| p.0).collect();
            let labels: Vec<usize> = pairs.iter().map(|p| p.1).collect();
            let ours = weighted_f1(&preds, &labels, 7).unwrap();
            let oracle = weighted_f1_oracle(&preds, &labels, 7);
            prop_assert!((ours - oracle).abs() <= 1e-12);
        }

        // jointly permuting (pred, label) pairs leaves the score unchanged
        #[test]
        fn permutation_invariant(
            pairs in proptest::collection::vec((0usize..5, 0usize..5), 2..100),
            seed in 0u64..1000,
        ) {
            use rand::{seq::SliceRandom, SeedableRng};
            let mut shuffled = pairs.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let score = |ps: &[(usize, usize)]| {
                let preds: Vec<usize> = ps.iter().map(|p| p.0).collect();
                let labels: Vec<usize> = ps.iter().map(|p| p.1).collect();
                weighted_f1(&preds, &labels, 5).unwrap()
            };
            prop_assert_eq!(score(&pairs), score(&shuffled));
        }
    }
}
