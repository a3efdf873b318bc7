//! Classification evaluation: confusion matrix, accuracy, per-class
//! precision/recall/F1, macro F1.
//!
//! Macro F1 averages over the classes that actually occur (nonzero true
//! row or predicted column); classes absent from both are excluded, which
//! keeps the measure informative under heavy label skew.

use crate::error::{Error, Result};
use crate::nn::predict;
use crate::{Dataset, MlpModel};

/// Count matrix: rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn count(&self, true_class: usize, predicted: usize) -> u64 {
        self.counts[true_class * self.classes + predicted]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn row_sum(&self, true_class: usize) -> u64 {
        (0..self.classes).map(|p| self.count(true_class, p)).sum()
    }

    pub fn col_sum(&self, predicted: usize) -> u64 {
        (0..self.classes).map(|t| self.count(t, predicted)).sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes).map(|c| self.count(c, c)).sum()
    }
}

/// Tallies (true, predicted) pairs into a `classes x classes` matrix.
pub fn confusion(
    true_labels: &[usize],
    predicted_labels: &[usize],
    classes: usize,
) -> Result<ConfusionMatrix> {
    if true_labels.len() != predicted_labels.len() {
        return Err(Error::Evaluation(format!(
            "{} true labels vs {} predictions",
            true_labels.len(),
            predicted_labels.len()
        )));
    }
    let mut counts = vec![0u64; classes * classes];
    for (&t, &p) in true_labels.iter().zip(predicted_labels) {
        if t >= classes || p >= classes {
            return Err(Error::Evaluation(format!(
                "label pair ({t}, {p}) out of range for {classes} classes"
            )));
        }
        counts[t * classes + p] += 1;
    }
    Ok(ConfusionMatrix { classes, counts })
}

/// Precision, recall, and F1 of one class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Evaluation fragment shared by every reporting path.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub per_class: Vec<ClassMetrics>,
}

/// Per-class precision/recall/F1 plus the macro average over the classes
/// with a nonzero row or column.
pub fn precision_recall_f1(cm: &ConfusionMatrix) -> Evaluation {
    let mut per_class = Vec::with_capacity(cm.classes());
    let mut macro_sum = 0.0;
    let mut macro_count = 0usize;
    for c in 0..cm.classes() {
        let row = cm.row_sum(c);
        let col = cm.col_sum(c);
        let hit = cm.count(c, c) as f64;
        let precision = if col > 0 { hit / col as f64 } else { 0.0 };
        let recall = if row > 0 { hit / row as f64 } else { 0.0 };
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        per_class.push(ClassMetrics {
            precision,
            recall,
            f1,
        });
        if row > 0 || col > 0 {
            macro_sum += f1;
            macro_count += 1;
        }
    }
    let total = cm.total();
    Evaluation {
        accuracy: if total > 0 {
            cm.trace() as f64 / total as f64
        } else {
            0.0
        },
        macro_f1: if macro_count > 0 {
            macro_sum / macro_count as f64
        } else {
            0.0
        },
        per_class,
    }
}

/// Predicts over the held-out set and summarizes the confusion counts.
pub fn evaluate(model: &MlpModel, test: &Dataset) -> Result<Evaluation> {
    if test.is_empty() {
        return Err(Error::Evaluation("empty test set".to_string()));
    }
    let predictions = predict(model, &test.features)?;
    let cm = confusion(&test.labels, &predictions, test.num_classes)?;
    Ok(precision_recall_f1(&cm))
}

/// Full per-round record as persisted to CSV by the experiment runner.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub strategy: String,
    pub setting: String,
    pub round: usize,
    pub sim_time: f64,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub per_class: Vec<ClassMetrics>,
}

impl MetricsRecord {
    /// Column order: `strategy,setting,round,sim_time,accuracy,macro_f1`,
    /// then `precision_c,recall_c,f1_c` for each class.
    pub fn csv_header(classes: usize) -> String {
        let mut header = String::from("strategy,setting,round,sim_time,accuracy,macro_f1");
        for c in 0..classes {
            header.push_str(&format!(",precision_{c},recall_{c},f1_{c}"));
        }
        header
    }

    pub fn to_csv_row(&self) -> String {
        let mut row = format!(
            "{},{},{},{},{},{}",
            self.strategy, self.setting, self.round, self.sim_time, self.accuracy, self.macro_f1
        );
        for class in &self.per_class {
            row.push_str(&format!(",{},{},{}", class.precision, class.recall, class.f1));
        }
        row
    }
}
