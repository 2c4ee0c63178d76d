//! Per-step action precision and recall.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::stream::Action;

/// Confusion counts indexed `[truth][pred]` in [`Action::ALL`] order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub counts: [[u64; 4]; 4],
}

impl Confusion {
    pub fn from_pairs(pred: &[Action], truth: &[Action]) -> Self {
        let mut c = Self::default();
        for (p, t) in pred.iter().zip(truth) {
            c.counts[t.index()][p.index()] += 1;
        }
        c
    }

    pub fn merge(&mut self, other: &Confusion) {
        for (row, orow) in self.counts.iter_mut().zip(&other.counts) {
            for (v, o) in row.iter_mut().zip(orow) {
                *v += o;
            }
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn true_positives(&self, a: Action) -> u64 {
        self.counts[a.index()][a.index()]
    }

    pub fn predicted(&self, a: Action) -> u64 {
        self.counts.iter().map(|row| row[a.index()]).sum()
    }

    pub fn actual(&self, a: Action) -> u64 {
        self.counts[a.index()].iter().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassScore {
    pub precision: f64,
    pub recall: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionReport {
    /// `None` for a class absent from both prediction and truth.
    pub per_class: BTreeMap<Action, Option<ClassScore>>,
    /// Mean over the defined surgical actions; background is excluded.
    pub macro_precision: Option<f64>,
    pub macro_recall: Option<f64>,
    /// Fraction of steps where prediction equals truth.
    pub accuracy: Option<f64>,
    pub steps: u64,
    pub confusion: Confusion,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl ActionReport {
    pub fn from_confusion(confusion: Confusion) -> Self {
        let per_class: BTreeMap<Action, Option<ClassScore>> = Action::ALL
            .into_iter()
            .map(|a| {
                let (pred, actual) = (confusion.predicted(a), confusion.actual(a));
                let score = (pred + actual > 0).then(|| ClassScore {
                    precision: ratio(confusion.true_positives(a), pred),
                    recall: ratio(confusion.true_positives(a), actual),
                    support: actual,
                });
                (a, score)
            })
            .collect();
        let defined: Vec<ClassScore> = Action::SURGICAL
            .iter()
            .filter_map(|a| per_class[a])
            .collect();
        let mean = |f: fn(&ClassScore) -> f64| {
            (!defined.is_empty()).then(|| defined.iter().map(f).sum::<f64>() / defined.len() as f64)
        };
        let undefined: Vec<&str> = per_class
            .iter()
            .filter(|(_, s)| s.is_none())
            .map(|(a, _)| a.as_str())
            .collect();
        if !undefined.is_empty() {
            tracing::warn!(?undefined, "classes absent from prediction and truth");
        }
        let correct: u64 = Action::ALL.iter().map(|&a| confusion.true_positives(a)).sum();
        let steps = confusion.total();
        Self {
            per_class,
            macro_precision: mean(|s| s.precision),
            macro_recall: mean(|s| s.recall),
            accuracy: (steps > 0).then(|| correct as f64 / steps as f64),
            steps,
            confusion,
        }
    }
}

/// Precision and recall of per-step labels. Sequences of unequal length are
/// truncated to the shorter with a warning.
pub fn action_precision_recall(pred: &[Action], truth: &[Action]) -> ActionReport {
    if pred.len() != truth.len() {
        tracing::warn!(pred = pred.len(), truth = truth.len(), "label sequences truncated to shorter");
    }
    ActionReport::from_confusion(Confusion::from_pairs(pred, truth))
}
