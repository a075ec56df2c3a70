//! Retrieval and classification scores.

use alloc::vec::Vec;

/// `2PR / (P + R)`, or 0 when `P + R = 0`.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetrievalScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Precision and recall of a predicted index set against ground-truth indices.
/// Precision is 0 when nothing is predicted; recall is 0 when the truth is empty.
pub fn retrieval_score(predicted: &[usize], truth: &[usize]) -> RetrievalScore {
    let mut p: Vec<usize> = predicted.to_vec();
    let mut t: Vec<usize> = truth.to_vec();
    p.sort_unstable();
    p.dedup();
    t.sort_unstable();
    t.dedup();
    let hits = p.iter().filter(|i| t.binary_search(i).is_ok()).count() as f64;
    let precision = if p.is_empty() { 0.0 } else { hits / p.len() as f64 };
    let recall = if t.is_empty() { 0.0 } else { hits / t.len() as f64 };
    RetrievalScore { precision, recall, f1: f1_score(precision, recall) }
}

/// Binary confusion counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn record(&mut self, actual: bool, predicted: bool) {
        match (actual, predicted) {
            (true, true) => self.tp += 1,
            (false, true) => self.fp += 1,
            (false, false) => self.tn += 1,
            (true, false) => self.fn_ += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn accuracy(&self) -> f64 {
        if self.total() == 0 {
            0.0
        } else {
            (self.tp + self.tn) as f64 / self.total() as f64
        }
    }

    /// Mean of the true-positive and true-negative rates over the classes present.
    pub fn balanced_accuracy(&self) -> f64 {
        let pos = self.tp + self.fn_;
        let neg = self.tn + self.fp;
        let mut rates = Vec::new();
        if pos > 0 {
            rates.push(self.tp as f64 / pos as f64);
        }
        if neg > 0 {
            rates.push(self.tn as f64 / neg as f64);
        }
        if rates.is_empty() {
            0.0
        } else {
            rates.iter().sum::<f64>() / rates.len() as f64
        }
    }
}

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_retrieval_scores_one() {
        let s = retrieval_score(&[4, 9, 2], &[2, 4, 9]);
        assert_eq!((s.precision, s.recall, s.f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn nothing_predicted_scores_zero() {
        let s = retrieval_score(&[], &[1, 2, 3]);
        assert_eq!((s.precision, s.recall, s.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn partial_hits() {
        let s = retrieval_score(&[1, 2, 7, 8], &[1, 2, 3]);
        assert_eq!(s.precision, 0.5);
        assert!((s.recall - 2.0 / 3.0).abs() < 1e-15);
        assert!((s.f1 - 4.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn confusion_rates() {
        let mut c = Confusion::default();
        for (a, p) in [(true, true), (true, false), (false, false), (false, false), (false, true)] {
            c.record(a, p);
        }
        assert_eq!(c.accuracy(), 0.6);
        assert!((c.balanced_accuracy() - (0.5 + 2.0 / 3.0) / 2.0).abs() < 1e-15);
        let mut only_neg = Confusion::default();
        only_neg.record(false, false);
        assert_eq!(only_neg.balanced_accuracy(), 1.0);
    }
}
