//! Exact-match trigger span scoring.

use std::collections::HashSet;

use crate::corpus::TriggerSpan;
use crate::error::{Error, Result};

/// Span counts with precision, recall and F1 as percentages.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Score {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

fn percent(num: usize, den: usize) -> f64 {
    if den > 0 {
        100.0 * num as f64 / den as f64
    } else {
        0.0
    }
}

impl Score {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let precision = percent(tp, tp + fp);
        let recall = percent(tp, tp + fn_);
        Score {
            tp,
            fp,
            fn_,
            precision,
            recall,
            f1: f1(precision, recall),
        }
    }

    /// A score known only by its rates, e.g. a published result.
    pub fn from_rates(precision: f64, recall: f64) -> Self {
        Score {
            precision,
            recall,
            f1: f1(precision, recall),
            ..Score::default()
        }
    }

    pub fn predicted(&self) -> usize {
        self.tp + self.fp
    }

    pub fn gold(&self) -> usize {
        self.tp + self.fn_
    }
}

/// A prediction is correct when some gold span in the same sentence has the
/// same start and length.
pub fn score_spans(pred: &[Vec<TriggerSpan>], gold: &[Vec<TriggerSpan>]) -> Result<Score> {
    if pred.len() != gold.len() {
        return Err(Error::Dimension(format!(
            "{} predicted sentences but {} gold sentences",
            pred.len(),
            gold.len()
        )));
    }
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (p, g) in pred.iter().zip(gold) {
        let mut unmatched: HashSet<TriggerSpan> = g.iter().copied().collect();
        let gold_count = unmatched.len();
        let mut hits = 0;
        for span in p {
            if unmatched.remove(span) {
                hits += 1;
            } else {
                fp += 1;
            }
        }
        tp += hits;
        fn_ += gold_count - hits;
    }
    Ok(Score::from_counts(tp, fp, fn_))
}

/// Rounds half-up to two decimals, for non-negative values.
pub fn round2(x: f64) -> String {
    let cents = (x * 100.0 + 0.5 + 1e-9).floor() as u64;
    format!("{}.{:02}", cents / 100, cents % 100)
}

/// `label  R=<r> P=<p> F1=<f>`: recall first, two decimals.
pub fn score_report(score: &Score, label: &str) -> String {
    format!(
        "{label}  R={} P={} F1={}",
        round2(score.recall),
        round2(score.precision),
        round2(score.f1)
    )
}
