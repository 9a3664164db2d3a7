//! Feature ranking by the weights of a trained one-vs-rest separator.

use std::cmp::Ordering;

use crate::corpus::Label;
use crate::error::{Error, Result};
use crate::features::Vocabulary;
use crate::linear_svm::LinearModel;

#[derive(Debug, Clone, PartialEq)]
pub struct RankedFeature {
    pub rank: usize,
    pub feature: String,
    pub weight: f64,
}

/// The `count` features with the largest positive weight for `class`, or
/// with the most negative weight when `negative` is set. Ties are broken by
/// feature string.
pub fn top_features(model: &LinearModel, vocab: &Vocabulary, class: Label, count: usize, negative: bool) -> Result<Vec<RankedFeature>> {
    if count == 0 {
        return Err(Error::OutOfRange {
            what: "feature count",
            value: 0,
            expected: "at least 1",
        });
    }
    if model.dim() != vocab.len() {
        return Err(Error::DimensionMismatch {
            expected: vocab.len(),
            found: model.dim(),
        });
    }
    let sign = if negative { -1.0 } else { 1.0 };
    let mut candidates: Vec<(f64, &str)> = model
        .weights(class)
        .iter()
        .enumerate()
        .map(|(i, &w)| (sign * w, vocab.feature(i).expect("dimension checked")))
        .filter(|&(w, _)| w > 0.0)
        .collect();
    candidates.sort_by(|a, b| match b.0.total_cmp(&a.0) {
        Ordering::Equal => a.1.cmp(b.1),
        other => other,
    });
    Ok(candidates
        .into_iter()
        .take(count)
        .enumerate()
        .map(|(i, (w, f))| RankedFeature {
            rank: i + 1,
            feature: f.to_string(),
            weight: sign * w,
        })
        .collect())
}
