//! Analogy-making: infer a mapping code from a template pair and apply
//! it to unseen n-grams, scoring the generated counterparts against
//! ground truth when available.

use crate::error::{Error, Result};
use crate::gae::GaeModel;
use crate::pianoroll::{decode, encode, BitVec, NGram, NGRAM_BITS};

/// Default binarization threshold for generated probabilities.
pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone)]
pub struct AnalogyResult {
    pub source: NGram,
    /// Generated cell probabilities, length 520.
    pub probs: Vec<f64>,
    /// `probs` binarized at the threshold.
    pub generated: NGram,
    pub truth: Option<NGram>,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// The mapping code of a template pair: `m = map(x, y)`, uncorrupted.
pub fn infer_mapping(model: &GaeModel, template_x: &BitVec, template_y: &BitVec) -> Result<Vec<f64>> {
    model.map(template_x, template_y)
}

/// Applies a transferred mapping code to a new input:
/// `y~ = sigma(V^T((W^T m) . (U x)))`.
pub fn apply_mapping(model: &GaeModel, m: &[f64], x_new: &BitVec) -> Result<Vec<f64>> {
    model.reconstruct_y(m, x_new)
}

pub fn threshold_probs(probs: &[f64], threshold: f64) -> Result<NGram> {
    if probs.len() != NGRAM_BITS {
        return Err(Error::ShapeMismatch(format!(
            "expected {NGRAM_BITS} probabilities, got {}",
            probs.len()
        )));
    }
    let mut bits = BitVec::zeros(NGRAM_BITS);
    for (i, &p) in probs.iter().enumerate() {
        bits.set(i, p >= threshold);
    }
    decode(&bits)
}

/// Cellwise precision / recall / F1 of the thresholded prediction.
///
/// Edge conventions: with no predicted cells, precision is 1 (nothing
/// wrongly introduced); with an empty truth, recall is 1 (nothing
/// missed); F1 is 0 when precision + recall is 0.
pub fn score(probs: &[f64], truth: &NGram, threshold: f64) -> Result<(f64, f64, f64)> {
    if !(0.0 < threshold && threshold < 1.0) {
        return Err(Error::InvalidArgument(format!("threshold {threshold} outside (0,1)")));
    }
    let generated = threshold_probs(probs, threshold)?;
    let mut tp = 0u32;
    let mut fp = 0u32;
    let mut fn_ = 0u32;
    for i in 0..NGRAM_BITS {
        let (row, t) = (i / 8, i % 8);
        match (generated.get(row, t), truth.get(row, t)) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    let precision = if tp + fp == 0 { 1.0 } else { tp as f64 / (tp + fp) as f64 };
    let recall = if tp + fn_ == 0 { 1.0 } else { tp as f64 / (tp + fn_) as f64 };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok((precision, recall, f1))
}

/// Runs the full analogy protocol: one inferred template mapping applied
/// to each target, with scores where ground truth is supplied (targets
/// without truth get precision/recall/F1 of NaN).
pub fn analogize(
    model: &GaeModel,
    template_x: &NGram,
    template_y: &NGram,
    targets: &[(NGram, Option<NGram>)],
    threshold: f64,
) -> Result<Vec<AnalogyResult>> {
    let m = infer_mapping(model, &encode(template_x), &encode(template_y))?;
    targets
        .iter()
        .map(|(source, truth)| {
            let probs = apply_mapping(model, &m, &encode(source))?;
            let generated = threshold_probs(&probs, threshold)?;
            let (precision, recall, f1) = match truth {
                Some(t) => score(&probs, t, threshold)?,
                None => (f64::NAN, f64::NAN, f64::NAN),
            };
            Ok(AnalogyResult {
                source: source.clone(),
                probs,
                generated,
                truth: truth.clone(),
                precision,
                recall,
                f1,
            })
        })
        .collect()
}

/// Per-sample scores as CSV; NaNs render as empty fields.
pub fn scores_csv(results: &[AnalogyResult]) -> String {
    let mut out = String::from("index,precision,recall,f1\n");
    let field = |v: f64| if v.is_nan() { String::new() } else { format!("{v}") };
    for (i, r) in results.iter().enumerate() {
        out.push_str(&format!(
            "{i},{},{},{}\n",
            field(r.precision),
            field(r.recall),
            field(r.f1)
        ));
    }
    out
}

/// Mean precision / recall / F1 over results that carry ground truth.
pub fn mean_scores(results: &[AnalogyResult]) -> Option<(f64, f64, f64)> {
    let scored: Vec<&AnalogyResult> = results.iter().filter(|r| !r.f1.is_nan()).collect();
    if scored.is_empty() {
        return None;
    }
    let n = scored.len() as f64;
    Some((
        scored.iter().map(|r| r.precision).sum::<f64>() / n,
        scored.iter().map(|r| r.recall).sum::<f64>() / n,
        scored.iter().map(|r| r.f1).sum::<f64>() / n,
    ))
}
