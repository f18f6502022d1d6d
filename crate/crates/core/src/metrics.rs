//! Classic and consistency-weighted precision, recall and F-measure.
//!
//! Each ground-truth inlier is weighted by its consistency's softmax weight
//! `exp(-N_i / N_inlier)`, normalized over consistencies, so small
//! consistencies count more. False positives carry the largest inlier
//! weight.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Label, MatchResult, TruthLabel};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum FForm {
    /// `2 P R / (P + R)`.
    #[default]
    Harmonic,
    /// `P R / (P + R)`, without the factor 2.
    Literal,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConsistencyWeights {
    /// Inlier count per consistency id.
    pub counts: Vec<usize>,
    pub inlier: Vec<f64>,
    pub outlier: f64,
}

pub fn consistency_weights(truth: &[TruthLabel]) -> Result<ConsistencyWeights> {
    let k = truth
        .iter()
        .filter_map(|l| match l {
            TruthLabel::Consistency(c) => Some(*c as usize + 1),
            _ => None,
        })
        .max()
        .unwrap_or(0);
    let mut counts = vec![0usize; k];
    for l in truth {
        if let TruthLabel::Consistency(c) = l {
            counts[*c as usize] += 1;
        }
    }
    let total: usize = counts.iter().sum();
    if total == 0 {
        return Err(Error::Degenerate("weights need at least one ground-truth inlier"));
    }
    let raw: Vec<f64> = counts.iter().map(|&n| (-(n as f64) / total as f64).exp()).collect();
    let z: f64 = raw.iter().sum();
    let inlier: Vec<f64> = raw.iter().map(|w| w / z).collect();
    let outlier = inlier.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(ConsistencyWeights {
        counts,
        inlier,
        outlier,
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Counts {
    pub tp: f64,
    pub fp: f64,
    pub fn_: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    pub w_precision: f64,
    pub w_recall: f64,
    pub w_f_measure: f64,
    /// `(id, N_i, w_i)` per ground-truth consistency.
    pub per_consistency: Vec<(u32, usize, f64)>,
    pub w_outlier: f64,
    pub counts: Counts,
    pub weighted: Counts,
    /// Set when some ratio had a zero denominator and was reported as 0.
    pub degenerate: bool,
    /// Fraction of true positives whose predicted cluster maps to their
    /// ground-truth consistency under the majority mapping.
    pub cluster_purity: f64,
    pub k_pred: usize,
    pub k_true: usize,
}

fn ratio(num: f64, den: f64, degenerate: &mut bool) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        *degenerate = true;
        0.0
    }
}

fn f_measure(p: f64, r: f64, form: FForm, degenerate: &mut bool) -> f64 {
    let scale = match form {
        FForm::Harmonic => 2.0,
        FForm::Literal => 1.0,
    };
    ratio(scale * p * r, p + r, degenerate)
}

/// Scores `result` against `truth`, aligned by correspondence index:
/// `indices[k]` carries `truth[k]`. Correspondences with unknown truth are
/// ignored.
pub fn weighted_prf<T>(
    result: &MatchResult<T>,
    indices: &[u64],
    truth: &[TruthLabel],
    form: FForm,
) -> Result<EvalReport> {
    if indices.len() != truth.len() {
        return Err(Error::invalid(None, "truth and index lists differ in length"));
    }
    let w = consistency_weights(truth)?;
    let predicted: HashMap<u64, Label> = result.assignments.iter().map(|a| (a.index, a.label)).collect();

    let mut counts = Counts::default();
    let mut weighted = Counts::default();
    let mut overlap: HashMap<(u32, u32), usize> = HashMap::new();
    for (&index, &t) in indices.iter().zip(truth) {
        let label = *predicted
            .get(&index)
            .ok_or_else(|| Error::invalid(Some(index), "no predicted label for ground-truth correspondence"))?;
        match (t, label.is_inlier()) {
            (TruthLabel::Unknown, _) => {}
            (TruthLabel::Consistency(c), true) => {
                counts.tp += 1.0;
                weighted.tp += w.inlier[c as usize];
                if let Label::Cluster(p) = label {
                    *overlap.entry((p, c)).or_default() += 1;
                }
            }
            (TruthLabel::Consistency(c), false) => {
                counts.fn_ += 1.0;
                weighted.fn_ += w.inlier[c as usize];
            }
            (TruthLabel::Outlier, true) => {
                counts.fp += 1.0;
                weighted.fp += w.outlier;
            }
            (TruthLabel::Outlier, false) => {}
        }
    }

    let mut degenerate = false;
    let precision = ratio(counts.tp, counts.tp + counts.fp, &mut degenerate);
    let recall = ratio(counts.tp, counts.tp + counts.fn_, &mut degenerate);
    let f = f_measure(precision, recall, form, &mut degenerate);
    let w_precision = ratio(weighted.tp, weighted.tp + weighted.fp, &mut degenerate);
    let w_recall = ratio(weighted.tp, weighted.tp + weighted.fn_, &mut degenerate);
    let w_f = f_measure(w_precision, w_recall, form, &mut degenerate);

    let mut best_per_cluster: HashMap<u32, usize> = HashMap::new();
    for (&(p, _), &n) in &overlap {
        let e = best_per_cluster.entry(p).or_default();
        *e = (*e).max(n);
    }
    let matched: usize = best_per_cluster.values().sum();
    let purity = if counts.tp > 0.0 {
        matched as f64 / counts.tp
    } else {
        0.0
    };

    Ok(EvalReport {
        precision,
        recall,
        f_measure: f,
        w_precision,
        w_recall,
        w_f_measure: w_f,
        per_consistency: w
            .counts
            .iter()
            .zip(&w.inlier)
            .enumerate()
            .map(|(i, (&n, &wi))| (i as u32, n, wi))
            .collect(),
        w_outlier: w.outlier,
        counts,
        weighted,
        degenerate,
        cluster_purity: purity,
        k_pred: result.homographies.len(),
        k_true: w.counts.len(),
    })
}
