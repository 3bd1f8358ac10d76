use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::synthdata::argmax;
use crate::tensorcore::Tensor;

pub const DEFAULT_ECE_BINS: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EceBin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
    /// 0 for empty bins.
    pub accuracy: f64,
    pub confidence: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EceReport {
    pub ece: f64,
    pub bins: Vec<EceBin>,
}

/// Expected calibration error over equal-width bins of the top-class probability.
pub fn compute_ece(probs: &Tensor, labels: &[usize], num_bins: usize) -> Result<EceReport> {
    if num_bins == 0 {
        return Err(Error::Invalid("ECE needs at least one bin".into()));
    }
    if probs.ndim() != 2 || probs.batch() != labels.len() {
        return Err(Error::shape(
            "compute_ece",
            format!("{:?} probabilities for {} labels", probs.shape(), labels.len()),
        ));
    }
    let k = probs.sample_len();
    let mut count = vec![0usize; num_bins];
    let mut hits = vec![0usize; num_bins];
    let mut conf = vec![0f64; num_bins];
    for (r, (row, &y)) in probs.data().chunks(k).zip(labels).enumerate() {
        let sum: f64 = row.iter().map(|&p| p as f64).sum();
        if (sum - 1.0).abs() > 1e-4 {
            return Err(Error::Invalid(format!("probability row {r} sums to {sum}")));
        }
        let pred = argmax(row);
        let c = row[pred] as f64;
        let b = ((c * num_bins as f64) as usize).min(num_bins - 1);
        count[b] += 1;
        hits[b] += (pred == y) as usize;
        conf[b] += c;
    }
    let n = labels.len().max(1) as f64;
    let mut ece = 0.0;
    let bins = (0..num_bins)
        .map(|b| {
            let (acc, cf) = if count[b] == 0 {
                (0.0, 0.0)
            } else {
                (hits[b] as f64 / count[b] as f64, conf[b] / count[b] as f64)
            };
            ece += count[b] as f64 / n * (acc - cf).abs();
            EceBin {
                lower: b as f64 / num_bins as f64,
                upper: (b + 1) as f64 / num_bins as f64,
                count: count[b],
                accuracy: acc,
                confidence: cf,
            }
        })
        .collect();
    Ok(EceReport { ece, bins })
}
