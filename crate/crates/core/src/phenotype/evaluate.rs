use std::sync::Arc;

use super::decode::decode;
use super::genotype::{alphabet, Genotype};
use crate::error::{Error, Result};
use crate::synthdata::{count_correct, Dataset, Split};
use crate::stitcher::Supernetwork;
use crate::tensorcore::{softmax_in_place, Tensor};

#[derive(Clone, Debug, PartialEq)]
pub struct EvalResult {
    pub accuracy: f64,
    pub madds: u64,
    pub active_mask: Vec<bool>,
    /// Objectives were inherited from a parent rather than computed.
    pub skipped: bool,
    /// `[N, K]` class probabilities, kept only on request.
    pub probabilities: Option<Tensor>,
}

/// Something that scores genotypes. Implementations must be deterministic.
pub trait Evaluator: Send + Sync {
    fn genotype_len(&self) -> usize;

    fn alphabet(&self) -> Vec<u8> {
        alphabet(self.genotype_len())
    }

    /// Multiply-adds of the full ensemble, the cost normalizer.
    fn reference_madds(&self) -> u64;

    fn evaluate(&self, g: &Genotype) -> Result<EvalResult>;
}

/// Scores subnetworks of a supernetwork on a fixed prefix of one split.
#[derive(Clone)]
pub struct SupernetEvaluator {
    supernet: Arc<Supernetwork>,
    x: Tensor,
    labels: Vec<usize>,
    keep_probabilities: bool,
    ensemble_madds: u64,
}

const CHUNK: usize = 256;

impl SupernetEvaluator {
    pub fn new(supernet: Arc<Supernetwork>, ds: &Dataset, split: Split, eval_limit: Option<usize>) -> Result<Self> {
        if supernet.task() != &ds.task() {
            return Err(Error::Config(format!(
                "supernetwork task {:?} does not match dataset {}",
                supernet.task(),
                ds.name
            )));
        }
        let (x, labels) = ds.split_data(split, eval_limit);
        if labels.is_empty() {
            return Err(Error::Config(format!("split {split:?} of {} is empty", ds.name)));
        }
        let ensemble = Genotype::reference(supernet.genotype_len(), 2);
        let ensemble_madds = decode(&supernet, &ensemble)?.graph.network_madds();
        Ok(SupernetEvaluator {
            supernet,
            x,
            labels,
            keep_probabilities: false,
            ensemble_madds,
        })
    }

    pub fn keep_probabilities(mut self, keep: bool) -> Self {
        self.keep_probabilities = keep;
        self
    }

    pub fn supernet(&self) -> &Supernetwork {
        &self.supernet
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn samples(&self) -> usize {
        self.labels.len()
    }
}

impl Evaluator for SupernetEvaluator {
    fn genotype_len(&self) -> usize {
        self.supernet.genotype_len()
    }

    fn reference_madds(&self) -> u64 {
        self.ensemble_madds
    }

    fn evaluate(&self, g: &Genotype) -> Result<EvalResult> {
        let d = decode(&self.supernet, g)?;
        let n = self.labels.len();
        let mut correct = 0;
        let mut probs: Vec<Tensor> = Vec::new();
        for start in (0..n).step_by(CHUNK) {
            let end = (start + CHUNK).min(n);
            let logits = d.graph.forward(&self.x.slice_batch(start, end))?;
            correct += count_correct(&logits, &self.labels[start..end]);
            if self.keep_probabilities {
                let mut p = logits;
                let k = p.sample_len();
                p.data_mut().chunks_mut(k).for_each(softmax_in_place);
                probs.push(p);
            }
        }
        Ok(EvalResult {
            accuracy: correct as f64 / n as f64,
            madds: d.graph.network_madds(),
            active_mask: d.active_mask,
            skipped: false,
            probabilities: if self.keep_probabilities {
                Some(Tensor::stack_batches(&probs)?)
            } else {
                None
            },
        })
    }
}

/// One-off evaluation of a genotype on the first `eval_limit` samples of a split.
pub fn evaluate(
    supernet: &Supernetwork,
    g: &Genotype,
    ds: &Dataset,
    split: Split,
    eval_limit: Option<usize>,
) -> Result<EvalResult> {
    SupernetEvaluator::new(Arc::new(supernet.clone()), ds, split, eval_limit)?.evaluate(g)
}

/// Reuses `parent_result` when every changed gene belongs to a switch that was
/// inactive for the parent.
pub fn maybe_skip(parent_result: &EvalResult, parent: &Genotype, child: &Genotype) -> Result<Option<EvalResult>> {
    if parent_result.active_mask.len() != parent.len() {
        return Err(Error::Genotype(format!(
            "active mask of length {} for a genotype of length {}",
            parent_result.active_mask.len(),
            parent.len()
        )));
    }
    let changed = parent.diff(child)?;
    if changed.iter().any(|&i| parent_result.active_mask[i]) {
        return Ok(None);
    }
    Ok(Some(EvalResult {
        skipped: true,
        ..parent_result.clone()
    }))
}
