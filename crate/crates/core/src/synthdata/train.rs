use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::{Dataset, Split};
use crate::error::{Error, Result};
use crate::netgraph::NetworkGraph;
use crate::tensorcore::{adam_step, softmax_in_place, AdamState, Tensor};

/// Minibatch Adam on softmax cross-entropy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr: f32,
    pub batch_size: usize,
    /// Training samples consumed in total; the step count is `ceil(budget / batch_size)`.
    pub sample_budget: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 1e-3,
            batch_size: 32,
            sample_budget: 20_000,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) || self.batch_size == 0 {
            return Err(Error::Config("learning rate and batch size must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub graph: NetworkGraph,
    pub train_accuracy: f64,
    pub validation_accuracy: f64,
    /// Mean minibatch loss per step.
    pub losses: Vec<f32>,
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax(row: &[f32]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Number of rows of `[B, K]` logits whose argmax equals the label.
pub fn count_correct(logits: &Tensor, labels: &[usize]) -> usize {
    let k = logits.sample_len();
    logits
        .data()
        .chunks(k)
        .zip(labels)
        .filter(|(row, &y)| argmax(row) == y)
        .count()
}

const EVAL_CHUNK: usize = 256;

/// Accuracy on the first `limit` samples of a split.
pub fn evaluate_accuracy(graph: &NetworkGraph, ds: &Dataset, split: Split, limit: Option<usize>) -> Result<f64> {
    check_task(graph, ds)?;
    let (x, y) = ds.split_data(split, limit);
    if y.is_empty() {
        return Ok(0.0);
    }
    let mut correct = 0;
    for start in (0..y.len()).step_by(EVAL_CHUNK) {
        let end = (start + EVAL_CHUNK).min(y.len());
        let logits = graph.forward(&x.slice_batch(start, end))?;
        correct += count_correct(&logits, &y[start..end]);
    }
    Ok(correct as f64 / y.len() as f64)
}

fn check_task(graph: &NetworkGraph, ds: &Dataset) -> Result<()> {
    if *graph.task() != ds.task() {
        return Err(Error::Config(format!(
            "network {} expects {:?} but dataset {} provides {:?}",
            graph.name(),
            graph.task(),
            ds.name,
            ds.task()
        )));
    }
    Ok(())
}

/// Mean cross-entropy of `[B, K]` logits and its gradient with respect to them.
pub fn cross_entropy(logits: &Tensor, labels: &[usize]) -> (f32, Tensor) {
    let k = logits.sample_len();
    let b = labels.len() as f32;
    let mut grad = logits.clone();
    let mut loss = 0.0f32;
    for (row, &y) in grad.data_mut().chunks_mut(k).zip(labels) {
        let max = row.iter().copied().fold(f32::NEG_INFINITY, f32::max);
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f32>().ln();
        loss += lse - row[y];
        softmax_in_place(row);
        row[y] -= 1.0;
        row.iter_mut().for_each(|g| *g /= b);
    }
    (loss / b, grad)
}

pub fn train_parent(graph: &NetworkGraph, ds: &Dataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    check_task(graph, ds)?;
    cfg.validate()?;
    if ds.train.is_empty() {
        return Err(Error::Invalid("empty training split".into()));
    }
    let mut graph = graph.clone();
    let trainable: Vec<usize> = (0..graph.nodes().len())
        .filter(|&i| graph.nodes()[i].spec.trainable_params() > 0)
        .collect();
    let split_at: Vec<usize> = trainable.iter().map(|&i| graph.nodes()[i].spec.trainable_params()).collect();
    let mut params: Vec<Tensor> = trainable
        .iter()
        .zip(&split_at)
        .flat_map(|(&i, &k)| graph.nodes()[i].weights[..k].to_vec())
        .collect();
    let mut state = AdamState::new(&params);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let steps = cfg.sample_budget.div_ceil(cfg.batch_size);
    let mut order = ds.train.clone();
    let mut cursor = order.len();
    let mut losses = Vec::with_capacity(steps);
    for step in 0..steps {
        let mut batch = Vec::with_capacity(cfg.batch_size);
        while batch.len() < cfg.batch_size {
            if cursor == order.len() {
                order.shuffle(&mut rng);
                cursor = 0;
            }
            let take = (cfg.batch_size - batch.len()).min(order.len() - cursor);
            batch.extend_from_slice(&order[cursor..cursor + take]);
            cursor += take;
        }
        let x = ds.samples.select(&batch)?;
        let y: Vec<usize> = batch.iter().map(|&i| ds.labels[i]).collect();
        let values = graph.forward_all(&x)?;
        let out = graph.node_index(graph.output_id()).expect("output exists");
        let (loss, grad) = cross_entropy(&values[out], &y);
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!("{} at step {step}", graph.name())));
        }
        losses.push(loss);
        let mut wgrads = graph.backward(&values, grad)?;
        let grads: Vec<Tensor> = trainable.iter().flat_map(|&i| std::mem::take(&mut wgrads[i])).collect();
        adam_step(&mut params, &grads, &mut state, cfg.lr)?;
        let mut it = params.iter();
        for (&i, &k) in trainable.iter().zip(&split_at) {
            let mut w = graph.nodes()[i].weights.clone();
            for slot in w.iter_mut().take(k) {
                *slot = it.next().expect("one param per trainable tensor").clone();
            }
            graph.set_weights(i, w)?;
        }
    }
    Ok(TrainOutcome {
        train_accuracy: evaluate_accuracy(&graph, ds, Split::Train, None)?,
        validation_accuracy: evaluate_accuracy(&graph, ds, Split::Validation, None)?,
        graph,
        losses,
    })
}
