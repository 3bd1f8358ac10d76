use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::candidates::StitchKind;
use super::lstsq::NormalEquations;
use super::supernet::{StitchEntry, Supernetwork};
use crate::error::{Error, Result};
use crate::synthdata::{Dataset, Split};
use crate::tensorcore::{adam_step, backward_layer, forward_layer, AdamState, LayerSpec, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StitchMethod {
    Adam,
    ClosedForm,
}

impl std::str::FromStr for StitchMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "adam" => Ok(StitchMethod::Adam),
            "closed_form" | "closed-form" => Ok(StitchMethod::ClosedForm),
            other => Err(Error::Config(format!("unknown stitch training method {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StitchTrainConfig {
    pub method: StitchMethod,
    pub lr: f32,
    pub batch_size: usize,
    /// Samples drawn in total by Adam.
    pub sample_budget: usize,
    pub ridge: f64,
    /// Leading training-split samples whose activations are captured.
    pub max_samples: usize,
    pub seed: u64,
}

impl Default for StitchTrainConfig {
    fn default() -> Self {
        StitchTrainConfig {
            method: StitchMethod::ClosedForm,
            lr: 1e-3,
            batch_size: 32,
            sample_budget: 16_384,
            ridge: 1e-6,
            max_samples: 1024,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StitchStat {
    pub samples: usize,
    pub initial_mse: f64,
    pub final_mse: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StitchReport {
    pub method: StitchMethod,
    pub samples: usize,
    pub stitches: BTreeMap<String, StitchStat>,
}

/// Donor inputs and recipient targets of one stitch over the captured samples.
pub(crate) struct StitchData {
    pub x: Tensor,
    pub y: Tensor,
}

const CAPTURE_CHUNK: usize = 128;

/// Captures donor and recipient activations with every switch passing its original input.
pub(crate) fn capture(supernet: &Supernetwork, ds: &Dataset, stitches: &[&StitchEntry], max_samples: usize) -> Result<Vec<StitchData>> {
    let (x, _) = ds.split_data(Split::Train, Some(max_samples));
    if x.batch() == 0 {
        return Err(Error::Invalid("stitch training needs a non-empty training split".into()));
    }
    let g = supernet.graph();
    let idx: Vec<(usize, usize)> = stitches
        .iter()
        .map(|s| (g.node_index(&s.donor).unwrap(), g.node_index(&s.recipient).unwrap()))
        .collect();
    let mut parts: Vec<(Vec<Tensor>, Vec<Tensor>)> = vec![(Vec::new(), Vec::new()); stitches.len()];
    for start in (0..x.batch()).step_by(CAPTURE_CHUNK) {
        let values = g.forward_all(&x.slice_batch(start, (start + CAPTURE_CHUNK).min(x.batch())))?;
        for (p, &(d, r)) in parts.iter_mut().zip(&idx) {
            p.0.push(values[d].clone());
            p.1.push(values[r].clone());
        }
    }
    parts
        .into_iter()
        .map(|(xs, ys)| {
            Ok(StitchData {
                x: Tensor::stack_batches(&xs)?,
                y: Tensor::stack_batches(&ys)?,
            })
        })
        .collect()
}

/// Mean squared error of a stitch over captured data.
pub(crate) fn stitch_mse(spec: &LayerSpec, weights: &[Tensor], data: &StitchData) -> Result<f64> {
    let mut sum = 0.0f64;
    for start in (0..data.x.batch()).step_by(CAPTURE_CHUNK) {
        let end = (start + CAPTURE_CHUNK).min(data.x.batch());
        let out = forward_layer(spec, weights, &[&data.x.slice_batch(start, end)])?;
        let y = data.y.slice_batch(start, end);
        sum += out
            .data()
            .iter()
            .zip(y.data())
            .map(|(&a, &b)| ((a - b) as f64).powi(2))
            .sum::<f64>();
    }
    Ok(sum / data.y.len() as f64)
}

/// Visits the rows of an activation: one per sample for `[S, n]`, one per
/// spatial position for `[S, C, H, W]`.
fn for_each_row(t: &Tensor, mut f: impl FnMut(usize, &[f32])) {
    let shape = t.shape();
    if shape.len() == 2 {
        for (r, row) in t.data().chunks(shape[1]).enumerate() {
            f(r, row);
        }
        return;
    }
    let (c, hw) = (shape[1], shape[2] * shape[3]);
    let mut row = vec![0.0f32; c];
    for s in 0..shape[0] {
        let base = s * c * hw;
        for p in 0..hw {
            for (ch, v) in row.iter_mut().enumerate() {
                *v = t.data()[base + ch * hw + p];
            }
            f(s * hw + p, &row);
        }
    }
}

fn closed_form(kind: StitchKind, data: &StitchData, ridge: f64) -> Result<Vec<Tensor>> {
    let n = data.x.shape()[1];
    let m = data.y.shape()[1];
    let mut ne = NormalEquations::new(n, m);
    let mut xs: Vec<Vec<f32>> = Vec::new();
    for_each_row(&data.x, |_, r| xs.push(r.to_vec()));
    for_each_row(&data.y, |i, r| ne.add_row(&xs[i], r));
    let sol = ne.solve(ridge)?;
    // stored as [out, in] (linear) or [out, in, 1, 1] (conv)
    let w: Vec<f32> = (0..m)
        .flat_map(|j| (0..n).map(move |i| (i, j)))
        .map(|(i, j)| sol.weight[i * m + j] as f32)
        .collect();
    let shape = match kind {
        StitchKind::Linear => vec![m, n],
        StitchKind::Conv1x1 => vec![m, n, 1, 1],
    };
    Ok(vec![
        Tensor::new(shape, w)?,
        Tensor::new(vec![m], sol.bias.iter().map(|&b| b as f32).collect())?,
    ])
}

/// Trains every stitch against its recipient's original output.
pub fn train_stitches(
    supernet: &Supernetwork,
    ds: &Dataset,
    cfg: &StitchTrainConfig,
) -> Result<(Supernetwork, StitchReport)> {
    let ids: Vec<String> = supernet.stitches().iter().map(|s| s.id.clone()).collect();
    train_selected_stitches(supernet, ds, cfg, &ids)
}

/// Trains only the named stitches; the rest keep their weights.
pub fn train_selected_stitches(
    supernet: &Supernetwork,
    ds: &Dataset,
    cfg: &StitchTrainConfig,
    ids: &[String],
) -> Result<(Supernetwork, StitchReport)> {
    if cfg.batch_size == 0 || !(cfg.lr > 0.0) {
        return Err(Error::Config("stitch training needs a positive batch size and learning rate".into()));
    }
    let entries: Vec<&StitchEntry> = ids
        .iter()
        .map(|id| {
            supernet
                .stitches()
                .iter()
                .find(|s| &s.id == id)
                .ok_or_else(|| Error::Config(format!("{id} is not a stitch")))
        })
        .collect::<Result<_>>()?;
    let data = capture(supernet, ds, &entries, cfg.max_samples)?;
    let samples = data.first().map_or(0, |d| d.x.batch());
    let g = supernet.graph();
    let specs: Vec<&LayerSpec> = entries.iter().map(|e| &g.node(&e.id).unwrap().spec).collect();
    let mut weights: Vec<Vec<Tensor>> = entries.iter().map(|e| g.node(&e.id).unwrap().weights.clone()).collect();
    let initial: Vec<f64> = specs
        .iter()
        .zip(&weights)
        .zip(&data)
        .map(|((s, w), d)| stitch_mse(s, w, d))
        .collect::<Result<_>>()?;
    match cfg.method {
        StitchMethod::ClosedForm => {
            for ((e, d), w) in entries.iter().zip(&data).zip(weights.iter_mut()) {
                *w = closed_form(e.kind, d, cfg.ridge).map_err(|err| match err {
                    Error::Singular(msg) => Error::Singular(format!("{}: {msg}", e.id)),
                    other => other,
                })?;
            }
        }
        StitchMethod::Adam => {
            let mut states: Vec<AdamState> = weights.iter().map(|w| AdamState::new(w)).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let mut order: Vec<usize> = (0..samples).collect();
            let mut cursor = samples;
            for _ in 0..cfg.sample_budget.div_ceil(cfg.batch_size) {
                let mut batch = Vec::with_capacity(cfg.batch_size);
                while batch.len() < cfg.batch_size {
                    if cursor == samples {
                        order.shuffle(&mut rng);
                        cursor = 0;
                    }
                    let take = (cfg.batch_size - batch.len()).min(samples - cursor);
                    batch.extend_from_slice(&order[cursor..cursor + take]);
                    cursor += take;
                }
                for (k, d) in data.iter().enumerate() {
                    let xb = d.x.select(&batch)?;
                    let yb = d.y.select(&batch)?;
                    let out = forward_layer(specs[k], &weights[k], &[&xb])?;
                    let scale = 2.0 / out.len() as f32;
                    let mut loss = 0.0f32;
                    let grad_data: Vec<f32> = out
                        .data()
                        .iter()
                        .zip(yb.data())
                        .map(|(&o, &t)| {
                            loss += (o - t) * (o - t);
                            scale * (o - t)
                        })
                        .collect();
                    if !loss.is_finite() {
                        return Err(Error::NonFinite(entries[k].id.clone()));
                    }
                    let grad = Tensor::new(out.shape().to_vec(), grad_data)?;
                    let (_, dw) = backward_layer(specs[k], &weights[k], &[&xb], &grad)?;
                    adam_step(&mut weights[k], &dw, &mut states[k], cfg.lr)?;
                }
            }
        }
    }
    let mut stitches = BTreeMap::new();
    let mut new_weights = BTreeMap::new();
    for (k, e) in entries.iter().enumerate() {
        let final_mse = stitch_mse(specs[k], &weights[k], &data[k])?;
        if !final_mse.is_finite() {
            return Err(Error::NonFinite(e.id.clone()));
        }
        stitches.insert(
            e.id.clone(),
            StitchStat {
                samples,
                initial_mse: initial[k],
                final_mse,
            },
        );
        new_weights.insert(e.id.clone(), std::mem::take(&mut weights[k]));
    }
    Ok((
        supernet.with_stitch_weights(&new_weights)?,
        StitchReport {
            method: cfg.method,
            samples,
            stitches,
        },
    ))
}
