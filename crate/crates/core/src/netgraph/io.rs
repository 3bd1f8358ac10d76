//! Network container files.
//!
//! A network is stored as one JSON document:
//!
//! ```text
//! { "format_version": 1,
//!   "name": "...",
//!   "task": { "input_shape": [..], "num_classes": K },
//!   "nodes": [ { "id", "kind", "hyperparams": {..}, "inputs": [ids] } ],
//!   "input": id, "output": id,
//!   "weights": { id: [ { "shape": [..], "data": base64 } ] } }
//! ```
//!
//! Weight data is base64 of little-endian `f32` values in row-major order, so
//! a load/save round trip is bit-exact.

use std::collections::BTreeMap;
use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use super::graph::{NetworkGraph, Node, TaskSignature};
use crate::error::{Error, Result};
use crate::tensorcore::{Conv2dSpec, LayerSpec, Tensor};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct TaskRecord {
    pub input_shape: Vec<usize>,
    pub num_classes: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct NodeRecord {
    pub id: String,
    pub kind: String,
    pub hyperparams: Map<String, Value>,
    pub inputs: Vec<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct TensorRecord {
    pub shape: Vec<usize>,
    pub data: String,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct NetworkDocument {
    pub format_version: u32,
    pub name: String,
    pub task: TaskRecord,
    pub nodes: Vec<NodeRecord>,
    pub input: String,
    pub output: String,
    pub weights: BTreeMap<String, Vec<TensorRecord>>,
}

pub fn encode_tensor(t: &Tensor) -> TensorRecord {
    let mut bytes = Vec::with_capacity(t.len() * 4);
    for v in t.data() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    TensorRecord {
        shape: t.shape().to_vec(),
        data: STANDARD.encode(bytes),
    }
}

pub fn decode_tensor(rec: &TensorRecord, context: &str) -> Result<Tensor> {
    let bytes = STANDARD
        .decode(rec.data.as_bytes())
        .map_err(|e| Error::format(context, format!("corrupt base64 weight data: {e}")))?;
    if bytes.len() % 4 != 0 {
        return Err(Error::format(context, "weight data is not a whole number of f32 values"));
    }
    let data: Vec<f32> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Tensor::new(rec.shape.clone(), data).map_err(|e| Error::format(context, e.to_string()))
}

fn hyperparams(spec: &LayerSpec) -> Map<String, Value> {
    let v = match spec {
        LayerSpec::Linear { in_features, out_features } => {
            json!({ "in_features": in_features, "out_features": out_features })
        }
        LayerSpec::Conv2d(c) => json!({
            "in_channels": c.in_channels,
            "out_channels": c.out_channels,
            "kernel_h": c.kernel_h,
            "kernel_w": c.kernel_w,
            "stride": c.stride,
            "padding": c.padding,
        }),
        LayerSpec::MaxPool2d { window, stride } | LayerSpec::AvgPool2d { window, stride } => {
            json!({ "window": window, "stride": stride })
        }
        LayerSpec::Add { arity } | LayerSpec::Mean { arity } | LayerSpec::Switch { arity } => {
            json!({ "arity": arity })
        }
        LayerSpec::Concat { axis, arity } => json!({ "axis": axis, "arity": arity }),
        LayerSpec::BatchNorm2d { channels, eps } => json!({ "channels": channels, "eps": eps }),
        _ => json!({}),
    };
    match v {
        Value::Object(m) => m,
        _ => unreachable!(),
    }
}

fn parse_spec(rec: &NodeRecord) -> Result<LayerSpec> {
    let ctx = format!("node {}", rec.id);
    let get = |key: &str| -> Result<usize> {
        rec.hyperparams
            .get(key)
            .and_then(Value::as_u64)
            .map(|v| v as usize)
            .ok_or_else(|| Error::format(&ctx, format!("missing or invalid hyperparameter {key}")))
    };
    Ok(match rec.kind.as_str() {
        "input" => LayerSpec::Input,
        "linear" => LayerSpec::Linear {
            in_features: get("in_features")?,
            out_features: get("out_features")?,
        },
        "conv2d" => LayerSpec::Conv2d(Conv2dSpec {
            in_channels: get("in_channels")?,
            out_channels: get("out_channels")?,
            kernel_h: get("kernel_h")?,
            kernel_w: get("kernel_w")?,
            stride: get("stride")?,
            padding: get("padding")?,
        }),
        "relu" => LayerSpec::Relu,
        "max_pool2d" => LayerSpec::MaxPool2d {
            window: get("window")?,
            stride: get("stride")?,
        },
        "avg_pool2d" => LayerSpec::AvgPool2d {
            window: get("window")?,
            stride: get("stride")?,
        },
        "global_avg_pool2d" => LayerSpec::GlobalAvgPool2d,
        "flatten" => LayerSpec::Flatten,
        "add" => LayerSpec::Add { arity: get("arity")? },
        "concat" => LayerSpec::Concat {
            axis: get("axis")?,
            arity: get("arity")?,
        },
        "batch_norm2d" => LayerSpec::BatchNorm2d {
            channels: get("channels")?,
            eps: rec
                .hyperparams
                .get("eps")
                .and_then(Value::as_f64)
                .ok_or_else(|| Error::format(&ctx, "missing or invalid hyperparameter eps"))? as f32,
        },
        "softmax" => LayerSpec::Softmax,
        "identity" => LayerSpec::Identity,
        "mean" => LayerSpec::Mean { arity: get("arity")? },
        "switch" => LayerSpec::Switch { arity: get("arity")? },
        other => return Err(Error::format(&ctx, format!("unknown kind {other:?}"))),
    })
}

pub fn to_document(graph: &NetworkGraph) -> NetworkDocument {
    let nodes = graph
        .nodes()
        .iter()
        .map(|n| NodeRecord {
            id: n.id.clone(),
            kind: n.spec.kind_name().to_string(),
            hyperparams: hyperparams(&n.spec),
            inputs: n.inputs.clone(),
        })
        .collect();
    let weights = graph
        .nodes()
        .iter()
        .filter(|n| !n.weights.is_empty())
        .map(|n| (n.id.clone(), n.weights.iter().map(encode_tensor).collect()))
        .collect();
    NetworkDocument {
        format_version: FORMAT_VERSION,
        name: graph.name().to_string(),
        task: TaskRecord {
            input_shape: graph.task().input_shape.clone(),
            num_classes: graph.task().num_classes,
        },
        nodes,
        input: graph.input_id().to_string(),
        output: graph.output_id().to_string(),
        weights,
    }
}

pub fn from_document(doc: &NetworkDocument) -> Result<NetworkGraph> {
    if doc.format_version != FORMAT_VERSION {
        return Err(Error::Version {
            found: doc.format_version,
            expected: FORMAT_VERSION,
        });
    }
    let mut nodes = Vec::with_capacity(doc.nodes.len());
    for rec in &doc.nodes {
        let spec = parse_spec(rec)?;
        let weights = match doc.weights.get(&rec.id) {
            Some(ws) => ws
                .iter()
                .map(|w| decode_tensor(w, &format!("weights of node {}", rec.id)))
                .collect::<Result<Vec<_>>>()?,
            None => Vec::new(),
        };
        nodes.push(Node {
            id: rec.id.clone(),
            spec,
            inputs: rec.inputs.clone(),
            weights,
        });
    }
    for id in doc.weights.keys() {
        if !doc.nodes.iter().any(|n| &n.id == id) {
            return Err(Error::format(format!("weights of node {id}"), "no such node"));
        }
    }
    NetworkGraph::new(
        doc.name.clone(),
        TaskSignature {
            input_shape: doc.task.input_shape.clone(),
            num_classes: doc.task.num_classes,
        },
        nodes,
        &doc.input,
        &doc.output,
    )
}

/// Serializes a graph to its container text.
pub fn network_to_string(graph: &NetworkGraph) -> String {
    serde_json::to_string_pretty(&to_document(graph)).expect("documents always serialize") + "\n"
}

pub fn network_from_str(text: &str) -> Result<NetworkGraph> {
    let doc: NetworkDocument = parse_json(text)?;
    from_document(&doc)
}

pub(crate) fn parse_json<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    let value: Value =
        serde_json::from_str(text).map_err(|e| Error::format(format!("line {}", e.line()), e.to_string()))?;
    if let Some(v) = value.get("format_version") {
        let found = v.as_u64().unwrap_or(u64::MAX) as u32;
        if found != FORMAT_VERSION {
            return Err(Error::Version {
                found,
                expected: FORMAT_VERSION,
            });
        }
    }
    serde_json::from_value(value).map_err(|e| Error::format("document", e.to_string()))
}

pub fn save_network(graph: &NetworkGraph, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, network_to_string(graph))?;
    Ok(())
}

pub fn load_network(path: impl AsRef<Path>) -> Result<NetworkGraph> {
    network_from_str(&std::fs::read_to_string(path)?)
}
