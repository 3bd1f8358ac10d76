use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netgraph::{GraphBuilder, NetworkGraph, TaskSignature};
use crate::tensorcore::{Conv2dSpec, LayerSpec};

/// Built-in parent pairs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Preset {
    /// Residual 6-conv network against a 2-conv network.
    #[serde(rename = "a", alias = "deep_shallow")]
    DeepShallow,
    /// Two 3-conv networks; the second splits its first and last stage into concat branches.
    #[serde(rename = "b", alias = "same_depth")]
    SameDepth,
}

impl std::str::FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "a" | "deep_shallow" => Ok(Preset::DeepShallow),
            "b" | "same_depth" => Ok(Preset::SameDepth),
            other => Err(Error::Config(format!("unknown preset {other:?} (expected a or b)"))),
        }
    }
}

const IN: &str = GraphBuilder::INPUT;

fn conv(i: usize, o: usize, k: usize, stride: usize, pad: usize) -> LayerSpec {
    LayerSpec::Conv2d(Conv2dSpec::new(i, o, k, stride, pad))
}

fn linear(i: usize, o: usize) -> LayerSpec {
    LayerSpec::Linear {
        in_features: i,
        out_features: o,
    }
}

fn check_image_task(task: &TaskSignature) -> Result<usize> {
    match task.input_shape.as_slice() {
        [1, h, w] if h == w && h % 4 == 0 => Ok(*h),
        other => Err(Error::Config(format!(
            "image presets need a [1, S, S] input with S divisible by 4, got {other:?}"
        ))),
    }
}

/// Untrained parent pair for a preset; the two parents get distinct init seeds.
pub fn preset_parents(preset: Preset, task: &TaskSignature, seed: u64) -> Result<(NetworkGraph, NetworkGraph)> {
    let side = check_image_task(task)?;
    let k = task.num_classes;
    let q = side / 4;
    let flat = 8 * q * q;
    let max2 = LayerSpec::MaxPool2d { window: 2, stride: 2 };
    match preset {
        Preset::DeepShallow => {
            let mut a = GraphBuilder::new("deep", task.clone(), seed);
            a.layer("conv1", conv(1, 8, 3, 1, 1), &[IN])
                .layer("relu1", LayerSpec::Relu, &["conv1"])
                .layer("pool1", max2.clone(), &["relu1"]);
            residual(&mut a, "b1", 8, "pool1");
            a.layer("down", conv(8, 16, 3, 2, 1), &["b1_out"])
                .layer("down_relu", LayerSpec::Relu, &["down"]);
            residual(&mut a, "b2", 16, "down_relu");
            a.layer("gap", LayerSpec::GlobalAvgPool2d, &["b2_out"])
                .layer("fc1", linear(16, 16), &["gap"])
                .layer("relu_fc", LayerSpec::Relu, &["fc1"])
                .layer("fc2", linear(16, k), &["relu_fc"]);
            let mut b = GraphBuilder::new("shallow", task.clone(), seed.wrapping_add(1));
            b.layer("conv1", conv(1, 6, 5, 2, 2), &[IN])
                .layer("relu1", LayerSpec::Relu, &["conv1"])
                .layer("conv2", conv(6, 8, 3, 1, 1), &["relu1"])
                .layer("relu2", LayerSpec::Relu, &["conv2"])
                .layer("gap", LayerSpec::GlobalAvgPool2d, &["relu2"])
                .layer("fc1", linear(8, 16), &["gap"])
                .layer("relu3", LayerSpec::Relu, &["fc1"])
                .layer("fc2", linear(16, k), &["relu3"]);
            Ok((a.build("fc2")?, b.build("fc2")?))
        }
        Preset::SameDepth => {
            let mut a = GraphBuilder::new("plain", task.clone(), seed);
            a.layer("conv1", conv(1, 8, 3, 1, 1), &[IN])
                .layer("relu1", LayerSpec::Relu, &["conv1"])
                .layer("pool1", max2.clone(), &["relu1"])
                .layer("conv2", conv(8, 8, 3, 1, 1), &["pool1"])
                .layer("relu2", LayerSpec::Relu, &["conv2"])
                .layer("conv3", conv(8, 8, 3, 1, 1), &["relu2"])
                .layer("relu3", LayerSpec::Relu, &["conv3"])
                .layer("pool2", max2.clone(), &["relu3"])
                .layer("flat", LayerSpec::Flatten, &["pool2"])
                .layer("fc1", linear(flat, 24), &["flat"])
                .layer("relu4", LayerSpec::Relu, &["fc1"])
                .layer("fc2", linear(24, k), &["relu4"]);
            let mut b = GraphBuilder::new("branched", task.clone(), seed.wrapping_add(1));
            b.layer("conv1a", conv(1, 4, 3, 1, 1), &[IN])
                .layer("conv1b", conv(1, 4, 5, 1, 2), &[IN])
                .layer("cat1", LayerSpec::Concat { axis: 1, arity: 2 }, &["conv1a", "conv1b"])
                .layer("relu1", LayerSpec::Relu, &["cat1"])
                .layer("pool1", LayerSpec::AvgPool2d { window: 2, stride: 2 }, &["relu1"])
                .layer("conv2", conv(8, 8, 3, 1, 1), &["pool1"])
                .layer("relu2", LayerSpec::Relu, &["conv2"])
                .layer("conv3a", conv(8, 4, 3, 1, 1), &["relu2"])
                .layer("conv3b", conv(8, 4, 1, 1, 0), &["relu2"])
                .layer("cat3", LayerSpec::Concat { axis: 1, arity: 2 }, &["conv3a", "conv3b"])
                .layer("relu3", LayerSpec::Relu, &["cat3"])
                .layer("pool2", max2, &["relu3"])
                .layer("gap", LayerSpec::GlobalAvgPool2d, &["pool2"])
                .layer("fc1", linear(8, 24), &["gap"])
                .layer("relu4", LayerSpec::Relu, &["fc1"])
                .layer("fc2", linear(24, k), &["relu4"]);
            Ok((a.build("fc2")?, b.build("fc2")?))
        }
    }
}

/// Two 3×3 convolutions with an identity shortcut; the block output is `<name>_out`.
fn residual(g: &mut GraphBuilder, name: &str, ch: usize, input: &str) {
    let (c1, r1, c2) = (format!("{name}_conv1"), format!("{name}_relu1"), format!("{name}_conv2"));
    let (add, out) = (format!("{name}_add"), format!("{name}_out"));
    g.layer(&c1, conv(ch, ch, 3, 1, 1), &[input])
        .layer(&r1, LayerSpec::Relu, &[&c1])
        .layer(&c2, conv(ch, ch, 3, 1, 1), &[&r1])
        .layer(&add, LayerSpec::Add { arity: 2 }, &[input, &c2])
        .layer(&out, LayerSpec::Relu, &[&add]);
}

/// Fully connected ReLU network for flat inputs.
pub fn mlp(name: &str, task: &TaskSignature, hidden: &[usize], seed: u64) -> Result<NetworkGraph> {
    let [n_in] = task.input_shape[..] else {
        return Err(Error::Config(format!("mlp needs a flat input, got {:?}", task.input_shape)));
    };
    let mut b = GraphBuilder::new(name, task.clone(), seed);
    let mut prev = IN.to_string();
    let mut width = n_in;
    for (i, &h) in hidden.iter().enumerate() {
        let fc = format!("fc{}", i + 1);
        let act = format!("relu{}", i + 1);
        b.layer(&fc, linear(width, h), &[&prev]).layer(&act, LayerSpec::Relu, &[&fc]);
        prev = act;
        width = h;
    }
    b.layer("logits", linear(width, task.num_classes), &[&prev]);
    b.build("logits")
}
