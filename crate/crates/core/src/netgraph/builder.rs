use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::graph::{NetworkGraph, Node, TaskSignature};
use crate::error::Result;
use crate::tensorcore::LayerSpec;

/// Incremental graph construction with seeded weight initialization.
///
/// The builder starts with an `input` node; layers are appended in call order.
pub struct GraphBuilder {
    name: String,
    task: TaskSignature,
    nodes: Vec<Node>,
    rng: ChaCha8Rng,
}

impl GraphBuilder {
    pub const INPUT: &'static str = "input";

    pub fn new(name: impl Into<String>, task: TaskSignature, seed: u64) -> Self {
        GraphBuilder {
            name: name.into(),
            task,
            nodes: vec![Node::new(Self::INPUT, LayerSpec::Input, &[], Vec::new())],
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn layer(&mut self, id: &str, spec: LayerSpec, inputs: &[&str]) -> &mut Self {
        let weights = spec.init_weights(&mut self.rng);
        self.nodes.push(Node::new(id, spec, inputs, weights));
        self
    }

    pub fn build(&self, output: &str) -> Result<NetworkGraph> {
        NetworkGraph::new(self.name.clone(), self.task.clone(), self.nodes.clone(), Self::INPUT, output)
    }
}
