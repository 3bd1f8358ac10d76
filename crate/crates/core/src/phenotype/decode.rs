use std::collections::{HashMap, HashSet};

use super::genotype::Genotype;
use crate::error::Result;
use crate::netgraph::{NetworkGraph, Node};
use crate::stitcher::{Supernetwork, INPUT_ID, OUTPUT_SWITCH_ID};
use crate::tensorcore::LayerSpec;

#[derive(Clone, Debug)]
pub struct Decoded {
    pub graph: NetworkGraph,
    /// Switches whose choice influenced `graph`, in genotype order.
    pub active_mask: Vec<bool>,
}

/// Follows switch choices backwards until a real layer is reached.
fn resolve<'s>(s: &'s Supernetwork, g: &Genotype, mut id: &'s str, active: &mut [bool]) -> &'s str {
    while let Some(k) = s.switch_index(id) {
        active[k] = true;
        id = &s.switches()[k].inputs[g.0[k] as usize];
    }
    id
}

/// Builds the subnetwork selected by `g`: inner switches collapse into direct
/// edges and the output switch becomes an identity pass-through.
pub fn decode(s: &Supernetwork, g: &Genotype) -> Result<Decoded> {
    g.validate(s.genotype_len())?;
    let mut active = vec![false; g.len()];
    let out = s.switches().last().expect("output switch");
    let last = g.len() - 1;
    active[last] = true;
    let src = resolve(s, g, &out.inputs[g.0[last] as usize], &mut active);
    let sg = s.graph();
    let mut keep: HashSet<&str> = HashSet::new();
    let mut stack = vec![src];
    let mut rewired: HashMap<&str, Vec<String>> = HashMap::new();
    while let Some(id) = stack.pop() {
        if !keep.insert(id) {
            continue;
        }
        let node = sg.node(id).expect("switch inputs name graph nodes");
        let ins: Vec<String> = node
            .inputs
            .iter()
            .map(|i| resolve(s, g, i, &mut active).to_string())
            .collect();
        for i in &ins {
            stack.push(sg.node(i).map(|n| n.id.as_str()).expect("resolved ids exist"));
        }
        rewired.insert(id, ins);
    }
    keep.insert(INPUT_ID);
    let mut nodes: Vec<Node> = Vec::with_capacity(keep.len() + 1);
    for id in sg.topological_order() {
        if !keep.contains(id) {
            continue;
        }
        let orig = sg.node(id).unwrap();
        let inputs = rewired.remove(id).unwrap_or_default();
        nodes.push(Node {
            id: orig.id.clone(),
            spec: orig.spec.clone(),
            inputs,
            weights: orig.weights.clone(),
        });
    }
    nodes.push(Node::new(OUTPUT_SWITCH_ID, LayerSpec::Identity, &[src], Vec::new()));
    let graph = NetworkGraph::new(format!("{}[{}]", sg.name(), g), sg.task().clone(), nodes, INPUT_ID, OUTPUT_SWITCH_ID)?;
    Ok(Decoded {
        graph,
        active_mask: active,
    })
}
