use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::candidates::{MatchCandidate, StitchKind};
use super::matching::MatchingPlan;
use crate::error::{Error, Result};
use crate::netgraph::io::{from_document, parse_json, to_document, NetworkDocument};
use crate::netgraph::{NetworkGraph, Node, TaskSignature};
use crate::tensorcore::{Conv2dSpec, LayerSpec, Tensor};

pub const INPUT_ID: &str = "input";
pub const ENSEMBLE_ID: &str = "ensemble";
pub const OUTPUT_SWITCH_ID: &str = "switch/output";

/// Which parent a switch or stitch belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    A,
    B,
}

impl Side {
    pub fn prefix(self) -> &'static str {
        match self {
            Side::A => "A",
            Side::B => "B",
        }
    }
}

pub fn node_id(side: Side, id: &str) -> String {
    format!("{}/{}", side.prefix(), id)
}

pub fn switch_id(side: Side, id: &str) -> String {
    format!("switch/{}/{}", side.prefix(), id)
}

pub fn stitch_id(side: Side, id: &str) -> String {
    format!("stitch/{}/{}", side.prefix(), id)
}

/// A switch node: input 0 is the original output, the rest are alternatives.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwitchEntry {
    pub id: String,
    pub inputs: Vec<String>,
}

/// A stitch translating the donor's output into the recipient's representation.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StitchEntry {
    pub id: String,
    pub kind: StitchKind,
    /// Merged-graph id of the layer whose output feeds the stitch.
    pub donor: String,
    /// Merged-graph id of the layer whose output the stitch imitates.
    pub recipient: String,
}

/// Two parents merged through stitches and switches.
#[derive(Clone, Debug, PartialEq)]
pub struct Supernetwork {
    graph: NetworkGraph,
    parents: [String; 2],
    plan: MatchingPlan,
    switches: Vec<SwitchEntry>,
    stitches: Vec<StitchEntry>,
    switch_index: HashMap<String, usize>,
}

fn stitch_spec(kind: StitchKind, n_in: usize, n_out: usize) -> LayerSpec {
    match kind {
        StitchKind::Linear => LayerSpec::Linear {
            in_features: n_in,
            out_features: n_out,
        },
        StitchKind::Conv1x1 => LayerSpec::Conv2d(Conv2dSpec::new(n_in, n_out, 1, 1, 0)),
    }
}

/// Weights ~ N(0, 1/n_in), zero bias.
pub(crate) fn stitch_init(spec: &LayerSpec, rng: &mut ChaCha8Rng) -> Vec<Tensor> {
    let shapes = spec.param_shapes();
    let n_in: usize = shapes[0][1..].iter().product();
    let normal = Normal::new(0.0f32, (1.0 / n_in as f32).sqrt()).unwrap();
    vec![
        Tensor::from_fn(&shapes[0], |_| normal.sample(rng)),
        Tensor::zeros(&shapes[1]),
    ]
}

fn check_parents(a: &NetworkGraph, b: &NetworkGraph) -> Result<()> {
    if a.task() != b.task() {
        return Err(Error::Config(format!(
            "parents {} and {} solve different tasks ({:?} vs {:?})",
            a.name(),
            b.name(),
            a.task(),
            b.task()
        )));
    }
    if a.name() == b.name() {
        return Err(Error::Config(format!("both parents are named {:?}", a.name())));
    }
    Ok(())
}

/// Merges two parents along `plan`. Stitch weights are drawn from `seed`.
pub fn build_supernetwork(a: &NetworkGraph, b: &NetworkGraph, plan: &MatchingPlan, seed: u64) -> Result<Supernetwork> {
    check_parents(a, b)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut matched: HashMap<(Side, &str), &MatchCandidate> = HashMap::new();
    for m in &plan.matches {
        for (side, g, id) in [(Side::A, a, &m.node_a), (Side::B, b, &m.node_b)] {
            if !g.contains(id) || id == g.input_id() || id == g.output_id() {
                return Err(Error::Config(format!("match endpoint {id} is not an eligible layer of {}", g.name())));
            }
            if matched.insert((side, id.as_str()), m).is_some() {
                return Err(Error::Config(format!("layer {id} appears in two matches")));
            }
        }
    }
    let rename = |side: Side, g: &NetworkGraph, id: &str| -> String {
        if id == g.input_id() {
            INPUT_ID.to_string()
        } else if matched.contains_key(&(side, id)) {
            switch_id(side, id)
        } else {
            node_id(side, id)
        }
    };
    let mut nodes = vec![Node::new(INPUT_ID, LayerSpec::Input, &[], Vec::new())];
    for (side, g) in [(Side::A, a), (Side::B, b)] {
        for id in g.topological_order() {
            if id == g.input_id() {
                continue;
            }
            let n = g.node(id).expect("ordered ids exist");
            nodes.push(Node {
                id: node_id(side, id),
                spec: n.spec.clone(),
                inputs: n.inputs.iter().map(|i| rename(side, g, i)).collect(),
                weights: n.weights.clone(),
            });
        }
    }
    let mut switches = Vec::new();
    let mut stitches = Vec::new();
    for m in &plan.matches {
        for (side, own, other, n_in, n_out) in [
            (Side::A, &m.node_a, node_id(Side::B, &m.node_b), m.width_b, m.width_a),
            (Side::B, &m.node_b, node_id(Side::A, &m.node_a), m.width_a, m.width_b),
        ] {
            let spec = stitch_spec(m.kind, n_in, n_out);
            let sid = stitch_id(side, own);
            let weights = stitch_init(&spec, &mut rng);
            nodes.push(Node::new(&sid, spec, &[&other], weights));
            let original = node_id(side, own);
            let sw = SwitchEntry {
                id: switch_id(side, own),
                inputs: vec![original.clone(), sid.clone()],
            };
            nodes.push(Node::new(&sw.id, LayerSpec::Switch { arity: 2 }, &[&sw.inputs[0], &sw.inputs[1]], Vec::new()));
            stitches.push(StitchEntry {
                id: sid,
                kind: m.kind,
                donor: other,
                recipient: original,
            });
            switches.push(sw);
        }
    }
    let out_a = node_id(Side::A, a.output_id());
    let out_b = node_id(Side::B, b.output_id());
    nodes.push(Node::new(ENSEMBLE_ID, LayerSpec::Mean { arity: 2 }, &[&out_a, &out_b], Vec::new()));
    let out_sw = SwitchEntry {
        id: OUTPUT_SWITCH_ID.to_string(),
        inputs: vec![out_a, out_b, ENSEMBLE_ID.to_string()],
    };
    let ins: Vec<&str> = out_sw.inputs.iter().map(String::as_str).collect();
    nodes.push(Node::new(OUTPUT_SWITCH_ID, LayerSpec::Switch { arity: 3 }, &ins, Vec::new()));
    switches.push(out_sw);
    let name = format!("{}+{}", a.name(), b.name());
    let graph = NetworkGraph::new(name, a.task().clone(), nodes, INPUT_ID, OUTPUT_SWITCH_ID)?;
    Supernetwork::assemble(graph, [a.name().to_string(), b.name().to_string()], plan.clone(), switches, stitches)
}

impl Supernetwork {
    fn assemble(
        graph: NetworkGraph,
        parents: [String; 2],
        plan: MatchingPlan,
        switches: Vec<SwitchEntry>,
        stitches: Vec<StitchEntry>,
    ) -> Result<Self> {
        let switch_index = switches.iter().enumerate().map(|(i, s)| (s.id.clone(), i)).collect();
        let s = Supernetwork {
            graph,
            parents,
            plan,
            switches,
            stitches,
            switch_index,
        };
        if s.switches.len() != s.plan.genotype_len() {
            return Err(Error::Graph(format!(
                "{} switches for {} matches",
                s.switches.len(),
                s.plan.len()
            )));
        }
        Ok(s)
    }

    pub fn graph(&self) -> &NetworkGraph {
        &self.graph
    }

    pub fn task(&self) -> &TaskSignature {
        self.graph.task()
    }

    pub fn parents(&self) -> &[String; 2] {
        &self.parents
    }

    pub fn plan(&self) -> &MatchingPlan {
        &self.plan
    }

    /// Switches in genotype order; the output switch is last.
    pub fn switches(&self) -> &[SwitchEntry] {
        &self.switches
    }

    pub fn stitches(&self) -> &[StitchEntry] {
        &self.stitches
    }

    pub fn genotype_len(&self) -> usize {
        self.switches.len()
    }

    pub fn switch_index(&self, id: &str) -> Option<usize> {
        self.switch_index.get(id).copied()
    }

    /// Number of choices of each decision variable.
    pub fn alphabet_sizes(&self) -> Vec<u8> {
        self.switches.iter().map(|s| s.inputs.len() as u8).collect()
    }

    /// Output node id of a parent inside the merged graph.
    pub fn parent_output(&self, side: Side) -> &str {
        let out = &self.switches.last().expect("output switch").inputs;
        match side {
            Side::A => &out[0],
            Side::B => &out[1],
        }
    }

    pub fn stitch_weights(&self, id: &str) -> Option<&[Tensor]> {
        self.graph.node(id).map(|n| n.weights.as_slice())
    }

    /// Replaces the weights of the named stitches; other nodes are untouched.
    pub fn with_stitch_weights(&self, weights: &BTreeMap<String, Vec<Tensor>>) -> Result<Self> {
        let mut graph = self.graph.clone();
        for (id, w) in weights {
            if !self.stitches.iter().any(|s| &s.id == id) {
                return Err(Error::Config(format!("{id} is not a stitch")));
            }
            let i = graph.node_index(id).expect("stitches are graph nodes");
            graph.set_weights(i, w.clone())?;
        }
        Ok(Supernetwork {
            graph,
            ..self.clone()
        })
    }
}

#[derive(Serialize, Deserialize)]
struct MatchRecord {
    node_a: String,
    node_b: String,
    kind: StitchKind,
}

#[derive(Serialize, Deserialize)]
struct SupernetDocument {
    #[serde(flatten)]
    network: NetworkDocument,
    parents: [String; 2],
    matches: Vec<MatchRecord>,
    switches: Vec<SwitchEntry>,
    genotype_order: Vec<String>,
}

pub fn supernet_to_string(s: &Supernetwork) -> String {
    let doc = SupernetDocument {
        network: to_document(&s.graph),
        parents: s.parents.clone(),
        matches: s
            .plan
            .matches
            .iter()
            .map(|m| MatchRecord {
                node_a: m.node_a.clone(),
                node_b: m.node_b.clone(),
                kind: m.kind,
            })
            .collect(),
        switches: s.switches.clone(),
        genotype_order: s.switches.iter().map(|s| s.id.clone()).collect(),
    };
    serde_json::to_string_pretty(&doc).expect("documents always serialize") + "\n"
}

pub fn supernet_from_str(text: &str) -> Result<Supernetwork> {
    let doc: SupernetDocument = parse_json(text)?;
    let graph = from_document(&doc.network)?;
    let order: Vec<&String> = doc.switches.iter().map(|s| &s.id).collect();
    if order != doc.genotype_order.iter().collect::<Vec<_>>() {
        return Err(Error::format("genotype_order", "does not list the switches in order"));
    }
    let mut matches = Vec::new();
    let mut stitches = Vec::new();
    for m in &doc.matches {
        let sa = graph.shape_of(&node_id(Side::A, &m.node_a));
        let sb = graph.shape_of(&node_id(Side::B, &m.node_b));
        let (Some(sa), Some(sb)) = (sa, sb) else {
            return Err(Error::format("matches", format!("unknown layers {} / {}", m.node_a, m.node_b)));
        };
        matches.push(MatchCandidate {
            node_a: m.node_a.clone(),
            node_b: m.node_b.clone(),
            kind: m.kind,
            width_a: sa[1],
            width_b: sb[1],
            spatial: (m.kind == StitchKind::Conv1x1).then(|| (sa[2], sa[3])),
        });
        for (side, own, other) in [
            (Side::A, &m.node_a, node_id(Side::B, &m.node_b)),
            (Side::B, &m.node_b, node_id(Side::A, &m.node_a)),
        ] {
            stitches.push(StitchEntry {
                id: stitch_id(side, own),
                kind: m.kind,
                donor: other,
                recipient: node_id(side, own),
            });
        }
    }
    for sw in &doc.switches {
        let node = graph
            .node(&sw.id)
            .ok_or_else(|| Error::format("switches", format!("no node {}", sw.id)))?;
        if node.inputs != sw.inputs {
            return Err(Error::format("switches", format!("inputs of {} disagree with the graph", sw.id)));
        }
    }
    Supernetwork::assemble(graph, doc.parents, MatchingPlan { matches }, doc.switches, stitches)
}

pub fn save_supernet(s: &Supernetwork, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, supernet_to_string(s))?;
    Ok(())
}

pub fn load_supernet(path: impl AsRef<Path>) -> Result<Supernetwork> {
    supernet_from_str(&std::fs::read_to_string(path)?)
}
