use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::error::{Error, Result};
use crate::tensorcore::{LayerSpec, Tensor};

/// Shape of one task sample (batch dimension excluded) and its class count.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TaskSignature {
    pub input_shape: Vec<usize>,
    pub num_classes: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    pub id: String,
    pub spec: LayerSpec,
    pub inputs: Vec<String>,
    pub weights: Vec<Tensor>,
}

impl Node {
    pub fn new(id: impl Into<String>, spec: LayerSpec, inputs: &[&str], weights: Vec<Tensor>) -> Self {
        Node {
            id: id.into(),
            spec,
            inputs: inputs.iter().map(|s| s.to_string()).collect(),
            weights,
        }
    }
}

/// Output of every executed node in one forward pass.
#[derive(Clone, Debug, Default)]
pub struct ActivationRecord {
    pub values: BTreeMap<String, Tensor>,
}

impl ActivationRecord {
    pub fn get(&self, id: &str) -> Option<&Tensor> {
        self.values.get(id)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Deterministic topological order of a graph given as `node -> inputs`.
///
/// Ready nodes are emitted smallest id first. Inputs that are not keys of the
/// map are treated as external sources and ignored.
pub fn topological_order(inputs_of: &BTreeMap<String, Vec<String>>) -> Result<Vec<String>> {
    let mut indegree: BTreeMap<&str, usize> = inputs_of.keys().map(|k| (k.as_str(), 0)).collect();
    let mut consumers: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (id, ins) in inputs_of {
        for i in ins {
            if inputs_of.contains_key(i) {
                *indegree.get_mut(id.as_str()).unwrap() += 1;
                consumers.entry(i.as_str()).or_default().push(id.as_str());
            }
        }
    }
    let mut ready: BTreeSet<&str> = indegree.iter().filter(|(_, &d)| d == 0).map(|(k, _)| *k).collect();
    let mut order = Vec::with_capacity(inputs_of.len());
    while let Some(id) = ready.pop_first() {
        order.push(id.to_string());
        for c in consumers.get(id).into_iter().flatten() {
            let d = indegree.get_mut(c).unwrap();
            *d -= 1;
            if *d == 0 {
                ready.insert(c);
            }
        }
    }
    if order.len() == inputs_of.len() {
        return Ok(order);
    }
    // every remaining node has an unprocessed input; walking inputs must revisit a node
    let remaining: BTreeSet<&str> = indegree.iter().filter(|(_, &d)| d > 0).map(|(k, _)| *k).collect();
    let mut path: Vec<&str> = Vec::new();
    let mut seen: HashMap<&str, usize> = HashMap::new();
    let mut cur = *remaining.iter().next().unwrap();
    loop {
        if let Some(&pos) = seen.get(cur) {
            let cycle: Vec<String> = path[pos..].iter().rev().map(|s| s.to_string()).collect();
            return Err(Error::Cycle { nodes: cycle });
        }
        seen.insert(cur, path.len());
        path.push(cur);
        cur = inputs_of[cur]
            .iter()
            .map(String::as_str)
            .find(|i| remaining.contains(i))
            .expect("remaining node has a remaining input");
    }
}

/// An immutable directed acyclic computation graph with one input and one output.
#[derive(Clone, Debug)]
pub struct NetworkGraph {
    name: String,
    task: TaskSignature,
    nodes: Vec<Node>,
    index: HashMap<String, usize>,
    input: usize,
    output: usize,
    order: Vec<usize>,
    input_idx: Vec<Vec<usize>>,
    /// Per-node output shape at batch size 1.
    shapes: Vec<Vec<usize>>,
}

impl PartialEq for NetworkGraph {
    fn eq(&self, other: &Self) -> bool {
        self.name == other.name
            && self.task == other.task
            && self.nodes == other.nodes
            && self.input == other.input
            && self.output == other.output
    }
}

impl NetworkGraph {
    /// Validates and builds a graph: unique ids, known inputs, arity, weight
    /// shapes, acyclicity and shape propagation from the task input shape.
    pub fn new(
        name: impl Into<String>,
        task: TaskSignature,
        nodes: Vec<Node>,
        input: &str,
        output: &str,
    ) -> Result<Self> {
        let mut index = HashMap::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            if index.insert(n.id.clone(), i).is_some() {
                return Err(Error::Graph(format!("duplicate node id {}", n.id)));
            }
        }
        let input_i = *index
            .get(input)
            .ok_or_else(|| Error::Graph(format!("input node {input} not found")))?;
        let output_i = *index
            .get(output)
            .ok_or_else(|| Error::Graph(format!("output node {output} not found")))?;
        let mut input_idx = Vec::with_capacity(nodes.len());
        for n in &nodes {
            n.spec.validate().map_err(|e| context(&n.id, e))?;
            let is_input = matches!(n.spec, LayerSpec::Input);
            if is_input != (n.id == input) {
                return Err(Error::Graph(format!(
                    "node {} : only the designated input node may have kind input",
                    n.id
                )));
            }
            if n.inputs.len() != n.spec.arity() {
                return Err(Error::Graph(format!(
                    "node {} ({}) expects {} inputs, has {}",
                    n.id,
                    n.spec.kind_name(),
                    n.spec.arity(),
                    n.inputs.len()
                )));
            }
            n.spec.check_weights(&n.weights).map_err(|e| context(&n.id, e))?;
            let mut idx = Vec::with_capacity(n.inputs.len());
            for i in &n.inputs {
                idx.push(
                    *index
                        .get(i)
                        .ok_or_else(|| Error::Graph(format!("node {} reads unknown node {i}", n.id)))?,
                );
            }
            input_idx.push(idx);
        }
        if task.input_shape.is_empty() || task.input_shape.contains(&0) {
            return Err(Error::Graph(format!("invalid task input shape {:?}", task.input_shape)));
        }
        let edges: BTreeMap<String, Vec<String>> = nodes.iter().map(|n| (n.id.clone(), n.inputs.clone())).collect();
        let order: Vec<usize> = topological_order(&edges)?.iter().map(|id| index[id]).collect();

        let mut shapes: Vec<Vec<usize>> = vec![Vec::new(); nodes.len()];
        for &i in &order {
            shapes[i] = if i == input_i {
                let mut s = vec![1];
                s.extend_from_slice(&task.input_shape);
                s
            } else {
                let ins: Vec<&[usize]> = input_idx[i].iter().map(|&j| shapes[j].as_slice()).collect();
                nodes[i].spec.output_shape(&ins).map_err(|e| context(&nodes[i].id, e))?
            };
        }
        Ok(NetworkGraph {
            name: name.into(),
            task,
            nodes,
            index,
            input: input_i,
            output: output_i,
            order,
            input_idx,
            shapes,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn task(&self) -> &TaskSignature {
        &self.task
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: &str) -> Option<&Node> {
        self.index.get(id).map(|&i| &self.nodes[i])
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn input_id(&self) -> &str {
        &self.nodes[self.input].id
    }

    pub fn output_id(&self) -> &str {
        &self.nodes[self.output].id
    }

    /// Output shape of a node at batch size 1.
    pub fn shape_of(&self, id: &str) -> Option<&[usize]> {
        self.index.get(id).map(|&i| self.shapes[i].as_slice())
    }

    pub fn topological_order(&self) -> Vec<&str> {
        self.order.iter().map(|&i| self.nodes[i].id.as_str()).collect()
    }

    /// Ids of nodes that read `id`, in topological order.
    pub fn consumers(&self, id: &str) -> Vec<&str> {
        let Some(&target) = self.index.get(id) else {
            return Vec::new();
        };
        self.order
            .iter()
            .filter(|&&i| self.input_idx[i].contains(&target))
            .map(|&i| self.nodes[i].id.as_str())
            .collect()
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub(crate) fn node_index(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub(crate) fn set_weights(&mut self, i: usize, weights: Vec<Tensor>) -> Result<()> {
        self.nodes[i].spec.check_weights(&weights)?;
        self.nodes[i].weights = weights;
        Ok(())
    }

    pub fn into_nodes(self) -> Vec<Node> {
        self.nodes
    }

    fn check_batch(&self, batch: &Tensor) -> Result<()> {
        if batch.shape().len() != self.task.input_shape.len() + 1 || batch.shape()[1..] != self.task.input_shape[..] {
            return Err(Error::shape(
                format!("graph {}", self.name),
                format!(
                    "batch shape {:?} does not match input shape [B, {:?}]",
                    batch.shape(),
                    self.task.input_shape
                ),
            ));
        }
        Ok(())
    }

    fn eval_node(&self, i: usize, values: &[Option<Tensor>]) -> Result<Tensor> {
        let ins: Vec<&Tensor> = self.input_idx[i]
            .iter()
            .map(|&j| values[j].as_ref().expect("inputs computed before consumers"))
            .collect();
        let node = &self.nodes[i];
        node.spec.forward(&node.weights, &ins).map_err(|e| context(&node.id, e))
    }

    /// Runs the graph and returns the output node's value.
    pub fn forward(&self, batch: &Tensor) -> Result<Tensor> {
        self.check_batch(batch)?;
        let mut remaining_uses = vec![0usize; self.nodes.len()];
        for ins in &self.input_idx {
            for &j in ins {
                remaining_uses[j] += 1;
            }
        }
        let mut values: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        for &i in &self.order {
            let v = if i == self.input {
                batch.clone()
            } else {
                let v = self.eval_node(i, &values)?;
                for &j in &self.input_idx[i] {
                    remaining_uses[j] -= 1;
                    if remaining_uses[j] == 0 && j != self.output {
                        values[j] = None;
                    }
                }
                v
            };
            values[i] = Some(v);
        }
        Ok(values[self.output].take().expect("output computed"))
    }

    /// Runs the graph keeping every node's output, indexed like [`Self::nodes`].
    pub(crate) fn forward_all(&self, batch: &Tensor) -> Result<Vec<Tensor>> {
        self.check_batch(batch)?;
        let mut values: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        for &i in &self.order {
            values[i] = Some(if i == self.input {
                batch.clone()
            } else {
                self.eval_node(i, &values)?
            });
        }
        Ok(values.into_iter().map(|v| v.expect("all nodes executed")).collect())
    }

    /// Runs the graph and records every node's output.
    pub fn forward_capture(&self, batch: &Tensor) -> Result<(Tensor, ActivationRecord)> {
        let values = self.forward_all(batch)?;
        let out = values[self.output].clone();
        let record = ActivationRecord {
            values: self.nodes.iter().map(|n| n.id.clone()).zip(values).collect(),
        };
        Ok((out, record))
    }

    /// Back-propagates `output_grad` through the graph, returning per-node
    /// weight gradients indexed like [`Self::nodes`].
    pub(crate) fn backward(&self, values: &[Tensor], output_grad: Tensor) -> Result<Vec<Vec<Tensor>>> {
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[self.output] = Some(output_grad);
        let mut weight_grads: Vec<Vec<Tensor>> = vec![Vec::new(); self.nodes.len()];
        for &i in self.order.iter().rev() {
            if i == self.input {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            let ins: Vec<&Tensor> = self.input_idx[i].iter().map(|&j| &values[j]).collect();
            let (dx, dw) = node.spec.backward(&node.weights, &ins, &g).map_err(|e| context(&node.id, e))?;
            weight_grads[i] = dw;
            for (&j, d) in self.input_idx[i].iter().zip(dx) {
                match &mut grads[j] {
                    Some(acc) => acc.data_mut().iter_mut().zip(d.data()).for_each(|(a, b)| *a += b),
                    slot => *slot = Some(d),
                }
            }
        }
        Ok(weight_grads)
    }

    /// Multiply-adds of one forward pass at batch size 1.
    pub fn network_madds(&self) -> u64 {
        self.order
            .iter()
            .filter(|&&i| i != self.input)
            .map(|&i| {
                let ins: Vec<&[usize]> = self.input_idx[i].iter().map(|&j| self.shapes[j].as_slice()).collect();
                self.nodes[i].spec.madds(&ins).expect("shapes validated at construction")
            })
            .sum()
    }

    /// Keeps only nodes with a path to the output (and the input node).
    pub fn prune_dead(&self) -> NetworkGraph {
        let mut live = vec![false; self.nodes.len()];
        live[self.output] = true;
        live[self.input] = true;
        for &i in self.order.iter().rev() {
            if live[i] {
                for &j in &self.input_idx[i] {
                    live[j] = true;
                }
            }
        }
        if live.iter().all(|&l| l) {
            return self.clone();
        }
        let nodes: Vec<Node> = self
            .nodes
            .iter()
            .zip(&live)
            .filter(|(_, &l)| l)
            .map(|(n, _)| n.clone())
            .collect();
        NetworkGraph::new(
            self.name.clone(),
            self.task.clone(),
            nodes,
            self.input_id(),
            self.output_id(),
        )
        .expect("a subgraph closed under inputs stays valid")
    }
}

fn context(id: &str, e: Error) -> Error {
    match e {
        Error::Shape { layer, detail } => Error::Shape {
            layer: format!("node {id} ({layer})"),
            detail,
        },
        other => other,
    }
}

/// Result of comparing a graph's outputs with reference outputs.
#[derive(Clone, Debug, PartialEq)]
pub struct EquivalenceReport {
    pub max_abs_diff: f32,
    pub pass: bool,
}

/// Checks that `graph` reproduces every `(input, expected output)` pair within `tol`.
pub fn verify_equivalence(graph: &NetworkGraph, pairs: &[(Tensor, Tensor)], tol: f32) -> Result<EquivalenceReport> {
    let mut worst = 0.0f32;
    for (x, expected) in pairs {
        let y = graph.forward(x)?;
        let d = y.max_abs_diff(expected)?;
        if d.is_nan() {
            worst = f32::INFINITY;
        } else {
            worst = worst.max(d);
        }
    }
    Ok(EquivalenceReport {
        max_abs_diff: worst,
        pass: worst <= tol,
    })
}
