use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::candidates::MatchCandidate;
use crate::netgraph::NetworkGraph;

/// Accepted matches in genotype order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchingPlan {
    pub matches: Vec<MatchCandidate>,
}

impl MatchingPlan {
    pub fn len(&self) -> usize {
        self.matches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matches.is_empty()
    }

    /// Decision variables of the resulting supernetwork.
    pub fn genotype_len(&self) -> usize {
        genotype_len(self.len())
    }
}

/// `2·matches + 1`: one switch per matched layer on each side plus the output switch.
pub fn genotype_len(matches: usize) -> usize {
    2 * matches + 1
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MatchingOutcome {
    pub plan: MatchingPlan,
    /// Set when the expansion budget ran out; `plan` is then the best found so far.
    pub timed_out: bool,
    pub expansions: u64,
}

pub const DEFAULT_EXPANSION_BUDGET: u64 = 2_000_000;

/// Dataflow between the layers of both parents, with switch edges contracted:
/// a match (a, b) routes b's output to a's consumers and a's output to b's.
struct DepGraph {
    succ: Vec<Vec<usize>>,
    consumers: Vec<Vec<usize>>,
    index_a: HashMap<String, usize>,
    index_b: HashMap<String, usize>,
}

impl DepGraph {
    fn new(a: &NetworkGraph, b: &NetworkGraph) -> Self {
        let mut index_a = HashMap::new();
        let mut index_b = HashMap::new();
        for (i, n) in a.nodes().iter().enumerate() {
            index_a.insert(n.id.clone(), i);
        }
        let off = a.nodes().len();
        for (i, n) in b.nodes().iter().enumerate() {
            index_b.insert(n.id.clone(), off + i);
        }
        let mut consumers = vec![Vec::new(); off + b.nodes().len()];
        for (g, idx) in [(a, &index_a), (b, &index_b)] {
            for n in g.nodes() {
                for input in &n.inputs {
                    consumers[idx[input]].push(idx[&n.id]);
                }
            }
        }
        DepGraph {
            succ: consumers.clone(),
            consumers,
            index_a,
            index_b,
        }
    }

    fn endpoints(&self, c: &MatchCandidate) -> (usize, usize) {
        (self.index_a[&c.node_a], self.index_b[&c.node_b])
    }

    fn add(&mut self, ia: usize, ib: usize) {
        for (from, to) in [(ib, ia), (ia, ib)] {
            let extra = self.consumers[to].clone();
            self.succ[from].extend(extra);
        }
    }

    fn remove(&mut self, ia: usize, ib: usize) {
        for (from, to) in [(ia, ib), (ib, ia)] {
            let n = self.succ[from].len() - self.consumers[to].len();
            self.succ[from].truncate(n);
        }
    }

    fn on_cycle(&self, start: usize) -> bool {
        let mut seen = vec![false; self.succ.len()];
        let mut stack: Vec<usize> = self.succ[start].clone();
        while let Some(v) = stack.pop() {
            if v == start {
                return true;
            }
            if !std::mem::replace(&mut seen[v], true) {
                stack.extend_from_slice(&self.succ[v]);
            }
        }
        false
    }

    /// Every new cycle passes through a new edge, and all new edges leave a or b.
    fn creates_cycle(&mut self, ia: usize, ib: usize) -> bool {
        self.add(ia, ib);
        let cyc = self.on_cycle(ia) || self.on_cycle(ib);
        self.remove(ia, ib);
        cyc
    }
}

/// Whether accepting `candidate` on top of `accepted` makes the merged graph cyclic.
pub fn would_create_cycle(
    a: &NetworkGraph,
    b: &NetworkGraph,
    accepted: &MatchingPlan,
    candidate: &MatchCandidate,
) -> bool {
    let mut g = DepGraph::new(a, b);
    for m in &accepted.matches {
        let (ia, ib) = g.endpoints(m);
        g.add(ia, ib);
    }
    let (ia, ib) = g.endpoints(candidate);
    g.creates_cycle(ia, ib)
}

struct Search<'c> {
    cands: &'c [MatchCandidate],
    ends: Vec<(usize, usize)>,
    graph: DepGraph,
    used: Vec<bool>,
    current: Vec<usize>,
    best: Vec<usize>,
    expansions: u64,
    budget: u64,
    timed_out: bool,
}

impl Search<'_> {
    /// Distinct free endpoints among the remaining candidates, per side.
    fn bound(&self, from: usize) -> usize {
        let mut seen_a = Vec::new();
        let mut seen_b = Vec::new();
        for &(ia, ib) in &self.ends[from..] {
            if self.used[ia] || self.used[ib] {
                continue;
            }
            if !seen_a.contains(&ia) {
                seen_a.push(ia);
            }
            if !seen_b.contains(&ib) {
                seen_b.push(ib);
            }
        }
        self.current.len() + seen_a.len().min(seen_b.len())
    }

    fn run(&mut self, i: usize) {
        if self.timed_out {
            return;
        }
        self.expansions += 1;
        if self.expansions > self.budget {
            self.timed_out = true;
            return;
        }
        if self.current.len() > self.best.len() {
            self.best = self.current.clone();
        }
        if i == self.cands.len() || self.bound(i) <= self.best.len() {
            return;
        }
        let (ia, ib) = self.ends[i];
        if !self.used[ia] && !self.used[ib] && !self.graph.creates_cycle(ia, ib) {
            self.used[ia] = true;
            self.used[ib] = true;
            self.graph.add(ia, ib);
            self.current.push(i);
            self.run(i + 1);
            self.current.pop();
            self.graph.remove(ia, ib);
            self.used[ia] = false;
            self.used[ib] = false;
        }
        self.run(i + 1);
    }
}

/// Largest node-disjoint acyclic subset of `candidates` by depth-first branch
/// and bound (include before exclude). Ties go to the first maximum found,
/// which favours earlier candidates.
pub fn acyclic_max_matching(
    a: &NetworkGraph,
    b: &NetworkGraph,
    candidates: &[MatchCandidate],
    budget: u64,
) -> MatchingOutcome {
    let graph = DepGraph::new(a, b);
    let ends = candidates.iter().map(|c| graph.endpoints(c)).collect();
    let mut s = Search {
        cands: candidates,
        ends,
        used: vec![false; graph.succ.len()],
        graph,
        current: Vec::new(),
        best: Vec::new(),
        expansions: 0,
        budget,
        timed_out: false,
    };
    s.run(0);
    if s.timed_out {
        log::warn!(
            "matching stopped after {} expansions; returning {} matches",
            budget,
            s.best.len()
        );
    }
    MatchingOutcome {
        plan: MatchingPlan {
            matches: s.best.iter().map(|&i| candidates[i].clone()).collect(),
        },
        timed_out: s.timed_out,
        expansions: s.expansions,
    }
}
