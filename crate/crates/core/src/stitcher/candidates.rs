use serde::{Deserialize, Serialize};

use crate::netgraph::NetworkGraph;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StitchKind {
    Linear,
    Conv1x1,
}

/// A shape-compatible pair of layers, one from each parent.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchCandidate {
    pub node_a: String,
    pub node_b: String,
    pub kind: StitchKind,
    /// Features (linear) or channels (conv) of the A-side output.
    pub width_a: usize,
    pub width_b: usize,
    /// `(h, w)` shared by both outputs for conv stitches.
    pub spatial: Option<(usize, usize)>,
}

/// Restricts which layers may be matched.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateFilter {
    /// Keep every `stride`-th eligible layer of each parent (in topological order).
    pub stride: usize,
}

impl Default for CandidateFilter {
    fn default() -> Self {
        CandidateFilter { stride: 1 }
    }
}

/// Eligible layers of a parent in topological order: everything except the
/// input and output nodes.
pub(crate) fn eligible(g: &NetworkGraph, filter: &CandidateFilter) -> Vec<String> {
    g.topological_order()
        .into_iter()
        .filter(|id| *id != g.input_id() && *id != g.output_id())
        .step_by(filter.stride.max(1))
        .map(str::to_string)
        .collect()
}

fn stitch_for(sa: &[usize], sb: &[usize]) -> Option<(StitchKind, Option<(usize, usize)>)> {
    match (sa, sb) {
        ([_, _], [_, _]) => Some((StitchKind::Linear, None)),
        ([_, _, ha, wa], [_, _, hb, wb]) if ha == hb && wa == wb => Some((StitchKind::Conv1x1, Some((*ha, *wa)))),
        _ => None,
    }
}

/// All stitchable pairs, A-topological then B-topological.
pub fn find_candidates(a: &NetworkGraph, b: &NetworkGraph, filter: &CandidateFilter) -> Vec<MatchCandidate> {
    let eb = eligible(b, filter);
    let mut out = Vec::new();
    for na in eligible(a, filter) {
        let sa = a.shape_of(&na).expect("eligible node");
        for nb in &eb {
            let sb = b.shape_of(nb).expect("eligible node");
            if let Some((kind, spatial)) = stitch_for(sa, sb) {
                out.push(MatchCandidate {
                    node_a: na.clone(),
                    node_b: nb.clone(),
                    kind,
                    width_a: sa[1],
                    width_b: sb[1],
                    spatial,
                });
            }
        }
    }
    out
}
