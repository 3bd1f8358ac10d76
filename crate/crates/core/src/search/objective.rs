use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Both objectives are minimized: `f1 = 1 − accuracy`, `f2 = madds / reference madds`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectivePoint {
    pub f1: f64,
    pub f2: f64,
    pub accuracy: f64,
    pub madds: u64,
}

impl ObjectivePoint {
    pub fn new(accuracy: f64, madds: u64, reference_madds: u64) -> Self {
        ObjectivePoint {
            f1: 1.0 - accuracy,
            f2: madds as f64 / reference_madds.max(1) as f64,
            accuracy,
            madds,
        }
    }

    /// Same objective values.
    pub fn same_objectives(&self, other: &ObjectivePoint) -> bool {
        self.f1 == other.f1 && self.f2 == other.f2
    }

    pub fn weakly_dominates(&self, other: &ObjectivePoint) -> bool {
        self.f1 <= other.f1 && self.f2 <= other.f2
    }
}

pub type Weight = [f64; 2];

pub const WEIGHT_EPS: f64 = 1e-6;

/// `max(w1·f1, w2·f2)` against the utopian point (0, 0); lower is better.
pub fn tschebysheff(p: &ObjectivePoint, w: &Weight) -> f64 {
    (w[0] * p.f1).max(w[1] * p.f2)
}

/// Accuracy threshold after `used` of `budget` evaluations: rises linearly to
/// 0.5 at half the budget, then stays.
pub fn steering_threshold(used: usize, budget: usize) -> f64 {
    if budget == 0 {
        return 0.5;
    }
    0.5 * (2.0 * used as f64 / budget as f64).min(1.0)
}

/// Feasible (accuracy ≥ t) beats infeasible; two infeasible compare by
/// accuracy; two feasible compare by scalarization. Ties are not better.
pub fn constrained_better(a: &ObjectivePoint, b: &ObjectivePoint, t: f64, w: &Weight) -> bool {
    match (a.accuracy >= t, b.accuracy >= t) {
        (true, false) => true,
        (false, true) => false,
        (false, false) => a.accuracy > b.accuracy,
        (true, true) => tschebysheff(a, w) < tschebysheff(b, w),
    }
}

/// `n` weight vectors `(w, 1 − w)` with `w` evenly spaced over `[ε, 1 − ε]`.
pub fn weight_grid(n: usize) -> Vec<Weight> {
    match n {
        0 => Vec::new(),
        1 => vec![[0.5, 0.5]],
        _ => (0..n)
            .map(|i| {
                let w = WEIGHT_EPS + (1.0 - 2.0 * WEIGHT_EPS) * i as f64 / (n - 1) as f64;
                [w, 1.0 - w]
            })
            .collect(),
    }
}

/// Visits the weights in random order, giving each to the not-yet-assigned
/// individual that scores best under it (lowest index on ties).
/// Returns `assignment[individual] = weight index`.
pub fn assign_weights<R: Rng + ?Sized>(points: &[ObjectivePoint], weights: &[Weight], rng: &mut R) -> Vec<usize> {
    assert_eq!(points.len(), weights.len(), "one weight per individual");
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.shuffle(rng);
    let mut assignment = vec![usize::MAX; points.len()];
    for wi in order {
        let mut best: Option<(usize, f64)> = None;
        for (i, p) in points.iter().enumerate() {
            if assignment[i] != usize::MAX {
                continue;
            }
            let s = tschebysheff(p, &weights[wi]);
            if best.is_none_or(|(_, b)| s < b) {
                best = Some((i, s));
            }
        }
        assignment[best.expect("an unassigned individual remains").0] = wi;
    }
    assignment
}
