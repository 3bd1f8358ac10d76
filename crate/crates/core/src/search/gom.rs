use rand::seq::SliceRandom;
use rand::Rng;

use super::objective::{constrained_better, ObjectivePoint, Weight};
use crate::error::Result;
use crate::phenotype::{maybe_skip, EvalResult, Evaluator, Genotype};

/// A population member together with its last evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct Individual {
    pub genotype: Genotype,
    pub result: EvalResult,
    pub point: ObjectivePoint,
}

impl Individual {
    pub fn new(genotype: Genotype, result: EvalResult, reference_madds: u64) -> Self {
        let point = ObjectivePoint::new(result.accuracy, result.madds, reference_madds);
        Individual {
            genotype,
            result,
            point,
        }
    }
}

/// One pass of gene-pool optimal mixing over a set of linkage subsets, in random order.
#[derive(Clone, Debug)]
pub struct GomApplication {
    subsets: Vec<Vec<usize>>,
    pos: usize,
    pub(crate) proposals: usize,
}

impl GomApplication {
    pub fn new<R: Rng + ?Sized>(mut subsets: Vec<Vec<usize>>, rng: &mut R) -> Self {
        subsets.shuffle(rng);
        GomApplication {
            subsets,
            pos: 0,
            proposals: 0,
        }
    }

    /// Next candidate that differs from `current`, built by copying one subset
    /// from a random donor. `None` once every subset has been tried.
    pub fn next_candidate<R: Rng + ?Sized>(
        &mut self,
        current: &Genotype,
        donors: &[&Genotype],
        rng: &mut R,
    ) -> Option<Genotype> {
        if donors.is_empty() {
            self.pos = self.subsets.len();
            return None;
        }
        while self.pos < self.subsets.len() {
            let subset = &self.subsets[self.pos];
            self.pos += 1;
            let donor = donors[rng.gen_range(0..donors.len())];
            let mut cand = current.clone();
            for &i in subset {
                cand.0[i] = donor.0[i];
            }
            if cand != *current {
                self.proposals += 1;
                return Some(cand);
            }
        }
        None
    }

    pub fn is_done(&self) -> bool {
        self.pos >= self.subsets.len()
    }
}

/// Whether a mixing result replaces the current solution: strictly better, or equal objectives.
pub fn gom_accept(candidate: &ObjectivePoint, current: &ObjectivePoint, t: f64, w: &Weight) -> bool {
    constrained_better(candidate, current, t, w) || candidate.same_objectives(current)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct GomStats {
    pub evaluations: usize,
    pub skipped: usize,
    /// The evaluation budget ran out before every subset was tried.
    pub exhausted: bool,
}

/// Runs one full application synchronously, charging `budget` for every
/// evaluation including skipped ones.
#[allow(clippy::too_many_arguments)]
pub fn gom_step<R: Rng + ?Sized>(
    individual: &mut Individual,
    subsets: Vec<Vec<usize>>,
    donors: &[&Genotype],
    weight: &Weight,
    t: f64,
    evaluator: &dyn Evaluator,
    budget: &mut usize,
    rng: &mut R,
) -> Result<GomStats> {
    let mut app = GomApplication::new(subsets, rng);
    let mut stats = GomStats::default();
    let reference = evaluator.reference_madds();
    while let Some(cand) = app.next_candidate(&individual.genotype, donors, rng) {
        if *budget == 0 {
            stats.exhausted = true;
            break;
        }
        *budget -= 1;
        stats.evaluations += 1;
        let result = match maybe_skip(&individual.result, &individual.genotype, &cand)? {
            Some(r) => {
                stats.skipped += 1;
                r
            }
            None => evaluator.evaluate(&cand)?,
        };
        let next = Individual::new(cand, result, reference);
        if gom_accept(&next.point, &individual.point, t, weight) {
            *individual = next;
        }
    }
    Ok(stats)
}
