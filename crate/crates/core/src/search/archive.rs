use super::objective::ObjectivePoint;
use crate::phenotype::Genotype;

#[derive(Clone, Debug, PartialEq)]
pub struct ArchiveEntry {
    pub genotype: Genotype,
    pub point: ObjectivePoint,
}

/// Elitist front of feasible, mutually non-dominated solutions, kept sorted by `f1`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Archive {
    entries: Vec<ArchiveEntry>,
}

impl Archive {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entries(&self) -> &[ArchiveEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Drops members below the accuracy threshold.
    pub fn prune(&mut self, t: f64) {
        self.entries.retain(|e| e.point.accuracy >= t);
    }

    /// Inserts a feasible candidate no member weakly dominates, evicting what it
    /// dominates. Returns whether it was inserted.
    pub fn update(&mut self, genotype: &Genotype, point: ObjectivePoint, t: f64) -> bool {
        self.prune(t);
        if point.accuracy < t || self.entries.iter().any(|e| e.point.weakly_dominates(&point)) {
            return false;
        }
        self.entries.retain(|e| !point.weakly_dominates(&e.point));
        let pos = self
            .entries
            .partition_point(|e| (e.point.f1, e.point.f2) < (point.f1, point.f2));
        self.entries.insert(
            pos,
            ArchiveEntry {
                genotype: genotype.clone(),
                point,
            },
        );
        true
    }

    pub fn points(&self) -> Vec<(f64, f64)> {
        self.entries.iter().map(|e| (e.point.f1, e.point.f2)).collect()
    }

    pub fn hypervolume(&self) -> f64 {
        hypervolume_2d(&self.points(), HV_REFERENCE)
    }
}

pub const HV_REFERENCE: (f64, f64) = (1.0, 1.1);

/// Area dominated by `front` inside the box bounded by `reference` (minimization).
/// Points outside the box contribute nothing; dominated points are harmless.
pub fn hypervolume_2d(front: &[(f64, f64)], reference: (f64, f64)) -> f64 {
    let mut pts: Vec<(f64, f64)> = front
        .iter()
        .copied()
        .filter(|&(a, b)| a < reference.0 && b < reference.1)
        .collect();
    pts.sort_by(|x, y| x.partial_cmp(y).expect("finite objectives"));
    let mut area = 0.0;
    let mut ceiling = reference.1;
    for (f1, f2) in pts {
        if f2 < ceiling {
            area += (reference.0 - f1) * (ceiling - f2);
            ceiling = f2;
        }
    }
    area
}
