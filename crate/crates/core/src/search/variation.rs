use rand::Rng;

use super::objective::{constrained_better, ObjectivePoint, Weight};
use crate::phenotype::Genotype;

/// Genes outside `[c1, c2)` from `p1`, inside from `p2`.
pub fn two_point_crossover(p1: &Genotype, p2: &Genotype, c1: usize, c2: usize) -> Genotype {
    assert_eq!(p1.len(), p2.len());
    assert!(c1 <= c2 && c2 <= p1.len());
    let mut g = p1.clone();
    g.0[c1..c2].copy_from_slice(&p2.0[c1..c2]);
    g
}

/// Each gene moves to a different uniformly drawn value with probability `1/ℓ`.
pub fn mutate<R: Rng + ?Sized>(g: &mut Genotype, alphabet: &[u8], rng: &mut R) -> usize {
    let p = 1.0 / g.len() as f64;
    let mut changed = 0;
    for (gene, &a) in g.0.iter_mut().zip(alphabet) {
        if a > 1 && rng.gen_bool(p) {
            let v = rng.gen_range(0..a - 1);
            *gene = if v >= *gene { v + 1 } else { v };
            changed += 1;
        }
    }
    changed
}

/// Two-point crossover with uniformly drawn ordered cuts, then optional mutation.
pub fn ga_generate<R: Rng + ?Sized>(
    p1: &Genotype,
    p2: &Genotype,
    alphabet: &[u8],
    mutation: bool,
    rng: &mut R,
) -> Genotype {
    let l = p1.len();
    let (mut c1, mut c2) = (rng.gen_range(0..=l), rng.gen_range(0..=l));
    if c1 > c2 {
        std::mem::swap(&mut c1, &mut c2);
    }
    let mut child = two_point_crossover(p1, p2, c1, c2);
    if mutation {
        mutate(&mut child, alphabet, rng);
    }
    child
}

/// Which parent (0 or 1) the child replaces: one chosen uniformly among the
/// parents it is constrained-better than, each judged under its own weight.
pub fn ga_replace<R: Rng + ?Sized>(
    child: &ObjectivePoint,
    parents: [(&ObjectivePoint, &Weight); 2],
    t: f64,
    rng: &mut R,
) -> Option<usize> {
    let beaten: Vec<usize> = (0..2)
        .filter(|&k| constrained_better(child, parents[k].0, t, parents[k].1))
        .collect();
    match beaten.len() {
        0 => None,
        1 => Some(beaten[0]),
        _ => Some(beaten[rng.gen_range(0..2)]),
    }
}

/// Kernel size for one linkage-kernel application: `m ~ U{1..max(1, n/c)}`, `k = ⌈n/m⌉`.
pub fn sample_kernel_size<R: Rng + ?Sized>(n: usize, c: usize, rng: &mut R) -> usize {
    let m_max = (n / c.max(1)).max(1);
    let m = rng.gen_range(1..=m_max);
    n.div_ceil(m)
}

/// The `k` nearest genotypes by Hamming distance; the individual itself comes
/// first, remaining ties go to the lower index.
pub fn knn_neighborhood(population: &[Genotype], individual: usize, k: usize) -> Vec<usize> {
    let me = &population[individual];
    let mut others: Vec<(usize, usize)> = (0..population.len())
        .filter(|&j| j != individual)
        .map(|j| (me.hamming(&population[j]), j))
        .collect();
    others.sort_unstable();
    std::iter::once(individual)
        .chain(others.into_iter().map(|(_, j)| j))
        .take(k.max(1))
        .collect()
}
