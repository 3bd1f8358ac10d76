use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::error::Result;
use crate::phenotype::{alphabet, EvalResult, Evaluator, Genotype};

/// Cheap stand-in for a supernetwork: `k` A-side genes, `k` B-side genes and an
/// output gene. A-side genes matter when the output reads A or the ensemble, and
/// likewise for B.
struct ToyEvaluator {
    k: usize,
}

impl ToyEvaluator {
    fn active(&self, g: &Genotype) -> Vec<bool> {
        let o = g.output_gene();
        let mut mask = vec![false; 2 * self.k + 1];
        for (i, m) in mask.iter_mut().enumerate().take(2 * self.k) {
            *m = if i < self.k { o != 1 } else { o != 0 };
        }
        mask[2 * self.k] = true;
        mask
    }
}

fn jitter(i: usize) -> f64 {
    // fixed pseudo-random contribution in [-1, 1)
    ((i as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) >> 40) as f64 / (1u64 << 23) as f64 - 1.0
}

impl Evaluator for ToyEvaluator {
    fn genotype_len(&self) -> usize {
        2 * self.k + 1
    }

    fn reference_madds(&self) -> u64 {
        160
    }

    fn evaluate(&self, g: &Genotype) -> Result<EvalResult> {
        g.validate(self.genotype_len())?;
        let mask = self.active(g);
        let (mut acc, mut madds) = match g.output_gene() {
            0 => (0.6, 100i64),
            1 => (0.7, 60),
            _ => (0.75, 160),
        };
        for i in 0..2 * self.k {
            if mask[i] && g.0[i] == 1 {
                acc += 0.05 * jitter(i);
                madds += (10.0 * jitter(i + 97)).round() as i64;
            }
        }
        Ok(EvalResult {
            accuracy: acc.clamp(0.0, 1.0),
            madds: madds.max(1) as u64,
            active_mask: mask,
            skipped: false,
            probabilities: None,
        })
    }
}

fn point(f1: f64, f2: f64) -> ObjectivePoint {
    ObjectivePoint {
        f1,
        f2,
        accuracy: 1.0 - f1,
        madds: (f2 * 1000.0) as u64,
    }
}

fn cfg(algorithm: Algorithm, n: usize, budget: usize, seed: u64) -> RunConfig {
    RunConfig {
        algorithm,
        population_size: n,
        budget,
        seed,
        ..RunConfig::default()
    }
}

#[test]
fn tschebysheff_examples() {
    assert!((tschebysheff(&point(0.2, 0.6), &[0.5, 0.5]) - 0.3).abs() < 1e-12);
    assert_eq!(tschebysheff(&point(0.0, 0.0), &[0.3, 0.7]), 0.0);
    let (a, b) = (point(0.2, 0.6), point(0.5, 0.1));
    let w = [0.4, 0.6];
    let w2 = [0.8, 1.2];
    assert!((tschebysheff(&a, &w2) - 2.0 * tschebysheff(&a, &w)).abs() < 1e-12);
    assert_eq!(
        tschebysheff(&a, &w) < tschebysheff(&b, &w),
        tschebysheff(&a, &w2) < tschebysheff(&b, &w2)
    );
}

#[test]
fn constrained_better_examples() {
    let w = [0.5, 0.5];
    let feasible_costly = ObjectivePoint::new(0.6, 1000, 100);
    let infeasible_cheap = ObjectivePoint::new(0.4, 1, 100);
    assert!(constrained_better(&feasible_costly, &infeasible_cheap, 0.5, &w));
    assert!(!constrained_better(&infeasible_cheap, &feasible_costly, 0.5, &w));
    // both infeasible: accuracy decides
    let worse = ObjectivePoint::new(0.3, 1, 100);
    assert!(constrained_better(&infeasible_cheap, &worse, 0.5, &w));
    // t = 0 is pure scalarization
    let (a, b) = (point(0.2, 0.3), point(0.1, 0.5));
    assert_eq!(
        constrained_better(&a, &b, 0.0, &w),
        tschebysheff(&a, &w) < tschebysheff(&b, &w)
    );
    assert!(!constrained_better(&a, &a, 0.0, &w));
}

#[test]
fn steering_ramps_then_holds() {
    assert_eq!(steering_threshold(0, 100), 0.0);
    assert_eq!(steering_threshold(25, 100), 0.25);
    assert_eq!(steering_threshold(50, 100), 0.5);
    assert_eq!(steering_threshold(99, 100), 0.5);
    let mut prev = 0.0;
    for e in 0..=300 {
        let t = steering_threshold(e, 300);
        assert!(t >= prev);
        prev = t;
    }
}

#[test]
fn weight_grid_spans_open_interval() {
    let w = weight_grid(5);
    assert_eq!(w.len(), 5);
    assert_eq!(w[0][0], WEIGHT_EPS);
    assert!((w[4][0] - (1.0 - WEIGHT_EPS)).abs() < 1e-15);
    assert!(w.iter().all(|[a, b]| *a > 0.0 && *b > 0.0 && (a + b - 1.0).abs() < 1e-15));
    assert_eq!(weight_grid(1), vec![[0.5, 0.5]]);
}

#[test]
fn assign_weights_two_by_two() {
    let pts = [point(0.0, 1.0), point(1.0, 0.0)];
    let weights = [[WEIGHT_EPS, 1.0 - WEIGHT_EPS], [1.0 - WEIGHT_EPS, WEIGHT_EPS]];
    for seed in 0..50 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // (0,1) scores ε·0 vs (1−ε)·1 under the first weight... the low-f1 point wants the high w1 weight
        assert_eq!(assign_weights(&pts, &weights, &mut rng), vec![1, 0]);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert_eq!(assign_weights(&[point(0.3, 0.3)], &[[0.5, 0.5]], &mut rng), vec![0]);
}

proptest! {
    #[test]
    fn assign_weights_is_bijection(pts in prop::collection::vec((0.0f64..1.0, 0.0f64..1.5), 1..40), seed: u64) {
        let points: Vec<_> = pts.iter().map(|&(a, b)| point(a, b)).collect();
        let weights = weight_grid(points.len());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = assign_weights(&points, &weights, &mut rng);
        a.sort_unstable();
        prop_assert_eq!(a, (0..points.len()).collect::<Vec<_>>());
    }

    #[test]
    fn linkage_tree_has_2l_minus_2_subsets(l in 2usize..20, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut mi = vec![vec![0.0; l]; l];
        for i in 0..l {
            for j in i + 1..l {
                let v = rng.gen_range(0..4) as f64 * 0.1;
                mi[i][j] = v;
                mi[j][i] = v;
            }
        }
        let tree = build_linkage_tree(&mi);
        prop_assert_eq!(tree.len(), 2 * l - 2);
        prop_assert!(tree.iter().all(|s| s.len() < l && !s.is_empty()));
        for i in 0..l {
            prop_assert_eq!(&tree[i], &vec![i]);
        }
    }

    #[test]
    fn kernel_size_within_bounds(n in 1usize..600, c in 1usize..20, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = sample_kernel_size(n, c, &mut rng);
        prop_assert!(k <= n && k >= c.min(n));
    }
}

/// Non-dominated filter by pairwise comparison; of several equal points the first survives.
fn brute_front(stream: &[ObjectivePoint], t: f64) -> Vec<(f64, f64)> {
    let feas: Vec<&ObjectivePoint> = stream.iter().filter(|p| p.accuracy >= t).collect();
    let mut out = Vec::new();
    for (i, p) in feas.iter().enumerate() {
        let dominated = feas
            .iter()
            .any(|q| q.f1 <= p.f1 && q.f2 <= p.f2 && (q.f1 < p.f1 || q.f2 < p.f2));
        let earlier_twin = feas[..i].iter().any(|q| q.same_objectives(p));
        if !dominated && !earlier_twin {
            out.push((p.f1, p.f2));
        }
    }
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    out
}

#[test]
fn archive_matches_brute_force_filter() {
    let g = Genotype::zeros(3);
    for seed in 0..30 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = if seed % 2 == 0 { 0.0 } else { 0.3 };
        // a coarse grid forces ties and duplicates
        let stream: Vec<ObjectivePoint> = (0..200)
            .map(|_| point(rng.gen_range(0..20) as f64 / 20.0, rng.gen_range(0..20) as f64 / 20.0))
            .collect();
        let mut archive = Archive::new();
        for p in &stream {
            archive.update(&g, *p, t);
        }
        assert_eq!(archive.points(), brute_front(&stream, t), "seed {seed}");
    }
}

#[test]
fn archive_basics() {
    let g = Genotype::zeros(3);
    let mut a = Archive::new();
    assert!(a.update(&g, point(0.3, 0.5), 0.0));
    assert_eq!(a.len(), 1);
    assert!(!a.update(&g, point(0.4, 0.6), 0.0));
    assert!(!a.update(&g, point(0.3, 0.5), 0.0));
    assert!(a.update(&g, point(0.1, 0.9), 0.0));
    // raising the threshold evicts the 0.7-accuracy member
    a.prune(0.8);
    assert_eq!(a.points(), vec![(0.1, 0.9)]);
}

#[test]
fn hypervolume_examples() {
    assert_eq!(hypervolume_2d(&[(0.0, 0.0)], (1.0, 1.0)), 1.0);
    assert!((hypervolume_2d(&[(0.2, 0.5), (0.5, 0.2)], (1.0, 1.0)) - 0.55).abs() < 1e-12);
    assert_eq!(hypervolume_2d(&[], HV_REFERENCE), 0.0);
    assert_eq!(hypervolume_2d(&[(1.2, 0.1)], (1.0, 1.0)), 0.0);
}

/// Sums the grid cells spanned by all coordinates that some point dominates.
fn rectangle_oracle(front: &[(f64, f64)], r: (f64, f64)) -> f64 {
    let mut xs: Vec<f64> = front.iter().map(|p| p.0).filter(|&x| x < r.0).collect();
    let mut ys: Vec<f64> = front.iter().map(|p| p.1).filter(|&y| y < r.1).collect();
    xs.push(r.0);
    ys.push(r.1);
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    xs.dedup();
    ys.dedup();
    let mut area = 0.0;
    for i in 0..xs.len() - 1 {
        for j in 0..ys.len() - 1 {
            let covered = front.iter().any(|&(a, b)| a <= xs[i] && b <= ys[j]);
            if covered {
                area += (xs[i + 1] - xs[i]) * (ys[j + 1] - ys[j]);
            }
        }
    }
    area
}

#[test]
fn hypervolume_matches_rectangle_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let n = rng.gen_range(1..25);
        let raw: Vec<ObjectivePoint> = (0..n)
            .map(|_| point(rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.2)))
            .collect();
        let front = brute_front(&raw, 0.0);
        let hv = hypervolume_2d(&front, HV_REFERENCE);
        assert!((hv - rectangle_oracle(&front, HV_REFERENCE)).abs() <= 1e-9);
    }
}

#[test]
fn crossover_degenerate_cuts() {
    let p1 = Genotype(vec![0, 0, 0, 0, 2]);
    let p2 = Genotype(vec![1, 1, 1, 1, 1]);
    assert_eq!(two_point_crossover(&p1, &p2, 0, 5), p2);
    assert_eq!(two_point_crossover(&p1, &p2, 2, 2), p1);
    assert_eq!(two_point_crossover(&p1, &p2, 1, 3).0, vec![0, 1, 1, 0, 2]);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        assert_eq!(ga_generate(&p1, &p1, &alphabet(5), false, &mut rng), p1);
    }
}

#[test]
fn mutation_changes_one_gene_on_average() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let alpha = alphabet(100);
    let zeros = Genotype::zeros(100);
    let trials = 100_000;
    let mut total = 0;
    for _ in 0..trials {
        let child = ga_generate(&zeros, &zeros, &alpha, true, &mut rng);
        total += child.hamming(&zeros);
        assert!(child.0.iter().zip(&alpha).all(|(v, a)| v < a));
    }
    let mean = total as f64 / trials as f64;
    assert!((mean - 1.0).abs() <= 0.05, "mean mutated genes {mean}");
}

#[test]
fn ga_replace_cases() {
    let w = [0.5, 0.5];
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let good = point(0.1, 0.1);
    let mid = point(0.3, 0.3);
    let bad = point(0.6, 0.6);
    assert_eq!(ga_replace(&bad, [(&mid, &w), (&good, &w)], 0.0, &mut rng), None);
    assert_eq!(ga_replace(&mid, [(&bad, &w), (&good, &w)], 0.0, &mut rng), Some(0));
    assert_eq!(ga_replace(&mid, [(&good, &w), (&bad, &w)], 0.0, &mut rng), Some(1));
    let trials = 10_000;
    let firsts = (0..trials)
        .filter(|_| ga_replace(&good, [(&mid, &w), (&bad, &w)], 0.0, &mut rng) == Some(0))
        .count();
    let frac = firsts as f64 / trials as f64;
    assert!((frac - 0.5).abs() < 0.03, "first parent replaced {frac}");
}

#[test]
fn mutual_information_properties() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let alpha = vec![2u8, 2, 2, 2, 3];
    let sample: Vec<Genotype> = (0..10_000)
        .map(|_| {
            let a: u8 = rng.gen_range(0..2);
            let b: u8 = rng.gen_range(0..2);
            // gene 1 copies gene 0, gene 3 is constant
            Genotype(vec![a, a, b, 0, rng.gen_range(0..3)])
        })
        .collect();
    let refs: Vec<&Genotype> = sample.iter().collect();
    let mi = mutual_information_matrix(&refs, &alpha);
    for i in 0..5 {
        for j in 0..5 {
            assert!((mi[i][j] - mi[j][i]).abs() < 1e-15);
        }
    }
    assert!((mi[0][1] - mi[0][0]).abs() < 1e-12);
    assert!(mi[0][0] > 0.69 && mi[0][0] <= std::f64::consts::LN_2);
    assert!(mi[0][2] <= 0.01 && mi[2][4] <= 0.01);
    assert!(mi[3].iter().all(|&v| v == 0.0));
}

#[test]
fn linkage_tree_recovers_planted_blocks() {
    let mut mi = vec![vec![0.01; 6]; 6];
    for block in [[0, 2, 4], [1, 3, 5]] {
        for &i in &block {
            for &j in &block {
                mi[i][j] = 0.6;
            }
        }
    }
    let tree = build_linkage_tree(&mi);
    assert!(tree.contains(&vec![0, 2, 4]));
    assert!(tree.contains(&vec![1, 3, 5]));
    assert_eq!(build_linkage_tree(&[vec![0.0, 0.1], vec![0.1, 0.0]]), vec![vec![0], vec![1]]);
}

#[test]
fn knn_neighbourhood_order() {
    let pop: Vec<Genotype> = vec![
        Genotype(vec![0, 0, 0]),
        Genotype(vec![1, 1, 0]),
        Genotype(vec![0, 1, 0]),
        Genotype(vec![0, 0, 0]),
    ];
    assert_eq!(knn_neighborhood(&pop, 0, 3), vec![0, 3, 2]);
    assert_eq!(knn_neighborhood(&pop, 1, 4), vec![1, 2, 0, 3]);
    let mut full = knn_neighborhood(&pop, 2, 4);
    full.sort_unstable();
    assert_eq!(full, vec![0, 1, 2, 3]);
}

#[test]
fn kernel_size_bounds_at_scale() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut lo, mut hi) = (usize::MAX, 0);
    for _ in 0..100_000 {
        let k = sample_kernel_size(512, 8, &mut rng);
        lo = lo.min(k);
        hi = hi.max(k);
    }
    assert!(lo >= 8 && hi <= 512);
    assert_eq!(hi, 512);
    assert_eq!(sample_kernel_size(5, 8, &mut rng), 5);
}

fn toy_individual(ev: &ToyEvaluator, g: Genotype) -> Individual {
    let r = ev.evaluate(&g).unwrap();
    Individual::new(g, r, ev.reference_madds())
}

#[test]
fn gom_with_identical_donor_costs_nothing() {
    let ev = ToyEvaluator { k: 3 };
    let mut ind = toy_individual(&ev, Genotype(vec![1, 0, 1, 0, 0, 1, 2]));
    let donor = ind.genotype.clone();
    let subsets: Vec<Vec<usize>> = (0..7).map(|i| vec![i]).collect();
    let mut budget = 100;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let stats = gom_step(&mut ind, subsets, &[&donor], &[0.5, 0.5], 0.0, &ev, &mut budget, &mut rng).unwrap();
    assert_eq!(stats.evaluations, 0);
    assert_eq!(budget, 100);
}

#[test]
fn gom_adopts_inactive_change_through_skip() {
    let ev = ToyEvaluator { k: 3 };
    // output reads parent A, so the B-side genes 3..6 are inactive
    let mut ind = toy_individual(&ev, Genotype(vec![1, 0, 0, 0, 0, 0, 0]));
    let before = ind.point;
    let donor = Genotype(vec![1, 0, 0, 1, 1, 1, 0]);
    let mut budget = 10;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let stats = gom_step(&mut ind, vec![vec![3, 4, 5]], &[&donor], &[0.5, 0.5], 0.0, &ev, &mut budget, &mut rng).unwrap();
    assert_eq!((stats.evaluations, stats.skipped), (1, 1));
    assert_eq!(budget, 9);
    assert_eq!(ind.genotype, donor);
    assert!(ind.result.skipped);
    assert_eq!(ind.point, before);
    let fresh = ev.evaluate(&donor).unwrap();
    assert_eq!((fresh.accuracy, fresh.madds), (ind.result.accuracy, ind.result.madds));
}

#[test]
fn gom_never_worsens_and_respects_budget() {
    let ev = ToyEvaluator { k: 6 };
    let l = ev.genotype_len();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for trial in 0..50 {
        let random = |rng: &mut ChaCha8Rng| {
            let mut g: Vec<u8> = (0..l - 1).map(|_| rng.gen_range(0..2)).collect();
            g.push(rng.gen_range(0..3));
            Genotype(g)
        };
        let mut ind = toy_individual(&ev, random(&mut rng));
        let donors: Vec<Genotype> = (0..4).map(|_| random(&mut rng)).collect();
        let refs: Vec<&Genotype> = donors.iter().collect();
        let w = [rng.gen_range(0.1..0.9), 0.0];
        let w = [w[0], 1.0 - w[0]];
        let t = if trial % 2 == 0 { 0.0 } else { 0.65 };
        let mut subsets: Vec<Vec<usize>> = (0..l).map(|i| vec![i]).collect();
        subsets.push((0..l / 2).collect());
        let before = ind.point;
        let mut budget = 5;
        let stats = gom_step(&mut ind, subsets, &refs, &w, t, &ev, &mut budget, &mut rng).unwrap();
        assert!(stats.evaluations <= 5);
        assert_eq!(budget, 5 - stats.evaluations);
        assert!(!constrained_better(&before, &ind.point, t, &w));
    }
}

#[test]
fn mann_whitney_exact_small_example() {
    let r = mann_whitney(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
    assert_eq!(r.u, 0.0);
    assert!(r.exact);
    assert!((r.p_value - 0.1).abs() < 1e-12);
    let same = mann_whitney(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
    assert!((same.p_value - 1.0).abs() < 1e-12);
    assert!(mann_whitney(&[1.0], &[2.0, 3.0]).is_err());
}

/// Two-sided exact p by enumerating every split of the pooled ranks.
fn enumerated_p(n1: usize, n2: usize, u_obs: f64) -> f64 {
    let n = n1 + n2;
    let (mut total, mut le) = (0u64, 0u64);
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize != n1 {
            continue;
        }
        let rank_sum: usize = (0..n).filter(|&i| mask >> i & 1 == 1).map(|i| i + 1).sum();
        let u1 = rank_sum as f64 - (n1 * (n1 + 1)) as f64 / 2.0;
        let u = u1.min((n1 * n2) as f64 - u1);
        total += 1;
        if u <= u_obs {
            le += 1;
        }
    }
    // U = min(U1, U2) is symmetric, so the enumerated count already covers both tails
    (le as f64 / total as f64).min(1.0)
}

#[test]
fn mann_whitney_exact_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..40 {
        let n1 = rng.gen_range(2..7);
        let n2 = rng.gen_range(2..7);
        let mut values: Vec<f64> = (0..n1 + n2).map(|i| i as f64 + rng.gen_range(0.0..0.5)).collect();
        for i in (1..values.len()).rev() {
            values.swap(i, rng.gen_range(0..=i));
        }
        let r = mann_whitney(&values[..n1], &values[n1..]).unwrap();
        assert!(r.exact);
        assert!((r.p_value - enumerated_p(n1, n2, r.u)).abs() < 1e-12, "{n1}x{n2} U={}", r.u);
    }
}

#[test]
fn mann_whitney_normal_branch() {
    // ties force the approximation; clearly separated groups give a small p
    let x: Vec<f64> = (0..12).map(|i| (i / 2) as f64).collect();
    let y: Vec<f64> = (0..12).map(|i| 20.0 + (i / 2) as f64).collect();
    let r = mann_whitney(&x, &y).unwrap();
    assert!(!r.exact);
    assert_eq!(r.u, 0.0);
    assert!(r.p_value < 1e-4);
    let flat = mann_whitney(&[0.5; 4], &[0.5; 4]).unwrap();
    assert_eq!(flat.p_value, 1.0);
}

#[test]
fn holm_step_down() {
    assert_eq!(holm(&[0.01, 0.04], 0.05), vec![true, true]);
    assert_eq!(holm(&[0.04, 0.03], 0.05), vec![false, false]);
    assert_eq!(holm(&[0.03, 0.04, 0.001], 0.05), vec![false, false, true]);
    assert_eq!(holm(&[0.2, 0.01, 0.02], 0.05), vec![false, true, true]);
}

#[test]
fn compare_groups_rows_and_errors() {
    let g = |name: &str, v: &[f64]| (name.to_string(), v.to_vec());
    assert!(compare_groups(&[g("ga", &[1.0, 2.0])], 0.05).is_err());
    let same = compare_groups(&[g("ga", &[0.1, 0.2, 0.3]), g("random", &[0.1, 0.2, 0.3])], 0.05).unwrap();
    assert!(same.rows.iter().all(|r| !r.significant));
    let cmp = compare_groups(
        &[
            g("random", &[0.1, 0.2, 0.3, 0.2, 0.1]),
            g("ga", &[0.7, 0.8, 0.9, 0.75, 0.85]),
            g("gomea", &[0.6, 0.7, 0.72, 0.65, 0.71]),
        ],
        0.05,
    )
    .unwrap();
    assert_eq!(cmp.best, "ga");
    assert_eq!(cmp.rows.len(), 2);
    assert_eq!(cmp.rows[0].group, "random");
    assert!(cmp.rows[0].significant);
}

#[test]
fn budget_is_exact_for_every_algorithm() {
    let ev = ToyEvaluator { k: 5 };
    for algo in Algorithm::ALL {
        let out = run_search(&ev, &cfg(algo, 16, 200, 1)).unwrap();
        if out.termination == Termination::Budget {
            assert_eq!(out.evaluations(), 200, "{algo}");
        } else {
            assert!(out.evaluations() < 200, "{algo}");
        }
        let idx: Vec<usize> = out.log.iter().map(|r| r.eval_index).collect();
        assert_eq!(idx, (0..out.evaluations()).collect::<Vec<_>>());
        assert_eq!(out.hv_trace.len(), out.evaluations());
    }
    let random = run_search(&ev, &cfg(Algorithm::Random, 16, 200, 1)).unwrap();
    assert_eq!(random.evaluations(), 200);
    assert_eq!(random.termination, Termination::Budget);
}

#[test]
fn population_starts_with_references() {
    let ev = ToyEvaluator { k: 4 };
    let out = run_search(&ev, &cfg(Algorithm::Ga, 8, 8, 0)).unwrap();
    let firsts: Vec<String> = out.log[..3].iter().map(|r| r.genotype.to_string()).collect();
    assert_eq!(firsts, vec!["000000000", "000000001", "000000002"]);
}

#[test]
fn deterministic_runs_are_identical() {
    let ev = ToyEvaluator { k: 6 };
    for algo in Algorithm::ALL {
        let c = cfg(algo, 12, 300, 42);
        let a = run_search(&ev, &c).unwrap();
        let b = run_search(&ev, &c).unwrap();
        let json = |o: &RunOutcome| serde_json::to_string(&o.log).unwrap();
        assert_eq!(json(&a), json(&b), "{algo}");
        assert_eq!(a.archive, b.archive);
        let other = run_search(&ev, &RunConfig { seed: 43, ..c }).unwrap();
        if algo != Algorithm::Random {
            assert_ne!(json(&a), json(&other), "{algo}");
        }
    }
}

#[test]
fn steering_and_archive_invariants_hold_in_runs() {
    let ev = ToyEvaluator { k: 6 };
    for algo in Algorithm::ALL {
        let budget = 400;
        let out = run_search(&ev, &cfg(algo, 16, budget, 7)).unwrap();
        for e in out.archive.entries() {
            assert!(e.point.accuracy >= 0.5);
        }
        // once the threshold is flat the hypervolume only grows
        for w in out.hv_trace[budget / 2..].windows(2) {
            assert!(w[1].1 >= w[0].1 - 1e-15, "{algo}");
        }
        for r in &out.log {
            assert_eq!(r.threshold, steering_threshold(r.eval_index, budget));
            assert_eq!(r.feasible, r.accuracy >= r.threshold);
            assert_eq!(r.wall_ms, 0);
        }
    }
}

#[test]
fn random_archive_is_filter_of_logged_points() {
    let ev = ToyEvaluator { k: 6 };
    let out = run_search(&ev, &cfg(Algorithm::Random, 10, 100, 3)).unwrap();
    let stream: Vec<ObjectivePoint> = out
        .log
        .iter()
        .map(|r| ObjectivePoint::new(r.accuracy, r.madds, out.reference_madds))
        .collect();
    let t_final = steering_threshold(100, 100);
    assert_eq!(out.archive.points(), brute_front(&stream, t_final));
}

#[test]
fn mixing_reuses_parent_objectives() {
    let ev = ToyEvaluator { k: 8 };
    let gomea = run_search(&ev, &cfg(Algorithm::Gomea, 16, 1000, 5)).unwrap();
    assert!(gomea.skip_fraction() > 0.0);
    let random = run_search(&ev, &cfg(Algorithm::Random, 16, 300, 5)).unwrap();
    assert_eq!(random.skip_fraction(), 0.0);
}

/// Every weight prefers the same genotype: parent B's side with all stitches on.
struct SingleOptimum(ToyEvaluator);

impl Evaluator for SingleOptimum {
    fn genotype_len(&self) -> usize {
        self.0.genotype_len()
    }

    fn reference_madds(&self) -> u64 {
        160
    }

    fn evaluate(&self, g: &Genotype) -> Result<EvalResult> {
        let mask = self.0.active(g);
        let ones = (0..g.len() - 1).filter(|&i| mask[i] && g.0[i] == 1).count();
        let b = u64::from(g.output_gene() == 1);
        Ok(EvalResult {
            accuracy: 0.5 + 0.04 * ones as f64 + 0.1 * b as f64,
            madds: 120 - 5 * ones as u64 - 20 * b,
            active_mask: mask,
            skipped: false,
            probabilities: None,
        })
    }
}

#[test]
fn mixing_stops_once_population_converges() {
    let ev = SingleOptimum(ToyEvaluator { k: 2 });
    for algo in [Algorithm::Gomea, Algorithm::LkGomea] {
        let out = run_search(&ev, &cfg(algo, 8, 100_000, 0)).unwrap();
        assert_eq!(out.termination, Termination::Converged, "{algo}");
        assert!(out.evaluations() < 100_000);
        let first = &out.population[0].genotype;
        assert!(out.population.iter().all(|i| &i.genotype == first));
        // A-side genes are inactive and may settle anywhere
        assert_eq!(&first.0[2..], &[1, 1, 1]);
    }
}

#[test]
fn threaded_service_keeps_budget() {
    let ev = ToyEvaluator { k: 6 };
    let c = RunConfig {
        workers: 3,
        deterministic: false,
        ..cfg(Algorithm::Ga, 16, 300, 2)
    };
    let out = run_search(&ev, &c).unwrap();
    assert_eq!(out.evaluations(), 300);
    assert_eq!(out.termination, Termination::Budget);
    let timed = RunConfig {
        time_limit_secs: Some(1e-9),
        ..c
    };
    let out = run_search(&ev, &timed).unwrap();
    assert_eq!(out.termination, Termination::Time);
    assert!(out.evaluations() < 300);
}

#[test]
fn config_validation() {
    assert!(cfg(Algorithm::Ga, 1, 10, 0).validate().is_err());
    assert!(cfg(Algorithm::Ga, 16, 8, 0).validate().is_err());
    assert!("lk-gomea".parse::<Algorithm>().unwrap() == Algorithm::LkGomea);
    assert!("nsga".parse::<Algorithm>().is_err());
}

#[test]
fn log_files_round_trip() {
    let ev = ToyEvaluator { k: 3 };
    let out = run_search(&ev, &cfg(Algorithm::Gomea, 6, 60, 1)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    write_runlog(&p.join("runlog.jsonl"), &out.log).unwrap();
    write_archive_csv(&p.join("archive.csv"), &out.archive).unwrap();
    write_hv_csv(&p.join("hv.csv"), &out.hv_trace).unwrap();
    assert_eq!(read_runlog(&p.join("runlog.jsonl")).unwrap(), out.log);
    let rows = read_archive_csv(&p.join("archive.csv")).unwrap();
    assert_eq!(rows.len(), out.archive.len());
    let header = std::fs::read_to_string(p.join("archive.csv")).unwrap();
    assert!(header.starts_with("accuracy,madds,genotype\n"));
    assert_eq!(read_hv_csv(&p.join("hv.csv")).unwrap().len(), out.hv_trace.len());
    let first = std::fs::read_to_string(p.join("runlog.jsonl")).unwrap();
    assert!(first.lines().next().unwrap().contains("\"genotype\":\"0000000\""));
}
