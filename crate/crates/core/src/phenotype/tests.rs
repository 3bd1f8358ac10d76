use std::collections::BTreeSet;
use std::sync::{Arc, OnceLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::netgraph::NetworkGraph;
use crate::stitcher::{
    acyclic_max_matching, build_supernetwork, find_candidates, node_id, train_stitches, CandidateFilter, Side,
    StitchTrainConfig, Supernetwork, DEFAULT_EXPANSION_BUDGET, OUTPUT_SWITCH_ID,
};
use crate::synthdata::{evaluate_accuracy, gen_images, preset_parents, Dataset, Preset, Split};
use crate::tensorcore::Tensor;

struct Fixture {
    ds: Dataset,
    a: NetworkGraph,
    b: NetworkGraph,
    supernet: Arc<Supernetwork>,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let ds = gen_images(3, 400, 4).unwrap();
        let (a, b) = preset_parents(Preset::SameDepth, &ds.task(), 7).unwrap();
        let c = find_candidates(&a, &b, &CandidateFilter::default());
        let plan = acyclic_max_matching(&a, &b, &c, DEFAULT_EXPANSION_BUDGET).plan;
        let s = build_supernetwork(&a, &b, &plan, 1).unwrap();
        let (s, _) = train_stitches(&s, &ds, &StitchTrainConfig::default()).unwrap();
        Fixture {
            ds,
            a,
            b,
            supernet: Arc::new(s),
        }
    })
}

fn node_set(g: &NetworkGraph) -> BTreeSet<String> {
    g.nodes().iter().map(|n| n.id.clone()).collect()
}

fn parent_nodes(side: Side, g: &NetworkGraph) -> BTreeSet<String> {
    let mut s: BTreeSet<String> = g
        .nodes()
        .iter()
        .filter(|n| n.id != g.input_id())
        .map(|n| node_id(side, &n.id))
        .collect();
    s.insert("input".into());
    s.insert(OUTPUT_SWITCH_ID.into());
    s
}

#[test]
fn genotype_digit_strings_round_trip() {
    let g: Genotype = "0010012".parse().unwrap();
    assert_eq!(g.0, vec![0, 0, 1, 0, 0, 1, 2]);
    assert_eq!(g.to_string(), "0010012");
    assert_eq!(serde_json::to_string(&g).unwrap(), "\"0010012\"");
    assert!("01x".parse::<Genotype>().is_err());
    assert!(g.validate(7).is_ok());
    assert!(g.validate(6).is_err());
    assert!("0023".parse::<Genotype>().unwrap().validate(4).is_err());
    assert!("0030".parse::<Genotype>().unwrap().validate(4).is_err());
    assert_eq!(g.stitches_used(), 2);
}

#[test]
fn reference_genotypes_decode_to_parents() {
    let f = fixture();
    let len = f.supernet.genotype_len();
    let da = decode(&f.supernet, &Genotype::reference(len, 0)).unwrap();
    assert_eq!(node_set(&da.graph), parent_nodes(Side::A, &f.a));
    let want: Vec<bool> = (0..len).map(|i| i % 2 == 0 || i == len - 1).collect();
    assert_eq!(da.active_mask, want);
    let db = decode(&f.supernet, &Genotype::reference(len, 1)).unwrap();
    assert_eq!(node_set(&db.graph), parent_nodes(Side::B, &f.b));
    let want: Vec<bool> = (0..len).map(|i| i % 2 == 1 || i == len - 1).collect();
    assert_eq!(db.active_mask, want);
    assert_eq!(da.graph.network_madds(), f.a.network_madds());
    assert_eq!(db.graph.network_madds(), f.b.network_madds());
}

#[test]
fn ensemble_genotype_is_union_of_parents() {
    let f = fixture();
    let len = f.supernet.genotype_len();
    let d = decode(&f.supernet, &Genotype::reference(len, 2)).unwrap();
    let mut want = parent_nodes(Side::A, &f.a);
    want.extend(parent_nodes(Side::B, &f.b));
    want.insert("ensemble".into());
    assert_eq!(node_set(&d.graph), want);
    assert!(d.active_mask.iter().all(|&a| a));
    assert_eq!(d.graph.network_madds(), f.a.network_madds() + f.b.network_madds());
}

#[test]
fn reference_evaluations_match_parents_exactly() {
    let f = fixture();
    let len = f.supernet.genotype_len();
    for (out, parent) in [(0, &f.a), (1, &f.b)] {
        let r = evaluate(&f.supernet, &Genotype::reference(len, out), &f.ds, Split::Validation, None).unwrap();
        assert_eq!(r.accuracy, evaluate_accuracy(parent, &f.ds, Split::Validation, None).unwrap());
        assert_eq!(r.madds, parent.network_madds());
        let x = f.ds.split_data(Split::Validation, Some(32)).0;
        let d = decode(&f.supernet, &Genotype::reference(len, out)).unwrap();
        assert!(d.graph.forward(&x).unwrap().bit_eq(&parent.forward(&x).unwrap()));
    }
}

#[test]
fn eval_limit_is_clamped_to_split() {
    let f = fixture();
    let len = f.supernet.genotype_len();
    let g = Genotype::reference(len, 2);
    let all = evaluate(&f.supernet, &g, &f.ds, Split::Test, None).unwrap();
    let big = evaluate(&f.supernet, &g, &f.ds, Split::Test, Some(1_000_000)).unwrap();
    assert_eq!(all, big);
}

#[test]
fn inactive_flips_leave_decoding_unchanged() {
    let f = fixture();
    let len = f.supernet.genotype_len();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..50 {
        let g = biased_sample(len, &mut rng);
        let d = decode(&f.supernet, &g).unwrap();
        for i in (0..len).filter(|&i| !d.active_mask[i]) {
            let mut h = g.clone();
            h.0[i] ^= 1;
            let e = decode(&f.supernet, &h).unwrap();
            assert_eq!(e.graph.nodes(), d.graph.nodes());
        }
    }
}

#[test]
fn decoded_cost_is_bounded_by_everything() {
    let f = fixture();
    let len = f.supernet.genotype_len();
    let stitch_madds: u64 = f.supernet.graph().network_madds() - f.a.network_madds() - f.b.network_madds();
    let bound = f.a.network_madds() + f.b.network_madds() + stitch_madds;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let g = Genotype((0..len).map(|i| rng.gen_range(0..if i + 1 == len { 3 } else { 2 })).collect());
        assert!(decode(&f.supernet, &g).unwrap().graph.network_madds() <= bound);
    }
}

#[test]
fn skip_on_identical_genotypes_and_never_on_output_changes() {
    let f = fixture();
    let len = f.supernet.genotype_len();
    let g = Genotype::reference(len, 0);
    let r = evaluate(&f.supernet, &g, &f.ds, Split::Validation, Some(50)).unwrap();
    let same = maybe_skip(&r, &g, &g).unwrap().unwrap();
    assert!(same.skipped);
    assert_eq!((same.accuracy, same.madds), (r.accuracy, r.madds));
    assert!(maybe_skip(&r, &g, &Genotype::reference(len, 1)).unwrap().is_none());
    assert!(maybe_skip(&r, &g, &Genotype::zeros(len + 1)).is_err());
}

#[test]
fn skipped_results_equal_fresh_evaluation() {
    let f = fixture();
    let len = f.supernet.genotype_len();
    let ev = SupernetEvaluator::new(f.supernet.clone(), &f.ds, Split::Validation, Some(40)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut checked = 0;
    while checked < 100 {
        let g = biased_sample(len, &mut rng);
        let r = ev.evaluate(&g).unwrap();
        let inactive: Vec<usize> = (0..len).filter(|&i| !r.active_mask[i]).collect();
        if inactive.is_empty() {
            continue;
        }
        let mut h = g.clone();
        for &i in &inactive {
            if rng.gen_bool(0.5) {
                h.0[i] ^= 1;
            }
        }
        let inherited = maybe_skip(&r, &g, &h).unwrap().expect("only inactive genes changed");
        let fresh = ev.evaluate(&h).unwrap();
        assert_eq!((inherited.accuracy, inherited.madds), (fresh.accuracy, fresh.madds));
        checked += 1;
    }
}

#[test]
fn biased_probability_matches_reference_lengths() {
    assert!((biased_probability(309) - 0.02).abs() < 1e-12);
    assert!((biased_probability(413) - 6.18 / 413.0).abs() < 1e-12);
    assert!((biased_probability(413) - 0.01496).abs() < 1e-5);
    assert_eq!(biased_probability(3), 1.0);
}

#[test]
fn biased_samples_average_about_six_stitches() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut ones = 0usize;
    let mut outputs = [0usize; 3];
    for _ in 0..10_000 {
        let g = biased_sample(309, &mut rng);
        ones += g.stitches_used();
        outputs[g.output_gene() as usize] += 1;
        g.validate(309).unwrap();
    }
    let mean = ones as f64 / 10_000.0;
    assert!((5.9..=6.5).contains(&mean), "{mean}");
    assert!(outputs.iter().all(|&c| c > 3000));
    assert_eq!(biased_sample(1, &mut rng).len(), 1);
}

fn probs(rows: &[&[f32]]) -> Tensor {
    Tensor::new(vec![rows.len(), rows[0].len()], rows.concat()).unwrap()
}

#[test]
fn calibrated_predictor_has_zero_ece() {
    let rows: Vec<&[f32]> = vec![&[0.8, 0.2]; 10];
    let labels = [0, 0, 0, 0, 0, 0, 0, 0, 1, 1];
    let r = compute_ece(&probs(&rows), &labels, 10).unwrap();
    assert!(r.ece < 1e-6, "{}", r.ece);
    assert_eq!(r.bins[8].count, 10);
    assert_eq!(r.bins.iter().map(|b| b.count).sum::<usize>(), 10);
}

#[test]
fn thirty_five_percent_bin_is_calibrated() {
    let rows: Vec<&[f32]> = vec![&[0.35, 0.33, 0.32]; 20];
    let labels: Vec<usize> = (0..20).map(|i| if i < 7 { 0 } else { 1 }).collect();
    let r = compute_ece(&probs(&rows), &labels, 10).unwrap();
    let bin = &r.bins[3];
    assert_eq!(bin.count, 20);
    assert!((bin.accuracy - bin.confidence).abs() < 1e-6);
}

#[test]
fn overconfident_predictor_ece_is_error_rate() {
    let rows: Vec<&[f32]> = vec![&[0.0, 1.0, 0.0]; 8];
    let labels = [1, 1, 1, 0, 1, 2, 1, 1];
    let r = compute_ece(&probs(&rows), &labels, 10).unwrap();
    assert!((r.ece - (1.0 - 6.0 / 8.0)).abs() < 1e-9);
    assert_eq!(r.bins[9].count, 8);
}

#[test]
fn ece_rejects_unnormalized_rows() {
    let rows: Vec<&[f32]> = vec![&[0.5, 0.6]];
    assert!(compute_ece(&probs(&rows), &[0], 10).is_err());
    assert!(compute_ece(&probs(&[&[0.5, 0.5]]), &[0], 0).is_err());
}

#[test]
fn evaluator_keeps_probabilities_on_request() {
    let f = fixture();
    let len = f.supernet.genotype_len();
    let ev = SupernetEvaluator::new(f.supernet.clone(), &f.ds, Split::Test, Some(30))
        .unwrap()
        .keep_probabilities(true);
    let r = ev.evaluate(&Genotype::reference(len, 2)).unwrap();
    let p = r.probabilities.unwrap();
    assert_eq!(p.shape(), &[30, 4]);
    let e = compute_ece(&p, ev.labels(), DEFAULT_ECE_BINS).unwrap();
    assert!((0.0..=1.0).contains(&e.ece));
    assert_eq!(ev.reference_madds(), f.a.network_madds() + f.b.network_madds());
}
