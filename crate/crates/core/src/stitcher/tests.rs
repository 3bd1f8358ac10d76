use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::netgraph::{GraphBuilder, NetworkGraph, TaskSignature};
use crate::synthdata::{gen_images, gen_tabular, mlp, preset_parents, Preset, TabularTask};
use crate::tensorcore::{Conv2dSpec, LayerSpec, Tensor};

const IN: &str = GraphBuilder::INPUT;

fn flat_task(n: usize) -> TaskSignature {
    TaskSignature {
        input_shape: vec![n],
        num_classes: 2,
    }
}

fn linear(i: usize, o: usize) -> LayerSpec {
    LayerSpec::Linear {
        in_features: i,
        out_features: o,
    }
}

/// in → L1 → L2 → out, all linear.
fn chain(name: &str, widths: &[usize], seed: u64) -> NetworkGraph {
    let mut b = GraphBuilder::new(name, flat_task(4), seed);
    let mut prev = IN.to_string();
    let mut w_prev = 4;
    for (i, &w) in widths.iter().enumerate() {
        let id = format!("L{}", i + 1);
        b.layer(&id, linear(w_prev, w), &[&prev]);
        prev = id;
        w_prev = w;
    }
    b.layer("out", linear(w_prev, 2), &[&prev]);
    b.build("out").unwrap()
}

fn cand(a: &str, b: &str, wa: usize, wb: usize) -> MatchCandidate {
    MatchCandidate {
        node_a: a.into(),
        node_b: b.into(),
        kind: StitchKind::Linear,
        width_a: wa,
        width_b: wb,
        spatial: None,
    }
}

#[test]
fn linear_candidates_are_all_flat_pairs() {
    let a = chain("a", &[16, 10], 0);
    let b = chain("b", &[12, 10], 1);
    let c = find_candidates(&a, &b, &CandidateFilter::default());
    let pairs: Vec<(&str, &str)> = c.iter().map(|m| (m.node_a.as_str(), m.node_b.as_str())).collect();
    assert_eq!(pairs, [("L1", "L1"), ("L1", "L2"), ("L2", "L1"), ("L2", "L2")]);
    assert!(c.iter().all(|m| m.kind == StitchKind::Linear));
    assert_eq!((c[1].width_a, c[1].width_b), (16, 10));
}

fn conv_net(name: &str, ch: usize, stride: usize) -> NetworkGraph {
    let task = TaskSignature {
        input_shape: vec![1, 16, 16],
        num_classes: 2,
    };
    let mut b = GraphBuilder::new(name, task, 0);
    b.layer("conv", LayerSpec::Conv2d(Conv2dSpec::new(1, ch, 3, stride, 1)), &[IN])
        .layer("gap", LayerSpec::GlobalAvgPool2d, &["conv"])
        .layer("out", linear(ch, 2), &["gap"]);
    b.build("out").unwrap()
}

#[test]
fn conv_candidates_need_equal_spatial_size() {
    let a = conv_net("a", 8, 1);
    let b = conv_net("b", 4, 2);
    let c = find_candidates(&a, &b, &CandidateFilter::default());
    assert!(c.iter().all(|m| !(m.node_a == "conv" && m.node_b == "conv")));
    let b2 = conv_net("b2", 4, 1);
    let c = find_candidates(&a, &b2, &CandidateFilter::default());
    let conv = c.iter().find(|m| m.node_a == "conv" && m.node_b == "conv").unwrap();
    assert_eq!(conv.kind, StitchKind::Conv1x1);
    assert_eq!(conv.spatial, Some((16, 16)));
}

#[test]
fn incompatible_parents_have_no_candidates() {
    let task = TaskSignature {
        input_shape: vec![1, 16, 16],
        num_classes: 2,
    };
    let mut b = GraphBuilder::new("convonly", task.clone(), 0);
    b.layer("conv", LayerSpec::Conv2d(Conv2dSpec::new(1, 2, 3, 1, 1)), &[IN])
        .layer("flat", LayerSpec::Flatten, &["conv"])
        .layer("out", linear(512, 2), &["flat"]);
    let a = b.build("out").unwrap();
    let mut b = GraphBuilder::new("pooled", task, 0);
    b.layer("conv", LayerSpec::Conv2d(Conv2dSpec::new(1, 2, 3, 2, 1)), &[IN])
        .layer("out", linear(2 * 64, 2), &["conv"]);
    assert!(b.build("out").is_err());
    let mut b = GraphBuilder::new(
        "pooled",
        TaskSignature {
            input_shape: vec![1, 16, 16],
            num_classes: 2,
        },
        0,
    );
    b.layer("conv", LayerSpec::Conv2d(Conv2dSpec::new(1, 2, 3, 2, 1)), &[IN])
        .layer("gap", LayerSpec::GlobalAvgPool2d, &["conv"])
        .layer("out", linear(2, 2), &["gap"]);
    let bb = b.build("out").unwrap();
    // convonly: conv [2,16,16], flat [512]; pooled: conv [2,8,8], gap [2]
    let c = find_candidates(&a, &bb, &CandidateFilter::default());
    assert_eq!(c.len(), 1);
    assert_eq!((c[0].node_a.as_str(), c[0].node_b.as_str()), ("flat", "gap"));
    let none = find_candidates(&conv_net("x", 8, 1), &conv_net("y", 8, 2), &CandidateFilter { stride: 2 });
    assert!(none.iter().all(|m| m.kind == StitchKind::Linear));
}

#[test]
fn stride_filter_thins_eligible_layers() {
    let a = chain("a", &[3, 3, 3, 3], 0);
    let b = chain("b", &[3, 3], 1);
    assert_eq!(find_candidates(&a, &b, &CandidateFilter::default()).len(), 8);
    assert_eq!(find_candidates(&a, &b, &CandidateFilter { stride: 2 }).len(), 2);
}

#[test]
fn crossing_pair_cycles_and_aligned_pair_does_not() {
    let a = chain("a", &[3, 3], 0);
    let b = chain("b", &[3, 3], 1);
    let crossing = MatchingPlan {
        matches: vec![cand("L1", "L2", 3, 3)],
    };
    assert!(would_create_cycle(&a, &b, &crossing, &cand("L2", "L1", 3, 3)));
    let aligned = MatchingPlan {
        matches: vec![cand("L1", "L1", 3, 3)],
    };
    assert!(!would_create_cycle(&a, &b, &aligned, &cand("L2", "L2", 3, 3)));
    let all = find_candidates(&a, &b, &CandidateFilter::default());
    for c in &all {
        assert!(!would_create_cycle(&a, &b, &MatchingPlan::default(), c));
    }
    let best = acyclic_max_matching(&a, &b, &all, DEFAULT_EXPANSION_BUDGET);
    assert!(!best.timed_out);
    assert_eq!(best.plan.matches, vec![cand("L1", "L1", 3, 3), cand("L2", "L2", 3, 3)]);
}

#[test]
fn empty_candidates_give_empty_plan() {
    let a = chain("a", &[3], 0);
    let b = chain("b", &[3], 1);
    let out = acyclic_max_matching(&a, &b, &[], 10);
    assert!(out.plan.is_empty() && !out.timed_out);
}

#[test]
fn expansion_budget_reports_timeout() {
    let a = chain("a", &[3, 3, 3, 3], 0);
    let b = chain("b", &[3, 3, 3, 3], 1);
    let c = find_candidates(&a, &b, &CandidateFilter::default());
    let out = acyclic_max_matching(&a, &b, &c, 3);
    assert!(out.timed_out);
    assert!(out.plan.len() <= 4);
    assert_eq!(acyclic_max_matching(&a, &b, &c, DEFAULT_EXPANSION_BUDGET).plan.len(), 4);
}

/// Small linear DAG: each layer reads from a random earlier node.
fn random_parent(name: &str, rng: &mut ChaCha8Rng) -> NetworkGraph {
    let mut b = GraphBuilder::new(name, flat_task(3), rng.gen());
    let mut ids = vec![(IN.to_string(), 3usize)];
    for i in 0..rng.gen_range(2..=3) {
        let (src, w_in) = ids[rng.gen_range(0..ids.len())].clone();
        let w = rng.gen_range(2..=3);
        let id = format!("L{i}");
        b.layer(&id, linear(w_in, w), &[&src]);
        ids.push((id, w));
    }
    let (last, w) = ids.last().unwrap().clone();
    b.layer("out", linear(w, 2), &[&last]);
    b.build("out").unwrap()
}

/// Exhaustive search; the oracle for acyclicity is graph construction itself.
fn brute_force(a: &NetworkGraph, b: &NetworkGraph, cands: &[MatchCandidate]) -> Vec<MatchCandidate> {
    let mut best: Option<Vec<bool>> = None;
    for mask in 0u32..(1 << cands.len()) {
        let chosen: Vec<bool> = (0..cands.len()).map(|i| mask & (1 << i) != 0).collect();
        let plan = MatchingPlan {
            matches: cands.iter().zip(&chosen).filter(|(_, &c)| c).map(|(m, _)| m.clone()).collect(),
        };
        if build_supernetwork(a, b, &plan, 0).is_err() {
            continue;
        }
        let count = |v: &[bool]| v.iter().filter(|&&x| x).count();
        let better = match &best {
            None => true,
            Some(cur) => count(&chosen) > count(cur) || (count(&chosen) == count(cur) && chosen > *cur),
        };
        if better {
            best = Some(chosen);
        }
    }
    let best = best.unwrap();
    cands.iter().zip(&best).filter(|(_, &c)| c).map(|(m, _)| m.clone()).collect()
}

#[test]
fn branch_and_bound_matches_exhaustive_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut checked = 0;
    while checked < 50 {
        let a = random_parent("a", &mut rng);
        let b = random_parent("b", &mut rng);
        let cands = find_candidates(&a, &b, &CandidateFilter::default());
        if cands.len() > 10 {
            continue;
        }
        let got = acyclic_max_matching(&a, &b, &cands, DEFAULT_EXPANSION_BUDGET);
        assert!(!got.timed_out);
        assert_eq!(got.plan.matches, brute_force(&a, &b, &cands));
        checked += 1;
    }
}

#[test]
fn genotype_length_formula() {
    assert_eq!(genotype_len(154), 309);
    assert_eq!(genotype_len(206), 413);
    assert_eq!(genotype_len(56), 113);
    assert_eq!(genotype_len(0), 1);
}

fn image_pair(preset: Preset) -> (NetworkGraph, NetworkGraph) {
    let ds = gen_images(0, 100, 4).unwrap();
    preset_parents(preset, &ds.task(), 3).unwrap()
}

fn matched(a: &NetworkGraph, b: &NetworkGraph) -> Supernetwork {
    let c = find_candidates(a, b, &CandidateFilter::default());
    let plan = acyclic_max_matching(a, b, &c, DEFAULT_EXPANSION_BUDGET).plan;
    build_supernetwork(a, b, &plan, 9).unwrap()
}

#[test]
fn supernet_layout_follows_plan_order() {
    for preset in [Preset::DeepShallow, Preset::SameDepth] {
        let (a, b) = image_pair(preset);
        let s = matched(&a, &b);
        assert!(!s.plan().is_empty());
        assert_eq!(s.genotype_len(), 2 * s.plan().len() + 1);
        for (k, m) in s.plan().matches.iter().enumerate() {
            assert_eq!(s.switches()[2 * k].id, switch_id(Side::A, &m.node_a));
            assert_eq!(s.switches()[2 * k + 1].id, switch_id(Side::B, &m.node_b));
            assert_eq!(s.switches()[2 * k].inputs[0], node_id(Side::A, &m.node_a));
        }
        let out = s.switches().last().unwrap();
        assert_eq!(out.id, OUTPUT_SWITCH_ID);
        assert_eq!(out.inputs.len(), 3);
        assert_eq!(s.alphabet_sizes().last(), Some(&3));
    }
}

#[test]
fn supernet_with_original_switches_reproduces_parent_a() {
    let (a, b) = image_pair(Preset::DeepShallow);
    let s = matched(&a, &b);
    let x = gen_images(5, 100, 4).unwrap().samples.slice_batch(0, 16);
    assert!(s.graph().forward(&x).unwrap().bit_eq(&a.forward(&x).unwrap()));
    let (_, rec) = s.graph().forward_capture(&x).unwrap();
    let out_b = rec.get(s.parent_output(Side::B)).unwrap();
    assert!(out_b.bit_eq(&b.forward(&x).unwrap()));
}

#[test]
fn empty_plan_supernet_has_one_gene() {
    let (a, b) = image_pair(Preset::SameDepth);
    let s = build_supernetwork(&a, &b, &MatchingPlan::default(), 0).unwrap();
    assert_eq!(s.genotype_len(), 1);
    assert!(s.stitches().is_empty());
}

#[test]
fn invalid_plans_are_rejected() {
    let a = chain("a", &[3, 3], 0);
    let b = chain("b", &[3, 3], 1);
    let twice = MatchingPlan {
        matches: vec![cand("L1", "L1", 3, 3), cand("L1", "L2", 3, 3)],
    };
    assert!(build_supernetwork(&a, &b, &twice, 0).is_err());
    let crossing = MatchingPlan {
        matches: vec![cand("L1", "L2", 3, 3), cand("L2", "L1", 3, 3)],
    };
    assert!(matches!(build_supernetwork(&a, &b, &crossing, 0), Err(crate::Error::Cycle { .. })));
    let output = MatchingPlan {
        matches: vec![cand("out", "L1", 2, 3)],
    };
    assert!(build_supernetwork(&a, &b, &output, 0).is_err());
    assert!(build_supernetwork(&a, &a, &MatchingPlan::default(), 0).is_err());
}

#[test]
fn supernet_file_round_trip_is_byte_identical() {
    let (a, b) = image_pair(Preset::SameDepth);
    let s = matched(&a, &b);
    let text = supernet_to_string(&s);
    let back = supernet_from_str(&text).unwrap();
    assert_eq!(back, s);
    assert_eq!(supernet_to_string(&back), text);
}

#[test]
fn least_squares_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x: Vec<f32> = (0..40 * 4).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let sol = solve_stitch_least_squares(&x, &x, 4, 4, 0.0).unwrap();
    for i in 0..4 {
        for j in 0..4 {
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((sol.weight[i * 4 + j] - want).abs() < 1e-6);
        }
        assert!(sol.bias[i].abs() < 1e-6);
    }
}

#[test]
fn least_squares_recovers_planted_weights() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (s, n, m) = (64, 5, 3);
    let x: Vec<f64> = (0..s * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let w: Vec<f64> = (0..n * m).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let b = [0.5, -1.0, 0.25];
    let y: Vec<f64> = (0..s * m)
        .map(|k| {
            let (r, j) = (k / m, k % m);
            (0..n).map(|i| x[r * n + i] * w[i * m + j]).sum::<f64>() + b[j]
        })
        .collect();
    let xf: Vec<f32> = x.iter().map(|&v| v as f32).collect();
    let yf: Vec<f32> = y.iter().map(|&v| v as f32).collect();
    let sol = solve_stitch_least_squares(&xf, &yf, n, m, 0.0).unwrap();
    for (got, want) in sol.weight.iter().zip(&w) {
        assert!((got - want).abs() < 1e-5, "{got} vs {want}");
    }
    for (got, want) in sol.bias.iter().zip(&b) {
        assert!((got - want).abs() < 1e-5);
    }
}

#[test]
fn least_squares_residual_is_orthogonal_to_centred_inputs() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (s, n, m) = (50, 4, 2);
    let x: Vec<f32> = (0..s * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let y: Vec<f32> = (0..s * m).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let sol = solve_stitch_least_squares(&x, &y, n, m, 0.0).unwrap();
    let mean: Vec<f64> = (0..n).map(|i| (0..s).map(|r| x[r * n + i] as f64).sum::<f64>() / s as f64).collect();
    for i in 0..n {
        for j in 0..m {
            let dot: f64 = (0..s)
                .map(|r| {
                    let pred = (0..n).map(|k| x[r * n + k] as f64 * sol.weight[k * m + j]).sum::<f64>() + sol.bias[j];
                    (x[r * n + i] as f64 - mean[i]) * (y[r * m + j] as f64 - pred)
                })
                .sum();
            assert!(dot.abs() <= 1e-4, "{dot}");
        }
    }
}

#[test]
fn singular_system_without_ridge_is_an_error() {
    let x: Vec<f32> = (0..20).flat_map(|i| [i as f32, 2.0 * i as f32]).collect();
    let y: Vec<f32> = (0..20).map(|i| i as f32).collect();
    let err = solve_stitch_least_squares(&x, &y, 2, 1, 0.0).unwrap_err();
    assert!(err.to_string().contains("λ > 0"), "{err}");
    assert!(solve_stitch_least_squares(&x, &y, 2, 1, 1e-3).is_ok());
}

fn tabular_pair() -> (crate::synthdata::Dataset, NetworkGraph, NetworkGraph) {
    let ds = gen_tabular(0, 300, TabularTask::Rings).unwrap();
    let a = mlp("a", &ds.task(), &[8, 6], 1).unwrap();
    let b = mlp("b", &ds.task(), &[5, 7], 2).unwrap();
    (ds, a, b)
}

#[test]
fn self_stitch_recovers_identity() {
    let ds = gen_images(1, 300, 4).unwrap();
    let (a, _) = preset_parents(Preset::SameDepth, &ds.task(), 4).unwrap();
    let copy = a.clone().with_name("copy");
    let s = matched(&a, &copy);
    let (_, report) = train_stitches(&s, &ds, &StitchTrainConfig::default()).unwrap();
    for (id, st) in &report.stitches {
        assert!(st.final_mse <= 1e-8, "{id}: {}", st.final_mse);
    }
}

#[test]
fn closed_form_beats_adam_on_identical_samples() {
    let (ds, a, b) = tabular_pair();
    let s = matched(&a, &b);
    let (_, exact) = train_stitches(&s, &ds, &StitchTrainConfig::default()).unwrap();
    let adam_cfg = StitchTrainConfig {
        method: StitchMethod::Adam,
        sample_budget: 4096,
        ..StitchTrainConfig::default()
    };
    let (_, adam) = train_stitches(&s, &ds, &adam_cfg).unwrap();
    assert_eq!(exact.samples, adam.samples);
    for (id, st) in &exact.stitches {
        let other = &adam.stitches[id];
        assert!(st.final_mse <= other.final_mse + 1e-6, "{id}");
        assert!(other.final_mse < other.initial_mse, "{id}");
    }
}

#[test]
fn training_touches_only_stitches() {
    let (ds, a, b) = tabular_pair();
    let s = matched(&a, &b);
    for method in [StitchMethod::ClosedForm, StitchMethod::Adam] {
        let cfg = StitchTrainConfig {
            method,
            sample_budget: 256,
            ..StitchTrainConfig::default()
        };
        let (t, _) = train_stitches(&s, &ds, &cfg).unwrap();
        for n in s.graph().nodes() {
            let after = t.graph().node(&n.id).unwrap();
            let is_stitch = s.stitches().iter().any(|st| st.id == n.id);
            if !is_stitch {
                assert!(n.weights.iter().zip(&after.weights).all(|(x, y)| x.bit_eq(y)), "{}", n.id);
            }
        }
    }
}

#[test]
fn joint_training_equals_training_alone() {
    let (ds, a, b) = tabular_pair();
    let s = matched(&a, &b);
    let cfg = StitchTrainConfig {
        method: StitchMethod::Adam,
        sample_budget: 1024,
        ..StitchTrainConfig::default()
    };
    let (_, joint) = train_stitches(&s, &ds, &cfg).unwrap();
    for st in s.stitches() {
        let (_, alone) = train_selected_stitches(&s, &ds, &cfg, std::slice::from_ref(&st.id)).unwrap();
        let d = (alone.stitches[&st.id].final_mse - joint.stitches[&st.id].final_mse).abs();
        assert!(d <= 1e-6, "{}: {d}", st.id);
    }
}

#[test]
fn unknown_stitch_is_rejected() {
    let (ds, a, b) = tabular_pair();
    let s = matched(&a, &b);
    let r = train_selected_stitches(&s, &ds, &StitchTrainConfig::default(), &["A/fc1".to_string()]);
    assert!(r.is_err());
}

#[test]
fn with_stitch_weights_checks_shapes() {
    let (_, a, b) = tabular_pair();
    let s = matched(&a, &b);
    let id = s.stitches()[0].id.clone();
    let mut w = std::collections::BTreeMap::new();
    w.insert(id, vec![Tensor::zeros(&[1, 1]), Tensor::zeros(&[1])]);
    assert!(s.with_stitch_weights(&w).is_err());
}
