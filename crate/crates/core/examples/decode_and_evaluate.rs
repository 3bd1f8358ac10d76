//! Decodes genotypes into subnetworks, scores them, and shows when a change
//! can reuse the parent's objectives.
//!
//! cargo run --release --example decode_and_evaluate

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stitchnet::phenotype::{
    biased_sample, compute_ece, decode, maybe_skip, Evaluator, Genotype, SupernetEvaluator, DEFAULT_ECE_BINS,
};
use stitchnet::stitcher::{
    acyclic_max_matching, build_supernetwork, find_candidates, train_stitches, CandidateFilter, StitchTrainConfig,
    DEFAULT_EXPANSION_BUDGET,
};
use stitchnet::synthdata::{gen_images, preset_parents, train_parent, Preset, Split, TrainConfig};

fn main() -> stitchnet::Result<()> {
    let ds = gen_images(0, 1200, 4)?;
    let (a, b) = preset_parents(Preset::SameDepth, &ds.task(), 0)?;
    let cfg = TrainConfig {
        sample_budget: 20_000,
        lr: 3e-3,
        ..TrainConfig::default()
    };
    let a = train_parent(&a, &ds, &cfg)?.graph;
    let b = train_parent(&b, &ds, &cfg)?.graph;
    let plan = acyclic_max_matching(&a, &b, &find_candidates(&a, &b, &CandidateFilter::default()), DEFAULT_EXPANSION_BUDGET).plan;
    let (supernet, _) = train_stitches(&build_supernetwork(&a, &b, &plan, 0)?, &ds, &StitchTrainConfig::default())?;
    let l = supernet.genotype_len();
    let eval = SupernetEvaluator::new(Arc::new(supernet.clone()), &ds, Split::Validation, None)?.keep_probabilities(true);

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut genotypes: Vec<Genotype> = (0..3).map(|out| Genotype::reference(l, out)).collect();
    genotypes.extend((0..4).map(|_| biased_sample(l, &mut rng)));
    for g in &genotypes {
        let r = eval.evaluate(g)?;
        let nodes = decode(&supernet, g)?.graph.nodes().len();
        let ece = compute_ece(r.probabilities.as_ref().unwrap(), eval.labels(), DEFAULT_ECE_BINS)?.ece;
        let active = r.active_mask.iter().filter(|&&x| x).count();
        println!("{g}  acc {:.3}  madds {:>6}  ece {ece:.3}  nodes {nodes:>2}  active {active}/{l}", r.accuracy, r.madds);
    }

    // Flip a gene the parent never reads: the objectives carry over unchanged.
    let parent = Genotype::reference(l, 0);
    let pr = eval.evaluate(&parent)?;
    if let Some(i) = pr.active_mask.iter().position(|&x| !x) {
        let mut child = parent.clone();
        child.0[i] = 1;
        let inherited = maybe_skip(&pr, &parent, &child)?.expect("only inactive genes changed");
        let fresh = eval.evaluate(&child)?;
        println!("{parent} -> {child}: inherited {:.3}, fresh {:.3}", inherited.accuracy, fresh.accuracy);
    }
    Ok(())
}
