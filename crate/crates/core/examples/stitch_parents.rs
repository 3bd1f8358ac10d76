//! Matches two parents layer by layer, builds the supernetwork and fits every
//! stitch in closed form.
//!
//! cargo run --release --example stitch_parents

use stitchnet::stitcher::{
    acyclic_max_matching, build_supernetwork, find_candidates, train_stitches, CandidateFilter, StitchTrainConfig,
    DEFAULT_EXPANSION_BUDGET,
};
use stitchnet::synthdata::{gen_images, preset_parents, train_parent, Preset, TrainConfig};

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

    let cands = find_candidates(&a, &b, &CandidateFilter::default());
    let matching = acyclic_max_matching(&a, &b, &cands, DEFAULT_EXPANSION_BUDGET);
    println!("{} candidates, {} matched after {} expansions", cands.len(), matching.plan.len(), matching.expansions);
    for m in &matching.plan.matches {
        println!("  {:<8} <-> {:<8} {:?} {}x{}", m.node_a, m.node_b, m.kind, m.width_a, m.width_b);
    }

    let supernet = build_supernetwork(&a, &b, &matching.plan, 0)?;
    println!("genotype length {}", supernet.genotype_len());
    let (_, report) = train_stitches(&supernet, &ds, &StitchTrainConfig::default())?;
    for (id, st) in &report.stitches {
        println!("  {id:<22} mse {:>10.5} -> {:.5}", st.initial_mse, st.final_mse);
    }
    Ok(())
}
