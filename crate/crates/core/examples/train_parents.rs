//! Generates the synthetic shapes dataset and trains both parents of a preset.
//!
//! cargo run --release --example train_parents

use stitchnet::synthdata::{gen_images, preset_parents, train_parent, Preset, TrainConfig};

fn main() -> stitchnet::Result<()> {
    let ds = gen_images(0, 2000, 4)?;
    println!("{}: {} samples, classes {:?}", ds.name, ds.len(), ds.class_counts());
    let (a, b) = preset_parents(Preset::DeepShallow, &ds.task(), 0)?;
    let cfg = TrainConfig {
        lr: 3e-3,
        sample_budget: 30_000,
        ..TrainConfig::default()
    };
    for net in [a, b] {
        let out = train_parent(&net, &ds, &cfg)?;
        println!(
            "{:<8} {:>3} nodes {:>7} madds  train {:.3}  validation {:.3}",
            net.name(),
            net.nodes().len(),
            net.network_madds(),
            out.train_accuracy,
            out.validation_accuracy
        );
    }
    Ok(())
}
