//! Runs each search algorithm on a toy evaluator and prints its final front.
//!
//! cargo run --release --example search_front

use stitchnet::phenotype::{EvalResult, Evaluator, Genotype};
use stitchnet::search::{run_search, Algorithm, RunConfig};

/// Output gene 0 reads genes 0..8, output gene 1 reads genes 8..16. Each read
/// gene set to 1 trades 100 madds for a little accuracy.
struct Ladder;

impl Evaluator for Ladder {
    fn genotype_len(&self) -> usize {
        17
    }

    fn reference_madds(&self) -> u64 {
        2000
    }

    fn evaluate(&self, g: &Genotype) -> stitchnet::Result<EvalResult> {
        let out = g.output_gene() as usize;
        let read: Vec<usize> = match out {
            0 => (0..8).collect(),
            1 => (8..16).collect(),
            _ => (0..16).collect(),
        };
        let ones = read.iter().filter(|&&i| g.0[i] == 1).count() as f64;
        let base = [0.6, 0.7, 0.8][out];
        let mut active_mask = vec![false; 17];
        read.iter().for_each(|&i| active_mask[i] = true);
        active_mask[16] = true;
        Ok(EvalResult {
            accuracy: (base + 0.02 * ones).min(1.0),
            madds: 200 + 100 * ones as u64 + 400 * (out == 2) as u64,
            active_mask,
            skipped: false,
            probabilities: None,
        })
    }
}

fn main() -> stitchnet::Result<()> {
    for algo in Algorithm::ALL {
        let cfg = RunConfig {
            algorithm: algo,
            population_size: 16,
            budget: 600,
            ..RunConfig::default()
        };
        let out = run_search(&Ladder, &cfg)?;
        println!(
            "{:<9} hypervolume {:.4}  skipped {:.2}  stopped by {}",
            algo.name(),
            out.final_hypervolume(),
            out.skip_fraction(),
            out.termination
        );
        for e in out.archive.entries() {
            println!("    {}  acc {:.2}  madds {}", e.genotype, e.point.accuracy, e.point.madds);
        }
    }
    Ok(())
}
