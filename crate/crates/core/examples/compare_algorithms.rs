//! Compares final hypervolumes of several algorithms with Mann-Whitney U tests
//! and Holm correction.
//!
//! cargo run --release --example compare_algorithms

use stitchnet::search::{compare_groups, mann_whitney};

fn main() -> stitchnet::Result<()> {
    let groups = vec![
        ("gomea".to_string(), vec![0.812, 0.809, 0.815, 0.811, 0.810]),
        ("ga".to_string(), vec![0.806, 0.808, 0.805, 0.807, 0.806]),
        ("random".to_string(), vec![0.801, 0.805, 0.799, 0.803, 0.802]),
    ];
    let mw = mann_whitney(&groups[0].1, &groups[2].1)?;
    println!("gomea vs random alone: U = {}, p = {:.4} (exact: {})", mw.u, mw.p_value, mw.exact);

    let cmp = compare_groups(&groups, 0.05)?;
    println!("best: {} (median {:.4})", cmp.best, cmp.best_median);
    for r in &cmp.rows {
        println!(
            "  vs {:<7} median {:.4}  U {:>4}  p {:.4}  {}",
            r.group,
            r.median,
            r.u,
            r.p_value,
            if r.significant { "significant" } else { "not significant" }
        );
    }
    Ok(())
}
