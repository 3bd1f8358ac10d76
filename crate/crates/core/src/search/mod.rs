//! Multi-objective search over supernetwork genotypes.
//!
//! Every algorithm runs one logical loop per population member against a shared
//! evaluation service; see [`run_search`].

mod archive;
mod engine;
mod gom;
mod linkage;
mod log;
mod objective;
mod stats;
mod variation;

#[cfg(test)]
mod tests;

pub use archive::{hypervolume_2d, Archive, ArchiveEntry, HV_REFERENCE};
pub use engine::{run_search, Algorithm, LogRecord, RunConfig, RunOutcome, Termination};
pub use gom::{gom_accept, gom_step, GomApplication, GomStats, Individual};
pub use linkage::{build_linkage_tree, mutual_information_matrix};
pub use log::{
    read_archive_csv, read_hv_csv, read_runlog, write_archive_csv, write_hv_csv, write_runlog, ArchiveRow, HvRow,
};
pub(crate) use log::write_csv;
pub use objective::{
    assign_weights, constrained_better, steering_threshold, tschebysheff, weight_grid, ObjectivePoint, Weight,
    WEIGHT_EPS,
};
pub use stats::{compare_groups, holm, mann_whitney, median, Comparison, GroupComparison, MannWhitney, EXACT_LIMIT};
pub use variation::{ga_generate, ga_replace, knn_neighborhood, mutate, sample_kernel_size, two_point_crossover};
