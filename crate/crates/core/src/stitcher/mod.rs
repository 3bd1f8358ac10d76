//! Merging two trained parents into a supernetwork.
//!
//! Pipeline: [`find_candidates`] → [`acyclic_max_matching`] → [`build_supernetwork`]
//! → [`train_stitches`].

mod candidates;
mod lstsq;
mod matching;
mod supernet;
mod train;

#[cfg(test)]
mod tests;

pub use candidates::{find_candidates, CandidateFilter, MatchCandidate, StitchKind};
pub use lstsq::{solve_stitch_least_squares, LstsqSolution, NormalEquations};
pub use matching::{
    acyclic_max_matching, genotype_len, would_create_cycle, MatchingOutcome, MatchingPlan, DEFAULT_EXPANSION_BUDGET,
};
pub use supernet::{
    build_supernetwork, load_supernet, node_id, save_supernet, stitch_id, supernet_from_str, supernet_to_string,
    switch_id, Side, StitchEntry, Supernetwork, SwitchEntry, ENSEMBLE_ID, INPUT_ID, OUTPUT_SWITCH_ID,
};
pub use train::{
    train_selected_stitches, train_stitches, StitchMethod, StitchReport, StitchStat, StitchTrainConfig,
};
