//! Genotypes over a supernetwork's switches and what they decode to.

mod decode;
mod ece;
mod evaluate;
mod genotype;

#[cfg(test)]
mod tests;

pub use decode::{decode, Decoded};
pub use ece::{compute_ece, EceBin, EceReport, DEFAULT_ECE_BINS};
pub use evaluate::{evaluate, maybe_skip, EvalResult, Evaluator, SupernetEvaluator};
pub use genotype::{alphabet, biased_probability, biased_sample, Genotype};
