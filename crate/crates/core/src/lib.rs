pub mod error;
pub mod experiment;
pub mod netgraph;
pub mod phenotype;
pub mod search;
pub mod stitcher;
pub mod synthdata;
pub mod tensorcore;

pub use error::{Error, Result};
