//! Computation graphs over layer specs: ordering, execution, cost accounting,
//! pruning, container files and import verification.

mod builder;
mod graph;
pub mod io;


pub use builder::GraphBuilder;
pub use graph::{topological_order, verify_equivalence, ActivationRecord, EquivalenceReport, NetworkGraph, Node, TaskSignature};
pub use io::{load_network, save_network};
