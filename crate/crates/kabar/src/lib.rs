//! Perfectly balanced k-way graph partition refinement.
//!
//! Local searches that ignore the balance constraint are encoded into a
//! layered directed model; negative cycles in that model are combinations
//! of searches that reduce the cut while keeping every block within
//! ⌈n/k⌉ nodes. Zero-weight cycles diversify, and an s-t variant of the
//! model balances overloaded partitions with minimum cut damage.

pub mod advanced;
pub mod balance;
pub mod basic;
pub mod dls;
pub mod driver;
pub mod error;
pub mod graph;
pub mod io;
pub mod model;
pub mod partition;

pub use error::KabarError;
pub use graph::{Graph, NodeId, Weight};
pub use partition::{BlockId, EligibilityState, NodeMove, Partition};
