//! Maximum agreement subtrees of binary phylogenetic trees.
//!
//! Exact dynamic programs, greedy matchers with provable size guarantees on
//! balanced inputs, a path/balanced decomposition for general trees, and
//! extremal constructions showing the guarantees are tight in order.

pub mod bounds;
pub mod cli;
pub mod decompose;
pub mod error;
pub mod exact;
pub mod generators;
pub mod matchers;
pub mod newick;
pub mod ops;
pub mod tree;

pub use error::{Error, Result};
pub use tree::{BalanceClass, Label, LeafSet, NodeId, RootedBuilder, RootedTree, Tree, UnrootedTree};
